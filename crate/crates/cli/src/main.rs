fn main() {
    std::process::exit(opspace_cli::main_with_args(std::env::args_os()));
}
