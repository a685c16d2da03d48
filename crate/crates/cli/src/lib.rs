//! Configuration ingestion, suite orchestration and report emission for the
//! `opspace` command-line tool.
//!
//! Exit status: 0 when every selected suite passes, 1 when a suite fails
//! or hits a numerical error, 2 on configuration or output errors.

pub mod config;
pub mod context;
pub mod report;
pub mod suites;

use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use opspace::cache::EigCache;
use serde_json::json;

use crate::config::{ExperimentConfig, Suite};
use crate::context::Context;
use crate::report::{OperatorStamp, Report};
use crate::suites::fingerprint_hex;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] opspace::Error),
    #[error("output error: {0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Io(_) => 2,
            CliError::Core(_) => 1,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "opspace", version, about = "Verification suites for operator-adapted function spaces")]
pub struct Cli {
    /// Experiment configuration (TOML).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory; overrides `output.dir`.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Seed; overrides `seed`.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads; overrides `threads`.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build the configured operator, decompose it and cache the result.
    BuildOperator,
    /// Run one suite, or all of them.
    Verify {
        #[arg(value_enum)]
        suite: Option<Suite>,
        #[arg(long, conflicts_with = "suite")]
        all: bool,
    },
    /// Inspect the decomposition cache.
    Cache {
        #[command(subcommand)]
        action: CacheAction,
    },
    /// Print the JSON Schema of the report.
    ReportSchema,
}

#[derive(Debug, Subcommand)]
pub enum CacheAction {
    List,
    Purge,
}

/// Parses arguments from the process and runs; returns the exit status.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match run(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn run(cli: &Cli) -> Result<i32, CliError> {
    match &cli.command {
        Command::ReportSchema => {
            let text = serde_json::to_string_pretty(&report::schema()).expect("schema serializes");
            match &cli.out {
                Some(dir) => {
                    std::fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
                    let p = dir.join("report.schema.json");
                    std::fs::write(&p, text + "\n").map_err(|e| CliError::Io(format!("{}: {e}", p.display())))?;
                }
                None => println!("{text}"),
            }
            Ok(0)
        }
        Command::Cache { action } => {
            let cache = match &cli.config {
                Some(p) => EigCache::from_env_or(ExperimentConfig::load(p)?.0.cache.dir),
                None => EigCache::from_env_or(config::CacheConfig::default().dir),
            };
            match action {
                CacheAction::List => {
                    let entries = cache.list()?;
                    println!("fingerprint,size,complex,bytes,path");
                    for e in entries {
                        println!(
                            "{},{},{},{},{}",
                            fingerprint_hex(e.fingerprint),
                            e.size,
                            e.complex,
                            e.bytes,
                            e.path.display()
                        );
                    }
                }
                CacheAction::Purge => {
                    let n = cache.purge()?;
                    println!("removed {n} entries from {}", cache.dir().display());
                }
            }
            Ok(0)
        }
        Command::BuildOperator => {
            let (cfg, path, text) = load(cli)?;
            cfg.validate(&[], &text, &path)?;
            configure_threads(cli.threads.unwrap_or(cfg.threads));
            let mut ctx = Context::new(&cfg, cli.seed.unwrap_or(cfg.seed))?;
            let op = ctx.operator()?;
            if op.len() > cfg.operator.dense_cap {
                return Err(CliError::Config(format!(
                    "{}: grid of {} nodes exceeds the dense eigensolver cap of {}",
                    path.display(),
                    op.len(),
                    cfg.operator.dense_cap
                )));
            }
            let dec = ctx.decomposition()?;
            let out = cli.out.clone().unwrap_or_else(|| cfg.output.dir.clone());
            std::fs::create_dir_all(&out).map_err(|e| CliError::Io(format!("{}: {e}", out.display())))?;
            let summary = json!({
                "fingerprint": fingerprint_hex(op.fingerprint()),
                "kind": op.kind(),
                "nodes": op.len(),
                "gershgorin_bounds": op.spectral_bounds(),
                "eigenvalue_range": [dec.eigenvalues()[0], dec.spectral_radius()],
                "max_relative_residual": dec.max_relative_residual(&op),
                "orthonormality_defect": dec.orthonormality_defect(),
                "cache": ctx.cache().map(|c| c.path_for(op.fingerprint())),
            });
            let p = out.join("operator.json");
            std::fs::write(&p, serde_json::to_string_pretty(&summary).expect("summary serializes") + "\n")
                .map_err(|e| CliError::Io(format!("{}: {e}", p.display())))?;
            println!("operator {} ({} nodes) written to {}", fingerprint_hex(op.fingerprint()), op.len(), p.display());
            Ok(0)
        }
        Command::Verify { suite, all } => {
            let (cfg, path, text) = load(cli)?;
            let selected: Vec<Suite> = match (suite, all) {
                (Some(s), _) => vec![*s],
                (None, true) => Suite::ALL.to_vec(),
                (None, false) => {
                    return Err(CliError::Config("name a suite or pass --all".into()));
                }
            };
            cfg.validate(&selected, &text, &path)?;
            configure_threads(cli.threads.unwrap_or(cfg.threads));
            let seed = cli.seed.unwrap_or(cfg.seed);
            let out = cli.out.clone().unwrap_or_else(|| cfg.output.dir.clone());
            let mut echo = cfg.clone();
            echo.seed = seed;
            echo.output.dir = out.clone();
            let mut ctx = Context::new(&echo, seed)?;
            let mut outcomes = Vec::new();
            for s in &selected {
                let o = suites::run(*s, &mut ctx)?;
                match (&o.error, o.pass) {
                    (Some(e), _) => eprintln!("suite {} failed: {e}", s.name()),
                    (None, false) => eprintln!("suite {} failed its budgets", s.name()),
                    (None, true) => eprintln!("suite {} passed", s.name()),
                }
                outcomes.push(o);
            }
            let needs_op = selected.iter().any(|s| !matches!(s, Suite::Kfunc | Suite::Maximal | Suite::Kato));
            let stamp = if needs_op {
                let op = ctx.operator()?;
                Some(OperatorStamp {
                    fingerprint: fingerprint_hex(op.fingerprint()),
                    kind: op.kind(),
                    nodes: op.len(),
                    gershgorin_bounds: op.spectral_bounds(),
                })
            } else {
                None
            };
            let mut report = Report::new(echo.clone(), seed, stamp, outcomes);
            let written = report.write(&out, echo.output.csv)?;
            println!("report written to {}", written.display());
            Ok(if report.pass { 0 } else { 1 })
        }
    }
}

fn load(cli: &Cli) -> Result<(ExperimentConfig, PathBuf, String), CliError> {
    let path = cli
        .config
        .clone()
        .ok_or_else(|| CliError::Config("--config PATH is required".into()))?;
    if !Path::new(&path).is_file() {
        return Err(CliError::Config(format!("{}: config file not found", path.display())));
    }
    let (cfg, text) = ExperimentConfig::load(&path)?;
    Ok((cfg, path, text))
}

fn configure_threads(n: usize) {
    if n > 0 {
        // a second call in the same process keeps the first pool
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
}
