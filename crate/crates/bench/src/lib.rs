//! Shared fixtures for the benchmarks.

use std::sync::Arc;

use opspace::operators::{self, FieldPreset};
use opspace::{Boundary, Grid, GridFunction, GridSpec, PotentialSpec, SelfAdjointOperator};

/// Periodic grid on the unit cube with `n` points per side.
pub fn unit_grid(dim: usize, n: usize) -> Arc<Grid> {
    Arc::new(Grid::new(&GridSpec::new(dim, n, 1.0 / n as f64, Boundary::Periodic)).expect("valid grid"))
}

/// `−Δ + V` with a centred quadratic potential.
pub fn quadratic_schrodinger(g: Arc<Grid>, scale: f64) -> SelfAdjointOperator {
    let v = FieldPreset::Quadratic { scale, center: None }.grid_function(g.clone()).expect("potential");
    operators::schrodinger(g, &PotentialSpec::from_signed(&v).expect("split")).expect("operator")
}

/// Uniform noise on `[−1, 1]`.
pub fn noise(g: Arc<Grid>, seed: u64) -> GridFunction {
    FieldPreset::Random { seed, low: -1.0, high: 1.0 }.grid_function(g).expect("noise")
}
