//! Uniform tensor grids standing in for ℝⁿ, with rectangle-rule quadrature.

use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Boundary {
    Periodic,
    Dirichlet,
}

/// Grid descriptor as it appears in configuration files.
///
/// `sizes` and `spacing` may hold a single entry, which is broadcast to all
/// axes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub dim: usize,
    pub sizes: Vec<usize>,
    pub spacing: Vec<f64>,
    pub boundary: Boundary,
}

impl GridSpec {
    pub fn new(dim: usize, size: usize, spacing: f64, boundary: Boundary) -> Self {
        GridSpec {
            dim,
            sizes: vec![size],
            spacing: vec![spacing],
            boundary,
        }
    }

    /// A periodic 1D grid of `n` nodes covering an interval of length `length`.
    pub fn periodic_interval(n: usize, length: f64) -> Self {
        GridSpec::new(1, n, length / n as f64, Boundary::Periodic)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Grid {
    dim: usize,
    sizes: [usize; 3],
    spacing: [f64; 3],
    boundary: Boundary,
    len: usize,
}

impl Grid {
    pub fn new(spec: &GridSpec) -> Result<Grid> {
        let n = spec.dim;
        if !(1..=3).contains(&n) {
            return Err(Error::Config(format!("grid dimension must be 1, 2 or 3, got {n}")));
        }
        let sizes = broadcast(&spec.sizes, n, "sizes")?;
        let spacing = broadcast(&spec.spacing, n, "spacing")?;
        let mut s = [1usize; 3];
        let mut h = [1.0f64; 3];
        for axis in 0..n {
            if sizes[axis] < 2 {
                return Err(Error::Config(format!(
                    "axis {axis} needs at least 2 nodes, got {}",
                    sizes[axis]
                )));
            }
            if !(spacing[axis] > 0.0 && spacing[axis].is_finite()) {
                return Err(Error::Config(format!(
                    "axis {axis} spacing must be positive and finite, got {}",
                    spacing[axis]
                )));
            }
            s[axis] = sizes[axis];
            h[axis] = spacing[axis];
        }
        let len = s[..n].iter().product();
        Ok(Grid {
            dim: n,
            sizes: s,
            spacing: h,
            boundary: spec.boundary,
            len,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn boundary(&self) -> Boundary {
        self.boundary
    }

    /// Total node count.
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes[..self.dim]
    }

    pub fn spacing(&self) -> &[f64] {
        &self.spacing[..self.dim]
    }

    /// Smallest spacing over all axes.
    pub fn min_spacing(&self) -> f64 {
        self.spacing().iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Quadrature weight, identical at every node.
    pub fn weight(&self) -> f64 {
        self.spacing().iter().product()
    }

    /// Side length of the covered box along `axis`.
    pub fn extent(&self, axis: usize) -> f64 {
        let n = self.sizes[axis] as f64;
        match self.boundary {
            Boundary::Periodic => n * self.spacing[axis],
            Boundary::Dirichlet => (n + 1.0) * self.spacing[axis],
        }
    }

    pub fn spec(&self) -> GridSpec {
        GridSpec {
            dim: self.dim,
            sizes: self.sizes().to_vec(),
            spacing: self.spacing().to_vec(),
            boundary: self.boundary,
        }
    }

    /// Multi-index of node `idx`; axis 0 varies fastest.
    pub fn multi_index(&self, idx: usize) -> [usize; 3] {
        debug_assert!(idx < self.len);
        let mut rest = idx;
        let mut out = [0; 3];
        for axis in 0..self.dim {
            out[axis] = rest % self.sizes[axis];
            rest /= self.sizes[axis];
        }
        out
    }

    pub fn linear_index(&self, mi: [usize; 3]) -> usize {
        let mut idx = 0;
        for axis in (0..self.dim).rev() {
            idx = idx * self.sizes[axis] + mi[axis];
        }
        idx
    }

    /// Physical coordinates of node `idx`. Dirichlet nodes are the interior
    /// points `(i+1)h` of `[0, (N+1)h]`; periodic nodes are `ih` on `[0, Nh)`.
    pub fn coords(&self, idx: usize) -> [f64; 3] {
        let mi = self.multi_index(idx);
        let mut x = [0.0; 3];
        let offset = match self.boundary {
            Boundary::Periodic => 0.0,
            Boundary::Dirichlet => 1.0,
        };
        for axis in 0..self.dim {
            x[axis] = (mi[axis] as f64 + offset) * self.spacing[axis];
        }
        x
    }

    /// Per-axis signed displacement from `x` to `y`, wrapped to the minimal
    /// image on periodic grids.
    pub fn displacement(&self, x: usize, y: usize) -> [f64; 3] {
        let (a, b) = (self.multi_index(x), self.multi_index(y));
        let mut d = [0.0; 3];
        for axis in 0..self.dim {
            let n = self.sizes[axis] as i64;
            let mut k = b[axis] as i64 - a[axis] as i64;
            if self.boundary == Boundary::Periodic {
                k = k.rem_euclid(n);
                if 2 * k > n {
                    k -= n;
                }
            }
            d[axis] = k as f64 * self.spacing[axis];
        }
        d
    }

    /// Euclidean distance, with per-axis wraparound on periodic grids.
    pub fn distance(&self, x: usize, y: usize) -> f64 {
        let d = self.displacement(x, y);
        d[..self.dim].iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Largest distance between two nodes.
    pub fn diameter(&self) -> f64 {
        let mut s = 0.0;
        for axis in 0..self.dim {
            let n = self.sizes[axis];
            let k = match self.boundary {
                Boundary::Periodic => n / 2,
                Boundary::Dirichlet => n - 1,
            };
            let d = k as f64 * self.spacing[axis];
            s += d * d;
        }
        s.sqrt()
    }

    /// Neighbor of `idx` one step along `axis` in direction `forward`;
    /// `None` past a Dirichlet edge.
    pub fn neighbor(&self, idx: usize, axis: usize, forward: bool) -> Option<usize> {
        let mut mi = self.multi_index(idx);
        let n = self.sizes[axis];
        let i = mi[axis];
        mi[axis] = match (self.boundary, forward) {
            (Boundary::Periodic, true) => (i + 1) % n,
            (Boundary::Periodic, false) => (i + n - 1) % n,
            (Boundary::Dirichlet, true) if i + 1 < n => i + 1,
            (Boundary::Dirichlet, false) if i > 0 => i - 1,
            _ => return None,
        };
        Some(self.linear_index(mi))
    }
}

fn broadcast<T: Copy>(v: &[T], n: usize, what: &str) -> Result<Vec<T>> {
    match v.len() {
        1 => Ok(vec![v[0]; n]),
        k if k == n => Ok(v.to_vec()),
        k => Err(Error::Config(format!(
            "grid {what} has {k} entries, expected 1 or {n}"
        ))),
    }
}

/// A scalar field sampled at the nodes of a grid.
#[derive(Clone, Debug)]
pub struct GridFunction {
    grid: Arc<Grid>,
    values: Vec<Complex64>,
}

impl GridFunction {
    pub fn new(grid: Arc<Grid>, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::Domain(format!(
                "grid function has {} values for {} nodes",
                values.len(),
                grid.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !(v.re.is_finite() && v.im.is_finite())) {
            return Err(Error::Domain(format!("non-finite value at node {i}")));
        }
        Ok(GridFunction { grid, values })
    }

    pub fn from_real(grid: Arc<Grid>, values: Vec<f64>) -> Result<Self> {
        Self::new(grid, values.into_iter().map(|v| Complex64::new(v, 0.0)).collect())
    }

    pub fn from_fn(grid: Arc<Grid>, f: impl Fn([f64; 3]) -> f64) -> Result<Self> {
        let values = (0..grid.len()).map(|i| f(grid.coords(i))).collect();
        Self::from_real(grid, values)
    }

    pub fn zeros(grid: Arc<Grid>) -> Self {
        let n = grid.len();
        GridFunction {
            grid,
            values: vec![Complex64::new(0.0, 0.0); n],
        }
    }

    pub fn constant(grid: Arc<Grid>, c: f64) -> Self {
        let n = grid.len();
        GridFunction {
            grid,
            values: vec![Complex64::new(c, 0.0); n],
        }
    }

    /// Indicator of a single node.
    pub fn delta(grid: Arc<Grid>, node: usize) -> Self {
        let mut f = Self::zeros(grid);
        f.values[node] = Complex64::new(1.0, 0.0);
        f
    }

    /// Used by internal kernels that produce values known to be finite.
    pub(crate) fn from_parts(grid: Arc<Grid>, values: Vec<Complex64>) -> Self {
        debug_assert_eq!(values.len(), grid.len());
        GridFunction { grid, values }
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<Complex64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn abs(&self) -> Vec<f64> {
        self.values.iter().map(|v| v.norm()).collect()
    }

    pub fn real_parts(&self) -> Vec<f64> {
        self.values.iter().map(|v| v.re).collect()
    }

    pub fn is_real(&self) -> bool {
        self.values.iter().all(|v| v.im == 0.0)
    }

    pub fn lp_norm(&self, p: f64) -> Result<f64> {
        lp_norm(self, p)
    }

    pub fn scale(&self, alpha: f64) -> Self {
        self.map(|v| v * alpha)
    }

    pub fn map(&self, f: impl Fn(Complex64) -> Complex64) -> Self {
        GridFunction {
            grid: self.grid.clone(),
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn add(&self, other: &GridFunction) -> Self {
        self.zip(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &GridFunction) -> Self {
        self.zip(other, |a, b| a - b)
    }

    fn zip(&self, other: &GridFunction, f: impl Fn(Complex64, Complex64) -> Complex64) -> Self {
        assert_eq!(self.len(), other.len(), "grid functions on different grids");
        GridFunction {
            grid: self.grid.clone(),
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        }
    }
}

/// Discrete `L^p` norm `(Σ_x w |f(x)|^p)^{1/p}`; `p = ∞` gives the maximum.
pub fn lp_norm(f: &GridFunction, p: f64) -> Result<f64> {
    check_exponent(p)?;
    Ok(weighted_lp(f.values.iter().map(|v| v.norm()), f.grid.weight(), p))
}

pub(crate) fn check_exponent(p: f64) -> Result<()> {
    if p >= 1.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!("exponent must lie in [1, ∞], got {p}")))
    }
}

/// Weighted `ℓ^p` norm of nonnegative magnitudes, rescaled by the maximum to
/// stay clear of overflow for large `p`.
pub(crate) fn weighted_lp(mags: impl Iterator<Item = f64> + Clone, weight: f64, p: f64) -> f64 {
    let max = mags.clone().fold(0.0f64, f64::max);
    if max == 0.0 {
        return 0.0;
    }
    if p.is_infinite() {
        return max;
    }
    if p == 1.0 {
        return weight * mags.sum::<f64>();
    }
    if p == 2.0 {
        let s: f64 = mags.map(|m| (m / max) * (m / max)).sum();
        return max * (weight * s).sqrt();
    }
    let s: f64 = mags.map(|m| (m / max).powf(p)).sum();
    max * (weight * s).powf(1.0 / p)
}
