//! Discretized self-adjoint operators: Laplacian, Schrödinger with electric
//! and magnetic potentials, and divergence-form elliptic operators.

use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::grid::{Boundary, Grid, GridFunction};

/// Compressed sparse row matrix with complex entries. Real operators simply
/// carry zero imaginary parts.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseMatrix {
    n: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<Complex64>,
}

impl SparseMatrix {
    /// Builds an `n × n` matrix, summing duplicate entries.
    pub fn from_triplets(n: usize, mut triplets: Vec<(usize, usize, Complex64)>) -> Self {
        triplets.sort_by_key(|&(i, j, _)| (i, j));
        let mut row_ptr = vec![0; n + 1];
        let mut col_idx = Vec::with_capacity(triplets.len());
        let mut values: Vec<Complex64> = Vec::with_capacity(triplets.len());
        let mut last: Option<(usize, usize)> = None;
        for (i, j, v) in triplets {
            assert!(i < n && j < n, "triplet ({i},{j}) out of bounds for n={n}");
            if last == Some((i, j)) {
                *values.last_mut().unwrap() += v;
            } else {
                col_idx.push(j);
                values.push(v);
                row_ptr[i + 1] += 1;
                last = Some((i, j));
            }
        }
        for i in 0..n {
            row_ptr[i + 1] += row_ptr[i];
        }
        SparseMatrix {
            n,
            row_ptr,
            col_idx,
            values,
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, Complex64)> + '_ {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        self.col_idx[r.clone()].iter().copied().zip(self.values[r].iter().copied())
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, Complex64)> + '_ {
        (0..self.n).flat_map(move |i| self.row(i).map(move |(j, v)| (i, j, v)))
    }

    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        self.row(i)
            .find(|&(c, _)| c == j)
            .map(|(_, v)| v)
            .unwrap_or_default()
    }

    pub fn is_real(&self) -> bool {
        self.values.iter().all(|v| v.im == 0.0)
    }

    pub fn matvec(&self, x: &[Complex64]) -> Vec<Complex64> {
        assert_eq!(x.len(), self.n);
        (0..self.n)
            .map(|i| self.row(i).map(|(j, v)| v * x[j]).sum())
            .collect()
    }

    pub fn to_dense_real(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.n, self.n);
        for (i, j, v) in self.iter() {
            m[(i, j)] += v.re;
        }
        m
    }

    pub fn to_dense_complex(&self) -> DMatrix<Complex64> {
        let mut m = DMatrix::zeros(self.n, self.n);
        for (i, j, v) in self.iter() {
            m[(i, j)] += v;
        }
        m
    }

    /// `‖A − A^H‖_F / ‖A‖_F`.
    pub fn hermitian_defect(&self) -> f64 {
        let mut diff = 0.0;
        let mut total = 0.0;
        for (i, j, v) in self.iter() {
            diff += (v - self.get(j, i).conj()).norm_sqr();
            total += v.norm_sqr();
        }
        if total == 0.0 {
            0.0
        } else {
            (diff / total).sqrt()
        }
    }

    /// Gershgorin enclosure of the (real) spectrum of a Hermitian matrix.
    pub fn gershgorin(&self) -> (f64, f64) {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for i in 0..self.n {
            let mut d = 0.0;
            let mut r = 0.0;
            for (j, v) in self.row(i) {
                if i == j {
                    d += v.re;
                } else {
                    r += v.norm();
                }
            }
            lo = lo.min(d - r);
            hi = hi.max(d + r);
        }
        (lo, hi)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OperatorKind {
    Laplacian,
    Schrodinger,
    MagneticSchrodinger,
    Elliptic,
}

impl fmt::Display for OperatorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            OperatorKind::Laplacian => "laplacian",
            OperatorKind::Schrodinger => "schrodinger",
            OperatorKind::MagneticSchrodinger => "magnetic_schrodinger",
            OperatorKind::Elliptic => "elliptic",
        };
        f.write_str(s)
    }
}

/// A discretized self-adjoint operator together with its provenance.
#[derive(Clone, Debug)]
pub struct SelfAdjointOperator {
    grid: Arc<Grid>,
    matrix: SparseMatrix,
    kind: OperatorKind,
    fingerprint: u64,
    spectral_bounds: (f64, f64),
}

impl SelfAdjointOperator {
    fn assemble(grid: Arc<Grid>, kind: OperatorKind, triplets: Vec<(usize, usize, Complex64)>) -> Self {
        let matrix = SparseMatrix::from_triplets(grid.len(), triplets);
        let fingerprint = fingerprint_of(&grid, kind, &matrix);
        let spectral_bounds = matrix.gershgorin();
        SelfAdjointOperator {
            grid,
            matrix,
            kind,
            fingerprint,
            spectral_bounds,
        }
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn matrix(&self) -> &SparseMatrix {
        &self.matrix
    }

    pub fn kind(&self) -> OperatorKind {
        self.kind
    }

    pub fn fingerprint(&self) -> u64 {
        self.fingerprint
    }

    pub fn len(&self) -> usize {
        self.matrix.dim()
    }

    pub fn is_empty(&self) -> bool {
        self.matrix.dim() == 0
    }

    pub fn is_real(&self) -> bool {
        self.matrix.is_real()
    }

    /// `(λ_min, λ_max)` enclosure: Gershgorin at build time, exact after
    /// [`SelfAdjointOperator::with_spectral_bounds`].
    pub fn spectral_bounds(&self) -> (f64, f64) {
        self.spectral_bounds
    }

    pub fn with_spectral_bounds(mut self, lo: f64, hi: f64) -> Self {
        self.spectral_bounds = (lo, hi);
        self
    }

    pub fn apply(&self, f: &GridFunction) -> GridFunction {
        GridFunction::from_parts(self.grid.clone(), self.matrix.matvec(f.values()))
    }

    pub fn hermitian_defect(&self) -> f64 {
        self.matrix.hermitian_defect()
    }

    /// `⟨f, 𝓛f⟩ / ⟨f, f⟩` in the Euclidean inner product.
    pub fn rayleigh_quotient(&self, f: &GridFunction) -> f64 {
        let lf = self.matrix.matvec(f.values());
        let num: Complex64 = f.values().iter().zip(&lf).map(|(a, b)| a.conj() * b).sum();
        let den: f64 = f.values().iter().map(|a| a.norm_sqr()).sum();
        num.re / den
    }
}

fn fingerprint_of(grid: &Grid, kind: OperatorKind, m: &SparseMatrix) -> u64 {
    let mut h = Sha256::new();
    h.update(kind.to_string().as_bytes());
    h.update([grid.dim() as u8, grid.boundary() as u8]);
    for (&n, &s) in grid.sizes().iter().zip(grid.spacing()) {
        h.update((n as u64).to_le_bytes());
        h.update(s.to_bits().to_le_bytes());
    }
    for (i, j, v) in m.iter() {
        h.update((i as u64).to_le_bytes());
        h.update((j as u64).to_le_bytes());
        h.update(v.re.to_bits().to_le_bytes());
        h.update(v.im.to_bits().to_le_bytes());
    }
    let digest = h.finalize();
    u64::from_le_bytes(digest[..8].try_into().expect("digest has 32 bytes"))
}

/// `V = V₊ − V₋` with optional real magnetic components `a_1..a_n`.
#[derive(Clone, Debug)]
pub struct PotentialSpec {
    v_plus: GridFunction,
    v_minus: GridFunction,
    magnetic: Option<Vec<GridFunction>>,
}

impl PotentialSpec {
    pub fn new(v_plus: GridFunction, v_minus: GridFunction) -> Result<Self> {
        for (name, v) in [("V_plus", &v_plus), ("V_minus", &v_minus)] {
            if let Some(i) = v.values().iter().position(|z| z.im != 0.0 || z.re < 0.0) {
                return Err(Error::Config(format!(
                    "{name} must be real and nonnegative (node {i})"
                )));
            }
        }
        if v_plus.len() != v_minus.len() {
            return Err(Error::Config("V_plus and V_minus live on different grids".into()));
        }
        Ok(PotentialSpec {
            v_plus,
            v_minus,
            magnetic: None,
        })
    }

    pub fn zero(grid: Arc<Grid>) -> Self {
        PotentialSpec {
            v_plus: GridFunction::zeros(grid.clone()),
            v_minus: GridFunction::zeros(grid),
            magnetic: None,
        }
    }

    /// Splits a signed real potential into its positive and negative parts.
    pub fn from_signed(v: &GridFunction) -> Result<Self> {
        if !v.is_real() {
            return Err(Error::Config("potential must be real-valued".into()));
        }
        let re = v.real_parts();
        let plus = re.iter().map(|&x| x.max(0.0)).collect();
        let minus = re.iter().map(|&x| (-x).max(0.0)).collect();
        Self::new(
            GridFunction::from_real(v.grid().clone(), plus)?,
            GridFunction::from_real(v.grid().clone(), minus)?,
        )
    }

    pub fn with_magnetic(mut self, a: Vec<GridFunction>) -> Self {
        self.magnetic = Some(a);
        self
    }

    pub fn v_plus(&self) -> &GridFunction {
        &self.v_plus
    }

    pub fn v_minus(&self) -> &GridFunction {
        &self.v_minus
    }

    pub fn magnetic(&self) -> Option<&[GridFunction]> {
        self.magnetic.as_deref()
    }

    /// `V₊ − V₋` at each node.
    pub fn signed(&self) -> Vec<f64> {
        self.v_plus
            .values()
            .iter()
            .zip(self.v_minus.values())
            .map(|(p, m)| p.re - m.re)
            .collect()
    }
}

fn require_operator_dim(grid: &Grid) -> Result<()> {
    if grid.dim() > 2 {
        return Err(Error::UnsupportedSize(format!(
            "operators are built on 1D and 2D grids only (got dimension {})",
            grid.dim()
        )));
    }
    Ok(())
}

fn laplacian_triplets(grid: &Grid) -> Vec<(usize, usize, Complex64)> {
    let mut t = Vec::with_capacity(grid.len() * (2 * grid.dim() + 1));
    for x in 0..grid.len() {
        for axis in 0..grid.dim() {
            let c = 1.0 / (grid.spacing()[axis] * grid.spacing()[axis]);
            t.push((x, x, Complex64::new(2.0 * c, 0.0)));
            for forward in [true, false] {
                if let Some(y) = grid.neighbor(x, axis, forward) {
                    t.push((x, y, Complex64::new(-c, 0.0)));
                }
            }
        }
    }
    t
}

/// `−Δ` with the `(2n+1)`-point stencil.
pub fn laplacian(grid: Arc<Grid>) -> Result<SelfAdjointOperator> {
    require_operator_dim(&grid)?;
    let t = laplacian_triplets(&grid);
    Ok(SelfAdjointOperator::assemble(grid, OperatorKind::Laplacian, t))
}

/// `−Δ + V₊ − V₋`.
pub fn schrodinger(grid: Arc<Grid>, pot: &PotentialSpec) -> Result<SelfAdjointOperator> {
    require_operator_dim(&grid)?;
    if pot.magnetic.is_some() {
        return Err(Error::Config(
            "potential has a magnetic part; use magnetic_schrodinger".into(),
        ));
    }
    check_potential_grid(&grid, pot)?;
    let mut t = laplacian_triplets(&grid);
    for (x, v) in pot.signed().into_iter().enumerate() {
        t.push((x, x, Complex64::new(v, 0.0)));
    }
    Ok(SelfAdjointOperator::assemble(grid, OperatorKind::Schrodinger, t))
}

fn check_potential_grid(grid: &Grid, pot: &PotentialSpec) -> Result<()> {
    if pot.v_plus.len() != grid.len() {
        return Err(Error::Config(format!(
            "potential has {} values, grid has {} nodes",
            pot.v_plus.len(),
            grid.len()
        )));
    }
    Ok(())
}

/// `−Σ_j (∂_j + i a_j)² + V` with Peierls phases: the hopping term from `x`
/// to `x + h e_j` carries `exp(i h a_j(midpoint))`, the midpoint value being
/// the average of the two nodal values.
pub fn magnetic_schrodinger(grid: Arc<Grid>, pot: &PotentialSpec) -> Result<SelfAdjointOperator> {
    require_operator_dim(&grid)?;
    check_potential_grid(&grid, pot)?;
    let a = pot
        .magnetic
        .as_ref()
        .ok_or_else(|| Error::Config("magnetic_schrodinger needs magnetic components".into()))?;
    if a.len() != grid.dim() {
        return Err(Error::Config(format!(
            "expected {} magnetic components, got {}",
            grid.dim(),
            a.len()
        )));
    }
    for (j, aj) in a.iter().enumerate() {
        if aj.len() != grid.len() {
            return Err(Error::Config(format!("magnetic component {j} has wrong length")));
        }
        if let Some(i) = aj.values().iter().position(|z| z.im != 0.0) {
            return Err(Error::Config(format!(
                "magnetic component {j} is complex-valued at node {i}"
            )));
        }
    }
    let mut t = Vec::with_capacity(grid.len() * (2 * grid.dim() + 1));
    for (x, v) in pot.signed().into_iter().enumerate() {
        t.push((x, x, Complex64::new(v, 0.0)));
    }
    for x in 0..grid.len() {
        for (axis, aj) in a.iter().enumerate() {
            let h = grid.spacing()[axis];
            let c = 1.0 / (h * h);
            t.push((x, x, Complex64::new(2.0 * c, 0.0)));
            if let Some(y) = grid.neighbor(x, axis, true) {
                let mid = 0.5 * (aj.values()[x].re + aj.values()[y].re);
                let hop = Complex64::from_polar(c, h * mid);
                t.push((x, y, -hop));
                t.push((y, x, -hop.conj()));
            }
        }
    }
    Ok(SelfAdjointOperator::assemble(
        grid,
        OperatorKind::MagneticSchrodinger,
        t,
    ))
}

/// Symmetric coefficient matrices `(a_jk(x))`, one per node, row-major.
#[derive(Clone, Debug)]
pub struct CoefficientField {
    dim: usize,
    values: Vec<f64>,
}

impl CoefficientField {
    pub fn new(dim: usize, values: Vec<f64>) -> Self {
        CoefficientField { dim, values }
    }

    /// `a_jk(x) = s(x) δ_jk`.
    pub fn isotropic(dim: usize, scalar: &[f64]) -> Self {
        let mut values = Vec::with_capacity(scalar.len() * dim * dim);
        for &s in scalar {
            for j in 0..dim {
                for k in 0..dim {
                    values.push(if j == k { s } else { 0.0 });
                }
            }
        }
        CoefficientField { dim, values }
    }

    pub fn identity(dim: usize, nodes: usize) -> Self {
        Self::isotropic(dim, &vec![1.0; nodes])
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nodes(&self) -> usize {
        self.values.len() / (self.dim * self.dim)
    }

    pub fn at(&self, node: usize, j: usize, k: usize) -> f64 {
        self.values[node * self.dim * self.dim + j * self.dim + k]
    }

    fn eigen_range(&self, node: usize) -> (f64, f64) {
        match self.dim {
            1 => {
                let a = self.at(node, 0, 0);
                (a, a)
            }
            _ => {
                let (a, b, d) = (self.at(node, 0, 0), self.at(node, 0, 1), self.at(node, 1, 1));
                let m = 0.5 * (a + d);
                let r = (0.25 * (a - d) * (a - d) + b * b).sqrt();
                (m - r, m + r)
            }
        }
    }
}

/// `−Σ ∂_j(a_jk ∂_k)` in divergence form.
///
/// Each cell of the grid contributes `¼ Σ_corners h^n g_cᵀ A_cell g_c`, where
/// `g_c` is the one-sided gradient built from the two cell edges meeting at
/// corner `c` and `A_cell` averages the coefficients at the cell's nodes.
/// Every term is a PSD quadratic form, so the operator is symmetric PSD for
/// any elliptic field; with `A = I` it reduces to the standard stencil.
pub fn elliptic(grid: Arc<Grid>, coeffs: &CoefficientField, mu: f64) -> Result<SelfAdjointOperator> {
    require_operator_dim(&grid)?;
    if !(mu > 0.0 && mu <= 1.0) {
        return Err(Error::Config(format!("ellipticity constant must lie in (0, 1], got {mu}")));
    }
    let n = grid.dim();
    if coeffs.dim() != n || coeffs.nodes() != grid.len() {
        return Err(Error::Config(format!(
            "coefficient field is {}x{} on {} nodes, grid is {n}D with {} nodes",
            coeffs.dim(),
            coeffs.dim(),
            coeffs.nodes(),
            grid.len()
        )));
    }
    for x in 0..grid.len() {
        for j in 0..n {
            for k in 0..j {
                let (ajk, akj) = (coeffs.at(x, j, k), coeffs.at(x, k, j));
                if (ajk - akj).abs() > 1e-12 * ajk.abs().max(akj.abs()).max(1.0) {
                    return Err(Error::Config(format!("coefficient matrix not symmetric at node {x}")));
                }
            }
        }
        let (lo, hi) = coeffs.eigen_range(x);
        let slack = 1e-12;
        if lo < mu * (1.0 - slack) || hi > (1.0 + slack) / mu {
            return Err(Error::Config(format!(
                "ellipticity violated at node {x} {:?}: eigenvalues [{lo}, {hi}] outside [{mu}, {}]",
                grid.multi_index(x),
                1.0 / mu
            )));
        }
    }
    let t = match n {
        1 => elliptic_1d(&grid, coeffs),
        _ => elliptic_2d(&grid, coeffs),
    };
    Ok(SelfAdjointOperator::assemble(grid, OperatorKind::Elliptic, t))
}

/// Node index at a possibly out-of-range multi-index: wraps on periodic
/// grids, `None` for Dirichlet ghost nodes.
fn node_at(grid: &Grid, mi: [i64; 2]) -> Option<usize> {
    let mut out = [0usize; 3];
    for axis in 0..grid.dim() {
        let n = grid.sizes()[axis] as i64;
        let i = mi[axis];
        out[axis] = match grid.boundary() {
            Boundary::Periodic => i.rem_euclid(n) as usize,
            Boundary::Dirichlet if (0..n).contains(&i) => i as usize,
            Boundary::Dirichlet => return None,
        };
    }
    Some(grid.linear_index(out))
}

/// Difference stencil `(u(b) − u(a))/h` with ghost nodes dropped.
fn difference(a: Option<usize>, b: Option<usize>, h: f64) -> Vec<(usize, f64)> {
    let mut d = Vec::with_capacity(2);
    if let Some(b) = b {
        d.push((b, 1.0 / h));
    }
    if let Some(a) = a {
        d.push((a, -1.0 / h));
    }
    d
}

fn push_outer(t: &mut Vec<(usize, usize, Complex64)>, c: f64, u: &[(usize, f64)], v: &[(usize, f64)]) {
    for &(i, ui) in u {
        for &(j, vj) in v {
            t.push((i, j, Complex64::new(c * ui * vj, 0.0)));
        }
    }
}

fn cell_range(grid: &Grid, axis: usize) -> std::ops::Range<i64> {
    let n = grid.sizes()[axis] as i64;
    match grid.boundary() {
        Boundary::Periodic => 0..n,
        Boundary::Dirichlet => -1..n,
    }
}

fn average_coeff(coeffs: &CoefficientField, nodes: &[Option<usize>], j: usize, k: usize) -> f64 {
    let (sum, count) = nodes
        .iter()
        .flatten()
        .fold((0.0, 0usize), |(s, c), &x| (s + coeffs.at(x, j, k), c + 1));
    if count == 0 {
        0.0
    } else {
        sum / count as f64
    }
}

fn elliptic_1d(grid: &Grid, coeffs: &CoefficientField) -> Vec<(usize, usize, Complex64)> {
    let h = grid.spacing()[0];
    let mut t = Vec::new();
    for c in cell_range(grid, 0) {
        let a = node_at(grid, [c, 0]);
        let b = node_at(grid, [c + 1, 0]);
        if a.is_none() && b.is_none() {
            continue;
        }
        let coef = average_coeff(coeffs, &[a, b], 0, 0);
        let d = difference(a, b, h);
        push_outer(&mut t, coef, &d, &d);
    }
    t
}

fn elliptic_2d(grid: &Grid, coeffs: &CoefficientField) -> Vec<(usize, usize, Complex64)> {
    let (h0, h1) = (grid.spacing()[0], grid.spacing()[1]);
    let mut t = Vec::new();
    for c1 in cell_range(grid, 1) {
        for c0 in cell_range(grid, 0) {
            let corner = |d0: i64, d1: i64| node_at(grid, [c0 + d0, c1 + d1]);
            let nodes = [corner(0, 0), corner(1, 0), corner(0, 1), corner(1, 1)];
            if nodes.iter().all(Option::is_none) {
                continue;
            }
            let a00 = average_coeff(coeffs, &nodes, 0, 0);
            let a11 = average_coeff(coeffs, &nodes, 1, 1);
            let a01 = average_coeff(coeffs, &nodes, 0, 1);
            // edges along axis 0 at rows 0/1, along axis 1 at columns 0/1
            let e0 = [
                difference(corner(0, 0), corner(1, 0), h0),
                difference(corner(0, 1), corner(1, 1), h0),
            ];
            let e1 = [
                difference(corner(0, 0), corner(0, 1), h1),
                difference(corner(1, 0), corner(1, 1), h1),
            ];
            for e in &e0 {
                push_outer(&mut t, 0.5 * a00, e, e);
            }
            for e in &e1 {
                push_outer(&mut t, 0.5 * a11, e, e);
            }
            if a01 != 0.0 {
                for u in &e0 {
                    for v in &e1 {
                        push_outer(&mut t, 0.25 * a01, u, v);
                        push_outer(&mut t, 0.25 * a01, v, u);
                    }
                }
            }
        }
    }
    t
}

/// Discrete Kato functional `sup_x Σ_{0<|x−y|≤r} w V(y) |x−y|^{2−n}` on a
/// 3D grid.
pub fn kato_norm(v: &GridFunction, radius: f64) -> Result<f64> {
    let grid = v.grid();
    if grid.dim() < 3 {
        return Err(Error::UnsupportedDimension(format!(
            "the Kato functional needs n >= 3, got n = {}",
            grid.dim()
        )));
    }
    if !(radius > 0.0) {
        return Err(Error::Domain(format!("Kato radius must be positive, got {radius}")));
    }
    if let Some(i) = v.values().iter().position(|z| z.im != 0.0 || z.re < 0.0) {
        return Err(Error::Domain(format!("potential must be real and nonnegative (node {i})")));
    }
    let n = grid.dim();
    let h = grid.spacing();
    let sizes = grid.sizes();
    let reach: Vec<i64> = (0..n)
        .map(|a| {
            let k = (radius / h[a]).floor() as i64;
            match grid.boundary() {
                Boundary::Periodic => k.min((sizes[a] as i64 - 1) / 2),
                Boundary::Dirichlet => k.min(sizes[a] as i64 - 1),
            }
        })
        .collect();
    let mut offsets = Vec::new();
    for k2 in -reach[2]..=reach[2] {
        for k1 in -reach[1]..=reach[1] {
            for k0 in -reach[0]..=reach[0] {
                let d = ((k0 as f64 * h[0]).powi(2)
                    + (k1 as f64 * h[1]).powi(2)
                    + (k2 as f64 * h[2]).powi(2))
                .sqrt();
                if d > 0.0 && d <= radius * (1.0 + 1e-12) {
                    offsets.push(([k0, k1, k2], grid.weight() * d.powi(2 - n as i32)));
                }
            }
        }
    }
    let vals: Vec<f64> = v.values().iter().map(|z| z.re).collect();
    let mut sup = 0.0f64;
    for x in 0..grid.len() {
        let mi = grid.multi_index(x);
        let mut s = 0.0;
        'offsets: for (k, w) in &offsets {
            let mut target = [0usize; 3];
            for a in 0..3 {
                let i = mi[a] as i64 + k[a];
                let na = sizes[a] as i64;
                target[a] = match grid.boundary() {
                    Boundary::Periodic => i.rem_euclid(na) as usize,
                    Boundary::Dirichlet if (0..na).contains(&i) => i as usize,
                    Boundary::Dirichlet => continue 'offsets,
                };
            }
            s += w * vals[grid.linear_index(target)];
        }
        sup = sup.max(s);
    }
    Ok(sup)
}

/// Threshold `γ_n = π^{n/2} / Γ(n/2 − 1)` for the Kato norm of `V₋`.
pub fn gamma_n(n: u32) -> Result<f64> {
    if n < 3 {
        return Err(Error::Domain(format!("γ_n is defined for n >= 3, got {n}")));
    }
    let pi = std::f64::consts::PI;
    // Γ(n/2 − 1) at integer or half-integer arguments, by recurrence.
    let gamma = if n.is_multiple_of(2) {
        (1..(n / 2 - 1)).map(f64::from).product::<f64>()
    } else {
        let m = (n - 3) / 2;
        (1..=m).map(|i| f64::from(i) - 0.5).product::<f64>() * pi.sqrt()
    };
    Ok(pi.powf(f64::from(n) / 2.0) / gamma)
}

/// Named scalar fields used for potentials and coefficients.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, tag = "preset", rename_all = "snake_case")]
pub enum FieldPreset {
    Zero,
    Constant {
        value: f64,
    },
    /// `scale · |x − center|²`, centered in the box by default.
    Quadratic {
        scale: f64,
        #[serde(default)]
        center: Option<Vec<f64>>,
    },
    /// Alternates `low`/`high` with the parity of the node multi-index.
    Checkerboard { low: f64, high: f64 },
    /// Uniform in `[low, high)`, seeded.
    Random { seed: u64, low: f64, high: f64 },
    /// `value` inside the ball of `radius` around `center` (box center by
    /// default), zero outside.
    Ball {
        value: f64,
        radius: f64,
        #[serde(default)]
        center: Option<Vec<f64>>,
    },
}

impl FieldPreset {
    pub fn evaluate(&self, grid: &Grid) -> Vec<f64> {
        let n = grid.dim();
        let box_center = || -> Vec<f64> { (0..n).map(|a| 0.5 * grid.extent(a)).collect() };
        let dist2 = |x: [f64; 3], c: &[f64]| (0..n).map(|a| (x[a] - c[a]).powi(2)).sum::<f64>();
        match self {
            FieldPreset::Zero => vec![0.0; grid.len()],
            FieldPreset::Constant { value } => vec![*value; grid.len()],
            FieldPreset::Quadratic { scale, center } => {
                let c = center.clone().unwrap_or_else(box_center);
                (0..grid.len()).map(|i| scale * dist2(grid.coords(i), &c)).collect()
            }
            FieldPreset::Checkerboard { low, high } => (0..grid.len())
                .map(|i| {
                    let mi = grid.multi_index(i);
                    if mi[..n].iter().sum::<usize>() % 2 == 0 {
                        *low
                    } else {
                        *high
                    }
                })
                .collect(),
            FieldPreset::Random { seed, low, high } => {
                let mut rng = ChaCha8Rng::seed_from_u64(*seed);
                (0..grid.len()).map(|_| rng.random_range(*low..*high)).collect()
            }
            FieldPreset::Ball {
                value,
                radius,
                center,
            } => {
                let c = center.clone().unwrap_or_else(box_center);
                (0..grid.len())
                    .map(|i| {
                        if dist2(grid.coords(i), &c) <= radius * radius * (1.0 + 1e-12) {
                            *value
                        } else {
                            0.0
                        }
                    })
                    .collect()
            }
        }
    }

    pub fn grid_function(&self, grid: Arc<Grid>) -> Result<GridFunction> {
        let v = self.evaluate(&grid);
        GridFunction::from_real(grid, v)
    }
}
