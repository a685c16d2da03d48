//! Functional calculus `φ(𝓛)`: dense spectral path, integral kernels, the
//! heat semigroup, and a Chebyshev path for vector application.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grid::{Grid, GridFunction};
use crate::operators::SelfAdjointOperator;

/// Largest node count for which dense decompositions are attempted.
pub const DEFAULT_DENSE_CAP: usize = 4096;

/// Orthonormal eigenvector matrix; columns are eigenvectors.
#[derive(Clone, Debug)]
pub enum Basis {
    Real(DMatrix<f64>),
    Complex(DMatrix<Complex64>),
}

impl Basis {
    pub fn dim(&self) -> usize {
        match self {
            Basis::Real(m) => m.nrows(),
            Basis::Complex(m) => m.nrows(),
        }
    }

    fn entry(&self, i: usize, k: usize) -> Complex64 {
        match self {
            Basis::Real(m) => Complex64::new(m[(i, k)], 0.0),
            Basis::Complex(m) => m[(i, k)],
        }
    }
}

/// Eigenvalues (ascending) and orthonormal eigenvectors of an operator.
#[derive(Clone, Debug)]
pub struct SpectralDecomposition {
    fingerprint: u64,
    grid: Arc<Grid>,
    eigenvalues: Vec<f64>,
    basis: Basis,
}

impl SpectralDecomposition {
    /// Assembles a decomposition from parts, e.g. when loading from cache.
    /// Eigenvalues must be sorted ascending.
    pub fn from_parts(fingerprint: u64, grid: Arc<Grid>, eigenvalues: Vec<f64>, basis: Basis) -> Result<Self> {
        let m = grid.len();
        if eigenvalues.len() != m || basis.dim() != m {
            return Err(Error::Domain(format!(
                "decomposition of size {}/{} does not match grid of {m} nodes",
                eigenvalues.len(),
                basis.dim()
            )));
        }
        if eigenvalues.windows(2).any(|w| w[0] > w[1]) {
            return Err(Error::Domain("eigenvalues must be sorted ascending".into()));
        }
        Ok(SpectralDecomposition {
            fingerprint,
            grid,
            eigenvalues,
            basis,
        })
    }

    pub fn operator_fingerprint(&self) -> u64 {
        self.fingerprint
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn basis(&self) -> &Basis {
        &self.basis
    }

    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    /// Largest `|λ|` over the spectrum.
    pub fn spectral_radius(&self) -> f64 {
        self.eigenvalues.iter().fold(0.0f64, |a, &l| a.max(l.abs()))
    }

    pub fn eigenvector(&self, k: usize) -> GridFunction {
        let v = (0..self.len()).map(|i| self.basis.entry(i, k)).collect();
        GridFunction::from_parts(self.grid.clone(), v)
    }

    /// Expansion coefficients `⟨e_k, f⟩` (Euclidean inner product).
    pub fn analyze(&self, f: &GridFunction) -> Vec<Complex64> {
        assert_eq!(f.len(), self.len(), "function lives on a different grid");
        match &self.basis {
            Basis::Real(e) => {
                let re = DVector::from_iterator(f.len(), f.values().iter().map(|v| v.re));
                let cr = e.tr_mul(&re);
                if f.is_real() {
                    cr.iter().map(|&r| Complex64::new(r, 0.0)).collect()
                } else {
                    let im = DVector::from_iterator(f.len(), f.values().iter().map(|v| v.im));
                    let ci = e.tr_mul(&im);
                    cr.iter().zip(ci.iter()).map(|(&r, &i)| Complex64::new(r, i)).collect()
                }
            }
            Basis::Complex(e) => {
                let v = DVector::from_column_slice(f.values());
                e.ad_mul(&v).iter().copied().collect()
            }
        }
    }

    /// `Σ_k c_k e_k`.
    pub fn synthesize(&self, coeffs: &[Complex64]) -> GridFunction {
        assert_eq!(coeffs.len(), self.len());
        let values = match &self.basis {
            Basis::Real(e) => {
                let re = DVector::from_iterator(coeffs.len(), coeffs.iter().map(|c| c.re));
                let out_re = e * re;
                if coeffs.iter().all(|c| c.im == 0.0) {
                    out_re.iter().map(|&r| Complex64::new(r, 0.0)).collect()
                } else {
                    let im = DVector::from_iterator(coeffs.len(), coeffs.iter().map(|c| c.im));
                    let out_im = e * im;
                    out_re
                        .iter()
                        .zip(out_im.iter())
                        .map(|(&r, &i)| Complex64::new(r, i))
                        .collect()
                }
            }
            Basis::Complex(e) => (e * DVector::from_column_slice(coeffs)).iter().copied().collect(),
        };
        GridFunction::from_parts(self.grid.clone(), values)
    }

    /// `φ(λ_k)` for every eigenvalue, failing if any value is not finite.
    pub fn multipliers(&self, phi: impl Fn(f64) -> f64) -> Result<Vec<f64>> {
        self.eigenvalues
            .iter()
            .map(|&l| {
                let v = phi(l);
                if v.is_finite() {
                    Ok(v)
                } else {
                    Err(Error::Domain(format!("φ({l}) = {v} is not finite on the spectrum")))
                }
            })
            .collect()
    }

    /// `φ(𝓛)f = Σ_k φ(λ_k) ⟨e_k, f⟩ e_k`.
    pub fn apply_function(&self, phi: impl Fn(f64) -> f64, f: &GridFunction) -> Result<GridFunction> {
        let mult = self.multipliers(phi)?;
        Ok(self.apply_multipliers(&mult, f))
    }

    pub fn apply_multipliers(&self, mult: &[f64], f: &GridFunction) -> GridFunction {
        let c: Vec<Complex64> = self
            .analyze(f)
            .into_iter()
            .zip(mult)
            .map(|(c, &m)| c * m)
            .collect();
        self.synthesize(&c)
    }

    /// Kernel density `K(x,y) = Σ_k φ(λ_k) e_k(x) conj(e_k(y)) / w`, so that
    /// `(φ(𝓛)f)(x) = Σ_y w K(x,y) f(y)`.
    pub fn kernel_matrix(&self, phi: impl Fn(f64) -> f64) -> Result<KernelMatrix> {
        let mult = self.multipliers(phi)?;
        Ok(self.kernel_from_multipliers(&mult))
    }

    pub fn kernel_from_multipliers(&self, mult: &[f64]) -> KernelMatrix {
        let m = self.len();
        let w = self.grid.weight();
        let active: Vec<usize> = (0..m).filter(|&k| mult[k] != 0.0).collect();
        let values = match &self.basis {
            Basis::Real(e) => {
                let sub = e.select_columns(&active);
                let mut scaled = sub.clone();
                for (c, &k) in active.iter().enumerate() {
                    scaled.column_mut(c).scale_mut(mult[k] / w);
                }
                let k = scaled * sub.transpose();
                k.map(|v| Complex64::new(v, 0.0))
            }
            Basis::Complex(e) => {
                let sub = e.select_columns(&active);
                let mut scaled = sub.clone();
                for (c, &k) in active.iter().enumerate() {
                    scaled.column_mut(c).scale_mut(mult[k] / w);
                }
                scaled * sub.adjoint()
            }
        };
        KernelMatrix { values, weight: w }
    }

    /// Kernel of `e^{−t𝓛}`.
    pub fn heat_kernel(&self, t: f64) -> Result<KernelMatrix> {
        if !(t > 0.0) {
            return Err(Error::Domain(format!("heat time must be positive, got {t}")));
        }
        self.kernel_matrix(|l| (-t * l).exp())
    }

    /// `max_k ‖𝓛e_k − λ_k e_k‖₂ / max(1, |λ_k|)`.
    pub fn max_relative_residual(&self, op: &SelfAdjointOperator) -> f64 {
        (0..self.len())
            .map(|k| {
                let e = self.eigenvector(k);
                let le = op.matrix().matvec(e.values());
                let lam = self.eigenvalues[k];
                let r: f64 = le
                    .iter()
                    .zip(e.values())
                    .map(|(a, b)| (a - b * lam).norm_sqr())
                    .sum::<f64>()
                    .sqrt();
                r / lam.abs().max(1.0)
            })
            .fold(0.0, f64::max)
    }

    /// `max |E^H E − I|` entrywise.
    pub fn orthonormality_defect(&self) -> f64 {
        let g = match &self.basis {
            Basis::Real(e) => e.tr_mul(e).map(|v| Complex64::new(v, 0.0)),
            Basis::Complex(e) => e.ad_mul(e),
        };
        let mut worst = 0.0f64;
        for i in 0..g.nrows() {
            for j in 0..g.ncols() {
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((g[(i, j)] - target).norm());
            }
        }
        worst
    }
}

/// Integral kernel of `φ(𝓛)` in density convention (divided by the
/// quadrature weight).
#[derive(Clone, Debug)]
pub struct KernelMatrix {
    values: DMatrix<Complex64>,
    weight: f64,
}

impl KernelMatrix {
    pub fn values(&self) -> &DMatrix<Complex64> {
        &self.values
    }

    pub fn weight(&self) -> f64 {
        self.weight
    }

    pub fn get(&self, x: usize, y: usize) -> Complex64 {
        self.values[(x, y)]
    }

    pub fn dim(&self) -> usize {
        self.values.nrows()
    }

    /// `Σ_y w K(x,y) f(y)`.
    pub fn apply(&self, f: &GridFunction) -> GridFunction {
        let v = &self.values * DVector::from_column_slice(f.values());
        GridFunction::from_parts(f.grid().clone(), v.iter().map(|z| z * self.weight).collect())
    }

    /// `Σ_y w K(x,y)` for each `x`.
    pub fn row_mass(&self) -> Vec<Complex64> {
        (0..self.dim())
            .map(|x| self.values.row(x).iter().sum::<Complex64>() * self.weight)
            .collect()
    }
}

/// Dense eigendecomposition with the default size cap.
pub fn eig(op: &SelfAdjointOperator) -> Result<SpectralDecomposition> {
    eig_with_cap(op, DEFAULT_DENSE_CAP)
}

pub fn eig_with_cap(op: &SelfAdjointOperator, cap: usize) -> Result<SpectralDecomposition> {
    let m = op.len();
    if m > cap {
        return Err(Error::UnsupportedSize(format!(
            "{m} nodes exceeds the dense cap of {cap}; use the Chebyshev path (chebyshev_apply)"
        )));
    }
    let max_iter = 200 * m.max(10);
    let (values, basis) = if op.is_real() {
        let dec = SymmetricEigen::try_new(op.matrix().to_dense_real(), f64::EPSILON, max_iter)
            .ok_or_else(|| Error::Numerical {
                message: "symmetric eigensolver did not converge".into(),
                residual: f64::NAN,
            })?;
        let order = ascending_order(dec.eigenvalues.as_slice());
        let e = dec.eigenvectors.select_columns(&order);
        (order.iter().map(|&k| dec.eigenvalues[k]).collect::<Vec<_>>(), Basis::Real(e))
    } else {
        let dec = SymmetricEigen::try_new(op.matrix().to_dense_complex(), f64::EPSILON, max_iter)
            .ok_or_else(|| Error::Numerical {
                message: "hermitian eigensolver did not converge".into(),
                residual: f64::NAN,
            })?;
        let order = ascending_order(dec.eigenvalues.as_slice());
        let e = dec.eigenvectors.select_columns(&order);
        (order.iter().map(|&k| dec.eigenvalues[k]).collect::<Vec<_>>(), Basis::Complex(e))
    };
    let dec = SpectralDecomposition {
        fingerprint: op.fingerprint(),
        grid: op.grid().clone(),
        eigenvalues: values,
        basis,
    };
    let residual = dec.max_relative_residual(op);
    if !(residual <= 1e-8) {
        return Err(Error::Numerical {
            message: "eigenpair residual above 1e-8".into(),
            residual,
        });
    }
    Ok(dec)
}

fn ascending_order(v: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    idx
}

/// Result of a Chebyshev application.
#[derive(Clone, Debug)]
pub struct ChebyshevResult {
    pub values: GridFunction,
    /// `max(|c_{d−1}|, |c_d|) · ‖f‖₂`, a bound on the truncation error when
    /// the coefficients have decayed.
    pub error_estimate: f64,
    /// Set when the trailing coefficients have not decayed below `1e−6`
    /// relative to the largest one.
    pub warning: bool,
    pub coefficients: Vec<f64>,
}

/// Chebyshev coefficients of `φ` on `[a, b]` from the `degree + 1`
/// Chebyshev–Gauss nodes; the constant term is already halved.
pub fn chebyshev_coefficients(phi: impl Fn(f64) -> f64, a: f64, b: f64, degree: usize) -> Vec<f64> {
    let n = degree + 1;
    let half = 0.5 * (b - a);
    let mid = 0.5 * (b + a);
    let theta: Vec<f64> = (0..n)
        .map(|i| std::f64::consts::PI * (i as f64 + 0.5) / n as f64)
        .collect();
    let samples: Vec<f64> = theta.iter().map(|t| phi(half * t.cos() + mid)).collect();
    (0..n)
        .map(|k| {
            let s: f64 = samples
                .iter()
                .zip(&theta)
                .map(|(f, t)| f * (k as f64 * t).cos())
                .sum();
            let c = 2.0 * s / n as f64;
            if k == 0 {
                0.5 * c
            } else {
                c
            }
        })
        .collect()
}

/// `φ(𝓛)f` via the three-term Chebyshev recurrence on the operator's
/// spectral bounds, using only sparse matrix–vector products.
pub fn chebyshev_apply(
    op: &SelfAdjointOperator,
    phi: impl Fn(f64) -> f64,
    f: &GridFunction,
    degree: usize,
) -> Result<ChebyshevResult> {
    if degree == 0 {
        return Err(Error::Domain("Chebyshev degree must be at least 1".into()));
    }
    let (mut a, mut b) = op.spectral_bounds();
    if !(a.is_finite() && b.is_finite()) || a > b {
        return Err(Error::Domain(format!("invalid spectral bounds [{a}, {b}]")));
    }
    if b - a < 1e-12 * b.abs().max(1.0) {
        a -= 0.5;
        b += 0.5;
    }
    let coeffs = chebyshev_coefficients(&phi, a, b, degree);
    if let Some(c) = coeffs.iter().find(|c| !c.is_finite()) {
        return Err(Error::Domain(format!("φ produced non-finite coefficient {c}")));
    }
    let alpha = 2.0 / (b - a);
    let beta = -(a + b) / (b - a);
    let scaled = |v: &[Complex64]| -> Vec<Complex64> {
        op.matrix()
            .matvec(v)
            .into_iter()
            .zip(v)
            .map(|(lv, &x)| lv * alpha + x * beta)
            .collect()
    };
    let x = f.values();
    let mut t_prev: Vec<Complex64> = x.to_vec();
    let mut t_cur = scaled(x);
    let mut acc: Vec<Complex64> = t_prev
        .iter()
        .zip(&t_cur)
        .map(|(p, c)| p * coeffs[0] + c * coeffs[1])
        .collect();
    for &ck in &coeffs[2..] {
        let at = scaled(&t_cur);
        let t_next: Vec<Complex64> = at.iter().zip(&t_prev).map(|(a, p)| a * 2.0 - p).collect();
        for (s, t) in acc.iter_mut().zip(&t_next) {
            *s += t * ck;
        }
        t_prev = std::mem::replace(&mut t_cur, t_next);
    }
    let cmax = coeffs.iter().fold(0.0f64, |m, c| m.max(c.abs()));
    let trailing = coeffs[degree].abs().max(coeffs[degree - 1].abs());
    let fnorm = f.lp_norm(2.0)?;
    Ok(ChebyshevResult {
        values: GridFunction::from_parts(f.grid().clone(), acc),
        error_estimate: trailing * fnorm,
        warning: trailing > 1e-6 * cmax,
        coefficients: coeffs,
    })
}
