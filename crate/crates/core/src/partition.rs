//! Dyadic partitions of unity on the spectrum.
//!
//! Windows are `φ_0(λ) = Φ(|λ|)` and `φ_j(λ) = Φ(2^{−j}|λ|) − Φ(2^{1−j}|λ|)`
//! for `j ≥ 1`, where `Φ` is a step equal to 1 on `[0, 1/2]` and 0 on
//! `[1, ∞)`. The sum over `j ≤ J` telescopes to `Φ(2^{−J}|λ|)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Shape of the step `Φ` between 1/2 and 1.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TransitionProfile {
    /// `C^∞` step from the `exp(−1/x)` cutoff.
    #[default]
    Smooth,
    /// Indicator step at 3/4; windows become discontinuous.
    Sharp,
}

impl TransitionProfile {
    /// The step `Φ(x)` for `x ≥ 0`.
    pub fn step(self, x: f64) -> f64 {
        match self {
            TransitionProfile::Smooth => {
                if x <= 0.5 {
                    1.0
                } else if x >= 1.0 {
                    0.0
                } else {
                    let u = 2.0 * x - 1.0;
                    let a = cutoff(1.0 - u);
                    let b = cutoff(u);
                    a / (a + b)
                }
            }
            TransitionProfile::Sharp => {
                if x < 0.75 {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }
}

fn cutoff(s: f64) -> f64 {
    if s <= 0.0 {
        0.0
    } else {
        (-1.0 / s).exp()
    }
}

/// Closed `|λ|`-interval outside which window `j` must vanish.
pub fn nominal_support(j: usize) -> (f64, f64) {
    if j == 0 {
        (0.0, 1.0)
    } else {
        (pow2(j as i32 - 2), pow2(j as i32))
    }
}

pub(crate) fn pow2(e: i32) -> f64 {
    2f64.powi(e)
}

/// Smallest `J ≥ 2` with `λ_max ≤ 2^{J−1}`.
pub fn j_max_for(lambda_max: f64) -> usize {
    let mut j = 2;
    while pow2(j as i32 - 1) < lambda_max.abs() {
        j += 1;
    }
    j
}

/// A finite family of spectral windows `φ_0..φ_{J}`.
pub trait WindowFamily: Send + Sync {
    fn j_max(&self) -> usize;

    /// `φ_j(λ)`; even in `λ`.
    fn window(&self, j: usize, lambda: f64) -> f64;

    fn len(&self) -> usize {
        self.j_max() + 1
    }

    fn is_empty(&self) -> bool {
        false
    }

    fn support(&self, j: usize) -> (f64, f64) {
        nominal_support(j)
    }
}

/// Dyadic system with measured derivative constants and partition defect.
#[derive(Clone, Debug)]
pub struct DyadicSystem {
    j_max: usize,
    profile: TransitionProfile,
    deriv_constants: Vec<f64>,
    partition_defect: f64,
}

impl DyadicSystem {
    pub fn new(j_max: usize, profile: TransitionProfile) -> Result<Self> {
        if j_max < 2 {
            return Err(Error::Domain(format!("J_max must be at least 2, got {j_max}")));
        }
        let mut sys = DyadicSystem {
            j_max,
            profile,
            deriv_constants: Vec::new(),
            partition_defect: 0.0,
        };
        let report = verify_conditions(&sys, MAX_DERIVATIVE_ORDER);
        sys.deriv_constants = report.deriv_constants;
        sys.partition_defect = report.partition_defect;
        Ok(sys)
    }

    pub fn smooth(j_max: usize) -> Result<Self> {
        DyadicSystem::new(j_max, TransitionProfile::Smooth)
    }

    /// System sized so that the partition covers `[0, λ_max]`.
    pub fn covering(lambda_max: f64, profile: TransitionProfile) -> Result<Self> {
        DyadicSystem::new(j_max_for(lambda_max), profile)
    }

    pub fn profile(&self) -> TransitionProfile {
        self.profile
    }

    /// Measured `c_k`, `k = 0..=4`.
    pub fn deriv_constants(&self) -> &[f64] {
        &self.deriv_constants
    }

    pub fn partition_defect(&self) -> f64 {
        self.partition_defect
    }

    /// Upper end of the range where the windows sum to one.
    pub fn covered_range(&self) -> f64 {
        pow2(self.j_max as i32 - 1)
    }

    /// The mother window `ρ(x) = Φ(x) − Φ(2x)`, supported in `[1/4, 1]`.
    pub fn mother(&self, x: f64) -> f64 {
        let x = x.abs();
        self.profile.step(x) - self.profile.step(2.0 * x)
    }
}

impl WindowFamily for DyadicSystem {
    fn j_max(&self) -> usize {
        self.j_max
    }

    fn window(&self, j: usize, lambda: f64) -> f64 {
        if j > self.j_max {
            return 0.0;
        }
        let x = lambda.abs() * pow2(-(j as i32));
        if j == 0 {
            self.profile.step(x)
        } else {
            self.profile.step(x) - self.profile.step(2.0 * x)
        }
    }
}

/// Companion family `ψ_j = φ_{j−1} + φ_j + φ_{j+1}` with `Σ ψ_j φ_j = 1`.
#[derive(Clone, Debug)]
pub struct PartitionPair {
    phi: DyadicSystem,
}

impl PartitionPair {
    pub fn new(phi: DyadicSystem) -> Result<Self> {
        let j_max = phi.j_max();
        let top = 2.0 * phi.covered_range();
        let n = 4000;
        for i in 0..=n {
            let lambda = top * i as f64 / n as f64;
            let vals: Vec<f64> = (0..=j_max).map(|j| phi.window(j, lambda)).collect();
            for a in 0..=j_max {
                for b in a + 2..=j_max {
                    let p = (vals[a] * vals[b]).abs();
                    if p > 1e-14 {
                        return Err(Error::Precondition(format!(
                            "windows {a} and {b} overlap at λ = {lambda} (product {p:.3e})"
                        )));
                    }
                }
            }
        }
        Ok(PartitionPair { phi })
    }

    pub fn phi(&self) -> &DyadicSystem {
        &self.phi
    }

    pub fn psi(&self, j: usize, lambda: f64) -> f64 {
        let lo = j.saturating_sub(1);
        let hi = (j + 1).min(self.phi.j_max());
        (lo..=hi).map(|i| self.phi.window(i, lambda)).sum()
    }

    /// Closed interval containing the support of `ψ_j`.
    pub fn psi_support(&self, j: usize) -> (f64, f64) {
        if j <= 1 {
            (0.0, pow2(j as i32 + 1))
        } else {
            (pow2(j as i32 - 3), pow2(j as i32 + 1))
        }
    }
}

pub const MAX_DERIVATIVE_ORDER: usize = 4;

/// Finite-difference step for window `j` is `2^{j − FD_EXPONENT}`.
const FD_EXPONENT: i32 = 10;

/// Outcome of checking the dyadic conditions on a window family.
#[derive(Clone, Debug, Serialize)]
pub struct ConditionReport {
    pub j_max: usize,
    pub k_max: usize,
    /// `(j, λ, φ_j(λ))` for nonzero values outside the nominal support.
    pub support_violations: Vec<(usize, f64, f64)>,
    /// `c_k = max_j sup |φ_j^{(k)}| 2^{kj}`.
    pub deriv_constants: Vec<f64>,
    /// `scaled[k][j] = sup |φ_j^{(k)}| 2^{kj}`.
    pub scaled_derivatives: Vec<Vec<f64>>,
    /// Per `k`, max/min of `scaled[k][j]` over `j ≥ 1`.
    pub uniformity: Vec<f64>,
    /// Per `k`, relative change of `c_k` when the difference step is halved.
    pub refinement_drift: Vec<f64>,
    pub partition_defect: f64,
    /// Largest number of windows nonzero at a single `λ`.
    pub max_overlap: usize,
    pub support_ok: bool,
    pub derivatives_ok: bool,
    pub partition_ok: bool,
    pub pass: bool,
}

/// Checks support, derivative bounds (for `k ≤ k_max`) and the partition of
/// unity on `[0, 2^{J−1}]`.
pub fn verify_conditions<W: WindowFamily + ?Sized>(sys: &W, k_max: usize) -> ConditionReport {
    let k_max = k_max.min(MAX_DERIVATIVE_ORDER);
    let j_max = sys.j_max();

    let mut support_violations = Vec::new();
    for j in 0..=j_max {
        let (lo, hi) = sys.support(j);
        let mut probe = |lambda: f64| {
            for l in [lambda, -lambda] {
                let v = sys.window(j, l);
                if v != 0.0 {
                    support_violations.push((j, l, v));
                }
            }
        };
        let n = 512;
        if lo > 0.0 {
            for i in 0..=n {
                probe(lo * i as f64 / n as f64);
            }
        }
        for i in 0..=n {
            probe(hi * (1.0 + 3.0 * i as f64 / n as f64));
        }
    }

    let mut scaled = vec![vec![0.0; j_max + 1]; k_max + 1];
    let mut scaled_fine = vec![vec![0.0; j_max + 1]; k_max + 1];
    for j in 0..=j_max {
        for k in 0..=k_max {
            scaled[k][j] = scaled_sup_derivative(sys, j, k, FD_EXPONENT);
            scaled_fine[k][j] = scaled_sup_derivative(sys, j, k, FD_EXPONENT + 1);
        }
    }
    let deriv_constants: Vec<f64> = scaled.iter().map(|r| r.iter().cloned().fold(0.0, f64::max)).collect();
    let fine_constants: Vec<f64> = scaled_fine.iter().map(|r| r.iter().cloned().fold(0.0, f64::max)).collect();
    let uniformity: Vec<f64> = scaled
        .iter()
        .map(|r| {
            let tail = &r[1..];
            let mx = tail.iter().cloned().fold(0.0, f64::max);
            let mn = tail.iter().cloned().fold(f64::INFINITY, f64::min);
            if mx == 0.0 {
                1.0
            } else {
                mx / mn
            }
        })
        .collect();
    let refinement_drift: Vec<f64> = deriv_constants
        .iter()
        .zip(&fine_constants)
        .map(|(a, b)| if *a == 0.0 && *b == 0.0 { 0.0 } else { (a - b).abs() / a.abs().max(b.abs()) })
        .collect();

    let top = pow2(j_max as i32 - 1);
    let mut partition_defect = 0.0f64;
    let mut max_overlap = 0;
    let n = 4096;
    for i in 0..=n {
        let lambda = top * i as f64 / n as f64;
        let mut s = 0.0;
        let mut count = 0;
        for j in 0..=j_max {
            let v = sys.window(j, lambda);
            s += v;
            if v != 0.0 {
                count += 1;
            }
        }
        partition_defect = partition_defect.max((s - 1.0).abs());
        max_overlap = max_overlap.max(count);
    }

    let support_ok = support_violations.is_empty();
    let derivatives_ok = uniformity.iter().all(|&u| u <= 2.0)
        && refinement_drift.iter().all(|&d| d <= 0.05)
        && deriv_constants[0] <= 1.0 + partition_defect + 1e-15;
    let partition_ok = partition_defect <= 1e-12 && max_overlap <= 2;
    ConditionReport {
        j_max,
        k_max,
        support_violations,
        deriv_constants,
        scaled_derivatives: scaled,
        uniformity,
        refinement_drift,
        partition_defect,
        max_overlap,
        support_ok,
        derivatives_ok,
        partition_ok,
        pass: support_ok && derivatives_ok && partition_ok,
    }
}

/// `sup_λ |Δ_h^k φ_j(λ)| / h^k · 2^{kj}` with central differences, step
/// `h = 2^{j−e}`, sampled on the lattice `h ℤ` over the window's support.
fn scaled_sup_derivative<W: WindowFamily + ?Sized>(sys: &W, j: usize, k: usize, e: i32) -> f64 {
    let h = pow2(j as i32 - e);
    let (_, hi) = sys.support(j);
    let steps = (1.25 * hi / h).ceil() as i64;
    let coeffs = binomial_stencil(k);
    let half = k as f64 / 2.0;
    let scale = pow2((k * j) as i32) / h.powi(k as i32);
    let mut best = 0.0f64;
    for i in 0..=steps {
        let center = i as f64 * h;
        let d: f64 = coeffs
            .iter()
            .enumerate()
            .map(|(m, c)| c * sys.window(j, center + (m as f64 - half) * h))
            .sum();
        best = best.max(d.abs() * scale);
    }
    best
}

/// `(−1)^{k−m} C(k, m)` for `m = 0..=k`.
fn binomial_stencil(k: usize) -> Vec<f64> {
    let mut c = vec![1.0];
    for _ in 0..k {
        let mut next = vec![0.0; c.len() + 1];
        for (i, v) in c.iter().enumerate() {
            next[i] -= v;
            next[i + 1] += v;
        }
        c = next;
    }
    c
}
