//! Kernel decay constants, Gaussian heat-bound fits, and the discrete
//! Hardy–Littlewood maximal function.

use rayon::prelude::*;
use serde::Serialize;

use crate::calculus::SpectralDecomposition;
use crate::error::{Error, Result};
use crate::grid::{Grid, GridFunction};
use crate::partition::WindowFamily;

/// Windows whose largest value on the spectrum is below this level only
/// touch the spectrum with their tails; they are reported but excluded
/// from uniformity ratios.
pub const ACTIVE_LEVEL: f64 = 0.5;

/// Extremal pair for one decay constant.
#[derive(Clone, Debug, Serialize)]
pub struct DecayEntry {
    pub j: usize,
    pub constant: f64,
    /// `max_k φ_j(λ_k)`.
    pub window_peak: f64,
    pub active: bool,
    pub x: usize,
    pub y: usize,
    pub distance: f64,
    pub kernel_value: f64,
    pub majorant_value: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct DecayReport {
    pub epsilon: f64,
    pub dim: usize,
    pub operator_fingerprint: u64,
    pub entries: Vec<DecayEntry>,
    /// `sup_j c(j)`.
    pub sup: f64,
    /// max/min of `c(j)` over active `j`.
    pub uniformity: f64,
    pub budget: f64,
    pub uniformity_cap: f64,
    pub pass: bool,
}

/// Majorant `2^{nj/2} / (1 + 2^{j/2} r)^{n+ε}`.
pub fn decay_majorant(dim: usize, j: usize, eps: f64, r: f64) -> f64 {
    let n = dim as f64;
    let s = (j as f64 / 2.0).exp2();
    s.powf(n) / (1.0 + s * r).powf(n + eps)
}

fn check_eps(eps: f64) -> Result<()> {
    if eps > 0.0 && eps.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!("ε must be positive and finite, got {eps}")))
    }
}

/// Pairwise distances, row-major.
pub fn distance_table(grid: &Grid) -> Vec<f64> {
    let m = grid.len();
    let mut d = vec![0.0; m * m];
    for x in 0..m {
        for y in 0..m {
            d[x * m + y] = grid.distance(x, y);
        }
    }
    d
}

fn decay_entry<W: WindowFamily + ?Sized>(
    dec: &SpectralDecomposition,
    sys: &W,
    j: usize,
    eps: f64,
    dist: &[f64],
) -> DecayEntry {
    let mult: Vec<f64> = dec.eigenvalues().iter().map(|&l| sys.window(j, l)).collect();
    let peak = mult.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let dim = dec.grid().dim();
    let mut best = DecayEntry {
        j,
        constant: 0.0,
        window_peak: peak,
        active: peak >= ACTIVE_LEVEL,
        x: 0,
        y: 0,
        distance: 0.0,
        kernel_value: 0.0,
        majorant_value: decay_majorant(dim, j, eps, 0.0),
    };
    if peak == 0.0 {
        return best;
    }
    let k = dec.kernel_from_multipliers(&mult);
    let m = dec.len();
    let n = dim as f64;
    let s = (j as f64 / 2.0).exp2();
    let norm = s.powf(-n);
    for x in 0..m {
        for y in 0..m {
            let r = dist[x * m + y];
            let kv = k.get(x, y).norm();
            let c = kv * (1.0 + s * r).powf(n + eps) * norm;
            if c > best.constant {
                best.constant = c;
                best.x = x;
                best.y = y;
                best.distance = r;
                best.kernel_value = kv;
                best.majorant_value = decay_majorant(dim, j, eps, r);
            }
        }
    }
    best
}

/// `c(j) = max_{x,y} |K_j(x,y)| (1 + 2^{j/2}|x−y|)^{n+ε} 2^{−nj/2}`.
pub fn decay_constant<W: WindowFamily + ?Sized>(
    dec: &SpectralDecomposition,
    sys: &W,
    j: usize,
    eps: f64,
) -> Result<f64> {
    check_eps(eps)?;
    let dist = distance_table(dec.grid());
    Ok(decay_entry(dec, sys, j, eps, &dist).constant)
}

/// Decay constants for every `j ≤ J`, with the sup over `j` and the
/// max/min ratio over active windows.
pub fn decay_suite<W: WindowFamily + ?Sized>(
    dec: &SpectralDecomposition,
    sys: &W,
    eps: f64,
    budget: f64,
    uniformity_cap: f64,
) -> Result<DecayReport> {
    check_eps(eps)?;
    let dist = distance_table(dec.grid());
    let entries: Vec<DecayEntry> = (0..=sys.j_max())
        .into_par_iter()
        .map(|j| decay_entry(dec, sys, j, eps, &dist))
        .collect();
    let sup = entries.iter().fold(0.0f64, |a, e| a.max(e.constant));
    let active: Vec<f64> = entries.iter().filter(|e| e.active).map(|e| e.constant).collect();
    let mx = active.iter().cloned().fold(0.0, f64::max);
    let mn = active.iter().cloned().fold(f64::INFINITY, f64::min);
    let uniformity = if active.is_empty() { 1.0 } else { mx / mn };
    Ok(DecayReport {
        epsilon: eps,
        dim: dec.grid().dim(),
        operator_fingerprint: dec.operator_fingerprint(),
        pass: sup.is_finite() && sup <= budget && uniformity <= uniformity_cap,
        entries,
        sup,
        uniformity,
        budget,
        uniformity_cap,
    })
}

/// Compares `sup_j c(j)` on a grid and its refinement.
#[derive(Clone, Debug, Serialize)]
pub struct RefinementCheck {
    pub coarse_sup: f64,
    pub fine_sup: f64,
    pub growth: f64,
    pub cap: f64,
    pub pass: bool,
}

pub fn refinement_check(coarse: &DecayReport, fine: &DecayReport, cap: f64) -> RefinementCheck {
    let growth = fine.sup / coarse.sup;
    RefinementCheck {
        coarse_sup: coarse.sup,
        fine_sup: fine.sup,
        growth,
        cap,
        pass: growth.is_finite() && growth <= cap,
    }
}

/// Gaussian bound constants at one time.
#[derive(Clone, Debug, Serialize)]
pub struct HeatTimeFit {
    pub t: f64,
    /// Smallest `c_n` with `|K_t| ≤ c_n t^{−n/2} e^{−c r²/t}` on resolvable pairs.
    pub constant: f64,
    pub pairs: usize,
    pub outside_window: bool,
    pub ground_state_regime: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct HeatFit {
    pub c: f64,
    pub per_t: Vec<HeatTimeFit>,
    pub constant: f64,
    /// max/min of per-t constants over times inside the resolvable window
    /// and outside the ground-state regime; NaN when there are none.
    pub uniformity: f64,
    pub resolved_times: usize,
    pub warnings: Vec<String>,
}

/// Pairs with `c r²/t` above this are excluded: roundoff in the kernel
/// times `e^{c r²/t}` would dominate.
pub const RESOLVABLE_EXPONENT: f64 = 20.723_265_836_946_41; // ln 1e9

/// Fits the Gaussian upper bound with exponent constant `c` over `t_list`.
pub fn heat_bound_fit(dec: &SpectralDecomposition, t_list: &[f64], c: f64) -> Result<HeatFit> {
    if !(c > 0.0) {
        return Err(Error::Domain(format!("Gaussian constant must be positive, got {c}")));
    }
    if t_list.is_empty() {
        return Err(Error::Domain("no heat times given".into()));
    }
    let grid = dec.grid();
    let n = grid.dim() as f64;
    let h = grid.min_spacing();
    let diam = grid.diameter();
    let gap = spectral_gap(dec.eigenvalues());
    let dist = distance_table(grid);
    let m = dec.len();
    let mut warnings = Vec::new();
    let per_t = t_list
        .iter()
        .map(|&t| {
            let k = dec.heat_kernel(t)?;
            let outside = t < h * h || t > diam * diam;
            let ground = t * gap >= 5.0;
            if outside {
                warnings.push(format!("t = {t} outside resolvable window [{}, {}]", h * h, diam * diam));
            }
            if ground {
                warnings.push(format!("t = {t} is in the ground-state regime (t·gap = {:.3})", t * gap));
            }
            let mut best = 0.0f64;
            let mut pairs = 0;
            for x in 0..m {
                for y in 0..m {
                    let r = dist[x * m + y];
                    let e = c * r * r / t;
                    if e > RESOLVABLE_EXPONENT {
                        continue;
                    }
                    pairs += 1;
                    best = best.max(k.get(x, y).norm() * t.powf(n / 2.0) * e.exp());
                }
            }
            Ok(HeatTimeFit {
                t,
                constant: best,
                pairs,
                outside_window: outside,
                ground_state_regime: ground,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let constant = per_t.iter().fold(0.0f64, |a, f| a.max(f.constant));
    let resolved: Vec<f64> = per_t
        .iter()
        .filter(|f| !f.outside_window && !f.ground_state_regime)
        .map(|f| f.constant)
        .collect();
    let uniformity = if resolved.is_empty() {
        f64::NAN
    } else {
        resolved.iter().cloned().fold(0.0, f64::max) / resolved.iter().cloned().fold(f64::INFINITY, f64::min)
    };
    Ok(HeatFit {
        c,
        per_t,
        constant,
        uniformity,
        resolved_times: resolved.len(),
        warnings,
    })
}

fn spectral_gap(eigs: &[f64]) -> f64 {
    let base = eigs[0];
    let tol = 1e-9 * eigs.last().map_or(1.0, |l| l.abs().max(1.0));
    eigs.iter()
        .find(|&&l| l - base > tol)
        .map_or(f64::INFINITY, |&l| l - base)
}

/// Closed discrete balls around every node, as sorted distance lists.
#[derive(Clone, Debug)]
pub struct BallAverager {
    grid: std::sync::Arc<Grid>,
    /// Per node: neighbours sorted by distance.
    order: Vec<Vec<u32>>,
    /// Per node and radius index `k` (radius `k·h`): ball cardinality.
    counts: Vec<Vec<u32>>,
}

impl BallAverager {
    /// Radii `0, h, 2h, …` up to the diameter, `h` the smallest spacing.
    pub fn new(grid: std::sync::Arc<Grid>) -> Self {
        let m = grid.len();
        let h = grid.min_spacing();
        let diam = grid.diameter();
        let n_radii = (diam / h * (1.0 + 1e-12)).floor() as usize + 1;
        let mut order = Vec::with_capacity(m);
        let mut counts = Vec::with_capacity(m);
        for x in 0..m {
            let mut nb: Vec<(f64, u32)> = (0..m).map(|y| (grid.distance(x, y), y as u32)).collect();
            nb.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            let mut c = Vec::with_capacity(n_radii);
            let mut idx = 0;
            for k in 0..n_radii {
                let r = k as f64 * h * (1.0 + 1e-12);
                while idx < m && nb[idx].0 <= r {
                    idx += 1;
                }
                c.push(idx as u32);
            }
            order.push(nb.into_iter().map(|(_, y)| y).collect());
            counts.push(c);
        }
        BallAverager { grid, order, counts }
    }

    pub fn grid(&self) -> &std::sync::Arc<Grid> {
        &self.grid
    }

    /// `Mf(x) = max_r |B(x,r)|^{−1} Σ_{y∈B(x,r)} |f(y)|`.
    pub fn maximal(&self, f: &GridFunction) -> Vec<f64> {
        let a = f.abs();
        (0..self.grid.len())
            .map(|x| {
                let mut best = 0.0f64;
                let mut sum = 0.0;
                let mut taken = 0usize;
                for &c in &self.counts[x] {
                    let c = c as usize;
                    while taken < c {
                        sum += a[self.order[x][taken] as usize];
                        taken += 1;
                    }
                    if c > 0 {
                        best = best.max(sum / c as f64);
                    }
                }
                best
            })
            .collect()
    }
}

/// Hardy–Littlewood maximal function over closed balls of radius
/// `0, h, 2h, …, diam`.
pub fn hl_maximal(f: &GridFunction) -> GridFunction {
    let ba = BallAverager::new(f.grid().clone());
    GridFunction::from_real(f.grid().clone(), ba.maximal(f)).expect("maximal values are finite")
}

/// Nonincreasing radial profile `h(|x|)`.
#[derive(Clone, Debug, PartialEq, Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields, tag = "profile", rename_all = "snake_case")]
pub enum RadialProfile {
    /// Indicator of the closed unit ball.
    BallIndicator,
    /// `e^{−|x|}`.
    Exponential,
    /// `e^{−|x|²}`.
    Gaussian,
    /// Piecewise linear through `(radius, value)` knots, zero beyond the last.
    Tabulated { knots: Vec<(f64, f64)> },
}

impl RadialProfile {
    pub fn validate(&self) -> Result<()> {
        if let RadialProfile::Tabulated { knots } = self {
            if knots.is_empty() {
                return Err(Error::Precondition("tabulated profile has no knots".into()));
            }
            for w in knots.windows(2) {
                if w[1].0 <= w[0].0 {
                    return Err(Error::Precondition("profile radii must increase".into()));
                }
                if w[1].1 > w[0].1 {
                    return Err(Error::Precondition(format!(
                        "profile increases between r = {} and r = {}",
                        w[0].0, w[1].0
                    )));
                }
            }
            if knots.iter().any(|k| k.1 < 0.0 || !k.1.is_finite() || k.0 < 0.0) {
                return Err(Error::Precondition("profile values must be finite and nonnegative".into()));
            }
        }
        Ok(())
    }

    pub fn eval(&self, r: f64) -> f64 {
        match self {
            RadialProfile::BallIndicator => {
                if r <= 1.0 + 1e-12 {
                    1.0
                } else {
                    0.0
                }
            }
            RadialProfile::Exponential => (-r).exp(),
            RadialProfile::Gaussian => (-r * r).exp(),
            RadialProfile::Tabulated { knots } => {
                if r <= knots[0].0 {
                    return knots[0].1;
                }
                for w in knots.windows(2) {
                    if r <= w[1].0 {
                        let u = (r - w[0].0) / (w[1].0 - w[0].0);
                        return w[0].1 + u * (w[1].1 - w[0].1);
                    }
                }
                0.0
            }
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct MaximalLemmaReport {
    /// `(j, c_j)`: smallest `c` with `|h_j * f| ≤ c ‖h_j‖₁ Mf` over the test set.
    pub per_j: Vec<(usize, f64)>,
    pub sup: f64,
    pub min: f64,
    pub variation: f64,
    pub functions: usize,
}

/// Empirical constant in `|h_j * f|(x) ≤ c ‖h_j‖₁ Mf(x)` with
/// `h_j(x) = 2^{jn/2} h(2^{j/2}x)`. `‖h_j‖₁` is the grid sum of `h_j`.
pub fn maximal_lemma_check(
    profile: &RadialProfile,
    js: &[usize],
    fs: &[GridFunction],
) -> Result<MaximalLemmaReport> {
    profile.validate()?;
    let Some(first) = fs.first() else {
        return Err(Error::Domain("no test functions".into()));
    };
    let grid = first.grid().clone();
    if fs.iter().any(|f| f.grid() != &grid) {
        return Err(Error::Domain("test functions must share a grid".into()));
    }
    let m = grid.len();
    let w = grid.weight();
    let n = grid.dim() as f64;
    let ba = BallAverager::new(grid.clone());
    let maximals: Vec<Vec<f64>> = fs.iter().map(|f| ba.maximal(f)).collect();
    let dist = distance_table(&grid);
    let per_j: Vec<(usize, f64)> = js
        .par_iter()
        .map(|&j| {
            let s = (j as f64 / 2.0).exp2();
            let amp = s.powf(n);
            let kern: Vec<f64> = dist.iter().map(|&r| amp * profile.eval(s * r)).collect();
            let mut best = 0.0f64;
            for (f, mf) in fs.iter().zip(&maximals) {
                let vals = f.values();
                for x in 0..m {
                    let row = &kern[x * m..(x + 1) * m];
                    let l1: f64 = row.iter().sum::<f64>() * w;
                    let conv: crate::Complex64 = row.iter().zip(vals).map(|(k, v)| v * (k * w)).sum();
                    let rhs = l1 * mf[x];
                    if rhs > 0.0 {
                        best = best.max(conv.norm() / rhs);
                    }
                }
            }
            (j, best)
        })
        .collect();
    let sup = per_j.iter().fold(0.0f64, |a, e| a.max(e.1));
    let min = per_j.iter().fold(f64::INFINITY, |a, e| a.min(e.1));
    Ok(MaximalLemmaReport {
        variation: sup / min,
        per_j,
        sup,
        min,
        functions: fs.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::calculus::eig;
    use crate::grid::{Boundary, GridSpec};
    use crate::operators::{laplacian, FieldPreset};
    use crate::partition::DyadicSystem;
    use std::sync::Arc;

    fn grid(n: usize, h: f64, b: Boundary) -> Arc<Grid> {
        Arc::new(Grid::new(&GridSpec::new(1, n, h, b)).unwrap())
    }

    #[test]
    fn maximal_of_delta() {
        let g = grid(8, 1.0, Boundary::Periodic);
        let m = hl_maximal(&GridFunction::delta(g.clone(), 0));
        for x in 0..8 {
            let d = g.distance(0, x);
            // the radius-4 ball is the whole torus
            let expect = if d < 4.0 { 1.0 / (2.0 * d + 1.0) } else { 1.0 / 8.0 };
            assert!((m.values()[x].re - expect).abs() < 1e-15, "x = {x}");
        }
    }

    #[test]
    fn maximal_of_constant_and_pointwise_bound() {
        let g = Arc::new(Grid::new(&GridSpec::new(2, 6, 0.5, Boundary::Dirichlet)).unwrap());
        let c = GridFunction::constant(g.clone(), -2.5);
        assert!(hl_maximal(&c).values().iter().all(|v| v.re == 2.5));
        let f = FieldPreset::Random { seed: 1, low: -1.0, high: 1.0 }.grid_function(g.clone()).unwrap();
        let mf = hl_maximal(&f);
        for (a, b) in mf.values().iter().zip(f.values()) {
            assert!(a.re >= b.norm() - 1e-12);
        }
    }

    #[test]
    fn tabulated_profile_must_be_monotone() {
        let bad = RadialProfile::Tabulated { knots: vec![(0.0, 1.0), (1.0, 2.0)] };
        let g = grid(8, 1.0, Boundary::Periodic);
        let f = GridFunction::constant(g, 1.0);
        assert!(matches!(maximal_lemma_check(&bad, &[0], &[f]), Err(Error::Precondition(_))));
    }

    #[test]
    fn lemma_constant_is_one_for_constants() {
        let g = grid(64, 1.0 / 8.0, Boundary::Periodic);
        let f = GridFunction::constant(g, 3.0);
        for p in [RadialProfile::BallIndicator, RadialProfile::Exponential] {
            let r = maximal_lemma_check(&p, &[0, 2, 4], std::slice::from_ref(&f)).unwrap();
            for (_, c) in r.per_j {
                assert!((c - 1.0).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn decay_zero_window_and_linearity() {
        let g = grid(32, 1.0 / 32.0, Boundary::Periodic);
        let dec = eig(&laplacian(g).unwrap()).unwrap();
        let sys = DyadicSystem::covering(dec.spectral_radius(), Default::default()).unwrap();
        // j = 1 covers [1/2, 2], below the first nonzero eigenvalue (2π)² on the unit torus
        assert_eq!(decay_constant(&dec, &sys, 1, 1.0).unwrap(), 0.0);
        struct Doubled<'a>(&'a DyadicSystem);
        impl WindowFamily for Doubled<'_> {
            fn j_max(&self) -> usize {
                self.0.j_max()
            }
            fn window(&self, j: usize, l: f64) -> f64 {
                2.0 * self.0.window(j, l)
            }
        }
        for j in 6..9 {
            let a = decay_constant(&dec, &sys, j, 1.0).unwrap();
            let b = decay_constant(&dec, &Doubled(&sys), j, 1.0).unwrap();
            assert!(a > 0.0);
            assert!((b - 2.0 * a).abs() <= 1e-13 * b);
        }
        assert!(decay_constant(&dec, &sys, 6, 0.0).is_err());
    }

    #[test]
    fn small_system_report() {
        let g = grid(8, 1.0, Boundary::Periodic);
        let dec = eig(&laplacian(g).unwrap()).unwrap();
        let sys = DyadicSystem::smooth(2).unwrap();
        let r = decay_suite(&dec, &sys, 1.0, f64::INFINITY, f64::INFINITY).unwrap();
        assert_eq!(r.entries.len(), 3);
    }
}
