//! Peetre K-functionals on weighted sequence couples, real-interpolation
//! norms, and empirical checks of interpolation identities.
//!
//! A couple `(ℓ^{s₀,q₀}, ℓ^{s₁,q₁})` carries the norms
//! `‖a‖_i = ‖(2^{j s_i} |a_j|)_j‖_{ℓ^{q_i}}`, and
//! `K(t, a) = inf_{a = a₀ + a₁} ‖a₀‖₀ + t ‖a₁‖₁`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::calculus::SpectralDecomposition;
use crate::error::{Error, Result};
use crate::grid::{self, GridFunction};
use crate::partition::WindowFamily;
use crate::spaces::{self, SpaceParams};

/// One side `ℓ^{s,q}` of a couple.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Side {
    pub s: f64,
    pub q: f64,
}

impl Side {
    pub fn new(s: f64, q: f64) -> Result<Self> {
        if !s.is_finite() {
            return Err(Error::Domain(format!("smoothness must be finite, got {s}")));
        }
        grid::check_exponent(q)?;
        Ok(Side { s, q })
    }

    pub fn weights(&self, len: usize) -> Vec<f64> {
        (0..len).map(|j| (j as f64 * self.s).exp2()).collect()
    }
}

/// `‖(w_j x_j)‖_{ℓ^q}` for nonnegative `x`.
pub fn weighted_norm(x: &[f64], w: &[f64], q: f64) -> f64 {
    grid::weighted_lp(x.iter().zip(w).map(|(a, b)| a.abs() * b), 1.0, q)
}

/// `1 / ((1−θ)/a₀ + θ/a₁)`, with `1/∞ = 0`.
pub fn interpolate_exponent(theta: f64, a0: f64, a1: f64) -> f64 {
    let inv = (1.0 - theta) / a0 + theta / a1;
    1.0 / inv
}

/// A finite sequence with two weighted `ℓ^q` norms.
#[derive(Clone, Debug, Serialize)]
pub struct SequenceCouple {
    values: Vec<f64>,
    side0: Side,
    side1: Side,
    w0: Vec<f64>,
    w1: Vec<f64>,
}

impl SequenceCouple {
    /// Only magnitudes enter the norms; signs are dropped.
    pub fn new(values: Vec<f64>, side0: Side, side1: Side) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Domain("sequence must have at least one entry".into()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("sequence entries must be finite".into()));
        }
        Side::new(side0.s, side0.q)?;
        Side::new(side1.s, side1.q)?;
        let values: Vec<f64> = values.into_iter().map(f64::abs).collect();
        let w0 = side0.weights(values.len());
        let w1 = side1.weights(values.len());
        Ok(SequenceCouple {
            values,
            side0,
            side1,
            w0,
            w1,
        })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn side0(&self) -> Side {
        self.side0
    }

    pub fn side1(&self) -> Side {
        self.side1
    }

    pub fn weights0(&self) -> &[f64] {
        &self.w0
    }

    pub fn weights1(&self) -> &[f64] {
        &self.w1
    }

    /// Index of the last entry, `J`.
    pub fn j(&self) -> usize {
        self.values.len() - 1
    }

    pub fn norm0_of(&self, x: &[f64]) -> f64 {
        weighted_norm(x, &self.w0, self.side0.q)
    }

    pub fn norm1_of(&self, x: &[f64]) -> f64 {
        weighted_norm(x, &self.w1, self.side1.q)
    }

    pub fn norm0(&self) -> f64 {
        self.norm0_of(&self.values)
    }

    pub fn norm1(&self) -> f64 {
        self.norm1_of(&self.values)
    }

    /// `‖a₀‖₀ + t‖a − a₀‖₁` for a candidate `a₀` (any signs).
    pub fn objective(&self, t: f64, a0: &[f64]) -> f64 {
        let a1: Vec<f64> = self.values.iter().zip(a0).map(|(a, b)| a - b).collect();
        self.norm0_of(a0) + t * self.norm1_of(&a1)
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|&v| v == 0.0)
    }
}

/// Value of `K(t, a)` with its certifying splitting.
#[derive(Clone, Debug, Serialize)]
pub struct KResult {
    pub t: f64,
    pub value: f64,
    /// `a₀ = λ ⊙ a`.
    pub split0: Vec<f64>,
    /// `a₁ = a − a₀`.
    pub split1: Vec<f64>,
    pub lambda: Vec<f64>,
    pub iterations: usize,
    /// Relative objective decrease over the final sweep.
    pub residual: f64,
}

const MAX_SWEEPS: usize = 20_000;
const SWEEP_TOL: f64 = 1e-15;
const ROOT_STEPS: usize = 200;
const GOLDEN_STEPS: usize = 200;

/// `K(t, a)` over collinear splittings `a₀ = λ ⊙ a`, `λ ∈ [0,1]^{J+1}`.
pub fn k_functional(t: f64, c: &SequenceCouple) -> Result<KResult> {
    k_functional_from(t, c, None)
}

/// As [`k_functional`], starting from a previous `a₀`.
pub fn k_functional_from(t: f64, c: &SequenceCouple, warm: Option<&[f64]>) -> Result<KResult> {
    if !(t > 0.0 && t.is_finite()) {
        return Err(Error::Domain(format!("t must be positive and finite, got {t}")));
    }
    let a = &c.values;
    let (b, iterations, residual) = if c.side0.q.is_infinite() || c.side1.q.is_infinite() {
        let b = level_reduction(t, c);
        (b, GOLDEN_STEPS, 0.0)
    } else {
        coordinate_descent(t, c, warm)?
    };
    let split1: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x - y).collect();
    let lambda = a
        .iter()
        .zip(&b)
        .map(|(x, y)| if *x == 0.0 { 0.0 } else { y / x })
        .collect();
    let value = c.norm0_of(&b) + t * c.norm1_of(&split1);
    Ok(KResult {
        t,
        value,
        split0: b,
        split1,
        lambda,
        iterations,
        residual,
    })
}

/// With `q₁ = ∞`, the cheapest `a₀` at level `L = ‖a₁‖₁` is
/// `max(0, a − L/w₁)`; with `q₀ = ∞`, the best `a₀` at level `L = ‖a₀‖₀`
/// is `min(a, L/w₀)`. Either way the objective is convex in `L`.
fn level_reduction(t: f64, c: &SequenceCouple) -> Vec<f64> {
    let a = &c.values;
    if c.side1.q.is_infinite() {
        let split = |l: f64| -> Vec<f64> { a.iter().zip(&c.w1).map(|(x, w)| (x - l / w).max(0.0)).collect() };
        let f = |l: f64| c.norm0_of(&split(l)) + t * l;
        let l = golden_min(f, 0.0, c.norm1());
        best_of(c, t, vec![split(l), a.to_vec(), vec![0.0; a.len()]])
    } else {
        let split = |l: f64| -> Vec<f64> { a.iter().zip(&c.w0).map(|(x, w)| x.min(l / w)).collect() };
        let f = |l: f64| {
            let b = split(l);
            let r: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x - y).collect();
            l + t * c.norm1_of(&r)
        };
        let l = golden_min(f, 0.0, c.norm0());
        best_of(c, t, vec![split(l), a.to_vec(), vec![0.0; a.len()]])
    }
}

fn best_of(c: &SequenceCouple, t: f64, candidates: Vec<Vec<f64>>) -> Vec<f64> {
    candidates
        .into_iter()
        .map(|b| (c.objective(t, &b), b))
        .min_by(|x, y| x.0.total_cmp(&y.0))
        .unwrap()
        .1
}

fn golden_min(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - g * (hi - lo);
    let mut x2 = lo + g * (hi - lo);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    for _ in 0..GOLDEN_STEPS {
        if hi - lo <= f64::EPSILON * hi.abs().max(lo.abs()) {
            break;
        }
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - g * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + g * (hi - lo);
            f2 = f(x2);
        }
    }
    let candidates = [lo, hi, x1, x2];
    candidates
        .into_iter()
        .min_by(|a, b| f(*a).total_cmp(&f(*b)))
        .unwrap()
}

/// `d/dx (S + (w x)^q)^{1/q}` for `x ≥ 0`, right derivative at `x = 0`.
fn norm_partial(s_rest: f64, w: f64, x: f64, q: f64) -> f64 {
    if q == 1.0 {
        return w;
    }
    let u = (w * x).powf(q);
    let tot = s_rest + u;
    if tot == 0.0 {
        return w;
    }
    w * (u / tot).powf((q - 1.0) / q)
}

/// Root of a nondecreasing `f` with `f(lo) < 0 < f(hi)`, by the Illinois
/// variant of regula falsi with a bisection fallback.
fn increasing_root(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    let mut flo = f(lo);
    let mut fhi = f(hi);
    let mut side = 0i8;
    for i in 0..ROOT_STEPS {
        let width = hi - lo;
        if width <= 4.0 * f64::EPSILON * hi.abs() {
            break;
        }
        let mut x = if i % 8 == 7 { 0.5 * (lo + hi) } else { (lo * fhi - hi * flo) / (fhi - flo) };
        if !(x > lo && x < hi) {
            x = 0.5 * (lo + hi);
        }
        let fx = f(x);
        if fx == 0.0 {
            return x;
        }
        if fx < 0.0 {
            lo = x;
            flo = fx;
            if side == -1 {
                fhi *= 0.5;
            }
            side = -1;
        } else {
            hi = x;
            fhi = fx;
            if side == 1 {
                flo *= 0.5;
            }
            side = 1;
        }
    }
    if -flo < fhi {
        lo
    } else {
        hi
    }
}

fn power_sum(x: &[f64], w: &[f64], q: f64) -> f64 {
    x.iter().zip(w).map(|(a, b)| (a * b).powf(q)).sum()
}

fn coordinate_descent(t: f64, c: &SequenceCouple, warm: Option<&[f64]>) -> Result<(Vec<f64>, usize, f64)> {
    let a = &c.values;
    let n = a.len();
    let (q0, q1) = (c.side0.q, c.side1.q);
    let zero = vec![0.0; n];
    let mut b = match warm {
        Some(w) if w.len() == n => w.iter().zip(a).map(|(x, y)| x.clamp(0.0, *y)).collect(),
        _ => best_of(c, t, vec![zero.clone(), a.clone()]),
    };
    let mut f = c.objective(t, &b);
    let mut sweeps = 0;
    let mut residual = f64::INFINITY;
    loop {
        // a sweep can move along a flat direction without lowering the
        // objective and open a descent direction for the next one
        let mut stagnant = 0;
        for _ in 0..MAX_SWEEPS {
            sweeps += 1;
            let mut p0 = power_sum(&b, &c.w0, q0);
            let r: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x - y).collect();
            let mut p1 = power_sum(&r, &c.w1, q1);
            for j in 0..n {
                if a[j] == 0.0 {
                    continue;
                }
                let (w0, w1) = (c.w0[j], c.w1[j]);
                let s0 = (p0 - (w0 * b[j]).powf(q0)).max(0.0);
                let s1 = (p1 - (w1 * (a[j] - b[j])).powf(q1)).max(0.0);
                let deriv = |x: f64| norm_partial(s0, w0, x, q0) - t * norm_partial(s1, w1, a[j] - x, q1);
                let x = if deriv(0.0) >= 0.0 {
                    0.0
                } else if deriv(a[j]) <= 0.0 {
                    a[j]
                } else {
                    increasing_root(deriv, 0.0, a[j])
                };
                b[j] = x;
                p0 = s0 + (w0 * x).powf(q0);
                p1 = s1 + (w1 * (a[j] - x)).powf(q1);
            }
            let nf = c.objective(t, &b);
            residual = ((f - nf) / f.max(f64::MIN_POSITIVE)).max(0.0);
            f = nf.min(f);
            stagnant = if residual <= SWEEP_TOL { stagnant + 1 } else { 0 };
            if stagnant == 2 {
                break;
            }
        }
        match corner_escape(t, c, &b) {
            Some(nb) => {
                let nf = c.objective(t, &nb);
                if nf < f * (1.0 - 1e-15) {
                    b = nb;
                    f = nf;
                    continue;
                }
                break;
            }
            None => break,
        }
    }
    if residual > 1e-6 {
        return Err(Error::Numerical {
            message: format!("K-functional coordinate descent did not converge at t = {t}"),
            residual,
        });
    }
    Ok((b, sweeps, residual))
}

/// At `a₀ = 0` or `a₀ = a` the norms are not differentiable and coordinate
/// moves can stall; try the steepest joint direction from the dual norm.
fn corner_escape(t: f64, c: &SequenceCouple, b: &[f64]) -> Option<Vec<f64>> {
    let a = &c.values;
    let n0 = c.norm0_of(b);
    let r: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let n1 = c.norm1_of(&r);
    let support: Vec<usize> = (0..a.len()).filter(|&j| a[j] > 0.0).collect();
    if n0 == 0.0 && c.side0.q > 1.0 {
        // grow a₀ along d with ⟨∇‖a‖₁, d⟩ maximal per unit ‖d‖₀
        let q = c.side1.q;
        let grad: Vec<f64> = (0..a.len())
            .map(|j| if a[j] > 0.0 { c.w1[j] * ((c.w1[j] * a[j]) / n1).powf(q - 1.0) } else { 0.0 })
            .collect();
        let dir = dual_direction(&grad, &c.w0, c.side0.q, &support);
        let amax = support
            .iter()
            .filter(|&&j| dir[j] > 0.0)
            .map(|&j| a[j] / dir[j])
            .fold(f64::INFINITY, f64::min);
        if !amax.is_finite() {
            return None;
        }
        let step = |al: f64| -> Vec<f64> { dir.iter().zip(a).map(|(d, x)| (al * d).min(*x)).collect() };
        let al = golden_min(|al| c.objective(t, &step(al)), 0.0, amax);
        return Some(step(al));
    }
    if n1 == 0.0 && c.side1.q > 1.0 {
        let q = c.side0.q;
        let grad: Vec<f64> = (0..a.len())
            .map(|j| if a[j] > 0.0 { c.w0[j] * ((c.w0[j] * a[j]) / n0).powf(q - 1.0) } else { 0.0 })
            .collect();
        let dir = dual_direction(&grad, &c.w1, c.side1.q, &support);
        let amax = support
            .iter()
            .filter(|&&j| dir[j] > 0.0)
            .map(|&j| a[j] / dir[j])
            .fold(f64::INFINITY, f64::min);
        if !amax.is_finite() {
            return None;
        }
        let step = |al: f64| -> Vec<f64> { dir.iter().zip(a).map(|(d, x)| (x - al * d).max(0.0)).collect() };
        let al = golden_min(|al| c.objective(t, &step(al)), 0.0, amax);
        return Some(step(al));
    }
    None
}

/// Direction `d ≥ 0` maximizing `⟨g, d⟩` subject to `‖w d‖_q = 1`.
fn dual_direction(g: &[f64], w: &[f64], q: f64, support: &[usize]) -> Vec<f64> {
    let qd = q / (q - 1.0);
    let mut d = vec![0.0; g.len()];
    let scale = support.iter().map(|&j| g[j] / w[j]).fold(0.0, f64::max);
    if scale == 0.0 {
        return d;
    }
    for &j in support {
        let e = (g[j] / w[j] / scale).powf(qd - 1.0);
        d[j] = e / w[j];
    }
    d
}

/// Brute-force reference for the K-functional.
pub mod oracle {
    use super::SequenceCouple;

    const INV_PHI: f64 = 0.618_033_988_749_894_8;

    /// Nested golden-section search over unrestricted `a₀` in the box
    /// `[−a/2, 3a/2]`: every coordinate is minimized by its own search, with
    /// the remaining coordinates minimized inside each evaluation. Partial
    /// minima of a convex objective are convex, so every level is unimodal.
    /// Returns the smallest objective value evaluated. Intended for `J ≤ 3`;
    /// the cost is `(iters + 2)^{J+1}` objective evaluations.
    pub fn brute_force_k(t: f64, c: &SequenceCouple, iters: usize) -> f64 {
        let a = c.values();
        let lo: Vec<f64> = a.iter().map(|x| (-0.5 * x).min(1.5 * x)).collect();
        let hi: Vec<f64> = a.iter().map(|x| (-0.5 * x).max(1.5 * x)).collect();
        let mut b = vec![0.0; a.len()];
        let mut best = f64::INFINITY;
        level(t, c, &lo, &hi, &mut b, 0, iters, &mut best);
        best
    }

    #[allow(clippy::too_many_arguments)]
    fn level(t: f64, c: &SequenceCouple, lo: &[f64], hi: &[f64], b: &mut [f64], d: usize, iters: usize, best: &mut f64) -> f64 {
        if d == b.len() {
            let v = c.objective(t, b);
            *best = best.min(v);
            return v;
        }
        let mut eval = |x: f64, b: &mut [f64]| {
            b[d] = x;
            level(t, c, lo, hi, b, d + 1, iters, best)
        };
        let (mut l, mut h) = (lo[d], hi[d]);
        let ends = eval(l, b).min(eval(h, b));
        let mut x1 = h - INV_PHI * (h - l);
        let mut x2 = l + INV_PHI * (h - l);
        let mut f1 = eval(x1, b);
        let mut f2 = eval(x2, b);
        for _ in 0..iters {
            if f1 <= f2 {
                h = x2;
                x2 = x1;
                f2 = f1;
                x1 = h - INV_PHI * (h - l);
                f1 = eval(x1, b);
            } else {
                l = x1;
                x1 = x2;
                f1 = f2;
                x2 = l + INV_PHI * (h - l);
                f2 = eval(x2, b);
            }
        }
        ends.min(f1).min(f2)
    }
}

/// Parameters `θ`, `r` of `(A₀, A₁)_{θ,r}` together with the endpoint sides.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThetaParams {
    pub theta: f64,
    pub r: f64,
    pub side0: Side,
    pub side1: Side,
    /// `(1−θ)s₀ + θs₁`.
    pub s: f64,
    /// `1/q = (1−θ)/q₀ + θ/q₁`.
    pub q: f64,
}

impl ThetaParams {
    pub fn new(theta: f64, r: f64, side0: Side, side1: Side) -> Result<Self> {
        if !(theta > 0.0 && theta < 1.0) {
            return Err(Error::Domain(format!("θ must lie in (0, 1), got {theta}")));
        }
        grid::check_exponent(r)?;
        Side::new(side0.s, side0.q)?;
        Side::new(side1.s, side1.q)?;
        Ok(ThetaParams {
            theta,
            r,
            side0,
            side1,
            s: (1.0 - theta) * side0.s + theta * side1.s,
            q: interpolate_exponent(theta, side0.q, side1.q),
        })
    }

    /// The side `ℓ^{s,r}` expected from the real method.
    pub fn target(&self) -> Side {
        Side { s: self.s, q: self.r }
    }
}

/// Nodes per octave between the exact-tail thresholds.
const NODES_PER_OCTAVE: f64 = 4.0;
const MIN_NODES: usize = 65;
const GL_NODES: [f64; 8] = [
    -0.960_289_856_497_536_3,
    -0.796_666_477_413_626_7,
    -0.525_532_409_916_329,
    -0.183_434_642_495_649_8,
    0.183_434_642_495_649_8,
    0.525_532_409_916_329,
    0.796_666_477_413_626_7,
    0.960_289_856_497_536_3,
];
const GL_WEIGHTS: [f64; 8] = [
    0.101_228_536_290_376_26,
    0.222_381_034_453_374_47,
    0.313_706_645_877_887_3,
    0.362_683_783_378_362,
    0.362_683_783_378_362,
    0.313_706_645_877_887_3,
    0.222_381_034_453_374_47,
    0.101_228_536_290_376_26,
];

/// Sampled K-functional with the thresholds beyond which it is exactly
/// `t‖a‖₁` (small `t`) or `‖a‖₀` (large `t`).
#[derive(Clone, Debug, Serialize)]
pub struct KProfile {
    pub t: Vec<f64>,
    pub k: Vec<f64>,
    pub norm0: f64,
    pub norm1: f64,
}

/// Samples `K(t, a)` on a log grid that covers every coordinate crossover
/// `w₀_j / w₁_j` and extends until `K` matches its linear tails.
pub fn k_profile(c: &SequenceCouple) -> Result<KProfile> {
    let n0 = c.norm0();
    let n1 = c.norm1();
    let ratios: Vec<f64> = c
        .values
        .iter()
        .enumerate()
        .filter(|(_, &v)| v > 0.0)
        .map(|(j, _)| c.w0[j] / c.w1[j])
        .chain(std::iter::once(n0 / n1))
        .collect();
    let rmin = ratios.iter().cloned().fold(f64::INFINITY, f64::min);
    let rmax = ratios.iter().cloned().fold(0.0, f64::max);
    let mut lo = rmin.log2().floor() - 1.0;
    let mut hi = rmax.log2().ceil() + 1.0;
    let tail_tol = 1e-13;
    loop {
        let t = lo.exp2();
        let k = k_functional(t, c)?.value;
        if (t * n1 - k).abs() <= tail_tol * t * n1 || lo < -1100.0 {
            break;
        }
        lo -= 2.0;
    }
    loop {
        let t = hi.exp2();
        let k = k_functional(t, c)?.value;
        if (n0 - k).abs() <= tail_tol * n0 || hi > 1100.0 {
            break;
        }
        hi += 2.0;
    }
    let count = (((hi - lo) * NODES_PER_OCTAVE).ceil() as usize + 1).max(MIN_NODES);
    let mut ts: Vec<f64> = (0..count)
        .map(|i| (lo + (hi - lo) * i as f64 / (count - 1) as f64).exp2())
        .collect();
    ts.extend(ratios.iter().filter(|&&r| r > lo.exp2() && r < hi.exp2()));
    ts.push(1.0f64.clamp(lo.exp2(), hi.exp2()));
    ts.sort_by(f64::total_cmp);
    ts.dedup_by(|a, b| (*a - *b).abs() <= 1e-14 * b.abs());
    let mut ks = Vec::with_capacity(ts.len());
    let mut warm: Option<Vec<f64>> = None;
    for &t in &ts {
        let r = k_functional_from(t, c, warm.as_deref())?;
        ks.push(r.value);
        warm = Some(r.split0);
    }
    Ok(KProfile {
        t: ts,
        k: ks,
        norm0: n0,
        norm1: n1,
    })
}

/// `(∫_0^∞ (t^{−θ} K(t,a))^r dt/t)^{1/r}`, or `sup_t t^{−θ}K(t,a)` for
/// `r = ∞`.
pub fn real_interp_norm(c: &SequenceCouple, prm: &ThetaParams) -> Result<f64> {
    if c.is_zero() {
        return Ok(0.0);
    }
    let profile = k_profile(c)?;
    Ok(integrate_profile(&profile, prm.theta, prm.r))
}

/// Integrates a sampled profile: `K` is interpolated linearly in `t` on
/// each panel (exact for piecewise-linear `K` with kinks at nodes), panels
/// use 8-point Gauss–Legendre in `log t`, and both tails are closed form.
pub fn integrate_profile(p: &KProfile, theta: f64, r: f64) -> f64 {
    let (ts, ks) = (&p.t, &p.k);
    let t_lo = ts[0];
    let t_hi = *ts.last().unwrap();
    if r.is_infinite() {
        let mut best = p.norm1 * t_lo.powf(1.0 - theta);
        best = best.max(p.norm0 * t_hi.powf(-theta));
        for i in 0..ts.len() {
            best = best.max(ts[i].powf(-theta) * ks[i]);
            if i + 1 < ts.len() {
                let beta = (ks[i + 1] - ks[i]) / (ts[i + 1] - ts[i]);
                let alpha = ks[i] - beta * ts[i];
                if alpha > 0.0 && beta > 0.0 {
                    let ts_star = theta * alpha / ((1.0 - theta) * beta);
                    if ts_star > ts[i] && ts_star < ts[i + 1] {
                        best = best.max(ts_star.powf(-theta) * (alpha + beta * ts_star));
                    }
                }
            }
        }
        return best;
    }
    // integrate in a rescaled form to keep powers finite
    let scale = ks.iter().zip(ts).map(|(k, t)| t.powf(-theta) * k).fold(0.0f64, f64::max);
    let mut total = (p.norm1 * t_lo.powf(1.0 - theta) / scale).powf(r) / ((1.0 - theta) * r);
    total += (p.norm0 * t_hi.powf(-theta) / scale).powf(r) / (theta * r);
    for i in 0..ts.len() - 1 {
        let (a, b) = (ts[i].ln(), ts[i + 1].ln());
        let beta = (ks[i + 1] - ks[i]) / (ts[i + 1] - ts[i]);
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        let mut s = 0.0;
        for (x, w) in GL_NODES.iter().zip(GL_WEIGHTS) {
            let u = mid + half * x;
            let t = u.exp();
            let k = ks[i] + beta * (t - ts[i]);
            s += w * (t.powf(-theta) * k / scale).powf(r);
        }
        total += half * s;
    }
    scale * total.powf(1.0 / r)
}

/// Ratio band of an equivalence check.
#[derive(Clone, Debug, Serialize)]
pub struct RatioBand {
    pub min: f64,
    pub max: f64,
    pub samples: usize,
    pub skipped: usize,
}

impl RatioBand {
    fn from_ratios(ratios: &[Option<f64>]) -> Self {
        let vals: Vec<f64> = ratios.iter().flatten().copied().collect();
        RatioBand {
            min: vals.iter().cloned().fold(f64::INFINITY, f64::min),
            max: vals.iter().cloned().fold(0.0, f64::max),
            samples: vals.len(),
            skipped: ratios.len() - vals.len(),
        }
    }

    /// Largest relative change of either band end relative to `other`.
    pub fn drift(&self, other: &RatioBand) -> f64 {
        let d = |a: f64, b: f64| (a / b - 1.0).abs();
        d(self.min, other.min).max(d(self.max, other.max))
    }

    pub fn contains(&self, x: f64, rel_tol: f64) -> bool {
        x >= self.min * (1.0 - rel_tol) && x <= self.max * (1.0 + rel_tol)
    }
}

/// One trial of a sequence-identity study.
#[derive(Clone, Debug, Serialize)]
pub struct SequenceTrial {
    pub trial: usize,
    pub seed: u64,
    pub norm0: f64,
    pub norm1: f64,
    pub norm_mid: f64,
    pub target: f64,
    pub ratio: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct SequenceIdentityReport {
    pub j: usize,
    pub seed: u64,
    pub band: RatioBand,
    pub trials: Vec<SequenceTrial>,
    pub single_coordinate: SingleCoordinate,
}

/// Ratio for a sequence with one nonzero entry, measured and in closed form.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct SingleCoordinate {
    pub index: usize,
    pub measured: f64,
    pub closed_form: f64,
}

/// `(1/((1−θ)r) + 1/(θr))^{1/r}`, or 1 for `r = ∞`.
pub fn single_coordinate_constant(theta: f64, r: f64) -> f64 {
    if r.is_infinite() {
        return 1.0;
    }
    (1.0 / ((1.0 - theta) * r) + 1.0 / (theta * r)).powf(1.0 / r)
}

fn single_coordinate(j: usize, prm: &ThetaParams) -> Result<SingleCoordinate> {
    let index = j / 2;
    let mut a = vec![0.0; j + 1];
    a[index] = 1.0;
    let c = SequenceCouple::new(a, prm.side0, prm.side1)?;
    let target_side = prm.target();
    let target = weighted_norm(c.values(), &target_side.weights(j + 1), target_side.q);
    Ok(SingleCoordinate {
        index,
        measured: real_interp_norm(&c, prm)? / target,
        closed_form: single_coordinate_constant(prm.theta, prm.r),
    })
}

/// Random sequence `a_j = 2^{−js}u_j`, `u_j` uniform on `(0, 1]`, with `s`
/// the interpolated smoothness.
pub fn random_sequence(j: usize, s: f64, rng: &mut ChaCha8Rng) -> Vec<f64> {
    (0..=j)
        .map(|i| (-(i as f64) * s).exp2() * (1.0 - rng.random::<f64>()))
        .collect()
}

/// Ratio `‖a‖_{θ,r} / ‖a‖_{ℓ^{s,r}}` over seeded random sequences.
pub fn verify_sequence_identity(trials: usize, j: usize, prm: &ThetaParams, seed: u64) -> Result<SequenceIdentityReport> {
    if prm.side0.s == prm.side1.s {
        return Err(Error::Precondition("the real-interpolation identity needs s₀ ≠ s₁".into()));
    }
    let seeds: Vec<u64> = {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..trials).map(|_| rng.random()).collect()
    };
    let target_side = prm.target();
    let results: Vec<Option<SequenceTrial>> = seeds
        .par_iter()
        .enumerate()
        .map(|(i, &s)| {
            let mut rng = ChaCha8Rng::seed_from_u64(s);
            let a = random_sequence(j, prm.s, &mut rng);
            let c = SequenceCouple::new(a, prm.side0, prm.side1)?;
            if c.is_zero() {
                return Ok(None);
            }
            let mid = real_interp_norm(&c, prm)?;
            let target = weighted_norm(c.values(), &target_side.weights(j + 1), target_side.q);
            Ok(Some(SequenceTrial {
                trial: i,
                seed: s,
                norm0: c.norm0(),
                norm1: c.norm1(),
                norm_mid: mid,
                target,
                ratio: mid / target,
            }))
        })
        .collect::<Result<Vec<_>>>()?;
    let ratios: Vec<Option<f64>> = results.iter().map(|r| r.as_ref().map(|t| t.ratio)).collect();
    Ok(SequenceIdentityReport {
        j,
        seed,
        band: RatioBand::from_ratios(&ratios),
        trials: results.into_iter().flatten().collect(),
        single_coordinate: single_coordinate(j, prm)?,
    })
}

/// Ratio of `‖(‖φ_j(𝓛)f‖_p)_j‖_{θ,r}` to `‖f‖_{B_p^{s,r}(𝓛)}` over a test set.
#[derive(Clone, Debug, Serialize)]
pub struct BesovInterpReport {
    pub band: RatioBand,
    pub ratios: Vec<Option<f64>>,
}

pub fn verify_besov_real_interp<W: WindowFamily + ?Sized>(
    fs: &[GridFunction],
    dec: &SpectralDecomposition,
    sys: &W,
    p: f64,
    prm: &ThetaParams,
) -> Result<BesovInterpReport> {
    if prm.side0.s == prm.side1.s {
        return Err(Error::Precondition("the real-interpolation identity needs s₀ ≠ s₁".into()));
    }
    grid::check_exponent(p)?;
    let target = SpaceParams::besov(prm.s, p, prm.r)?;
    let ratios = fs
        .iter()
        .map(|f| {
            let blocks = spaces::s_op(f, dec, sys);
            let a = blocks.block_norms(0.0, p)?;
            let c = SequenceCouple::new(a, prm.side0, prm.side1)?;
            if c.is_zero() {
                return Ok(None);
            }
            let mid = real_interp_norm(&c, prm)?;
            let b = spaces::vector_norm(&blocks, &target)?;
            Ok(Some(mid / b))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(BesovInterpReport {
        band: RatioBand::from_ratios(&ratios),
        ratios,
    })
}

/// `C = ‖·‖_mid / (‖·‖₀^{1−θ} ‖·‖₁^θ)`.
pub fn log_convexity_ratio(mid: f64, n0: f64, n1: f64, theta: f64) -> f64 {
    if mid == 0.0 {
        return 0.0;
    }
    mid / (n0.powf(1.0 - theta) * n1.powf(theta))
}

#[derive(Clone, Debug, Serialize)]
pub struct LogConvexityReport {
    pub trials: usize,
    pub seed: u64,
    pub max_constant: f64,
    pub min_constant: f64,
}

/// Hölder backbone: for random `a`, weights `w₀, w₁`, exponents `p₀, p₁`
/// and `θ`, `‖a‖_{p,w} ≤ ‖a‖_{p₀,w₀}^{1−θ} ‖a‖_{p₁,w₁}^θ` with
/// `w = w₀^{1−θ}w₁^θ`.
pub fn holder_backbone(trials: usize, seed: u64) -> LogConvexityReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut hi = 0.0f64;
    let mut lo = f64::INFINITY;
    for _ in 0..trials {
        let n = rng.random_range(1..=24);
        let a: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let w0: Vec<f64> = (0..n).map(|_| rng.random_range(-8.0f64..8.0).exp2()).collect();
        let w1: Vec<f64> = (0..n).map(|_| rng.random_range(-8.0f64..8.0).exp2()).collect();
        let exponent = |rng: &mut ChaCha8Rng| {
            if rng.random_bool(0.15) {
                f64::INFINITY
            } else {
                1.0 + rng.random_range(0.0..6.0)
            }
        };
        let p0 = exponent(&mut rng);
        let p1 = exponent(&mut rng);
        let theta = rng.random_range(0.01..0.99);
        let p = interpolate_exponent(theta, p0, p1);
        let w: Vec<f64> = w0.iter().zip(&w1).map(|(x, y)| x.powf(1.0 - theta) * y.powf(theta)).collect();
        let c = log_convexity_ratio(
            weighted_norm(&a, &w, p),
            weighted_norm(&a, &w0, p0),
            weighted_norm(&a, &w1, p1),
            theta,
        );
        hi = hi.max(c);
        lo = lo.min(c);
    }
    LogConvexityReport {
        trials,
        seed,
        max_constant: hi,
        min_constant: lo,
    }
}

/// Empirical `C` in `‖f‖_mid ≤ C ‖f‖₀^{1−θ} ‖f‖₁^θ` over a test set.
pub fn space_log_convexity<W: WindowFamily + ?Sized>(
    fs: &[GridFunction],
    dec: &SpectralDecomposition,
    sys: &W,
    end0: &SpaceParams,
    end1: &SpaceParams,
    theta: f64,
) -> Result<LogConvexityReport> {
    let mid = interpolate_space(end0, end1, theta)?;
    let mut hi = 0.0f64;
    let mut lo = f64::INFINITY;
    for f in fs {
        let g = spaces::s_op(f, dec, sys);
        let c = log_convexity_ratio(
            spaces::vector_norm(&g, &mid)?,
            spaces::vector_norm(&g, end0)?,
            spaces::vector_norm(&g, end1)?,
            theta,
        );
        hi = hi.max(c);
        lo = lo.min(c);
    }
    Ok(LogConvexityReport {
        trials: fs.len(),
        seed: 0,
        max_constant: hi,
        min_constant: lo,
    })
}

/// Complex-method parameters between two endpoint spaces of one flavour.
pub fn interpolate_space(end0: &SpaceParams, end1: &SpaceParams, theta: f64) -> Result<SpaceParams> {
    if !(theta > 0.0 && theta < 1.0) {
        return Err(Error::Domain(format!("θ must lie in (0, 1), got {theta}")));
    }
    if end0.flavor != end1.flavor {
        return Err(Error::Precondition("endpoint spaces must share a flavour".into()));
    }
    SpaceParams::new(
        (1.0 - theta) * end0.s + theta * end1.s,
        interpolate_exponent(theta, end0.p, end1.p),
        interpolate_exponent(theta, end0.q, end1.q),
        end0.flavor,
    )
}

/// Operators shipped for the interpolation-of-operators check.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, tag = "kind", rename_all = "snake_case")]
pub enum BuiltinOperator {
    Identity,
    /// `m(𝓛) = c`, `|c| ≤ 1`.
    ScalarMultiplier { value: f64 },
    /// `m(𝓛) = e^{−t𝓛}`.
    HeatMultiplier { t: f64 },
    /// Cyclic shift by `shift` nodes along axis 0 (periodic grids).
    Translation { shift: usize },
    /// Random sparse symmetric matrix with absolute row sums at most one.
    RandomContraction { seed: u64, per_row: usize },
}

impl BuiltinOperator {
    pub fn apply(&self, dec: &SpectralDecomposition, f: &GridFunction) -> Result<GridFunction> {
        match self {
            BuiltinOperator::Identity => Ok(f.clone()),
            BuiltinOperator::ScalarMultiplier { value } => {
                if value.abs() > 1.0 {
                    return Err(Error::Domain(format!("multiplier {value} exceeds 1 in modulus")));
                }
                Ok(f.scale(*value))
            }
            BuiltinOperator::HeatMultiplier { t } => dec.apply_function(|l| (-t * l).exp(), f),
            BuiltinOperator::Translation { shift } => {
                let g = f.grid();
                if g.boundary() != crate::grid::Boundary::Periodic {
                    return Err(Error::Precondition("translation needs a periodic grid".into()));
                }
                let n0 = g.sizes()[0];
                let vals: Vec<crate::Complex64> = (0..g.len())
                    .map(|x| {
                        let mut mi = g.multi_index(x);
                        mi[0] = (mi[0] + n0 - shift % n0) % n0;
                        f.values()[g.linear_index(mi)]
                    })
                    .collect();
                GridFunction::new(g.clone(), vals)
            }
            BuiltinOperator::RandomContraction { seed, per_row } => {
                let m = f.len();
                let mut rng = ChaCha8Rng::seed_from_u64(*seed);
                let mut entries = std::collections::BTreeMap::new();
                for x in 0..m {
                    for _ in 0..*per_row {
                        let y = rng.random_range(0..m);
                        let v: f64 = rng.random_range(-1.0..1.0);
                        *entries.entry((x.min(y), x.max(y))).or_insert(0.0) += v;
                    }
                }
                let mut rows = vec![0.0f64; m];
                for (&(x, y), v) in &entries {
                    rows[x] += v.abs();
                    if x != y {
                        rows[y] += v.abs();
                    }
                }
                let scale = rows.iter().cloned().fold(0.0, f64::max).max(1.0);
                let mut out = vec![crate::Complex64::new(0.0, 0.0); m];
                let vals = f.values();
                for (&(x, y), v) in &entries {
                    let v = v / scale;
                    out[x] += vals[y] * v;
                    if x != y {
                        out[y] += vals[x] * v;
                    }
                }
                GridFunction::new(f.grid().clone(), out)
            }
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct OperatorInterpReport {
    pub operator: BuiltinOperator,
    /// Largest `‖Tf‖/‖f‖` at each endpoint and at the interpolated space.
    pub m0: f64,
    pub m1: f64,
    pub m_mid: f64,
    /// `m_mid / (m0^{1−θ} m1^θ)`.
    pub constant: f64,
    pub trials: usize,
}

/// Empirical operator norms of `T` on the endpoint and interpolated
/// spaces, maximized over the test set.
pub fn operator_interp_check<W: WindowFamily + ?Sized>(
    op: &BuiltinOperator,
    fs: &[GridFunction],
    dec: &SpectralDecomposition,
    sys: &W,
    end0: &SpaceParams,
    end1: &SpaceParams,
    theta: f64,
) -> Result<OperatorInterpReport> {
    let mid = interpolate_space(end0, end1, theta)?;
    let mut m = [0.0f64; 3];
    for f in fs {
        let tf = op.apply(dec, f)?;
        let gf = spaces::s_op(f, dec, sys);
        let gt = spaces::s_op(&tf, dec, sys);
        for (slot, prm) in [end0, end1, &mid].into_iter().enumerate() {
            let d = spaces::vector_norm(&gf, prm)?;
            if d > 0.0 {
                m[slot] = m[slot].max(spaces::vector_norm(&gt, prm)? / d);
            }
        }
    }
    let constant = if m[2] == 0.0 { 0.0 } else { m[2] / (m[0].powf(1.0 - theta) * m[1].powf(theta)) };
    Ok(OperatorInterpReport {
        operator: op.clone(),
        m0: m[0],
        m1: m[1],
        m_mid: m[2],
        constant,
        trials: fs.len(),
    })
}
