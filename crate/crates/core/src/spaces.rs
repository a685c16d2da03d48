//! Besov and Triebel–Lizorkin norms adapted to an operator, and the
//! retraction pair `S f = (φ_j(𝓛)f)_j`, `R g = Σ_j ψ_j(𝓛) g_j`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::calculus::SpectralDecomposition;
use crate::error::{Error, Result};
use crate::grid::{self, GridFunction};
use crate::partition::{PartitionPair, WindowFamily};
use crate::Complex64;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Flavor {
    Besov,
    TriebelLizorkin,
}

/// Smoothness `s`, integrability `p`, summability `q`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpaceParams {
    pub s: f64,
    pub p: f64,
    pub q: f64,
    pub flavor: Flavor,
}

impl SpaceParams {
    pub fn new(s: f64, p: f64, q: f64, flavor: Flavor) -> Result<Self> {
        if !s.is_finite() {
            return Err(Error::Domain(format!("smoothness must be finite, got {s}")));
        }
        grid::check_exponent(p)?;
        grid::check_exponent(q)?;
        Ok(SpaceParams { s, p, q, flavor })
    }

    pub fn besov(s: f64, p: f64, q: f64) -> Result<Self> {
        SpaceParams::new(s, p, q, Flavor::Besov)
    }

    pub fn triebel_lizorkin(s: f64, p: f64, q: f64) -> Result<Self> {
        if p.is_infinite() {
            return Err(Error::UnsupportedSize("Triebel–Lizorkin norm requires p < ∞".into()));
        }
        SpaceParams::new(s, p, q, Flavor::TriebelLizorkin)
    }

    fn validate(&self) -> Result<()> {
        SpaceParams::new(self.s, self.p, self.q, self.flavor).map(|_| ())
    }
}

/// Blocks `g_0..g_J` on a common grid.
#[derive(Clone, Debug)]
pub struct BlockSequence {
    blocks: Vec<GridFunction>,
}

impl BlockSequence {
    pub fn new(blocks: Vec<GridFunction>) -> Result<Self> {
        if let Some(first) = blocks.first() {
            if blocks.iter().any(|b| b.grid() != first.grid()) {
                return Err(Error::Domain("all blocks must live on one grid".into()));
            }
        }
        Ok(BlockSequence { blocks })
    }

    pub fn blocks(&self) -> &[GridFunction] {
        &self.blocks
    }

    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    /// `αg + βh`, blockwise.
    pub fn combine(&self, alpha: f64, other: &BlockSequence, beta: f64) -> Result<Self> {
        if self.len() != other.len() {
            return Err(Error::Domain("block counts differ".into()));
        }
        Ok(BlockSequence {
            blocks: self
                .blocks
                .iter()
                .zip(&other.blocks)
                .map(|(a, b)| a.scale(alpha).add(&b.scale(beta)))
                .collect(),
        })
    }

    /// Weighted block norms `2^{js}‖g_j‖_p`.
    pub fn block_norms(&self, s: f64, p: f64) -> Result<Vec<f64>> {
        self.blocks
            .iter()
            .enumerate()
            .map(|(j, g)| Ok(level_weight(j, s) * g.lp_norm(p)?))
            .collect()
    }
}

pub(crate) fn level_weight(j: usize, s: f64) -> f64 {
    (j as f64 * s).exp2()
}

/// `ℓ^q` norm of a nonnegative sequence.
pub fn lq_norm(values: &[f64], q: f64) -> f64 {
    grid::weighted_lp(values.iter().copied(), 1.0, q)
}

/// `S f = (φ_j(𝓛)f)_{j=0..J}`.
pub fn s_op<W: WindowFamily + ?Sized>(f: &GridFunction, dec: &SpectralDecomposition, sys: &W) -> BlockSequence {
    let coeffs = dec.analyze(f);
    let blocks = (0..=sys.j_max())
        .map(|j| {
            let c: Vec<Complex64> = coeffs
                .iter()
                .zip(dec.eigenvalues())
                .map(|(c, &l)| c * sys.window(j, l))
                .collect();
            dec.synthesize(&c)
        })
        .collect();
    BlockSequence { blocks }
}

/// `R g = Σ_j ψ_j(𝓛) g_j`.
pub fn r_op(g: &BlockSequence, dec: &SpectralDecomposition, pair: &PartitionPair) -> Result<GridFunction> {
    let expected = pair.phi().len();
    if g.len() != expected {
        return Err(Error::Domain(format!("expected {expected} blocks, got {}", g.len())));
    }
    let mut acc = vec![Complex64::new(0.0, 0.0); dec.len()];
    for (j, block) in g.blocks.iter().enumerate() {
        let c = dec.analyze(block);
        for ((a, c), &l) in acc.iter_mut().zip(c).zip(dec.eigenvalues()) {
            *a += c * pair.psi(j, l);
        }
    }
    Ok(dec.synthesize(&acc))
}

/// `ℓ^{s,q}(L^p)` norm for Besov flavour, `L^p(ℓ^{s,q})` for
/// Triebel–Lizorkin flavour.
pub fn vector_norm(g: &BlockSequence, prm: &SpaceParams) -> Result<f64> {
    prm.validate()?;
    match prm.flavor {
        Flavor::Besov => Ok(lq_norm(&g.block_norms(prm.s, prm.p)?, prm.q)),
        Flavor::TriebelLizorkin => {
            if prm.p.is_infinite() {
                return Err(Error::UnsupportedSize("Triebel–Lizorkin norm requires p < ∞".into()));
            }
            let Some(first) = g.blocks.first() else {
                return Ok(0.0);
            };
            let m = first.len();
            let weights: Vec<f64> = (0..g.len()).map(|j| level_weight(j, prm.s)).collect();
            let pointwise: Vec<f64> = (0..m)
                .map(|x| {
                    let col: Vec<f64> = g
                        .blocks
                        .iter()
                        .zip(&weights)
                        .map(|(b, w)| w * b.values()[x].norm())
                        .collect();
                    lq_norm(&col, prm.q)
                })
                .collect();
            Ok(grid::weighted_lp(pointwise.iter().copied(), first.grid().weight(), prm.p))
        }
    }
}

/// `(Σ_j 2^{jsq} ‖φ_j(𝓛)f‖_p^q)^{1/q}`.
pub fn besov_norm<W: WindowFamily + ?Sized>(
    f: &GridFunction,
    dec: &SpectralDecomposition,
    sys: &W,
    prm: &SpaceParams,
) -> Result<f64> {
    if prm.flavor != Flavor::Besov {
        return Err(Error::Domain("besov_norm needs Besov parameters".into()));
    }
    vector_norm(&s_op(f, dec, sys), prm)
}

/// `‖(Σ_j 2^{jsq} |φ_j(𝓛)f|^q)^{1/q}‖_p`.
pub fn tl_norm<W: WindowFamily + ?Sized>(
    f: &GridFunction,
    dec: &SpectralDecomposition,
    sys: &W,
    prm: &SpaceParams,
) -> Result<f64> {
    if prm.flavor != Flavor::TriebelLizorkin {
        return Err(Error::Domain("tl_norm needs Triebel–Lizorkin parameters".into()));
    }
    vector_norm(&s_op(f, dec, sys), prm)
}

/// Norm selected by the parameters' flavour.
pub fn norm<W: WindowFamily + ?Sized>(
    f: &GridFunction,
    dec: &SpectralDecomposition,
    sys: &W,
    prm: &SpaceParams,
) -> Result<f64> {
    vector_norm(&s_op(f, dec, sys), prm)
}

/// Removes spectral content above `λ_cut` in absolute value.
pub fn project_below(f: &GridFunction, dec: &SpectralDecomposition, lambda_cut: f64) -> GridFunction {
    let mult: Vec<f64> = dec
        .eigenvalues()
        .iter()
        .map(|l| if l.abs() <= lambda_cut { 1.0 } else { 0.0 })
        .collect();
    dec.apply_multipliers(&mult, f)
}

/// Band of `‖R g‖_B / ‖g‖_{ℓ^{s,q}(L^p)}` over random band-limited blocks
/// `g_j = φ_j(𝓛)u_j` with white-noise `u_j`.
#[derive(Clone, Debug, Serialize)]
pub struct RetractionBound {
    pub trials: usize,
    pub seed: u64,
    pub min_ratio: f64,
    pub max_ratio: f64,
}

pub fn retraction_bound(
    dec: &SpectralDecomposition,
    pair: &PartitionPair,
    prm: &SpaceParams,
    trials: usize,
    seed: u64,
) -> Result<RetractionBound> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let grid = dec.grid().clone();
    let sys = pair.phi();
    let mut lo = f64::INFINITY;
    let mut hi = 0.0f64;
    for _ in 0..trials {
        let blocks = (0..=sys.j_max())
            .map(|j| {
                let u = GridFunction::from_real(
                    grid.clone(),
                    (0..grid.len()).map(|_| rng.random_range(-1.0..1.0)).collect(),
                )?;
                dec.apply_function(|l| sys.window(j, l), &u)
            })
            .collect::<Result<Vec<_>>>()?;
        let g = BlockSequence::new(blocks)?;
        let denom = vector_norm(&g, prm)?;
        if denom == 0.0 {
            continue;
        }
        let rg = r_op(&g, dec, pair)?;
        let ratio = norm(&rg, dec, sys, prm)? / denom;
        lo = lo.min(ratio);
        hi = hi.max(ratio);
    }
    Ok(RetractionBound {
        trials,
        seed,
        min_ratio: lo,
        max_ratio: hi,
    })
}
