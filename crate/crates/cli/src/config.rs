//! Experiment configuration: one TOML file describes the grid, the operator,
//! the dyadic system, output locations and the parameters of every suite.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use opspace::bounds::RadialProfile;
use opspace::calculus::DEFAULT_DENSE_CAP;
use opspace::interp::{BuiltinOperator, Side, ThetaParams};
use opspace::operators::FieldPreset;
use opspace::{Boundary, Grid, GridSpec, OperatorKind, SpaceParams, TransitionProfile};
use serde::{Deserialize, Serialize};

use crate::CliError;

/// Verification suites selectable from the command line.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Suite {
    Decay,
    Heat,
    Partition,
    Retraction,
    Kfunc,
    Realinterp,
    Complexinterp,
    Maximal,
    Kato,
}

impl Suite {
    pub const ALL: [Suite; 9] = [
        Suite::Partition,
        Suite::Decay,
        Suite::Heat,
        Suite::Retraction,
        Suite::Kfunc,
        Suite::Realinterp,
        Suite::Complexinterp,
        Suite::Maximal,
        Suite::Kato,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Suite::Decay => "decay",
            Suite::Heat => "heat",
            Suite::Partition => "partition",
            Suite::Retraction => "retraction",
            Suite::Kfunc => "kfunc",
            Suite::Realinterp => "realinterp",
            Suite::Complexinterp => "complexinterp",
            Suite::Maximal => "maximal",
            Suite::Kato => "kato",
        }
    }

    /// Whether the suite needs a dense spectral decomposition.
    pub fn needs_eig(self) -> bool {
        matches!(
            self,
            Suite::Decay | Suite::Heat | Suite::Retraction | Suite::Realinterp | Suite::Complexinterp
        )
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "default_seed")]
    pub seed: u64,
    /// Worker threads; 0 lets the runtime decide.
    #[serde(default)]
    pub threads: usize,
    pub grid: GridSpec,
    #[serde(default)]
    pub operator: OperatorConfig,
    #[serde(default)]
    pub partition: PartitionConfig,
    #[serde(default)]
    pub output: OutputConfig,
    #[serde(default)]
    pub cache: CacheConfig,
    #[serde(default)]
    pub decay: DecayConfig,
    #[serde(default)]
    pub heat: HeatConfig,
    #[serde(default, rename = "partition_check")]
    pub partition_check: PartitionCheckConfig,
    #[serde(default)]
    pub retraction: RetractionConfig,
    #[serde(default)]
    pub kfunc: KfuncConfig,
    #[serde(default)]
    pub realinterp: RealInterpConfig,
    #[serde(default)]
    pub complexinterp: ComplexInterpConfig,
    #[serde(default)]
    pub maximal: MaximalConfig,
    #[serde(default)]
    pub kato: KatoConfig,
}

fn default_seed() -> u64 {
    42
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OperatorConfig {
    pub kind: OperatorKind,
    /// `V₊` for Schrödinger operators.
    pub potential: FieldPreset,
    /// `V₋` for Schrödinger operators.
    pub negative_potential: FieldPreset,
    /// One vector-potential component per axis for the magnetic operator.
    pub magnetic: Vec<FieldPreset>,
    /// Scalar coefficient `a(x)` of the isotropic elliptic operator.
    pub coefficient: FieldPreset,
    pub mu: f64,
    /// Largest grid accepted by the dense eigensolver.
    pub dense_cap: usize,
}

impl Default for OperatorConfig {
    fn default() -> Self {
        OperatorConfig {
            kind: OperatorKind::Laplacian,
            potential: FieldPreset::Zero,
            negative_potential: FieldPreset::Zero,
            magnetic: Vec::new(),
            coefficient: FieldPreset::Constant { value: 1.0 },
            mu: 1.0,
            dense_cap: DEFAULT_DENSE_CAP,
        }
    }
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PartitionConfig {
    pub profile: TransitionProfile,
    /// Top window index; by default the smallest `J` covering the operator's
    /// Gershgorin bound.
    pub j_max: Option<usize>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub dir: PathBuf,
    pub csv: bool,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            dir: PathBuf::from("opspace-out"),
            csv: true,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CacheConfig {
    pub enabled: bool,
    /// Used when `OPSPACE_CACHE_DIR` is unset.
    pub dir: PathBuf,
}

impl Default for CacheConfig {
    fn default() -> Self {
        CacheConfig {
            enabled: true,
            dir: PathBuf::from(".opspace-cache"),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DecayConfig {
    pub epsilon: f64,
    /// Cap on `sup_j c(j)`.
    pub budget: f64,
    /// Cap on max/min of `c(j)` over active windows.
    pub uniformity_cap: f64,
    /// Repeat on the grid with twice the nodes per axis and half the spacing.
    pub refinement: bool,
    /// Cap on the growth of `sup_j c(j)` under refinement.
    pub refinement_cap: f64,
    /// Also run indicator windows, which must fail the refinement check.
    pub negative_control: bool,
}

impl Default for DecayConfig {
    fn default() -> Self {
        DecayConfig {
            epsilon: 1.0,
            budget: 1e3,
            uniformity_cap: 10.0,
            refinement: true,
            refinement_cap: 1.5,
            negative_control: true,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HeatConfig {
    /// Gaussian exponent constant `c` in `e^{−c r²/t}`.
    pub c: f64,
    /// Smallest time; `4h²` by default.
    pub t_min: Option<f64>,
    pub t_max: f64,
    /// Cap on max/min of the per-time constants.
    pub uniformity_cap: f64,
    /// Slack for `V ≥ 0` never increasing the per-time constants.
    pub domination_tol: f64,
}

impl Default for HeatConfig {
    fn default() -> Self {
        HeatConfig {
            c: 0.125,
            t_min: None,
            t_max: 1.0,
            uniformity_cap: 2.0,
            domination_tol: 1e-9,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PartitionCheckConfig {
    pub k_max: usize,
    pub defect_tol: f64,
}

impl Default for PartitionCheckConfig {
    fn default() -> Self {
        PartitionCheckConfig {
            k_max: 4,
            defect_tol: 1e-12,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RetractionConfig {
    pub trials: usize,
    /// Cap on `‖R S f − f‖₂ / ‖f‖₂`.
    pub tolerance: f64,
    /// Space for the `‖R g‖ ≲ ‖g‖` band.
    pub space: SpaceParams,
    pub bound_trials: usize,
}

impl Default for RetractionConfig {
    fn default() -> Self {
        RetractionConfig {
            trials: 100,
            tolerance: 1e-9,
            space: SpaceParams::besov(0.5, 2.0, 2.0).expect("valid default"),
            bound_trials: 20,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct KfuncConfig {
    pub couples: usize,
    /// Largest sequence index `J`; couples have `J + 1 ≤ max_j + 1` entries.
    pub max_j: usize,
    pub times_per_couple: usize,
    /// Golden-section steps per coordinate in the oracle.
    pub oracle_iters: usize,
    /// Relative solver-vs-oracle tolerance.
    pub tolerance: f64,
    pub concavity_tol: f64,
    pub monotonicity_tol: f64,
}

impl Default for KfuncConfig {
    fn default() -> Self {
        KfuncConfig {
            couples: 50,
            max_j: 3,
            times_per_couple: 4,
            oracle_iters: 30,
            tolerance: 1e-4,
            concavity_tol: 1e-8,
            monotonicity_tol: 1e-10,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RealInterpConfig {
    pub theta: f64,
    pub r: f64,
    pub side0: Side,
    pub side1: Side,
    pub trials: usize,
    /// Sequence lengths `J` for the stability study.
    pub levels: Vec<usize>,
    /// Cap on the relative drift of either band end between successive levels.
    pub drift_cap: f64,
    pub besov: Option<BesovInterpConfig>,
}

impl Default for RealInterpConfig {
    fn default() -> Self {
        RealInterpConfig {
            theta: 0.5,
            r: 2.0,
            side0: Side { s: 0.0, q: 2.0 },
            side1: Side { s: 1.0, q: 2.0 },
            trials: 100,
            levels: vec![8, 16, 32],
            drift_cap: 0.2,
            besov: None,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BesovInterpConfig {
    pub functions: usize,
    /// Test functions are white noise projected below this eigenvalue.
    pub cutoff: f64,
    pub p: f64,
    /// Repeat on the refined grid and compare bands.
    pub refinement: bool,
}

impl Default for BesovInterpConfig {
    fn default() -> Self {
        BesovInterpConfig {
            functions: 50,
            cutoff: 4096.0,
            p: 2.0,
            refinement: true,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ComplexInterpConfig {
    pub holder_trials: usize,
    pub holder_tol: f64,
    pub theta: f64,
    pub end0: SpaceParams,
    pub end1: SpaceParams,
    pub functions: usize,
    pub operators: Vec<BuiltinOperator>,
    /// Tolerance for `C = 1` on identity and scalar multipliers.
    pub unit_tol: f64,
}

impl Default for ComplexInterpConfig {
    fn default() -> Self {
        ComplexInterpConfig {
            holder_trials: 1000,
            holder_tol: 1e-12,
            theta: 0.5,
            end0: SpaceParams::besov(0.0, 2.0, 2.0).expect("valid default"),
            end1: SpaceParams::besov(1.0, 2.0, 2.0).expect("valid default"),
            functions: 100,
            operators: vec![
                BuiltinOperator::Identity,
                BuiltinOperator::ScalarMultiplier { value: 0.5 },
                BuiltinOperator::HeatMultiplier { t: 1e-4 },
                BuiltinOperator::Translation { shift: 1 },
                BuiltinOperator::RandomContraction { seed: 7, per_row: 3 },
            ],
            unit_tol: 1e-10,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MaximalConfig {
    pub levels: Vec<usize>,
    pub profiles: Vec<RadialProfile>,
    /// Signed white-noise test functions; a nonnegative one, a ball
    /// indicator and a constant are always added.
    pub noise_functions: usize,
    pub variation_cap: f64,
    pub tolerance: f64,
}

impl Default for MaximalConfig {
    fn default() -> Self {
        MaximalConfig {
            levels: (0..=8).collect(),
            profiles: vec![RadialProfile::BallIndicator, RadialProfile::Exponential],
            noise_functions: 4,
            variation_cap: 2.0,
            tolerance: 1e-12,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct KatoConfig {
    pub radius: f64,
    pub gamma_tol: f64,
    /// Constant-ball reference: value `c` on a ball, compared against
    /// `2πc r²` (three dimensions only).
    pub reference_ball: Option<ReferenceBall>,
    pub reference_tol: f64,
}

impl Default for KatoConfig {
    fn default() -> Self {
        KatoConfig {
            radius: 0.25,
            gamma_tol: 1e-12,
            reference_ball: None,
            reference_tol: 0.1,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReferenceBall {
    pub value: f64,
    pub radius: f64,
}

impl ExperimentConfig {
    /// Reads and parses `path`; parse errors carry line and column.
    pub fn load(path: &Path) -> Result<(Self, String), CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("{}: cannot read config: {e}", path.display())))?;
        let cfg: ExperimentConfig =
            toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        Ok((cfg, text))
    }

    pub fn grid(&self) -> Result<Arc<Grid>, CliError> {
        Grid::new(&self.grid)
            .map(Arc::new)
            .map_err(|e| CliError::Config(format!("grid: {e}")))
    }

    /// The grid with twice the nodes and half the spacing on every axis.
    pub fn refined_grid_spec(&self) -> GridSpec {
        GridSpec {
            dim: self.grid.dim,
            sizes: self.grid.sizes.iter().map(|n| 2 * n).collect(),
            spacing: self.grid.spacing.iter().map(|h| 0.5 * h).collect(),
            boundary: self.grid.boundary,
        }
    }

    /// Range checks for the given suites, before any computation. Messages
    /// are anchored to the line of the offending key when it can be found.
    pub fn validate(&self, suites: &[Suite], text: &str, path: &Path) -> Result<(), CliError> {
        let fail = |table: &str, key: &str, msg: String| {
            let loc = locate(text, table, key)
                .map(|l| format!("{}:{l}", path.display()))
                .unwrap_or_else(|| path.display().to_string());
            let name = if table.is_empty() { key.to_string() } else { format!("{table}.{key}") };
            Err(CliError::Config(format!("{loc}: {name}: {msg}")))
        };
        let grid = match Grid::new(&self.grid) {
            Ok(g) => g,
            Err(e) => return fail("grid", "sizes", e.to_string()),
        };
        let needs_eig = suites.iter().any(|s| s.needs_eig());
        let refine_eig = (suites.contains(&Suite::Decay) && (self.decay.refinement || self.decay.negative_control))
            || (suites.contains(&Suite::Realinterp) && self.realinterp.besov.as_ref().is_some_and(|b| b.refinement));
        let nodes = if refine_eig { grid.len() << grid.dim() } else { grid.len() };
        if needs_eig && nodes > self.operator.dense_cap {
            return fail(
                "grid",
                "sizes",
                format!(
                    "{}{nodes} nodes exceed the dense eigensolver cap of {}",
                    if refine_eig { "the refined grid's " } else { "" },
                    self.operator.dense_cap
                ),
            );
        }
        if !(self.operator.mu > 0.0 && self.operator.mu <= 1.0) {
            return fail("operator", "mu", format!("must lie in (0, 1], got {}", self.operator.mu));
        }
        if self.operator.kind == OperatorKind::MagneticSchrodinger && self.operator.magnetic.len() != grid.dim() {
            return fail(
                "operator",
                "magnetic",
                format!("needs {} components, got {}", grid.dim(), self.operator.magnetic.len()),
            );
        }
        if let Some(j) = self.partition.j_max {
            if j < 2 {
                return fail("partition", "j_max", format!("must be at least 2, got {j}"));
            }
        }
        for suite in suites {
            match suite {
                Suite::Decay => {
                    let d = &self.decay;
                    if !(d.epsilon > 0.0 && d.epsilon.is_finite()) {
                        return fail("decay", "epsilon", format!("must be positive and finite, got {}", d.epsilon));
                    }
                    positive(d.budget).or_else(|m| fail("decay", "budget", m))?;
                    at_least_one(d.uniformity_cap).or_else(|m| fail("decay", "uniformity_cap", m))?;
                    at_least_one(d.refinement_cap).or_else(|m| fail("decay", "refinement_cap", m))?;
                }
                Suite::Heat => {
                    let h = &self.heat;
                    positive(h.c).or_else(|m| fail("heat", "c", m))?;
                    positive(h.t_max).or_else(|m| fail("heat", "t_max", m))?;
                    if let Some(t) = h.t_min {
                        positive(t).or_else(|m| fail("heat", "t_min", m))?;
                        if t > h.t_max {
                            return fail("heat", "t_min", format!("{t} exceeds t_max = {}", h.t_max));
                        }
                    }
                    at_least_one(h.uniformity_cap).or_else(|m| fail("heat", "uniformity_cap", m))?;
                }
                Suite::Partition => {
                    if self.partition_check.k_max > opspace::partition::MAX_DERIVATIVE_ORDER {
                        return fail(
                            "partition_check",
                            "k_max",
                            format!("at most {} is supported", opspace::partition::MAX_DERIVATIVE_ORDER),
                        );
                    }
                    positive(self.partition_check.defect_tol).or_else(|m| fail("partition_check", "defect_tol", m))?;
                }
                Suite::Retraction => {
                    let r = &self.retraction;
                    if r.trials == 0 {
                        return fail("retraction", "trials", "must be positive".into());
                    }
                    positive(r.tolerance).or_else(|m| fail("retraction", "tolerance", m))?;
                    space(&r.space).or_else(|m| fail("retraction", "space", m))?;
                }
                Suite::Kfunc => {
                    let k = &self.kfunc;
                    if k.couples == 0 || k.times_per_couple == 0 {
                        return fail("kfunc", "couples", "couples and times_per_couple must be positive".into());
                    }
                    if k.max_j > 3 {
                        return fail("kfunc", "max_j", format!("the brute-force oracle supports J ≤ 3, got {}", k.max_j));
                    }
                    if k.oracle_iters < 10 {
                        return fail("kfunc", "oracle_iters", format!("need at least 10, got {}", k.oracle_iters));
                    }
                    positive(k.tolerance).or_else(|m| fail("kfunc", "tolerance", m))?;
                }
                Suite::Realinterp => {
                    let r = &self.realinterp;
                    if let Err(e) = ThetaParams::new(r.theta, r.r, r.side0, r.side1)
                        .and_then(|_| Side::new(r.side0.s, r.side0.q))
                        .and_then(|_| Side::new(r.side1.s, r.side1.q))
                    {
                        return fail("realinterp", "theta", e.to_string());
                    }
                    if r.side0.s == r.side1.s {
                        return fail("realinterp", "side1", "the identity needs s₀ ≠ s₁".into());
                    }
                    if r.trials == 0 || r.levels.is_empty() || r.levels.contains(&0) {
                        return fail("realinterp", "levels", "need positive trials and levels".into());
                    }
                    if let Some(b) = &r.besov {
                        positive(b.cutoff).or_else(|m| fail("realinterp.besov", "cutoff", m))?;
                        if !(b.p >= 1.0) {
                            return fail("realinterp.besov", "p", format!("must be at least 1, got {}", b.p));
                        }
                    }
                }
                Suite::Complexinterp => {
                    let c = &self.complexinterp;
                    if !(c.theta > 0.0 && c.theta < 1.0) {
                        return fail("complexinterp", "theta", format!("must lie in (0, 1), got {}", c.theta));
                    }
                    space(&c.end0).or_else(|m| fail("complexinterp", "end0", m))?;
                    space(&c.end1).or_else(|m| fail("complexinterp", "end1", m))?;
                    if c.end0.flavor != c.end1.flavor {
                        return fail("complexinterp", "end1", "endpoint spaces must share a flavour".into());
                    }
                    for op in &c.operators {
                        if let BuiltinOperator::ScalarMultiplier { value } = op {
                            if value.abs() > 1.0 {
                                return fail("complexinterp", "operators", format!("multiplier {value} exceeds 1"));
                            }
                        }
                        if let BuiltinOperator::HeatMultiplier { t } = op {
                            if !(*t >= 0.0) {
                                return fail("complexinterp", "operators", format!("heat time {t} is negative"));
                            }
                        }
                    }
                }
                Suite::Maximal => {
                    let m = &self.maximal;
                    if m.levels.is_empty() || m.profiles.is_empty() {
                        return fail("maximal", "levels", "need at least one level and one profile".into());
                    }
                    for p in &m.profiles {
                        if let Err(e) = p.validate() {
                            return fail("maximal", "profiles", e.to_string());
                        }
                    }
                    at_least_one(m.variation_cap).or_else(|msg| fail("maximal", "variation_cap", msg))?;
                }
                Suite::Kato => {
                    positive(self.kato.radius).or_else(|m| fail("kato", "radius", m))?;
                    if let Some(b) = &self.kato.reference_ball {
                        positive(b.radius).or_else(|m| fail("kato.reference_ball", "radius", m))?;
                        if !(b.value >= 0.0) {
                            return fail("kato.reference_ball", "value", "must be nonnegative".into());
                        }
                    }
                }
            }
        }
        Ok(())
    }

    pub fn boundary(&self) -> Boundary {
        self.grid.boundary
    }
}

fn positive(x: f64) -> Result<(), String> {
    if x > 0.0 && x.is_finite() {
        Ok(())
    } else {
        Err(format!("must be positive and finite, got {x}"))
    }
}

fn at_least_one(x: f64) -> Result<(), String> {
    if x >= 1.0 {
        Ok(())
    } else {
        Err(format!("must be at least 1, got {x}"))
    }
}

fn space(p: &SpaceParams) -> Result<(), String> {
    SpaceParams::new(p.s, p.p, p.q, p.flavor).map(|_| ()).map_err(|e| e.to_string())
}

/// 1-based line of `key = …` inside `[table]` (or at top level for an
/// empty table name).
fn locate(text: &str, table: &str, key: &str) -> Option<usize> {
    let mut current = String::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if let Some(rest) = line.strip_prefix('[') {
            current = rest.trim_start_matches('[').trim_end_matches(']').trim().to_string();
            continue;
        }
        if current == table {
            if let Some((k, _)) = line.split_once('=') {
                if k.trim() == key {
                    return Some(i + 1);
                }
            }
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn locate_finds_key_in_table() {
        let text = "seed = 1\n[grid]\ndim = 1\n[decay]\nepsilon = -1\n";
        assert_eq!(locate(text, "decay", "epsilon"), Some(5));
        assert_eq!(locate(text, "", "seed"), Some(1));
        assert_eq!(locate(text, "heat", "c"), None);
    }

    #[test]
    fn defaults_fill_missing_tables() {
        let cfg: ExperimentConfig = toml::from_str(
            "[grid]\ndim = 1\nsizes = [64]\nspacing = [0.015625]\nboundary = \"periodic\"\n",
        )
        .unwrap();
        assert_eq!(cfg.seed, 42);
        assert_eq!(cfg.decay.epsilon, 1.0);
        assert_eq!(cfg.complexinterp.operators.len(), 5);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let r: Result<ExperimentConfig, _> = toml::from_str(
            "[grid]\ndim = 1\nsizes = [64]\nspacing = [0.1]\nboundary = \"periodic\"\nbogus = 3\n",
        );
        assert!(r.is_err());
    }

    #[test]
    fn unknown_keys_inside_presets_are_rejected() {
        let r: Result<ExperimentConfig, _> = toml::from_str(
            "[grid]\ndim = 1\nsizes = [64]\nspacing = [0.1]\nboundary = \"periodic\"\n\
             [operator.potential]\npreset = \"quadratic\"\nscale = 1.0\nscael = 2.0\n",
        );
        assert!(r.is_err());
    }
}
