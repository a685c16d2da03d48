//! Suite runners. Each returns a JSON result, a pass flag and CSV tables.

use opspace::bounds::{self, RadialProfile};
use opspace::interp::{self, oracle, BuiltinOperator, SequenceCouple, Side, ThetaParams};
use opspace::operators::{self, FieldPreset};
use opspace::partition::{self, WindowFamily};
use opspace::spaces::{self, project_below};
use opspace::{Boundary, GridFunction, OperatorKind, PartitionPair, TransitionProfile};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::Suite;
use crate::context::Context;
use crate::report::{Cell, Table};
use crate::CliError;

/// What a suite hands back to the report.
#[derive(Clone, Debug, Serialize)]
pub struct SuiteOutcome {
    pub suite: Suite,
    pub pass: bool,
    pub seed: u64,
    pub operator_fingerprint: Option<String>,
    pub notes: Vec<String>,
    pub error: Option<String>,
    pub result: Value,
    #[serde(skip)]
    pub tables: Vec<Table>,
}

struct Draft {
    pass: bool,
    fingerprint: Option<u64>,
    notes: Vec<String>,
    result: Value,
    tables: Vec<Table>,
}

impl Draft {
    fn new(pass: bool, result: Value) -> Self {
        Draft {
            pass,
            fingerprint: None,
            notes: Vec::new(),
            result,
            tables: Vec::new(),
        }
    }

    fn fingerprint(mut self, fp: u64) -> Self {
        self.fingerprint = Some(fp);
        self
    }
}

pub fn fingerprint_hex(fp: u64) -> String {
    format!("{fp:016x}")
}

/// Runs one suite. Configuration errors propagate; numerical failures are
/// recorded in the outcome.
pub fn run(suite: Suite, ctx: &mut Context) -> Result<SuiteOutcome, CliError> {
    let draft = match suite {
        Suite::Partition => partition_suite(ctx),
        Suite::Decay => decay_suite(ctx),
        Suite::Heat => heat_suite(ctx),
        Suite::Retraction => retraction_suite(ctx),
        Suite::Kfunc => kfunc_suite(ctx),
        Suite::Realinterp => realinterp_suite(ctx),
        Suite::Complexinterp => complexinterp_suite(ctx),
        Suite::Maximal => maximal_suite(ctx),
        Suite::Kato => kato_suite(ctx),
    };
    match draft {
        Ok(d) => Ok(SuiteOutcome {
            suite,
            pass: d.pass,
            seed: ctx.seed,
            operator_fingerprint: d.fingerprint.map(fingerprint_hex),
            notes: d.notes,
            error: None,
            result: d.result,
            tables: d.tables,
        }),
        Err(CliError::Config(m)) => Err(CliError::Config(m)),
        Err(e) => Ok(SuiteOutcome {
            suite,
            pass: false,
            seed: ctx.seed,
            operator_fingerprint: None,
            notes: Vec::new(),
            error: Some(e.to_string()),
            result: Value::Null,
            tables: Vec::new(),
        }),
    }
}

fn to_value<T: Serialize>(x: &T) -> Value {
    serde_json::to_value(x).expect("report types serialize")
}

fn trial_seeds(seed: u64, n: usize) -> Vec<u64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| rng.random()).collect()
}

fn noise(ctx: &Context, seed: u64, low: f64) -> Result<GridFunction, CliError> {
    Ok(FieldPreset::Random { seed, low, high: 1.0 }.grid_function(ctx.grid().clone())?)
}

fn partition_suite(ctx: &mut Context) -> Result<Draft, CliError> {
    let op = ctx.operator()?;
    let sys = ctx.system(&op, ctx.cfg.partition.profile)?;
    let pc = &ctx.cfg.partition_check;
    let rep = partition::verify_conditions(&sys, pc.k_max);
    let pass = rep.pass && rep.partition_defect <= pc.defect_tol;
    let mut table = Table::new("derivatives", &["k", "j", "scaled_sup"]);
    for (k, row) in rep.scaled_derivatives.iter().enumerate() {
        for (j, v) in row.iter().enumerate() {
            table.push(vec![Cell::Int(k as u64), Cell::Int(j as u64), Cell::Float(*v)]);
        }
    }
    let mut d = Draft::new(
        pass,
        json!({
            "j_max": sys.j_max(),
            "profile": sys.profile(),
            "covered_range": sys.covered_range(),
            "defect_tol": pc.defect_tol,
            "conditions": to_value(&rep),
        }),
    )
    .fingerprint(op.fingerprint());
    d.tables.push(table);
    Ok(d)
}

fn decay_suite(ctx: &mut Context) -> Result<Draft, CliError> {
    let cfg = ctx.cfg.decay.clone();
    let op = ctx.operator()?;
    let dec = ctx.decomposition()?;
    let profile = ctx.cfg.partition.profile;
    let sys = ctx.system(&op, profile)?;
    let rep = bounds::decay_suite(&dec, &sys, cfg.epsilon, cfg.budget, cfg.uniformity_cap)?;
    let mut pass = rep.pass;
    let mut result = json!({ "coarse": to_value(&rep) });
    let mut tables = vec![decay_table("constants", &rep)];
    let mut notes = Vec::new();
    if cfg.refinement || cfg.negative_control {
        let (fop, fdec) = ctx.refined()?;
        if cfg.refinement {
            let fsys = ctx.system(&fop, profile)?;
            let fine = bounds::decay_suite(&fdec, &fsys, cfg.epsilon, cfg.budget, cfg.uniformity_cap)?;
            let check = bounds::refinement_check(&rep, &fine, cfg.refinement_cap);
            pass &= fine.pass && check.pass;
            tables.push(decay_table("constants_refined", &fine));
            result["refined"] = to_value(&fine);
            result["refinement"] = to_value(&check);
        }
        if cfg.negative_control {
            let sharp = TransitionProfile::Sharp;
            let c = bounds::decay_suite(&dec, &ctx.system(&op, sharp)?, cfg.epsilon, f64::INFINITY, f64::INFINITY)?;
            let f = bounds::decay_suite(&fdec, &ctx.system(&fop, sharp)?, cfg.epsilon, f64::INFINITY, f64::INFINITY)?;
            let check = bounds::refinement_check(&c, &f, cfg.refinement_cap);
            if check.pass {
                notes.push("indicator windows passed the refinement check".into());
            }
            pass &= !check.pass;
            result["negative_control"] = json!({
                "coarse_sup": c.sup,
                "fine_sup": f.sup,
                "refinement": to_value(&check),
                "rejected": !check.pass,
            });
        }
    }
    let mut d = Draft::new(pass, result).fingerprint(op.fingerprint());
    d.tables = tables;
    d.notes = notes;
    Ok(d)
}

fn decay_table(name: &str, rep: &bounds::DecayReport) -> Table {
    let mut t = Table::new(
        name,
        &["j", "x", "y", "kernel_value", "majorant_value", "ratio", "window_peak", "active"],
    );
    for e in &rep.entries {
        t.push(vec![
            Cell::Int(e.j as u64),
            Cell::Int(e.x as u64),
            Cell::Int(e.y as u64),
            Cell::Float(e.kernel_value),
            Cell::Float(e.majorant_value),
            Cell::Float(e.constant),
            Cell::Float(e.window_peak),
            Cell::Int(e.active as u64),
        ]);
    }
    t
}

/// Dyadic times `2^k` in `[t_min, t_max]`.
fn dyadic_times(t_min: f64, t_max: f64) -> Vec<f64> {
    let lo = (t_min.log2() - 1e-9).ceil() as i32;
    let hi = (t_max.log2() + 1e-9).floor() as i32;
    (lo..=hi).map(|k| 2f64.powi(k)).collect()
}

fn heat_suite(ctx: &mut Context) -> Result<Draft, CliError> {
    let cfg = ctx.cfg.heat.clone();
    let op = ctx.operator()?;
    let dec = ctx.decomposition()?;
    let h = ctx.grid().min_spacing();
    let times = dyadic_times(cfg.t_min.unwrap_or(4.0 * h * h), cfg.t_max);
    if times.is_empty() {
        return Err(CliError::Config("heat: no dyadic time lies in [t_min, t_max]".into()));
    }
    let fit = bounds::heat_bound_fit(&dec, &times, cfg.c)?;
    let mut pass = fit.uniformity <= cfg.uniformity_cap;
    let mut result = json!({ "times": times, "fit": to_value(&fit), "uniformity_cap": cfg.uniformity_cap });
    let mut table = Table::new("per_time", &["t", "constant", "free_constant"]);
    let mut notes = Vec::new();
    let nonneg = ctx.cfg.operator.negative_potential.evaluate(ctx.grid()).iter().all(|v| *v == 0.0);
    let free = if op.kind() == OperatorKind::Schrodinger && nonneg {
        let lap = operators::laplacian(ctx.grid().clone())?;
        let fdec = ctx.eig(&lap)?;
        Some(bounds::heat_bound_fit(&fdec, &times, cfg.c)?)
    } else {
        notes.push("domination check needs a Schrödinger operator with V₋ = 0".into());
        None
    };
    if let Some(free) = &free {
        let worst = fit
            .per_t
            .iter()
            .zip(&free.per_t)
            .map(|(v, f)| v.constant - f.constant)
            .fold(f64::NEG_INFINITY, f64::max);
        let dominated = worst <= cfg.domination_tol;
        pass &= dominated;
        result["free_fit"] = to_value(free);
        result["domination"] = json!({ "max_excess": worst, "tolerance": cfg.domination_tol, "pass": dominated });
    }
    for (i, p) in fit.per_t.iter().enumerate() {
        let fc = free.as_ref().map_or(f64::NAN, |f| f.per_t[i].constant);
        table.push(vec![Cell::Float(p.t), Cell::Float(p.constant), Cell::Float(fc)]);
    }
    let mut d = Draft::new(pass, result).fingerprint(op.fingerprint());
    d.tables.push(table);
    d.notes = notes;
    Ok(d)
}

fn retraction_suite(ctx: &mut Context) -> Result<Draft, CliError> {
    let cfg = ctx.cfg.retraction.clone();
    let op = ctx.operator()?;
    let dec = ctx.decomposition()?;
    let pair = PartitionPair::new(ctx.system(&op, ctx.cfg.partition.profile)?)?;
    let mut table = Table::new("trials", &["trial", "seed", "relative_error"]);
    let mut worst = 0.0f64;
    for (i, s) in trial_seeds(ctx.seed, cfg.trials).into_iter().enumerate() {
        let f = noise(ctx, s, -1.0)?;
        let back = spaces::r_op(&spaces::s_op(&f, &dec, pair.phi()), &dec, &pair)?;
        let err = back.sub(&f).lp_norm(2.0)? / f.lp_norm(2.0)?;
        worst = worst.max(err);
        table.push(vec![Cell::Int(i as u64), Cell::Int(s), Cell::Float(err)]);
    }
    let bound = spaces::retraction_bound(&dec, &pair, &cfg.space, cfg.bound_trials, ctx.seed)?;
    let pass = worst <= cfg.tolerance && bound.max_ratio.is_finite();
    let mut d = Draft::new(
        pass,
        json!({
            "j_max": pair.phi().j_max(),
            "max_relative_error": worst,
            "tolerance": cfg.tolerance,
            "bound": to_value(&bound),
            "space": to_value(&cfg.space),
        }),
    )
    .fingerprint(op.fingerprint());
    d.tables.push(table);
    Ok(d)
}

const EXPONENTS: [f64; 5] = [1.0, 1.5, 2.0, 3.0, f64::INFINITY];

/// Seeded couples with `J ≤ max_j` for the oracle comparison.
pub fn oracle_couples(seed: u64, count: usize, max_j: usize) -> Vec<SequenceCouple> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let len = rng.random_range(1..=max_j + 1);
            let values: Vec<f64> = (0..len)
                .map(|_| if rng.random_bool(0.1) { 0.0 } else { rng.random_range(-2.0..2.0) })
                .collect();
            let s0 = rng.random_range(-1.0..1.0);
            let s1 = s0 + rng.random_range(0.25..2.0) * if rng.random_bool(0.5) { 1.0 } else { -1.0 };
            let q0 = EXPONENTS[rng.random_range(0..EXPONENTS.len())];
            let q1 = EXPONENTS[rng.random_range(0..EXPONENTS.len())];
            SequenceCouple::new(values, Side { s: s0, q: q0 }, Side { s: s1, q: q1 }).expect("valid sides")
        })
        .collect()
}

/// Largest violations of concavity and monotonicity along a K profile,
/// relative to `‖a‖₀`.
pub fn profile_defects(p: &interp::KProfile) -> (f64, f64) {
    let scale = p.norm0.max(f64::MIN_POSITIVE);
    let mut concave = 0.0f64;
    let mut monotone = 0.0f64;
    for i in 1..p.t.len() {
        monotone = monotone.max((p.k[i - 1] - p.k[i]) / scale);
        if i + 1 < p.t.len() {
            let lam = (p.t[i + 1] - p.t[i]) / (p.t[i + 1] - p.t[i - 1]);
            let chord = lam * p.k[i - 1] + (1.0 - lam) * p.k[i + 1];
            concave = concave.max((chord - p.k[i]) / scale);
        }
    }
    (concave, monotone)
}

fn kfunc_suite(ctx: &mut Context) -> Result<Draft, CliError> {
    let cfg = ctx.cfg.kfunc.clone();
    let couples = oracle_couples(ctx.seed, cfg.couples, cfg.max_j);
    let mut rng = ChaCha8Rng::seed_from_u64(ctx.seed ^ 0x5eed);
    let mut table = Table::new("oracle", &["couple", "t", "solver", "oracle", "deviation"]);
    let mut worst = 0.0f64;
    let mut above_min = 0.0f64;
    let mut concave = 0.0f64;
    let mut monotone = 0.0f64;
    let mut cases = 0;
    let mut zero = 0;
    for (i, c) in couples.iter().enumerate() {
        if c.is_zero() {
            zero += 1;
            continue;
        }
        let pivot = c.norm0() / c.norm1();
        for _ in 0..cfg.times_per_couple {
            let t = pivot * rng.random_range(-6.0f64..6.0).exp2();
            let k = interp::k_functional(t, c)?.value;
            let o = oracle::brute_force_k(t, c, cfg.oracle_iters);
            let dev = (k - o).abs() / o;
            worst = worst.max(dev);
            above_min = above_min.max((k - c.norm0().min(t * c.norm1())) / c.norm0());
            cases += 1;
            table.push(vec![
                Cell::Int(i as u64),
                Cell::Float(t),
                Cell::Float(k),
                Cell::Float(o),
                Cell::Float(dev),
            ]);
        }
        let (cv, mn) = profile_defects(&interp::k_profile(c)?);
        concave = concave.max(cv);
        monotone = monotone.max(mn);
    }
    let pass = worst <= cfg.tolerance
        && concave <= cfg.concavity_tol
        && monotone <= cfg.monotonicity_tol
        && above_min <= cfg.monotonicity_tol;
    let mut d = Draft::new(
        pass,
        json!({
            "couples": cfg.couples,
            "zero_couples": zero,
            "cases": cases,
            "max_oracle_deviation": worst,
            "tolerance": cfg.tolerance,
            "oracle_iters": cfg.oracle_iters,
            "max_concavity_defect": concave,
            "max_monotonicity_defect": monotone,
            "max_excess_over_min_bound": above_min,
        }),
    );
    d.tables.push(table);
    Ok(d)
}

fn realinterp_suite(ctx: &mut Context) -> Result<Draft, CliError> {
    let cfg = ctx.cfg.realinterp.clone();
    let prm = ThetaParams::new(cfg.theta, cfg.r, cfg.side0, cfg.side1)?;
    let mut reports = Vec::new();
    let mut tables = Vec::new();
    for &j in &cfg.levels {
        let rep = interp::verify_sequence_identity(cfg.trials, j, &prm, ctx.seed)?;
        let mut t = Table::new(&format!("sequence_j{j}"), &["trial", "seed", "norm0", "norm1", "norm_mid", "ratio"]);
        for tr in &rep.trials {
            t.push(vec![
                Cell::Int(tr.trial as u64),
                Cell::Int(tr.seed),
                Cell::Float(tr.norm0),
                Cell::Float(tr.norm1),
                Cell::Float(tr.norm_mid),
                Cell::Float(tr.ratio),
            ]);
        }
        tables.push(t);
        reports.push(rep);
    }
    let drifts: Vec<f64> = reports.windows(2).map(|w| w[1].band.drift(&w[0].band)).collect();
    let bands_ok = reports
        .iter()
        .all(|r| r.band.samples > 0 && r.band.min > 0.0 && r.band.max.is_finite());
    let single_ok = reports.iter().all(|r| {
        let s = r.single_coordinate;
        (s.measured / s.closed_form - 1.0).abs() <= 1e-6
    });
    let mut pass = bands_ok && single_ok && drifts.iter().all(|d| *d <= cfg.drift_cap);
    let summaries: Vec<Value> = reports
        .iter()
        .map(|r| json!({ "j": r.j, "band": to_value(&r.band), "single_coordinate": to_value(&r.single_coordinate) }))
        .collect();
    let mut result = json!({
        "theta_params": to_value(&prm),
        "sequence": summaries,
        "drifts": drifts,
        "drift_cap": cfg.drift_cap,
    });
    let mut fingerprint = None;
    if let Some(b) = &cfg.besov {
        let op = ctx.operator()?;
        let dec = ctx.decomposition()?;
        let seeds = trial_seeds(ctx.seed, b.functions);
        let fs = seeds
            .iter()
            .map(|&s| Ok(project_below(&noise(ctx, s, -1.0)?, &dec, b.cutoff)))
            .collect::<Result<Vec<_>, CliError>>()?;
        let rep = interp::verify_besov_real_interp(&fs, &dec, &ctx.system(&op, ctx.cfg.partition.profile)?, b.p, &prm)?;
        pass &= rep.band.samples > 0;
        result["besov"] = json!({ "band": to_value(&rep.band), "cutoff": b.cutoff, "p": b.p });
        if b.refinement {
            let (fop, fdec) = ctx.refined()?;
            let fgrid = fdec.grid().clone();
            let ffs = seeds
                .iter()
                .map(|&s| {
                    let u = FieldPreset::Random { seed: s, low: -1.0, high: 1.0 }.grid_function(fgrid.clone())?;
                    Ok(project_below(&u, &fdec, b.cutoff))
                })
                .collect::<Result<Vec<_>, CliError>>()?;
            let fine = interp::verify_besov_real_interp(&ffs, &fdec, &ctx.system(&fop, ctx.cfg.partition.profile)?, b.p, &prm)?;
            let drift = fine.band.drift(&rep.band);
            pass &= fine.band.samples > 0 && drift <= cfg.drift_cap;
            result["besov"]["refined_band"] = to_value(&fine.band);
            result["besov"]["refinement_drift"] = json!(drift);
        }
        fingerprint = Some(op.fingerprint());
    }
    let mut d = Draft::new(pass, result);
    d.fingerprint = fingerprint;
    d.tables = tables;
    Ok(d)
}

fn complexinterp_suite(ctx: &mut Context) -> Result<Draft, CliError> {
    let cfg = ctx.cfg.complexinterp.clone();
    let holder = interp::holder_backbone(cfg.holder_trials, ctx.seed);
    let holder_ok = holder.max_constant <= 1.0 + cfg.holder_tol;
    let op = ctx.operator()?;
    let dec = ctx.decomposition()?;
    let sys = ctx.system(&op, ctx.cfg.partition.profile)?;
    let fs = trial_seeds(ctx.seed, cfg.functions)
        .into_iter()
        .map(|s| noise(ctx, s, -1.0))
        .collect::<Result<Vec<_>, CliError>>()?;
    let space = interp::space_log_convexity(&fs, &dec, &sys, &cfg.end0, &cfg.end1, cfg.theta)?;
    let scaled: Vec<GridFunction> = fs.iter().map(|f| f.scale(3.75)).collect();
    let space_scaled = interp::space_log_convexity(&scaled, &dec, &sys, &cfg.end0, &cfg.end1, cfg.theta)?;
    let homogeneity_defect = (space_scaled.max_constant / space.max_constant - 1.0)
        .abs()
        .max((space_scaled.min_constant / space.min_constant - 1.0).abs());
    let mut pass = holder_ok && space.max_constant.is_finite();
    let mut notes = Vec::new();
    let mut ops = Vec::new();
    let mut table = Table::new("operators", &["operator", "m0", "m1", "m_mid", "constant"]);
    for t in &cfg.operators {
        if matches!(t, BuiltinOperator::Translation { .. }) && ctx.cfg.boundary() != Boundary::Periodic {
            notes.push("translation skipped on a non-periodic grid".into());
            continue;
        }
        let rep = interp::operator_interp_check(t, &fs, &dec, &sys, &cfg.end0, &cfg.end1, cfg.theta)?;
        let unit = matches!(t, BuiltinOperator::Identity | BuiltinOperator::ScalarMultiplier { .. });
        if unit {
            pass &= (rep.constant - 1.0).abs() <= cfg.unit_tol;
        }
        pass &= rep.constant.is_finite();
        table.push(vec![
            Cell::Text(serde_json::to_string(t).expect("operator serializes")),
            Cell::Float(rep.m0),
            Cell::Float(rep.m1),
            Cell::Float(rep.m_mid),
            Cell::Float(rep.constant),
        ]);
        ops.push(to_value(&rep));
    }
    let mut d = Draft::new(
        pass,
        json!({
            "holder": to_value(&holder),
            "holder_tol": cfg.holder_tol,
            "space": to_value(&space),
            "homogeneity_defect": homogeneity_defect,
            "operators": ops,
            "unit_tol": cfg.unit_tol,
        }),
    )
    .fingerprint(op.fingerprint());
    d.tables.push(table);
    d.notes = notes;
    Ok(d)
}

/// Signed noise, nonnegative noise, a ball indicator and a constant.
pub fn maximal_test_set(grid: &std::sync::Arc<opspace::Grid>, seed: u64, noise: usize) -> opspace::Result<Vec<GridFunction>> {
    let mut fs = trial_seeds(seed, noise + 1)
        .into_iter()
        .enumerate()
        .map(|(i, s)| {
            let low = if i == noise { 0.0 } else { -1.0 };
            FieldPreset::Random { seed: s, low, high: 1.0 }.grid_function(grid.clone())
        })
        .collect::<opspace::Result<Vec<_>>>()?;
    let radius = 0.25 * (0..grid.dim()).map(|a| grid.extent(a)).fold(f64::INFINITY, f64::min);
    fs.push(FieldPreset::Ball { value: 1.0, radius, center: None }.grid_function(grid.clone())?);
    fs.push(GridFunction::constant(grid.clone(), 1.0));
    Ok(fs)
}

fn maximal_suite(ctx: &mut Context) -> Result<Draft, CliError> {
    let cfg = ctx.cfg.maximal.clone();
    let grid = ctx.grid().clone();
    let fs = maximal_test_set(&grid, ctx.seed, cfg.noise_functions)?;
    let ba = bounds::BallAverager::new(grid);
    let ms: Vec<Vec<f64>> = fs.iter().map(|f| ba.maximal(f)).collect();
    let mut below = 0.0f64;
    let mut sublinear = 0.0f64;
    let mut homogeneous = 0.0f64;
    for (f, mf) in fs.iter().zip(&ms) {
        for (m, v) in mf.iter().zip(f.values()) {
            below = below.max(v.norm() - m);
        }
        let scaled = ba.maximal(&f.scale(-2.5));
        for (a, b) in scaled.iter().zip(mf) {
            homogeneous = homogeneous.max((a - 2.5 * b).abs());
        }
    }
    for i in 0..fs.len() {
        let k = (i + 1) % fs.len();
        let sum = ba.maximal(&fs[i].add(&fs[k]));
        for (x, s) in sum.iter().enumerate() {
            sublinear = sublinear.max(s - ms[i][x] - ms[k][x]);
        }
    }
    let mut pass = below <= cfg.tolerance && sublinear <= cfg.tolerance && homogeneous <= cfg.tolerance;
    let mut table = Table::new("constants", &["profile", "j", "constant"]);
    let mut reports = Vec::new();
    for p in &cfg.profiles {
        let rep = bounds::maximal_lemma_check(p, &cfg.levels, &fs)?;
        pass &= rep.variation <= cfg.variation_cap;
        let name = profile_name(p);
        for (j, c) in &rep.per_j {
            table.push(vec![Cell::Text(name.clone()), Cell::Int(*j as u64), Cell::Float(*c)]);
        }
        reports.push(json!({ "profile": to_value(p), "report": to_value(&rep) }));
    }
    let mut d = Draft::new(
        pass,
        json!({
            "functions": fs.len(),
            "max_deficit_below_abs": below,
            "max_sublinearity_excess": sublinear,
            "max_homogeneity_defect": homogeneous,
            "tolerance": cfg.tolerance,
            "variation_cap": cfg.variation_cap,
            "profiles": reports,
        }),
    );
    d.tables.push(table);
    Ok(d)
}

fn profile_name(p: &RadialProfile) -> String {
    match p {
        RadialProfile::BallIndicator => "ball_indicator".into(),
        RadialProfile::Exponential => "exponential".into(),
        RadialProfile::Gaussian => "gaussian".into(),
        RadialProfile::Tabulated { .. } => "tabulated".into(),
    }
}

fn kato_suite(ctx: &mut Context) -> Result<Draft, CliError> {
    let cfg = ctx.cfg.kato.clone();
    let pi = std::f64::consts::PI;
    let g3 = operators::gamma_n(3)?;
    let g4 = operators::gamma_n(4)?;
    let gamma_dev = ((g3 - pi) / pi).abs().max(((g4 - pi * pi) / (pi * pi)).abs());
    let mut pass = gamma_dev <= cfg.gamma_tol;
    let mut result = json!({ "gamma_3": g3, "gamma_4": g4, "gamma_relative_deviation": gamma_dev, "radius": cfg.radius });
    let mut notes = Vec::new();
    let grid = ctx.grid().clone();
    if grid.dim() >= 3 {
        let gamma = operators::gamma_n(grid.dim() as u32)?;
        let vm = ctx.cfg.operator.negative_potential.grid_function(grid.clone())?;
        let vp = ctx.cfg.operator.potential.grid_function(grid.clone())?;
        let km = operators::kato_norm(&vm, cfg.radius)?;
        result["negative_part"] = json!({ "kato_norm": km, "gamma_n": gamma, "below_threshold": km < gamma });
        result["positive_part"] = json!({ "kato_norm": operators::kato_norm(&vp, cfg.radius)? });
        if let Some(b) = &cfg.reference_ball {
            if grid.dim() == 3 {
                let v = FieldPreset::Ball { value: b.value, radius: b.radius, center: None }.grid_function(grid.clone())?;
                let k = operators::kato_norm(&v, cfg.radius)?;
                let reference = 2.0 * pi * b.value * cfg.radius * cfg.radius;
                let ratio = k / reference;
                pass &= (ratio - 1.0).abs() <= cfg.reference_tol;
                result["reference_ball"] = json!({
                    "kato_norm": k,
                    "reference": reference,
                    "ratio": ratio,
                    "tolerance": cfg.reference_tol,
                });
            } else {
                notes.push("the constant-ball reference is three-dimensional".into());
            }
        }
    } else {
        notes.push("the Kato functional needs a grid of dimension at least 3".into());
    }
    let mut d = Draft::new(pass, result);
    d.notes = notes;
    Ok(d)
}
