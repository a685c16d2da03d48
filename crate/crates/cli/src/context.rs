//! Lazily built operator, decompositions and dyadic systems shared by suites.

use std::sync::Arc;

use opspace::cache::EigCache;
use opspace::calculus::{eig_with_cap, SpectralDecomposition};
use opspace::operators::{self, CoefficientField, PotentialSpec};
use opspace::partition::j_max_for;
use opspace::{DyadicSystem, Grid, OperatorKind, SelfAdjointOperator, TransitionProfile};

use crate::config::ExperimentConfig;
use crate::CliError;

pub struct Context<'a> {
    pub cfg: &'a ExperimentConfig,
    pub seed: u64,
    cache: Option<EigCache>,
    grid: Arc<Grid>,
    op: Option<Arc<SelfAdjointOperator>>,
    dec: Option<Arc<SpectralDecomposition>>,
    refined: Option<(Arc<SelfAdjointOperator>, Arc<SpectralDecomposition>)>,
}

impl<'a> Context<'a> {
    pub fn new(cfg: &'a ExperimentConfig, seed: u64) -> Result<Self, CliError> {
        let cache = cfg
            .cache
            .enabled
            .then(|| EigCache::from_env_or(cfg.cache.dir.clone()));
        Ok(Context {
            cfg,
            seed,
            cache,
            grid: cfg.grid()?,
            op: None,
            dec: None,
            refined: None,
        })
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn cache(&self) -> Option<&EigCache> {
        self.cache.as_ref()
    }

    pub fn operator(&mut self) -> Result<Arc<SelfAdjointOperator>, CliError> {
        if self.op.is_none() {
            self.op = Some(Arc::new(build_operator(self.cfg, self.grid.clone())?));
        }
        Ok(self.op.clone().expect("just built"))
    }

    pub fn decomposition(&mut self) -> Result<Arc<SpectralDecomposition>, CliError> {
        if self.dec.is_none() {
            let op = self.operator()?;
            self.dec = Some(Arc::new(self.eig(&op)?));
        }
        Ok(self.dec.clone().expect("just built"))
    }

    /// Operator and decomposition on the grid with doubled resolution.
    pub fn refined(&mut self) -> Result<(Arc<SelfAdjointOperator>, Arc<SpectralDecomposition>), CliError> {
        if self.refined.is_none() {
            let spec = self.cfg.refined_grid_spec();
            let grid = Arc::new(Grid::new(&spec).map_err(|e| CliError::Config(format!("refined grid: {e}")))?);
            let op = build_operator(self.cfg, grid)?;
            let dec = self.eig(&op)?;
            self.refined = Some((Arc::new(op), Arc::new(dec)));
        }
        Ok(self.refined.clone().expect("just built"))
    }

    pub fn eig(&self, op: &SelfAdjointOperator) -> Result<SpectralDecomposition, CliError> {
        let cap = self.cfg.operator.dense_cap;
        if op.len() > cap {
            return Err(CliError::Config(format!(
                "grid of {} nodes exceeds the dense eigensolver cap of {cap}",
                op.len()
            )));
        }
        let dec = match &self.cache {
            Some(c) => match c.load(op.fingerprint(), op.grid().clone()) {
                Ok(Some(d)) => d,
                _ => {
                    let d = eig_with_cap(op, cap)?;
                    // a failed cache write only costs a recomputation later
                    let _ = c.store(&d);
                    d
                }
            },
            None => eig_with_cap(op, cap)?,
        };
        Ok(dec)
    }

    /// The configured dyadic system with the given profile, covering the
    /// Gershgorin bound of `op` unless `j_max` is fixed.
    pub fn system(&self, op: &SelfAdjointOperator, profile: TransitionProfile) -> Result<DyadicSystem, CliError> {
        let j = match self.cfg.partition.j_max {
            Some(j) if op.grid().len() == self.grid.len() => j,
            _ => j_max_for(op.spectral_bounds().1.max(0.0)),
        };
        Ok(DyadicSystem::new(j, profile)?)
    }
}

/// Builds the configured operator on `grid`.
pub fn build_operator(cfg: &ExperimentConfig, grid: Arc<Grid>) -> Result<SelfAdjointOperator, CliError> {
    let o = &cfg.operator;
    let config = |e: opspace::Error| CliError::Config(format!("operator: {e}"));
    let potential = || -> Result<PotentialSpec, CliError> {
        PotentialSpec::new(
            o.potential.grid_function(grid.clone()).map_err(config)?,
            o.negative_potential.grid_function(grid.clone()).map_err(config)?,
        )
        .map_err(config)
    };
    match o.kind {
        OperatorKind::Laplacian => operators::laplacian(grid.clone()).map_err(config),
        OperatorKind::Schrodinger => operators::schrodinger(grid.clone(), &potential()?).map_err(config),
        OperatorKind::MagneticSchrodinger => {
            let a = o
                .magnetic
                .iter()
                .map(|p| p.grid_function(grid.clone()))
                .collect::<opspace::Result<Vec<_>>>()
                .map_err(config)?;
            operators::magnetic_schrodinger(grid.clone(), &potential()?.with_magnetic(a)).map_err(config)
        }
        OperatorKind::Elliptic => {
            let a = o.coefficient.evaluate(&grid);
            let field = CoefficientField::isotropic(grid.dim(), &a);
            operators::elliptic(grid.clone(), &field, o.mu).map_err(config)
        }
    }
}
