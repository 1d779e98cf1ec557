//! Event-loop samplers and the registry that selects them by name.
//!
//! Every sampler implements [`Sampler`]; [`SamplerRegistry::with_defaults`] holds the
//! four built-in strategies (`bhs`, `qbhs`, `cbhs`, `gibbs`).

mod bhs;
mod cbhs;
mod engine;
mod gibbs;
mod qbhs;
mod skeleton;

use std::collections::BTreeMap;

pub use bhs::run_bhs;
pub use cbhs::run_cbhs;
pub use gibbs::{run_gibbs_truncated_mvn, sample_truncated_normal};
pub use qbhs::run_qbhs;
pub use skeleton::{EventKind, EventRecord, Skeleton};

use crate::error::{Error, Result};
use crate::kernels::BounceKernelSpec;
use crate::model::{ConstraintSet, GuideField, Matrix, State, TargetModel, Vector};

#[derive(Debug, Clone)]
pub struct SamplerConfig {
    /// Refreshment rate `λ₀`.
    pub lambda0: f64,
    pub t_total: f64,
    /// Discretization step used when turning a skeleton into samples.
    pub delta: f64,
    pub seed: u64,
    pub bounce_kernel: BounceKernelSpec,
    pub guide: GuideField,
    /// Constant extra rates `γᵢ` for the coordinate sampler; empty means all zero.
    pub cbhs_gamma: Vec<f64>,
    /// Number of sweeps for discrete-time samplers (Gibbs).
    pub n_draws: usize,
}

impl SamplerConfig {
    pub fn new(guide: GuideField) -> Self {
        Self {
            lambda0: 1.0,
            t_total: 1000.0,
            delta: 0.1,
            seed: 0,
            bounce_kernel: BounceKernelSpec::default(),
            guide,
            cbhs_gamma: Vec::new(),
            n_draws: 0,
        }
    }

    /// `g = 0`: randomized Hamiltonian Monte Carlo.
    pub fn rhmc() -> Self {
        Self::new(GuideField::Zero)
    }

    /// `g = ∇U`: bouncy particle sampler.
    pub fn bps() -> Self {
        Self::new(GuideField::GradU)
    }

    pub fn with_time(mut self, t_total: f64, delta: f64) -> Self {
        self.t_total = t_total;
        self.delta = delta;
        self
    }

    pub fn with_lambda0(mut self, lambda0: f64) -> Self {
        self.lambda0 = lambda0;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.t_total > 0.0 && self.t_total.is_finite()) {
            return Err(invalid("t_total", format!("must be positive and finite, got {}", self.t_total)));
        }
        if !(self.delta > 0.0 && self.delta.is_finite()) {
            return Err(invalid("delta", format!("must be positive, got {}", self.delta)));
        }
        if !(self.lambda0 >= 0.0 && self.lambda0.is_finite()) {
            return Err(invalid("lambda0", format!("must be non-negative, got {}", self.lambda0)));
        }
        if let Some(g) = self.cbhs_gamma.iter().find(|g| !(**g >= 0.0 && g.is_finite())) {
            return Err(invalid("cbhs_gamma", format!("rates must be non-negative, got {g}")));
        }
        self.bounce_kernel.validate()
    }
}

pub(crate) fn invalid(name: &'static str, reason: String) -> Error {
    Error::InvalidParameter { name, reason }
}

/// Diagonalization input for the quadratic sampler: `A_d = a·I` in the frame `y = P x`.
#[derive(Debug, Clone, PartialEq)]
pub struct QbhsParams {
    pub p: Matrix,
    pub a: f64,
}

/// Everything a sampler needs to know about what it samples.
#[derive(Debug, Clone)]
pub struct Problem {
    pub target: TargetModel,
    pub constraints: ConstraintSet,
    pub qbhs: Option<QbhsParams>,
}

impl Problem {
    pub fn unconstrained(target: TargetModel) -> Self {
        let d = target.dim();
        Self {
            target,
            constraints: ConstraintSet::empty(d),
            qbhs: None,
        }
    }
}

#[derive(Debug, Clone)]
pub enum SamplerOutput {
    Trajectory(Skeleton),
    Draws(Vec<Vector>),
}

pub trait Sampler: Send + Sync {
    fn name(&self) -> &'static str;

    fn run(&self, problem: &Problem, config: &SamplerConfig, initial: &State) -> Result<SamplerOutput>;
}

struct BhsSampler;
struct QbhsSampler;
struct CbhsSampler;
struct GibbsSampler;

fn require_unconstrained(problem: &Problem, name: &str) -> Result<()> {
    if problem.constraints.is_empty() {
        Ok(())
    } else {
        Err(Error::Unsupported(format!("{name} does not handle constraints; use qbhs or gibbs")))
    }
}

fn gaussian(problem: &Problem, name: &str) -> Result<crate::model::GaussianTarget> {
    problem
        .target
        .as_gaussian()
        .cloned()
        .ok_or_else(|| Error::Unsupported(format!("{name} requires a Gaussian target")))
}

impl Sampler for BhsSampler {
    fn name(&self) -> &'static str {
        "bhs"
    }

    fn run(&self, problem: &Problem, config: &SamplerConfig, initial: &State) -> Result<SamplerOutput> {
        require_unconstrained(problem, self.name())?;
        run_bhs(&problem.target, config, initial).map(SamplerOutput::Trajectory)
    }
}

impl Sampler for QbhsSampler {
    fn name(&self) -> &'static str {
        "qbhs"
    }

    fn run(&self, problem: &Problem, config: &SamplerConfig, initial: &State) -> Result<SamplerOutput> {
        let target = gaussian(problem, self.name())?;
        let params = problem
            .qbhs
            .clone()
            .ok_or_else(|| invalid("qbhs", "missing P and a".into()))?;
        run_qbhs(&target, &problem.constraints, params.p, params.a, config, initial)
            .map(SamplerOutput::Trajectory)
    }
}

impl Sampler for CbhsSampler {
    fn name(&self) -> &'static str {
        "cbhs"
    }

    fn run(&self, problem: &Problem, config: &SamplerConfig, initial: &State) -> Result<SamplerOutput> {
        require_unconstrained(problem, self.name())?;
        run_cbhs(&problem.target, config, initial).map(SamplerOutput::Trajectory)
    }
}

impl Sampler for GibbsSampler {
    fn name(&self) -> &'static str {
        "gibbs"
    }

    fn run(&self, problem: &Problem, config: &SamplerConfig, initial: &State) -> Result<SamplerOutput> {
        let target = gaussian(problem, self.name())?;
        run_gibbs_truncated_mvn(
            &target,
            &problem.constraints,
            config.n_draws,
            config.seed,
            &initial.position,
        )
        .map(SamplerOutput::Draws)
    }
}

/// Samplers keyed by name.
pub struct SamplerRegistry {
    entries: BTreeMap<&'static str, Box<dyn Sampler>>,
}

impl SamplerRegistry {
    pub fn empty() -> Self {
        Self {
            entries: BTreeMap::new(),
        }
    }

    pub fn with_defaults() -> Self {
        let mut reg = Self::empty();
        reg.register(Box::new(BhsSampler));
        reg.register(Box::new(QbhsSampler));
        reg.register(Box::new(CbhsSampler));
        reg.register(Box::new(GibbsSampler));
        reg
    }

    /// Adds a sampler, replacing any previous one with the same name.
    pub fn register(&mut self, sampler: Box<dyn Sampler>) {
        self.entries.insert(sampler.name(), sampler);
    }

    pub fn get(&self, name: &str) -> Result<&dyn Sampler> {
        self.entries
            .get(name)
            .map(|s| s.as_ref())
            .ok_or_else(|| Error::UnknownSampler(name.to_string()))
    }

    pub fn names(&self) -> impl Iterator<Item = &'static str> + '_ {
        self.entries.keys().copied()
    }
}

impl Default for SamplerRegistry {
    fn default() -> Self {
        Self::with_defaults()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::GaussianTarget;

    #[test]
    fn registry_lookup() {
        let reg = SamplerRegistry::with_defaults();
        assert_eq!(reg.names().collect::<Vec<_>>(), vec!["bhs", "cbhs", "gibbs", "qbhs"]);
        assert!(matches!(reg.get("nuts"), Err(Error::UnknownSampler(_))));
        let problem = Problem::unconstrained(GaussianTarget::standard(2).unwrap().into());
        let init = State::new(Vector::zeros(2), Vector::from_element(2, 1.0));
        let out = reg
            .get("bhs")
            .unwrap()
            .run(&problem, &SamplerConfig::bps().with_time(10.0, 0.1), &init)
            .unwrap();
        assert!(matches!(out, SamplerOutput::Trajectory(_)));
    }

    #[test]
    fn config_validation() {
        assert!(SamplerConfig::rhmc().with_time(0.0, 0.1).validate().is_err());
        assert!(SamplerConfig::rhmc().with_time(1.0, -0.1).validate().is_err());
        assert!(SamplerConfig::rhmc().with_lambda0(-1.0).validate().is_err());
        assert!(SamplerConfig::rhmc().validate().is_ok());
    }
}
