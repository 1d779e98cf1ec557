//! Experiment configuration, read from TOML.

use std::f64::consts::FRAC_PI_2;
use std::path::{Path, PathBuf};

use bhs_core::kernels::{BounceKernelSpec, BounceVariant};
use bhs_core::model::{ConstraintSet, GaussianTarget, GuideField, Matrix, Vector};
use bhs_core::samplers::{QbhsParams, SamplerConfig};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SamplerKind {
    Bhs,
    Qbhs,
    Cbhs,
    Gibbs,
}

impl SamplerKind {
    pub fn name(self) -> &'static str {
        match self {
            SamplerKind::Bhs => "bhs",
            SamplerKind::Qbhs => "qbhs",
            SamplerKind::Cbhs => "cbhs",
            SamplerKind::Gibbs => "gibbs",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TargetSpec {
    pub mean: Vec<f64>,
    /// Full covariance, row by row. Exactly one of `covariance` and `variances` is given.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub covariance: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub variances: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GuideKind {
    Zero,
    GradU,
    Linear,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GuideSpec {
    pub kind: GuideKind,
    /// `g(x) = A x`, row by row.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub matrix: Option<Vec<Vec<f64>>>,
    /// `g(x) = a x`, shorthand for `A = a I`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scalar: Option<f64>,
}

/// Constraints `Fᵀx + h ≥ 0`; `columns[j]` is the normal of wall `j`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct ConstraintSpec {
    pub columns: Vec<Vec<f64>>,
    pub offsets: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QbhsSpec {
    pub a: f64,
    /// Frame matrix `P`, row by row; identity when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p: Option<Vec<Vec<f64>>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelSpec {
    #[serde(default)]
    pub variant: BounceVariant,
    #[serde(default = "default_angle")]
    pub refresh_angle: f64,
}

impl Default for KernelSpec {
    fn default() -> Self {
        Self {
            variant: BounceVariant::Deterministic,
            refresh_angle: FRAC_PI_2,
        }
    }
}

fn default_angle() -> f64 {
    FRAC_PI_2
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialSpec {
    pub position: Vec<f64>,
    /// Drawn from `N(0, I)` with the run seed when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub velocity: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HistogramSpec {
    pub lo: f64,
    pub hi: f64,
    pub bins: usize,
}

impl HistogramSpec {
    pub fn edges(&self) -> Vec<f64> {
        let w = (self.hi - self.lo) / self.bins as f64;
        (0..=self.bins).map(|i| self.lo + w * i as f64).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    #[serde(default = "default_out_dir")]
    pub dir: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub histogram: Option<HistogramSpec>,
}

impl Default for OutputSpec {
    fn default() -> Self {
        Self {
            dir: default_out_dir(),
            histogram: None,
        }
    }
}

fn default_out_dir() -> PathBuf {
    PathBuf::from("out")
}

/// Matched-budget settings: QBHS runs for `qbhs_samples · δ` time units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchmarkSpec {
    pub gibbs_samples: usize,
    pub qbhs_samples: usize,
    #[serde(default = "default_resolution")]
    pub quadrature_resolution: usize,
}

fn default_resolution() -> usize {
    8
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GentestSpec {
    /// Polynomial test functions such as `x1^2*v1`; the standard ten-monomial suite when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub functions: Option<Vec<String>>,
    #[serde(default = "default_threshold")]
    pub threshold: f64,
}

fn default_threshold() -> f64 {
    5.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub sampler: SamplerKind,
    pub seed: u64,
    pub t_total: f64,
    pub delta: f64,
    #[serde(default = "default_lambda0")]
    pub lambda0: f64,
    #[serde(default = "default_replications")]
    pub replications: usize,
    /// Sweeps for `gibbs` under `run`.
    #[serde(default)]
    pub n_draws: usize,
    /// Constant extra flip rates for `cbhs`.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub cbhs_gamma: Vec<f64>,
    pub target: TargetSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub guide: Option<GuideSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub constraints: Option<ConstraintSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub qbhs: Option<QbhsSpec>,
    #[serde(default)]
    pub kernel: KernelSpec,
    pub initial: InitialSpec,
    #[serde(default)]
    pub output: OutputSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub benchmark: Option<BenchmarkSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gentest: Option<GentestSpec>,
}

fn default_lambda0() -> f64 {
    1.0
}

fn default_replications() -> usize {
    1
}

/// A config problem tied to the offending field.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub field: String,
    pub reason: String,
}

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "invalid config field `{}`: {}", self.field, self.reason)
    }
}

impl std::error::Error for ConfigError {}

fn field_err(field: &str, reason: impl Into<String>) -> ConfigError {
    ConfigError {
        field: field.to_string(),
        reason: reason.into(),
    }
}

fn matrix(field: &str, rows: &[Vec<f64>], d: usize) -> Result<Matrix, ConfigError> {
    if rows.len() != d || rows.iter().any(|r| r.len() != d) {
        return Err(field_err(field, format!("expected a {d}×{d} matrix")));
    }
    Ok(Matrix::from_fn(d, d, |i, j| rows[i][j]))
}

fn finite(field: &str, xs: &[f64]) -> Result<(), ConfigError> {
    match xs.iter().position(|x| !x.is_finite()) {
        Some(i) => Err(field_err(field, format!("entry {i} is not finite"))),
        None => Ok(()),
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> anyhow::Result<Self> {
        let cfg: Self = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| anyhow::anyhow!("cannot read {}: {e}", path.display()))?;
        Self::from_toml(&text).map_err(|e| anyhow::anyhow!("{}: {e}", path.display()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is always serializable")
    }

    pub fn dim(&self) -> usize {
        self.target.mean.len()
    }

    /// Checks every field against the sampler preconditions before anything runs.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let d = self.dim();
        if d == 0 {
            return Err(field_err("target.mean", "dimension must be at least 1"));
        }
        finite("target.mean", &self.target.mean)?;
        self.gaussian()?;
        if !(self.t_total > 0.0 && self.t_total.is_finite()) {
            return Err(field_err("t_total", "must be positive and finite"));
        }
        if !(self.delta > 0.0 && self.delta <= self.t_total) {
            return Err(field_err("delta", "must lie in (0, t_total]"));
        }
        if !(self.lambda0 >= 0.0 && self.lambda0.is_finite()) {
            return Err(field_err("lambda0", "must be non-negative"));
        }
        if self.replications == 0 {
            return Err(field_err("replications", "must be at least 1"));
        }
        if !(self.kernel.refresh_angle > 0.0 && self.kernel.refresh_angle <= FRAC_PI_2) {
            return Err(field_err("kernel.refresh_angle", "must lie in (0, π/2]"));
        }
        if !self.cbhs_gamma.is_empty() && self.cbhs_gamma.len() != d {
            return Err(field_err("cbhs_gamma", format!("expected {d} rates")));
        }
        if self.cbhs_gamma.iter().any(|g| !(*g >= 0.0 && g.is_finite())) {
            return Err(field_err("cbhs_gamma", "rates must be non-negative"));
        }
        if self.initial.position.len() != d {
            return Err(field_err("initial.position", format!("expected {d} entries")));
        }
        finite("initial.position", &self.initial.position)?;
        if let Some(v) = &self.initial.velocity {
            if v.len() != d {
                return Err(field_err("initial.velocity", format!("expected {d} entries")));
            }
            finite("initial.velocity", v)?;
        }
        self.guide_field()?;
        let walls = self.constraint_set()?;
        if !walls.is_empty() && !walls.satisfied(&Vector::from_column_slice(&self.initial.position)) {
            return Err(field_err("initial.position", "violates the constraints"));
        }
        match self.sampler {
            SamplerKind::Qbhs => {
                self.qbhs_params()?;
            }
            SamplerKind::Bhs | SamplerKind::Cbhs if !walls.is_empty() => {
                return Err(field_err("constraints", "only qbhs and gibbs handle constraints"));
            }
            SamplerKind::Bhs | SamplerKind::Cbhs if self.guide.is_none() => {
                return Err(field_err("guide", "required for bhs and cbhs"));
            }
            _ => {}
        }
        if let Some(h) = &self.output.histogram {
            if !(h.lo < h.hi && h.bins > 0 && h.lo.is_finite() && h.hi.is_finite()) {
                return Err(field_err("output.histogram", "need lo < hi and bins > 0"));
            }
        }
        if let Some(b) = &self.benchmark {
            if b.gibbs_samples == 0 || b.qbhs_samples == 0 || b.quadrature_resolution == 0 {
                return Err(field_err("benchmark", "sample counts and resolution must be positive"));
            }
        }
        if let Some(g) = &self.gentest {
            if !(g.threshold > 0.0) {
                return Err(field_err("gentest.threshold", "must be positive"));
            }
            if matches!(&g.functions, Some(f) if f.is_empty()) {
                return Err(field_err("gentest.functions", "list is empty"));
            }
        }
        Ok(())
    }

    pub fn gaussian(&self) -> Result<GaussianTarget, ConfigError> {
        let d = self.dim();
        let mean = Vector::from_column_slice(&self.target.mean);
        let built = match (&self.target.covariance, &self.target.variances) {
            (Some(rows), None) => GaussianTarget::new(mean, matrix("target.covariance", rows, d)?),
            (None, Some(vars)) => {
                if vars.len() != d {
                    return Err(field_err("target.variances", format!("expected {d} entries")));
                }
                GaussianTarget::diagonal(mean, vars)
            }
            (None, None) => GaussianTarget::new(mean, Matrix::identity(d, d)),
            (Some(_), Some(_)) => {
                return Err(field_err("target", "give either covariance or variances, not both"))
            }
        };
        built.map_err(|e| field_err("target.covariance", e.to_string()))
    }

    pub fn guide_field(&self) -> Result<GuideField, ConfigError> {
        let d = self.dim();
        let Some(g) = &self.guide else {
            return Ok(GuideField::Zero);
        };
        match (g.kind, &g.matrix, g.scalar) {
            (GuideKind::Zero, None, None) => Ok(GuideField::Zero),
            (GuideKind::GradU, None, None) => Ok(GuideField::GradU),
            (GuideKind::Linear, Some(rows), None) => Ok(GuideField::Linear(matrix("guide.matrix", rows, d)?)),
            (GuideKind::Linear, None, Some(a)) if a.is_finite() => Ok(GuideField::Linear(Matrix::identity(d, d) * a)),
            (GuideKind::Linear, _, _) => Err(field_err("guide", "linear guide needs exactly one of matrix, scalar")),
            _ => Err(field_err("guide", "matrix and scalar apply only to kind = \"linear\"")),
        }
    }

    pub fn constraint_set(&self) -> Result<ConstraintSet, ConfigError> {
        let d = self.dim();
        match &self.constraints {
            None => Ok(ConstraintSet::empty(d)),
            Some(c) => {
                if c.columns.len() != c.offsets.len() {
                    return Err(field_err("constraints", "columns and offsets differ in length"));
                }
                ConstraintSet::from_columns(d, &c.columns, &c.offsets)
                    .map_err(|e| field_err("constraints.columns", e.to_string()))
            }
        }
    }

    pub fn qbhs_params(&self) -> Result<QbhsParams, ConfigError> {
        let d = self.dim();
        let q = self.qbhs.as_ref().ok_or_else(|| field_err("qbhs", "section required for the qbhs sampler"))?;
        if !(q.a < 0.0 && q.a.is_finite()) {
            return Err(field_err("qbhs.a", "must be negative"));
        }
        let p = match &q.p {
            Some(rows) => matrix("qbhs.p", rows, d)?,
            None => Matrix::identity(d, d),
        };
        Ok(QbhsParams { p, a: q.a })
    }

    pub fn sampler_config(&self, seed: u64) -> Result<SamplerConfig, ConfigError> {
        let mut cfg = SamplerConfig::new(self.guide_field()?)
            .with_time(self.t_total, self.delta)
            .with_lambda0(self.lambda0)
            .with_seed(seed);
        cfg.bounce_kernel = BounceKernelSpec {
            variant: self.kernel.variant,
            refresh_angle: self.kernel.refresh_angle,
        };
        cfg.cbhs_gamma = self.cbhs_gamma.clone();
        cfg.n_draws = self.n_draws;
        Ok(cfg)
    }
}
