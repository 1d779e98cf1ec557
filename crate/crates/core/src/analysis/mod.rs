//! Estimators and checks on sampler output: discretization, moments, diagnostics,
//! the quadrature oracle for the truncated bivariate benchmark and the generator test.

mod diagnostics;
mod generator;
mod quadrature;

pub use diagnostics::{
    autocorrelation, batch_means, ks_statistic, ks_two_sample, normal_cdf, thin, thinning_lag, BatchMeans,
};
pub use generator::{generator_invariance_test, standard_suite, Monomial, TestFunction, GENERATOR_BATCHES};
pub use quadrature::{integrate_adaptive, quadrature_truth_truncated_mvn, QUADRATURE_TOL};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::Vector;
use crate::samplers::Skeleton;

/// Fraction of `T_total` discarded before estimation.
pub const BURN_IN_FRACTION: f64 = 0.1;

/// States of a trajectory read off at `t = iδ`, `i = 1..N`, `N = ⌊T/δ⌋`.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscretizedChain {
    pub delta: f64,
    pub times: Vec<f64>,
    pub positions: Vec<Vector>,
    pub velocities: Vec<Vector>,
}

impl DiscretizedChain {
    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    /// Drops samples with `t ≤ fraction · T`.
    pub fn burn_in(&self, fraction: f64) -> Self {
        let t_total = self.delta * self.len() as f64;
        let skip = self.times.partition_point(|&t| t <= fraction * t_total);
        Self {
            delta: self.delta,
            times: self.times[skip..].to_vec(),
            positions: self.positions[skip..].to_vec(),
            velocities: self.velocities[skip..].to_vec(),
        }
    }

    /// Coordinate `i` of every position.
    pub fn coordinate(&self, i: usize) -> Vec<f64> {
        self.positions.iter().map(|x| x[i]).collect()
    }
}

/// Samples the exact trajectory on the grid `iδ`. When `δ > T` the chain is empty
/// unless `allow_single` is set, in which case the terminal state is the only sample.
pub fn discretize(skeleton: &Skeleton, delta: f64, allow_single: bool) -> Result<DiscretizedChain> {
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(Error::InvalidParameter {
            name: "delta",
            reason: format!("must be positive, got {delta}"),
        });
    }
    let t_total = skeleton.t_total();
    // guard against ⌊T/δ⌋ landing one short through rounding, e.g. 0.3/0.1
    let n = ((t_total / delta) * (1.0 + 4.0 * f64::EPSILON)).floor() as usize;
    if n == 0 {
        if !allow_single {
            return Err(Error::InvalidParameter {
                name: "delta",
                reason: format!("δ = {delta} exceeds T_total = {t_total}"),
            });
        }
        let end = skeleton.events.last().ok_or(Error::Empty("skeleton"))?;
        return Ok(DiscretizedChain {
            delta,
            times: vec![t_total],
            positions: vec![end.position.clone()],
            velocities: vec![end.velocity_after.clone()],
        });
    }
    let mut chain = DiscretizedChain {
        delta,
        times: Vec::with_capacity(n),
        positions: Vec::with_capacity(n),
        velocities: Vec::with_capacity(n),
    };
    let events = &skeleton.events;
    let mut seg = 0;
    for i in 1..=n {
        let t = (i as f64 * delta).min(t_total);
        while seg + 2 < events.len() && events[seg + 1].time <= t {
            seg += 1;
        }
        let e = &events[seg];
        let (x, v) = skeleton.flow.advance(&e.position, &e.velocity_after, t - e.time);
        chain.times.push(t);
        chain.positions.push(x);
        chain.velocities.push(v);
    }
    Ok(chain)
}

/// `(1/N) Σ f(X_{iδ})`.
pub fn time_average<F: Fn(&Vector) -> f64>(chain: &DiscretizedChain, f: F) -> Result<f64> {
    mean_of(&chain.positions, f)
}

fn mean_of<F: Fn(&Vector) -> f64>(xs: &[Vector], f: F) -> Result<f64> {
    if xs.is_empty() {
        return Err(Error::Empty("chain"));
    }
    Ok(xs.iter().map(f).sum::<f64>() / xs.len() as f64)
}

/// Per-coordinate means and variances, optionally compared with reference values.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MomentReport {
    pub means: Vec<f64>,
    pub variances: Vec<f64>,
    pub reference: Option<Reference>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Reference {
    pub means: Vec<f64>,
    pub variances: Vec<f64>,
    pub mean_sq_errors: Vec<f64>,
    pub variance_sq_errors: Vec<f64>,
}

impl MomentReport {
    pub fn from_samples(xs: &[Vector]) -> Result<Self> {
        let first = xs.first().ok_or(Error::Empty("samples"))?;
        let d = first.len();
        let n = xs.len() as f64;
        let mut means = vec![0.0; d];
        let mut variances = vec![0.0; d];
        for i in 0..d {
            let m = xs.iter().map(|x| x[i]).sum::<f64>() / n;
            means[i] = m;
            variances[i] = xs.iter().map(|x| (x[i] - m).powi(2)).sum::<f64>() / n;
        }
        Ok(Self {
            means,
            variances,
            reference: None,
        })
    }

    pub fn dim(&self) -> usize {
        self.means.len()
    }

    pub fn with_reference(mut self, truth: &MomentReport) -> Result<Self> {
        crate::error::check_dim(self.dim(), truth.dim())?;
        let sq = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).collect();
        self.reference = Some(Reference {
            means: truth.means.clone(),
            variances: truth.variances.clone(),
            mean_sq_errors: sq(&self.means, &truth.means),
            variance_sq_errors: sq(&self.variances, &truth.variances),
        });
        Ok(self)
    }
}

pub fn moment_report(chain: &DiscretizedChain) -> Result<MomentReport> {
    MomentReport::from_samples(&chain.positions)
}

/// Mean squared error of replicated estimates, per coordinate, for means and variances.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MseReport {
    pub replications: usize,
    pub means: Vec<f64>,
    pub variances: Vec<f64>,
}

pub fn mse_report(estimates: &[MomentReport], truth: &MomentReport) -> Result<MseReport> {
    if estimates.len() < 2 {
        return Err(Error::InvalidParameter {
            name: "replications",
            reason: format!("need at least 2, got {}", estimates.len()),
        });
    }
    let d = truth.dim();
    let mut means = vec![0.0; d];
    let mut variances = vec![0.0; d];
    for est in estimates {
        crate::error::check_dim(d, est.dim())?;
        for i in 0..d {
            means[i] += (est.means[i] - truth.means[i]).powi(2);
            variances[i] += (est.variances[i] - truth.variances[i]).powi(2);
        }
    }
    let r = estimates.len() as f64;
    means.iter_mut().chain(variances.iter_mut()).for_each(|m| *m /= r);
    Ok(MseReport {
        replications: estimates.len(),
        means,
        variances,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{GaussianTarget, State, TargetModel};
    use crate::samplers::{run_bhs, EventKind, EventRecord, SamplerConfig};
    use crate::flows::FlowModel;
    use crate::model::GuideField;

    fn v(xs: &[f64]) -> Vector {
        Vector::from_column_slice(xs)
    }

    fn straight(t_total: f64) -> Skeleton {
        let rec = |t: f64, kind| EventRecord {
            time: t,
            position: v(&[t, 0.0]),
            velocity_after: v(&[1.0, 0.0]),
            kind,
        };
        Skeleton {
            events: vec![rec(0.0, EventKind::Start), rec(t_total, EventKind::End)],
            flow: FlowModel::Linear,
            guide: GuideField::GradU,
            config: SamplerConfig::bps(),
            sampler: "bhs",
        }
    }

    #[test]
    fn single_linear_segment() {
        let chain = discretize(&straight(2.0), 0.5, false).unwrap();
        assert_eq!(chain.len(), 4);
        for (k, x) in chain.positions.iter().enumerate() {
            assert!((x - v(&[0.5 * (k + 1) as f64, 0.0])).amax() < 1e-15);
        }
    }

    #[test]
    fn count_is_floor() {
        for (t, d, n) in [(0.3, 0.1, 3), (1.0, 0.3, 3), (100.0, 0.1, 1000), (2.0, 0.7, 2)] {
            assert_eq!(discretize(&straight(t), d, false).unwrap().len(), n, "{t} {d}");
        }
        assert!(discretize(&straight(1.0), 2.0, false).is_err());
        assert_eq!(discretize(&straight(1.0), 2.0, true).unwrap().len(), 1);
        assert!(discretize(&straight(1.0), 0.0, false).is_err());
    }

    #[test]
    fn samples_on_trajectory() {
        let target: TargetModel = GaussianTarget::standard(2).unwrap().into();
        let cfg = SamplerConfig::rhmc().with_time(50.0, 0.1).with_seed(1);
        let sk = run_bhs(&target, &cfg, &State::new(v(&[0.5, 0.0]), v(&[1.0, 0.3]))).unwrap();
        let chain = discretize(&sk, 0.1, false).unwrap();
        for (t, x) in chain.times.iter().zip(&chain.positions) {
            // independent re-solve from the last event at or before t
            let e = sk.events.iter().rev().find(|e| e.time <= *t && e.kind != EventKind::End).unwrap();
            let (xr, _) = sk.flow.advance(&e.position, &e.velocity_after, t - e.time);
            assert!((x - xr).amax() < 1e-9);
        }
    }

    #[test]
    fn averages() {
        let chain = DiscretizedChain {
            delta: 1.0,
            times: vec![1.0, 2.0],
            positions: vec![v(&[0.0, 5.0]), v(&[2.0, 1.0])],
            velocities: vec![v(&[0.0, 0.0]); 2],
        };
        assert_eq!(time_average(&chain, |_| 3.5).unwrap(), 3.5);
        assert_eq!(time_average(&chain, |x| x[0]).unwrap(), 1.0);
        let lhs = time_average(&chain, |x| 2.0 * x[0] - 3.0 * x[1]).unwrap();
        let rhs = 2.0 * time_average(&chain, |x| x[0]).unwrap() - 3.0 * time_average(&chain, |x| x[1]).unwrap();
        assert!((lhs - rhs).abs() < 1e-12);
        let empty = DiscretizedChain {
            delta: 1.0,
            times: vec![],
            positions: vec![],
            velocities: vec![],
        };
        assert!(time_average(&empty, |x| x[0]).is_err());
    }

    #[test]
    fn burn_in_drops_prefix() {
        let chain = discretize(&straight(10.0), 0.1, false).unwrap().burn_in(BURN_IN_FRACTION);
        assert_eq!(chain.len(), 90);
        assert!(chain.times[0] > 1.0);
    }

    #[test]
    fn mse() {
        let truth = MomentReport {
            means: vec![1.0, 2.0],
            variances: vec![0.5, 0.5],
            reference: None,
        };
        assert!(mse_report(&[truth.clone()], &truth).is_err());
        let zero = mse_report(&[truth.clone(), truth.clone()], &truth).unwrap();
        assert!(zero.means.iter().chain(&zero.variances).all(|m| *m == 0.0));
        let eps = 0.03;
        let shift = |s: f64| MomentReport {
            means: vec![1.0 + s, 2.0 - s],
            variances: vec![0.5 + s, 0.5],
            reference: None,
        };
        let r = mse_report(&[shift(eps), shift(-eps)], &truth).unwrap();
        assert!((r.means[0] - eps * eps).abs() < 1e-15 && (r.variances[0] - eps * eps).abs() < 1e-15);
        assert_eq!(r.variances[1], 0.0);
        let bad = MomentReport {
            means: vec![1.0],
            variances: vec![1.0],
            reference: None,
        };
        assert!(mse_report(&[bad.clone(), bad], &truth).is_err());
    }
}
