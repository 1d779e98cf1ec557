use std::sync::Arc;

use rand::distr::Open01;
use rand::Rng;

use crate::error::{check_dim, Error, Result};
use crate::event_times::{
    bounce_time_univariate, constant_thinning_bound, exp_budget, linear_rate_time, quadratic_rate,
    sample_bounce_thinning, sample_refresh_time,
};
use crate::flows::{FlowModel, QuadraticSystem, UnivariateFlow};
use crate::model::{GaussianTarget, GuideField, Matrix, State, TargetModel};

use super::engine::{earliest, Engine, Proposal};
use super::{EventKind, SamplerConfig, Skeleton};

/// Generic bouncy hybrid sampler for the (target, guide) pairs with closed-form flows:
///
/// * standard normal in one dimension with `g(x) = a·x` (inverse-transform bounce times),
/// * Gaussian with `g = ∇U` (straight lines),
/// * Gaussian with `g = 0` or `g(x) = A x` where `Σ⁻¹ − A` is symmetric positive definite
///   (oscillator flows, thinned bounce times).
pub fn run_bhs(target: &TargetModel, config: &SamplerConfig, initial: &State) -> Result<Skeleton> {
    config.validate()?;
    check_dim(target.dim(), initial.position.len())?;
    check_dim(target.dim(), initial.velocity.len())?;
    let gauss = target.as_gaussian().ok_or_else(|| {
        Error::Unsupported("no exact flow for a non-Gaussian target; only Gaussian targets are solvable".into())
    })?;
    match &config.guide {
        GuideField::Linear(a) if gauss.dim() == 1 && gauss.is_standard() => {
            univariate(target, a[(0, 0)], config, initial)
        }
        GuideField::GradU => straight_lines(target, gauss, config, initial),
        GuideField::Zero => {
            let d = gauss.dim();
            oscillator(target, gauss, &Matrix::zeros(d, d), config, initial)
        }
        GuideField::Linear(a) => oscillator(target, gauss, a, config, initial),
        GuideField::Custom(_) => Err(Error::Unsupported(
            "custom guide fields have no closed-form flow".into(),
        )),
    }
}

fn univariate(target: &TargetModel, a: f64, config: &SamplerConfig, initial: &State) -> Result<Skeleton> {
    let lambda0 = config.lambda0;
    Engine {
        target,
        guide: config.guide.clone(),
        constraints: None,
        flow: FlowModel::Univariate { a },
        config,
        name: "bhs",
    }
    .run(initial, |x, v, _, rng| {
        let flow = UnivariateFlow::solve(a, x[0], v[0]);
        let u: f64 = rng.sample(Open01);
        let tau_b = bounce_time_univariate(&flow, u);
        let tau_r = sample_refresh_time(lambda0, rng)?;
        Ok(earliest(&[(tau_b, EventKind::Bounce), (tau_r, EventKind::Refresh)]))
    })
}

fn straight_lines(
    target: &TargetModel,
    gauss: &GaussianTarget,
    config: &SamplerConfig,
    initial: &State,
) -> Result<Skeleton> {
    let lambda0 = config.lambda0;
    Engine {
        target,
        guide: GuideField::GradU,
        constraints: None,
        flow: FlowModel::Linear,
        config,
        name: "bhs",
    }
    .run(initial, |x, v, _, rng| {
        // ⟨v, ∇U(x + tv)⟩ = ⟨v, ∇U(x)⟩ + t·vᵀΣ⁻¹v
        let alpha = v.dot(&gauss.grad_potential(x));
        let beta = v.dot(&(gauss.precision() * v));
        let tau_b = linear_rate_time(alpha, beta, exp_budget(rng));
        let tau_r = sample_refresh_time(lambda0, rng)?;
        Ok(earliest(&[(tau_b, EventKind::Bounce), (tau_r, EventKind::Refresh)]))
    })
}

fn oscillator(
    target: &TargetModel,
    gauss: &GaussianTarget,
    a: &Matrix,
    config: &SamplerConfig,
    initial: &State,
) -> Result<Skeleton> {
    let system = Arc::new(QuadraticSystem::from_guide(gauss, a)?);
    if system.a_diag().iter().any(|&ak| ak > 0.0) {
        return Err(Error::Unsupported(
            "Σ⁻¹ − A must be positive definite for a constant thinning bound".into(),
        ));
    }
    let lambda0 = config.lambda0;
    let sys = Arc::clone(&system);
    Engine {
        target,
        guide: config.guide.clone(),
        constraints: None,
        flow: FlowModel::Quadratic(system),
        config,
        name: "bhs",
    }
    .run(initial, move |x, v, remaining, rng| -> Result<Proposal> {
        let flow = sys.solve(x, v)?;
        let bound = constant_thinning_bound(&flow)?;
        let tau_r = sample_refresh_time(lambda0, rng)?;
        let horizon = tau_r.min(remaining);
        let tau_b = sample_bounce_thinning(|t| quadratic_rate(&flow, t), bound, horizon, rng)?;
        Ok(earliest(&[(tau_b, EventKind::Bounce), (tau_r, EventKind::Refresh)]))
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{SmoothTarget, Vector};

    fn v(xs: &[f64]) -> Vector {
        Vector::from_column_slice(xs)
    }

    fn corr_gauss() -> TargetModel {
        let cov = Matrix::from_row_slice(2, 2, &[1.0, 0.5, 0.5, 2.0]);
        GaussianTarget::new(v(&[1.0, -1.0]), cov).unwrap().into()
    }

    #[test]
    fn rhmc_never_bounces() {
        let cfg = SamplerConfig::rhmc().with_time(200.0, 0.1).with_seed(3);
        let sk = run_bhs(&corr_gauss(), &cfg, &State::new(v(&[0.0, 0.0]), v(&[1.0, 0.0]))).unwrap();
        assert_eq!(sk.count("bounce"), 0);
        assert!(sk.count("refresh") > 100);
    }

    #[test]
    fn bps_segments_are_straight() {
        let cfg = SamplerConfig::bps().with_time(200.0, 0.1).with_seed(4);
        let sk = run_bhs(&corr_gauss(), &cfg, &State::new(v(&[0.0, 0.0]), v(&[1.0, 0.0]))).unwrap();
        assert!(sk.count("bounce") > 50);
        for w in sk.events.windows(2) {
            let (x1, v1) = sk.flow.advance(&w[0].position, &w[0].velocity_after, w[1].time - w[0].time);
            assert_eq!(v1, w[0].velocity_after);
            assert!((x1 - &w[1].position).amax() < 1e-10);
        }
    }

    #[test]
    fn skeleton_invariants() {
        let cases = [
            (SamplerConfig::new(GuideField::scalar(-1.0)), GaussianTarget::standard(1).unwrap().into(), State::new(v(&[0.5]), v(&[1.0]))),
            (SamplerConfig::new(GuideField::scalar(1.0)), GaussianTarget::standard(1).unwrap().into(), State::new(v(&[0.5]), v(&[1.0]))),
            (
                SamplerConfig::new(GuideField::Linear(Matrix::from_row_slice(2, 2, &[0.3, 0.1, 0.1, -0.5]))),
                corr_gauss(),
                State::new(v(&[0.0, 0.0]), v(&[1.0, 0.0])),
            ),
        ];
        for (cfg, target, init) in cases {
            let cfg = cfg.with_time(300.0, 0.1).with_seed(9);
            let sk = run_bhs(&target, &cfg, &init).unwrap();
            assert_eq!(sk.events[0].kind, EventKind::Start);
            assert_eq!(sk.events.last().unwrap().kind, EventKind::End);
            assert_eq!(sk.t_total(), 300.0);
            for w in sk.events.windows(2) {
                assert!(w[1].time > w[0].time);
                let (x1, _) = sk.flow.advance(&w[0].position, &w[0].velocity_after, w[1].time - w[0].time);
                assert!((x1 - &w[1].position).amax() < 1e-10);
            }
            let again = run_bhs(&target, &cfg, &init).unwrap();
            assert_eq!(sk.events, again.events);
        }
    }

    #[test]
    fn unsupported_pairs_rejected() {
        let smooth = TargetModel::Smooth(SmoothTarget::new(1, |x: &Vector| x[0].powi(4), |x: &Vector| x.map(|e| 4.0 * e.powi(3))));
        let init = State::new(v(&[0.0]), v(&[1.0]));
        assert!(matches!(run_bhs(&smooth, &SamplerConfig::bps(), &init), Err(Error::Unsupported(_))));
        let gauss: TargetModel = GaussianTarget::standard(1).unwrap().into();
        let custom = SamplerConfig::new(GuideField::custom(|x: &Vector| x.clone()));
        assert!(matches!(run_bhs(&gauss, &custom, &init), Err(Error::Unsupported(_))));
    }
}
