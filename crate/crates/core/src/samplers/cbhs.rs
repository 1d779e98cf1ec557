use rand::Rng;
use rand_distr::Exp1;

use crate::error::{check_dim, Error, Result};
use crate::event_times::{exp_budget, linear_rate_time, scalar_flow_bounce_time};
use crate::flows::{FlowModel, ScalarFlow};
use crate::model::{ChainRng, GaussianTarget, GuideField, State, TargetModel};

use super::engine::{earliest, Engine};
use super::{EventKind, SamplerConfig, Skeleton};

/// Coordinate bouncy hybrid sampler: each event flips a single velocity coordinate.
///
/// Supported instances:
/// * `g = ∇U` on a Gaussian target (Zig-Zag, straight-line motion);
/// * `g(x) = A x` or `g = 0` with diagonal `A` on a Gaussian with diagonal `Σ`, where each
///   coordinate follows its own scalar oscillator `ẍᵢ = (Aᵢᵢ − 1/σᵢ²) xᵢ + μᵢ/σᵢ²`.
///
/// There is no refreshment; velocity magnitudes are fixed by the initial state.
pub fn run_cbhs(target: &TargetModel, config: &SamplerConfig, initial: &State) -> Result<Skeleton> {
    config.validate()?;
    let d = target.dim();
    check_dim(d, initial.position.len())?;
    check_dim(d, initial.velocity.len())?;
    let gamma = if config.cbhs_gamma.is_empty() {
        vec![0.0; d]
    } else {
        check_dim(d, config.cbhs_gamma.len())?;
        config.cbhs_gamma.clone()
    };
    let gauss = target
        .as_gaussian()
        .ok_or_else(|| Error::Unsupported("coordinate sampler needs a Gaussian target".into()))?;
    match &config.guide {
        GuideField::GradU => zig_zag(target, gauss, gamma, config, initial),
        GuideField::Zero => decoupled(target, gauss, vec![0.0; d], gamma, config, initial),
        GuideField::Linear(a) => {
            let off_diag = (0..d).any(|i| (0..d).any(|j| i != j && a[(i, j)] != 0.0));
            if off_diag {
                return Err(Error::Unsupported(
                    "coordinate sampler with a linear guide needs diagonal A".into(),
                ));
            }
            decoupled(target, gauss, a.diagonal().iter().copied().collect(), gamma, config, initial)
        }
        GuideField::Custom(_) => Err(Error::Unsupported(
            "custom guide fields have no per-coordinate closed-form flow".into(),
        )),
    }
}

fn extra_rate_time(gamma: f64, rng: &mut ChainRng) -> f64 {
    if gamma > 0.0 {
        let e: f64 = rng.sample(Exp1);
        e / gamma
    } else {
        f64::INFINITY
    }
}

fn zig_zag(
    target: &TargetModel,
    gauss: &GaussianTarget,
    gamma: Vec<f64>,
    config: &SamplerConfig,
    initial: &State,
) -> Result<Skeleton> {
    let d = gauss.dim();
    Engine {
        target,
        guide: GuideField::GradU,
        constraints: None,
        flow: FlowModel::Linear,
        config,
        name: "cbhs",
    }
    .run(initial, |x, v, _, rng| {
        let grad = gauss.grad_potential(x);
        let curv = gauss.precision() * v;
        let clocks: Vec<_> = (0..d)
            .map(|i| {
                // vᵢ ∂ᵢU(x + tv) = vᵢ∂ᵢU(x) + t·vᵢ(Σ⁻¹v)ᵢ
                let t = linear_rate_time(v[i] * grad[i], v[i] * curv[i], exp_budget(rng));
                (t.min(extra_rate_time(gamma[i], rng)), EventKind::CoordFlip(i))
            })
            .collect();
        Ok(earliest(&clocks))
    })
}

fn decoupled(
    target: &TargetModel,
    gauss: &GaussianTarget,
    a: Vec<f64>,
    gamma: Vec<f64>,
    config: &SamplerConfig,
    initial: &State,
) -> Result<Skeleton> {
    if !gauss.is_diagonal() {
        return Err(Error::Unsupported(
            "coordinate sampler with a linear guide needs a diagonal covariance".into(),
        ));
    }
    let d = gauss.dim();
    let var: Vec<f64> = (0..d).map(|i| gauss.covariance()[(i, i)]).collect();
    let k: Vec<f64> = (0..d).map(|i| a[i] - 1.0 / var[i]).collect();
    let b: Vec<f64> = (0..d).map(|i| gauss.mean()[i] / var[i]).collect();
    let guide = GuideField::Linear(crate::model::Matrix::from_diagonal(
        &crate::model::Vector::from_column_slice(&a),
    ));
    let (kk, bb) = (k.clone(), b.clone());
    Engine {
        target,
        guide,
        constraints: None,
        flow: FlowModel::Decoupled { k, b },
        config,
        name: "cbhs",
    }
    .run(initial, move |x, v, _, rng| {
        let clocks: Vec<_> = (0..d)
            .map(|i| {
                let flow = ScalarFlow::new(kk[i], bb[i], x[i], v[i]);
                let t = scalar_flow_bounce_time(&flow, a[i], exp_budget(rng));
                (t.min(extra_rate_time(gamma[i], rng)), EventKind::CoordFlip(i))
            })
            .collect();
        Ok(earliest(&clocks))
    })
}
