use std::sync::Arc;

use crate::error::{check_dim, Error, Result};
use crate::event_times::{
    constant_thinning_bound, quadratic_rate, sample_bounce_thinning, sample_refresh_time, wall_hit_time,
};
use crate::flows::{FlowModel, QuadraticSystem};
use crate::kernels::wall_reflect;
use crate::model::{ConstraintSet, GaussianTarget, GuideField, Matrix, State, TargetModel, Vector, CONSTRAINT_TOL};

use super::engine::{earliest, Engine};
use super::{EventKind, SamplerConfig, Skeleton};

/// Quadratic bouncy hybrid sampler for a Gaussian truncated to `Fᵀx + h ≥ 0`.
///
/// The guide is implied by the frame: `A_d = a·I` gives `A = Σ⁻¹ + a·I`. The guide in
/// `config` is ignored. Each step competes three clocks: the thinned bounce time, the
/// deterministic wall hit and the refreshment time.
pub fn run_qbhs(
    target: &GaussianTarget,
    constraints: &ConstraintSet,
    p: Matrix,
    a: f64,
    config: &SamplerConfig,
    initial: &State,
) -> Result<Skeleton> {
    config.validate()?;
    let d = target.dim();
    check_dim(d, initial.position.len())?;
    check_dim(d, initial.velocity.len())?;
    check_dim(d, constraints.dim())?;
    if !(a < 0.0) {
        return Err(Error::InvalidParameter {
            name: "a",
            reason: format!("must be negative, got {a}"),
        });
    }
    let min0 = constraints.min_value(&initial.position);
    if constraints.len() > 0 && min0 < -CONSTRAINT_TOL {
        return Err(Error::Infeasible(min0));
    }
    // a start on a wall with outward velocity would leave immediately; reflect first
    let mut start = initial.clone();
    let values = constraints.values(&start.position);
    for j in 0..constraints.len() {
        let n = constraints.normal(j);
        if values[j].abs() <= CONSTRAINT_TOL && n.dot(&start.velocity) < 0.0 {
            start.velocity = wall_reflect(&start.velocity, &n)?;
        }
    }
    let system = Arc::new(QuadraticSystem::new(target, p, Vector::from_element(d, a))?);
    let guide = GuideField::Linear(system.guide().clone());
    let model: TargetModel = target.clone().into();
    let lambda0 = config.lambda0;
    let sys = Arc::clone(&system);
    Engine {
        target: &model,
        guide,
        constraints: Some(constraints),
        flow: FlowModel::Quadratic(system),
        config,
        name: "qbhs",
    }
    .run(&start, move |x, v, remaining, rng| {
        let flow = sys.solve(x, v)?;
        let bound = constant_thinning_bound(&flow)?;
        let hit = wall_hit_time(&flow, constraints)?;
        let tau_r = sample_refresh_time(lambda0, rng)?;
        let horizon = tau_r.min(hit.tau_bb).min(remaining);
        let tau_b = sample_bounce_thinning(|t| quadratic_rate(&flow, t), bound, horizon, rng)?;
        let wall = hit.wall_index.map_or(EventKind::End, EventKind::WallHit);
        Ok(earliest(&[
            (hit.tau_bb, wall),
            (tau_b, EventKind::Bounce),
            (tau_r, EventKind::Refresh),
        ]))
    })
}
