//! Event clocks: bounce times (inverse transform and thinning), refreshment times,
//! and deterministic wall-hit times.
//!
//! Bounce times are first arrivals of an inhomogeneous Poisson process with rate
//! `λ̄(t) = (⟨g(x_t), v_t⟩)₊`. Where the cumulative hazard is available in closed form
//! it is inverted directly against an `Exp(1)` budget; otherwise the rate is dominated
//! by a constant and thinned.

use std::f64::consts::PI;

use rand::distr::Open01;
use rand::Rng;
use rand_distr::Exp1;

use crate::error::{Error, Result};
use crate::flows::{QuadraticFlow, ScalarFlow, UnivariateFlow, UnivariateRegime};
use crate::model::{ConstraintSet, Matrix, Vector, CONSTRAINT_TOL};

/// Roots closer than this to the segment start belong to the wall just left.
pub const ROOT_EXCLUSION: f64 = 1e-12;

/// Relative slack allowed before a rate above the thinning bound is reported.
pub const BOUND_SLACK: f64 = 1e-9;

/// Draws `Exp(1)`, the energy budget consumed by the bounce clock.
pub fn exp_budget<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    let u: f64 = rng.sample(Open01);
    -u.ln()
}

pub fn sample_refresh_time<R: Rng + ?Sized>(lambda0: f64, rng: &mut R) -> Result<f64> {
    if !(lambda0 >= 0.0) || !lambda0.is_finite() {
        return Err(Error::InvalidParameter {
            name: "lambda0",
            reason: format!("refreshment rate must be finite and non-negative, got {lambda0}"),
        });
    }
    if lambda0 == 0.0 {
        return Ok(f64::INFINITY);
    }
    let e: f64 = rng.sample(Exp1);
    Ok(e / lambda0)
}

/// Root of an increasing function on `[lo, hi]` by bisection, refined to the floating-point limit.
pub(crate) fn bisect_increasing<F: Fn(f64) -> f64>(f: F, mut lo: f64, mut hi: f64) -> f64 {
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if f(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-15 * hi.abs().max(1.0) {
            break;
        }
    }
    0.5 * (lo + hi)
}

/// Grows `hi` geometrically from `lo` until `f(hi) ≥ 0`; `None` if it never does.
fn bracket_up<F: Fn(f64) -> f64>(f: &F, lo: f64) -> Option<f64> {
    let mut step = 1.0;
    for _ in 0..200 {
        let hi = lo + step;
        let val = f(hi);
        if !val.is_finite() {
            return Some(hi);
        }
        if val >= 0.0 {
            return Some(hi);
        }
        step *= 2.0;
    }
    None
}

/// Bounce time for the standard normal target with `g(x) = a·x`, given `u ∈ (0, 1]`.
///
/// The rate is `(a x_t ẋ_t)₊`. In the oscillating regime whole periods are skipped
/// (each consumes `|a|r²/2` of the budget) and the remainder is inverted within one
/// period, where the rate changes sign only at two known zeros.
pub fn bounce_time_univariate(flow: &UnivariateFlow, u: f64) -> f64 {
    let budget = -u.ln();
    let a = flow.a;
    match flow.regime {
        UnivariateRegime::Hyperbolic => {
            if flow.c1 == 0.0 {
                return f64::INFINITY;
            }
            let w = flow.omega;
            let energy = |t: f64| {
                0.5 * a
                    * (flow.c1 * flow.c1 * (2.0 * w * t).exp()
                        + flow.c2 * flow.c2 * (-2.0 * w * t).exp())
            };
            let t0 = if flow.c2 == 0.0 {
                f64::NEG_INFINITY
            } else {
                ((flow.c2 * flow.c2) / (flow.c1 * flow.c1)).ln() / (4.0 * w)
            };
            let start = t0.max(0.0);
            let goal = budget + energy(start);
            let f = |t: f64| energy(t) - goal;
            match bracket_up(&f, start) {
                Some(hi) => bisect_increasing(f, start, hi),
                None => f64::INFINITY,
            }
        }
        UnivariateRegime::Linear => {
            if flow.c1 == 0.0 {
                return f64::INFINITY;
            }
            let t0 = -flow.c2 / flow.c1;
            let start = t0.max(0.0);
            t0 + (2.0 * budget / (flow.c1 * flow.c1) + (start - t0).powi(2)).sqrt()
        }
        UnivariateRegime::Trigonometric => {
            let (r, c) = flow.polar();
            let per_period = 0.5 * a.abs() * r * r;
            if per_period == 0.0 {
                return f64::INFINITY;
            }
            let w = flow.omega;
            let n = (budget / per_period).floor();
            let leftover = (budget - n * per_period).clamp(0.0, per_period);
            // h(t) = −(a r² w / 2) sin(2c + 2wt) has antiderivative G(t) = (a r² / 4) cos(2c + 2wt)
            let g = |t: f64| 0.25 * a * r * r * (2.0 * c + 2.0 * w * t).cos();
            let start = n * PI / w;
            let end = (n + 1.0) * PI / w;
            let k1 = (2.0 * n + 2.0 * c / PI).ceil();
            let t1 = ((PI * k1 - 2.0 * c) / (2.0 * w)).max(start);
            let t2 = (t1 + PI / (2.0 * w)).min(end);
            let head = g(t1) - g(start);
            let (lo, hi, base, need) = if head <= 0.0 {
                (t1, t2, t1, leftover)
            } else if leftover <= head {
                (start, t1, start, leftover)
            } else {
                (t2, end, t2, leftover - head)
            };
            let gb = g(base);
            bisect_increasing(|t| g(t) - gb - need, lo, hi)
        }
    }
}

/// Closed-form `∫₀ᵗ (a x_s ẋ_s)₊ ds` for a univariate flow.
pub fn univariate_cumulative_hazard(flow: &UnivariateFlow, t: f64) -> f64 {
    let a = flow.a;
    match flow.regime {
        UnivariateRegime::Hyperbolic => {
            if flow.c1 == 0.0 {
                return 0.0;
            }
            let w = flow.omega;
            let energy = |s: f64| {
                0.5 * a
                    * (flow.c1 * flow.c1 * (2.0 * w * s).exp()
                        + flow.c2 * flow.c2 * (-2.0 * w * s).exp())
            };
            let t0 = if flow.c2 == 0.0 {
                f64::NEG_INFINITY
            } else {
                ((flow.c2 * flow.c2) / (flow.c1 * flow.c1)).ln() / (4.0 * w)
            };
            let start = t0.max(0.0);
            if t <= start {
                0.0
            } else {
                energy(t) - energy(start)
            }
        }
        UnivariateRegime::Linear => {
            let (c1, c2) = (flow.c1, flow.c2);
            if c1 == 0.0 {
                return 0.0;
            }
            let start = (-c2 / c1).max(0.0);
            if t <= start {
                0.0
            } else {
                let prim = |s: f64| 0.5 * c1 * c1 * s * s + c1 * c2 * s;
                prim(t) - prim(start)
            }
        }
        UnivariateRegime::Trigonometric => {
            let (r, c) = flow.polar();
            let per_period = 0.5 * a.abs() * r * r;
            if per_period == 0.0 {
                return 0.0;
            }
            let w = flow.omega;
            let period = PI / w;
            let m = (t / period).floor();
            let g = |s: f64| 0.25 * a * r * r * (2.0 * c + 2.0 * w * s).cos();
            let mut total = m * per_period;
            let mut cur = m * period;
            // zeros of sin(2c + 2ws) are spaced by half a period
            let mut k = ((2.0 * w * cur + 2.0 * c) / PI).ceil();
            loop {
                let z = (PI * k - 2.0 * c) / (2.0 * w);
                let next = z.min(t);
                if next > cur {
                    total += (g(next) - g(cur)).max(0.0);
                    cur = next;
                }
                if z >= t {
                    break;
                }
                k += 1.0;
            }
            total
        }
    }
}

/// First `t` with `∫₀ᵗ (α + βs)₊ ds = budget`.
pub fn linear_rate_time(alpha: f64, beta: f64, budget: f64) -> f64 {
    if beta == 0.0 {
        return if alpha > 0.0 { budget / alpha } else { f64::INFINITY };
    }
    if beta > 0.0 {
        if alpha >= 0.0 {
            2.0 * budget / (alpha + (alpha * alpha + 2.0 * beta * budget).sqrt())
        } else {
            -alpha / beta + (2.0 * budget / beta).sqrt()
        }
    } else {
        if alpha <= 0.0 {
            return f64::INFINITY;
        }
        let disc = alpha * alpha + 2.0 * beta * budget;
        if disc < 0.0 {
            f64::INFINITY
        } else {
            2.0 * budget / (alpha + disc.sqrt())
        }
    }
}

/// Bounce time for rate `(α x_t ẋ_t)₊` along a scalar flow `ẍ = kx + b`.
///
/// The rate is the positive part of `d/dt (α x²/2)`, so the hazard over any interval on
/// which `x` and `ẋ` keep their signs is a plain difference of `α x²/2`.
pub fn scalar_flow_bounce_time(flow: &ScalarFlow, alpha: f64, budget: f64) -> f64 {
    if alpha == 0.0 {
        return f64::INFINITY;
    }
    let energy = |t: f64| 0.5 * alpha * flow.evaluate(t).0.powi(2);
    let mut spent = 0.0;
    let mut cur = 0.0;

    let walk = |points: &[f64], cur: &mut f64, spent: &mut f64| -> Option<f64> {
        for &p in points {
            if p <= *cur {
                continue;
            }
            let (e0, e1) = (energy(*cur), energy(p));
            let gain = e1 - e0;
            if gain > 0.0 && *spent + gain >= budget {
                let need = budget - *spent;
                return Some(bisect_increasing(|t| energy(t) - e0 - need, *cur, p));
            }
            *spent += gain.max(0.0);
            *cur = p;
        }
        None
    };

    if flow.k < 0.0 {
        let w = (-flow.k).sqrt();
        let period = 2.0 * PI / w;
        let c = flow.center();
        let z0 = flow.x0 - c;
        let amp = z0.hypot(flow.v0 / w);
        let theta0 = (-flow.v0 / w).atan2(z0);
        // phases of ωt + θ₀ at which x or ẋ vanish
        let mut phases = vec![0.0, PI];
        if amp > 0.0 && c.abs() <= amp {
            let psi = (-c / amp).acos();
            phases.push(psi);
            phases.push(2.0 * PI - psi);
        }
        let window = |from: f64| -> Vec<f64> {
            let mut pts: Vec<f64> = phases
                .iter()
                .map(|&ph| {
                    let t = (ph - theta0 - w * from).rem_euclid(2.0 * PI) / w;
                    from + t
                })
                .collect();
            pts.push(from + period);
            pts.sort_by(|a, b| a.partial_cmp(b).unwrap());
            pts
        };
        let one = window(0.0);
        let mut probe_cur = 0.0;
        let mut probe_spent = 0.0;
        if let Some(t) = walk(&one, &mut probe_cur, &mut probe_spent) {
            return t;
        }
        let per_period = probe_spent;
        if per_period <= 0.0 {
            return f64::INFINITY;
        }
        let skipped = ((budget - per_period) / per_period).floor().max(0.0);
        spent = per_period + skipped * per_period;
        cur = period * (1.0 + skipped);
        for _ in 0..4 {
            let pts = window(cur);
            if let Some(t) = walk(&pts, &mut cur, &mut spent) {
                return t;
            }
        }
        return f64::INFINITY;
    }

    let mut points = Vec::new();
    if flow.k > 0.0 {
        let w = flow.k.sqrt();
        let c = flow.center();
        let z0 = flow.x0 - c;
        let p = 0.5 * (z0 + flow.v0 / w);
        let q = 0.5 * (z0 - flow.v0 / w);
        if p != 0.0 && q / p > 0.0 {
            points.push((q / p).ln() / (2.0 * w));
        }
        // x = c + pX + q/X with X = e^{wt}
        for root in quadratic_roots(p, c, q) {
            if root > 0.0 {
                points.push(root.ln() / w);
            }
        }
    } else {
        if flow.b != 0.0 {
            points.push(-flow.v0 / flow.b);
        }
        points.extend(quadratic_roots(0.5 * flow.b, flow.v0, flow.x0));
    }
    points.retain(|t| t.is_finite() && *t > 0.0);
    points.sort_by(|a, b| a.partial_cmp(b).unwrap());
    if let Some(t) = walk(&points, &mut cur, &mut spent) {
        return t;
    }
    // beyond the last critical point the energy is monotone
    let e0 = energy(cur);
    let need = budget - spent;
    let f = |t: f64| energy(t) - e0 - need;
    if energy(cur + 1.0) <= e0 {
        return f64::INFINITY;
    }
    match bracket_up(&f, cur) {
        Some(hi) => bisect_increasing(f, cur, hi),
        None => f64::INFINITY,
    }
}

fn quadratic_roots(a: f64, b: f64, c: f64) -> Vec<f64> {
    if a == 0.0 {
        return if b != 0.0 { vec![-c / b] } else { vec![] };
    }
    let disc = b * b - 4.0 * a * c;
    if disc < 0.0 {
        return vec![];
    }
    let s = disc.sqrt();
    let q = -0.5 * (b + b.signum() * s);
    if q == 0.0 {
        return vec![0.0];
    }
    vec![q / a, c / q]
}

/// Constant `Λ` dominating the bounce rate along a quadratic flow.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThinningBound(pub f64);

/// Spectral norm of `m` by power iteration on `mᵀm`, with an SVD fallback if it stalls.
pub fn spectral_norm(m: &Matrix) -> f64 {
    let mtm = m.tr_mul(m);
    if mtm.amax() == 0.0 {
        return 0.0;
    }
    let d = mtm.nrows();
    let mut x = Vector::from_fn(d, |i, _| 1.0 + 0.1 * i as f64);
    x /= x.norm();
    let mut estimate = 0.0;
    for _ in 0..10_000 {
        let y = &mtm * &x;
        let next = y.norm();
        if next == 0.0 {
            break;
        }
        x = y / next;
        if (next - estimate).abs() <= 1e-12 * next {
            return next.sqrt();
        }
        estimate = next;
    }
    m.clone().svd(false, false).singular_values.max()
}

/// `Λ = √(Σ_k (B_k + 2√B_k |o_k| + o_k²)) · ‖P⁻ᵀAᵀP⁻¹‖₂ · √(Σ_k (−a_k) B_k)`.
pub fn constant_thinning_bound(flow: &QuadraticFlow) -> Result<ThinningBound> {
    let sys = &flow.system;
    if let Some(k) = sys.a_diag().iter().position(|&a| a > 0.0) {
        return Err(Error::InvalidParameter {
            name: "A_d",
            reason: format!("constant thinning bound needs a_k < 0, a_{k} = {}", sys.a_diag()[k]),
        });
    }
    let m = sys.p_inv().transpose() * sys.guide().transpose() * sys.p_inv();
    let norm = spectral_norm(&m);
    if norm == 0.0 {
        return Ok(ThinningBound(0.0));
    }
    let mut pos = 0.0;
    let mut vel = 0.0;
    for k in 0..sys.dim() {
        let (c1, c2) = (flow.c1[k].abs(), flow.c2[k].abs());
        let b = c1.max(c2).powi(2) + c1 * c2;
        let o = sys.offset()[k].abs();
        pos += b + 2.0 * b.sqrt() * o + o * o;
        vel += -sys.a_diag()[k] * b;
    }
    Ok(ThinningBound(pos.sqrt() * norm * vel.sqrt()))
}

/// Bounce rate `(⟨A x_t, v_t⟩)₊` along a quadratic flow.
pub fn quadratic_rate(flow: &QuadraticFlow, t: f64) -> f64 {
    let (x, v) = flow.evaluate(t);
    (flow.system.guide() * x).dot(&v).max(0.0)
}

/// First accepted candidate of a rate-`Λ` homogeneous process thinned down to `rate`.
/// Returns `+∞` when nothing is accepted before `horizon`.
pub fn sample_bounce_thinning<F, R>(
    mut rate: F,
    bound: ThinningBound,
    horizon: f64,
    rng: &mut R,
) -> Result<f64>
where
    F: FnMut(f64) -> f64,
    R: Rng + ?Sized,
{
    let lam = bound.0;
    if lam == 0.0 {
        return Ok(f64::INFINITY);
    }
    let horizon = horizon.min(1e6 / lam);
    let mut t = 0.0;
    loop {
        let e: f64 = rng.sample(Exp1);
        t += e / lam;
        if t > horizon {
            return Ok(f64::INFINITY);
        }
        let r = rate(t);
        if r > lam * (1.0 + BOUND_SLACK) {
            return Err(Error::BoundViolation { rate: r, bound: lam });
        }
        let u: f64 = rng.random();
        if u * lam < r {
            return Ok(t);
        }
    }
}

/// Geometry of one wall along an oscillator flow: its value is `u cos(ωt + φ) + q`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WallGeometry {
    pub u: f64,
    pub phi: f64,
    pub q: f64,
    pub reachable: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WallHit {
    pub tau_bb: f64,
    pub wall_index: Option<usize>,
    pub walls: Vec<WallGeometry>,
    /// `√(−a)`.
    pub omega: f64,
}

impl WallHit {
    pub fn wall_value(&self, j: usize, t: f64) -> f64 {
        let w = &self.walls[j];
        w.u * (self.omega * t + w.phi).cos() + w.q
    }
}

/// First time the flow reaches a wall, for flows with `a₁ = … = a_d = a < 0`.
///
/// Only the root family on which the wall value is decreasing is a hit; the other family
/// is where the trajectory re-enters, including the wall just reflected from.
pub fn wall_hit_time(flow: &QuadraticFlow, constraints: &ConstraintSet) -> Result<WallHit> {
    let sys = &flow.system;
    let a = sys.a_diag()[0];
    if !(a < 0.0) || sys.a_diag().iter().any(|&ak| ak != a) {
        return Err(Error::InvalidParameter {
            name: "A_d",
            reason: "wall-hit times need a₁ = … = a_d = a < 0".into(),
        });
    }
    crate::error::check_dim(sys.dim(), constraints.dim())?;
    let omega = (-a).sqrt();
    if constraints.is_empty() {
        return Ok(WallHit {
            tau_bb: f64::INFINITY,
            wall_index: None,
            walls: vec![],
            omega,
        });
    }
    let x0 = flow.evaluate(0.0).0;
    let min0 = constraints.min_value(&x0);
    if min0 < -CONSTRAINT_TOL {
        return Err(Error::Infeasible(min0));
    }
    let k = sys.p_inv().transpose() * constraints.f();
    let period = 2.0 * PI / omega;
    let mut walls = Vec::with_capacity(constraints.len());
    let mut best = (f64::INFINITY, None);
    for j in 0..constraints.len() {
        let kj = k.column(j);
        let (k1, k2) = (kj.dot(&flow.c1), kj.dot(&flow.c2));
        let u = k1.hypot(k2);
        let phi = (-k2).atan2(k1);
        let q = -kj.dot(sys.offset()) + constraints.h()[j];
        let reachable = u > q.abs();
        walls.push(WallGeometry { u, phi, q, reachable });
        if !reachable {
            continue;
        }
        let theta = (-q / u).clamp(-1.0, 1.0).acos();
        let mut t = ((theta - phi) / omega).rem_euclid(period);
        if t <= ROOT_EXCLUSION {
            t += period;
        }
        if t < best.0 {
            best = (t, Some(j));
        }
    }
    Ok(WallHit {
        tau_bb: best.0,
        wall_index: best.1,
        walls,
        omega,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flows::QuadraticSystem;
    use crate::model::{chain_rng, GaussianTarget};
    use std::f64::consts::FRAC_PI_2;
    use std::sync::Arc;

    fn v(xs: &[f64]) -> Vector {
        Vector::from_column_slice(xs)
    }

    #[test]
    fn refresh_times() {
        let mut rng = chain_rng(1);
        assert_eq!(sample_refresh_time(0.0, &mut rng).unwrap(), f64::INFINITY);
        assert!(sample_refresh_time(-1.0, &mut rng).is_err());
        let n = 100_000;
        let mean = (0..n).map(|_| sample_refresh_time(2.0, &mut rng).unwrap()).sum::<f64>() / n as f64;
        assert!((mean - 0.5).abs() < 0.01, "{mean}");
        assert_eq!(
            sample_refresh_time(3.0, &mut chain_rng(5)).unwrap(),
            sample_refresh_time(3.0, &mut chain_rng(5)).unwrap()
        );
    }

    #[test]
    fn linear_regime_closed_form() {
        let flow = UnivariateFlow::solve(1.0, 0.0, 1.0);
        for &u in &[0.9, 0.5, 0.01] {
            let t = bounce_time_univariate(&flow, u);
            assert!((t - (-2.0 * f64::ln(u)).sqrt()).abs() < 1e-12);
        }
        assert_eq!(bounce_time_univariate(&UnivariateFlow::solve(1.0, 2.0, 0.0), 0.5), f64::INFINITY);
    }

    #[test]
    fn degenerate_oscillators_never_bounce() {
        assert_eq!(bounce_time_univariate(&UnivariateFlow::solve(-1.0, 0.0, 0.0), 0.5), f64::INFINITY);
        assert_eq!(bounce_time_univariate(&UnivariateFlow::solve(0.0, 1.0, 0.3), 0.5), f64::INFINITY);
    }

    #[test]
    fn zero_budget_stops_at_first_positive_rate() {
        // a = −1 from (1, 0): rate vanishes on the first quarter period
        let flow = UnivariateFlow::solve(-1.0, 1.0, 0.0);
        let t = bounce_time_univariate(&flow, 1.0);
        assert!(t.abs() < 1e-12, "{t}");
        let t = bounce_time_univariate(&flow, 1.0 - 1e-12);
        assert!(t < 1e-5, "{t}");
        // a = 1 moving towards the origin: zero rate until the crossing at t₀ = 2
        let flow = UnivariateFlow::solve(1.0, -2.0, 1.0);
        let t = bounce_time_univariate(&flow, 1.0);
        assert!((t - 2.0).abs() < 1e-12);
    }

    #[test]
    fn cumulative_hazard_inverts_bounce_time() {
        let mut rng = chain_rng(77);
        for &a in &[-3.0, -1.0, 0.5, 1.0, 2.0] {
            for _ in 0..200 {
                let x0: f64 = rng.random_range(-2.0..2.0);
                let v0: f64 = rng.random_range(-2.0..2.0);
                let u: f64 = rng.sample(Open01);
                let flow = UnivariateFlow::solve(a, x0, v0);
                let t = bounce_time_univariate(&flow, u);
                if t.is_finite() {
                    let h = univariate_cumulative_hazard(&flow, t);
                    assert!((h + u.ln()).abs() < 1e-9 * (1.0 - u.ln()), "a={a} {h} {}", -u.ln());
                }
            }
        }
    }

    #[test]
    fn scalar_engine_matches_univariate_inversion() {
        let mut rng = chain_rng(31);
        for &a in &[-3.0, -1.0, 0.5, 1.0, 2.0] {
            for _ in 0..200 {
                let x0: f64 = rng.random_range(-2.0..2.0);
                let v0: f64 = rng.random_range(-2.0..2.0);
                let u: f64 = rng.sample(Open01);
                let t1 = bounce_time_univariate(&UnivariateFlow::solve(a, x0, v0), u);
                let t2 = scalar_flow_bounce_time(&ScalarFlow::new(a - 1.0, 0.0, x0, v0), a, -u.ln());
                if t1.is_finite() || t2.is_finite() {
                    assert!((t1 - t2).abs() < 1e-8 * t1.max(1.0), "a={a} x0={x0} v0={v0} {t1} {t2}");
                }
            }
        }
    }

    #[test]
    fn linear_rate_times() {
        assert_eq!(linear_rate_time(2.0, 0.0, 1.0), 0.5);
        assert_eq!(linear_rate_time(-1.0, 0.0, 1.0), f64::INFINITY);
        // (−1 + t)₊: zero until 1, then t²/2 reaches 2 at t = 3
        assert!((linear_rate_time(-1.0, 1.0, 2.0) - 3.0).abs() < 1e-14);
        // (1 − t)₊ carries total mass 1/2
        assert_eq!(linear_rate_time(1.0, -1.0, 0.6), f64::INFINITY);
        assert!((linear_rate_time(1.0, -1.0, 0.375) - 0.5).abs() < 1e-14);
        assert!((linear_rate_time(1.0, 2.0, 2.0) - 1.0).abs() < 1e-14);
    }

    fn oscillator(mu: &[f64], a: f64, guide: f64) -> Arc<QuadraticSystem> {
        let d = mu.len();
        let target = GaussianTarget::new(v(mu), Matrix::identity(d, d)).unwrap();
        let _ = guide;
        Arc::new(QuadraticSystem::new(&target, Matrix::identity(d, d), Vector::from_element(d, a)).unwrap())
    }

    #[test]
    fn thinning_bound_examples() {
        let sys = oscillator(&[0.0, 0.0], -1.0, 0.0);
        let flow = sys.solve(&v(&[1.0, 0.5]), &v(&[0.2, -1.0])).unwrap();
        assert_eq!(constant_thinning_bound(&flow).unwrap().0, 0.0);

        // d = 1, a = −1, A = κ: Λ = |κ| for C = (1, 0)
        let kappa = 0.7;
        let target = GaussianTarget::standard(1).unwrap();
        let sys = Arc::new(QuadraticSystem::from_guide(&target, &Matrix::from_element(1, 1, kappa)).unwrap());
        let a = sys.a_diag()[0];
        let flow = sys.solve(&v(&[1.0]), &v(&[0.0])).unwrap();
        let lam = constant_thinning_bound(&flow).unwrap().0;
        let b: f64 = 1.0;
        let expected = b.sqrt() * kappa * ((-a) * b).sqrt();
        assert!((lam - expected).abs() < 1e-12, "{lam} {expected}");
        for i in 0..10_000 {
            assert!(quadratic_rate(&flow, i as f64 * 0.002) <= lam);
        }

        let target = GaussianTarget::standard(1).unwrap();
        let sys = Arc::new(QuadraticSystem::new(&target, Matrix::identity(1, 1), v(&[0.5])).unwrap());
        let flow = sys.solve(&v(&[1.0]), &v(&[0.0])).unwrap();
        assert!(constant_thinning_bound(&flow).is_err());
    }

    #[test]
    fn spectral_norm_examples() {
        let m = Matrix::from_row_slice(2, 2, &[3.0, 0.0, 0.0, -4.0]);
        assert!((spectral_norm(&m) - 4.0).abs() < 1e-9);
        let m = Matrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0]);
        let svd = m.clone().svd(false, false).singular_values.max();
        assert!((spectral_norm(&m) - svd).abs() < 1e-9 * svd);
    }

    #[test]
    fn thinning_zero_and_constant_rate() {
        let mut rng = chain_rng(3);
        assert_eq!(
            sample_bounce_thinning(|_| 0.0, ThinningBound(0.0), f64::INFINITY, &mut rng).unwrap(),
            f64::INFINITY
        );
        let n = 100_000;
        let lam = 2.5;
        let mean = (0..n)
            .map(|_| sample_bounce_thinning(|_| lam, ThinningBound(lam), f64::INFINITY, &mut rng).unwrap())
            .sum::<f64>()
            / n as f64;
        assert!((mean * lam - 1.0).abs() < 0.01, "{mean}");
        assert!(matches!(
            sample_bounce_thinning(|_| 3.0, ThinningBound(1.0), f64::INFINITY, &mut rng),
            Err(Error::BoundViolation { .. })
        ));
        assert_eq!(
            sample_bounce_thinning(|_| 1.0, ThinningBound(1.0), 1e-9, &mut chain_rng(4)).unwrap(),
            f64::INFINITY
        );
    }

    #[test]
    fn wall_hit_cosine_root() {
        let sys = oscillator(&[0.0], -1.0, 0.0);
        let flow = sys.solve(&v(&[1.0]), &v(&[0.0])).unwrap();
        let walls = ConstraintSet::from_columns(1, &[vec![1.0]], &[0.0]).unwrap();
        let hit = wall_hit_time(&flow, &walls).unwrap();
        assert!((hit.tau_bb - FRAC_PI_2).abs() < 1e-12);
        assert_eq!(hit.wall_index, Some(0));
        assert!(hit.wall_value(0, hit.tau_bb).abs() < 1e-12);
    }

    #[test]
    fn wall_hit_unreachable_and_empty() {
        let sys = oscillator(&[0.0], -1.0, 0.0);
        let flow = sys.solve(&v(&[1.0]), &v(&[0.0])).unwrap();
        // x ≥ −5 never binds for an orbit of amplitude 1
        let walls = ConstraintSet::from_columns(1, &[vec![1.0]], &[5.0]).unwrap();
        let hit = wall_hit_time(&flow, &walls).unwrap();
        assert_eq!(hit.tau_bb, f64::INFINITY);
        assert_eq!(hit.wall_index, None);
        let hit = wall_hit_time(&flow, &ConstraintSet::empty(1)).unwrap();
        assert_eq!(hit.tau_bb, f64::INFINITY);
        let walls = ConstraintSet::from_columns(1, &[vec![1.0]], &[-2.0]).unwrap();
        assert!(matches!(wall_hit_time(&flow, &walls), Err(Error::Infeasible(_))));
    }

    #[test]
    fn wall_hit_after_reflection_skips_departed_wall() {
        // start on the wall x = 0 moving inward
        let sys = oscillator(&[0.0], -1.0, 0.0);
        let flow = sys.solve(&v(&[0.0]), &v(&[1.0])).unwrap();
        let walls = ConstraintSet::from_columns(1, &[vec![1.0]], &[0.0]).unwrap();
        let hit = wall_hit_time(&flow, &walls).unwrap();
        assert!((hit.tau_bb - PI).abs() < 1e-12, "{}", hit.tau_bb);
    }
}
