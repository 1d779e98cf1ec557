use rand::distr::Open01;
use rand::Rng;
use statrs::function::erf::{erfc, erfc_inv};

use crate::error::{check_dim, Error, Result};
use crate::model::{chain_rng, ChainRng, ConstraintSet, GaussianTarget, Vector, CONSTRAINT_TOL};

use super::invalid;

/// Standardized bound beyond which the erfc inversion loses accuracy and rejection takes over.
const TAIL_SWITCH: f64 = 8.0;

/// One draw from `N(mean, sd²)` restricted to `[lo, hi]`; either end may be infinite.
pub fn sample_truncated_normal<R: Rng + ?Sized>(mean: f64, sd: f64, lo: f64, hi: f64, rng: &mut R) -> Result<f64> {
    if !(sd > 0.0 && sd.is_finite()) {
        return Err(invalid("sd", format!("must be positive, got {sd}")));
    }
    if lo.is_nan() || hi.is_nan() || lo >= hi {
        return Err(Error::Empty("truncation interval"));
    }
    let a = (lo - mean) / sd;
    let b = (hi - mean) / sd;
    // work in the upper tail so erfc keeps its relative precision
    let z = if a >= 0.0 {
        std_truncated(a, b, rng)
    } else if b <= 0.0 {
        -std_truncated(-b, -a, rng)
    } else {
        std_truncated_straddling(a, b, rng)
    };
    Ok((mean + sd * z).clamp(lo, hi))
}

/// Survival function `P(Z > z)`.
fn upper(z: f64) -> f64 {
    0.5 * erfc(z / std::f64::consts::SQRT_2)
}

fn upper_inv(p: f64) -> f64 {
    std::f64::consts::SQRT_2 * erfc_inv(2.0 * p)
}

/// `0 ≤ a < b`.
fn std_truncated<R: Rng + ?Sized>(a: f64, b: f64, rng: &mut R) -> f64 {
    if a > TAIL_SWITCH {
        return robert_tail(a, b, rng);
    }
    let (pa, pb) = (upper(a), upper(b));
    let u: f64 = rng.sample(Open01);
    let p = pb + u * (pa - pb);
    upper_inv(p).clamp(a, b)
}

/// `a < 0 < b`: inverse CDF on the whole interval is well conditioned.
fn std_truncated_straddling<R: Rng + ?Sized>(a: f64, b: f64, rng: &mut R) -> f64 {
    let (pa, pb) = (upper(a), upper(b));
    let u: f64 = rng.sample(Open01);
    let p = pb + u * (pa - pb);
    upper_inv(p).clamp(a, b)
}

/// Exponential rejection for a far tail (Robert, 1995).
fn robert_tail<R: Rng + ?Sized>(a: f64, b: f64, rng: &mut R) -> f64 {
    let alpha = 0.5 * (a + (a * a + 4.0).sqrt());
    loop {
        let u: f64 = rng.sample(Open01);
        let z = a - u.ln() / alpha;
        if z > b {
            continue;
        }
        let w: f64 = rng.sample(Open01);
        if w.ln() <= -0.5 * (z - alpha).powi(2) {
            return z;
        }
    }
}

/// Feasible interval of coordinate `i` given the rest of `x`, for constraints `Fᵀx + h ≥ 0`.
fn coordinate_interval(constraints: &ConstraintSet, x: &Vector, i: usize) -> (f64, f64) {
    let (mut lo, mut hi) = (f64::NEG_INFINITY, f64::INFINITY);
    let f = constraints.f();
    for j in 0..constraints.len() {
        let fij = f[(i, j)];
        let rest = f.column(j).dot(x) - fij * x[i] + constraints.h()[j];
        if fij > 0.0 {
            lo = lo.max(-rest / fij);
        } else if fij < 0.0 {
            hi = hi.min(-rest / fij);
        } else if rest < -CONSTRAINT_TOL {
            return (f64::INFINITY, f64::NEG_INFINITY);
        }
    }
    (lo, hi)
}

/// Systematic-scan Gibbs sampler for a Gaussian restricted to a polytope. Returns `n` sweeps.
pub fn run_gibbs_truncated_mvn(
    target: &GaussianTarget,
    constraints: &ConstraintSet,
    n: usize,
    seed: u64,
    initial: &Vector,
) -> Result<Vec<Vector>> {
    let d = target.dim();
    check_dim(d, initial.len())?;
    check_dim(d, constraints.dim())?;
    if !constraints.satisfied(initial) {
        return Err(Error::Infeasible(constraints.min_value(initial)));
    }
    let prec = target.precision();
    let mu = target.mean();
    let mut rng: ChainRng = chain_rng(seed);
    let mut x = initial.clone();
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        for i in 0..d {
            let q = prec[(i, i)];
            // E[xᵢ | x₋ᵢ] = μᵢ − Σ_{j≠i} Qᵢⱼ (xⱼ − μⱼ) / Qᵢᵢ
            let mut shift = 0.0;
            for j in (0..d).filter(|&j| j != i) {
                shift += prec[(i, j)] * (x[j] - mu[j]);
            }
            let (lo, hi) = coordinate_interval(constraints, &x, i);
            x[i] = sample_truncated_normal(mu[i] - shift / q, q.sqrt().recip(), lo, hi, &mut rng)?;
        }
        out.push(x.clone());
    }
    Ok(out)
}
