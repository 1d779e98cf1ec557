//! Moments of a truncated bivariate Gaussian by iterated adaptive Gauss–Kronrod quadrature.

use crate::error::{check_dim, Error, Result};
use crate::model::{ConstraintSet, GaussianTarget};

use super::MomentReport;

/// Absolute error target for every reported moment.
pub const QUADRATURE_TOL: f64 = 1e-6;

const BOX_HALF_WIDTH: f64 = 8.0;
const MAX_SEGMENTS: usize = 4000;
const MAX_DOUBLINGS: usize = 6;

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_18,
    0.140_653_259_715_525_92,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_83,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

type Segment<const N: usize> = (f64, f64, [f64; N], f64);

fn gk15<const N: usize, F: Fn(f64) -> [f64; N]>(f: &F, a: f64, b: f64) -> Segment<N> {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let mut kronrod = [0.0; N];
    let mut gauss = [0.0; N];
    for k in 0..8 {
        let pts: &[f64] = if k == 7 { &[0.0] } else { &[-1.0, 1.0] };
        for s in pts {
            let y = f(c + s * h * XGK[k]);
            for i in 0..N {
                kronrod[i] += WGK[k] * y[i];
                if k % 2 == 1 {
                    gauss[i] += WG[k / 2] * y[i];
                }
            }
        }
    }
    let mut err: f64 = 0.0;
    for i in 0..N {
        kronrod[i] *= h;
        err = err.max((kronrod[i] - gauss[i] * h).abs());
    }
    (a, b, kronrod, err)
}

/// Adaptive G7–K15 integration of a vector-valued integrand over `[a, b]`, starting from
/// `pieces` equal subintervals and bisecting the worst one until the summed error is below `tol`.
/// Returns the integral and the error estimate (max over components).
pub fn integrate_adaptive<const N: usize, F: Fn(f64) -> [f64; N]>(
    f: F,
    a: f64,
    b: f64,
    pieces: usize,
    tol: f64,
) -> Result<([f64; N], f64)> {
    if b <= a {
        return Ok(([0.0; N], 0.0));
    }
    let n = pieces.max(1);
    let w = (b - a) / n as f64;
    let mut segs: Vec<Segment<N>> = (0..n)
        .map(|k| gk15(&f, a + k as f64 * w, if k + 1 == n { b } else { a + (k + 1) as f64 * w }))
        .collect();
    loop {
        let total_err: f64 = segs.iter().map(|s| s.3).sum();
        if total_err <= tol {
            break;
        }
        if segs.len() >= MAX_SEGMENTS {
            return Err(Error::QuadratureNonConvergence {
                estimate: total_err,
                target: tol,
            });
        }
        let worst = (0..segs.len())
            .max_by(|&i, &j| segs[i].3.total_cmp(&segs[j].3))
            .expect("non-empty");
        let (lo, hi, _, _) = segs.swap_remove(worst);
        let mid = 0.5 * (lo + hi);
        segs.push(gk15(&f, lo, mid));
        segs.push(gk15(&f, mid, hi));
    }
    let mut total = [0.0; N];
    for s in &segs {
        for i in 0..N {
            total[i] += s.2[i];
        }
    }
    Ok((total, segs.iter().map(|s| s.3).sum()))
}

/// Feasible `x₂` interval at fixed `x₁`: intersection of the box and every half-plane.
fn slice(constraints: &ConstraintSet, x1: f64, lo2: f64, hi2: f64) -> (f64, f64) {
    let (mut lo, mut hi) = (lo2, hi2);
    let f = constraints.f();
    for j in 0..constraints.len() {
        let (f1, f2, h) = (f[(0, j)], f[(1, j)], constraints.h()[j]);
        let rest = f1 * x1 + h;
        if f2 > 0.0 {
            lo = lo.max(-rest / f2);
        } else if f2 < 0.0 {
            hi = hi.min(-rest / f2);
        } else if rest < 0.0 {
            return (0.0, 0.0);
        }
    }
    (lo, hi.max(lo))
}

/// `x₁` positions where the slice endpoints can change slope: pairwise intersections of
/// constraint lines and the horizontal box edges, plus vertical constraint lines.
fn breakpoints(constraints: &ConstraintSet, lo: [f64; 2], hi: [f64; 2]) -> Vec<f64> {
    let f = constraints.f();
    // lines a·x₁ + b·x₂ + c = 0
    let mut lines: Vec<[f64; 3]> = (0..constraints.len())
        .map(|j| [f[(0, j)], f[(1, j)], constraints.h()[j]])
        .collect();
    lines.push([0.0, 1.0, -lo[1]]);
    lines.push([0.0, 1.0, -hi[1]]);
    let mut pts = vec![lo[0], hi[0]];
    for (i, p) in lines.iter().enumerate() {
        if p[1] == 0.0 && p[0] != 0.0 {
            pts.push(-p[2] / p[0]);
        }
        for q in &lines[i + 1..] {
            let det = p[0] * q[1] - p[1] * q[0];
            if det.abs() > 1e-14 {
                pts.push((p[1] * q[2] - p[2] * q[1]) / det);
            }
        }
    }
    pts.retain(|x| x.is_finite() && *x >= lo[0] && *x <= hi[0]);
    pts.sort_by(f64::total_cmp);
    pts.dedup_by(|a, b| (*a - *b).abs() < 1e-14);
    pts
}

fn moments_at(target: &GaussianTarget, constraints: &ConstraintSet, pieces: usize) -> Result<[f64; 5]> {
    let mu = target.mean();
    let q = target.precision();
    let sd = [target.covariance()[(0, 0)].sqrt(), target.covariance()[(1, 1)].sqrt()];
    let lo = [mu[0] - BOX_HALF_WIDTH * sd[0], mu[1] - BOX_HALF_WIDTH * sd[1]];
    let hi = [mu[0] + BOX_HALF_WIDTH * sd[0], mu[1] + BOX_HALF_WIDTH * sd[1]];
    let norm = 1.0 / (2.0 * std::f64::consts::PI * target.covariance().determinant().sqrt());
    let inner_tol = 1e-14;
    let density = |d1: f64, d2: f64| {
        norm * (-0.5 * (q[(0, 0)] * d1 * d1 + 2.0 * q[(0, 1)] * d1 * d2 + q[(1, 1)] * d2 * d2)).exp()
    };
    // integrand components: 1, d₁, d₂, d₁², d₂² with dᵢ = xᵢ − μᵢ
    let outer = |x1: f64| -> [f64; 5] {
        let (a, b) = slice(constraints, x1, lo[1], hi[1]);
        let d1 = x1 - mu[0];
        let inner = integrate_adaptive(
            |x2: f64| {
                let d2 = x2 - mu[1];
                let p = density(d1, d2);
                [p, p * d2, p * d2 * d2]
            },
            a,
            b,
            pieces,
            inner_tol,
        );
        match inner {
            Ok(([m0, m1, m2], _)) => [m0, d1 * m0, m1, d1 * d1 * m0, m2],
            Err(_) => [f64::NAN; 5],
        }
    };
    let cuts = breakpoints(constraints, lo, hi);
    let mut total = [0.0; 5];
    for w in cuts.windows(2) {
        let (part, _) = integrate_adaptive(outer, w[0], w[1], pieces, 1e-12)?;
        for i in 0..5 {
            total[i] += part[i];
        }
    }
    if total.iter().any(|t| !t.is_finite()) {
        return Err(Error::QuadratureNonConvergence {
            estimate: f64::INFINITY,
            target: QUADRATURE_TOL,
        });
    }
    if total[0] <= 0.0 {
        return Err(Error::InvalidParameter {
            name: "constraints",
            reason: "feasible region carries no probability mass inside the box".into(),
        });
    }
    let z = total[0];
    let (m1, m2) = (total[1] / z, total[2] / z);
    Ok([z, mu[0] + m1, mu[1] + m2, total[3] / z - m1 * m1, total[4] / z - m2 * m2])
}

/// Means and variances of `N(μ, Σ)` restricted to `Fᵀx + h ≥ 0`, for `d = 2`.
///
/// Integrates over the box `μ ± 8σ` cut by the constraints. The computation is repeated with
/// `resolution` and `2·resolution` initial subintervals (doubling further if needed) until
/// every moment agrees to [`QUADRATURE_TOL`].
pub fn quadrature_truth_truncated_mvn(
    target: &GaussianTarget,
    constraints: &ConstraintSet,
    resolution: usize,
) -> Result<MomentReport> {
    check_dim(2, target.dim())?;
    check_dim(2, constraints.dim())?;
    let mut pieces = resolution.max(1);
    let mut prev = moments_at(target, constraints, pieces)?;
    let mut diff = f64::INFINITY;
    for _ in 0..MAX_DOUBLINGS {
        pieces *= 2;
        let next = moments_at(target, constraints, pieces)?;
        diff = (1..5).map(|i| (next[i] - prev[i]).abs()).fold(0.0, f64::max);
        prev = next;
        if diff <= QUADRATURE_TOL {
            return Ok(MomentReport {
                means: vec![prev[1], prev[2]],
                variances: vec![prev[3], prev[4]],
                reference: None,
            });
        }
    }
    Err(Error::QuadratureNonConvergence {
        estimate: diff,
        target: QUADRATURE_TOL,
    })
}
