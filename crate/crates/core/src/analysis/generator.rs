//! Empirical check that the stationary average of the generator vanishes on test functions.

use std::f64::consts::FRAC_PI_2;

use crate::error::{Error, Result};
use crate::kernels::{bounce_deterministic, orthogonal_complement, BounceVariant};
use crate::model::{TargetModel, Vector};
use crate::samplers::Skeleton;

use super::{batch_means, discretize, BURN_IN_FRACTION};

pub const GENERATOR_BATCHES: usize = 50;

/// `coef · Πᵢ xᵢ^{pᵢ} · Πᵢ vᵢ^{qᵢ}`.
#[derive(Debug, Clone, PartialEq)]
pub struct Monomial {
    pub coef: f64,
    pub x_pow: Vec<u32>,
    pub v_pow: Vec<u32>,
}

impl Monomial {
    fn degree(&self) -> u32 {
        self.x_pow.iter().chain(&self.v_pow).sum()
    }

    fn x_part(&self, x: &Vector) -> f64 {
        self.x_pow.iter().enumerate().map(|(i, &p)| x[i].powi(p as i32)).product()
    }

    fn v_part(&self, v: &Vector) -> f64 {
        self.v_pow.iter().enumerate().map(|(i, &p)| v[i].powi(p as i32)).product()
    }

    fn eval(&self, x: &Vector, v: &Vector) -> f64 {
        self.coef * self.x_part(x) * self.v_part(v)
    }

    fn is_velocity_free(&self) -> bool {
        self.v_pow.iter().all(|&q| q == 0)
    }

    /// `∂/∂zₖ` of a product of powers, evaluated at `z`.
    fn partial(pows: &[u32], z: &Vector, k: usize) -> f64 {
        if pows[k] == 0 {
            return 0.0;
        }
        pows.iter()
            .enumerate()
            .map(|(i, &p)| {
                if i == k {
                    p as f64 * z[i].powi(p as i32 - 1)
                } else {
                    z[i].powi(p as i32)
                }
            })
            .product()
    }
}

/// Polynomial in `(x, v)` of total degree at most 4.
#[derive(Debug, Clone, PartialEq)]
pub struct TestFunction {
    pub label: String,
    pub dim: usize,
    pub terms: Vec<Monomial>,
}

/// `E[(c·v + s·ξ)^p]` for `ξ ∼ N(0,1)`.
fn shifted_normal_moment(c: f64, s: f64, v: f64, p: u32) -> f64 {
    let mean = c * v;
    let mut total = 0.0;
    let mut binom = 1.0;
    for k in 0..=p {
        if k % 2 == 0 {
            // E ξ^k = (k−1)!!
            let dfact: f64 = (1..k).step_by(2).map(|j| j as f64).product();
            total += binom * mean.powi((p - k) as i32) * s.powi(k as i32) * dfact;
        }
        binom = binom * (p - k) as f64 / (k + 1) as f64;
    }
    total
}

/// Three-point Gauss–Hermite rule for `N(0,1)`; exact through degree 5.
const GH_NODES: [f64; 3] = [-1.732_050_807_568_877_2, 0.0, 1.732_050_807_568_877_2];
const GH_WEIGHTS: [f64; 3] = [1.0 / 6.0, 2.0 / 3.0, 1.0 / 6.0];

impl TestFunction {
    pub fn new(label: impl Into<String>, dim: usize, terms: Vec<Monomial>) -> Result<Self> {
        for t in &terms {
            if t.x_pow.len() != dim || t.v_pow.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: t.x_pow.len().max(t.v_pow.len()),
                });
            }
            if t.degree() > 4 {
                return Err(Error::InvalidParameter {
                    name: "test_function",
                    reason: format!("degree {} exceeds 4", t.degree()),
                });
            }
        }
        Ok(Self {
            label: label.into(),
            dim,
            terms,
        })
    }

    /// Parses sums of products such as `x1^2*v1 + 0.5*x2` (variables are one-based).
    pub fn parse(dim: usize, expr: &str) -> Result<Self> {
        let bad = |reason: String| Error::InvalidParameter {
            name: "test_function",
            reason,
        };
        let mut terms = Vec::new();
        for raw in expr.replace('-', "+-").split('+') {
            let raw = raw.trim();
            if raw.is_empty() {
                continue;
            }
            let mut m = Monomial {
                coef: 1.0,
                x_pow: vec![0; dim],
                v_pow: vec![0; dim],
            };
            let (sign, body) = match raw.strip_prefix('-') {
                Some(rest) => (-1.0, rest.trim()),
                None => (1.0, raw),
            };
            m.coef = sign;
            for factor in body.split('*').map(str::trim) {
                let (base, pow) = match factor.split_once('^') {
                    Some((b, p)) => (b, p.trim().parse::<u32>().map_err(|e| bad(format!("{factor}: {e}")))?),
                    None => (factor, 1),
                };
                let slot = match base.chars().next() {
                    Some('x') => Some(&mut m.x_pow),
                    Some('v') => Some(&mut m.v_pow),
                    _ => None,
                };
                match slot {
                    Some(slot) => {
                        let idx: usize = base[1..].parse().map_err(|_| bad(format!("bad variable `{base}`")))?;
                        if idx == 0 || idx > dim {
                            return Err(bad(format!("`{base}` out of range for dimension {dim}")));
                        }
                        slot[idx - 1] += pow;
                    }
                    None => {
                        let c: f64 = base.parse().map_err(|_| bad(format!("cannot parse `{factor}`")))?;
                        m.coef *= c.powi(pow as i32);
                    }
                }
            }
            terms.push(m);
        }
        if terms.is_empty() {
            return Err(bad(format!("empty expression `{expr}`")));
        }
        Self::new(expr.trim(), dim, terms)
    }

    pub fn eval(&self, x: &Vector, v: &Vector) -> f64 {
        self.terms.iter().map(|m| m.eval(x, v)).sum()
    }

    pub fn grad_x(&self, x: &Vector, v: &Vector) -> Vector {
        Vector::from_fn(self.dim, |k, _| {
            self.terms
                .iter()
                .map(|m| m.coef * Monomial::partial(&m.x_pow, x, k) * m.v_part(v))
                .sum()
        })
    }

    pub fn grad_v(&self, x: &Vector, v: &Vector) -> Vector {
        Vector::from_fn(self.dim, |k, _| {
            self.terms
                .iter()
                .map(|m| m.coef * m.x_part(x) * Monomial::partial(&m.v_pow, v, k))
                .sum()
        })
    }

    /// `E f(x, cos φ · v + sin φ · ξ)` with `ξ ∼ N(0, I)`, from Gaussian moment formulas.
    pub fn refresh_average(&self, x: &Vector, v: &Vector, phi: f64) -> f64 {
        let (c, s) = if phi == FRAC_PI_2 { (0.0, 1.0) } else { (phi.cos(), phi.sin()) };
        self.terms
            .iter()
            .map(|m| {
                let vel: f64 = m
                    .v_pow
                    .iter()
                    .enumerate()
                    .map(|(i, &q)| shifted_normal_moment(c, s, v[i], q))
                    .product();
                m.coef * m.x_part(x) * vel
            })
            .sum()
    }

    /// `E f(x, v') − f(x, v)` for the stochastic bounce `v' = B ξ − v_∥`, where the columns of `B`
    /// span `g⊥`. Exact for degree ≤ 5 through a tensor Gauss–Hermite rule.
    fn stochastic_bounce_jump(&self, x: &Vector, v: &Vector, g: &Vector) -> f64 {
        let d = self.dim;
        let parallel = g * (v.dot(g) / g.norm_squared());
        if d == 1 {
            return self.jump_to(x, v, &(-parallel));
        }
        let basis = orthogonal_complement(g);
        let k = d - 1;
        let mut total = 0.0;
        let mut idx = vec![0usize; k];
        loop {
            let mut w = 1.0;
            let mut xi = Vector::zeros(k);
            for j in 0..k {
                w *= GH_WEIGHTS[idx[j]];
                xi[j] = GH_NODES[idx[j]];
            }
            let vp = &basis * xi - &parallel;
            total += w * self.jump_to(x, v, &vp);
            let mut j = 0;
            while j < k {
                idx[j] += 1;
                if idx[j] < 3 {
                    break;
                }
                idx[j] = 0;
                j += 1;
            }
            if j == k {
                break;
            }
        }
        total
    }

    /// `f(x, v') − f(x, v)`, skipping terms free of `v` so constants cancel exactly.
    fn jump_to(&self, x: &Vector, v: &Vector, vp: &Vector) -> f64 {
        self.terms
            .iter()
            .filter(|m| !m.is_velocity_free())
            .map(|m| m.eval(x, vp) - m.eval(x, v))
            .sum()
    }
}

/// Ten monomials of degree one to four in the leading coordinates.
pub fn standard_suite(dim: usize) -> Vec<TestFunction> {
    let j = if dim > 1 { 2 } else { 1 };
    [
        "x1".to_string(),
        "v1".into(),
        "x1*v1".into(),
        "x1^2".into(),
        "v1^2".into(),
        format!("x1*x{j}"),
        format!("x{j}*v1"),
        "x1^2*v1".into(),
        format!("x1*v1*v{j}^2"),
        "x1^3*v1".into(),
    ]
    .iter()
    .map(|e| TestFunction::parse(dim, e).expect("suite expressions are well formed"))
    .collect()
}

/// Applies the generator of the process that produced `skeleton` to `f` at `(x, v)`.
///
/// The reference kernel is used even when the run used a corrupted one, so the test measures
/// how far the corrupted chain is from stationarity under the intended dynamics.
fn generator_at(
    skeleton: &Skeleton,
    target: &TargetModel,
    f: &TestFunction,
    x: &Vector,
    v: &Vector,
) -> Result<f64> {
    let cfg = &skeleton.config;
    let g = skeleton.guide.evaluate(target, x)?;
    let force = &g - target.grad_potential(x);
    let mut out = v.dot(&f.grad_x(x, v)) + force.dot(&f.grad_v(x, v));
    if skeleton.sampler == "cbhs" {
        for i in 0..f.dim {
            let gamma = cfg.cbhs_gamma.get(i).copied().unwrap_or(0.0);
            let rate = (v[i] * g[i]).max(0.0) + gamma;
            if rate > 0.0 {
                let mut flipped = v.clone();
                flipped[i] = -flipped[i];
                out += rate * f.jump_to(x, v, &flipped);
            }
        }
        return Ok(out);
    }
    let rate = v.dot(&g).max(0.0);
    if rate > 0.0 {
        out += rate
            * match cfg.bounce_kernel.variant {
                BounceVariant::Stochastic => f.stochastic_bounce_jump(x, v, &g),
                _ => f.jump_to(x, v, &bounce_deterministic(v, &g)?),
            };
    }
    if cfg.lambda0 > 0.0 {
        out += cfg.lambda0 * (f.refresh_average(x, v, cfg.bounce_kernel.refresh_angle) - f.eval(x, v));
    }
    Ok(out)
}

/// z-score (batch-means standardized time average of `𝒜f`) per test function, after burn-in.
pub fn generator_invariance_test(
    skeleton: &Skeleton,
    target: &TargetModel,
    test_fns: &[TestFunction],
) -> Result<Vec<f64>> {
    if test_fns.is_empty() {
        return Err(Error::Empty("test functions"));
    }
    crate::error::check_dim(target.dim(), skeleton.dim())?;
    let chain = discretize(skeleton, skeleton.config.delta, false)?.burn_in(BURN_IN_FRACTION);
    test_fns
        .iter()
        .map(|f| {
            crate::error::check_dim(target.dim(), f.dim)?;
            let vals = chain
                .positions
                .iter()
                .zip(&chain.velocities)
                .map(|(x, v)| generator_at(skeleton, target, f, x, v))
                .collect::<Result<Vec<_>>>()?;
            let bm = batch_means(&vals, GENERATOR_BATCHES)?;
            if bm.std_error > 0.0 {
                Ok(bm.mean / bm.std_error)
            } else if bm.mean == 0.0 {
                Ok(0.0)
            } else {
                Err(Error::ZeroVariance(bm.mean))
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{chain_rng, draw_standard_normal_velocity, GaussianTarget, State};
    use crate::samplers::{run_bhs, SamplerConfig};
    use rand::Rng;

    fn v(xs: &[f64]) -> Vector {
        Vector::from_column_slice(xs)
    }

    #[test]
    fn parse_and_eval() {
        let f = TestFunction::parse(2, "x1^2*v2 - 0.5*x2 + 3").unwrap();
        let (x, u) = (v(&[2.0, -1.0]), v(&[0.5, 3.0]));
        assert!((f.eval(&x, &u) - (12.0 + 0.5 + 3.0)).abs() < 1e-14);
        assert_eq!(f.grad_x(&x, &u), v(&[12.0, -0.5]));
        assert_eq!(f.grad_v(&x, &u), v(&[0.0, 4.0]));
        assert!(TestFunction::parse(2, "x3").is_err());
        assert!(TestFunction::parse(2, "x1^3*v1^2").is_err());
        assert!(TestFunction::parse(2, "").is_err());
        assert_eq!(standard_suite(2).len(), 10);
        assert_eq!(standard_suite(1).len(), 10);
    }

    #[test]
    fn velocity_averages_match_monte_carlo() {
        let mut rng = chain_rng(12);
        let f = TestFunction::parse(2, "v1^4 + x1*v1*v2^2 + v2^3 - v1^2*v2").unwrap();
        let (x, u) = (v(&[0.7, -0.2]), v(&[1.3, -0.4]));
        for phi in [FRAC_PI_2, 0.6] {
            let exact = f.refresh_average(&x, &u, phi);
            let n = 200_000;
            let draws: Vec<f64> = (0..n)
                .map(|_| {
                    let xi = draw_standard_normal_velocity(2, &mut rng);
                    f.eval(&x, &(&u * phi.cos() + xi * phi.sin()))
                })
                .collect();
            let m = draws.iter().sum::<f64>() / n as f64;
            let se = (draws.iter().map(|d| (d - m).powi(2)).sum::<f64>() / n as f64 / n as f64).sqrt();
            assert!((m - exact).abs() < 3.0 * se, "{phi}: {m} vs {exact} (se {se})");
        }
        // full refresh of v1^4 is E ξ⁴ = 3
        let quartic = TestFunction::parse(1, "v1^4").unwrap();
        assert!((quartic.refresh_average(&v(&[0.0]), &v(&[5.0]), FRAC_PI_2) - 3.0).abs() < 1e-14);
    }

    #[test]
    fn stochastic_jump_matches_sampling() {
        let mut rng = chain_rng(3);
        let f = TestFunction::parse(3, "v1^2*v3 + v2^4 + x1*v3").unwrap();
        let (x, u, g) = (v(&[0.3, 1.0, -1.0]), v(&[0.5, -1.0, 2.0]), v(&[1.0, 2.0, -0.5]));
        let exact = f.stochastic_bounce_jump(&x, &u, &g);
        let n = 200_000;
        let draws: Vec<f64> = (0..n)
            .map(|_| {
                let vp = crate::kernels::bounce_stochastic(&u, &g, &mut rng).unwrap();
                f.eval(&x, &vp) - f.eval(&x, &u)
            })
            .collect();
        let m = draws.iter().sum::<f64>() / n as f64;
        let se = (draws.iter().map(|d| (d - m).powi(2)).sum::<f64>() / n as f64 / n as f64).sqrt();
        assert!((m - exact).abs() < 3.0 * se + 1e-12, "{m} vs {exact}");
    }

    #[test]
    fn constant_gives_zero_and_v1_is_centered() {
        let target: TargetModel = GaussianTarget::standard(2).unwrap().into();
        let cfg = SamplerConfig::rhmc().with_time(2000.0, 0.1).with_seed(21);
        let mut rng = chain_rng(0);
        let x0 = v(&[rng.random::<f64>(), 0.0]);
        let sk = run_bhs(&target, &cfg, &State::new(x0, v(&[1.0, 0.0]))).unwrap();
        let fns = vec![TestFunction::parse(2, "1").unwrap(), TestFunction::parse(2, "v1").unwrap()];
        let z = generator_invariance_test(&sk, &target, &fns).unwrap();
        assert_eq!(z[0], 0.0);
        assert!(z[1].abs() < 4.0, "{}", z[1]);
        assert!(generator_invariance_test(&sk, &target, &[]).is_err());
    }
}
