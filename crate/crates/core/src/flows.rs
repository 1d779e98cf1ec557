//! Closed-form solutions of `ẋ = v, v̇ = −∇U(x) + g(x)` for the exactly solvable instances.

use std::sync::Arc;

use crate::error::{check_dim, Error, Result};
use crate::model::{GaussianTarget, Matrix, Vector};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UnivariateRegime {
    /// `a > 1`: exponential growth and decay.
    Hyperbolic,
    /// `a < 1`: oscillation with angular frequency `√(1−a)`.
    Trigonometric,
    /// `a = 1`: uniform motion.
    Linear,
}

/// Flow for the standard normal target with guide `g(x) = a·x`, i.e. `ẍ = (a−1)x`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UnivariateFlow {
    pub a: f64,
    pub regime: UnivariateRegime,
    pub c1: f64,
    pub c2: f64,
    /// `√|a−1|`; zero in the linear regime.
    pub omega: f64,
}

impl UnivariateFlow {
    pub fn solve(a: f64, x0: f64, v0: f64) -> Self {
        if a > 1.0 {
            let omega = (a - 1.0).sqrt();
            Self {
                a,
                regime: UnivariateRegime::Hyperbolic,
                c1: 0.5 * (x0 + v0 / omega),
                c2: 0.5 * (x0 - v0 / omega),
                omega,
            }
        } else if a < 1.0 {
            let omega = (1.0 - a).sqrt();
            Self {
                a,
                regime: UnivariateRegime::Trigonometric,
                c1: x0,
                c2: v0 / omega,
                omega,
            }
        } else {
            Self {
                a,
                regime: UnivariateRegime::Linear,
                c1: v0,
                c2: x0,
                omega: 0.0,
            }
        }
    }

    /// Amplitude `r` and phase `c` with `x_t = r cos(c + ωt)`; only meaningful for `a < 1`.
    pub fn polar(&self) -> (f64, f64) {
        let r = self.c1.hypot(self.c2);
        let c = (-self.c2).atan2(self.c1);
        (r, c)
    }

    pub fn evaluate(&self, t: f64) -> (f64, f64) {
        match self.regime {
            UnivariateRegime::Hyperbolic => {
                let (ep, em) = ((self.omega * t).exp(), (-self.omega * t).exp());
                (
                    self.c1 * ep + self.c2 * em,
                    self.omega * (self.c1 * ep - self.c2 * em),
                )
            }
            UnivariateRegime::Trigonometric => {
                let (s, c) = (self.omega * t).sin_cos();
                (
                    self.c1 * c + self.c2 * s,
                    self.omega * (-self.c1 * s + self.c2 * c),
                )
            }
            UnivariateRegime::Linear => (self.c1 * t + self.c2, self.c1),
        }
    }
}

/// Straight-line motion `x_t = x₀ + t·v₀`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearFlow {
    pub x0: Vector,
    pub v0: Vector,
}

impl LinearFlow {
    pub fn new(x0: Vector, v0: Vector) -> Self {
        Self { x0, v0 }
    }

    pub fn evaluate(&self, t: f64) -> (Vector, Vector) {
        (&self.x0 + &self.v0 * t, self.v0.clone())
    }
}

/// Time-independent part of a Gaussian flow with linear guide: `Σ⁻¹ − A = −P⁻¹ A_d P`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticSystem {
    p: Matrix,
    p_inv: Matrix,
    a_diag: Vector,
    /// `P Σ⁻¹ μ`.
    drive: Vector,
    /// `o_k = (P Σ⁻¹ μ)_k / a_k`.
    offset: Vector,
    guide: Matrix,
}

impl QuadraticSystem {
    /// Uses the user-supplied diagonalization; the guide matrix is implied as `A = Σ⁻¹ + P⁻¹ A_d P`.
    pub fn new(target: &GaussianTarget, p: Matrix, a_diag: Vector) -> Result<Self> {
        let d = target.dim();
        check_dim(d, p.nrows())?;
        check_dim(d, p.ncols())?;
        check_dim(d, a_diag.len())?;
        if let Some(k) = a_diag.iter().position(|&a| a == 0.0) {
            return Err(Error::InvalidParameter {
                name: "A_d",
                reason: format!("diagonal entry {k} is zero"),
            });
        }
        let p_inv = invert(&p)?;
        let guide = target.precision() + &p_inv * Matrix::from_diagonal(&a_diag) * &p;
        Self::assemble(target, p, p_inv, a_diag, guide)
    }

    /// Diagonalizes `Σ⁻¹ − A` by symmetric eigendecomposition; `A` must make it symmetric.
    pub fn from_guide(target: &GaussianTarget, a: &Matrix) -> Result<Self> {
        let d = target.dim();
        check_dim(d, a.nrows())?;
        check_dim(d, a.ncols())?;
        let m = target.precision() - a;
        let scale = m.amax().max(1.0);
        if (&m - m.transpose()).amax() > 1e-10 * scale {
            return Err(Error::Unsupported(
                "Σ⁻¹ − A is not symmetric; supply P and A_d explicitly".into(),
            ));
        }
        let eig = ((&m + m.transpose()) * 0.5).symmetric_eigen();
        if let Some(k) = eig.eigenvalues.iter().position(|l| l.abs() <= 1e-12 * scale) {
            return Err(Error::Unsupported(format!(
                "Σ⁻¹ − A has a zero eigenvalue (index {k}); no closed-form oscillator flow"
            )));
        }
        let p = eig.eigenvectors.transpose();
        let p_inv = eig.eigenvectors.clone();
        let a_diag = -eig.eigenvalues;
        Self::assemble(target, p, p_inv, a_diag, a.clone())
    }

    fn assemble(
        target: &GaussianTarget,
        p: Matrix,
        p_inv: Matrix,
        a_diag: Vector,
        guide: Matrix,
    ) -> Result<Self> {
        let drive = &p * (target.precision() * target.mean());
        let offset = drive.component_div(&a_diag);
        let residual = target.precision() - &guide + &p_inv * Matrix::from_diagonal(&a_diag) * &p;
        if residual.amax() > 1e-8 * guide.amax().max(1.0) {
            return Err(Error::InvalidParameter {
                name: "P",
                reason: format!("Σ⁻¹ − A ≠ −P⁻¹A_dP (residual {:e})", residual.amax()),
            });
        }
        Ok(Self {
            p,
            p_inv,
            a_diag,
            drive,
            offset,
            guide,
        })
    }

    pub fn dim(&self) -> usize {
        self.a_diag.len()
    }

    pub fn p(&self) -> &Matrix {
        &self.p
    }

    pub fn p_inv(&self) -> &Matrix {
        &self.p_inv
    }

    pub fn a_diag(&self) -> &Vector {
        &self.a_diag
    }

    pub fn drive(&self) -> &Vector {
        &self.drive
    }

    pub fn offset(&self) -> &Vector {
        &self.offset
    }

    /// The guide matrix `A` in `g(x) = A x`.
    pub fn guide(&self) -> &Matrix {
        &self.guide
    }

    /// Flow constants for the given initial state.
    pub fn solve(self: &Arc<Self>, x0: &Vector, v0: &Vector) -> Result<QuadraticFlow> {
        check_dim(self.dim(), x0.len())?;
        check_dim(self.dim(), v0.len())?;
        let y0 = &self.p * x0;
        let w0 = &self.p * v0;
        let d = self.dim();
        let mut c1 = Vector::zeros(d);
        let mut c2 = Vector::zeros(d);
        for k in 0..d {
            let a = self.a_diag[k];
            let shifted = y0[k] + self.offset[k];
            if a < 0.0 {
                c1[k] = shifted;
                c2[k] = w0[k] / (-a).sqrt();
            } else {
                let s = a.sqrt();
                c1[k] = 0.5 * (shifted + w0[k] / s);
                c2[k] = 0.5 * (shifted - w0[k] / s);
            }
        }
        Ok(QuadraticFlow {
            system: Arc::clone(self),
            c1,
            c2,
        })
    }
}

fn invert(p: &Matrix) -> Result<Matrix> {
    let inv = p
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::SingularMatrix("P is not invertible".into()))?;
    let err = (p * &inv - Matrix::identity(p.nrows(), p.nrows())).amax();
    if !err.is_finite() || err > 1e-8 {
        return Err(Error::SingularMatrix(format!(
            "P is numerically singular (PP⁻¹ − I = {err:e})"
        )));
    }
    Ok(inv)
}

/// Gaussian flow with linear guide in the diagonalizing coordinates `y = P x`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticFlow {
    pub system: Arc<QuadraticSystem>,
    pub c1: Vector,
    pub c2: Vector,
}

impl QuadraticFlow {
    /// `(y_t, ẏ_t)` in the diagonal frame.
    pub fn evaluate_diagonal(&self, t: f64) -> (Vector, Vector) {
        let d = self.system.dim();
        let mut y = Vector::zeros(d);
        let mut dy = Vector::zeros(d);
        for k in 0..d {
            let a = self.system.a_diag[k];
            let (c1, c2) = (self.c1[k], self.c2[k]);
            if a < 0.0 {
                let s = (-a).sqrt();
                let (sn, cs) = (s * t).sin_cos();
                y[k] = c1 * cs + c2 * sn - self.system.offset[k];
                dy[k] = s * (-c1 * sn + c2 * cs);
            } else {
                let s = a.sqrt();
                let (ep, em) = ((s * t).exp(), (-s * t).exp());
                y[k] = c1 * ep + c2 * em - self.system.offset[k];
                dy[k] = s * (c1 * ep - c2 * em);
            }
        }
        (y, dy)
    }

    pub fn evaluate(&self, t: f64) -> (Vector, Vector) {
        let (y, dy) = self.evaluate_diagonal(t);
        (&self.system.p_inv * y, &self.system.p_inv * dy)
    }
}

/// One coordinate obeying `ẍ = k·x + b`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScalarFlow {
    pub k: f64,
    pub b: f64,
    pub x0: f64,
    pub v0: f64,
}

impl ScalarFlow {
    pub fn new(k: f64, b: f64, x0: f64, v0: f64) -> Self {
        Self { k, b, x0, v0 }
    }

    pub fn center(&self) -> f64 {
        -self.b / self.k
    }

    pub fn evaluate(&self, t: f64) -> (f64, f64) {
        if self.k < 0.0 {
            let w = (-self.k).sqrt();
            let c = self.center();
            let z0 = self.x0 - c;
            let (s, cs) = (w * t).sin_cos();
            (c + z0 * cs + self.v0 / w * s, -z0 * w * s + self.v0 * cs)
        } else if self.k > 0.0 {
            let w = self.k.sqrt();
            let c = self.center();
            let z0 = self.x0 - c;
            let (sh, ch) = ((w * t).sinh(), (w * t).cosh());
            (c + z0 * ch + self.v0 / w * sh, z0 * w * sh + self.v0 * ch)
        } else {
            (
                self.x0 + self.v0 * t + 0.5 * self.b * t * t,
                self.v0 + self.b * t,
            )
        }
    }
}

/// Flow family used between skeleton events; enough to reconstruct the trajectory exactly.
#[derive(Debug, Clone, PartialEq)]
pub enum FlowModel {
    Linear,
    /// Standard normal target with `g(x) = a·x`.
    Univariate { a: f64 },
    Quadratic(Arc<QuadraticSystem>),
    /// Independent coordinates, coordinate `i` obeys `ẍᵢ = kᵢ xᵢ + bᵢ`.
    Decoupled { k: Vec<f64>, b: Vec<f64> },
}

impl FlowModel {
    pub fn name(&self) -> &'static str {
        match self {
            FlowModel::Linear => "linear",
            FlowModel::Univariate { .. } => "univariate",
            FlowModel::Quadratic(_) => "quadratic",
            FlowModel::Decoupled { .. } => "decoupled",
        }
    }

    /// State reached after following the flow for time `t` from `(x, v)`.
    pub fn advance(&self, x: &Vector, v: &Vector, t: f64) -> (Vector, Vector) {
        match self {
            FlowModel::Linear => LinearFlow::new(x.clone(), v.clone()).evaluate(t),
            FlowModel::Univariate { a } => {
                let (xt, vt) = UnivariateFlow::solve(*a, x[0], v[0]).evaluate(t);
                (Vector::from_element(1, xt), Vector::from_element(1, vt))
            }
            FlowModel::Quadratic(sys) => sys
                .solve(x, v)
                .expect("skeleton state matches flow dimension")
                .evaluate(t),
            FlowModel::Decoupled { k, b } => {
                let d = x.len();
                let mut xt = Vector::zeros(d);
                let mut vt = Vector::zeros(d);
                for i in 0..d {
                    let (xi, vi) = ScalarFlow::new(k[i], b[i], x[i], v[i]).evaluate(t);
                    xt[i] = xi;
                    vt[i] = vi;
                }
                (xt, vt)
            }
        }
    }
}
