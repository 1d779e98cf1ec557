//! Targets, guide fields, process states and affine constraint sets.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{check_dim, Error, Result};

pub type Vector = DVector<f64>;
pub type Matrix = DMatrix<f64>;

/// Per-chain random number generator. ChaCha gives identical streams on every platform.
pub type ChainRng = ChaCha8Rng;

pub fn chain_rng(seed: u64) -> ChainRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Feasibility tolerance for `Fᵀx + h ≥ 0`.
pub const CONSTRAINT_TOL: f64 = 1e-10;

type ScalarFn = Arc<dyn Fn(&Vector) -> f64 + Send + Sync>;
type VectorFn = Arc<dyn Fn(&Vector) -> Vector + Send + Sync>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TargetKind {
    GeneralSmooth,
    Gaussian,
}

/// Multivariate normal target. Covariance and precision are both kept so hot loops never invert.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianTarget {
    mean: Vector,
    covariance: Matrix,
    precision: Matrix,
}

impl GaussianTarget {
    pub fn new(mean: Vector, covariance: Matrix) -> Result<Self> {
        let d = mean.len();
        if d == 0 {
            return Err(Error::InvalidParameter {
                name: "mean",
                reason: "dimension must be positive".into(),
            });
        }
        if covariance.nrows() != d || covariance.ncols() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: covariance.nrows(),
            });
        }
        let asym = (&covariance - covariance.transpose()).amax();
        if asym > 1e-12 * covariance.amax().max(1.0) {
            return Err(Error::InvalidParameter {
                name: "covariance",
                reason: format!("not symmetric (max asymmetry {asym:e})"),
            });
        }
        let chol = covariance
            .clone()
            .cholesky()
            .ok_or_else(|| Error::SingularMatrix("covariance is not positive definite".into()))?;
        let inv = chol.inverse();
        let precision = (&inv + inv.transpose()) * 0.5;
        Ok(Self {
            mean,
            covariance,
            precision,
        })
    }

    pub fn standard(dim: usize) -> Result<Self> {
        Self::new(Vector::zeros(dim), Matrix::identity(dim, dim))
    }

    pub fn diagonal(mean: Vector, variances: &[f64]) -> Result<Self> {
        let cov = Matrix::from_diagonal(&Vector::from_column_slice(variances));
        Self::new(mean, cov)
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &Vector {
        &self.mean
    }

    pub fn covariance(&self) -> &Matrix {
        &self.covariance
    }

    pub fn precision(&self) -> &Matrix {
        &self.precision
    }

    pub fn is_diagonal(&self) -> bool {
        let d = self.dim();
        (0..d).all(|i| (0..d).all(|j| i == j || self.covariance[(i, j)] == 0.0))
    }

    pub fn is_standard(&self) -> bool {
        self.mean.iter().all(|&m| m == 0.0)
            && self.covariance == Matrix::identity(self.dim(), self.dim())
    }

    /// `U(x) = ½ (x−μ)ᵀ Σ⁻¹ (x−μ)`, without the normalizing constant.
    pub fn potential(&self, x: &Vector) -> f64 {
        let r = x - &self.mean;
        0.5 * r.dot(&(&self.precision * &r))
    }

    pub fn grad_potential(&self, x: &Vector) -> Vector {
        &self.precision * (x - &self.mean)
    }
}

/// A smooth target given by closures for `U` and `∇U`.
#[derive(Clone)]
pub struct SmoothTarget {
    dim: usize,
    potential: ScalarFn,
    grad: VectorFn,
}

impl SmoothTarget {
    pub fn new<U, G>(dim: usize, potential: U, grad: G) -> Self
    where
        U: Fn(&Vector) -> f64 + Send + Sync + 'static,
        G: Fn(&Vector) -> Vector + Send + Sync + 'static,
    {
        Self {
            dim,
            potential: Arc::new(potential),
            grad: Arc::new(grad),
        }
    }
}

impl fmt::Debug for SmoothTarget {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SmoothTarget").field("dim", &self.dim).finish()
    }
}

/// Target density `π ∝ exp(−U)`.
#[derive(Debug, Clone)]
pub enum TargetModel {
    Gaussian(GaussianTarget),
    Smooth(SmoothTarget),
}

impl From<GaussianTarget> for TargetModel {
    fn from(t: GaussianTarget) -> Self {
        TargetModel::Gaussian(t)
    }
}

impl TargetModel {
    pub fn dim(&self) -> usize {
        match self {
            TargetModel::Gaussian(g) => g.dim(),
            TargetModel::Smooth(s) => s.dim,
        }
    }

    pub fn kind(&self) -> TargetKind {
        match self {
            TargetModel::Gaussian(_) => TargetKind::Gaussian,
            TargetModel::Smooth(_) => TargetKind::GeneralSmooth,
        }
    }

    pub fn as_gaussian(&self) -> Option<&GaussianTarget> {
        match self {
            TargetModel::Gaussian(g) => Some(g),
            TargetModel::Smooth(_) => None,
        }
    }

    pub fn potential(&self, x: &Vector) -> f64 {
        match self {
            TargetModel::Gaussian(g) => g.potential(x),
            TargetModel::Smooth(s) => (s.potential)(x),
        }
    }

    pub fn grad_potential(&self, x: &Vector) -> Vector {
        match self {
            TargetModel::Gaussian(g) => g.grad_potential(x),
            TargetModel::Smooth(s) => (s.grad)(x),
        }
    }
}

/// The vector field `g` that selects a member of the sampler family.
#[derive(Clone)]
pub enum GuideField {
    /// `g = 0`: randomized Hamiltonian dynamics, refreshment only.
    Zero,
    /// `g = ∇U`: straight-line motion, bouncy particle sampler.
    GradU,
    /// `g(x) = A x`.
    Linear(Matrix),
    Custom(VectorFn),
}

impl fmt::Debug for GuideField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GuideField::Zero => write!(f, "Zero"),
            GuideField::GradU => write!(f, "GradU"),
            GuideField::Linear(a) => f.debug_tuple("Linear").field(a).finish(),
            GuideField::Custom(_) => write!(f, "Custom(..)"),
        }
    }
}

impl GuideField {
    pub fn custom<G>(g: G) -> Self
    where
        G: Fn(&Vector) -> Vector + Send + Sync + 'static,
    {
        GuideField::Custom(Arc::new(g))
    }

    /// Scalar linear guide `g(x) = a·x` in one dimension.
    pub fn scalar(a: f64) -> Self {
        GuideField::Linear(Matrix::from_element(1, 1, a))
    }

    pub fn evaluate(&self, target: &TargetModel, x: &Vector) -> Result<Vector> {
        check_dim(target.dim(), x.len())?;
        Ok(match self {
            GuideField::Zero => Vector::zeros(x.len()),
            GuideField::GradU => target.grad_potential(x),
            GuideField::Linear(a) => {
                check_dim(x.len(), a.ncols())?;
                check_dim(x.len(), a.nrows())?;
                a * x
            }
            GuideField::Custom(g) => {
                let out = g(x);
                check_dim(x.len(), out.len())?;
                out
            }
        })
    }
}

/// Position, velocity and process clock.
#[derive(Debug, Clone, PartialEq)]
pub struct State {
    pub position: Vector,
    pub velocity: Vector,
    pub time: f64,
}

impl State {
    pub fn new(position: Vector, velocity: Vector) -> Self {
        Self {
            position,
            velocity,
            time: 0.0,
        }
    }

    pub fn dim(&self) -> usize {
        self.position.len()
    }
}

/// Affine constraints `Fᵀx + h ≥ 0`; column `j` of `F` is the inward normal of wall `j`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstraintSet {
    f: Matrix,
    h: Vector,
}

impl ConstraintSet {
    pub fn new(f: Matrix, h: Vector) -> Result<Self> {
        check_dim(f.ncols(), h.len())?;
        for j in 0..f.ncols() {
            if f.column(j).norm() == 0.0 {
                return Err(Error::InvalidParameter {
                    name: "F",
                    reason: format!("constraint column {j} is zero"),
                });
            }
        }
        Ok(Self { f, h })
    }

    /// Builds the set from a list of normals and offsets.
    pub fn from_columns(dim: usize, columns: &[Vec<f64>], h: &[f64]) -> Result<Self> {
        let mut f = Matrix::zeros(dim, columns.len());
        for (j, col) in columns.iter().enumerate() {
            check_dim(dim, col.len())?;
            f.set_column(j, &Vector::from_column_slice(col));
        }
        Self::new(f, Vector::from_column_slice(h))
    }

    pub fn empty(dim: usize) -> Self {
        Self {
            f: Matrix::zeros(dim, 0),
            h: Vector::zeros(0),
        }
    }

    pub fn dim(&self) -> usize {
        self.f.nrows()
    }

    pub fn len(&self) -> usize {
        self.h.len()
    }

    pub fn is_empty(&self) -> bool {
        self.h.is_empty()
    }

    pub fn f(&self) -> &Matrix {
        &self.f
    }

    pub fn h(&self) -> &Vector {
        &self.h
    }

    pub fn normal(&self, j: usize) -> Vector {
        self.f.column(j).into_owned()
    }

    /// `Fᵀx + h`.
    pub fn values(&self, x: &Vector) -> Vector {
        self.f.tr_mul(x) + &self.h
    }

    pub fn min_value(&self, x: &Vector) -> f64 {
        self.values(x).iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn satisfied(&self, x: &Vector) -> bool {
        x.len() == self.dim() && self.min_value(x) >= -CONSTRAINT_TOL
    }

    /// The benchmark wedge `x₁ ≤ x₂ ≤ 1.1·x₁`, `x₁, x₂ ≥ 0`.
    pub fn wedge_benchmark() -> Self {
        Self::from_columns(
            2,
            &[vec![-1.0, 1.0], vec![1.1, -1.0], vec![1.0, 0.0], vec![0.0, 1.0]],
            &[0.0; 4],
        )
        .expect("static constraint set is well formed")
    }
}

pub fn draw_standard_normal_velocity<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Vector {
    Vector::from_iterator(dim, (0..dim).map(|_| rng.sample::<f64, _>(StandardNormal)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(xs: &[f64]) -> Vector {
        Vector::from_column_slice(xs)
    }

    #[test]
    fn guide_variants() {
        let t: TargetModel = GaussianTarget::standard(2).unwrap().into();
        assert_eq!(GuideField::Zero.evaluate(&t, &v(&[3.0, -1.0])).unwrap(), v(&[0.0, 0.0]));
        let a = Matrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 2.0]);
        assert_eq!(
            GuideField::Linear(a).evaluate(&t, &v(&[1.0, -1.0])).unwrap(),
            v(&[2.0, -2.0])
        );
        assert_eq!(GuideField::GradU.evaluate(&t, &v(&[1.0, 2.0])).unwrap(), v(&[1.0, 2.0]));
        assert!(matches!(
            GuideField::Zero.evaluate(&t, &v(&[1.0])),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn precision_inverts_covariance() {
        let cov = Matrix::from_row_slice(3, 3, &[2.0, 0.3, 0.1, 0.3, 1.0, -0.2, 0.1, -0.2, 0.5]);
        let g = GaussianTarget::new(v(&[1.0, 0.0, -1.0]), cov.clone()).unwrap();
        let prod = g.precision() * &cov;
        assert!((prod - Matrix::identity(3, 3)).amax() < 1e-10);
    }

    #[test]
    fn non_pd_covariance_rejected() {
        let cov = Matrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert!(GaussianTarget::new(v(&[0.0, 0.0]), cov).is_err());
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let cov = Matrix::from_row_slice(2, 2, &[1.5, 0.4, 0.4, 0.8]);
        let g = GaussianTarget::new(v(&[0.5, -1.0]), cov).unwrap();
        let mut rng = chain_rng(3);
        for _ in 0..50 {
            let x = draw_standard_normal_velocity(2, &mut rng) * 2.0;
            let grad = g.grad_potential(&x);
            for i in 0..2 {
                let h = 1e-5;
                let mut xp = x.clone();
                let mut xm = x.clone();
                xp[i] += h;
                xm[i] -= h;
                let fd = (g.potential(&xp) - g.potential(&xm)) / (2.0 * h);
                assert!((fd - grad[i]).abs() <= 1e-5 * grad[i].abs().max(1.0));
            }
        }
    }

    #[test]
    fn wedge_constraints() {
        let c = ConstraintSet::wedge_benchmark();
        assert!(c.satisfied(&v(&[1.0, 1.05])));
        assert!(!c.satisfied(&v(&[1.0, 2.0])));
        assert!(ConstraintSet::empty(2).satisfied(&v(&[-5.0, 7.0])));
    }

    #[test]
    fn velocity_draws() {
        let a = draw_standard_normal_velocity(2, &mut chain_rng(11));
        let b = draw_standard_normal_velocity(2, &mut chain_rng(11));
        assert_eq!(a, b);
        assert_eq!(draw_standard_normal_velocity(3, &mut chain_rng(1)).len(), 3);

        let mut rng = chain_rng(5);
        let n = 100_000;
        let xs: Vec<f64> = (0..n).map(|_| draw_standard_normal_velocity(1, &mut rng)[0]).collect();
        let mean = xs.iter().sum::<f64>() / n as f64;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        assert!(mean.abs() < 0.02, "mean {mean}");
        assert!((var - 1.0).abs() < 0.03, "var {var}");
    }

    proptest::proptest! {
        #[test]
        fn adding_constraints_only_shrinks(x1 in -3.0..3.0f64, x2 in -3.0..3.0f64,
                                            n1 in -2.0..2.0f64, n2 in -2.0..2.0f64, h in -1.0..1.0f64) {
            proptest::prop_assume!(n1.abs() + n2.abs() > 1e-3);
            let base = ConstraintSet::wedge_benchmark();
            let mut f = base.f().clone().insert_column(4, 0.0);
            f[(0, 4)] = n1;
            f[(1, 4)] = n2;
            let mut hv = base.h().clone().insert_row(4, 0.0);
            hv[4] = h;
            let bigger = ConstraintSet::new(f, hv).unwrap();
            let x = v(&[x1, x2]);
            if bigger.satisfied(&x) {
                proptest::prop_assert!(base.satisfied(&x));
            }
        }
    }
}
