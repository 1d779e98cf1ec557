//! Velocity updates applied at event times.

use std::f64::consts::FRAC_PI_2;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::model::{draw_standard_normal_velocity, Matrix, Vector};

/// Guide vectors shorter than this cannot define a reflection.
pub const MIN_GUIDE_NORM: f64 = 1e-14;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum BounceVariant {
    /// Householder reflection against the hyperplane orthogonal to `g(x)`.
    #[default]
    Deterministic,
    /// Flip the component along `g(x)`, resample the orthogonal part.
    Stochastic,
    /// Leaves the velocity untouched. Breaks invariance; exists so diagnostics can be shown to catch it.
    Unflipped,
}

/// Bounce kernel plus the refreshment angle `φ ∈ (0, π/2]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BounceKernelSpec {
    pub variant: BounceVariant,
    pub refresh_angle: f64,
}

impl Default for BounceKernelSpec {
    fn default() -> Self {
        Self {
            variant: BounceVariant::Deterministic,
            refresh_angle: FRAC_PI_2,
        }
    }
}

impl BounceKernelSpec {
    pub fn validate(&self) -> Result<()> {
        check_angle(self.refresh_angle)
    }

    pub fn bounce<R: Rng + ?Sized>(&self, v: &Vector, gx: &Vector, rng: &mut R) -> Result<Vector> {
        match self.variant {
            BounceVariant::Deterministic => bounce_deterministic(v, gx),
            BounceVariant::Stochastic => bounce_stochastic(v, gx, rng),
            BounceVariant::Unflipped => Ok(v.clone()),
        }
    }

    pub fn refresh<R: Rng + ?Sized>(&self, v: &Vector, rng: &mut R) -> Result<Vector> {
        if self.refresh_angle == FRAC_PI_2 {
            Ok(draw_standard_normal_velocity(v.len(), rng))
        } else {
            refresh_partial(v, self.refresh_angle, rng)
        }
    }
}

fn check_angle(phi: f64) -> Result<()> {
    if phi > 0.0 && phi <= FRAC_PI_2 {
        Ok(())
    } else {
        Err(Error::InvalidParameter {
            name: "refresh_angle",
            reason: format!("{phi} is outside (0, π/2]"),
        })
    }
}

fn reflect(v: &Vector, n: &Vector) -> Vector {
    v - n * (2.0 * v.dot(n) / n.norm_squared())
}

/// `R(x)v = v − 2⟨v,g⟩/‖g‖² · g`.
pub fn bounce_deterministic(v: &Vector, gx: &Vector) -> Result<Vector> {
    check_dim(v.len(), gx.len())?;
    let norm = gx.norm();
    if norm <= MIN_GUIDE_NORM {
        return Err(Error::DegenerateReflection(norm));
    }
    Ok(reflect(v, gx))
}

/// Orthonormal basis of `gx^⊥` (as columns), from the Householder matrix that maps `e₁` onto `±ĝ`.
pub fn orthogonal_complement(gx: &Vector) -> Matrix {
    let d = gx.len();
    let mut w = gx / gx.norm();
    let sign = if w[0] >= 0.0 { 1.0 } else { -1.0 };
    w[0] += sign;
    let wn = w.norm_squared();
    let h = Matrix::identity(d, d) - &w * w.transpose() * (2.0 / wn);
    h.columns(1, d - 1).into_owned()
}

pub fn bounce_stochastic<R: Rng + ?Sized>(v: &Vector, gx: &Vector, rng: &mut R) -> Result<Vector> {
    check_dim(v.len(), gx.len())?;
    let norm = gx.norm();
    if norm <= MIN_GUIDE_NORM {
        return Err(Error::DegenerateReflection(norm));
    }
    let parallel = gx * (v.dot(gx) / gx.norm_squared());
    let d = v.len();
    if d == 1 {
        return Ok(-parallel);
    }
    let basis = orthogonal_complement(gx);
    let xi = draw_standard_normal_velocity(d - 1, rng);
    Ok(basis * xi - parallel)
}

/// Householder reflection against the wall with normal `F_j`.
pub fn wall_reflect(v: &Vector, wall_normal: &Vector) -> Result<Vector> {
    check_dim(v.len(), wall_normal.len())?;
    if wall_normal.norm() == 0.0 {
        return Err(Error::InvalidParameter {
            name: "wall_normal",
            reason: "zero normal".into(),
        });
    }
    Ok(reflect(v, wall_normal))
}

/// `v' = cos φ · v + sin φ · ξ`, `ξ ∼ N(0, I)`.
pub fn refresh_partial<R: Rng + ?Sized>(v: &Vector, phi: f64, rng: &mut R) -> Result<Vector> {
    check_angle(phi)?;
    let xi = draw_standard_normal_velocity(v.len(), rng);
    Ok(v * phi.cos() + xi * phi.sin())
}

/// Negates coordinate `i` (zero-based).
pub fn coordinate_flip(v: &Vector, i: usize) -> Result<Vector> {
    if i >= v.len() {
        return Err(Error::InvalidParameter {
            name: "coordinate",
            reason: format!("index {i} out of range for dimension {}", v.len()),
        });
    }
    let mut out = v.clone();
    out[i] = -out[i];
    Ok(out)
}
