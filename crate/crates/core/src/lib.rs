//! Bouncy hybrid samplers: piecewise-deterministic Markov processes that move along exact
//! Hamiltonian-like flows `ẋ = v, v̇ = −∇U(x) + g(x)` and bounce off the guide field `g`.

pub mod analysis;
pub mod error;
pub mod event_times;
pub mod flows;
pub mod kernels;
pub mod model;
pub mod samplers;

pub use error::{Error, Result};
pub use model::{ConstraintSet, GaussianTarget, GuideField, State, TargetModel, Vector, Matrix};
pub use samplers::{Problem, Sampler, SamplerConfig, SamplerOutput, SamplerRegistry, Skeleton};
