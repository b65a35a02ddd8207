//! Adversarial swarm engagements with probabilistic attrition.
//!
//! An attacking swarm closes on a static high-value unit (HVU) while
//! defenders, flying Bernstein-polynomial trajectories, repel and shoot at
//! it. Every agent carries a survival probability driven by proximity to
//! enemy shooters. The crate provides:
//!
//! * [`engines`]: one simulation loop run under four formulations: a
//!   stochastic index-set realization and three smooth or semi-smooth
//!   approximations (decoupled, weighted forces, threshold).
//! * [`montecarlo`]: ensembles of stochastic runs and comparison of the
//!   approximations against them.
//! * [`optimizer`]: derivative-free search over defender control points that
//!   minimizes the probability the HVU is destroyed.

pub mod attrition;
pub mod dynamics;
pub mod engines;
pub mod error;
pub mod montecarlo;
pub mod optimizer;
pub mod scenario;

pub use attrition::{IndexSet, SurvivalVector};
pub use dynamics::{InteractionMode, TrajectoryParams};
pub use engines::{run, EngineKind, SimResult};
pub use error::{Result, SwarmError};
pub use scenario::{validate, AgentId, ScenarioConfig, SwarmState, ValidatedConfig};

/// Three-dimensional vector used for all positions, velocities, and accelerations.
pub type Vec3 = nalgebra::Vector3<f64>;
