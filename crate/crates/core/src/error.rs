use thiserror::Error;

use crate::scenario::AgentId;

/// Errors raised while configuring, simulating, or optimizing an engagement.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum SwarmError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("layout infeasible: could not place {agent} at separation {min_separation} after {attempts} attempts")]
    LayoutInfeasible {
        agent: AgentId,
        min_separation: f64,
        attempts: usize,
    },

    #[error("singular pair: agents {a} and {b} are {distance:e} apart")]
    SingularPair {
        a: AgentId,
        b: AgentId,
        distance: f64,
    },

    #[error("singular pair distance {0:e}")]
    SingularDistance(f64),

    #[error("time {t} outside trajectory horizon [0, {horizon}]")]
    OutsideHorizon { t: f64, horizon: f64 },

    #[error("survival factor {factor} for {agent} lies outside (0, 1]")]
    RateOverflow { agent: AgentId, factor: f64 },

    #[error("inconsistent state: {0}")]
    InconsistentState(String),

    #[error("integration failure: non-finite acceleration for {0}")]
    IntegrationFailure(AgentId),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("step {step}: {source}")]
    AtStep {
        step: usize,
        #[source]
        source: Box<SwarmError>,
    },

    #[error("run {run}: {source}")]
    AtRun {
        run: u64,
        #[source]
        source: Box<SwarmError>,
    },
}

impl SwarmError {
    pub(crate) fn at_step(self, step: usize) -> Self {
        SwarmError::AtStep {
            step,
            source: Box::new(self),
        }
    }

    pub(crate) fn at_run(self, run: u64) -> Self {
        SwarmError::AtRun {
            run,
            source: Box::new(self),
        }
    }
}

pub type Result<T> = std::result::Result<T, SwarmError>;
