//! Full-engagement simulation under the four attrition formulations.
//!
//! Every engine shares one loop. Within a step the order is fixed (see
//! [`step_order`]): rates from the current geometry, the survival update,
//! the index-set update, then the motion update with the refreshed weights
//! or mask.

use rand::{Rng, RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::attrition::{
    attrition_rates, hold_dead, stochastic_index_update, survival_step, threshold_index_update,
    IndexSet, SurvivalVector,
};
use crate::dynamics::{
    attacker_accelerations, defenders_at, verlet_step, ForceModel, InteractionMode,
    TrajectoryParams,
};
use crate::error::Result;
use crate::scenario::{PerAgent, SwarmState, ValidatedConfig};

/// Which formulation drives a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EngineKind {
    /// One random realization of the index-set dynamics. The generator is
    /// ChaCha8 seeded with `seed` on stream `stream`.
    P0Stochastic { seed: u64, stream: u64 },
    /// Survival evolves but never feeds back into motion.
    P1Decoupled,
    /// Forces scaled by the source's survival probability.
    P2WeightedForces,
    /// Agents drop out of all interactions once survival falls below the threshold.
    P3Threshold,
}

impl EngineKind {
    pub fn p0(seed: u64) -> Self {
        EngineKind::P0Stochastic { seed, stream: 0 }
    }

    pub fn label(&self) -> &'static str {
        match self {
            EngineKind::P0Stochastic { .. } => "p0",
            EngineKind::P1Decoupled => "p1",
            EngineKind::P2WeightedForces => "p2",
            EngineKind::P3Threshold => "p3",
        }
    }

    pub fn is_stochastic(&self) -> bool {
        matches!(self, EngineKind::P0Stochastic { .. })
    }

    /// Generator for a stochastic engine.
    pub fn rng(&self) -> Option<ChaCha8Rng> {
        match *self {
            EngineKind::P0Stochastic { seed, stream } => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(stream);
                Some(rng)
            }
            _ => None,
        }
    }
}

/// The phases of one simulation step, in execution order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepPhase {
    AttritionRates,
    SurvivalUpdate,
    IndexUpdate,
    Accelerations,
    VerletStep,
}

/// Within-step execution order shared by every engine.
pub fn step_order() -> &'static [StepPhase] {
    &[
        StepPhase::AttritionRates,
        StepPhase::SurvivalUpdate,
        StepPhase::IndexUpdate,
        StepPhase::Accelerations,
        StepPhase::VerletStep,
    ]
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOptions {
    /// Keep a full snapshot every `snapshot_stride` steps (the first and
    /// last steps are always kept).
    pub snapshot_stride: usize,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions { snapshot_stride: 1 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Snapshot {
    pub step: usize,
    pub state: SwarmState,
    pub survival: SurvivalVector,
    /// Present for the engines that track an index set (P0, P3).
    pub alive: Option<IndexSet>,
}

/// Aggregate survival at one step, recorded for every step regardless of
/// snapshot decimation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StepSummary {
    pub step: usize,
    pub time: f64,
    pub q_hvu: f64,
    pub mean_q_attackers: f64,
    pub mean_q_defenders: f64,
    pub hvu_alive: bool,
    pub attackers_alive: usize,
    pub defenders_alive: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimResult {
    pub engine: EngineKind,
    pub snapshots: Vec<Snapshot>,
    pub summaries: Vec<StepSummary>,
    /// Probability (P1-P3) or indicator (P0) that the HVU is destroyed.
    pub terminal_cost: f64,
    pub hvu_destroyed: Option<bool>,
    pub step_of_destruction: Option<usize>,
    pub final_state: SwarmState,
    pub final_survival: SurvivalVector,
    pub final_alive: Option<IndexSet>,
}

impl SimResult {
    /// Number of steps actually simulated.
    pub fn steps_completed(&self) -> usize {
        self.summaries.len() - 1
    }
}

/// Simulates the configured engagement with the defenders following `trajectories`.
pub fn run(
    config: &ValidatedConfig,
    trajectories: &TrajectoryParams,
    engine: EngineKind,
) -> Result<SimResult> {
    run_with(config, trajectories, engine, &RunOptions::default())
}

pub fn run_with(
    config: &ValidatedConfig,
    trajectories: &TrajectoryParams,
    engine: EngineKind,
    options: &RunOptions,
) -> Result<SimResult> {
    let initial = config.initial_state()?;
    run_from(config, &initial, trajectories, engine, options)
}

/// Like [`run_with`] but starting from an explicit state. Defender positions
/// in `initial` are replaced by the trajectories evaluated at time zero.
pub fn run_from(
    config: &ValidatedConfig,
    initial: &SwarmState,
    trajectories: &TrajectoryParams,
    engine: EngineKind,
    options: &RunOptions,
) -> Result<SimResult> {
    match engine.rng() {
        Some(mut rng) => simulate(
            config,
            initial,
            trajectories,
            engine,
            Some(&mut rng),
            options,
        ),
        None => simulate::<ChaCha8Rng>(config, initial, trajectories, engine, None, options),
    }
}

/// Runs the stochastic formulation with a caller-supplied generator.
///
/// Each step draws exactly one uniform per agent (HVU, attackers, defenders,
/// in that order), dead or alive, until the run ends.
pub fn run_stochastic_with_rng<R: Rng>(
    config: &ValidatedConfig,
    initial: &SwarmState,
    trajectories: &TrajectoryParams,
    rng: &mut R,
    options: &RunOptions,
) -> Result<SimResult> {
    let engine = EngineKind::P0Stochastic { seed: 0, stream: 0 };
    simulate(config, initial, trajectories, engine, Some(rng), options)
}

fn summarize(
    step: usize,
    state: &SwarmState,
    q: &SurvivalVector,
    alive: Option<&IndexSet>,
) -> StepSummary {
    StepSummary {
        step,
        time: state.time,
        q_hvu: q.hvu,
        mean_q_attackers: q.mean_attackers(),
        mean_q_defenders: q.mean_defenders(),
        hvu_alive: alive.is_none_or(IndexSet::hvu_alive),
        attackers_alive: alive.map_or(state.n_attackers(), IndexSet::alive_attackers),
        defenders_alive: alive.map_or(state.n_defenders(), IndexSet::alive_defenders),
    }
}

fn simulate<R: Rng>(
    config: &ValidatedConfig,
    initial: &SwarmState,
    trajectories: &TrajectoryParams,
    engine: EngineKind,
    mut rng: Option<&mut R>,
    options: &RunOptions,
) -> Result<SimResult> {
    trajectories.check(config)?;
    initial.check(config)?;
    let n = config.n_attackers;
    let m = config.n_defenders;
    let dt = config.dt;
    let forces = ForceModel::from(&**config);
    let stride = options.snapshot_stride.max(1);

    let mut state = initial.clone();
    state.time = 0.0;
    let (pos, vel) = defenders_at(trajectories, 0.0)?;
    state.defender_pos = pos;
    state.defender_vel = vel;

    let tracks_index = matches!(
        engine,
        EngineKind::P0Stochastic { .. } | EngineKind::P3Threshold
    );
    let mut q = SurvivalVector::certain(n, m);
    let mut alive = tracks_index.then(|| IndexSet::full(n, m));

    let mut snapshots = vec![Snapshot {
        step: 0,
        state: state.clone(),
        survival: q.clone(),
        alive: alive.clone(),
    }];
    let mut summaries = vec![summarize(0, &state, &q, alive.as_ref())];
    let mut step_of_destruction = None;

    for k in 0..config.n_steps {
        let step = k + 1;
        let advance = |state: &SwarmState,
                       q: &SurvivalVector,
                       alive: &Option<IndexSet>,
                       rng: &mut Option<&mut R>|
         -> Result<(SwarmState, SurvivalVector, Option<IndexSet>)> {
            let rates = attrition_rates(state, config);

            let (q_next, alive_next) = match engine {
                EngineKind::P1Decoupled | EngineKind::P2WeightedForces => {
                    (survival_step(q, &rates, q, dt)?, None)
                }
                EngineKind::P3Threshold => {
                    let alive = alive.as_ref().expect("P3 tracks an index set");
                    let mut q_next = survival_step(q, &rates, &alive.indicators(), dt)?;
                    hold_dead(&mut q_next, q, alive);
                    let alive_next = threshold_index_update(alive, &q_next, config.threshold);
                    (q_next, Some(alive_next))
                }
                EngineKind::P0Stochastic { .. } => {
                    let alive = alive.as_ref().expect("P0 tracks an index set");
                    let mut q_next = survival_step(q, &rates, &alive.indicators(), dt)?;
                    hold_dead(&mut q_next, q, alive);
                    let rng = rng.as_mut().expect("P0 needs a generator");
                    let omega = PerAgent {
                        hvu: rng.random::<f64>(),
                        attackers: (0..n).map(|_| rng.random::<f64>()).collect(),
                        defenders: (0..m).map(|_| rng.random::<f64>()).collect(),
                    };
                    let alive_next = stochastic_index_update(alive, q, &q_next, &omega)?;
                    (q_next, Some(alive_next))
                }
            };

            let mut moving = state.clone();
            if let Some(alive_next) = &alive_next {
                for (i, v) in moving.attacker_vel.iter_mut().enumerate() {
                    if !alive_next.attacker_alive(i) {
                        *v = crate::Vec3::zeros();
                    }
                }
            }
            let mode = match (&engine, &alive_next) {
                (EngineKind::P1Decoupled, _) => InteractionMode::Unweighted,
                (EngineKind::P2WeightedForces, _) => InteractionMode::ProbabilityWeighted(&q_next),
                (_, Some(a)) => InteractionMode::IndexMasked(a),
                (_, None) => unreachable!("index-set engines always produce a set"),
            };
            let mut next = verlet_step(
                &moving,
                trajectories,
                |s| attacker_accelerations(s, mode, &forces),
                dt,
            )?;
            next.time = step as f64 * dt;
            Ok((next, q_next, alive_next))
        };

        let (next, q_next, alive_next) =
            advance(&state, &q, &alive, &mut rng).map_err(|e| e.at_step(k))?;
        state = next;
        q = q_next;
        alive = alive_next;

        summaries.push(summarize(step, &state, &q, alive.as_ref()));
        let hvu_lost = engine.is_stochastic() && !alive.as_ref().is_some_and(IndexSet::hvu_alive);
        if step % stride == 0 || step == config.n_steps || hvu_lost {
            snapshots.push(Snapshot {
                step,
                state: state.clone(),
                survival: q.clone(),
                alive: alive.clone(),
            });
        }
        if hvu_lost {
            step_of_destruction = Some(step);
            break;
        }
    }

    let (terminal_cost, hvu_destroyed) = if engine.is_stochastic() {
        let destroyed = step_of_destruction.is_some();
        (if destroyed { 1.0 } else { 0.0 }, Some(destroyed))
    } else {
        (1.0 - q.hvu, None)
    };

    Ok(SimResult {
        engine,
        snapshots,
        summaries,
        terminal_cost,
        hvu_destroyed,
        step_of_destruction,
        final_state: state,
        final_survival: q,
        final_alive: alive,
    })
}
