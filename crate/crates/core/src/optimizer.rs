//! Direct-method search over defender Bernstein control points.
//!
//! The decision variables are the control points of every defender
//! trajectory. The objective is the terminal HVU destruction probability
//! under a smooth formulation plus a quadratic penalty on per-axis defender
//! accelerations above `u_max`, sampled on the simulation grid. The search
//! is a multi-start compass (pattern) search.

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::dynamics::TrajectoryParams;
use crate::engines::{run_from, EngineKind, RunOptions};
use crate::error::{Result, SwarmError};
use crate::scenario::{SwarmState, ValidatedConfig};
use crate::Vec3;

/// Fixed defender starting conditions, enforced through the first two control points.
#[derive(Debug, Clone, PartialEq)]
pub struct DefenderStart {
    pub positions: Vec<Vec3>,
    pub velocities: Vec<Vec3>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ObjectiveSpec {
    pub engine: EngineKind,
    pub penalty_weight: f64,
    pub endpoint_constraint: Option<DefenderStart>,
}

impl ObjectiveSpec {
    /// Defenders start at rest from their layout positions.
    pub fn pinned_to_layout(
        engine: EngineKind,
        penalty_weight: f64,
        config: &ValidatedConfig,
    ) -> Result<Self> {
        let initial = config.initial_state()?;
        Ok(ObjectiveSpec {
            engine,
            penalty_weight,
            endpoint_constraint: Some(DefenderStart {
                velocities: vec![Vec3::zeros(); initial.defender_pos.len()],
                positions: initial.defender_pos,
            }),
        })
    }

    fn check(&self, config: &ValidatedConfig) -> Result<()> {
        if self.engine.is_stochastic() {
            return Err(SwarmError::InvalidConfig(
                "the objective needs a deterministic formulation (p1, p2, or p3)".into(),
            ));
        }
        if !(self.penalty_weight.is_finite() && self.penalty_weight >= 0.0) {
            return Err(SwarmError::InvalidConfig(
                "penalty_weight must be finite and >= 0".into(),
            ));
        }
        if let Some(start) = &self.endpoint_constraint {
            if start.positions.len() != config.n_defenders
                || start.velocities.len() != config.n_defenders
            {
                return Err(SwarmError::ShapeMismatch(
                    "endpoint constraint does not cover every defender".into(),
                ));
            }
        }
        Ok(())
    }
}

/// Sets `c0` and `c1` so the trajectory leaves `start` with the given velocity.
pub fn apply_endpoint(params: &mut TrajectoryParams, start: &DefenderStart) {
    let n = params.degree();
    let lead = params.horizon() / n as f64;
    for (k, (p, v)) in start.positions.iter().zip(&start.velocities).enumerate() {
        params.set_control_point(k, 0, *p);
        params.set_control_point(k, 1, p + v * lead);
    }
}

/// `sum_k sum_axes max(0, |a| - u_max)^2 dt` over defenders and grid times.
pub fn control_penalty(params: &TrajectoryParams, config: &ValidatedConfig) -> Result<f64> {
    let mut total = 0.0;
    for k in 0..params.n_defenders() {
        for step in 0..=config.n_steps {
            let a = params.acceleration(k, step as f64 * config.dt)?;
            for excess in a.iter().map(|c| (c.abs() - config.u_max).max(0.0)) {
                total += excess * excess * config.dt;
            }
        }
    }
    Ok(total)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ObjectiveValue {
    pub terminal_cost: f64,
    /// Unweighted control-bound violation.
    pub penalty: f64,
    pub total: f64,
}

/// Objective with its parts, after applying the endpoint constraint.
pub fn evaluate(
    params: &TrajectoryParams,
    spec: &ObjectiveSpec,
    config: &ValidatedConfig,
) -> Result<ObjectiveValue> {
    spec.check(config)?;
    let initial = config.initial_state()?;
    evaluate_from(params, spec, config, &initial)
}

fn evaluate_from(
    params: &TrajectoryParams,
    spec: &ObjectiveSpec,
    config: &ValidatedConfig,
    initial: &SwarmState,
) -> Result<ObjectiveValue> {
    let mut params = params.clone();
    if let Some(start) = &spec.endpoint_constraint {
        apply_endpoint(&mut params, start);
    }
    let penalty = control_penalty(&params, config)?;
    let options = RunOptions {
        snapshot_stride: config.n_steps.max(1),
    };
    let res = run_from(config, initial, &params, spec.engine, &options)?;
    Ok(ObjectiveValue {
        terminal_cost: res.terminal_cost,
        penalty,
        total: res.terminal_cost + spec.penalty_weight * penalty,
    })
}

/// Scalar objective; a failed simulation scores `f64::INFINITY`.
pub fn objective(params: &TrajectoryParams, spec: &ObjectiveSpec, config: &ValidatedConfig) -> f64 {
    evaluate(params, spec, config).map_or(f64::INFINITY, |v| v.total)
}

/// Defenders held at their layout positions for the whole engagement.
pub fn baseline_stationary(config: &ValidatedConfig) -> Result<TrajectoryParams> {
    let initial = config.initial_state()?;
    Ok(TrajectoryParams::stationary(
        &initial.defender_pos,
        config.bernstein_degree,
        config.horizon(),
    ))
}

/// Defenders advance from rest toward the attacker centroid, covering the
/// largest of 1/2, 1/4, ... of the gap that keeps accelerations within `u_max`.
pub fn intercept_start(config: &ValidatedConfig, initial: &SwarmState) -> Result<TrajectoryParams> {
    let mut params = TrajectoryParams::stationary(
        &initial.defender_pos,
        config.bernstein_degree,
        config.horizon(),
    );
    if config.bernstein_degree < 2 || initial.attacker_pos.is_empty() {
        return Ok(params);
    }
    let centroid = initial.attacker_pos.iter().sum::<Vec3>() / initial.attacker_pos.len() as f64;
    let mut fraction = 0.5;
    for _ in 0..8 {
        for (k, s) in initial.defender_pos.iter().enumerate() {
            let target = s + (centroid - s) * fraction;
            for m in 2..=config.bernstein_degree {
                params.set_control_point(k, m, target);
            }
        }
        if control_penalty(&params, config)? == 0.0 {
            break;
        }
        fraction *= 0.5;
    }
    Ok(params)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchSettings {
    /// Randomly perturbed copies of the stationary baseline added to the start set.
    pub perturbed_starts: usize,
    /// Initial compass step; `None` uses a quarter of the defender standoff radius.
    pub initial_step: Option<f64>,
    /// The search stops once the step shrinks below this fraction of the initial step.
    pub min_step_fraction: f64,
    /// Poll points evaluated together before the accept/reject decision.
    pub batch: usize,
}

impl Default for SearchSettings {
    fn default() -> Self {
        SearchSettings {
            perturbed_starts: 2,
            initial_step: None,
            min_step_fraction: 1e-3,
            batch: 8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OptimizationResult {
    /// Best trajectories with the endpoint constraint applied.
    pub best_params: TrajectoryParams,
    pub best_cost: f64,
    pub best_value: ObjectiveValue,
    /// `(evaluation index, objective)` for every evaluation in order.
    pub history: Vec<(usize, f64)>,
    pub evaluations: usize,
    /// False when the best candidate violates the control bound or failed to simulate.
    pub feasible: bool,
    /// Objective of the stationary baseline (always the first start).
    pub baseline_cost: f64,
}

impl OptimizationResult {
    pub fn running_best(&self) -> Vec<f64> {
        self.history
            .iter()
            .scan(f64::INFINITY, |best, &(_, c)| {
                *best = best.min(c);
                Some(*best)
            })
            .collect()
    }
}

struct Evaluator<'a> {
    spec: &'a ObjectiveSpec,
    config: &'a ValidatedConfig,
    initial: SwarmState,
    budget: usize,
    history: Vec<(usize, f64)>,
}

impl Evaluator<'_> {
    fn remaining(&self) -> usize {
        self.budget - self.history.len()
    }

    /// Evaluates up to `remaining()` candidates in parallel, in order.
    fn batch(&mut self, candidates: &[TrajectoryParams]) -> Vec<ObjectiveValue> {
        let take = candidates.len().min(self.remaining());
        let values: Vec<ObjectiveValue> = candidates[..take]
            .par_iter()
            .map(|p| {
                evaluate_from(p, self.spec, self.config, &self.initial).unwrap_or(ObjectiveValue {
                    terminal_cost: f64::INFINITY,
                    penalty: f64::INFINITY,
                    total: f64::INFINITY,
                })
            })
            .collect();
        for v in &values {
            let idx = self.history.len();
            self.history.push((idx, v.total));
        }
        values
    }
}

/// Multi-start compass search within `budget` objective evaluations.
pub fn optimize(
    spec: &ObjectiveSpec,
    config: &ValidatedConfig,
    budget: usize,
    seed: u64,
) -> Result<OptimizationResult> {
    optimize_with(spec, config, budget, seed, &SearchSettings::default())
}

pub fn optimize_with(
    spec: &ObjectiveSpec,
    config: &ValidatedConfig,
    budget: usize,
    seed: u64,
    settings: &SearchSettings,
) -> Result<OptimizationResult> {
    spec.check(config)?;
    if budget == 0 {
        return Err(SwarmError::InvalidConfig(
            "budget must be at least 1".into(),
        ));
    }
    let initial = config.initial_state()?;
    let step0 = settings
        .initial_step
        .unwrap_or(0.25 * config.layout.defender_radius.max(config.d1));
    let pinned = spec.endpoint_constraint.is_some();
    let degree = config.bernstein_degree;
    let first_free = if pinned { 2 } else { 0 };

    let mut free = Vec::new();
    let shape = TrajectoryParams::zeros(config.n_defenders, degree, config.horizon());
    for k in 0..config.n_defenders {
        for axis in 0..3 {
            for m in first_free..=degree {
                free.push(shape.flat_index(k, axis, m));
            }
        }
    }

    let pin = |mut p: TrajectoryParams| {
        if let Some(start) = &spec.endpoint_constraint {
            apply_endpoint(&mut p, start);
        }
        p
    };

    let baseline = pin(TrajectoryParams::stationary(
        &initial.defender_pos,
        degree,
        config.horizon(),
    ));
    let mut starts = vec![baseline.clone(), pin(intercept_start(config, &initial)?)];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..settings.perturbed_starts {
        let mut p = baseline.clone();
        for &i in &free {
            p.coeffs_mut()[i] += step0 * (2.0 * rng.random::<f64>() - 1.0);
        }
        starts.push(p);
    }

    let mut eval = Evaluator {
        spec,
        config,
        initial,
        budget,
        history: Vec::new(),
    };
    let start_values = eval.batch(&starts);
    let baseline_cost = start_values[0].total;
    let (best_start, _) =
        start_values
            .iter()
            .enumerate()
            .fold((0, f64::INFINITY), |(bi, bc), (i, v)| {
                if v.total < bc {
                    (i, v.total)
                } else {
                    (bi, bc)
                }
            });
    let mut best = starts[best_start].clone();
    let mut best_value = start_values[best_start];

    // compass directions: (free coordinate, sign)
    let directions: Vec<(usize, f64)> = free.iter().flat_map(|&i| [(i, 1.0), (i, -1.0)]).collect();
    let mut step = step0;
    let min_step = step0 * settings.min_step_fraction;
    let batch_size = settings.batch.max(1);
    let mut cursor = 0;
    let mut since_improvement = 0;

    while !directions.is_empty() && eval.remaining() > 0 && step >= min_step {
        let picks: Vec<(usize, f64)> = (0..batch_size.min(directions.len()))
            .map(|j| directions[(cursor + j) % directions.len()])
            .collect();
        let candidates: Vec<TrajectoryParams> = picks
            .iter()
            .map(|&(i, sign)| {
                let mut p = best.clone();
                p.coeffs_mut()[i] += sign * step;
                p
            })
            .collect();
        let values = eval.batch(&candidates);
        cursor = (cursor + values.len()) % directions.len();

        let winner = values
            .iter()
            .enumerate()
            .filter(|(_, v)| v.total < best_value.total)
            .min_by(|a, b| a.1.total.total_cmp(&b.1.total));
        match winner {
            Some((j, v)) => {
                best = candidates[j].clone();
                best_value = *v;
                since_improvement = 0;
            }
            None => {
                since_improvement += values.len();
                if since_improvement >= directions.len() {
                    step *= 0.5;
                    since_improvement = 0;
                }
            }
        }
    }

    Ok(OptimizationResult {
        feasible: best_value.total.is_finite() && best_value.penalty == 0.0,
        best_cost: best_value.total,
        best_value,
        best_params: best,
        evaluations: eval.history.len(),
        history: eval.history,
        baseline_cost,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::{validate, DefenderFormation, Layout, ScenarioConfig};

    fn config(lambda: f64) -> ValidatedConfig {
        validate(ScenarioConfig {
            n_attackers: 6,
            n_defenders: 2,
            leader_gain: 1.0,
            damping: 0.5,
            d0: 1.0,
            d1: 3.0,
            s0: 2.0,
            repulsion_gain_intra: 1.0,
            repulsion_gain_def: 3.0,
            lambda_a: lambda,
            lambda_d: 2.0 * lambda,
            sigma_a: 3.0,
            sigma_d: 4.5,
            u_max: 1.0,
            dt: 0.05,
            n_steps: 120,
            threshold: 0.5,
            bernstein_degree: 4,
            layout: Layout {
                attacker_radius: 8.0,
                attacker_shell_width: 1.0,
                attacker_sector_half_angle_deg: 30.0,
                attacker_axis: [1.0, 0.0, 0.0],
                planar: false,
                defender_radius: 3.0,
                defender_formation: DefenderFormation::Ring,
                min_separation: None,
                max_attempts: 1000,
                seed: 4,
            },
            hvu_position: [0.0, 0.0, 0.0],
        })
        .unwrap()
    }

    fn spec(c: &ValidatedConfig, weight: f64) -> ObjectiveSpec {
        ObjectiveSpec::pinned_to_layout(EngineKind::P1Decoupled, weight, c).unwrap()
    }

    #[test]
    fn baseline_is_motionless() {
        let c = config(1.0);
        let b = baseline_stationary(&c).unwrap();
        let s = c.initial_state().unwrap();
        for k in 0..c.n_defenders {
            for t in [0.0, 1.3, c.horizon()] {
                assert_eq!(b.acceleration(k, t).unwrap(), Vec3::zeros());
                assert!((b.position(k, t).unwrap() - s.defender_pos[k]).norm() < 1e-12);
            }
        }
        assert_eq!(objective(&b, &spec(&c, 1.0), &config(0.0)), 0.0);
    }

    #[test]
    fn penalty_is_positive_and_linear_in_weight() {
        let c = config(1.0);
        let mut p = baseline_stationary(&c).unwrap();
        // pull the last control point far away: accelerations far beyond u_max
        let k = 0;
        let far = p.control_point(k, 4) + Vec3::new(40.0, 0.0, 0.0);
        p.set_control_point(k, 4, far);
        let one = evaluate(&p, &spec(&c, 1.0), &c).unwrap();
        let two = evaluate(&p, &spec(&c, 2.0), &c).unwrap();
        assert!(one.penalty > 0.0);
        assert!(one.total > one.terminal_cost);
        assert_eq!(one.terminal_cost, two.terminal_cost);
        let pen1 = one.total - one.terminal_cost;
        let pen2 = two.total - two.terminal_cost;
        assert!((pen2 - 2.0 * pen1).abs() <= 1e-12 * pen2);
    }

    #[test]
    fn penalty_slope_matches_analytic_derivative() {
        let c = config(1.0);
        let mut p = baseline_stationary(&c).unwrap();
        let idx = p.flat_index(1, 0, 3);
        p.coeffs_mut()[idx] += 25.0;
        let analytic: f64 = (0..=c.n_steps)
            .map(|step| {
                let t = step as f64 * c.dt;
                let a = p.acceleration(1, t).unwrap().x;
                let excess = (a.abs() - c.u_max).max(0.0);
                2.0 * excess * a.signum() * p.acceleration_sensitivity(3, t).unwrap() * c.dt
            })
            .sum();
        let h = 1e-5;
        let mut plus = p.clone();
        plus.coeffs_mut()[idx] += h;
        let mut minus = p.clone();
        minus.coeffs_mut()[idx] -= h;
        let fd = (control_penalty(&plus, &c).unwrap() - control_penalty(&minus, &c).unwrap())
            / (2.0 * h);
        assert!(analytic.abs() > 0.0);
        assert!(
            ((fd - analytic) / analytic).abs() < 1e-4,
            "{fd} vs {analytic}"
        );
    }

    #[test]
    fn budget_of_one_returns_the_baseline() {
        let c = config(1.0);
        let s = spec(&c, 10.0);
        let r = optimize(&s, &c, 1, 0).unwrap();
        assert_eq!(r.evaluations, 1);
        assert_eq!(r.best_params, baseline_stationary(&c).unwrap());
        assert_eq!(r.best_cost, r.baseline_cost);
    }

    #[test]
    fn search_is_monotone_and_deterministic() {
        let c = config(1.0);
        let s = spec(&c, 10.0);
        let a = optimize(&s, &c, 60, 5).unwrap();
        let b = optimize(&s, &c, 60, 5).unwrap();
        assert_eq!(a, b);
        assert!(a.evaluations <= 60);
        assert!(a.best_cost <= a.baseline_cost);
        let running = a.running_best();
        assert!(running.windows(2).all(|w| w[1] <= w[0]));
        assert_eq!(*running.last().unwrap(), a.best_cost);
        // the returned parameters reproduce the reported cost
        assert_eq!(objective(&a.best_params, &s, &c), a.best_cost);
    }

    #[test]
    fn stochastic_objective_is_rejected() {
        let c = config(1.0);
        let s = ObjectiveSpec {
            engine: EngineKind::p0(1),
            penalty_weight: 1.0,
            endpoint_constraint: None,
        };
        assert!(optimize(&s, &c, 10, 0).is_err());
        assert_eq!(
            objective(&baseline_stationary(&c).unwrap(), &s, &c),
            f64::INFINITY
        );
    }

    #[test]
    fn smooth_objective_is_continuous() {
        let c = config(1.0);
        let base = baseline_stationary(&c).unwrap();
        for engine in [EngineKind::P1Decoupled, EngineKind::P2WeightedForces] {
            let s = ObjectiveSpec::pinned_to_layout(engine, 1.0, &c).unwrap();
            let idx = base.flat_index(0, 1, 3);
            let f0 = objective(&base, &s, &c);
            let mut p = base.clone();
            p.coeffs_mut()[idx] += 1e-7;
            let f1 = objective(&p, &s, &c);
            assert!((f1 - f0).abs() < 1e-5, "{engine:?}: {f0} -> {f1}");
        }
        let s = ObjectiveSpec::pinned_to_layout(EngineKind::P3Threshold, 1.0, &c).unwrap();
        assert!(objective(&base, &s, &c).is_finite());
    }

    #[test]
    fn pinned_start_fixes_first_two_control_points() {
        let c = config(1.0);
        let s = spec(&c, 1.0);
        let r = optimize(&s, &c, 40, 1).unwrap();
        let start = s.endpoint_constraint.as_ref().unwrap();
        for k in 0..c.n_defenders {
            assert_eq!(r.best_params.control_point(k, 0), start.positions[k]);
            assert_eq!(r.best_params.control_point(k, 1), start.positions[k]);
        }
    }
}
