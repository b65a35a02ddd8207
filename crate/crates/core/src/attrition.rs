//! Damage kernels, survival-probability recursions, and index-set updates.

use libm::erfc;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Result, SwarmError};
use crate::scenario::{AgentId, AgentKind, PerAgent, ScenarioConfig, SwarmState};

/// Survival probabilities of the HVU, every attacker, and every defender.
pub type SurvivalVector = PerAgent<f64>;

impl SurvivalVector {
    pub fn certain(n_attackers: usize, n_defenders: usize) -> Self {
        PerAgent::filled(n_attackers, n_defenders, 1.0)
    }

    pub fn mean_attackers(&self) -> f64 {
        mean_or_one(&self.attackers)
    }

    pub fn mean_defenders(&self) -> f64 {
        mean_or_one(&self.defenders)
    }
}

fn mean_or_one(values: &[f64]) -> f64 {
    if values.is_empty() {
        1.0
    } else {
        values.iter().sum::<f64>() / values.len() as f64
    }
}

/// Agents still alive.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct IndexSet(PerAgent<bool>);

impl IndexSet {
    pub fn full(n_attackers: usize, n_defenders: usize) -> Self {
        IndexSet(PerAgent::filled(n_attackers, n_defenders, true))
    }

    pub fn n_attackers(&self) -> usize {
        self.0.n_attackers()
    }

    pub fn n_defenders(&self) -> usize {
        self.0.n_defenders()
    }

    pub fn contains(&self, id: AgentId) -> bool {
        self.0.get(id).copied().unwrap_or(false)
    }

    pub fn hvu_alive(&self) -> bool {
        self.0.hvu
    }

    pub fn attacker_alive(&self, i: usize) -> bool {
        self.0.attackers[i]
    }

    pub fn defender_alive(&self, k: usize) -> bool {
        self.0.defenders[k]
    }

    /// Returns whether the agent was present.
    pub fn remove(&mut self, id: AgentId) -> bool {
        match self.0.get_mut(id) {
            Some(flag) => std::mem::replace(flag, false),
            None => false,
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = AgentId> + '_ {
        self.0.iter().filter(|(_, &a)| a).map(|(id, _)| id)
    }

    pub fn len(&self) -> usize {
        self.iter().count()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn alive_attackers(&self) -> usize {
        self.0.attackers.iter().filter(|&&a| a).count()
    }

    pub fn alive_defenders(&self) -> usize {
        self.0.defenders.iter().filter(|&&a| a).count()
    }

    pub fn is_subset_of(&self, other: &IndexSet) -> bool {
        self.0.same_shape(&other.0) && self.iter().all(|id| other.contains(id))
    }

    /// 1.0 for alive agents, 0.0 otherwise.
    pub fn indicators(&self) -> PerAgent<f64> {
        self.0.map(|_, &a| if a { 1.0 } else { 0.0 })
    }

    pub fn flags(&self) -> &PerAgent<bool> {
        &self.0
    }
}

/// Inverted-normal damage kernel: `2 (1 - N(u))` at `u = sq_dist / sigma`.
///
/// Equals 1 at zero distance and decays monotonically to 0.
pub fn damage_kernel(sq_dist: f64, sigma: f64) -> f64 {
    erfc(sq_dist / sigma / std::f64::consts::SQRT_2)
}

/// Pairwise attrition rates (per second) at one geometry.
#[derive(Debug, Clone, PartialEq)]
pub struct AttritionRates {
    /// `att[(i, k)]`: rate at which defender `k` destroys attacker `i`.
    pub att: DMatrix<f64>,
    /// `def[(k, i)]`: rate at which attacker `i` destroys defender `k`.
    pub def: DMatrix<f64>,
    /// `hvu[i]`: rate at which attacker `i` destroys the HVU.
    pub hvu: DVector<f64>,
}

pub fn attrition_rates(state: &SwarmState, config: &ScenarioConfig) -> AttritionRates {
    let n = state.n_attackers();
    let m = state.n_defenders();
    let mut att = DMatrix::zeros(n, m);
    let mut def = DMatrix::zeros(m, n);
    let mut hvu = DVector::zeros(n);
    for i in 0..n {
        let xi = state.attacker_pos[i];
        for k in 0..m {
            let sq = (xi - state.defender_pos[k]).norm_squared();
            att[(i, k)] = config.lambda_d * damage_kernel(sq, config.sigma_d);
            def[(k, i)] = config.lambda_a * damage_kernel(sq, config.sigma_a);
        }
        hvu[i] =
            config.lambda_a * damage_kernel((state.hvu_pos - xi).norm_squared(), config.sigma_a);
    }
    AttritionRates { att, def, hvu }
}

fn factor(id: AgentId, rate: f64, weight: f64, dt: f64) -> Result<f64> {
    let f = 1.0 - rate * weight * dt;
    if f > 0.0 && f <= 1.0 {
        Ok(f)
    } else {
        Err(SwarmError::RateOverflow {
            agent: id,
            factor: f,
        })
    }
}

/// One step of the mutual-attrition product recursions.
///
/// Each target's survival is multiplied by `1 - rate * w * dt` for every
/// enemy shooter, where `w` is the shooter's entry in `shooter_weights`
/// (the HVU entry is ignored; the HVU does not shoot).
pub fn survival_step(
    q: &SurvivalVector,
    rates: &AttritionRates,
    shooter_weights: &PerAgent<f64>,
    dt: f64,
) -> Result<SurvivalVector> {
    let n = q.n_attackers();
    let m = q.n_defenders();
    if !q.same_shape(shooter_weights)
        || rates.att.shape() != (n, m)
        || rates.def.shape() != (m, n)
        || rates.hvu.len() != n
    {
        return Err(SwarmError::ShapeMismatch(
            "survival vector, rates, and shooter weights disagree on agent counts".into(),
        ));
    }
    let mut next = q.clone();
    for i in 0..n {
        let id = AgentId::attacker(i);
        let mut p = q.attackers[i];
        for k in 0..m {
            p *= factor(id, rates.att[(i, k)], shooter_weights.defenders[k], dt)?;
        }
        next.attackers[i] = p;
    }
    for k in 0..m {
        let id = AgentId::defender(k);
        let mut p = q.defenders[k];
        for i in 0..n {
            p *= factor(id, rates.def[(k, i)], shooter_weights.attackers[i], dt)?;
        }
        next.defenders[k] = p;
    }
    let mut p = q.hvu;
    for i in 0..n {
        p *= factor(AgentId::HVU, rates.hvu[i], shooter_weights.attackers[i], dt)?;
    }
    next.hvu = p;
    Ok(next)
}

/// Random removal: an alive agent survives the step iff its draw falls
/// below its conditional survival ratio `q_after / q_before`.
pub fn stochastic_index_update(
    alive: &IndexSet,
    q_before: &SurvivalVector,
    q_after: &SurvivalVector,
    omega: &PerAgent<f64>,
) -> Result<IndexSet> {
    if !alive.0.same_shape(q_before) || !q_before.same_shape(q_after) || !q_after.same_shape(omega)
    {
        return Err(SwarmError::ShapeMismatch(
            "index set, survival vectors, and draws disagree on agent counts".into(),
        ));
    }
    let mut next = alive.clone();
    for id in alive.iter() {
        let before = *q_before.get(id).expect("shape checked");
        let after = *q_after.get(id).expect("shape checked");
        if before <= 0.0 {
            return Err(SwarmError::InconsistentState(format!(
                "{id} is alive with survival probability {before}"
            )));
        }
        let ratio = after / before;
        if *omega.get(id).expect("shape checked") >= ratio {
            next.remove(id);
        }
    }
    Ok(next)
}

/// Deterministic removal of every alive agent whose survival is strictly below `tau`.
pub fn threshold_index_update(alive: &IndexSet, q: &SurvivalVector, tau: f64) -> IndexSet {
    let mut next = alive.clone();
    for id in alive.iter() {
        if q.get(id).is_some_and(|&p| p < tau) {
            next.remove(id);
        }
    }
    next
}

/// Restores `previous` values for attackers and defenders missing from `alive`.
pub(crate) fn hold_dead(next: &mut SurvivalVector, previous: &SurvivalVector, alive: &IndexSet) {
    for id in previous.iter().map(|(id, _)| id) {
        if id.kind != AgentKind::Hvu && !alive.contains(id) {
            *next.get_mut(id).expect("same shape") = *previous.get(id).expect("same shape");
        }
    }
}
