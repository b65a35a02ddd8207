//! Attacker equations of motion, Bernstein defender trajectories, and the
//! velocity-Verlet step that advances an engagement by one tick.

use serde::{Deserialize, Serialize};

use crate::attrition::IndexSet;
use crate::error::{Result, SwarmError};
use crate::scenario::{AgentId, PerAgent, ScenarioConfig, SwarmState};
use crate::Vec3;

/// Relative distance (in units of `d0`) below which a pair counts as coincident.
pub const SINGULAR_PAIR_TOLERANCE: f64 = 1e-9;

/// How neighbours contribute to an attacker's acceleration.
#[derive(Debug, Clone, Copy)]
pub enum InteractionMode<'a> {
    /// Every agent acts with full strength.
    Unweighted,
    /// Each source term is scaled by the source's weight (its survival probability).
    ProbabilityWeighted(&'a PerAgent<f64>),
    /// Only agents in the set act; attackers outside it do not move.
    IndexMasked(&'a IndexSet),
}

impl InteractionMode<'_> {
    fn attacker_weight(&self, i: usize) -> f64 {
        match self {
            InteractionMode::Unweighted => 1.0,
            InteractionMode::ProbabilityWeighted(w) => w.attackers[i],
            InteractionMode::IndexMasked(alive) => indicator(alive.attacker_alive(i)),
        }
    }

    fn defender_weight(&self, k: usize) -> f64 {
        match self {
            InteractionMode::Unweighted => 1.0,
            InteractionMode::ProbabilityWeighted(w) => w.defenders[k],
            InteractionMode::IndexMasked(alive) => indicator(alive.defender_alive(k)),
        }
    }

    fn check_shape(&self, n: usize, m: usize) -> Result<()> {
        let (a, d) = match self {
            InteractionMode::Unweighted => return Ok(()),
            InteractionMode::ProbabilityWeighted(w) => (w.n_attackers(), w.n_defenders()),
            InteractionMode::IndexMasked(alive) => (alive.n_attackers(), alive.n_defenders()),
        };
        if a != n || d != m {
            return Err(SwarmError::ShapeMismatch(format!(
                "interaction weights cover {a} attackers and {d} defenders, state has {n} and {m}"
            )));
        }
        Ok(())
    }
}

fn indicator(alive: bool) -> f64 {
    if alive {
        1.0
    } else {
        0.0
    }
}

/// Potential-field parameters for the attacker equations of motion.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ForceModel {
    pub d0: f64,
    pub d1: f64,
    pub s0: f64,
    pub gain_intra: f64,
    pub gain_def: f64,
    pub leader_gain: f64,
    pub damping: f64,
}

impl From<&ScenarioConfig> for ForceModel {
    fn from(c: &ScenarioConfig) -> Self {
        ForceModel {
            d0: c.d0,
            d1: c.d1,
            s0: c.s0,
            gain_intra: c.repulsion_gain_intra,
            gain_def: c.repulsion_gain_def,
            leader_gain: c.leader_gain,
            damping: c.damping,
        }
    }
}

impl ForceModel {
    fn singular_below(&self) -> f64 {
        SINGULAR_PAIR_TOLERANCE * self.d0
    }

    /// Attacker-attacker force magnitude; positive pushes the pair apart.
    ///
    /// Linear repulsion inside `d0`, a parabolic attraction well on
    /// `(d0, d1]` that vanishes at both ends, and nothing beyond `d1`.
    pub fn pair_force_intra(&self, r: f64) -> Result<f64> {
        if r < self.singular_below() {
            return Err(SwarmError::SingularDistance(r));
        }
        Ok(if r <= self.d0 {
            self.gain_intra * (self.d0 - r)
        } else if r <= self.d1 {
            self.gain_intra * (self.d0 - r) * (self.d1 - r) / (self.d1 - self.d0)
        } else {
            0.0
        })
    }

    /// Defender-on-attacker repulsion magnitude, zero from `s0` outward.
    pub fn pair_force_defender(&self, r: f64) -> Result<f64> {
        if r < self.singular_below() {
            return Err(SwarmError::SingularDistance(r));
        }
        Ok(if r <= self.s0 {
            self.gain_def * (self.s0 - r)
        } else {
            0.0
        })
    }
}

/// Accelerations of every attacker under the given interaction mode.
///
/// Attackers outside an [`InteractionMode::IndexMasked`] set receive zero.
/// An attacker sitting exactly on the HVU gets no leader pull.
pub fn attacker_accelerations(
    state: &SwarmState,
    mode: InteractionMode<'_>,
    forces: &ForceModel,
) -> Result<Vec<Vec3>> {
    let n = state.n_attackers();
    let m = state.n_defenders();
    mode.check_shape(n, m)?;
    let tiny = forces.singular_below();
    let d1_sq = forces.d1 * forces.d1;
    let s0_sq = forces.s0 * forces.s0;

    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        if let InteractionMode::IndexMasked(alive) = mode {
            if !alive.attacker_alive(i) {
                out.push(Vec3::zeros());
                continue;
            }
        }
        let xi = state.attacker_pos[i];
        let mut acc = Vec3::zeros();

        for j in 0..n {
            if j == i {
                continue;
            }
            let w = mode.attacker_weight(j);
            if w == 0.0 {
                continue;
            }
            let rel = xi - state.attacker_pos[j];
            let r_sq = rel.norm_squared();
            if r_sq > d1_sq {
                continue;
            }
            let r = r_sq.sqrt();
            if r < tiny {
                return Err(SwarmError::SingularPair {
                    a: AgentId::attacker(i),
                    b: AgentId::attacker(j),
                    distance: r,
                });
            }
            acc += rel * (w * forces.pair_force_intra(r)? / r);
        }

        for k in 0..m {
            let w = mode.defender_weight(k);
            if w == 0.0 {
                continue;
            }
            let rel = xi - state.defender_pos[k];
            let r_sq = rel.norm_squared();
            if r_sq > s0_sq {
                continue;
            }
            let r = r_sq.sqrt();
            if r < tiny {
                return Err(SwarmError::SingularPair {
                    a: AgentId::attacker(i),
                    b: AgentId::defender(k),
                    distance: r,
                });
            }
            acc += rel * (w * forces.pair_force_defender(r)? / r);
        }

        let to_hvu = state.hvu_pos - xi;
        let dist = to_hvu.norm();
        if dist > 0.0 {
            acc += to_hvu * (forces.leader_gain / dist);
        }
        acc -= forces.damping * state.attacker_vel[i];
        out.push(acc);
    }
    Ok(out)
}

/// Bernstein (Bézier) control points for every defender trajectory.
///
/// Defender `k` follows `s_k(t) = sum_m c[k][axis][m] B_{m,n}(t / horizon)`
/// on `[0, horizon]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "TrajectoryFile", into = "TrajectoryFile")]
pub struct TrajectoryParams {
    degree: usize,
    horizon: f64,
    n_defenders: usize,
    coeffs: Vec<f64>,
}

impl TrajectoryParams {
    pub fn zeros(n_defenders: usize, degree: usize, horizon: f64) -> Self {
        TrajectoryParams {
            degree,
            horizon,
            n_defenders,
            coeffs: vec![0.0; n_defenders * 3 * (degree + 1)],
        }
    }

    /// Every defender parked at the matching position for the whole horizon.
    pub fn stationary(positions: &[Vec3], degree: usize, horizon: f64) -> Self {
        let mut p = Self::zeros(positions.len(), degree, horizon);
        for (k, pos) in positions.iter().enumerate() {
            for axis in 0..3 {
                p.axis_mut(k, axis).fill(pos[axis]);
            }
        }
        p
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn n_defenders(&self) -> usize {
        self.n_defenders
    }

    /// All coefficients, ordered by defender, then axis, then control index.
    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [f64] {
        &mut self.coeffs
    }

    pub fn flat_index(&self, k: usize, axis: usize, m: usize) -> usize {
        (k * 3 + axis) * (self.degree + 1) + m
    }

    pub fn axis(&self, k: usize, axis: usize) -> &[f64] {
        let start = self.flat_index(k, axis, 0);
        &self.coeffs[start..start + self.degree + 1]
    }

    pub fn axis_mut(&mut self, k: usize, axis: usize) -> &mut [f64] {
        let start = self.flat_index(k, axis, 0);
        let len = self.degree + 1;
        &mut self.coeffs[start..start + len]
    }

    pub fn control_point(&self, k: usize, m: usize) -> Vec3 {
        Vec3::new(self.axis(k, 0)[m], self.axis(k, 1)[m], self.axis(k, 2)[m])
    }

    pub fn set_control_point(&mut self, k: usize, m: usize, p: Vec3) {
        for axis in 0..3 {
            self.axis_mut(k, axis)[m] = p[axis];
        }
    }

    fn unit_time(&self, t: f64) -> Result<f64> {
        let slack = 1e-9 * self.horizon;
        if !(t >= -slack && t <= self.horizon + slack) {
            return Err(SwarmError::OutsideHorizon {
                t,
                horizon: self.horizon,
            });
        }
        Ok((t / self.horizon).clamp(0.0, 1.0))
    }

    fn check_defender(&self, k: usize) -> Result<()> {
        if k >= self.n_defenders {
            return Err(SwarmError::ShapeMismatch(format!(
                "defender {k} requested from trajectories for {} defenders",
                self.n_defenders
            )));
        }
        Ok(())
    }

    /// Position of defender `k` at time `t`.
    pub fn position(&self, k: usize, t: f64) -> Result<Vec3> {
        self.check_defender(k)?;
        let s = self.unit_time(t)?;
        Ok(Vec3::from_fn(|axis, _| de_casteljau(self.axis(k, axis), s)))
    }

    pub fn velocity(&self, k: usize, t: f64) -> Result<Vec3> {
        self.derivative(k, t, 1)
    }

    pub fn acceleration(&self, k: usize, t: f64) -> Result<Vec3> {
        self.derivative(k, t, 2)
    }

    fn derivative(&self, k: usize, t: f64, order: usize) -> Result<Vec3> {
        self.check_defender(k)?;
        let s = self.unit_time(t)?;
        if order > self.degree {
            return Ok(Vec3::zeros());
        }
        let scale = falling_factorial(self.degree, order) / self.horizon.powi(order as i32);
        Ok(Vec3::from_fn(|axis, _| {
            let diffs = forward_differences(self.axis(k, axis), order);
            scale * de_casteljau(&diffs, s)
        }))
    }

    /// Coefficient of control point `m` in the second derivative at `t`,
    /// i.e. the partial derivative of any axis' acceleration with respect to
    /// that axis' `m`-th control point.
    pub fn acceleration_sensitivity(&self, m: usize, t: f64) -> Result<f64> {
        let n = self.degree;
        if n < 2 || m > n {
            return Ok(0.0);
        }
        let s = self.unit_time(t)?;
        let basis = |j: isize| -> f64 {
            if j < 0 || j as usize > n - 2 {
                0.0
            } else {
                bernstein_basis(n - 2, j as usize, s)
            }
        };
        let m = m as isize;
        let combo = basis(m - 2) - 2.0 * basis(m - 1) + basis(m);
        Ok(falling_factorial(n, 2) / (self.horizon * self.horizon) * combo)
    }

    pub fn is_finite(&self) -> bool {
        self.horizon.is_finite() && self.coeffs.iter().all(|c| c.is_finite())
    }

    /// Shape and horizon agree with the configuration.
    pub fn check(&self, config: &ScenarioConfig) -> Result<()> {
        if self.n_defenders != config.n_defenders {
            return Err(SwarmError::ShapeMismatch(format!(
                "trajectories describe {} defenders, config has {}",
                self.n_defenders, config.n_defenders
            )));
        }
        let horizon = config.horizon();
        if (self.horizon - horizon).abs() > 1e-9 * horizon {
            return Err(SwarmError::ShapeMismatch(format!(
                "trajectory horizon {} does not match config horizon {horizon}",
                self.horizon
            )));
        }
        if !self.is_finite() {
            return Err(SwarmError::InconsistentState(
                "trajectory coefficients must be finite".into(),
            ));
        }
        Ok(())
    }
}

fn falling_factorial(n: usize, k: usize) -> f64 {
    (0..k).map(|i| (n - i) as f64).product()
}

fn forward_differences(points: &[f64], order: usize) -> Vec<f64> {
    let mut d = points.to_vec();
    for _ in 0..order {
        d = d.windows(2).map(|w| w[1] - w[0]).collect();
    }
    d
}

fn de_casteljau(points: &[f64], s: f64) -> f64 {
    let mut work = points.to_vec();
    let n = work.len();
    for level in 1..n {
        for i in 0..n - level {
            work[i] = (1.0 - s) * work[i] + s * work[i + 1];
        }
    }
    work.first().copied().unwrap_or(0.0)
}

fn bernstein_basis(n: usize, m: usize, s: f64) -> f64 {
    let mut binom = 1.0;
    for i in 0..m {
        binom = binom * (n - i) as f64 / (i + 1) as f64;
    }
    binom * s.powi(m as i32) * (1.0 - s).powi((n - m) as i32)
}

pub fn bernstein_position(params: &TrajectoryParams, k: usize, t: f64) -> Result<Vec3> {
    params.position(k, t)
}

pub fn bernstein_velocity(params: &TrajectoryParams, k: usize, t: f64) -> Result<Vec3> {
    params.velocity(k, t)
}

pub fn bernstein_acceleration(params: &TrajectoryParams, k: usize, t: f64) -> Result<Vec3> {
    params.acceleration(k, t)
}

/// On-disk form of [`TrajectoryParams`]: control points keyed by defender
/// ordinal and axis.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrajectoryFile {
    pub degree: usize,
    pub horizon: f64,
    pub defenders: Vec<DefenderControlPoints>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DefenderControlPoints {
    pub ordinal: usize,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub z: Vec<f64>,
}

impl From<TrajectoryParams> for TrajectoryFile {
    fn from(p: TrajectoryParams) -> Self {
        TrajectoryFile {
            degree: p.degree,
            horizon: p.horizon,
            defenders: (0..p.n_defenders)
                .map(|k| DefenderControlPoints {
                    ordinal: k,
                    x: p.axis(k, 0).to_vec(),
                    y: p.axis(k, 1).to_vec(),
                    z: p.axis(k, 2).to_vec(),
                })
                .collect(),
        }
    }
}

impl TryFrom<TrajectoryFile> for TrajectoryParams {
    type Error = SwarmError;

    fn try_from(file: TrajectoryFile) -> Result<Self> {
        if !(file.horizon.is_finite() && file.horizon > 0.0) {
            return Err(SwarmError::ShapeMismatch(format!(
                "trajectory horizon must be positive (got {})",
                file.horizon
            )));
        }
        let mut p = TrajectoryParams::zeros(file.defenders.len(), file.degree, file.horizon);
        let mut seen = vec![false; file.defenders.len()];
        for d in &file.defenders {
            if d.ordinal >= seen.len() || seen[d.ordinal] {
                return Err(SwarmError::ShapeMismatch(format!(
                    "defender ordinal {} is out of range or repeated",
                    d.ordinal
                )));
            }
            seen[d.ordinal] = true;
            for (axis, values) in [&d.x, &d.y, &d.z].into_iter().enumerate() {
                if values.len() != file.degree + 1 {
                    return Err(SwarmError::ShapeMismatch(format!(
                        "defender {} axis {axis} has {} control points, degree {} needs {}",
                        d.ordinal,
                        values.len(),
                        file.degree,
                        file.degree + 1
                    )));
                }
                p.axis_mut(d.ordinal, axis).copy_from_slice(values);
            }
        }
        Ok(p)
    }
}

/// Defender positions and velocities read off the trajectories at `t`.
pub fn defenders_at(params: &TrajectoryParams, t: f64) -> Result<(Vec<Vec3>, Vec<Vec3>)> {
    let pos = (0..params.n_defenders())
        .map(|k| params.position(k, t))
        .collect::<Result<Vec<_>>>()?;
    let vel = (0..params.n_defenders())
        .map(|k| params.velocity(k, t))
        .collect::<Result<Vec<_>>>()?;
    Ok((pos, vel))
}

fn check_finite(acc: &[Vec3]) -> Result<()> {
    match acc.iter().position(|a| !a.iter().all(|c| c.is_finite())) {
        Some(i) => Err(SwarmError::IntegrationFailure(AgentId::attacker(i))),
        None => Ok(()),
    }
}

/// Advances the state by `dt` with velocity Verlet.
///
/// The acceleration provider is evaluated at the current state and again at
/// the drifted positions with half-kicked velocities, so velocity-dependent
/// forces (damping) enter both kicks. Defenders are kinematic: their
/// positions and velocities come straight from `trajectories` at `t + dt`.
pub fn verlet_step<F>(
    state: &SwarmState,
    trajectories: &TrajectoryParams,
    mut accel: F,
    dt: f64,
) -> Result<SwarmState>
where
    F: FnMut(&SwarmState) -> Result<Vec<Vec3>>,
{
    let a0 = accel(state)?;
    check_finite(&a0)?;
    if a0.len() != state.n_attackers() {
        return Err(SwarmError::ShapeMismatch(
            "acceleration provider returned the wrong number of attackers".into(),
        ));
    }
    let half = 0.5 * dt;
    let v_half: Vec<Vec3> = state
        .attacker_vel
        .iter()
        .zip(&a0)
        .map(|(v, a)| v + a * half)
        .collect();
    let x_next: Vec<Vec3> = state
        .attacker_pos
        .iter()
        .zip(&v_half)
        .map(|(x, v)| x + v * dt)
        .collect();
    let t_next = state.time + dt;
    let (defender_pos, defender_vel) = if trajectories.n_defenders() == 0 {
        (Vec::new(), Vec::new())
    } else {
        defenders_at(trajectories, t_next)?
    };
    let mut next = SwarmState {
        attacker_pos: x_next,
        attacker_vel: v_half,
        defender_pos,
        defender_vel,
        hvu_pos: state.hvu_pos,
        time: t_next,
    };
    let a1 = accel(&next)?;
    check_finite(&a1)?;
    for (v, a) in next.attacker_vel.iter_mut().zip(&a1) {
        *v += a * half;
    }
    Ok(next)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn forces() -> ForceModel {
        ForceModel {
            d0: 1.0,
            d1: 3.0,
            s0: 2.0,
            gain_intra: 1.5,
            gain_def: 2.0,
            leader_gain: 0.7,
            damping: 0.3,
        }
    }

    fn state(attackers: &[Vec3], defenders: &[Vec3]) -> SwarmState {
        SwarmState {
            attacker_pos: attackers.to_vec(),
            attacker_vel: vec![Vec3::zeros(); attackers.len()],
            defender_pos: defenders.to_vec(),
            defender_vel: vec![Vec3::zeros(); defenders.len()],
            hvu_pos: Vec3::zeros(),
            time: 0.0,
        }
    }

    #[test]
    fn intra_force_shape() {
        let f = forces();
        assert_eq!(f.pair_force_intra(1.0).unwrap(), 0.0);
        assert_eq!(f.pair_force_intra(3.0 + 1e-6).unwrap(), 0.0);
        assert_eq!(f.pair_force_intra(10.0).unwrap(), 0.0);
        // midpoint of the well: g * (-h)(h)/(2h) with h = (d1 - d0)/2
        let mid = f.pair_force_intra(2.0).unwrap();
        assert!(mid < 0.0);
        assert_relative_eq!(mid, -1.5 * 0.5, epsilon = 1e-15);
        assert_relative_eq!(f.pair_force_intra(0.5).unwrap(), 0.75, epsilon = 1e-15);
        assert!(f.pair_force_intra(0.0).is_err());
    }

    #[test]
    fn defender_force_shape() {
        let f = forces();
        assert_eq!(f.pair_force_defender(2.0).unwrap(), 0.0);
        assert_eq!(f.pair_force_defender(4.0).unwrap(), 0.0);
        assert_relative_eq!(f.pair_force_defender(1.0).unwrap(), 2.0 * 1.0);
        assert!(f.pair_force_defender(1e-12).is_err());
    }

    #[test]
    fn lone_attacker_at_rest_feels_only_leader() {
        let f = forces();
        let s = state(&[Vec3::new(3.0, 4.0, 0.0)], &[]);
        let a = attacker_accelerations(&s, InteractionMode::Unweighted, &f).unwrap();
        assert_relative_eq!(a[0], Vec3::new(-0.6, -0.8, 0.0) * 0.7, epsilon = 1e-15);
    }

    #[test]
    fn attacker_on_hvu_gets_no_leader_pull() {
        let f = forces();
        let s = state(&[Vec3::zeros()], &[]);
        let a = attacker_accelerations(&s, InteractionMode::Unweighted, &f).unwrap();
        assert_eq!(a[0], Vec3::zeros());
    }

    #[test]
    fn symmetric_pair_interaction_is_equal_and_opposite() {
        let mut f = forces();
        f.leader_gain = 0.0;
        let s = state(&[Vec3::new(-1.0, 0.0, 0.0), Vec3::new(1.0, 0.0, 0.0)], &[]);
        let a = attacker_accelerations(&s, InteractionMode::Unweighted, &f).unwrap();
        // r = 2 = (d0 + d1)/2, f = -0.75: attraction pulls each toward the other
        assert_relative_eq!(a[0], Vec3::new(0.75, 0.0, 0.0), epsilon = 1e-15);
        assert_relative_eq!(a[1], -a[0], epsilon = 1e-15);
    }

    #[test]
    fn unit_weights_and_full_mask_match_unweighted_bitwise() {
        let f = forces();
        let s = state(
            &[
                Vec3::new(5.0, 0.0, 0.0),
                Vec3::new(5.5, 0.7, 0.1),
                Vec3::new(6.1, -0.4, 0.3),
            ],
            &[Vec3::new(4.0, 0.2, 0.0), Vec3::new(6.0, 1.0, 1.0)],
        );
        let plain = attacker_accelerations(&s, InteractionMode::Unweighted, &f).unwrap();
        let ones = PerAgent::filled(3, 2, 1.0);
        let weighted =
            attacker_accelerations(&s, InteractionMode::ProbabilityWeighted(&ones), &f).unwrap();
        let full = IndexSet::full(3, 2);
        let masked = attacker_accelerations(&s, InteractionMode::IndexMasked(&full), &f).unwrap();
        assert_eq!(plain, weighted);
        assert_eq!(plain, masked);
    }

    #[test]
    fn masked_dead_attacker_is_inert() {
        let f = forces();
        let s = state(
            &[Vec3::new(5.0, 0.0, 0.0), Vec3::new(5.5, 0.0, 0.0)],
            &[Vec3::new(4.5, 0.0, 0.0)],
        );
        let mut alive = IndexSet::full(2, 1);
        alive.remove(AgentId::attacker(1));
        alive.remove(AgentId::defender(0));
        let a = attacker_accelerations(&s, InteractionMode::IndexMasked(&alive), &f).unwrap();
        assert_eq!(a[1], Vec3::zeros());
        let lone = state(&[Vec3::new(5.0, 0.0, 0.0)], &[]);
        let expected = attacker_accelerations(&lone, InteractionMode::Unweighted, &f).unwrap();
        assert_eq!(a[0], expected[0]);
    }

    #[test]
    fn coincident_pair_is_reported() {
        let f = forces();
        let s = state(&[Vec3::new(5.0, 0.0, 0.0)], &[Vec3::new(5.0, 0.0, 0.0)]);
        assert!(matches!(
            attacker_accelerations(&s, InteractionMode::Unweighted, &f),
            Err(SwarmError::SingularPair { .. })
        ));
    }

    #[test]
    fn bernstein_endpoints_and_midpoint() {
        let mut p = TrajectoryParams::zeros(1, 1, 4.0);
        p.set_control_point(0, 1, Vec3::new(2.0, 0.0, 0.0));
        assert_eq!(p.position(0, 0.0).unwrap(), Vec3::zeros());
        assert_eq!(p.position(0, 4.0).unwrap(), Vec3::new(2.0, 0.0, 0.0));
        assert_relative_eq!(p.position(0, 2.0).unwrap(), Vec3::new(1.0, 0.0, 0.0));
        assert_eq!(p.acceleration(0, 1.3).unwrap(), Vec3::zeros());
        assert!(p.position(0, 4.1).is_err());
        assert!(p.position(0, -0.1).is_err());
    }

    #[test]
    fn quadratic_acceleration_is_constant() {
        let tf = 3.0;
        let mut p = TrajectoryParams::zeros(1, 2, tf);
        p.axis_mut(0, 2).copy_from_slice(&[0.0, 0.0, 1.0]);
        for t in [0.0, 0.4, 1.7, 3.0] {
            let a = p.acceleration(0, t).unwrap();
            assert_relative_eq!(a.z, 2.0 / (tf * tf), epsilon = 1e-14);
            assert_eq!(a.x, 0.0);
        }
    }

    #[test]
    fn acceleration_sensitivity_matches_unit_perturbation() {
        let tf = 2.5;
        let degree = 5;
        for m in 0..=degree {
            let mut p = TrajectoryParams::zeros(1, degree, tf);
            p.axis_mut(0, 0)[m] = 1.0;
            for t in [0.0, 0.3, 1.1, 2.5] {
                let direct = p.acceleration(0, t).unwrap().x;
                let sens = p.acceleration_sensitivity(m, t).unwrap();
                assert_relative_eq!(direct, sens, epsilon = 1e-12, max_relative = 1e-12);
            }
        }
    }

    #[test]
    fn trajectory_file_rejects_wrong_lengths() {
        let json = r#"{"degree":2,"horizon":1.0,"defenders":[{"ordinal":0,"x":[0,0],"y":[0,0,0],"z":[0,0,0]}]}"#;
        assert!(serde_json::from_str::<TrajectoryParams>(json).is_err());
    }

    #[test]
    fn verlet_free_particle_and_constant_force() {
        let traj = TrajectoryParams::zeros(0, 1, 10.0);
        let mut s = state(&[Vec3::new(1.0, 2.0, 3.0)], &[]);
        s.attacker_vel[0] = Vec3::new(0.5, -1.0, 0.25);
        let free = verlet_step(
            &s,
            &traj,
            |st| Ok(vec![Vec3::zeros(); st.n_attackers()]),
            0.1,
        )
        .unwrap();
        assert_relative_eq!(
            free.attacker_pos[0],
            Vec3::new(1.05, 1.9, 3.025),
            epsilon = 1e-15
        );
        assert_eq!(free.attacker_vel[0], s.attacker_vel[0]);
        assert_relative_eq!(free.time, 0.1);

        let a = Vec3::new(1.0, -2.0, 0.5);
        let dt = 0.2;
        let next = verlet_step(&s, &traj, |_| Ok(vec![a]), dt).unwrap();
        let x = s.attacker_pos[0] + s.attacker_vel[0] * dt + a * (dt * dt / 2.0);
        let v = s.attacker_vel[0] + a * dt;
        assert_relative_eq!(next.attacker_pos[0], x, epsilon = 1e-14);
        assert_relative_eq!(next.attacker_vel[0], v, epsilon = 1e-14);
    }

    #[test]
    fn verlet_damping_never_speeds_up() {
        let f = ForceModel {
            leader_gain: 0.0,
            ..forces()
        };
        let traj = TrajectoryParams::zeros(0, 1, 100.0);
        let mut s = state(&[Vec3::new(10.0, 0.0, 0.0)], &[]);
        s.attacker_vel[0] = Vec3::new(1.0, 2.0, -0.5);
        for _ in 0..50 {
            let next = verlet_step(
                &s,
                &traj,
                |st| attacker_accelerations(st, InteractionMode::Unweighted, &f),
                0.1,
            )
            .unwrap();
            assert!(next.attacker_vel[0].norm() < s.attacker_vel[0].norm());
            s = next;
        }
    }

    #[test]
    fn verlet_reports_non_finite_acceleration() {
        let traj = TrajectoryParams::zeros(0, 1, 1.0);
        let s = state(&[Vec3::new(1.0, 0.0, 0.0)], &[]);
        let err = verlet_step(&s, &traj, |_| Ok(vec![Vec3::new(f64::NAN, 0.0, 0.0)]), 0.1);
        assert!(matches!(err, Err(SwarmError::IntegrationFailure(_))));
    }

    #[test]
    fn verlet_moves_defenders_along_trajectory() {
        let mut traj = TrajectoryParams::zeros(1, 1, 1.0);
        traj.set_control_point(0, 1, Vec3::new(1.0, 0.0, 0.0));
        let s = state(&[Vec3::new(9.0, 0.0, 0.0)], &[Vec3::zeros()]);
        let next = verlet_step(
            &s,
            &traj,
            |st| Ok(vec![Vec3::zeros(); st.n_attackers()]),
            0.25,
        )
        .unwrap();
        assert_relative_eq!(next.defender_pos[0], Vec3::new(0.25, 0.0, 0.0));
        assert_relative_eq!(next.defender_vel[0], Vec3::new(1.0, 0.0, 0.0));
    }
}
