//! Engagement configuration, agent identities, and initial placement.
//!
//! A [`ScenarioConfig`] is plain data (it round-trips through JSON with
//! exactly the field names below). It must pass [`validate`] before any
//! engine accepts it; the resulting [`ValidatedConfig`] is the only handle
//! the rest of the crate takes.

use std::fmt;
use std::ops::Deref;

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SwarmError};
use crate::Vec3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AgentKind {
    Hvu,
    Attacker,
    Defender,
}

/// Label of one participant: the HVU, attacker `i`, or defender `k`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct AgentId {
    pub kind: AgentKind,
    pub ordinal: usize,
}

impl AgentId {
    pub const HVU: AgentId = AgentId {
        kind: AgentKind::Hvu,
        ordinal: 0,
    };

    pub fn attacker(ordinal: usize) -> Self {
        AgentId {
            kind: AgentKind::Attacker,
            ordinal,
        }
    }

    pub fn defender(ordinal: usize) -> Self {
        AgentId {
            kind: AgentKind::Defender,
            ordinal,
        }
    }
}

impl fmt::Display for AgentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            AgentKind::Hvu => write!(f, "hvu"),
            AgentKind::Attacker => write!(f, "attacker {}", self.ordinal),
            AgentKind::Defender => write!(f, "defender {}", self.ordinal),
        }
    }
}

/// One value per participant, stored in the fixed order HVU, attackers,
/// defenders. Survival vectors, shooter weights, and random draws all use
/// this shape.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerAgent<T> {
    pub hvu: T,
    pub attackers: Vec<T>,
    pub defenders: Vec<T>,
}

impl<T: Clone> PerAgent<T> {
    pub fn filled(n_attackers: usize, n_defenders: usize, value: T) -> Self {
        PerAgent {
            hvu: value.clone(),
            attackers: vec![value.clone(); n_attackers],
            defenders: vec![value; n_defenders],
        }
    }
}

impl<T> PerAgent<T> {
    pub fn n_attackers(&self) -> usize {
        self.attackers.len()
    }

    pub fn n_defenders(&self) -> usize {
        self.defenders.len()
    }

    /// Total entry count, HVU included.
    pub fn len(&self) -> usize {
        1 + self.attackers.len() + self.defenders.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn same_shape<U>(&self, other: &PerAgent<U>) -> bool {
        self.attackers.len() == other.attackers.len()
            && self.defenders.len() == other.defenders.len()
    }

    pub fn get(&self, id: AgentId) -> Option<&T> {
        match id.kind {
            AgentKind::Hvu => (id.ordinal == 0).then_some(&self.hvu),
            AgentKind::Attacker => self.attackers.get(id.ordinal),
            AgentKind::Defender => self.defenders.get(id.ordinal),
        }
    }

    pub fn get_mut(&mut self, id: AgentId) -> Option<&mut T> {
        match id.kind {
            AgentKind::Hvu => (id.ordinal == 0).then_some(&mut self.hvu),
            AgentKind::Attacker => self.attackers.get_mut(id.ordinal),
            AgentKind::Defender => self.defenders.get_mut(id.ordinal),
        }
    }

    /// Entries in canonical order, each with its label.
    pub fn iter(&self) -> impl Iterator<Item = (AgentId, &T)> {
        std::iter::once((AgentId::HVU, &self.hvu))
            .chain(
                self.attackers
                    .iter()
                    .enumerate()
                    .map(|(i, v)| (AgentId::attacker(i), v)),
            )
            .chain(
                self.defenders
                    .iter()
                    .enumerate()
                    .map(|(k, v)| (AgentId::defender(k), v)),
            )
    }

    pub fn map<U>(&self, mut f: impl FnMut(AgentId, &T) -> U) -> PerAgent<U> {
        PerAgent {
            hvu: f(AgentId::HVU, &self.hvu),
            attackers: self
                .attackers
                .iter()
                .enumerate()
                .map(|(i, v)| f(AgentId::attacker(i), v))
                .collect(),
            defenders: self
                .defenders
                .iter()
                .enumerate()
                .map(|(k, v)| f(AgentId::defender(k), v))
                .collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DefenderFormation {
    /// Evenly spaced on a circle in the horizontal plane through the HVU.
    #[default]
    Ring,
    /// Uniformly sampled on a sphere around the HVU.
    Sphere,
}

fn default_sector() -> f64 {
    180.0
}

fn default_axis() -> [f64; 3] {
    [1.0, 0.0, 0.0]
}

fn default_max_attempts() -> usize {
    10_000
}

/// Parametric initial placement.
///
/// Attackers are drawn uniformly (by volume) from the spherical shell
/// `[attacker_radius, attacker_radius + attacker_shell_width]` around the
/// HVU, restricted to a cone of half-angle `attacker_sector_half_angle_deg`
/// about `attacker_axis` (180 degrees is the full shell). With `planar` set,
/// attackers are instead drawn uniformly (by area) from the matching annulus
/// sector in the horizontal plane through the HVU. Defenders sit at
/// `defender_radius`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Layout {
    pub attacker_radius: f64,
    #[serde(default)]
    pub attacker_shell_width: f64,
    #[serde(default = "default_sector")]
    pub attacker_sector_half_angle_deg: f64,
    #[serde(default = "default_axis")]
    pub attacker_axis: [f64; 3],
    #[serde(default)]
    pub planar: bool,
    pub defender_radius: f64,
    #[serde(default)]
    pub defender_formation: DefenderFormation,
    /// Minimum pairwise separation; `None` means `0.1 * d0`.
    #[serde(default)]
    pub min_separation: Option<f64>,
    #[serde(default = "default_max_attempts")]
    pub max_attempts: usize,
    /// Seed used by engines when they build the initial state.
    #[serde(default)]
    pub seed: u64,
}

fn default_threshold() -> f64 {
    0.5
}

fn default_degree() -> usize {
    5
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub n_attackers: usize,
    pub n_defenders: usize,
    /// Magnitude of the constant pull toward the HVU.
    pub leader_gain: f64,
    pub damping: f64,
    pub d0: f64,
    pub d1: f64,
    pub s0: f64,
    pub repulsion_gain_intra: f64,
    pub repulsion_gain_def: f64,
    pub lambda_a: f64,
    pub lambda_d: f64,
    pub sigma_a: f64,
    pub sigma_d: f64,
    pub u_max: f64,
    pub dt: f64,
    pub n_steps: usize,
    #[serde(default = "default_threshold")]
    pub threshold: f64,
    #[serde(default = "default_degree")]
    pub bernstein_degree: usize,
    pub layout: Layout,
    pub hvu_position: [f64; 3],
}

impl ScenarioConfig {
    pub fn horizon(&self) -> f64 {
        self.n_steps as f64 * self.dt
    }

    pub fn hvu(&self) -> Vec3 {
        Vec3::from(self.hvu_position)
    }

    pub fn min_separation(&self) -> f64 {
        self.layout.min_separation.unwrap_or(0.1 * self.d0)
    }
}

/// A configuration that has passed [`validate`].
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
pub struct ValidatedConfig(ScenarioConfig);

impl ValidatedConfig {
    pub fn into_inner(self) -> ScenarioConfig {
        self.0
    }

    /// Initial state at the configured layout seed.
    pub fn initial_state(&self) -> Result<SwarmState> {
        initial_state(self, self.0.layout.seed)
    }
}

impl Deref for ValidatedConfig {
    type Target = ScenarioConfig;

    fn deref(&self) -> &ScenarioConfig {
        &self.0
    }
}

impl<'de> Deserialize<'de> for ValidatedConfig {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let raw = ScenarioConfig::deserialize(d)?;
        validate(raw).map_err(serde::de::Error::custom)
    }
}

fn check(ok: bool, msg: impl Into<String>) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(SwarmError::InvalidConfig(msg.into()))
    }
}

fn positive(value: f64, name: &str) -> Result<()> {
    check(
        value.is_finite() && value > 0.0,
        format!("{name} must be finite and > 0 (got {value})"),
    )
}

fn non_negative(value: f64, name: &str) -> Result<()> {
    check(
        value.is_finite() && value >= 0.0,
        format!("{name} must be finite and >= 0 (got {value})"),
    )
}

/// Checks every configuration constraint, reporting the first violation.
pub fn validate(config: ScenarioConfig) -> Result<ValidatedConfig> {
    let c = &config;
    check(c.n_attackers >= 1, "n_attackers must be at least 1")?;
    non_negative(c.leader_gain, "leader_gain")?;
    positive(c.damping, "damping")?;
    positive(c.d0, "d0")?;
    check(c.d1.is_finite(), "d1 must be finite")?;
    check(c.d1 > c.d0, "d1 must exceed d0")?;
    positive(c.s0, "s0")?;
    positive(c.repulsion_gain_intra, "repulsion_gain_intra")?;
    positive(c.repulsion_gain_def, "repulsion_gain_def")?;
    non_negative(c.lambda_a, "lambda_a")?;
    non_negative(c.lambda_d, "lambda_d")?;
    positive(c.sigma_a, "sigma_a")?;
    positive(c.sigma_d, "sigma_d")?;
    positive(c.u_max, "u_max")?;
    positive(c.dt, "dt")?;
    check(c.n_steps >= 1, "n_steps must be at least 1")?;
    check(
        c.lambda_a * c.dt < 1.0,
        format!(
            "lambda_a * dt = {} must be < 1 so every survival factor stays in (0, 1]",
            c.lambda_a * c.dt
        ),
    )?;
    check(
        c.lambda_d * c.dt < 1.0,
        format!(
            "lambda_d * dt = {} must be < 1 so every survival factor stays in (0, 1]",
            c.lambda_d * c.dt
        ),
    )?;
    check(
        c.threshold > 0.0 && c.threshold < 1.0,
        format!("threshold must lie in (0, 1) (got {})", c.threshold),
    )?;
    check(
        c.bernstein_degree >= 1,
        "bernstein_degree must be at least 1",
    )?;
    check(
        c.hvu_position.iter().all(|v| v.is_finite()),
        "hvu_position must be finite",
    )?;

    let l = &c.layout;
    positive(l.attacker_radius, "layout.attacker_radius")?;
    non_negative(l.attacker_shell_width, "layout.attacker_shell_width")?;
    check(
        l.attacker_sector_half_angle_deg > 0.0 && l.attacker_sector_half_angle_deg <= 180.0,
        "layout.attacker_sector_half_angle_deg must lie in (0, 180]",
    )?;
    let axis = Vec3::from(l.attacker_axis);
    check(
        axis.iter().all(|v| v.is_finite()) && axis.norm() > 0.0,
        "layout.attacker_axis must be a finite non-zero vector",
    )?;
    if c.n_defenders > 0 {
        positive(l.defender_radius, "layout.defender_radius")?;
        check(
            l.defender_radius < l.attacker_radius,
            "layout.defender_radius must be smaller than layout.attacker_radius",
        )?;
    }
    if let Some(sep) = l.min_separation {
        positive(sep, "layout.min_separation")?;
    }
    check(
        l.max_attempts >= 1,
        "layout.max_attempts must be at least 1",
    )?;

    Ok(ValidatedConfig(config))
}

/// Positions and velocities of every agent at one instant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SwarmState {
    pub attacker_pos: Vec<Vec3>,
    pub attacker_vel: Vec<Vec3>,
    pub defender_pos: Vec<Vec3>,
    pub defender_vel: Vec<Vec3>,
    pub hvu_pos: Vec3,
    pub time: f64,
}

impl SwarmState {
    pub fn n_attackers(&self) -> usize {
        self.attacker_pos.len()
    }

    pub fn n_defenders(&self) -> usize {
        self.defender_pos.len()
    }

    pub fn is_finite(&self) -> bool {
        let finite = |v: &Vec3| v.iter().all(|c| c.is_finite());
        self.attacker_pos.iter().all(finite)
            && self.attacker_vel.iter().all(finite)
            && self.defender_pos.iter().all(finite)
            && self.defender_vel.iter().all(finite)
            && finite(&self.hvu_pos)
            && self.time.is_finite()
    }

    /// Array lengths agree with the configuration and all entries are finite.
    pub fn check(&self, config: &ScenarioConfig) -> Result<()> {
        if self.attacker_pos.len() != config.n_attackers
            || self.attacker_vel.len() != config.n_attackers
            || self.defender_pos.len() != config.n_defenders
            || self.defender_vel.len() != config.n_defenders
        {
            return Err(SwarmError::ShapeMismatch(format!(
                "state holds {}/{} attackers and {}/{} defenders, config expects {} and {}",
                self.attacker_pos.len(),
                self.attacker_vel.len(),
                self.defender_pos.len(),
                self.defender_vel.len(),
                config.n_attackers,
                config.n_defenders
            )));
        }
        if !self.is_finite() {
            return Err(SwarmError::InconsistentState(
                "state contains non-finite entries".into(),
            ));
        }
        Ok(())
    }
}

/// Orthonormal pair perpendicular to `axis` (unit).
fn perpendicular_basis(axis: &Vec3) -> (Vec3, Vec3) {
    let helper = if axis.x.abs() < 0.9 {
        Vec3::x()
    } else {
        Vec3::y()
    };
    let e1 = axis.cross(&helper).normalize();
    let e2 = axis.cross(&e1);
    (e1, e2)
}

fn far_enough(candidate: &Vec3, placed: &[Vec3], min_sep: f64) -> bool {
    placed.iter().all(|p| (p - candidate).norm() >= min_sep)
}

/// Builds the starting state for `config`, a pure function of its arguments.
///
/// Defenders are placed first, then attackers are rejection-sampled until
/// every pair of agents is at least the configured minimum separation apart.
pub fn initial_state(config: &ValidatedConfig, layout_seed: u64) -> Result<SwarmState> {
    let layout = &config.layout;
    let hvu = config.hvu();
    let min_sep = config.min_separation();
    let mut rng = ChaCha8Rng::seed_from_u64(layout_seed);

    let mut placed: Vec<Vec3> = Vec::with_capacity(config.n_attackers + config.n_defenders);

    let m = config.n_defenders;
    match layout.defender_formation {
        DefenderFormation::Ring => {
            let phase: f64 = rng.random::<f64>() * std::f64::consts::TAU;
            for k in 0..m {
                let angle = phase + std::f64::consts::TAU * k as f64 / m as f64;
                let p = hvu + layout.defender_radius * Vec3::new(angle.cos(), angle.sin(), 0.0);
                if !far_enough(&p, &placed, min_sep) {
                    return Err(SwarmError::LayoutInfeasible {
                        agent: AgentId::defender(k),
                        min_separation: min_sep,
                        attempts: 1,
                    });
                }
                placed.push(p);
            }
        }
        DefenderFormation::Sphere => {
            for k in 0..m {
                let p = sample_until(&mut rng, &placed, min_sep, layout.max_attempts, |rng| {
                    hvu + layout.defender_radius * sample_cap_direction(rng, &Vec3::z(), -1.0)
                })
                .ok_or(SwarmError::LayoutInfeasible {
                    agent: AgentId::defender(k),
                    min_separation: min_sep,
                    attempts: layout.max_attempts,
                })?;
                placed.push(p);
            }
        }
    }

    let axis = Vec3::from(layout.attacker_axis).normalize();
    let half_angle = layout.attacker_sector_half_angle_deg.to_radians();
    let cos_min = half_angle.cos();
    let heading = axis.y.atan2(axis.x);
    let r_in = layout.attacker_radius;
    let r_out = r_in + layout.attacker_shell_width;
    for i in 0..config.n_attackers {
        let p = sample_until(&mut rng, &placed, min_sep, layout.max_attempts, |rng| {
            let u: f64 = rng.random();
            if layout.planar {
                let r = (r_in.powi(2) + u * (r_out.powi(2) - r_in.powi(2))).sqrt();
                let angle = heading + half_angle * (2.0 * rng.random::<f64>() - 1.0);
                hvu + r * Vec3::new(angle.cos(), angle.sin(), 0.0)
            } else {
                let r = (r_in.powi(3) + u * (r_out.powi(3) - r_in.powi(3))).cbrt();
                hvu + r * sample_cap_direction(rng, &axis, cos_min)
            }
        })
        .ok_or(SwarmError::LayoutInfeasible {
            agent: AgentId::attacker(i),
            min_separation: min_sep,
            attempts: layout.max_attempts,
        })?;
        placed.push(p);
    }

    let defender_pos: Vec<Vec3> = placed[..m].to_vec();
    let attacker_pos: Vec<Vec3> = placed[m..].to_vec();
    Ok(SwarmState {
        attacker_vel: vec![Vec3::zeros(); attacker_pos.len()],
        defender_vel: vec![Vec3::zeros(); defender_pos.len()],
        attacker_pos,
        defender_pos,
        hvu_pos: hvu,
        time: 0.0,
    })
}

fn sample_until(
    rng: &mut ChaCha8Rng,
    placed: &[Vec3],
    min_sep: f64,
    max_attempts: usize,
    mut draw: impl FnMut(&mut ChaCha8Rng) -> Vec3,
) -> Option<Vec3> {
    (0..max_attempts)
        .map(|_| draw(rng))
        .find(|p| far_enough(p, placed, min_sep))
}

/// Uniform direction on the spherical cap `{d : d . axis >= cos_min}`.
fn sample_cap_direction(rng: &mut ChaCha8Rng, axis: &Vec3, cos_min: f64) -> Vec3 {
    let u: f64 = rng.random();
    let v: f64 = rng.random();
    let cos_theta = 1.0 - u * (1.0 - cos_min);
    let sin_theta = (1.0 - cos_theta * cos_theta).max(0.0).sqrt();
    let phi = std::f64::consts::TAU * v;
    let (e1, e2) = perpendicular_basis(axis);
    cos_theta * axis + sin_theta * (phi.cos() * e1 + phi.sin() * e2)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base() -> ScenarioConfig {
        ScenarioConfig {
            n_attackers: 50,
            n_defenders: 50,
            leader_gain: 1.0,
            damping: 0.5,
            d0: 1.0,
            d1: 3.0,
            s0: 2.0,
            repulsion_gain_intra: 1.0,
            repulsion_gain_def: 2.0,
            lambda_a: 0.5,
            lambda_d: 0.5,
            sigma_a: 1.1,
            sigma_d: 1.0,
            u_max: 1.0,
            dt: 0.05,
            n_steps: 400,
            threshold: 0.5,
            bernstein_degree: 5,
            layout: Layout {
                attacker_radius: 20.0,
                attacker_shell_width: 5.0,
                attacker_sector_half_angle_deg: 180.0,
                attacker_axis: [1.0, 0.0, 0.0],
                planar: false,
                defender_radius: 8.0,
                defender_formation: DefenderFormation::Ring,
                min_separation: None,
                max_attempts: 10_000,
                seed: 0,
            },
            hvu_position: [0.0, 0.0, 0.0],
        }
    }

    fn message(err: SwarmError) -> String {
        match err {
            SwarmError::InvalidConfig(m) => m,
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn rejects_inverted_cohesion_band() {
        let mut c = base();
        c.d1 = c.d0;
        assert_eq!(message(validate(c).unwrap_err()), "d1 must exceed d0");
    }

    #[test]
    fn rejects_survival_factor_overflow() {
        let mut c = base();
        c.lambda_a = 30.0;
        assert!((c.lambda_a * c.dt - 1.5).abs() < 1e-12);
        let msg = message(validate(c).unwrap_err());
        assert!(msg.contains("lambda_a * dt"), "{msg}");
        assert!(msg.contains("survival factor"), "{msg}");
    }

    #[test]
    fn accepts_equal_rate_range_ratio_scenario() {
        let c = base();
        assert!((c.sigma_a / c.sigma_d - 1.1).abs() < 1e-12);
        assert!(validate(c).is_ok());
    }

    #[test]
    fn rejects_threshold_at_bounds() {
        for tau in [0.0, 1.0] {
            let mut c = base();
            c.threshold = tau;
            assert!(validate(c).is_err());
        }
    }

    #[test]
    fn json_rejects_unknown_keys() {
        let mut v = serde_json::to_value(base()).unwrap();
        v["bogus"] = serde_json::json!(1);
        assert!(serde_json::from_value::<ScenarioConfig>(v).is_err());
    }

    #[test]
    fn json_defaults_threshold_and_degree() {
        let mut v = serde_json::to_value(base()).unwrap();
        let obj = v.as_object_mut().unwrap();
        obj.remove("threshold");
        obj.remove("bernstein_degree");
        let c: ScenarioConfig = serde_json::from_value(v).unwrap();
        assert_eq!(c.threshold, 0.5);
        assert_eq!(c.bernstein_degree, 5);
    }

    #[test]
    fn initial_state_is_deterministic() {
        let c = validate(base()).unwrap();
        let a = initial_state(&c, 42).unwrap();
        let b = initial_state(&c, 42).unwrap();
        assert_eq!(a, b);
        let other = initial_state(&c, 43).unwrap();
        assert_ne!(a, other);
    }

    #[test]
    fn single_attacker_sits_at_standoff_radius() {
        let mut c = base();
        c.n_attackers = 1;
        c.n_defenders = 0;
        c.layout.attacker_shell_width = 0.0;
        c.hvu_position = [1.0, -2.0, 3.0];
        let c = validate(c).unwrap();
        let s = initial_state(&c, 7).unwrap();
        assert_eq!(s.n_attackers(), 1);
        assert_eq!(s.n_defenders(), 0);
        let r = (s.attacker_pos[0] - c.hvu()).norm();
        assert!((r - 20.0).abs() < 1e-12, "{r}");
        assert_eq!(s.attacker_vel[0], Vec3::zeros());
    }

    #[test]
    fn large_layout_respects_min_separation() {
        let mut c = base();
        c.n_attackers = 100;
        c.n_defenders = 25;
        let c = validate(c).unwrap();
        let s = initial_state(&c, 3).unwrap();
        s.check(&c).unwrap();
        let all: Vec<Vec3> = s
            .attacker_pos
            .iter()
            .chain(&s.defender_pos)
            .copied()
            .collect();
        let eps = c.min_separation();
        for i in 0..all.len() {
            for j in (i + 1)..all.len() {
                assert!((all[i] - all[j]).norm() >= eps, "pair ({i}, {j})");
            }
        }
        for d in &s.defender_pos {
            assert!(((d - c.hvu()).norm() - 8.0).abs() < 1e-9);
        }
        for a in &s.attacker_pos {
            let r = (a - c.hvu()).norm();
            assert!((20.0 - 1e-9..=25.0 + 1e-9).contains(&r));
        }
    }

    #[test]
    fn sector_restricts_attacker_directions() {
        let mut c = base();
        c.layout.attacker_sector_half_angle_deg = 20.0;
        let c = validate(c).unwrap();
        let s = initial_state(&c, 11).unwrap();
        let cos_min = 20f64.to_radians().cos();
        for a in &s.attacker_pos {
            assert!(a.normalize().dot(&Vec3::x()) >= cos_min - 1e-12);
        }
    }

    #[test]
    fn planar_layout_stays_in_the_hvu_plane() {
        let mut c = base();
        c.layout.planar = true;
        c.layout.attacker_sector_half_angle_deg = 30.0;
        c.hvu_position = [0.0, 0.0, 2.0];
        let c = validate(c).unwrap();
        let s = initial_state(&c, 5).unwrap();
        for a in &s.attacker_pos {
            assert_eq!(a.z, 2.0);
            let r = (a - c.hvu()).norm();
            assert!((20.0 - 1e-9..=25.0 + 1e-9).contains(&r));
            assert!(a.y.atan2(a.x).abs() <= 30f64.to_radians() + 1e-12);
        }
    }

    #[test]
    fn crowded_layout_is_infeasible() {
        let mut c = base();
        c.n_attackers = 50;
        c.layout.attacker_shell_width = 0.0;
        c.layout.attacker_sector_half_angle_deg = 0.5;
        c.layout.min_separation = Some(1.0);
        c.layout.max_attempts = 200;
        let c = validate(c).unwrap();
        assert!(matches!(
            initial_state(&c, 1),
            Err(SwarmError::LayoutInfeasible { .. })
        ));
    }
}
