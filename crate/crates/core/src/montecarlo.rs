//! Ensembles of stochastic realizations and comparison of the smooth
//! formulations against them.
//!
//! Run `r` of an ensemble with master seed `s` uses the ChaCha8 stream `r`
//! of seed `s`, so per-run generators never collide and any single run can
//! be replayed in isolation.

use rayon::prelude::*;
use serde::Serialize;

use crate::dynamics::TrajectoryParams;
use crate::engines::{run_with, EngineKind, RunOptions, SimResult, StepSummary};
use crate::error::{Result, SwarmError};
use crate::scenario::ValidatedConfig;

/// Survival curves aligned on the simulation grid (`n_steps + 1` points).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SurvivalCurves {
    pub attackers: Vec<f64>,
    pub defenders: Vec<f64>,
    pub hvu: Vec<f64>,
}

impl SurvivalCurves {
    /// Mean survival probabilities of a deterministic run.
    pub fn from_probabilities(result: &SimResult) -> Self {
        SurvivalCurves {
            attackers: result
                .summaries
                .iter()
                .map(|s| s.mean_q_attackers)
                .collect(),
            defenders: result
                .summaries
                .iter()
                .map(|s| s.mean_q_defenders)
                .collect(),
            hvu: result.summaries.iter().map(|s| s.q_hvu).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.hvu.len()
    }

    pub fn is_empty(&self) -> bool {
        self.hvu.is_empty()
    }

    /// Largest pointwise gap to `other`, per curve.
    pub fn linf_distance(&self, other: &SurvivalCurves) -> CurveDistance {
        let sup = |a: &[f64], b: &[f64]| {
            a.iter()
                .zip(b)
                .map(|(x, y)| (x - y).abs())
                .fold(0.0, f64::max)
        };
        CurveDistance {
            attackers: sup(&self.attackers, &other.attackers),
            defenders: sup(&self.defenders, &other.defenders),
            hvu: sup(&self.hvu, &other.hvu),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CurveDistance {
    pub attackers: f64,
    pub defenders: f64,
    pub hvu: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnsembleSummary {
    pub runs: u64,
    pub master_seed: u64,
    pub hvu_destruction_frequency: f64,
    /// Binomial standard error of the destruction frequency.
    pub hvu_destruction_std_error: f64,
    /// Fraction of attackers alive, averaged over runs.
    pub mean_attacker_survival_curve: Vec<f64>,
    pub mean_defender_survival_curve: Vec<f64>,
    /// Fraction of runs in which the HVU is still alive.
    pub mean_hvu_survival_curve: Vec<f64>,
}

impl EnsembleSummary {
    pub fn curves(&self) -> SurvivalCurves {
        SurvivalCurves {
            attackers: self.mean_attacker_survival_curve.clone(),
            defenders: self.mean_defender_survival_curve.clone(),
            hvu: self.mean_hvu_survival_curve.clone(),
        }
    }

    pub fn hvu_survival(&self) -> f64 {
        1.0 - self.hvu_destruction_frequency
    }
}

/// Per-step alive counts of one run, held at their last value past an early stop.
#[derive(Debug, Clone)]
struct RunTally {
    destroyed: bool,
    attackers_alive: Vec<u64>,
    defenders_alive: Vec<u64>,
    hvu_alive: Vec<u64>,
}

fn tally(summaries: &[StepSummary], n_points: usize, destroyed: bool) -> RunTally {
    let last = summaries
        .last()
        .expect("a run always has its initial summary");
    let padded = |f: &dyn Fn(&StepSummary) -> u64| -> Vec<u64> {
        summaries
            .iter()
            .map(f)
            .chain(std::iter::repeat(f(last)))
            .take(n_points)
            .collect()
    };
    RunTally {
        destroyed,
        attackers_alive: padded(&|s| s.attackers_alive as u64),
        defenders_alive: padded(&|s| s.defenders_alive as u64),
        hvu_alive: padded(&|s| u64::from(s.hvu_alive)),
    }
}

/// Binomial standard error `sqrt(p (1 - p) / runs)`.
pub fn binomial_std_error(p: f64, runs: u64) -> f64 {
    (p * (1.0 - p) / runs as f64).sqrt()
}

/// Runs `runs` independent stochastic realizations and aggregates them.
pub fn run_ensemble(
    config: &ValidatedConfig,
    trajectories: &TrajectoryParams,
    runs: u64,
    master_seed: u64,
) -> Result<EnsembleSummary> {
    if runs == 0 {
        return Err(SwarmError::InvalidConfig("runs must be at least 1".into()));
    }
    let n_points = config.n_steps + 1;
    // only the per-step summaries are needed here
    let options = RunOptions {
        snapshot_stride: config.n_steps.max(1),
    };
    let tallies: Vec<RunTally> = (0..runs)
        .into_par_iter()
        .map(|r| {
            let engine = EngineKind::P0Stochastic {
                seed: master_seed,
                stream: r,
            };
            run_with(config, trajectories, engine, &options)
                .map(|res| tally(&res.summaries, n_points, res.hvu_destroyed == Some(true)))
                .map_err(|e| e.at_run(r))
        })
        .collect::<Result<Vec<_>>>()?;

    // integer sums: the reduction is exact and therefore order independent
    let mut att = vec![0u64; n_points];
    let mut def = vec![0u64; n_points];
    let mut hvu = vec![0u64; n_points];
    let mut destroyed = 0u64;
    for t in &tallies {
        destroyed += u64::from(t.destroyed);
        for j in 0..n_points {
            att[j] += t.attackers_alive[j];
            def[j] += t.defenders_alive[j];
            hvu[j] += t.hvu_alive[j];
        }
    }
    let fraction = |count: u64, per_run: usize| {
        if per_run == 0 {
            1.0
        } else {
            count as f64 / (runs as f64 * per_run as f64)
        }
    };
    let p = destroyed as f64 / runs as f64;
    Ok(EnsembleSummary {
        runs,
        master_seed,
        hvu_destruction_frequency: p,
        hvu_destruction_std_error: binomial_std_error(p, runs),
        mean_attacker_survival_curve: att
            .iter()
            .map(|&c| fraction(c, config.n_attackers))
            .collect(),
        mean_defender_survival_curve: def
            .iter()
            .map(|&c| fraction(c, config.n_defenders))
            .collect(),
        mean_hvu_survival_curve: hvu.iter().map(|&c| fraction(c, 1)).collect(),
    })
}

/// One smooth formulation's curves and its gaps to the stochastic ensemble.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EngineComparison {
    pub engine: EngineKind,
    pub curves: SurvivalCurves,
    pub terminal_hvu_survival: f64,
    /// `|Q_hvu(t_f) - empirical HVU survival at t_f|`.
    pub delta: f64,
    pub linf: CurveDistance,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonReport {
    pub ensemble: EnsembleSummary,
    pub p1: EngineComparison,
    pub p2: EngineComparison,
    pub p3: EngineComparison,
}

impl ComparisonReport {
    pub fn engines(&self) -> [&EngineComparison; 3] {
        [&self.p1, &self.p2, &self.p3]
    }
}

/// Runs each smooth formulation once and a stochastic ensemble on the same
/// trajectories, and measures how far each formulation lands from the ensemble.
pub fn compare_engines(
    config: &ValidatedConfig,
    trajectories: &TrajectoryParams,
    runs: u64,
    master_seed: u64,
) -> Result<ComparisonReport> {
    let ensemble = run_ensemble(config, trajectories, runs, master_seed)?;
    let reference = ensemble.curves();
    let empirical = ensemble.hvu_survival();
    let options = RunOptions {
        snapshot_stride: config.n_steps.max(1),
    };
    let compare = |engine: EngineKind| -> Result<EngineComparison> {
        let res = run_with(config, trajectories, engine, &options)?;
        let curves = SurvivalCurves::from_probabilities(&res);
        let terminal = res.final_survival.hvu;
        Ok(EngineComparison {
            engine,
            linf: curves.linf_distance(&reference),
            curves,
            terminal_hvu_survival: terminal,
            delta: (terminal - empirical).abs(),
        })
    };
    Ok(ComparisonReport {
        p1: compare(EngineKind::P1Decoupled)?,
        p2: compare(EngineKind::P2WeightedForces)?,
        p3: compare(EngineKind::P3Threshold)?,
        ensemble,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::{validate, DefenderFormation, Layout, ScenarioConfig};

    fn config(lambda: f64) -> ValidatedConfig {
        validate(ScenarioConfig {
            n_attackers: 5,
            n_defenders: 2,
            leader_gain: 1.0,
            damping: 0.5,
            d0: 1.0,
            d1: 3.0,
            s0: 2.0,
            repulsion_gain_intra: 1.0,
            repulsion_gain_def: 3.0,
            lambda_a: lambda,
            lambda_d: lambda,
            sigma_a: 6.0,
            sigma_d: 5.0,
            u_max: 1.0,
            dt: 0.05,
            n_steps: 100,
            threshold: 0.5,
            bernstein_degree: 2,
            layout: Layout {
                attacker_radius: 7.0,
                attacker_shell_width: 1.0,
                attacker_sector_half_angle_deg: 40.0,
                attacker_axis: [1.0, 0.0, 0.0],
                planar: false,
                defender_radius: 3.0,
                defender_formation: DefenderFormation::Ring,
                min_separation: None,
                max_attempts: 1000,
                seed: 2,
            },
            hvu_position: [0.0, 0.0, 0.0],
        })
        .unwrap()
    }

    fn baseline(c: &ValidatedConfig) -> TrajectoryParams {
        let s = c.initial_state().unwrap();
        TrajectoryParams::stationary(&s.defender_pos, c.bernstein_degree, c.horizon())
    }

    #[test]
    fn no_weapons_means_everyone_survives() {
        let c = config(0.0);
        let e = run_ensemble(&c, &baseline(&c), 20, 1).unwrap();
        assert_eq!(e.hvu_destruction_frequency, 0.0);
        assert_eq!(e.mean_hvu_survival_curve.len(), c.n_steps + 1);
        for curve in [
            &e.mean_attacker_survival_curve,
            &e.mean_defender_survival_curve,
            &e.mean_hvu_survival_curve,
        ] {
            assert!(curve.iter().all(|&v| v == 1.0));
        }
        let report = compare_engines(&c, &baseline(&c), 5, 1).unwrap();
        for e in report.engines() {
            assert_eq!(e.delta, 0.0);
            assert_eq!(e.linf.hvu, 0.0);
        }
    }

    #[test]
    fn ensemble_is_reproducible_and_consistent() {
        let c = config(2.0);
        let traj = baseline(&c);
        let a = run_ensemble(&c, &traj, 40, 9).unwrap();
        let b = run_ensemble(&c, &traj, 40, 9).unwrap();
        assert_eq!(a, b);
        let last = *a.mean_hvu_survival_curve.last().unwrap();
        assert!((a.hvu_destruction_frequency - (1.0 - last)).abs() < 1e-15);
        for w in a.mean_hvu_survival_curve.windows(2) {
            assert!(w[1] <= w[0]);
        }
        for curve in [
            &a.mean_attacker_survival_curve,
            &a.mean_defender_survival_curve,
        ] {
            assert!(curve.iter().all(|v| (0.0..=1.0).contains(v)));
        }
    }

    #[test]
    fn single_run_report_is_well_formed() {
        let c = config(2.0);
        let report = compare_engines(&c, &baseline(&c), 1, 3).unwrap();
        assert_eq!(report.ensemble.runs, 1);
        assert_eq!(report.ensemble.hvu_destruction_std_error, 0.0);
        assert_eq!(report.p1.curves.len(), c.n_steps + 1);
    }

    #[test]
    fn zero_runs_is_rejected() {
        let c = config(1.0);
        assert!(run_ensemble(&c, &baseline(&c), 0, 0).is_err());
    }

    #[test]
    fn early_stop_holds_last_counts() {
        let s = |step, alive| StepSummary {
            step,
            time: step as f64,
            q_hvu: 1.0,
            mean_q_attackers: 1.0,
            mean_q_defenders: 1.0,
            hvu_alive: alive,
            attackers_alive: 4 - step,
            defenders_alive: 2,
        };
        let t = tally(&[s(0, true), s(1, true), s(2, false)], 5, true);
        assert_eq!(t.attackers_alive, vec![4, 3, 2, 2, 2]);
        assert_eq!(t.hvu_alive, vec![1, 1, 0, 0, 0]);
    }
}
