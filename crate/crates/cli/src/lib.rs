//! Experiment driver behind the `swarm-attrition` binary.
//!
//! Each `cmd_*` function reads its inputs, runs one workflow from the core
//! crate, and writes CSV time series plus a JSON summary into the output
//! directory. Every JSON artifact embeds the resolved configuration and the
//! seeds that produced it, and reruns with identical inputs are
//! byte-identical.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;
use swarm_attrition::engines::{run, EngineKind, SimResult};
use swarm_attrition::montecarlo::{compare_engines, run_ensemble, SurvivalCurves};
use swarm_attrition::optimizer::{baseline_stationary, evaluate, optimize, ObjectiveSpec};
use swarm_attrition::{SwarmError, TrajectoryParams, ValidatedConfig};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
    #[error("{path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
    #[error(transparent)]
    Model(#[from] SwarmError),
    #[error("{0}")]
    Usage(String),
}

pub type Result<T> = std::result::Result<T, CliError>;

/// Penalty weight on control-bound violations used by every CLI optimization.
pub const DEFAULT_PENALTY_WEIGHT: f64 = 100.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum EngineChoice {
    P0,
    P1,
    P2,
    P3,
}

impl EngineChoice {
    pub fn engine(self, seed: u64) -> EngineKind {
        match self {
            EngineChoice::P0 => EngineKind::p0(seed),
            EngineChoice::P1 => EngineKind::P1Decoupled,
            EngineChoice::P2 => EngineKind::P2WeightedForces,
            EngineChoice::P3 => EngineKind::P3Threshold,
        }
    }
}

/// Where a workflow gets its defender trajectories.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "source", rename_all = "snake_case")]
pub enum TrajectorySource {
    File {
        path: PathBuf,
    },
    Baseline,
    /// Optimize first under a smooth engine, then use the result.
    OptimizeFirst {
        engine: EngineChoice,
        budget: usize,
        seed: u64,
    },
}

/// Everything a workflow needs, as resolved from the command line.
#[derive(Debug, Clone, PartialEq)]
pub struct RunManifest {
    pub config: PathBuf,
    pub engine: Option<EngineChoice>,
    pub trajectories: TrajectorySource,
    pub seed: u64,
    pub runs: u64,
    pub budget: usize,
    pub out: PathBuf,
}

impl RunManifest {
    pub fn new(config: impl Into<PathBuf>, out: impl Into<PathBuf>) -> Self {
        RunManifest {
            config: config.into(),
            engine: None,
            trajectories: TrajectorySource::Baseline,
            seed: 0,
            runs: 200,
            budget: 500,
            out: out.into(),
        }
    }
}

pub fn load_config(path: &Path) -> Result<ValidatedConfig> {
    let text = read(path)?;
    serde_json::from_str(&text).map_err(|source| CliError::Json {
        path: path.to_owned(),
        source,
    })
}

pub fn load_trajectories(path: &Path) -> Result<TrajectoryParams> {
    let text = read(path)?;
    serde_json::from_str(&text).map_err(|source| CliError::Json {
        path: path.to_owned(),
        source,
    })
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.to_owned(),
        source,
    })
}

fn prepare_out(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|source| CliError::Io {
        path: dir.to_owned(),
        source,
    })
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let io = |source| CliError::Io {
        path: path.to_owned(),
        source,
    };
    let mut w = BufWriter::new(File::create(path).map_err(io)?);
    serde_json::to_writer_pretty(&mut w, value).map_err(|source| CliError::Json {
        path: path.to_owned(),
        source,
    })?;
    w.write_all(b"\n").map_err(io)?;
    w.flush().map_err(io)
}

fn write_csv(
    path: &Path,
    header: &[String],
    rows: impl Iterator<Item = Vec<String>>,
) -> Result<()> {
    let err = |source| CliError::Csv {
        path: path.to_owned(),
        source,
    };
    let mut w = csv::Writer::from_path(path).map_err(err)?;
    w.write_record(header).map_err(err)?;
    for row in rows {
        w.write_record(&row).map_err(err)?;
    }
    w.flush().map_err(|source| CliError::Io {
        path: path.to_owned(),
        source,
    })
}

fn resolve_trajectories(
    source: &TrajectorySource,
    config: &ValidatedConfig,
) -> Result<TrajectoryParams> {
    let traj = match source {
        TrajectorySource::File { path } => load_trajectories(path)?,
        TrajectorySource::Baseline => baseline_stationary(config)?,
        TrajectorySource::OptimizeFirst {
            engine,
            budget,
            seed,
        } => {
            let spec = objective_spec(*engine, config)?;
            optimize(&spec, config, *budget, *seed)?.best_params
        }
    };
    traj.check(config)?;
    Ok(traj)
}

fn objective_spec(engine: EngineChoice, config: &ValidatedConfig) -> Result<ObjectiveSpec> {
    if engine == EngineChoice::P0 {
        return Err(CliError::Usage(
            "optimization needs a deterministic engine: p1, p2, or p3".into(),
        ));
    }
    Ok(ObjectiveSpec::pinned_to_layout(
        engine.engine(0),
        DEFAULT_PENALTY_WEIGHT,
        config,
    )?)
}

/// Column names of the per-step simulation CSV.
pub fn timeseries_header(n_attackers: usize, n_defenders: usize) -> Vec<String> {
    let mut h = vec![
        "step".to_string(),
        "time".into(),
        "hvu_q".into(),
        "hvu_alive".into(),
    ];
    for (prefix, count) in [("a", n_attackers), ("d", n_defenders)] {
        for i in 0..count {
            for field in ["x", "y", "z", "q", "alive"] {
                h.push(format!("{prefix}{i}_{field}"));
            }
        }
    }
    h
}

fn timeseries_rows(result: &SimResult) -> impl Iterator<Item = Vec<String>> + '_ {
    result.snapshots.iter().map(|snap| {
        let flag = |alive: bool| if alive { "1" } else { "0" }.to_string();
        let alive = snap.alive.as_ref();
        let mut row = vec![
            snap.step.to_string(),
            snap.state.time.to_string(),
            snap.survival.hvu.to_string(),
            flag(alive.is_none_or(|a| a.hvu_alive())),
        ];
        for (i, p) in snap.state.attacker_pos.iter().enumerate() {
            row.extend(p.iter().map(f64::to_string));
            row.push(snap.survival.attackers[i].to_string());
            row.push(flag(alive.is_none_or(|a| a.attacker_alive(i))));
        }
        for (k, p) in snap.state.defender_pos.iter().enumerate() {
            row.extend(p.iter().map(f64::to_string));
            row.push(snap.survival.defenders[k].to_string());
            row.push(flag(alive.is_none_or(|a| a.defender_alive(k))));
        }
        row
    })
}

#[derive(Serialize)]
struct Seeds {
    layout: u64,
    engine: Option<u64>,
}

#[derive(Serialize)]
struct SimulateSummary<'a> {
    engine: &'static str,
    terminal_cost: f64,
    hvu_destroyed: Option<bool>,
    step_of_destruction: Option<usize>,
    final_hvu_q: f64,
    final_mean_attacker_q: f64,
    final_mean_defender_q: f64,
    seeds: Seeds,
    trajectories: &'a TrajectorySource,
    config: &'a ValidatedConfig,
}

/// Runs one engagement and writes `timeseries.csv` and `summary.json`.
pub fn cmd_simulate(manifest: &RunManifest) -> Result<()> {
    let config = load_config(&manifest.config)?;
    let choice = manifest
        .engine
        .ok_or_else(|| CliError::Usage("simulate needs --engine".into()))?;
    let traj = resolve_trajectories(&manifest.trajectories, &config)?;
    let engine = choice.engine(manifest.seed);
    let result = run(&config, &traj, engine)?;

    prepare_out(&manifest.out)?;
    write_csv(
        &manifest.out.join("timeseries.csv"),
        &timeseries_header(config.n_attackers, config.n_defenders),
        timeseries_rows(&result),
    )?;
    write_json(
        &manifest.out.join("summary.json"),
        &SimulateSummary {
            engine: engine.label(),
            terminal_cost: result.terminal_cost,
            hvu_destroyed: result.hvu_destroyed,
            step_of_destruction: result.step_of_destruction,
            final_hvu_q: result.final_survival.hvu,
            final_mean_attacker_q: result.final_survival.mean_attackers(),
            final_mean_defender_q: result.final_survival.mean_defenders(),
            seeds: Seeds {
                layout: config.layout.seed,
                engine: engine.is_stochastic().then_some(manifest.seed),
            },
            trajectories: &manifest.trajectories,
            config: &config,
        },
    )
}

#[derive(Serialize)]
struct OptimizeSummary<'a> {
    engine: &'static str,
    budget: usize,
    evaluations: usize,
    penalty_weight: f64,
    baseline_cost: f64,
    best_cost: f64,
    best_terminal_cost: f64,
    best_penalty: f64,
    feasible: bool,
    seeds: Seeds,
    config: &'a ValidatedConfig,
}

/// Optimizes defender trajectories and writes `trajectories.json`,
/// `history.csv`, and `summary.json`.
pub fn cmd_optimize(manifest: &RunManifest) -> Result<()> {
    let config = load_config(&manifest.config)?;
    let choice = manifest
        .engine
        .ok_or_else(|| CliError::Usage("optimize needs --engine".into()))?;
    let spec = objective_spec(choice, &config)?;
    let result = optimize(&spec, &config, manifest.budget, manifest.seed)?;
    // sanity: the stored parameters reproduce the reported objective
    let check = evaluate(&result.best_params, &spec, &config)?;
    debug_assert_eq!(check.total, result.best_cost);

    prepare_out(&manifest.out)?;
    write_json(&manifest.out.join("trajectories.json"), &result.best_params)?;
    let running = result.running_best();
    write_csv(
        &manifest.out.join("history.csv"),
        &["evaluation".into(), "cost".into(), "best_so_far".into()],
        result
            .history
            .iter()
            .zip(&running)
            .map(|(&(i, c), b)| vec![i.to_string(), c.to_string(), b.to_string()]),
    )?;
    write_json(
        &manifest.out.join("summary.json"),
        &OptimizeSummary {
            engine: spec.engine.label(),
            budget: manifest.budget,
            evaluations: result.evaluations,
            penalty_weight: spec.penalty_weight,
            baseline_cost: result.baseline_cost,
            best_cost: result.best_cost,
            best_terminal_cost: result.best_value.terminal_cost,
            best_penalty: result.best_value.penalty,
            feasible: result.feasible,
            seeds: Seeds {
                layout: config.layout.seed,
                engine: Some(manifest.seed),
            },
            config: &config,
        },
    )
}

fn curves_header(prefixes: &[&str]) -> Vec<String> {
    let mut h = vec!["step".to_string(), "time".into()];
    for p in prefixes {
        for curve in ["attackers", "defenders", "hvu"] {
            h.push(format!("{p}_{curve}"));
        }
    }
    h
}

fn curves_rows<'a>(
    config: &'a ValidatedConfig,
    curves: &'a [&'a SurvivalCurves],
) -> impl Iterator<Item = Vec<String>> + 'a {
    (0..=config.n_steps).map(move |j| {
        let mut row = vec![j.to_string(), (j as f64 * config.dt).to_string()];
        for c in curves {
            row.push(c.attackers[j].to_string());
            row.push(c.defenders[j].to_string());
            row.push(c.hvu[j].to_string());
        }
        row
    })
}

#[derive(Serialize)]
struct EnsembleOutput<'a> {
    runs: u64,
    hvu_destruction_frequency: f64,
    hvu_destruction_std_error: f64,
    final_mean_attacker_survival: f64,
    final_mean_defender_survival: f64,
    seeds: Seeds,
    trajectories: &'a TrajectorySource,
    config: &'a ValidatedConfig,
}

/// Runs a stochastic ensemble and writes `ensemble_curves.csv` and `summary.json`.
pub fn cmd_montecarlo(manifest: &RunManifest) -> Result<()> {
    let config = load_config(&manifest.config)?;
    let traj = resolve_trajectories(&manifest.trajectories, &config)?;
    let summary = run_ensemble(&config, &traj, manifest.runs, manifest.seed)?;

    prepare_out(&manifest.out)?;
    let curves = summary.curves();
    write_csv(
        &manifest.out.join("ensemble_curves.csv"),
        &curves_header(&["p0"]),
        curves_rows(&config, &[&curves]),
    )?;
    write_json(
        &manifest.out.join("summary.json"),
        &EnsembleOutput {
            runs: summary.runs,
            hvu_destruction_frequency: summary.hvu_destruction_frequency,
            hvu_destruction_std_error: summary.hvu_destruction_std_error,
            final_mean_attacker_survival: *curves.attackers.last().expect("non-empty curve"),
            final_mean_defender_survival: *curves.defenders.last().expect("non-empty curve"),
            seeds: Seeds {
                layout: config.layout.seed,
                engine: Some(manifest.seed),
            },
            trajectories: &manifest.trajectories,
            config: &config,
        },
    )
}

#[derive(Serialize)]
struct EngineDiscrepancy {
    terminal_hvu_survival: f64,
    delta: f64,
    linf_attackers: f64,
    linf_defenders: f64,
    linf_hvu: f64,
}

#[derive(Serialize)]
struct CompareOutput<'a> {
    runs: u64,
    p0_hvu_survival: f64,
    p0_std_error: f64,
    /// 95% normal-approximation interval on the P0 HVU survival.
    p0_ci95: [f64; 2],
    p1: EngineDiscrepancy,
    p2: EngineDiscrepancy,
    p3: EngineDiscrepancy,
    seeds: Seeds,
    trajectories: &'a TrajectorySource,
    config: &'a ValidatedConfig,
}

/// Compares every smooth formulation with a stochastic ensemble and writes
/// `curves.csv` and `report.json`.
pub fn cmd_compare(manifest: &RunManifest) -> Result<()> {
    let config = load_config(&manifest.config)?;
    let traj = resolve_trajectories(&manifest.trajectories, &config)?;
    let report = compare_engines(&config, &traj, manifest.runs, manifest.seed)?;

    prepare_out(&manifest.out)?;
    let p0 = report.ensemble.curves();
    write_csv(
        &manifest.out.join("curves.csv"),
        &curves_header(&["p0", "p1", "p2", "p3"]),
        curves_rows(
            &config,
            &[&p0, &report.p1.curves, &report.p2.curves, &report.p3.curves],
        ),
    )?;
    let discrepancy = |e: &swarm_attrition::montecarlo::EngineComparison| EngineDiscrepancy {
        terminal_hvu_survival: e.terminal_hvu_survival,
        delta: e.delta,
        linf_attackers: e.linf.attackers,
        linf_defenders: e.linf.defenders,
        linf_hvu: e.linf.hvu,
    };
    let survival = report.ensemble.hvu_survival();
    let se = report.ensemble.hvu_destruction_std_error;
    write_json(
        &manifest.out.join("report.json"),
        &CompareOutput {
            runs: report.ensemble.runs,
            p0_hvu_survival: survival,
            p0_std_error: se,
            p0_ci95: [
                (survival - 1.96 * se).max(0.0),
                (survival + 1.96 * se).min(1.0),
            ],
            p1: discrepancy(&report.p1),
            p2: discrepancy(&report.p2),
            p3: discrepancy(&report.p3),
            seeds: Seeds {
                layout: config.layout.seed,
                engine: Some(manifest.seed),
            },
            trajectories: &manifest.trajectories,
            config: &config,
        },
    )
}
