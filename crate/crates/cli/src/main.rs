use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use swarm_attrition_cli::{
    cmd_compare, cmd_montecarlo, cmd_optimize, cmd_simulate, EngineChoice, RunManifest,
    TrajectorySource,
};

#[derive(Parser)]
#[command(
    name = "swarm-attrition",
    version,
    about = "Swarm engagement simulator with probabilistic attrition"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a single engagement and export the time series.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_enum)]
        engine: Engine,
        /// Seed for the stochastic engine.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        traj: TrajArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Optimize defender trajectories under a deterministic engine.
    Optimize {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_enum)]
        engine: Engine,
        #[arg(long, default_value_t = 500)]
        budget: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run a stochastic ensemble and export mean survival curves.
    Montecarlo {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value_t = 200)]
        runs: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        traj: TrajArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Compare the deterministic engines against a stochastic ensemble.
    Compare {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value_t = 200)]
        runs: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        traj: TrajArgs,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args)]
struct TrajArgs {
    /// Defender trajectories file written by `optimize`.
    #[arg(long, conflicts_with_all = ["baseline", "optimize_with"])]
    trajectories: Option<PathBuf>,
    /// Stationary defenders (the default).
    #[arg(long)]
    baseline: bool,
    /// Optimize under this engine first and use the result.
    #[arg(long, value_enum, conflicts_with = "baseline")]
    optimize_with: Option<Engine>,
    /// Evaluation budget for --optimize-with.
    #[arg(long, default_value_t = 500, requires = "optimize_with")]
    budget: usize,
    /// Optimizer seed for --optimize-with.
    #[arg(long, default_value_t = 0, requires = "optimize_with")]
    optimizer_seed: u64,
}

impl TrajArgs {
    fn source(&self) -> TrajectorySource {
        match (&self.trajectories, self.optimize_with) {
            (Some(path), _) => TrajectorySource::File { path: path.clone() },
            (None, Some(engine)) => TrajectorySource::OptimizeFirst {
                engine: engine.into(),
                budget: self.budget,
                seed: self.optimizer_seed,
            },
            (None, None) => TrajectorySource::Baseline,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Engine {
    P0,
    P1,
    P2,
    P3,
}

impl From<Engine> for EngineChoice {
    fn from(e: Engine) -> Self {
        match e {
            Engine::P0 => EngineChoice::P0,
            Engine::P1 => EngineChoice::P1,
            Engine::P2 => EngineChoice::P2,
            Engine::P3 => EngineChoice::P3,
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Simulate {
            config,
            engine,
            seed,
            traj,
            out,
        } => {
            let mut m = RunManifest::new(config, out);
            m.engine = Some(engine.into());
            m.seed = seed;
            m.trajectories = traj.source();
            cmd_simulate(&m)
        }
        Command::Optimize {
            config,
            engine,
            budget,
            seed,
            out,
        } => {
            let mut m = RunManifest::new(config, out);
            m.engine = Some(engine.into());
            m.budget = budget;
            m.seed = seed;
            cmd_optimize(&m)
        }
        Command::Montecarlo {
            config,
            runs,
            seed,
            traj,
            out,
        } => {
            let mut m = RunManifest::new(config, out);
            m.runs = runs;
            m.seed = seed;
            m.trajectories = traj.source();
            cmd_montecarlo(&m)
        }
        Command::Compare {
            config,
            runs,
            seed,
            traj,
            out,
        } => {
            let mut m = RunManifest::new(config, out);
            m.runs = runs;
            m.seed = seed;
            m.trajectories = traj.source();
            cmd_compare(&m)
        }
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
