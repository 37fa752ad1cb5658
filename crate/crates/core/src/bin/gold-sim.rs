use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};

use gold_sim::harness::config::{Experiment, ExperimentConfig};
use gold_sim::harness::run::{run_experiment, run_seeds};
use gold_sim::harness::sweep::{
    read_grid, run_sweep, write_rows, EQ_MAX_ITER, EQ_TOL, SOLVER_TOL, SWEEP_HEADER,
};
use gold_sim::harness::trace::RunTrace;
use gold_sim::metrics::{analyze_trace, solve_equilibrium, MetricsRow};

const METRICS_HEADER: [&str; 9] = [
    "run_id",
    "T",
    "regret",
    "final_pivot_distance",
    "empty_rounds",
    "max_lag",
    "A_sum",
    "B_sum",
    "C_sum",
];

#[derive(Parser)]
#[command(
    name = "gold-sim",
    version,
    about = "Delayed-feedback gradient-free learning simulator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate one seed, or every configured seed when --seed is omitted.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        /// Trace file for a single seed; a directory for all seeds.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Rerun the experiment over a (b, c, alpha, T) grid.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        grid: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Compute regret, distances and series sums from a trace.
    Analyze {
        #[arg(long)]
        trace: PathBuf,
        /// The config that produced the trace (supplies the game and schedules).
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Validate a config and print each player's region verdict.
    Check {
        #[arg(long)]
        config: PathBuf,
    },
}

enum Failure {
    /// Bad config or input; exit code 2.
    Invalid(anyhow::Error),
    /// Exit code 1.
    Runtime(anyhow::Error),
}

fn invalid(e: impl Into<anyhow::Error>) -> Failure {
    Failure::Invalid(e.into())
}

fn runtime(e: anyhow::Error) -> Failure {
    Failure::Runtime(e)
}

fn load(path: &Path) -> Result<(ExperimentConfig, Experiment), Failure> {
    let cfg = ExperimentConfig::load(path).map_err(invalid)?;
    let exp = cfg
        .validate()
        .with_context(|| format!("{} failed validation", path.display()))
        .map_err(invalid)?;
    Ok((cfg, exp))
}

fn create(path: &Path) -> anyhow::Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    let f = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    Ok(BufWriter::new(f))
}

fn metrics_for(
    exp: &Experiment,
    trace: &RunTrace,
    run_id: &str,
) -> anyhow::Result<Vec<MetricsRow>> {
    let eq = solve_equilibrium(exp.game.as_ref(), EQ_TOL, EQ_MAX_ITER)?;
    let schedules: Vec<_> = exp.players.iter().map(|p| p.schedules).collect();
    Ok(analyze_trace(
        trace,
        exp.game.as_ref(),
        &schedules,
        &eq,
        run_id,
        SOLVER_TOL,
    )?)
}

fn run(config: &Path, seed: Option<u64>, out: Option<PathBuf>) -> Result<(), Failure> {
    let (_, exp) = load(config)?;
    let out = out
        .or_else(|| exp.output.trace_path.clone())
        .ok_or_else(|| {
            invalid(anyhow::anyhow!(
                "no --out given and no output.trace_path in the config"
            ))
        })?;
    let go = || -> anyhow::Result<()> {
        match seed {
            Some(s) => {
                let trace = run_experiment(&exp, s)?;
                trace.write_csv(create(&out)?, exp.output.thin)?;
                if let Some(mpath) = &exp.output.metrics_path {
                    let rows = metrics_for(&exp, &trace, &format!("s{s}"))?;
                    write_rows(create(mpath)?, &rows, &METRICS_HEADER)?;
                }
            }
            None => {
                std::fs::create_dir_all(&out)
                    .with_context(|| format!("creating {}", out.display()))?;
                let traces = run_seeds(&exp, &exp.seeds)?;
                let mut rows = Vec::new();
                for (s, trace) in exp.seeds.iter().zip(&traces) {
                    let path = out.join(format!("trace-s{s}.csv"));
                    trace.write_csv(create(&path)?, exp.output.thin)?;
                    if exp.output.metrics_path.is_some() {
                        rows.extend(metrics_for(&exp, trace, &format!("s{s}"))?);
                    }
                }
                if let Some(mpath) = &exp.output.metrics_path {
                    write_rows(create(mpath)?, &rows, &METRICS_HEADER)?;
                }
            }
        }
        Ok(())
    };
    go().map_err(runtime)
}

fn sweep(config: &Path, grid: &Path, out: &Path) -> Result<(), Failure> {
    let (cfg, _) = load(config)?;
    let f = File::open(grid)
        .with_context(|| format!("opening {}", grid.display()))
        .map_err(invalid)?;
    let points = read_grid(BufReader::new(f)).map_err(invalid)?;
    let go = || -> anyhow::Result<()> {
        let rows = run_sweep(&cfg, &points)?;
        write_rows(create(out)?, &rows, &SWEEP_HEADER)?;
        Ok(())
    };
    go().map_err(runtime)
}

fn analyze(trace_path: &Path, config: &Path, out: &Path) -> Result<(), Failure> {
    let (_, exp) = load(config)?;
    let trace = File::open(trace_path)
        .with_context(|| format!("opening {}", trace_path.display()))
        .and_then(|f| Ok(RunTrace::read_csv(BufReader::new(f))?))
        .map_err(invalid)?;
    if trace.players != exp.players.len() {
        return Err(invalid(anyhow::anyhow!(
            "trace has {} players but the config describes {}",
            trace.players,
            exp.players.len()
        )));
    }
    trace.verify_replay().map_err(invalid)?;
    let go = || -> anyhow::Result<()> {
        let run_id = trace_path
            .file_stem()
            .map_or("run".to_string(), |s| s.to_string_lossy().into_owned());
        let rows = metrics_for(&exp, &trace, &run_id)?;
        write_rows(create(out)?, &rows, &METRICS_HEADER)?;
        Ok(())
    };
    go().map_err(runtime)
}

fn check(config: &Path) -> Result<(), Failure> {
    let (_, exp) = load(config)?;
    for (i, p) in exp.players.iter().enumerate() {
        let s = &p.schedules;
        println!(
            "player {i}: b = {} c = {} alpha = {} gamma0 = {} delta0 = {} region = {}",
            s.b, s.c, s.alpha, s.gamma0, s.delta0, p.verdict.region
        );
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run { config, seed, out } => run(&config, seed, out),
        Command::Sweep { config, grid, out } => sweep(&config, &grid, &out),
        Command::Analyze { trace, config, out } => analyze(&trace, &config, &out),
        Command::Check { config } => check(&config),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Invalid(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
