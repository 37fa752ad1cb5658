//! Parameter sweeps: rerun an experiment over a grid of `(b, c, alpha, T)`
//! and summarize regret and equilibrium distance across seeds.

use std::io::{Read, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{GoldError, Result};
use crate::geometry::profile_distance;
use crate::harness::config::{DelayConfig, Experiment, ExperimentConfig};
use crate::harness::run::run_experiment;
use crate::harness::thread_pool;
use crate::metrics::{
    loglog_slope, mean_stderr, regret_from_profiles, solve_equilibrium, EquilibriumResult,
};

pub const EQ_TOL: f64 = 1e-10;
pub const EQ_MAX_ITER: usize = 200_000;
pub const SOLVER_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridPoint {
    pub b: f64,
    pub c: f64,
    pub alpha: f64,
    #[serde(rename = "T")]
    pub horizon: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub b: f64,
    pub c: f64,
    pub alpha: f64,
    #[serde(rename = "T")]
    pub horizon: u64,
    pub seeds: usize,
    pub regret_mean: f64,
    pub regret_stderr: f64,
    pub distance_mean: f64,
    pub distance_stderr: f64,
    /// Log-log slope of `regret_mean` against `T` over the rows sharing
    /// `(b, c, alpha)`; NaN with fewer than two horizons or a nonpositive mean.
    pub slope: f64,
}

/// Outcome of one seed: mean regret over players and the final joint pivot
/// distance to the equilibrium.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeedOutcome {
    pub regret: f64,
    pub final_distance: f64,
}

pub fn read_grid<R: Read>(input: R) -> Result<Vec<GridPoint>> {
    csv::Reader::from_reader(input)
        .deserialize()
        .enumerate()
        .map(|(k, rec)| {
            rec.map_err(|e| GoldError::InvalidParams(format!("grid row {}: {e}", k + 1)))
        })
        .collect()
}

pub fn write_rows<W: Write, S: Serialize>(out: W, rows: &[S], header: &[&str]) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_writer(out);
    let err = |e: csv::Error| GoldError::InvalidParams(format!("csv write failed: {e}"));
    w.write_record(header).map_err(err)?;
    for r in rows {
        w.serialize(r).map_err(err)?;
    }
    w.flush()
        .map_err(|e| GoldError::InvalidParams(format!("flush failed: {e}")))
}

pub const SWEEP_HEADER: [&str; 10] = [
    "b",
    "c",
    "alpha",
    "T",
    "seeds",
    "regret_mean",
    "regret_stderr",
    "distance_mean",
    "distance_stderr",
    "slope",
];

fn with_exponent(d: &DelayConfig, alpha: f64) -> DelayConfig {
    match d {
        DelayConfig::Power { scale, .. } => DelayConfig::Power {
            scale: *scale,
            exponent: alpha,
        },
        DelayConfig::Geometric { mean, .. } => DelayConfig::Geometric {
            mean: *mean,
            cap_exponent: alpha,
        },
        other => other.clone(),
    }
}

/// The base config specialized to one grid point: schedules take the point's
/// exponents, power and geometric delays take `alpha` as growth exponent.
pub fn specialize(cfg: &ExperimentConfig, p: &GridPoint) -> ExperimentConfig {
    let mut out = cfg.clone();
    out.horizon = p.horizon;
    out.schedules.b = Some(p.b);
    out.schedules.c = Some(p.c);
    out.schedules.alpha = Some(p.alpha);
    out.delay = with_exponent(&cfg.delay, p.alpha);
    for player in &mut out.players {
        player.schedules.b = None;
        player.schedules.c = None;
        player.schedules.alpha = None;
        player.delay = player.delay.as_ref().map(|d| with_exponent(d, p.alpha));
    }
    out
}

pub fn seed_outcome(exp: &Experiment, seed: u64, eq: &EquilibriumResult) -> Result<SeedOutcome> {
    let trace = run_experiment(exp, seed)?;
    let played = trace.played_profiles()?;
    let n = exp.players.len();
    let mut regret = 0.0;
    for p in 0..n {
        regret += regret_from_profiles(exp.game.as_ref(), p, &played, SOLVER_TOL)?.cumulative;
    }
    let pivots = trace.pivot_profiles()?;
    let final_distance = pivots
        .last()
        .map_or(0.0, |x| profile_distance(x, &eq.point));
    Ok(SeedOutcome {
        regret: regret / n as f64,
        final_distance,
    })
}

/// Runs every `(grid point, seed)` pair, in parallel across pairs. Rows with
/// `T = 0` are skipped. The table is identical for any thread count.
pub fn run_sweep(cfg: &ExperimentConfig, grid: &[GridPoint]) -> Result<Vec<SweepRow>> {
    let points: Vec<&GridPoint> = grid.iter().filter(|p| p.horizon > 0).collect();
    if points.is_empty() {
        return Ok(Vec::new());
    }
    let exps: Vec<Experiment> = points
        .iter()
        .map(|p| {
            specialize(cfg, p).validate().map_err(|e| {
                GoldError::InvalidParams(format!(
                    "grid point (b = {}, c = {}, alpha = {}, T = {}): {e}",
                    p.b, p.c, p.alpha, p.horizon
                ))
            })
        })
        .collect::<Result<_>>()?;
    let eq = solve_equilibrium(exps[0].game.as_ref(), EQ_TOL, EQ_MAX_ITER)?;
    let jobs: Vec<(usize, u64)> = (0..exps.len())
        .flat_map(|k| cfg.seeds.iter().map(move |&s| (k, s)))
        .collect();
    let outcomes: Vec<SeedOutcome> = thread_pool()?.install(|| {
        jobs.par_iter()
            .map(|&(k, s)| seed_outcome(&exps[k], s, &eq))
            .collect::<Result<_>>()
    })?;

    let per_point = cfg.seeds.len();
    let mut rows: Vec<SweepRow> = points
        .iter()
        .zip(outcomes.chunks(per_point))
        .map(|(p, outs)| {
            let regrets: Vec<f64> = outs.iter().map(|o| o.regret).collect();
            let dists: Vec<f64> = outs.iter().map(|o| o.final_distance).collect();
            let (regret_mean, regret_stderr) = mean_stderr(&regrets);
            let (distance_mean, distance_stderr) = mean_stderr(&dists);
            SweepRow {
                b: p.b,
                c: p.c,
                alpha: p.alpha,
                horizon: p.horizon,
                seeds: per_point,
                regret_mean,
                regret_stderr,
                distance_mean,
                distance_stderr,
                slope: f64::NAN,
            }
        })
        .collect();

    for k in 0..rows.len() {
        let key = (rows[k].b, rows[k].c, rows[k].alpha);
        let group: Vec<&SweepRow> = rows.iter().filter(|r| (r.b, r.c, r.alpha) == key).collect();
        let mut hs: Vec<f64> = group.iter().map(|r| r.horizon as f64).collect();
        hs.dedup();
        let slope = if hs.len() >= 2 && group.iter().all(|r| r.regret_mean > 0.0) {
            let xs: Vec<f64> = group.iter().map(|r| r.horizon as f64).collect();
            let ys: Vec<f64> = group.iter().map(|r| r.regret_mean).collect();
            loglog_slope(&xs, &ys)
        } else {
            f64::NAN
        };
        rows[k].slope = slope;
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str = r#"
horizon = 1
seeds = [1, 2, 3, 4]

[game]
kind = "quadratic"
sets = [{ kind = "box", lo = [0.0], hi = [1.0] }]
targets = [[0.5]]

[delay]
kind = "power"
scale = 1.0
exponent = 0.0
"#;

    fn base() -> ExperimentConfig {
        ExperimentConfig::from_toml(BASE).unwrap()
    }

    #[test]
    fn empty_grid_gives_empty_table() {
        assert!(run_sweep(&base(), &[]).unwrap().is_empty());
        let zero = GridPoint {
            b: 0.25,
            c: 0.75,
            alpha: 0.0,
            horizon: 0,
        };
        assert!(run_sweep(&base(), &[zero]).unwrap().is_empty());
    }

    #[test]
    fn grid_csv_round_trip() {
        let text =
            "b,c,alpha,T\n0.25,0.75,0,1000\n0.16666666666666666,0.8333333333333334,0.5,3162\n";
        let grid = read_grid(text.as_bytes()).unwrap();
        assert_eq!(grid.len(), 2);
        assert_eq!(grid[1].horizon, 3162);
        assert!(read_grid("b,c,T\n1,2,3\n".as_bytes()).is_err());
    }

    #[test]
    fn specialization_moves_delay_exponent() {
        let p = GridPoint {
            b: 1.0 / 6.0,
            c: 5.0 / 6.0,
            alpha: 0.5,
            horizon: 100,
        };
        let exp = specialize(&base(), &p).validate().unwrap();
        assert_eq!(
            exp.players[0].delay,
            crate::delay::DelaySchedule::power(1.0, 0.5)
        );
        assert_eq!(exp.players[0].schedules.alpha, 0.5);
        assert_eq!(exp.horizon, 100);
    }

    #[test]
    fn invalid_grid_point_is_rejected() {
        let p = GridPoint {
            b: 0.5,
            c: 0.6,
            alpha: 0.0,
            horizon: 100,
        };
        assert!(run_sweep(&base(), &[p]).is_err());
    }

    #[test]
    fn sweep_rows_and_slope() {
        let grid: Vec<GridPoint> = [300u64, 1000, 3000]
            .iter()
            .map(|&t| GridPoint {
                b: 0.25,
                c: 0.75,
                alpha: 0.0,
                horizon: t,
            })
            .collect();
        let rows = run_sweep(&base(), &grid).unwrap();
        assert_eq!(rows.len(), 3);
        assert!(rows.iter().all(|r| r.seeds == 4 && r.regret_mean > 0.0));
        assert!(rows[0].slope.is_finite() && rows[0].slope == rows[2].slope);
        assert!(rows[0].slope < 1.0);
        // deterministic
        assert_eq!(
            format!("{rows:?}"),
            format!("{:?}", run_sweep(&base(), &grid).unwrap())
        );
    }
}
