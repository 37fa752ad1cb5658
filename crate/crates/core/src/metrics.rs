//! Full-information oracles and post-hoc metrics: equilibrium computation,
//! realized regret, distance trajectories and the error-series diagnostics.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::agent::GoldSchedules;
use crate::error::{GoldError, Result};
use crate::game::{check_dsc, Game, Profile};
use crate::geometry::{distance, norm, profile_distance};
use crate::harness::trace::RunTrace;

/// Pairs sampled by the monotonicity pre-check of [`solve_equilibrium`].
const DSC_PRECHECK_PAIRS: usize = 1000;
const DSC_PRECHECK_SEED: u64 = 0x05ee_dd5c;

/// Work budget (payoff evaluations) for the regret grid cross-check.
const GRID_BUDGET: usize = 20_000_000;
const GRID_RESOLUTION: f64 = 1e-3;
const ASCENT_MAX_ITER: usize = 5_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum SolveStatus {
    Converged,
    NotConverged,
    /// The monotonicity pre-check found violations; any fixed point returned
    /// need not be the unique equilibrium.
    NonMonotone,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EquilibriumResult {
    pub point: Profile,
    /// `max_i || x^i - proj(x^i + v^i(x)) ||`.
    pub residual: f64,
    pub iterations: usize,
    pub status: SolveStatus,
    pub dsc_violations: usize,
}

/// Fixed-point residual of the gradient field at `x`.
pub fn equilibrium_residual<G: Game + ?Sized>(game: &G, x: &Profile) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for i in 0..game.players() {
        let v = game.gradient(i, x);
        let y: Vec<f64> = x[i].iter().zip(&v).map(|(a, b)| a + b).collect();
        let p = game.action_set(i).project(&y)?;
        worst = worst.max(distance(&x[i], &p));
    }
    Ok(worst)
}

fn ascent_step<G: Game + ?Sized>(
    game: &G,
    at: &Profile,
    from: &Profile,
    eta: f64,
) -> Result<Profile> {
    (0..game.players())
        .map(|i| {
            let v = game.gradient(i, at);
            let y: Vec<f64> = from[i].iter().zip(&v).map(|(a, b)| a + eta * b).collect();
            game.action_set(i).project(&y)
        })
        .collect()
}

/// Extragradient iteration on the true gradient field, started from the
/// safety centers. Converges for monotone games.
pub fn solve_equilibrium<G: Game + ?Sized>(
    game: &G,
    tol: f64,
    max_iter: usize,
) -> Result<EquilibriumResult> {
    let weights = vec![1.0; game.players()];
    let mut rng = ChaCha8Rng::seed_from_u64(DSC_PRECHECK_SEED);
    let dsc = check_dsc(game, &weights, DSC_PRECHECK_PAIRS, &mut rng)?;

    let beta = game.lipschitz_grad();
    let eta = if beta > 0.0 { 1.0 / (2.0 * beta) } else { 1.0 };
    let mut x = game.center_profile();
    let mut residual = equilibrium_residual(game, &x)?;
    let mut iterations = 0;
    while residual > tol && iterations < max_iter {
        let y = ascent_step(game, &x, &x, eta)?;
        x = ascent_step(game, &y, &x, eta)?;
        residual = equilibrium_residual(game, &x)?;
        iterations += 1;
    }
    let status = if dsc.violations > 0 {
        SolveStatus::NonMonotone
    } else if residual <= tol {
        SolveStatus::Converged
    } else {
        SolveStatus::NotConverged
    };
    Ok(EquilibriumResult {
        point: x,
        residual,
        iterations,
        status,
        dsc_violations: dsc.violations,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegretReport {
    pub horizon: u64,
    pub best_fixed: Vec<f64>,
    pub cumulative: f64,
    pub per_round: Vec<f64>,
}

/// Opponent contexts with multiplicities; consecutive identical contexts are
/// merged, and a single-player game has exactly one.
struct Contexts {
    profiles: Vec<Profile>,
    weights: Vec<f64>,
}

impl Contexts {
    fn new(played: &[Profile]) -> Self {
        let mut profiles: Vec<Profile> = Vec::new();
        let mut weights: Vec<f64> = Vec::new();
        for x in played {
            let single = x.len() == 1;
            match profiles.last() {
                Some(last) if single || last == x => *weights.last_mut().unwrap() += 1.0,
                _ => {
                    profiles.push(x.clone());
                    weights.push(1.0);
                }
            }
        }
        Contexts { profiles, weights }
    }

    fn total(&self) -> f64 {
        self.weights.iter().sum()
    }

    fn value<G: Game + ?Sized>(&self, game: &G, player: usize, own: &[f64]) -> f64 {
        let mut scratch = Vec::new();
        self.profiles
            .iter()
            .zip(&self.weights)
            .map(|(p, w)| {
                scratch.clone_from(p);
                scratch[player] = own.to_vec();
                w * game.payoff(player, &scratch)
            })
            .sum::<f64>()
            / self.total()
    }

    fn gradient<G: Game + ?Sized>(&self, game: &G, player: usize, own: &[f64]) -> Vec<f64> {
        let mut acc = vec![0.0; own.len()];
        let mut scratch = Vec::new();
        for (p, w) in self.profiles.iter().zip(&self.weights) {
            scratch.clone_from(p);
            scratch[player] = own.to_vec();
            for (a, g) in acc.iter_mut().zip(game.gradient(player, &scratch)) {
                *a += w * g;
            }
        }
        let total = self.total();
        acc.iter().map(|a| a / total).collect()
    }
}

fn projected_ascent<G: Game + ?Sized>(
    game: &G,
    player: usize,
    ctx: &Contexts,
    start: Vec<f64>,
    tol: f64,
) -> Result<Vec<f64>> {
    let set = game.action_set(player);
    let beta = game.lipschitz_grad();
    let mut x = set.project(&start)?;
    for _ in 0..ASCENT_MAX_ITER {
        let g = ctx.gradient(game, player, &x);
        let eta = if beta > 0.0 {
            1.0 / beta
        } else {
            // linear objective: one long step lands on the maximizer
            10.0 * set.diameter() / norm(&g).max(f64::MIN_POSITIVE)
        };
        let y: Vec<f64> = x.iter().zip(&g).map(|(a, b)| a + eta * b).collect();
        let next = set.project(&y)?;
        let moved = distance(&next, &x);
        x = next;
        if moved / eta <= tol {
            break;
        }
    }
    Ok(x)
}

fn grid_candidates(lo: &[f64], hi: &[f64], per_axis: usize) -> Vec<Vec<f64>> {
    let axis = |k: usize| -> Vec<f64> {
        (0..per_axis)
            .map(|j| lo[k] + (hi[k] - lo[k]) * j as f64 / (per_axis - 1) as f64)
            .collect()
    };
    match lo.len() {
        1 => axis(0).into_iter().map(|v| vec![v]).collect(),
        2 => {
            let (a, b) = (axis(0), axis(1));
            a.iter()
                .flat_map(|x| b.iter().map(move |y| vec![*x, *y]))
                .collect()
        }
        _ => Vec::new(),
    }
}

/// Best fixed action of `player` against the recorded opponent play,
/// maximizing the concave average payoff by projected gradient ascent.
///
/// For one- and two-dimensional sets a grid search over the bounding box
/// (spacing 1e-3 of the box width, coarsened to fit a fixed work budget)
/// seeds a second ascent; the better of the two maximizers is returned.
pub fn best_fixed_action<G: Game + ?Sized>(
    game: &G,
    player: usize,
    played: &[Profile],
    solver_tol: f64,
) -> Result<Vec<f64>> {
    if played.is_empty() {
        return Ok(game.action_set(player).safety_center().to_vec());
    }
    let ctx = Contexts::new(played);
    let set = game.action_set(player);
    let mut best = projected_ascent(game, player, &ctx, set.safety_center().to_vec(), solver_tol)?;
    let best_value = ctx.value(game, player, &best);
    let dim = set.dim();
    if dim <= 2 {
        let (lo, hi) = set.bounding_box();
        let budget = (GRID_BUDGET / ctx.profiles.len()).max(1);
        let fine = (1.0 / GRID_RESOLUTION) as usize + 1;
        let per_axis = fine
            .min((budget as f64).powf(1.0 / dim as f64) as usize)
            .max(3);
        let mut grid_best: Option<(f64, Vec<f64>)> = None;
        for cand in grid_candidates(&lo, &hi, per_axis) {
            let p = set.project(&cand)?;
            let v = ctx.value(game, player, &p);
            if grid_best.as_ref().is_none_or(|(bv, _)| v > *bv) {
                grid_best = Some((v, p));
            }
        }
        if let Some((gv, gp)) = grid_best {
            if gv > best_value {
                let refined = projected_ascent(game, player, &ctx, gp.clone(), solver_tol)?;
                let rv = ctx.value(game, player, &refined);
                best = if rv >= gv { refined } else { gp };
            }
        }
    }
    Ok(best)
}

/// Per-round and cumulative regret of the recorded play against `comparator`.
pub fn regret_against<G: Game + ?Sized>(
    game: &G,
    player: usize,
    played: &[Profile],
    comparator: &[f64],
) -> (f64, Vec<f64>) {
    let mut scratch = Vec::new();
    let per_round: Vec<f64> = played
        .iter()
        .map(|x| {
            scratch.clone_from(x);
            scratch[player] = comparator.to_vec();
            game.payoff(player, &scratch) - game.payoff(player, x)
        })
        .collect();
    (per_round.iter().sum(), per_round)
}

pub fn regret_from_profiles<G: Game + ?Sized>(
    game: &G,
    player: usize,
    played: &[Profile],
    solver_tol: f64,
) -> Result<RegretReport> {
    if player >= game.players() {
        return Err(GoldError::InvalidGame(format!(
            "player {player} out of range for a {}-player game",
            game.players()
        )));
    }
    let best_fixed = best_fixed_action(game, player, played, solver_tol)?;
    let (cumulative, per_round) = regret_against(game, player, played, &best_fixed);
    Ok(RegretReport {
        horizon: played.len() as u64,
        best_fixed,
        cumulative,
        per_round,
    })
}

/// Regret of `player` over a complete trace. Thinned traces are rejected.
pub fn regret_from_trace<G: Game + ?Sized>(
    trace: &RunTrace,
    game: &G,
    player: usize,
    solver_tol: f64,
) -> Result<RegretReport> {
    let played = trace.played_profiles()?;
    regret_from_profiles(game, player, &played, solver_tol)
}

#[derive(Debug, Clone, PartialEq)]
pub struct DistanceTrajectory {
    /// `|| x_hat_t - x* ||` over the joint profile.
    pub played: Vec<f64>,
    /// `|| x_t - x* ||` over the joint pivot profile.
    pub pivot: Vec<f64>,
}

/// Joint distances to `eq` of every recorded round (thinned traces allowed).
pub fn distance_trajectory(trace: &RunTrace, eq: &EquilibriumResult) -> Result<DistanceTrajectory> {
    let n = trace.players;
    if eq.point.len() != n {
        return Err(GoldError::InvalidTrace(format!(
            "trace has {n} players, equilibrium has {}",
            eq.point.len()
        )));
    }
    let mut played = Vec::new();
    let mut pivot = Vec::new();
    for chunk in trace.rows.chunks(n) {
        if chunk.len() != n || chunk.iter().any(|r| r.t != chunk[0].t) {
            return Err(GoldError::InvalidTrace(
                "every recorded round must list all players".into(),
            ));
        }
        let xs: Profile = chunk.iter().map(|r| r.played.clone()).collect();
        let ps: Profile = chunk.iter().map(|r| r.pivot.clone()).collect();
        played.push(profile_distance(&xs, &eq.point));
        pivot.push(profile_distance(&ps, &eq.point));
    }
    Ok(DistanceTrajectory { played, pivot })
}

/// Running partial sums of the three error series
/// `A_t = gamma_t * sum_{s=head_t}^{t-1} gamma_s / delta_s`,
/// `B_t = gamma_t * delta_{head_t}` and `C_t = gamma_t^2 / delta_{head_t}^2`.
/// Empty rounds contribute zero.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SeriesDiagnostics {
    pub a_partial: Vec<f64>,
    pub b_partial: Vec<f64>,
    pub c_partial: Vec<f64>,
}

impl SeriesDiagnostics {
    pub fn totals(&self) -> (f64, f64, f64) {
        let last = |v: &[f64]| v.last().copied().unwrap_or(0.0);
        (
            last(&self.a_partial),
            last(&self.b_partial),
            last(&self.c_partial),
        )
    }
}

/// Series diagnostics for a head sequence; `heads[t - 1]` is the head of round `t`.
pub fn series_from_heads(heads: &[Option<u64>], schedules: &GoldSchedules) -> SeriesDiagnostics {
    let horizon = heads.len();
    // ratio_prefix[k] = sum_{s=1}^{k} gamma_s / delta_s
    let mut ratio_prefix = vec![0.0; horizon + 1];
    for s in 1..=horizon {
        let s64 = s as u64;
        ratio_prefix[s] = ratio_prefix[s - 1] + schedules.step_size(s64) / schedules.radius(s64);
    }
    let mut out = SeriesDiagnostics {
        a_partial: Vec::with_capacity(horizon),
        b_partial: Vec::with_capacity(horizon),
        c_partial: Vec::with_capacity(horizon),
    };
    let (mut a, mut b, mut c) = (0.0, 0.0, 0.0);
    for (k, head) in heads.iter().enumerate() {
        let t = k as u64 + 1;
        if let Some(h) = *head {
            let gamma = schedules.step_size(t);
            let delta_h = schedules.radius(h);
            let h = h as usize;
            if h < t as usize {
                a += gamma * (ratio_prefix[t as usize - 1] - ratio_prefix[h - 1]);
            }
            b += gamma * delta_h;
            c += gamma * gamma / (delta_h * delta_h);
        }
        out.a_partial.push(a);
        out.b_partial.push(b);
        out.c_partial.push(c);
    }
    out
}

pub fn series_diagnostics(
    trace: &RunTrace,
    player: usize,
    schedules: &GoldSchedules,
) -> Result<SeriesDiagnostics> {
    trace.require_complete()?;
    Ok(series_from_heads(&trace.heads(player), schedules))
}

/// One row of the metrics table, one per (run, player).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricsRow {
    pub run_id: String,
    #[serde(rename = "T")]
    pub horizon: u64,
    pub regret: f64,
    pub final_pivot_distance: f64,
    pub empty_rounds: u64,
    pub max_lag: u64,
    #[serde(rename = "A_sum")]
    pub a_sum: f64,
    #[serde(rename = "B_sum")]
    pub b_sum: f64,
    #[serde(rename = "C_sum")]
    pub c_sum: f64,
}

/// Computes one metrics row per player of a complete trace.
/// `final_pivot_distance` is the joint pivot distance at the last round.
pub fn analyze_trace<G: Game + ?Sized>(
    trace: &RunTrace,
    game: &G,
    schedules: &[GoldSchedules],
    eq: &EquilibriumResult,
    run_id: &str,
    solver_tol: f64,
) -> Result<Vec<MetricsRow>> {
    trace.require_complete()?;
    if schedules.len() != trace.players || game.players() != trace.players {
        return Err(GoldError::InvalidTrace(format!(
            "trace has {} players, game has {}, {} schedules given",
            trace.players,
            game.players(),
            schedules.len()
        )));
    }
    let dist = distance_trajectory(trace, eq)?;
    let final_dist = dist.pivot.last().copied().unwrap_or(0.0);
    let played = trace.played_profiles()?;
    let mut rows = Vec::with_capacity(trace.players);
    for (p, sched) in schedules.iter().enumerate() {
        let regret = regret_from_profiles(game, p, &played, solver_tol)?;
        let series = series_diagnostics(trace, p, sched)?;
        let (a_sum, b_sum, c_sum) = series.totals();
        let mut empty_rounds = 0;
        let mut max_lag = 0;
        for r in trace.player_rows(p) {
            match r.head {
                Some(h) => max_lag = max_lag.max(r.t - h),
                None => empty_rounds += 1,
            }
        }
        rows.push(MetricsRow {
            run_id: format!("{run_id}-p{p}"),
            horizon: trace.horizon(),
            regret: regret.cumulative,
            final_pivot_distance: final_dist,
            empty_rounds,
            max_lag,
            a_sum,
            b_sum,
            c_sum,
        });
    }
    Ok(rows)
}

pub fn mean_stderr(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn loglog_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let lx: Vec<f64> = xs.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}

/// Means of consecutive non-overlapping windows; a short tail is dropped.
pub fn window_means(xs: &[f64], window: usize) -> Vec<f64> {
    xs.chunks_exact(window.max(1))
        .map(|w| w.iter().sum::<f64>() / w.len() as f64)
        .collect()
}

pub fn is_non_increasing(xs: &[f64]) -> bool {
    xs.windows(2).all(|w| w[1] <= w[0])
}

/// Share of the final total contributed after the first `split` terms of a
/// partial-sum sequence.
pub fn tail_mass(partial: &[f64], split: usize) -> f64 {
    let total = partial.last().copied().unwrap_or(0.0);
    if total == 0.0 || split == 0 {
        return if total == 0.0 { 0.0 } else { 1.0 };
    }
    (total - partial[split - 1]) / total
}
