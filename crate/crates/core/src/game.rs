//! Continuous games: payoffs, individual payoff gradients and regularity
//! constants, plus a sampling falsifier for diagonal strict concavity.

use rand::Rng;

use crate::error::{GoldError, Result};
use crate::geometry::{dot, profile_distance, ActionSet, SetKind};

/// Joint action profile, one vector per player.
pub type Profile = Vec<Vec<f64>>;

/// An `N`-player continuous game with payoffs concave in each player's own
/// action. A single-agent online problem is the `N = 1` case.
pub trait Game: Send + Sync {
    fn players(&self) -> usize;

    fn action_set(&self, player: usize) -> &ActionSet;

    /// `u^i(x)`.
    fn payoff(&self, player: usize, profile: &Profile) -> f64;

    /// `v^i(x)`, the gradient of `u^i` with respect to `x^i`.
    fn gradient(&self, player: usize, profile: &Profile) -> Vec<f64>;

    /// Bound on `|| v^i ||` over the feasible region.
    fn lipschitz_value(&self) -> f64;

    /// Smoothness constant of the joint gradient field.
    fn lipschitz_grad(&self) -> f64;

    fn name(&self) -> &str;

    /// Safety centers of every player, a convenient interior profile.
    fn center_profile(&self) -> Profile {
        (0..self.players())
            .map(|i| self.action_set(i).safety_center().to_vec())
            .collect()
    }

    fn sample_profile(&self, rng: &mut dyn rand::RngCore) -> Profile {
        (0..self.players())
            .map(|i| self.action_set(i).sample_point(rng))
            .collect()
    }
}

/// Kelly auction: `u^i = g^i x^i / (c + sum_j x^j) - x^i` on `[0, b^i]`.
///
/// With `resources > 1` every resource is auctioned independently and player
/// `i` bids on each from the box `[0, b^i]^resources`.
#[derive(Debug, Clone)]
pub struct KellyAuction {
    gains: Vec<f64>,
    entry_barrier: f64,
    budgets: Vec<f64>,
    resources: usize,
    sets: Vec<ActionSet>,
    lipschitz_value: f64,
    lipschitz_grad: f64,
}

impl KellyAuction {
    pub fn new(gains: Vec<f64>, entry_barrier: f64, budgets: Vec<f64>) -> Result<Self> {
        Self::with_resources(gains, entry_barrier, budgets, 1)
    }

    pub fn with_resources(
        gains: Vec<f64>,
        entry_barrier: f64,
        budgets: Vec<f64>,
        resources: usize,
    ) -> Result<Self> {
        if gains.is_empty() || gains.len() != budgets.len() {
            return Err(GoldError::InvalidGame(format!(
                "need one gain and one budget per bidder ({} vs {})",
                gains.len(),
                budgets.len()
            )));
        }
        if gains.iter().any(|g| *g <= 0.0 || !g.is_finite()) {
            return Err(GoldError::InvalidGame("gains must be positive".into()));
        }
        if budgets.iter().any(|b| *b <= 0.0 || !b.is_finite()) {
            return Err(GoldError::InvalidGame("budgets must be positive".into()));
        }
        if entry_barrier <= 0.0 || !entry_barrier.is_finite() {
            return Err(GoldError::InvalidGame(format!(
                "entry barrier must be > 0 (payoff undefined at the all-zero profile), got {entry_barrier}"
            )));
        }
        if resources == 0 {
            return Err(GoldError::InvalidGame("resources must be >= 1".into()));
        }
        let sets = budgets
            .iter()
            .map(|&b| {
                ActionSet::with_safety_ball(
                    SetKind::Box {
                        lo: vec![0.0; resources],
                        hi: vec![b; resources],
                    },
                    vec![0.5 * b; resources],
                    0.99 * 0.5 * b,
                )
            })
            .collect::<Result<Vec<_>>>()?;
        let n = gains.len() as f64;
        let g_max = gains.iter().cloned().fold(0.0, f64::max);
        let c = entry_barrier;
        // |dv/dx| <= g/(c+S) <= g/c per resource, and v >= -1
        let per_resource = (g_max / c - 1.0).max(1.0);
        let lipschitz_value = per_resource * (resources as f64).sqrt();
        // every second derivative is bounded by 2g/c^2 (Frobenius bound)
        let lipschitz_grad = 2.0 * g_max / (c * c) * n;
        Ok(KellyAuction {
            gains,
            entry_barrier,
            budgets,
            resources,
            sets,
            lipschitz_value,
            lipschitz_grad,
        })
    }

    pub fn gains(&self) -> &[f64] {
        &self.gains
    }

    pub fn entry_barrier(&self) -> f64 {
        self.entry_barrier
    }

    pub fn budgets(&self) -> &[f64] {
        &self.budgets
    }

    fn total_bid(&self, profile: &Profile, resource: usize) -> f64 {
        profile.iter().map(|x| x[resource]).sum()
    }
}

impl Game for KellyAuction {
    fn players(&self) -> usize {
        self.gains.len()
    }

    fn action_set(&self, player: usize) -> &ActionSet {
        &self.sets[player]
    }

    fn payoff(&self, player: usize, profile: &Profile) -> f64 {
        kelly_payoff(self, player, profile)
    }

    fn gradient(&self, player: usize, profile: &Profile) -> Vec<f64> {
        kelly_gradient(self, player, profile)
    }

    fn lipschitz_value(&self) -> f64 {
        self.lipschitz_value
    }

    fn lipschitz_grad(&self) -> f64 {
        self.lipschitz_grad
    }

    fn name(&self) -> &str {
        "kelly"
    }
}

/// `g^i x^i / (c + sum_j x^j) - x^i`, summed over resources.
pub fn kelly_payoff(a: &KellyAuction, i: usize, x: &Profile) -> f64 {
    let g = a.gains[i];
    (0..a.resources)
        .map(|r| {
            let own = x[i][r];
            g * own / (a.entry_barrier + a.total_bid(x, r)) - own
        })
        .sum()
}

/// `g^i (c + sum_{j != i} x^j) / (c + sum_j x^j)^2 - 1` per resource.
pub fn kelly_gradient(a: &KellyAuction, i: usize, x: &Profile) -> Vec<f64> {
    let g = a.gains[i];
    (0..a.resources)
        .map(|r| {
            let denom = a.entry_barrier + a.total_bid(x, r);
            g * (denom - x[i][r]) / (denom * denom) - 1.0
        })
        .collect()
}

/// Decoupled concave game `u^i(x) = -|| x^i - a^i ||^2`.
#[derive(Debug, Clone)]
pub struct QuadraticGame {
    sets: Vec<ActionSet>,
    targets: Vec<Vec<f64>>,
    lipschitz_value: f64,
}

impl QuadraticGame {
    pub fn new(sets: Vec<ActionSet>, targets: Vec<Vec<f64>>) -> Result<Self> {
        check_per_player(&sets, &targets, "target")?;
        let lipschitz_value = sets
            .iter()
            .zip(&targets)
            .map(|(s, a)| 2.0 * s.max_distance_from(a))
            .fold(0.0, f64::max);
        Ok(QuadraticGame {
            sets,
            targets,
            lipschitz_value,
        })
    }

    pub fn targets(&self) -> &[Vec<f64>] {
        &self.targets
    }
}

impl Game for QuadraticGame {
    fn players(&self) -> usize {
        self.sets.len()
    }

    fn action_set(&self, player: usize) -> &ActionSet {
        &self.sets[player]
    }

    fn payoff(&self, player: usize, profile: &Profile) -> f64 {
        -profile[player]
            .iter()
            .zip(&self.targets[player])
            .map(|(x, a)| (x - a).powi(2))
            .sum::<f64>()
    }

    fn gradient(&self, player: usize, profile: &Profile) -> Vec<f64> {
        profile[player]
            .iter()
            .zip(&self.targets[player])
            .map(|(x, a)| -2.0 * (x - a))
            .collect()
    }

    fn lipschitz_value(&self) -> f64 {
        self.lipschitz_value
    }

    fn lipschitz_grad(&self) -> f64 {
        2.0
    }

    fn name(&self) -> &str {
        "quadratic"
    }
}

/// Linear payoffs `u^i(x) = <a^i, x^i> + offset`.
#[derive(Debug, Clone)]
pub struct LinearGame {
    sets: Vec<ActionSet>,
    slopes: Vec<Vec<f64>>,
    offset: f64,
}

impl LinearGame {
    pub fn new(sets: Vec<ActionSet>, slopes: Vec<Vec<f64>>, offset: f64) -> Result<Self> {
        check_per_player(&sets, &slopes, "slope")?;
        Ok(LinearGame {
            sets,
            slopes,
            offset,
        })
    }
}

impl Game for LinearGame {
    fn players(&self) -> usize {
        self.sets.len()
    }

    fn action_set(&self, player: usize) -> &ActionSet {
        &self.sets[player]
    }

    fn payoff(&self, player: usize, profile: &Profile) -> f64 {
        dot(&self.slopes[player], &profile[player]) + self.offset
    }

    fn gradient(&self, player: usize, _profile: &Profile) -> Vec<f64> {
        self.slopes[player].clone()
    }

    fn lipschitz_value(&self) -> f64 {
        self.slopes
            .iter()
            .map(|a| dot(a, a).sqrt())
            .fold(0.0, f64::max)
    }

    fn lipschitz_grad(&self) -> f64 {
        0.0
    }

    fn name(&self) -> &str {
        "linear"
    }
}

/// `u^i(x) = +|| x^i ||^2`: convex in the own action, so it violates
/// monotonicity everywhere. Used as a negative control.
#[derive(Debug, Clone)]
pub struct AntiMonotoneGame {
    sets: Vec<ActionSet>,
}

impl AntiMonotoneGame {
    pub fn new(sets: Vec<ActionSet>) -> Result<Self> {
        if sets.is_empty() {
            return Err(GoldError::InvalidGame("need at least one player".into()));
        }
        Ok(AntiMonotoneGame { sets })
    }
}

impl Game for AntiMonotoneGame {
    fn players(&self) -> usize {
        self.sets.len()
    }

    fn action_set(&self, player: usize) -> &ActionSet {
        &self.sets[player]
    }

    fn payoff(&self, player: usize, profile: &Profile) -> f64 {
        dot(&profile[player], &profile[player])
    }

    fn gradient(&self, player: usize, profile: &Profile) -> Vec<f64> {
        profile[player].iter().map(|x| 2.0 * x).collect()
    }

    fn lipschitz_value(&self) -> f64 {
        self.sets
            .iter()
            .map(|s| 2.0 * s.max_distance_from(&vec![0.0; s.dim()]))
            .fold(0.0, f64::max)
    }

    fn lipschitz_grad(&self) -> f64 {
        2.0
    }

    fn name(&self) -> &str {
        "anti_monotone"
    }
}

fn check_per_player(sets: &[ActionSet], params: &[Vec<f64>], what: &str) -> Result<()> {
    if sets.is_empty() || sets.len() != params.len() {
        return Err(GoldError::InvalidGame(format!(
            "need one {what} per player ({} sets, {} {what}s)",
            sets.len(),
            params.len()
        )));
    }
    for (i, (s, a)) in sets.iter().zip(params).enumerate() {
        if s.dim() != a.len() {
            return Err(GoldError::InvalidGame(format!(
                "player {i}: {what} has length {}, action set has dimension {}",
                a.len(),
                s.dim()
            )));
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DscReport {
    pub pairs: usize,
    /// Pairs with `sum_i lambda^i <v^i(x') - v^i(x), x'^i - x^i> >= 0`.
    pub violations: usize,
    /// Largest weighted sum observed.
    pub worst_value: f64,
}

/// Samples `pairs` random feasible profile pairs and counts violations of
/// diagonal strict concavity with weights `weights`.
///
/// A sampling falsifier: zero violations means none were found, not that the
/// condition holds.
pub fn check_dsc<G, R>(game: &G, weights: &[f64], pairs: usize, rng: &mut R) -> Result<DscReport>
where
    G: Game + ?Sized,
    R: Rng,
{
    let n = game.players();
    if weights.len() != n || weights.iter().any(|w| w.is_nan() || *w <= 0.0) {
        return Err(GoldError::InvalidGame(format!(
            "need {n} positive weights, got {weights:?}"
        )));
    }
    let mut violations = 0;
    let mut worst = f64::NEG_INFINITY;
    let mut drawn = 0;
    while drawn < pairs {
        let x = game.sample_profile(rng);
        let y = game.sample_profile(rng);
        if profile_distance(&x, &y) <= 1e-6 {
            continue;
        }
        drawn += 1;
        let s: f64 = (0..n)
            .map(|i| {
                let dv: Vec<f64> = game
                    .gradient(i, &y)
                    .iter()
                    .zip(game.gradient(i, &x))
                    .map(|(a, b)| a - b)
                    .collect();
                let dx: Vec<f64> = y[i].iter().zip(&x[i]).map(|(a, b)| a - b).collect();
                weights[i] * dot(&dv, &dx)
            })
            .sum();
        if s >= 0.0 {
            violations += 1;
        }
        worst = worst.max(s);
    }
    Ok(DscReport {
        pairs,
        violations,
        worst_value: worst,
    })
}

/// Largest relative disagreement between `gradient` and central finite
/// differences of `payoff` over `samples` random interior profiles.
pub fn max_gradient_error<G, R>(game: &G, samples: usize, rng: &mut R) -> f64
where
    G: Game + ?Sized,
    R: Rng,
{
    let h = 1e-6;
    let mut worst: f64 = 0.0;
    for _ in 0..samples {
        let x = game.sample_profile(rng);
        for i in 0..game.players() {
            let g = game.gradient(i, &x);
            for k in 0..x[i].len() {
                let mut up = x.clone();
                let mut down = x.clone();
                up[i][k] += h;
                down[i][k] -= h;
                let fd = (game.payoff(i, &up) - game.payoff(i, &down)) / (2.0 * h);
                let err = (fd - g[k]).abs() / g[k].abs().max(1.0);
                worst = worst.max(err);
            }
        }
    }
    worst
}
