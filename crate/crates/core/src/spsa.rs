//! One-point simultaneous-perturbation gradient estimation.
//!
//! A pivot `x` is perturbed along a random unit direction `u`, skewed toward
//! the safety center so the played point stays feasible:
//! `x_hat = x + delta * (u - (x - p) / r)`. The reward observed at `x_hat`
//! later yields the surrogate `(n / delta) * reward * u`.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{GoldError, Result};
use crate::game::{Game, Profile};
use crate::geometry::{distance, norm, ActionSet};
use crate::pool::FeedbackItem;

#[derive(Debug, Clone, PartialEq)]
pub struct Perturbation {
    /// Unit sampling direction `u`.
    pub direction: Vec<f64>,
    /// Skewed direction `w = u - (pivot - p) / r`.
    pub adjusted: Vec<f64>,
    pub radius: f64,
}

/// Draws a direction uniformly from the unit sphere of `R^dim`.
///
/// For `dim == 1` the sphere is `{-1, +1}`.
pub fn sample_direction<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Vec<f64> {
    assert!(dim >= 1, "direction dimension must be >= 1");
    if dim == 1 {
        return vec![if rng.random::<bool>() { 1.0 } else { -1.0 }];
    }
    loop {
        let g: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
        let n = norm(&g);
        if n > 1e-300 {
            return g.into_iter().map(|v| v / n).collect();
        }
    }
}

/// Perturbs `pivot` with the feasibility skew and returns the played point.
pub fn perturb(
    pivot: &[f64],
    set: &ActionSet,
    radius: f64,
    direction: &[f64],
) -> Result<(Vec<f64>, Perturbation)> {
    let dim = set.dim();
    for v in [pivot, direction] {
        if v.len() != dim {
            return Err(GoldError::DimensionMismatch {
                expected: dim,
                got: v.len(),
            });
        }
    }
    let r = set.safety_radius();
    if radius.is_nan() || radius <= 0.0 || radius > r {
        return Err(GoldError::InfeasibleRadius {
            radius,
            safety_radius: r,
        });
    }
    let p = set.safety_center();
    let adjusted: Vec<f64> = (0..dim)
        .map(|k| direction[k] - (pivot[k] - p[k]) / r)
        .collect();
    let played = (0..dim).map(|k| pivot[k] + radius * adjusted[k]).collect();
    Ok((
        played,
        Perturbation {
            direction: direction.to_vec(),
            adjusted,
            radius,
        },
    ))
}

/// Gradient surrogate `(dim / radius) * reward * direction` built from a
/// dequeued item. An empty round (`None`) yields the zero vector.
///
/// The radius is the one recorded with the item, i.e. the radius in force
/// when the action was played, not the current one.
pub fn reconstruct_gradient(item: Option<&FeedbackItem>, dim: usize) -> Vec<f64> {
    match item {
        None => vec![0.0; dim],
        Some(item) => {
            let scale = dim as f64 / item.radius * item.reward;
            item.direction.iter().map(|u| scale * u).collect()
        }
    }
}

/// Monte Carlo estimate of `|| E[v_hat] - v(x) ||` for one player, with every
/// player perturbing around `profile` at the same `radius`.
///
/// Each draw is paired with its mirror image (all directions negated). The
/// direction law is symmetric, so the pair average has the same expectation
/// as a single draw while cancelling the `O(1/radius)` zero-mean term that
/// otherwise swamps an `O(radius)` bias.
pub fn estimate_bias<G, R>(
    game: &G,
    player: usize,
    profile: &Profile,
    radius: f64,
    samples: usize,
    rng: &mut R,
) -> Result<f64>
where
    G: Game + ?Sized,
    R: Rng + ?Sized,
{
    let mean = mean_estimate(game, player, profile, radius, samples, rng)?;
    let truth = game.gradient(player, profile);
    Ok(distance(&mean, &truth))
}

/// Monte Carlo mean of the skewed one-point estimator (antithetic pairs).
pub fn mean_estimate<G, R>(
    game: &G,
    player: usize,
    profile: &Profile,
    radius: f64,
    samples: usize,
    rng: &mut R,
) -> Result<Vec<f64>>
where
    G: Game + ?Sized,
    R: Rng + ?Sized,
{
    let n = game.players();
    if profile.len() != n {
        return Err(GoldError::InvalidGame(format!(
            "profile has {} players, game has {n}",
            profile.len()
        )));
    }
    let dim = game.action_set(player).dim();
    let mut acc = vec![0.0; dim];
    let mut plus: Profile = profile.clone();
    let mut minus: Profile = profile.clone();
    for _ in 0..samples {
        let mut own = Vec::new();
        for j in 0..n {
            let set = game.action_set(j);
            let u = sample_direction(set.dim(), rng);
            let neg: Vec<f64> = u.iter().map(|v| -v).collect();
            plus[j] = perturb(&profile[j], set, radius, &u)?.0;
            minus[j] = perturb(&profile[j], set, radius, &neg)?.0;
            if j == player {
                own = u;
            }
        }
        let diff = game.payoff(player, &plus) - game.payoff(player, &minus);
        let scale = dim as f64 / radius * 0.5 * diff;
        for (a, u) in acc.iter_mut().zip(&own) {
            *a += scale * u;
        }
    }
    Ok(acc.into_iter().map(|a| a / samples as f64).collect())
}
