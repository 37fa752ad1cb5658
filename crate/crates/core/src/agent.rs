//! A single player running the GOLD policy: perturb the pivot, play, stamp
//! the reward for delayed delivery, then fold in at most one pooled reward
//! per round through a projected gradient step.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::delay::DelayProcess;
use crate::error::{GoldError, Result};
use crate::geometry::{ActionSet, BOUNDARY_TOL};
use crate::pool::{FeedbackItem, PoolStats, RewardPool};
use crate::spsa::{perturb, reconstruct_gradient, sample_direction, Perturbation};

/// Equality slack when classifying exponents against the admissible region.
const REGION_EPS: f64 = 1e-9;

/// Power-law schedules `gamma_t = gamma0 / t^c` and `delta_t = delta0 / t^b`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GoldSchedules {
    pub gamma0: f64,
    pub c: f64,
    pub delta0: f64,
    pub b: f64,
    /// Delay growth exponent the tuning targets.
    pub alpha: f64,
}

impl GoldSchedules {
    /// Schedules with the exponents of [`default_tuning`].
    pub fn tuned(gamma0: f64, delta0: f64, alpha: f64) -> Self {
        let (b, c) = default_tuning(alpha);
        GoldSchedules {
            gamma0,
            c,
            delta0,
            b,
            alpha,
        }
    }

    pub fn step_size(&self, t: u64) -> f64 {
        self.gamma0 / (t as f64).powf(self.c)
    }

    pub fn radius(&self, t: u64) -> f64 {
        self.delta0 / (t as f64).powf(self.b)
    }

    /// Checks positivity and that every radius fits inside the safety ball.
    pub fn validate_for(&self, set: &ActionSet) -> Result<()> {
        let positive = |v: f64| v > 0.0 && v.is_finite();
        if !positive(self.gamma0) || !positive(self.delta0) {
            return Err(GoldError::InvalidParams(format!(
                "gamma0 and delta0 must be positive, got {} and {}",
                self.gamma0, self.delta0
            )));
        }
        if !positive(self.b) || !positive(self.c) {
            return Err(GoldError::InvalidParams(format!(
                "exponents b and c must be positive, got b = {}, c = {}",
                self.b, self.c
            )));
        }
        if !(0.0..1.0).contains(&self.alpha) {
            return Err(GoldError::InvalidParams(format!(
                "alpha must lie in [0, 1), got {}",
                self.alpha
            )));
        }
        if self.delta0 > set.safety_radius() {
            return Err(GoldError::InfeasibleRadius {
                radius: self.delta0,
                safety_radius: set.safety_radius(),
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Region {
    /// All three inequalities strict: summable error series.
    NashStrict,
    /// All hold, at least one with equality: logarithmic growth.
    LogBoundary,
    Invalid,
}

impl std::fmt::Display for Region {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Region::NashStrict => "NASH_STRICT",
            Region::LogBoundary => "LOG_BOUNDARY",
            Region::Invalid => "INVALID",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub constraint: &'static str,
    pub lhs: f64,
    pub rhs: f64,
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{} ({} < {})", self.constraint, self.lhs, self.rhs)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParamVerdict {
    pub region: Region,
    pub violated: Vec<Violation>,
}

pub const CONSTRAINT_DRIFT: &str = "2c-b > 1+alpha";
pub const CONSTRAINT_BIAS: &str = "b+c > 1";
pub const CONSTRAINT_VARIANCE: &str = "2c-2b > 1";

/// Classifies `(b, c)` against the admissible region for delay exponent `alpha`.
pub fn validate_params(b: f64, c: f64, alpha: f64) -> ParamVerdict {
    let checks = [
        (CONSTRAINT_DRIFT, 2.0 * c - b, 1.0 + alpha),
        (CONSTRAINT_BIAS, b + c, 1.0),
        (CONSTRAINT_VARIANCE, 2.0 * c - 2.0 * b, 1.0),
    ];
    let mut violated = Vec::new();
    let mut boundary = false;
    for (constraint, lhs, rhs) in checks {
        let gap = lhs - rhs;
        if gap < -REGION_EPS {
            violated.push(Violation {
                constraint,
                lhs,
                rhs,
            });
        } else if gap <= REGION_EPS {
            boundary = true;
        }
    }
    let region = if !violated.is_empty() {
        Region::Invalid
    } else if boundary {
        Region::LogBoundary
    } else {
        Region::NashStrict
    };
    ParamVerdict { region, violated }
}

/// Regret-optimal exponents: `b = min(1/4, 1/3 - alpha/3)`, `c = max(3/4, 2/3 + alpha/3)`.
pub fn default_tuning(alpha: f64) -> (f64, f64) {
    let b = (0.25f64).min(1.0 / 3.0 - alpha / 3.0);
    let c = (0.75f64).max(2.0 / 3.0 + alpha / 3.0);
    (b, c)
}

/// The action chosen at one round, before its reward is known.
#[derive(Debug, Clone, PartialEq)]
pub struct Play {
    pub round: u64,
    pub pivot: Vec<f64>,
    pub played: Vec<f64>,
    pub perturbation: Perturbation,
}

impl Play {
    /// Stamps the reward observed for this play for later delivery.
    pub fn stamp(&self, reward: f64) -> FeedbackItem {
        FeedbackItem {
            origin: self.round,
            reward,
            direction: self.perturbation.direction.clone(),
            radius: self.perturbation.radius,
        }
    }
}

/// Outcome of the pool/update half of a round.
#[derive(Debug, Clone, PartialEq)]
pub struct Update {
    /// Origin of the dequeued item, `None` on an empty round.
    pub head: Option<u64>,
    /// Radius recorded with the dequeued item.
    pub head_radius: Option<f64>,
    /// Pending items left after the dequeue.
    pub pool_size: usize,
}

/// Everything a full single-agent round produces.
#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    pub round: u64,
    pub pivot: Vec<f64>,
    pub played: Vec<f64>,
    pub reward: f64,
    pub triggered_delay: u64,
    pub head: Option<u64>,
    pub pool_size: usize,
    /// The reward stamped this round; the caller delivers it at `round + triggered_delay`.
    pub feedback: FeedbackItem,
}

#[derive(Debug)]
pub struct GoldAgent {
    set: ActionSet,
    schedules: GoldSchedules,
    pivot: Vec<f64>,
    pool: RewardPool,
    round: u64,
    pending_play: Option<u64>,
}

impl GoldAgent {
    /// Creates an agent at round 1. `x1` defaults to the safety center.
    pub fn new(set: ActionSet, schedules: GoldSchedules, x1: Option<Vec<f64>>) -> Result<Self> {
        schedules.validate_for(&set)?;
        let pivot = match x1 {
            Some(x) => {
                if !set.contains(&x, BOUNDARY_TOL)? {
                    return Err(GoldError::InvalidParams(format!(
                        "initial point {x:?} is not in the action set"
                    )));
                }
                set.project(&x)?
            }
            None => set.safety_center().to_vec(),
        };
        Ok(GoldAgent {
            set,
            schedules,
            pivot,
            pool: RewardPool::new(),
            round: 1,
            pending_play: None,
        })
    }

    pub fn pivot(&self) -> &[f64] {
        &self.pivot
    }

    pub fn round(&self) -> u64 {
        self.round
    }

    pub fn set(&self) -> &ActionSet {
        &self.set
    }

    pub fn schedules(&self) -> &GoldSchedules {
        &self.schedules
    }

    pub fn pool_stats(&self) -> PoolStats {
        self.pool.stats()
    }

    pub fn pool(&self) -> &RewardPool {
        &self.pool
    }

    /// Draws a direction and plays the skewed perturbation of the pivot.
    pub fn play<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<Play> {
        let t = self.round;
        let radius = self.schedules.radius(t);
        // radii decrease from delta0 <= r, so this only fires on corrupted state
        assert!(
            radius <= self.set.safety_radius(),
            "sampling radius {radius} exceeds safety radius at round {t}"
        );
        let direction = sample_direction(self.set.dim(), rng);
        let (played, perturbation) =
            perturb(&self.pivot, &self.set, radius, &direction).map_err(|e| e.at_round(t))?;
        self.pending_play = Some(t);
        Ok(Play {
            round: t,
            pivot: self.pivot.clone(),
            played,
            perturbation,
        })
    }

    /// Enqueues this round's arrivals, dequeues the oldest item and takes a
    /// projected step along its gradient surrogate. Advances the round.
    pub fn absorb<I>(&mut self, arriving: I) -> Result<Update>
    where
        I: IntoIterator<Item = FeedbackItem>,
    {
        let t = self.round;
        if self.pending_play.take() != Some(t) {
            return Err(GoldError::InvalidParams(format!(
                "absorb called at round {t} without a play"
            )));
        }
        self.pool
            .enqueue_batch(arriving)
            .map_err(|e| e.at_round(t))?;
        let head = self.pool.dequeue_head(t);
        if let Some(item) = &head {
            let grad = reconstruct_gradient(Some(item), self.set.dim());
            let step = self.schedules.step_size(t);
            let target: Vec<f64> = self
                .pivot
                .iter()
                .zip(&grad)
                .map(|(x, g)| x + step * g)
                .collect();
            self.pivot = self.set.project(&target)?;
        }
        self.round += 1;
        Ok(Update {
            head: head.as_ref().map(|i| i.origin),
            head_radius: head.as_ref().map(|i| i.radius),
            pool_size: self.pool.len(),
        })
    }

    /// One full round against a payoff oracle. The returned feedback item
    /// must be delivered back through `arriving` at `round + triggered_delay`.
    pub fn step<R, F>(
        &mut self,
        arriving: Vec<FeedbackItem>,
        payoff: F,
        delay: &mut DelayProcess,
        rng: &mut R,
    ) -> Result<StepRecord>
    where
        R: Rng + ?Sized,
        F: FnOnce(&[f64]) -> f64,
    {
        let play = self.play(rng)?;
        let reward = payoff(&play.played);
        let feedback = play.stamp(reward);
        let triggered_delay = delay
            .next_delay(play.round)
            .map_err(|e| e.at_round(play.round))?;
        let mut arriving = arriving;
        if triggered_delay == 0 {
            arriving.push(feedback.clone());
        }
        let update = self.absorb(arriving)?;
        Ok(StepRecord {
            round: play.round,
            pivot: play.pivot,
            played: play.played,
            reward,
            triggered_delay,
            head: update.head,
            pool_size: update.pool_size,
            feedback,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::delay::DelaySchedule;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::collections::BTreeMap;

    #[test]
    fn region_examples() {
        let v = validate_params(0.25, 0.75, 0.0);
        assert_eq!(v.region, Region::LogBoundary);
        assert!(v.violated.is_empty());

        assert_eq!(validate_params(0.2, 0.85, 0.0).region, Region::NashStrict);

        let v = validate_params(0.5, 0.6, 0.5);
        assert_eq!(v.region, Region::Invalid);
        let names: Vec<&str> = v.violated.iter().map(|x| x.constraint).collect();
        assert_eq!(names, vec![CONSTRAINT_DRIFT, CONSTRAINT_VARIANCE]);
        assert!((v.violated[0].lhs - 0.7).abs() < 1e-12);
        assert!((v.violated[1].lhs - 0.2).abs() < 1e-12);
    }

    #[test]
    fn default_tunings_sit_on_the_boundary() {
        assert_eq!(default_tuning(0.0), (0.25, 0.75));
        assert_eq!(default_tuning(0.25), (0.25, 0.75));
        let (b, c) = default_tuning(0.5);
        assert!((b - 1.0 / 6.0).abs() < 1e-15 && (c - 5.0 / 6.0).abs() < 1e-15);
        for alpha in [0.0, 0.1, 0.25, 0.5, 0.9] {
            let (b, c) = default_tuning(alpha);
            assert_eq!(validate_params(b, c, alpha).region, Region::LogBoundary);
        }
    }

    #[test]
    fn schedules_decrease() {
        let s = GoldSchedules::tuned(1.0, 0.3, 0.2);
        for t in 1..1000 {
            assert!(s.step_size(t + 1) < s.step_size(t));
            assert!(s.radius(t + 1) < s.radius(t));
        }
        assert_eq!(s.radius(1), 0.3);
    }

    #[test]
    fn rejects_delta0_beyond_safety_radius() {
        let set = ActionSet::interval(0.0, 1.0).unwrap();
        let s = GoldSchedules::tuned(1.0, 0.6, 0.0);
        assert!(matches!(
            GoldAgent::new(set, s, None),
            Err(GoldError::InfeasibleRadius { .. })
        ));
    }

    fn unit_agent(gamma0: f64) -> GoldAgent {
        let set = ActionSet::interval(-1.0, 1.0).unwrap();
        let s = GoldSchedules {
            gamma0,
            c: 0.75,
            delta0: 0.5,
            b: 0.25,
            alpha: 0.0,
        };
        GoldAgent::new(set, s, Some(vec![0.0])).unwrap()
    }

    #[test]
    fn update_examples() {
        let item = FeedbackItem {
            origin: 1,
            reward: 2.0,
            direction: vec![1.0],
            radius: 0.5,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut agent = unit_agent(0.1);
        agent.play(&mut rng).unwrap();
        let up = agent.absorb([item.clone()]).unwrap();
        assert_eq!(up.head, Some(1));
        assert!((agent.pivot()[0] - 0.4).abs() < 1e-15);

        let mut agent = unit_agent(1.0);
        agent.play(&mut rng).unwrap();
        agent.absorb([item]).unwrap();
        assert_eq!(agent.pivot(), &[1.0]);
    }

    #[test]
    fn empty_round_leaves_pivot_unchanged() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut agent = unit_agent(1.0);
        let before = agent.pivot().to_vec();
        agent.play(&mut rng).unwrap();
        let up = agent.absorb(Vec::new()).unwrap();
        assert_eq!(up.head, None);
        assert_eq!(agent.pivot(), before.as_slice());
        assert_eq!(agent.round(), 2);
    }

    #[test]
    fn absorb_requires_play() {
        let mut agent = unit_agent(1.0);
        assert!(agent.absorb(Vec::new()).is_err());
    }

    /// Runs a single agent with explicit delivery bookkeeping.
    fn drive(
        agent: &mut GoldAgent,
        delays: &mut DelayProcess,
        payoff: impl Fn(&[f64]) -> f64,
        horizon: u64,
        seed: u64,
    ) -> Vec<StepRecord> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut inflight: BTreeMap<u64, Vec<FeedbackItem>> = BTreeMap::new();
        let mut out = Vec::new();
        for t in 1..=horizon {
            let arriving = inflight.remove(&t).unwrap_or_default();
            let rec = agent.step(arriving, &payoff, delays, &mut rng).unwrap();
            if rec.triggered_delay > 0 {
                inflight
                    .entry(t + rec.triggered_delay)
                    .or_default()
                    .push(rec.feedback.clone());
            }
            out.push(rec);
        }
        out
    }

    #[test]
    fn played_actions_stay_feasible_and_heads_follow_fifo() {
        let set = ActionSet::cube(2, 0.0, 1.0).unwrap();
        let s = GoldSchedules::tuned(1.0, 0.5, 0.0);
        let mut agent = GoldAgent::new(set.clone(), s, Some(vec![1.0, 0.0])).unwrap();
        let mut delays = DelayProcess::new(
            DelaySchedule::scripted(vec![3, 0, 2, 0, 1]),
            ChaCha8Rng::seed_from_u64(1),
        );
        let recs = drive(&mut agent, &mut delays, |x| -x[0] * x[0] - x[1], 5, 2);
        let heads: Vec<Option<u64>> = recs.iter().map(|r| r.head).collect();
        assert_eq!(heads, vec![None, Some(2), None, Some(1), Some(3)]);
        for r in &recs {
            assert!(set.contains(&r.played, 1e-9).unwrap());
        }
        // empty rounds do not move the pivot
        assert_eq!(recs[1].pivot, recs[0].pivot);
        assert_eq!(recs[3].pivot, recs[2].pivot);
    }

    #[test]
    fn reconstruction_uses_the_radius_recorded_at_origin() {
        // constant delay 5 and b > 0: every dequeued radius differs from the
        // current one, and must equal the radius of the origin round
        let set = ActionSet::interval(-1.0, 1.0).unwrap();
        let s = GoldSchedules::tuned(0.5, 0.5, 0.0);
        let mut agent = GoldAgent::new(set, s, None).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut inflight: BTreeMap<u64, Vec<FeedbackItem>> = BTreeMap::new();
        for t in 1..=200u64 {
            let play = agent.play(&mut rng).unwrap();
            let x = play.played[0];
            let item = play.stamp(-(x - 0.3) * (x - 0.3));
            inflight.entry(t + 5).or_default().push(item);
            let before = agent.pivot().to_vec();
            let arriving = inflight.remove(&t).unwrap_or_default();
            let expected = arriving.first().cloned();
            let up = agent.absorb(arriving).unwrap();
            if t > 5 {
                let origin = up.head.unwrap();
                assert_eq!(origin, t - 5);
                let head_radius = up.head_radius.unwrap();
                assert_eq!(head_radius, s.radius(origin));
                assert_ne!(head_radius, s.radius(t));
                let item = expected.unwrap();
                let g = item.reward / s.radius(origin) * item.direction[0];
                let want = (before[0] + s.step_size(t) * g).clamp(-1.0, 1.0);
                assert!((agent.pivot()[0] - want).abs() < 1e-15);
            } else {
                assert_eq!(up.head, None);
            }
        }
    }

    #[test]
    fn concave_single_agent_converges() {
        // u(x) = -x^2 on [-1, 1], synchronous feedback, strict tuning
        let set = ActionSet::interval(-1.0, 1.0).unwrap();
        let s = GoldSchedules {
            gamma0: 2.0,
            c: 0.85,
            delta0: 0.5,
            b: 0.2,
            alpha: 0.0,
        };
        let mut agent = GoldAgent::new(set, s, Some(vec![0.9])).unwrap();
        let mut delays =
            DelayProcess::new(DelaySchedule::constant(0), ChaCha8Rng::seed_from_u64(0));
        drive(&mut agent, &mut delays, |x| -x[0] * x[0], 10_000, 4);
        assert!(agent.pivot()[0].abs() < 0.1, "{}", agent.pivot()[0]);
    }
}
