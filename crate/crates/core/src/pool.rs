//! The reward pool: received-but-unused rewards, consumed oldest-origin first,
//! one per round.

use std::cmp::{Ordering, Reverse};
use std::collections::{BinaryHeap, HashSet};

use crate::error::{GoldError, Result};

/// A timestamped reward together with the sampling direction and radius that
/// produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct FeedbackItem {
    /// Round at which the action was played.
    pub origin: u64,
    pub reward: f64,
    /// Unit sampling direction drawn at `origin`.
    pub direction: Vec<f64>,
    /// Sampling radius in force at `origin`.
    pub radius: f64,
}

// Ordering is by origin only; origins are unique within a pool.
#[derive(Debug)]
struct ByOrigin(FeedbackItem);

impl PartialEq for ByOrigin {
    fn eq(&self, other: &Self) -> bool {
        self.0.origin == other.0.origin
    }
}

impl Eq for ByOrigin {}

impl PartialOrd for ByOrigin {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for ByOrigin {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.origin.cmp(&other.0.origin)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct PoolStats {
    /// Rounds on which the pool was empty and no update happened.
    pub empty_rounds: u64,
    /// Largest `t - origin` over all dequeues.
    pub max_lag: u64,
    /// Largest number of pending items left after a round's dequeue.
    pub max_pool_size: usize,
}

#[derive(Debug, Default)]
pub struct RewardPool {
    pending: BinaryHeap<Reverse<ByOrigin>>,
    seen: HashSet<u64>,
    last_head: Option<u64>,
    stats: PoolStats,
    enqueued: u64,
    dequeued: u64,
}

impl RewardPool {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds the rewards received this round. Origins must never repeat.
    pub fn enqueue_batch<I>(&mut self, items: I) -> Result<()>
    where
        I: IntoIterator<Item = FeedbackItem>,
    {
        for item in items {
            if !self.seen.insert(item.origin) {
                return Err(GoldError::DuplicateOrigin(item.origin));
            }
            self.enqueued += 1;
            self.pending.push(Reverse(ByOrigin(item)));
        }
        Ok(())
    }

    /// Removes the oldest pending item at round `t`, or records an empty
    /// round and returns `None`.
    pub fn dequeue_head(&mut self, t: u64) -> Option<FeedbackItem> {
        let head = self.pending.pop().map(|Reverse(ByOrigin(item))| item);
        match &head {
            Some(item) => {
                debug_assert!(item.origin <= t, "item from the future");
                self.last_head = Some(item.origin);
                self.stats.max_lag = self.stats.max_lag.max(t.saturating_sub(item.origin));
                self.dequeued += 1;
            }
            None => {
                self.last_head = None;
                self.stats.empty_rounds += 1;
            }
        }
        self.stats.max_pool_size = self.stats.max_pool_size.max(self.pending.len());
        head
    }

    pub fn stats(&self) -> PoolStats {
        self.stats
    }

    /// Origin of the most recent dequeue; `None` when that round was empty.
    pub fn last_head(&self) -> Option<u64> {
        self.last_head
    }

    pub fn len(&self) -> usize {
        self.pending.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pending.is_empty()
    }

    pub fn enqueued(&self) -> u64 {
        self.enqueued
    }

    pub fn dequeued(&self) -> u64 {
        self.dequeued
    }

    /// Origins currently pending, in ascending order.
    pub fn pending_origins(&self) -> Vec<u64> {
        let mut v: Vec<u64> = self.pending.iter().map(|Reverse(b)| b.0.origin).collect();
        v.sort_unstable();
        v
    }
}

/// Replays a delay sequence through a fresh pool and returns the head of each
/// round (`None` for empty rounds) together with the final statistics.
///
/// `delays[s - 1]` is the delay of the reward generated at round `s`; the
/// replay runs for `delays.len()` rounds.
pub fn replay_heads(delays: &[u64]) -> (Vec<Option<u64>>, PoolStats) {
    let horizon = delays.len() as u64;
    let mut arrivals: Vec<Vec<u64>> = vec![Vec::new(); delays.len() + 1];
    for (i, &d) in delays.iter().enumerate() {
        let s = i as u64 + 1;
        let at = s + d;
        if at <= horizon {
            arrivals[at as usize].push(s);
        }
    }
    let mut pool = RewardPool::new();
    let mut heads = Vec::with_capacity(delays.len());
    for t in 1..=horizon {
        let batch = arrivals[t as usize].iter().map(|&s| marker(s));
        pool.enqueue_batch(batch).expect("origins are unique");
        heads.push(pool.dequeue_head(t).map(|item| item.origin));
    }
    (heads, pool.stats())
}

fn marker(origin: u64) -> FeedbackItem {
    FeedbackItem {
        origin,
        reward: 0.0,
        direction: vec![1.0],
        radius: 1.0,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn item(origin: u64) -> FeedbackItem {
        marker(origin)
    }

    #[test]
    fn enqueue_examples() {
        let mut pool = RewardPool::new();
        pool.enqueue_batch([item(2)]).unwrap();
        assert_eq!(pool.pending_origins(), vec![2]);

        let mut pool = RewardPool::new();
        pool.enqueue_batch(Vec::new()).unwrap();
        assert!(pool.is_empty());

        let mut pool = RewardPool::new();
        pool.enqueue_batch([item(5)]).unwrap();
        pool.enqueue_batch([item(4)]).unwrap();
        assert_eq!(pool.pending_origins(), vec![4, 5]);
    }

    #[test]
    fn duplicate_origin_is_rejected() {
        let mut pool = RewardPool::new();
        pool.enqueue_batch([item(3)]).unwrap();
        assert_eq!(
            pool.enqueue_batch([item(3)]),
            Err(GoldError::DuplicateOrigin(3))
        );
        // even after the first copy was consumed
        pool.dequeue_head(3);
        assert!(pool.enqueue_batch([item(3)]).is_err());
    }

    #[test]
    fn appendix_figure_sequence() {
        let (heads, stats) = replay_heads(&[3, 0, 2, 0, 1]);
        assert_eq!(heads, vec![None, Some(2), None, Some(1), Some(3)]);
        assert_eq!(stats.empty_rounds, 2);
        // round 4 consumes origin 1, three rounds after it was played
        assert_eq!(stats.max_lag, 3);
    }

    #[test]
    fn first_figure_sequence() {
        let (heads, _) = replay_heads(&[0, 3, 1, 2, 0, 1]);
        assert_eq!(heads, vec![Some(1), None, None, Some(3), Some(2), Some(4)]);
    }

    #[test]
    fn synchronous_feedback_uses_current_round() {
        let (heads, stats) = replay_heads(&[0; 20]);
        let expected: Vec<Option<u64>> = (1..=20).map(Some).collect();
        assert_eq!(heads, expected);
        assert_eq!(stats.empty_rounds, 0);
        assert_eq!(stats.max_lag, 0);
        assert_eq!(stats.max_pool_size, 0);
    }

    #[test]
    fn empty_round_clears_last_head() {
        let mut pool = RewardPool::new();
        pool.enqueue_batch([item(1)]).unwrap();
        assert_eq!(pool.dequeue_head(1).map(|i| i.origin), Some(1));
        assert_eq!(pool.last_head(), Some(1));
        assert!(pool.dequeue_head(2).is_none());
        assert_eq!(pool.last_head(), None);
        assert_eq!(pool.stats().empty_rounds, 1);
    }

    #[test]
    fn drained_pool_consumes_every_origin_once() {
        let delays = [4u64, 0, 7, 1, 1, 3, 0, 0, 9, 2];
        let horizon = delays.len() as u64;
        let max_d = *delays.iter().max().unwrap();
        let mut pool = RewardPool::new();
        let mut consumed = Vec::new();
        for t in 1..=horizon + max_d {
            let batch: Vec<FeedbackItem> = delays
                .iter()
                .enumerate()
                .filter(|(i, &d)| *i as u64 + 1 + d == t)
                .map(|(i, _)| item(i as u64 + 1))
                .collect();
            pool.enqueue_batch(batch).unwrap();
            if let Some(it) = pool.dequeue_head(t) {
                consumed.push(it.origin);
            }
        }
        let mut sorted = consumed.clone();
        sorted.sort_unstable();
        assert_eq!(sorted, (1..=horizon).collect::<Vec<_>>());
        assert_eq!(pool.enqueued(), horizon);
        assert_eq!(pool.dequeued(), horizon);
        assert!(pool.is_empty());
    }
}
