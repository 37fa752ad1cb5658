//! Per-round run traces and their CSV form.
//!
//! Columns: `t,player,pivot,played,reward,triggered_delay,head,pool_size,empty_rounds`.
//! Vector-valued fields are written as `;`-joined components, floats use the
//! shortest decimal that round-trips, and an empty round's head is `-1`.

use std::io::{Read, Write};

use crate::error::{GoldError, Result};
use crate::game::Profile;
use crate::pool::replay_heads;

pub const TRACE_HEADER: [&str; 9] = [
    "t",
    "player",
    "pivot",
    "played",
    "reward",
    "triggered_delay",
    "head",
    "pool_size",
    "empty_rounds",
];

#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub t: u64,
    pub player: usize,
    pub pivot: Vec<f64>,
    pub played: Vec<f64>,
    pub reward: f64,
    pub triggered_delay: u64,
    pub head: Option<u64>,
    pub pool_size: usize,
    /// Cumulative empty rounds up to and including `t`.
    pub empty_rounds: u64,
}

/// Conservation counters for one player.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct FlowCounts {
    pub generated: u64,
    pub enqueued: u64,
    pub dequeued: u64,
    pub pool_residue: u64,
    pub in_flight: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunTrace {
    pub players: usize,
    /// Sorted by `(t, player)`.
    pub rows: Vec<TraceRow>,
    /// Filled by the simulator; empty for traces read back from CSV.
    pub flows: Vec<FlowCounts>,
}

impl RunTrace {
    pub fn new(players: usize) -> Self {
        RunTrace {
            players,
            rows: Vec::new(),
            flows: Vec::new(),
        }
    }

    pub fn horizon(&self) -> u64 {
        self.rows.last().map_or(0, |r| r.t)
    }

    pub fn player_rows(&self, player: usize) -> impl Iterator<Item = &TraceRow> + '_ {
        self.rows.iter().filter(move |r| r.player == player)
    }

    /// True when every round `1..=horizon` is recorded for every player.
    pub fn is_complete(&self) -> bool {
        let n = self.players as u64;
        self.rows.len() as u64 == self.horizon() * n
            && self
                .rows
                .iter()
                .enumerate()
                .all(|(k, r)| r.t == k as u64 / n + 1 && r.player as u64 == k as u64 % n)
    }

    pub fn require_complete(&self) -> Result<()> {
        if self.is_complete() {
            Ok(())
        } else {
            Err(GoldError::InvalidTrace(
                "trace is thinned or has missing rounds; this analysis needs every round".into(),
            ))
        }
    }

    /// Played joint profiles, one per round.
    pub fn played_profiles(&self) -> Result<Vec<Profile>> {
        self.require_complete()?;
        Ok(self
            .rows
            .chunks(self.players)
            .map(|chunk| chunk.iter().map(|r| r.played.clone()).collect())
            .collect())
    }

    pub fn pivot_profiles(&self) -> Result<Vec<Profile>> {
        self.require_complete()?;
        Ok(self
            .rows
            .chunks(self.players)
            .map(|chunk| chunk.iter().map(|r| r.pivot.clone()).collect())
            .collect())
    }

    pub fn heads(&self, player: usize) -> Vec<Option<u64>> {
        self.player_rows(player).map(|r| r.head).collect()
    }

    pub fn delays(&self, player: usize) -> Vec<u64> {
        self.player_rows(player)
            .map(|r| r.triggered_delay)
            .collect()
    }

    /// Rows strictly increasing in `(t, player)`.
    pub fn check_order(&self) -> Result<()> {
        for w in self.rows.windows(2) {
            if (w[0].t, w[0].player) >= (w[1].t, w[1].player) {
                return Err(GoldError::InvalidTrace(format!(
                    "rows out of order at t = {}, player = {}",
                    w[1].t, w[1].player
                )));
            }
        }
        Ok(())
    }

    /// Re-runs every player's recorded delays through a fresh pool and checks
    /// that the recorded heads and empty-round counts are reproduced.
    pub fn verify_replay(&self) -> Result<()> {
        self.require_complete()?;
        for p in 0..self.players {
            let (heads, _) = replay_heads(&self.delays(p));
            let mut empty = 0;
            for (row, head) in self.player_rows(p).zip(&heads) {
                if head.is_none() {
                    empty += 1;
                }
                if row.head != *head || row.empty_rounds != empty {
                    return Err(GoldError::InvalidTrace(format!(
                        "player {p}, round {}: recorded head {:?} (empty {}), replay gives {:?} (empty {})",
                        row.t, row.head, row.empty_rounds, head, empty
                    )));
                }
            }
        }
        Ok(())
    }

    /// Writes the trace as CSV, keeping rounds with `t % thin == 0` plus the
    /// first and last round.
    pub fn write_csv<W: Write>(&self, out: W, thin: u64) -> Result<()> {
        let thin = thin.max(1);
        let horizon = self.horizon();
        let mut w = csv::Writer::from_writer(out);
        let io = |e: csv::Error| GoldError::InvalidTrace(format!("csv write failed: {e}"));
        w.write_record(TRACE_HEADER).map_err(io)?;
        for r in &self.rows {
            if !(r.t == 1 || r.t == horizon || r.t % thin == 0) {
                continue;
            }
            let head = r.head.map_or("-1".to_string(), |h| h.to_string());
            w.write_record([
                r.t.to_string(),
                r.player.to_string(),
                join_vec(&r.pivot),
                join_vec(&r.played),
                r.reward.to_string(),
                r.triggered_delay.to_string(),
                head,
                r.pool_size.to_string(),
                r.empty_rounds.to_string(),
            ])
            .map_err(io)?;
        }
        w.flush()
            .map_err(|e| GoldError::InvalidTrace(format!("flush failed: {e}")))?;
        Ok(())
    }

    pub fn read_csv<R: Read>(input: R) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(input);
        let bad = |msg: String| GoldError::InvalidTrace(msg);
        let header = rdr
            .headers()
            .map_err(|e| bad(format!("cannot read header: {e}")))?
            .clone();
        if header.iter().collect::<Vec<_>>() != TRACE_HEADER {
            return Err(bad(format!("unexpected header {header:?}")));
        }
        let mut rows = Vec::new();
        for (k, rec) in rdr.records().enumerate() {
            let rec = rec.map_err(|e| bad(format!("row {}: {e}", k + 1)))?;
            let field = |i: usize| rec.get(i).unwrap_or("");
            let num = |i: usize| -> Result<u64> {
                field(i)
                    .parse()
                    .map_err(|e| bad(format!("row {}, {}: {e}", k + 1, TRACE_HEADER[i])))
            };
            let head: i64 = field(6)
                .parse()
                .map_err(|e| bad(format!("row {}, head: {e}", k + 1)))?;
            rows.push(TraceRow {
                t: num(0)?,
                player: num(1)? as usize,
                pivot: split_vec(field(2)).map_err(|e| bad(format!("row {}: {e}", k + 1)))?,
                played: split_vec(field(3)).map_err(|e| bad(format!("row {}: {e}", k + 1)))?,
                reward: field(4)
                    .parse()
                    .map_err(|e| bad(format!("row {}, reward: {e}", k + 1)))?,
                triggered_delay: num(5)?,
                head: if head < 0 { None } else { Some(head as u64) },
                pool_size: num(7)? as usize,
                empty_rounds: num(8)?,
            });
        }
        let players = rows.iter().map(|r| r.player + 1).max().unwrap_or(0);
        let trace = RunTrace {
            players,
            rows,
            flows: Vec::new(),
        };
        trace.check_order()?;
        Ok(trace)
    }
}

fn join_vec(v: &[f64]) -> String {
    v.iter()
        .map(|x| x.to_string())
        .collect::<Vec<_>>()
        .join(";")
}

fn split_vec(s: &str) -> std::result::Result<Vec<f64>, std::num::ParseFloatError> {
    s.split(';').map(str::parse).collect()
}
