//! The synchronized multi-agent round loop.

use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::agent::GoldAgent;
use crate::delay::{arrival_round, DelayProcess};
use crate::error::Result;
use crate::game::Profile;
use crate::harness::config::Experiment;
use crate::harness::thread_pool;
use crate::harness::trace::{FlowCounts, RunTrace, TraceRow};
use crate::pool::FeedbackItem;

const SHARED_DELAY_STREAM: u64 = u64::MAX;

/// Independent stream `stream` of the generator seeded by `seed`.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn direction_stream(player: usize) -> u64 {
    2 * player as u64
}

fn delay_stream(player: usize) -> u64 {
    2 * player as u64 + 1
}

/// Runs one seed of an experiment.
///
/// Every round all players perturb and play, payoffs are evaluated at the
/// joint played profile, each reward is stamped with its delay, and then
/// every player enqueues its arrivals, dequeues its head and updates.
pub fn run_experiment(exp: &Experiment, seed: u64) -> Result<RunTrace> {
    let n = exp.players.len();
    let game = exp.game.as_ref();
    let mut agents = Vec::with_capacity(n);
    let mut dir_rngs = Vec::with_capacity(n);
    let mut delays = Vec::with_capacity(n);
    for (i, plan) in exp.players.iter().enumerate() {
        agents.push(GoldAgent::new(
            game.action_set(i).clone(),
            plan.schedules,
            plan.x1.clone(),
        )?);
        dir_rngs.push(stream_rng(seed, direction_stream(i)));
        delays.push(DelayProcess::new(
            plan.delay.clone(),
            stream_rng(seed, delay_stream(i)),
        ));
    }
    let mut shared = exp.shared_delay.then(|| {
        DelayProcess::new(
            exp.players[0].delay.clone(),
            stream_rng(seed, SHARED_DELAY_STREAM),
        )
    });

    let mut in_flight: Vec<BTreeMap<u64, Vec<FeedbackItem>>> = vec![BTreeMap::new(); n];
    let mut trace = RunTrace::new(n);
    trace.rows.reserve(exp.horizon as usize * n);
    let mut generated = vec![0u64; n];

    for t in 1..=exp.horizon {
        let mut plays = Vec::with_capacity(n);
        for (agent, rng) in agents.iter_mut().zip(dir_rngs.iter_mut()) {
            plays.push(agent.play(rng)?);
        }
        let profile: Profile = plays.iter().map(|p| p.played.clone()).collect();
        let shared_d = match shared.as_mut() {
            Some(d) => Some(d.next_delay(t).map_err(|e| e.at_round(t))?),
            None => None,
        };
        for (i, play) in plays.into_iter().enumerate() {
            let reward = game.payoff(i, &profile);
            let d = match shared_d {
                Some(d) => d,
                None => delays[i].next_delay(t).map_err(|e| e.at_round(t))?,
            };
            in_flight[i]
                .entry(arrival_round(t, d))
                .or_default()
                .push(play.stamp(reward));
            generated[i] += 1;

            let arriving = in_flight[i].remove(&t).unwrap_or_default();
            let agent = &mut agents[i];
            let update = agent.absorb(arriving)?;
            trace.rows.push(TraceRow {
                t,
                player: i,
                pivot: play.pivot,
                played: play.played,
                reward,
                triggered_delay: d,
                head: update.head,
                pool_size: update.pool_size,
                empty_rounds: agent.pool_stats().empty_rounds,
            });
        }
    }

    trace.flows = agents
        .iter()
        .zip(&in_flight)
        .zip(&generated)
        .map(|((agent, pending), &generated)| FlowCounts {
            generated,
            enqueued: agent.pool().enqueued(),
            dequeued: agent.pool().dequeued(),
            pool_residue: agent.pool().len() as u64,
            in_flight: pending.values().map(|v| v.len() as u64).sum(),
        })
        .collect();
    Ok(trace)
}

/// Runs several seeds in parallel; results are in the order of `seeds`.
pub fn run_seeds(exp: &Experiment, seeds: &[u64]) -> Result<Vec<RunTrace>> {
    thread_pool()?.install(|| seeds.par_iter().map(|&s| run_experiment(exp, s)).collect())
}
