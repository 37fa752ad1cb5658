//! Gradient-free online learning with delayed rewards.
//!
//! Each player perturbs an internal pivot, plays the perturbed action, and
//! receives the resulting reward only after an arbitrary delay. Received
//! rewards wait in a pool and are consumed oldest first, one per round, to
//! form a one-point gradient estimate for a projected ascent step.
//!
//! The crate provides the policy ([`agent`]), its building blocks
//! ([`geometry`], [`delay`], [`pool`], [`spsa`]), test games ([`game`]),
//! full-information oracles and metrics ([`metrics`]) and a deterministic
//! experiment harness ([`harness`]).

pub mod agent;
pub mod delay;
pub mod error;
pub mod game;
pub mod geometry;
pub mod harness;
pub mod metrics;
pub mod pool;
pub mod spsa;

pub use agent::{default_tuning, validate_params, GoldAgent, GoldSchedules, Region};
pub use delay::{DelayProcess, DelaySchedule};
pub use error::{GoldError, Result};
pub use game::{Game, KellyAuction, Profile};
pub use geometry::{ActionSet, SetKind};
pub use harness::config::{Experiment, ExperimentConfig};
pub use harness::run::run_experiment;
pub use harness::trace::RunTrace;
pub use pool::{FeedbackItem, RewardPool};
