//! Experiment configuration: a TOML file describing the game, the horizon,
//! the seeds, the schedules and delays of every player, and the outputs.
//!
//! ```toml
//! horizon = 100000
//! seeds = [1, 2, 3]
//! shared_delay = true
//!
//! [game]
//! kind = "kelly"
//! gains = [2.0, 2.0]
//! entry_barrier = 1.0
//! budgets = [1.0, 1.0]
//!
//! [delay]
//! kind = "power"
//! scale = 1.0
//! exponent = 0.2
//!
//! [schedules]
//! b = 0.2
//! c = 0.85
//!
//! [[players]]
//! x1 = [0.05]
//!
//! [[players]]
//! x1 = [0.05]
//!
//! [output]
//! trace_path = "trace.csv"
//! thin = 1
//! ```
//!
//! Unknown keys are rejected. Relative paths resolve against the directory
//! holding the config file.

use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::agent::{validate_params, GoldSchedules, ParamVerdict, Region};
use crate::delay::DelaySchedule;
use crate::error::{GoldError, Result};
use crate::game::{AntiMonotoneGame, Game, KellyAuction, LinearGame, QuadraticGame};
use crate::geometry::{ActionSet, SetKind, BOUNDARY_TOL};

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub horizon: u64,
    pub seeds: Vec<u64>,
    pub game: GameConfig,
    #[serde(default)]
    pub delay: DelayConfig,
    /// Draw one delay per round and apply it to every player.
    #[serde(default)]
    pub shared_delay: bool,
    #[serde(default)]
    pub schedules: SchedulesConfig,
    #[serde(default)]
    pub players: Vec<PlayerConfig>,
    #[serde(default)]
    pub output: OutputConfig,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum GameConfig {
    Kelly {
        gains: Vec<f64>,
        entry_barrier: f64,
        budgets: Vec<f64>,
        #[serde(default = "one")]
        resources: usize,
    },
    /// `u^i = -|| x^i - target^i ||^2`.
    Quadratic {
        sets: Vec<SetKind>,
        targets: Vec<Vec<f64>>,
    },
    /// `u^i = <slope^i, x^i> + offset`.
    Linear {
        sets: Vec<SetKind>,
        slopes: Vec<Vec<f64>>,
        #[serde(default)]
        offset: f64,
    },
    AntiMonotone {
        sets: Vec<SetKind>,
    },
}

fn one() -> usize {
    1
}

impl GameConfig {
    pub fn build(&self) -> Result<Box<dyn Game>> {
        let sets = |kinds: &[SetKind]| -> Result<Vec<ActionSet>> {
            kinds.iter().cloned().map(ActionSet::new).collect()
        };
        Ok(match self {
            GameConfig::Kelly {
                gains,
                entry_barrier,
                budgets,
                resources,
            } => Box::new(KellyAuction::with_resources(
                gains.clone(),
                *entry_barrier,
                budgets.clone(),
                *resources,
            )?),
            GameConfig::Quadratic { sets: s, targets } => {
                Box::new(QuadraticGame::new(sets(s)?, targets.clone())?)
            }
            GameConfig::Linear {
                sets: s,
                slopes,
                offset,
            } => Box::new(LinearGame::new(sets(s)?, slopes.clone(), *offset)?),
            GameConfig::AntiMonotone { sets: s } => Box::new(AntiMonotoneGame::new(sets(s)?)?),
        })
    }
}

/// A delay schedule, or a scripted schedule read from a file.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DelayConfig {
    Constant {
        delay: u64,
    },
    Power {
        scale: f64,
        exponent: f64,
    },
    Geometric {
        mean: f64,
        cap_exponent: f64,
    },
    Scripted {
        values: Vec<u64>,
    },
    /// One nonnegative integer per line.
    ScriptedFile {
        path: PathBuf,
    },
}

impl Default for DelayConfig {
    fn default() -> Self {
        DelayConfig::Constant { delay: 0 }
    }
}

impl DelayConfig {
    pub fn resolve(&self, base: &Path) -> Result<DelaySchedule> {
        let schedule = match self {
            DelayConfig::Constant { delay } => DelaySchedule::Constant { delay: *delay },
            DelayConfig::Power { scale, exponent } => DelaySchedule::Power {
                scale: *scale,
                exponent: *exponent,
            },
            DelayConfig::Geometric { mean, cap_exponent } => DelaySchedule::Geometric {
                mean: *mean,
                cap_exponent: *cap_exponent,
            },
            DelayConfig::Scripted { values } => DelaySchedule::Scripted {
                values: values.clone(),
            },
            DelayConfig::ScriptedFile { path } => DelaySchedule::load_scripted(&base.join(path))?,
        };
        schedule.validate()?;
        Ok(schedule)
    }
}

/// Schedule parameters. Missing exponents take the default tuning for
/// `alpha`; a missing `alpha` takes the delay's certified exponent; a missing
/// `gamma0` is the set diameter and a missing `delta0` half the safety radius.
#[derive(Debug, Clone, Copy, PartialEq, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SchedulesConfig {
    pub b: Option<f64>,
    pub c: Option<f64>,
    pub alpha: Option<f64>,
    pub gamma0: Option<f64>,
    pub delta0: Option<f64>,
}

impl SchedulesConfig {
    /// Fields set here win over `base`.
    pub fn over(&self, base: &SchedulesConfig) -> SchedulesConfig {
        SchedulesConfig {
            b: self.b.or(base.b),
            c: self.c.or(base.c),
            alpha: self.alpha.or(base.alpha),
            gamma0: self.gamma0.or(base.gamma0),
            delta0: self.delta0.or(base.delta0),
        }
    }

    pub fn resolve(&self, set: &ActionSet, delay: &DelaySchedule) -> GoldSchedules {
        let alpha = self.alpha.unwrap_or_else(|| delay.certified_alpha());
        let (b, c) = crate::agent::default_tuning(alpha);
        GoldSchedules {
            gamma0: self.gamma0.unwrap_or_else(|| set.diameter()),
            c: self.c.unwrap_or(c),
            delta0: self.delta0.unwrap_or_else(|| 0.5 * set.safety_radius()),
            b: self.b.unwrap_or(b),
            alpha,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlayerConfig {
    pub x1: Option<Vec<f64>>,
    #[serde(default)]
    pub schedules: SchedulesConfig,
    pub delay: Option<DelayConfig>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    pub trace_path: Option<PathBuf>,
    pub metrics_path: Option<PathBuf>,
    #[serde(default = "one_u64")]
    pub thin: u64,
}

fn one_u64() -> u64 {
    1
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            trace_path: None,
            metrics_path: None,
            thin: 1,
        }
    }
}

/// Fully resolved settings of one player.
#[derive(Debug, Clone, PartialEq)]
pub struct PlayerPlan {
    pub schedules: GoldSchedules,
    pub delay: DelaySchedule,
    pub x1: Option<Vec<f64>>,
    pub verdict: ParamVerdict,
}

/// A validated experiment, ready to run.
pub struct Experiment {
    pub game: Box<dyn Game>,
    pub horizon: u64,
    pub seeds: Vec<u64>,
    pub shared_delay: bool,
    pub players: Vec<PlayerPlan>,
    pub output: OutputConfig,
}

impl std::fmt::Debug for Experiment {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Experiment")
            .field("game", &self.game.name())
            .field("horizon", &self.horizon)
            .field("seeds", &self.seeds)
            .field("shared_delay", &self.shared_delay)
            .field("players", &self.players)
            .field("output", &self.output)
            .finish()
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| GoldError::InvalidParams(format!("config: {e}")))
    }

    /// Reads a config file; relative paths inside it are rebased onto its directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            GoldError::InvalidParams(format!("cannot read {}: {e}", path.display()))
        })?;
        let mut cfg = Self::from_toml(&text)?;
        let base = path.parent().unwrap_or(Path::new(""));
        cfg.rebase(base);
        Ok(cfg)
    }

    fn rebase(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        if let DelayConfig::ScriptedFile { path } = &mut self.delay {
            fix(path);
        }
        for player in &mut self.players {
            if let Some(DelayConfig::ScriptedFile { path }) = &mut player.delay {
                fix(path);
            }
        }
        if let Some(p) = &mut self.output.trace_path {
            fix(p);
        }
        if let Some(p) = &mut self.output.metrics_path {
            fix(p);
        }
    }

    /// Builds the game and every player's plan, rejecting invalid settings
    /// before anything runs.
    pub fn validate(&self) -> Result<Experiment> {
        if self.horizon == 0 {
            return Err(GoldError::InvalidParams("horizon must be >= 1".into()));
        }
        if self.seeds.is_empty() {
            return Err(GoldError::InvalidParams(
                "at least one seed is required".into(),
            ));
        }
        let game = self.game.build()?;
        let n = game.players();
        if !self.players.is_empty() && self.players.len() != n {
            return Err(GoldError::InvalidParams(format!(
                "{} [[players]] entries for a {n}-player game",
                self.players.len()
            )));
        }
        let base = Path::new("");
        let shared = self.delay.resolve(base)?;
        let default_player = PlayerConfig::default();
        let mut players = Vec::with_capacity(n);
        for i in 0..n {
            let pc = self.players.get(i).unwrap_or(&default_player);
            if self.shared_delay && pc.delay.is_some() {
                return Err(GoldError::InvalidParams(format!(
                    "player {i}: per-player delay conflicts with shared_delay"
                )));
            }
            let delay = match &pc.delay {
                Some(d) => d.resolve(base)?,
                None => shared.clone(),
            };
            let set = game.action_set(i);
            let schedules = pc.schedules.over(&self.schedules).resolve(set, &delay);
            let plan = plan_player(i, set, schedules, delay, pc.x1.clone(), self.horizon)?;
            players.push(plan);
        }
        Ok(Experiment {
            game,
            horizon: self.horizon,
            seeds: self.seeds.clone(),
            shared_delay: self.shared_delay,
            players,
            output: self.output.clone(),
        })
    }
}

fn plan_player(
    i: usize,
    set: &ActionSet,
    schedules: GoldSchedules,
    delay: DelaySchedule,
    x1: Option<Vec<f64>>,
    horizon: u64,
) -> Result<PlayerPlan> {
    let ctx = |e: GoldError| GoldError::InvalidParams(format!("player {i}: {e}"));
    schedules.validate_for(set).map_err(ctx)?;
    let verdict = validate_params(schedules.b, schedules.c, schedules.alpha);
    if verdict.region == Region::Invalid {
        let broken: Vec<String> = verdict.violated.iter().map(|v| v.to_string()).collect();
        return Err(ctx(GoldError::InvalidParams(format!(
            "(b, c) = ({}, {}) is INVALID for alpha = {}: {}",
            schedules.b,
            schedules.c,
            schedules.alpha,
            broken.join(", ")
        ))));
    }
    let certified = delay.certified_alpha();
    if schedules.alpha + 1e-12 < certified {
        return Err(ctx(GoldError::InvalidParams(format!(
            "schedules assume alpha = {} but the delay grows like t^{certified}",
            schedules.alpha
        ))));
    }
    if let DelaySchedule::Scripted { values } = &delay {
        if (values.len() as u64) < horizon {
            return Err(ctx(GoldError::ScheduleExhausted(values.len() as u64 + 1)));
        }
    }
    if let Some(x) = &x1 {
        if x.len() != set.dim() {
            return Err(ctx(GoldError::DimensionMismatch {
                expected: set.dim(),
                got: x.len(),
            }));
        }
        if !set.contains(x, BOUNDARY_TOL)? {
            return Err(ctx(GoldError::InvalidParams(format!(
                "x1 = {x:?} lies outside the action set"
            ))));
        }
    }
    Ok(PlayerPlan {
        schedules,
        delay,
        x1,
        verdict,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const KELLY: &str = r#"
horizon = 1000
seeds = [1, 2]
shared_delay = true

[game]
kind = "kelly"
gains = [2.0, 2.0]
entry_barrier = 1.0
budgets = [1.0, 1.0]

[delay]
kind = "power"
scale = 1.0
exponent = 0.2

[schedules]
b = 0.2
c = 0.85
"#;

    #[test]
    fn parses_and_resolves_defaults() {
        let exp = ExperimentConfig::from_toml(KELLY)
            .unwrap()
            .validate()
            .unwrap();
        assert_eq!(exp.players.len(), 2);
        let p = &exp.players[0];
        assert_eq!(p.schedules.alpha, 0.2);
        assert_eq!(p.schedules.gamma0, 1.0);
        assert!((p.schedules.delta0 - 0.2475).abs() < 1e-15);
        assert_eq!(p.verdict.region, Region::NashStrict);
        assert_eq!(exp.output.thin, 1);
    }

    #[test]
    fn default_tuning_follows_the_delay() {
        let text = KELLY.replace("b = 0.2\nc = 0.85\n", "");
        let exp = ExperimentConfig::from_toml(&text)
            .unwrap()
            .validate()
            .unwrap();
        assert_eq!(exp.players[0].verdict.region, Region::LogBoundary);
    }

    #[test]
    fn rejects_unknown_keys() {
        let text = KELLY.replace("horizon = 1000", "horizon = 1000\nhorizn = 3");
        assert!(ExperimentConfig::from_toml(&text).is_err());
        let text = KELLY.replace("exponent = 0.2", "exponent = 0.2\nexpo = 1");
        assert!(ExperimentConfig::from_toml(&text).is_err());
    }

    #[test]
    fn rejects_invalid_region() {
        let text = KELLY.replace("b = 0.2\nc = 0.85", "b = 0.5\nc = 0.6");
        let err = ExperimentConfig::from_toml(&text)
            .unwrap()
            .validate()
            .unwrap_err();
        assert!(err.to_string().contains("INVALID"), "{err}");
    }

    #[test]
    fn rejects_oversized_radius() {
        let text = KELLY.replace("c = 0.85", "c = 0.85\ndelta0 = 0.6");
        assert!(ExperimentConfig::from_toml(&text)
            .unwrap()
            .validate()
            .is_err());
    }

    #[test]
    fn rejects_zero_entry_barrier() {
        let text = KELLY.replace("entry_barrier = 1.0", "entry_barrier = 0.0");
        assert!(ExperimentConfig::from_toml(&text)
            .unwrap()
            .validate()
            .is_err());
    }

    #[test]
    fn rejects_alpha_below_delay_growth() {
        let text = KELLY.replace("c = 0.85", "c = 0.85\nalpha = 0.0");
        assert!(ExperimentConfig::from_toml(&text)
            .unwrap()
            .validate()
            .is_err());
    }

    #[test]
    fn rejects_short_script() {
        let text = r#"
horizon = 6
seeds = [0]
[game]
kind = "quadratic"
sets = [{ kind = "box", lo = [0.0], hi = [1.0] }]
targets = [[0.5]]
[delay]
kind = "scripted"
values = [3, 0, 2, 0, 1]
"#;
        let err = ExperimentConfig::from_toml(text)
            .unwrap()
            .validate()
            .unwrap_err();
        assert!(err.to_string().contains("exhausted"), "{err}");
    }

    #[test]
    fn player_overrides() {
        let text = format!(
            "{KELLY}\n[[players]]\nx1 = [0.05]\n[players.schedules]\ngamma0 = 0.1\n\n[[players]]\nx1 = [0.9]\n"
        );
        let exp = ExperimentConfig::from_toml(&text)
            .unwrap()
            .validate()
            .unwrap();
        assert_eq!(exp.players[0].schedules.gamma0, 0.1);
        assert_eq!(exp.players[0].schedules.b, 0.2);
        assert_eq!(exp.players[1].schedules.gamma0, 1.0);
        assert_eq!(exp.players[1].x1, Some(vec![0.9]));

        let bad = format!("{KELLY}\n[[players]]\nx1 = [1.5]\n\n[[players]]\n");
        assert!(ExperimentConfig::from_toml(&bad)
            .unwrap()
            .validate()
            .is_err());
        let short = format!("{KELLY}\n[[players]]\nx1 = [0.5]\n");
        assert!(ExperimentConfig::from_toml(&short)
            .unwrap()
            .validate()
            .is_err());
    }

    #[test]
    fn scripted_file_resolves_relative_to_config() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("delays.txt"), "# figure\n3\n0\n2\n0\n1\n").unwrap();
        let cfg_path = dir.path().join("exp.toml");
        std::fs::write(
            &cfg_path,
            r#"
horizon = 5
seeds = [0]
[game]
kind = "quadratic"
sets = [{ kind = "box", lo = [0.0], hi = [1.0] }]
targets = [[0.5]]
[delay]
kind = "scripted_file"
path = "delays.txt"
"#,
        )
        .unwrap();
        let exp = ExperimentConfig::load(&cfg_path)
            .unwrap()
            .validate()
            .unwrap();
        assert_eq!(
            exp.players[0].delay,
            DelaySchedule::scripted(vec![3, 0, 2, 0, 1])
        );
    }
}
