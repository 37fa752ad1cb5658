//! Delay processes: the reward generated at round `t` reaches the agent at
//! round `t + d_t`.

use std::path::Path;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Geometric};
use serde::{Deserialize, Serialize};

use crate::error::{GoldError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DelaySchedule {
    /// `d_t = delay` for every round.
    Constant { delay: u64 },
    /// `d_t = floor(scale * t^exponent)`.
    Power { scale: f64, exponent: f64 },
    /// Geometric draws with the given mean, capped pathwise at `floor(t^cap_exponent)`.
    Geometric { mean: f64, cap_exponent: f64 },
    /// Replays a fixed sequence; `values[t - 1]` is the delay of round `t`.
    Scripted { values: Vec<u64> },
}

impl DelaySchedule {
    pub fn constant(delay: u64) -> Self {
        DelaySchedule::Constant { delay }
    }

    pub fn power(scale: f64, exponent: f64) -> Self {
        DelaySchedule::Power { scale, exponent }
    }

    pub fn scripted(values: Vec<u64>) -> Self {
        DelaySchedule::Scripted { values }
    }

    /// Loads a scripted schedule from a one-integer-per-line text file.
    /// Blank lines and lines starting with `#` are skipped.
    pub fn load_scripted(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| GoldError::InvalidDelay(format!("cannot read {}: {e}", path.display())))?;
        let mut values = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let v = line.parse::<u64>().map_err(|e| {
                GoldError::InvalidDelay(format!(
                    "{}:{}: expected a nonnegative integer, got {line:?} ({e})",
                    path.display(),
                    lineno + 1
                ))
            })?;
            values.push(v);
        }
        Ok(DelaySchedule::Scripted { values })
    }

    pub fn validate(&self) -> Result<()> {
        let exponent_ok = |a: f64| (0.0..1.0).contains(&a);
        match self {
            DelaySchedule::Constant { .. } | DelaySchedule::Scripted { .. } => Ok(()),
            DelaySchedule::Power { scale, exponent } => {
                if *scale < 0.0 || !scale.is_finite() {
                    return Err(GoldError::InvalidDelay(format!(
                        "power scale must be >= 0, got {scale}"
                    )));
                }
                if !exponent_ok(*exponent) {
                    return Err(GoldError::InvalidDelay(format!(
                        "power exponent must lie in [0, 1), got {exponent}"
                    )));
                }
                Ok(())
            }
            DelaySchedule::Geometric { mean, cap_exponent } => {
                if *mean <= 0.0 || !mean.is_finite() {
                    return Err(GoldError::InvalidDelay(format!(
                        "geometric mean must be > 0, got {mean}"
                    )));
                }
                if !exponent_ok(*cap_exponent) {
                    return Err(GoldError::InvalidDelay(format!(
                        "cap exponent must lie in [0, 1), got {cap_exponent}"
                    )));
                }
                Ok(())
            }
        }
    }

    /// Growth exponent `alpha` this schedule certifies (`d_t = O(t^alpha)`).
    pub fn certified_alpha(&self) -> f64 {
        match self {
            DelaySchedule::Constant { .. } | DelaySchedule::Scripted { .. } => 0.0,
            DelaySchedule::Power { scale, exponent } => {
                if *scale == 0.0 {
                    0.0
                } else {
                    *exponent
                }
            }
            DelaySchedule::Geometric { cap_exponent, .. } => *cap_exponent,
        }
    }

    /// Delay triggered by the reward of round `t >= 1`.
    ///
    /// Constant, power and scripted kinds never touch `rng`.
    pub fn delay_at<R: Rng + ?Sized>(&self, t: u64, rng: &mut R) -> Result<u64> {
        debug_assert!(t >= 1);
        match self {
            DelaySchedule::Constant { delay } => Ok(*delay),
            DelaySchedule::Power { scale, exponent } => {
                Ok((scale * (t as f64).powf(*exponent)).floor() as u64)
            }
            DelaySchedule::Geometric { mean, cap_exponent } => {
                let dist = Geometric::new(1.0 / (1.0 + mean))
                    .map_err(|e| GoldError::InvalidDelay(e.to_string()))?;
                let cap = (t as f64).powf(*cap_exponent).floor() as u64;
                Ok(dist.sample(rng).min(cap))
            }
            DelaySchedule::Scripted { values } => values
                .get((t - 1) as usize)
                .copied()
                .ok_or(GoldError::ScheduleExhausted(t)),
        }
    }
}

/// Round at which the reward of round `t` with delay `d` is delivered.
pub fn arrival_round(t: u64, d: u64) -> u64 {
    t + d
}

/// A schedule bound to its own random stream; one per delay source per run.
#[derive(Debug, Clone)]
pub struct DelayProcess {
    schedule: DelaySchedule,
    rng: ChaCha8Rng,
}

impl DelayProcess {
    pub fn new(schedule: DelaySchedule, rng: ChaCha8Rng) -> Self {
        DelayProcess { schedule, rng }
    }

    pub fn schedule(&self) -> &DelaySchedule {
        &self.schedule
    }

    pub fn next_delay(&mut self, t: u64) -> Result<u64> {
        self.schedule.delay_at(t, &mut self.rng)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    fn rng() -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(11)
    }

    #[test]
    fn examples() {
        let mut r = rng();
        assert_eq!(DelaySchedule::constant(0).delay_at(5, &mut r).unwrap(), 0);
        assert_eq!(
            DelaySchedule::power(1.0, 0.5).delay_at(9, &mut r).unwrap(),
            3
        );
        let s = DelaySchedule::scripted(vec![3, 0, 2, 0, 1]);
        assert_eq!(s.delay_at(1, &mut r).unwrap(), 3);
    }

    #[test]
    fn arrival_rounds() {
        assert_eq!(arrival_round(2, 3), 5);
        assert_eq!(arrival_round(1, 0), 1);
        assert_eq!(arrival_round(4, 2), 6);
    }

    #[test]
    fn scripted_reproduces_input_then_exhausts() {
        let values = vec![3, 0, 2, 0, 1];
        let s = DelaySchedule::scripted(values.clone());
        let mut r = rng();
        let got: Vec<u64> = (1..=5).map(|t| s.delay_at(t, &mut r).unwrap()).collect();
        assert_eq!(got, values);
        assert_eq!(s.delay_at(6, &mut r), Err(GoldError::ScheduleExhausted(6)));
    }

    #[test]
    fn power_growth_is_bounded() {
        for (k, a) in [(1.0, 0.5), (2.5, 0.3), (0.7, 0.9), (0.0, 0.4)] {
            let s = DelaySchedule::power(k, a);
            let mut r = rng();
            for t in 1..5000u64 {
                let d = s.delay_at(t, &mut r).unwrap() as f64;
                assert!(d / (t as f64).powf(a) <= k + 1.0);
            }
        }
    }

    #[test]
    fn geometric_respects_cap_and_is_deterministic() {
        let s = DelaySchedule::Geometric {
            mean: 20.0,
            cap_exponent: 0.5,
        };
        let draw = |seed| {
            let mut p = DelayProcess::new(s.clone(), ChaCha8Rng::seed_from_u64(seed));
            (1..=2000u64)
                .map(|t| p.next_delay(t).unwrap())
                .collect::<Vec<_>>()
        };
        let a = draw(1);
        assert_eq!(a, draw(1));
        assert_ne!(a, draw(2));
        for (i, d) in a.iter().enumerate() {
            let t = (i + 1) as f64;
            assert!(*d <= t.sqrt().floor() as u64);
        }
    }

    #[test]
    fn validation_rejects_linear_growth() {
        assert!(DelaySchedule::power(1.0, 1.0).validate().is_err());
        assert!(DelaySchedule::Geometric {
            mean: 1.0,
            cap_exponent: 1.2
        }
        .validate()
        .is_err());
        assert!(DelaySchedule::power(-1.0, 0.5).validate().is_err());
        assert!(DelaySchedule::power(1.0, 0.5).validate().is_ok());
    }

    #[test]
    fn load_scripted_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("delays.txt");
        std::fs::write(&path, "3\n0\n\n# comment\n2\n0\n1\n").unwrap();
        let s = DelaySchedule::load_scripted(&path).unwrap();
        assert_eq!(s, DelaySchedule::scripted(vec![3, 0, 2, 0, 1]));
        std::fs::write(&path, "3\n-1\n").unwrap();
        assert!(DelaySchedule::load_scripted(&path).is_err());
    }
}
