//! Sensor outage injection between a sensor's controller and its transport.

use crate::wire::SteeringCommand;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

const TIME_EPS: f64 = 1e-9;

pub const DEFAULT_PERIOD: f64 = 3.0;
pub const DEFAULT_INTERVAL: f64 = 0.4;

fn default_period() -> f64 {
    DEFAULT_PERIOD
}

fn default_interval() -> f64 {
    DEFAULT_INTERVAL
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum OutageModel {
    #[default]
    None,
    Periodic {
        #[serde(default = "default_period")]
        period: f64,
        duration: f64,
    },
    Probabilistic {
        #[serde(default = "default_interval")]
        interval: f64,
        threshold: u32,
    },
}

impl OutageModel {
    pub fn validate(&self) -> Result<(), String> {
        match *self {
            OutageModel::None => Ok(()),
            OutageModel::Periodic { period, duration } => {
                if !(period.is_finite() && period > 0.0) {
                    return Err(format!("period must be positive, got {period}"));
                }
                if !(duration.is_finite() && duration >= 0.0 && duration <= period) {
                    return Err(format!("duration must be in [0, period], got {duration}"));
                }
                Ok(())
            }
            OutageModel::Probabilistic { interval, threshold } => {
                if !(interval.is_finite() && interval > 0.0) {
                    return Err(format!("interval must be positive, got {interval}"));
                }
                if threshold > 100 {
                    return Err(format!("threshold must be in [0, 100], got {threshold}"));
                }
                Ok(())
            }
        }
    }

    /// Length of one phase cycle, used to draw per-sensor offsets.
    pub fn cycle(&self) -> Option<f64> {
        match *self {
            OutageModel::None => None,
            OutageModel::Periodic { period, .. } => Some(period),
            OutageModel::Probabilistic { interval, .. } => Some(interval),
        }
    }
}

/// What a sensor transmits while an outage is active.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutageReport {
    /// Every frame in the window is replaced by a zero-report.
    #[default]
    ZeroReports,
    /// The sensor stops processing and sending for the window, then sends a
    /// single zero-report as it resumes. The receiver keeps the last command
    /// it had until then.
    Silent,
}

/// Whether a periodic outage covers `now`: windows `[phase + k·period,
/// phase + k·period + duration)` for every integer k.
pub fn periodic_active(period: f64, duration: f64, phase: f64, now: f64) -> bool {
    let mut r = (now - phase).rem_euclid(period);
    if period - r < TIME_EPS {
        r = 0.0;
    }
    r < duration - TIME_EPS
}

/// One uniform draw in 1..=100; the interval is out iff the draw is strictly
/// below the threshold.
pub fn draw_outage(rng: &mut ChaCha8Rng, threshold: u32) -> bool {
    let v: u32 = rng.gen_range(1..=100);
    v < threshold
}

/// Substitutes a zero-report while an outage is active.
pub fn gate(cmd: SteeringCommand, active: bool) -> SteeringCommand {
    if active {
        SteeringCommand::ZERO
    } else {
        cmd
    }
}

/// Stateful per-sensor outage schedule. Queries must be made with
/// non-decreasing `now`; probabilistic intervals are drawn in order, so the
/// schedule depends only on the seed, not on query times.
#[derive(Debug, Clone)]
pub struct OutageSchedule {
    model: OutageModel,
    phase: f64,
    rng: ChaCha8Rng,
    next_interval: u64,
    current: bool,
    windows: Vec<(f64, f64)>,
}

impl OutageSchedule {
    pub fn new(model: OutageModel, phase: f64, rng: ChaCha8Rng) -> Self {
        OutageSchedule {
            model,
            phase,
            rng,
            next_interval: 0,
            current: false,
            windows: Vec::new(),
        }
    }

    pub fn model(&self) -> &OutageModel {
        &self.model
    }

    pub fn phase(&self) -> f64 {
        self.phase
    }

    pub fn active(&mut self, now: f64) -> bool {
        match self.model {
            OutageModel::None => false,
            OutageModel::Periodic { period, duration } => periodic_active(period, duration, self.phase, now),
            OutageModel::Probabilistic { interval, threshold } => {
                let t = now - self.phase;
                if t < -TIME_EPS {
                    return false;
                }
                let k = (t / interval + TIME_EPS).floor().max(0.0) as u64;
                while self.next_interval <= k {
                    let idx = self.next_interval;
                    self.current = draw_outage(&mut self.rng, threshold);
                    if self.current {
                        let start = self.phase + idx as f64 * interval;
                        let end = start + interval;
                        match self.windows.last_mut() {
                            Some(last) if (last.1 - start).abs() < TIME_EPS => last.1 = end,
                            _ => self.windows.push((start, end)),
                        }
                    }
                    self.next_interval += 1;
                }
                self.current
            }
        }
    }

    /// Outage windows `(start, end)` that begin before `until`.
    pub fn windows(&self, until: f64) -> Vec<(f64, f64)> {
        match self.model {
            OutageModel::None => Vec::new(),
            // zero-length windows are kept: they mark the scheduled disable
            // points, so a 0 s sweep point still has post-outage samples
            OutageModel::Periodic { period, duration } => {
                let mut out = Vec::new();
                let mut k = (-self.phase / period).floor() as i64;
                loop {
                    let start = self.phase + k as f64 * period;
                    if start >= until {
                        break;
                    }
                    let end = start + duration;
                    if end > 0.0 || (duration == 0.0 && start >= 0.0) {
                        out.push((start.max(0.0), end));
                    }
                    k += 1;
                }
                out
            }
            OutageModel::Probabilistic { .. } => self.windows.iter().copied().filter(|w| w.0 < until).collect(),
        }
    }

    /// End times of outages that finished before `until`.
    pub fn end_times(&self, until: f64) -> Vec<f64> {
        self.windows(until)
            .into_iter()
            .map(|w| w.1)
            .filter(|&e| e <= until)
            .collect()
    }
}
