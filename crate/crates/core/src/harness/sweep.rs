//! Parameter sweeps and gnuplot-ready tables.

use super::runner::{derive_seed, run_with_seed, RunResult};
use super::scenario::Scenario;
use crate::faults::{OutageModel, DEFAULT_INTERVAL, DEFAULT_PERIOD};
use crate::metrics::RunSummary;
use serde::Serialize;
use std::collections::BTreeMap;
use std::fmt::{self, Write as _};
use std::io;
use std::path::Path;
use std::str::FromStr;
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    Kp,
    Ki,
    Kd,
    OutageDuration,
    OutageThreshold,
}

impl SweepAxis {
    pub fn name(&self) -> &'static str {
        match self {
            SweepAxis::Kp => "kp",
            SweepAxis::Ki => "ki",
            SweepAxis::Kd => "kd",
            SweepAxis::OutageDuration => "outage_duration",
            SweepAxis::OutageThreshold => "outage_threshold",
        }
    }

    /// Applies `value` to every sensor of the scenario.
    pub fn apply(&self, scenario: &Scenario, value: f64) -> Scenario {
        let mut s = scenario.clone();
        for sensor in &mut s.sensors {
            match self {
                SweepAxis::Kp => sensor.gains.kp = value,
                SweepAxis::Ki => sensor.gains.ki = value,
                SweepAxis::Kd => sensor.gains.kd = value,
                SweepAxis::OutageDuration => {
                    let period = match sensor.outage {
                        OutageModel::Periodic { period, .. } => period,
                        _ => DEFAULT_PERIOD,
                    };
                    sensor.outage = OutageModel::Periodic {
                        period,
                        duration: value,
                    };
                }
                SweepAxis::OutageThreshold => {
                    let interval = match sensor.outage {
                        OutageModel::Probabilistic { interval, .. } => interval,
                        _ => DEFAULT_INTERVAL,
                    };
                    sensor.outage = OutageModel::Probabilistic {
                        interval,
                        threshold: value.round() as u32,
                    };
                }
            }
        }
        s
    }
}

impl fmt::Display for SweepAxis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SweepAxis {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        [
            SweepAxis::Kp,
            SweepAxis::Ki,
            SweepAxis::Kd,
            SweepAxis::OutageDuration,
            SweepAxis::OutageThreshold,
        ]
        .into_iter()
        .find(|a| a.name() == s)
        .ok_or_else(|| format!("unknown sweep axis {s:?}"))
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum SweepError {
    #[error("sweep needs at least one value")]
    NoValues,
    #[error("sweep value {0} is not finite")]
    NonFinite(f64),
    #[error("repetitions must be at least 1")]
    NoRepetitions,
    #[error("invalid scenario for value {value}: {reason}")]
    Scenario { value: f64, reason: String },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub axis: SweepAxis,
    pub values: Vec<f64>,
    pub repetitions: usize,
}

impl SweepSpec {
    pub fn validate(&self) -> Result<(), SweepError> {
        if self.values.is_empty() {
            return Err(SweepError::NoValues);
        }
        if let Some(&v) = self.values.iter().find(|v| !v.is_finite()) {
            return Err(SweepError::NonFinite(v));
        }
        if self.repetitions == 0 {
            return Err(SweepError::NoRepetitions);
        }
        Ok(())
    }
}

/// Seed of one sweep run; independent of how many values or repetitions the
/// sweep has.
pub fn sweep_seed(seed: u64, value: f64, repetition: usize) -> u64 {
    derive_seed(derive_seed(seed, "sweep", value.to_bits()), "rep", repetition as u64)
}

/// Aggregate of one metric over the repetitions of a sweep point. Samples
/// of all runs are pooled, so a run with more samples (more outage windows,
/// no crash) weighs more.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MetricCell {
    /// Mean |x| over all pooled samples.
    pub mean: f64,
    /// Population standard deviation of |x| over all pooled samples.
    pub std: f64,
    /// Standard error of the per-run means across repetitions; the single
    /// run's own standard error when there is one run.
    pub sem: f64,
    pub runs: usize,
    pub samples: usize,
}

impl MetricCell {
    pub fn from_summaries(s: &[RunSummary]) -> Self {
        let total: usize = s.iter().map(|x| x.count).sum();
        if total == 0 {
            return MetricCell {
                mean: f64::NAN,
                std: f64::NAN,
                sem: f64::NAN,
                runs: s.len(),
                samples: 0,
            };
        }
        let n = total as f64;
        let mean = s.iter().map(|x| x.count as f64 * x.mean_abs).sum::<f64>() / n;
        let second = s
            .iter()
            .map(|x| x.count as f64 * (x.std_abs.powi(2) + x.mean_abs.powi(2)))
            .sum::<f64>()
            / n;
        let std = (second - mean * mean).max(0.0).sqrt();
        let sem = if s.len() > 1 {
            let k = s.len() as f64;
            let m = s.iter().map(|x| x.mean_abs).sum::<f64>() / k;
            let var = s.iter().map(|x| (x.mean_abs - m).powi(2)).sum::<f64>() / (k - 1.0);
            (var / k).sqrt()
        } else {
            s[0].sem
        };
        MetricCell {
            mean,
            std,
            sem,
            runs: s.len(),
            samples: total,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub value: f64,
    pub crash_rate: f64,
    pub crash_times: Vec<Option<f64>>,
    pub metrics: BTreeMap<String, MetricCell>,
}

impl SweepRow {
    pub fn survived(&self) -> bool {
        self.crash_times.iter().all(Option::is_none)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepTable {
    pub axis: SweepAxis,
    pub rows: Vec<SweepRow>,
}

impl SweepTable {
    pub fn metric_names(&self) -> Vec<String> {
        let mut names: Vec<String> = self.rows.iter().flat_map(|r| r.metrics.keys().cloned()).collect();
        names.sort();
        names.dedup();
        names
    }

    /// Largest value such that it and every smaller value survived all runs.
    pub fn survives_up_to(&self) -> Option<f64> {
        let mut rows: Vec<&SweepRow> = self.rows.iter().collect();
        rows.sort_by(|a, b| a.value.total_cmp(&b.value));
        let mut best = None;
        for r in rows {
            if !r.survived() {
                break;
            }
            best = Some(r.value);
        }
        best
    }
}

/// Named summaries of one run, keyed by metric.
pub fn run_metrics(r: &RunResult) -> BTreeMap<String, RunSummary> {
    let rep = r.report();
    let mut m = BTreeMap::new();
    let mut put = |k: String, v: Option<RunSummary>| {
        if let Some(v) = v {
            m.insert(k, v);
        }
    };
    put("deviation".into(), rep.deviation);
    put("correction".into(), rep.correction);
    put("post_outage_deviation".into(), rep.post_outage_deviation);
    put("post_outage_correction".into(), rep.post_outage_correction);
    for (k, v) in rep.position_error {
        put(format!("position_error_{k}"), v);
    }
    m
}

/// Runs every (value, repetition) pair. `on_run` sees each result, e.g. to
/// write its CSVs.
pub fn sweep_with(
    scenario: &Scenario,
    spec: &SweepSpec,
    mut on_run: impl FnMut(f64, usize, &RunResult),
) -> Result<SweepTable, SweepError> {
    spec.validate()?;
    let mut rows = Vec::with_capacity(spec.values.len());
    for &value in &spec.values {
        let s = spec.axis.apply(scenario, value);
        s.validate().map_err(|e| SweepError::Scenario {
            value,
            reason: e.to_string(),
        })?;
        let mut per_metric: BTreeMap<String, Vec<RunSummary>> = BTreeMap::new();
        let mut crash_times = Vec::with_capacity(spec.repetitions);
        for rep in 0..spec.repetitions {
            let result = run_with_seed(&s, sweep_seed(scenario.seed, value, rep));
            log::info!(
                "{}={value} rep {rep}: {}",
                spec.axis,
                result
                    .crash_time
                    .map_or("completed".to_string(), |t| format!("crashed at {t:.2} s"))
            );
            for (k, v) in run_metrics(&result) {
                per_metric.entry(k).or_default().push(v);
            }
            crash_times.push(result.crash_time);
            on_run(value, rep, &result);
        }
        let crashes = crash_times.iter().filter(|c| c.is_some()).count();
        rows.push(SweepRow {
            value,
            crash_rate: crashes as f64 / spec.repetitions as f64,
            crash_times,
            metrics: per_metric
                .into_iter()
                .map(|(k, v)| (k, MetricCell::from_summaries(&v)))
                .collect(),
        });
    }
    Ok(SweepTable { axis: spec.axis, rows })
}

pub fn sweep(scenario: &Scenario, spec: &SweepSpec) -> Result<SweepTable, SweepError> {
    sweep_with(scenario, spec, |_, _, _| {})
}

/// One plot-file row: value, mean, std, crash rate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlotRow {
    pub value: f64,
    pub mean: f64,
    pub std: f64,
    pub crash_rate: f64,
}

pub fn plot_rows(table: &SweepTable, metric: &str) -> Vec<PlotRow> {
    table
        .rows
        .iter()
        .map(|r| {
            let cell = r.metrics.get(metric);
            PlotRow {
                value: r.value,
                mean: cell.map_or(f64::NAN, |c| c.mean),
                std: cell.map_or(f64::NAN, |c| c.std),
                crash_rate: r.crash_rate,
            }
        })
        .collect()
}

pub fn format_plot(axis: &str, metric: &str, rows: &[PlotRow]) -> String {
    let mut s = format!("# metric: {metric}\n# {axis} mean std crash_rate\n");
    for r in rows {
        let _ = writeln!(s, "{} {} {} {}", r.value, r.mean, r.std, r.crash_rate);
    }
    s
}

pub fn parse_plot(text: &str) -> Result<Vec<PlotRow>, String> {
    let mut rows = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let cols: Vec<f64> = line
            .split_whitespace()
            .map(|c| c.parse::<f64>().map_err(|e| format!("line {}: {e}", n + 1)))
            .collect::<Result<_, _>>()?;
        let [value, mean, std, crash_rate] = cols[..] else {
            return Err(format!("line {}: expected 4 columns, got {}", n + 1, cols.len()));
        };
        rows.push(PlotRow {
            value,
            mean,
            std,
            crash_rate,
        });
    }
    Ok(rows)
}

/// Writes one `<metric>.dat` file per metric into `dir`; returns the paths.
pub fn emit_plot_data(table: &SweepTable, dir: &Path) -> io::Result<Vec<std::path::PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let mut metrics = table.metric_names();
    if metrics.is_empty() {
        metrics.push("deviation".to_string());
    }
    let mut paths = Vec::new();
    for m in metrics {
        let path = dir.join(format!("{m}.dat"));
        std::fs::write(&path, format_plot(table.axis.name(), &m, &plot_rows(table, &m)))?;
        paths.push(path);
    }
    Ok(paths)
}
