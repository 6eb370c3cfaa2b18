//! Driving-quality metrics: correction, absolute-value summaries,
//! post-outage windows and crash detection.

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const DEFAULT_CRASH_THRESHOLD: f64 = 0.25;
pub const DEFAULT_CRASH_HOLD: f64 = 0.5;
pub const DEFAULT_WINDOW: usize = 5;

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("cannot summarize an empty series")]
    Empty,
    #[error("timestamp {time} does not increase past {last}")]
    NonIncreasing { time: f64, last: f64 },
}

/// Signed applied correction: half the power difference.
pub fn correction_metric(left: f64, right: f64) -> f64 {
    (right - left) / 2.0
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SampleSeries {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
}

impl SampleSeries {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, time: f64, value: f64) -> Result<(), MetricsError> {
        if let Some(&last) = self.times.last() {
            if time <= last {
                return Err(MetricsError::NonIncreasing { time, last });
            }
        }
        self.times.push(time);
        self.values.push(value);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.times.iter().copied().zip(self.values.iter().copied())
    }

    pub fn to_csv(&self, value_name: &str) -> String {
        let mut s = format!("time,{value_name}\n");
        for (t, v) in self.iter() {
            s.push_str(&format!("{t:.4},{v}\n"));
        }
        s
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub mean_abs: f64,
    pub std_abs: f64,
    pub sem: f64,
    pub count: usize,
    pub crash_time: Option<f64>,
}

/// Mean and population standard deviation of |x|, plus the standard error.
pub fn summarize_values(values: &[f64]) -> Result<RunSummary, MetricsError> {
    if values.is_empty() {
        return Err(MetricsError::Empty);
    }
    let n = values.len() as f64;
    let mean = values.iter().map(|v| v.abs()).sum::<f64>() / n;
    let var = values.iter().map(|v| (v.abs() - mean).powi(2)).sum::<f64>() / n;
    let std = var.sqrt();
    Ok(RunSummary {
        mean_abs: mean,
        std_abs: std,
        sem: std / n.sqrt(),
        count: values.len(),
        crash_time: None,
    })
}

pub fn summarize(series: &SampleSeries) -> Result<RunSummary, MetricsError> {
    summarize_values(&series.values)
}

/// The first `k` samples strictly after each outage end, concatenated.
pub fn post_outage_window(series: &SampleSeries, outage_ends: &[f64], k: usize) -> SampleSeries {
    let mut out = SampleSeries::new();
    for &end in outage_ends {
        let start = series.times.partition_point(|&t| t <= end);
        let stop = (start + k).min(series.len());
        out.times.extend_from_slice(&series.times[start..stop]);
        out.values.extend_from_slice(&series.values[start..stop]);
    }
    out
}

/// Incremental crash rule: |deviation| above the threshold continuously for
/// the hold time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CrashDetector {
    pub threshold: f64,
    pub hold: f64,
    since: Option<f64>,
}

impl CrashDetector {
    pub fn new(threshold: f64, hold: f64) -> Self {
        CrashDetector {
            threshold,
            hold,
            since: None,
        }
    }

    /// Feeds one sample; returns the crash time once the rule fires.
    pub fn update(&mut self, time: f64, deviation: f64) -> Option<f64> {
        if deviation.abs() > self.threshold {
            let since = *self.since.get_or_insert(time);
            if time - since >= self.hold - 1e-9 {
                return Some(since + self.hold);
            }
        } else {
            self.since = None;
        }
        None
    }
}

pub fn detect_crash(series: &SampleSeries, threshold: f64, hold: f64) -> Option<f64> {
    let mut det = CrashDetector::new(threshold, hold);
    series.iter().find_map(|(t, v)| det.update(t, v))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn series(pairs: &[(f64, f64)]) -> SampleSeries {
        let mut s = SampleSeries::new();
        for &(t, v) in pairs {
            s.push(t, v).unwrap();
        }
        s
    }

    #[test]
    fn correction_examples() {
        assert_eq!(correction_metric(100.0, 100.0), 0.0);
        assert_eq!(correction_metric(38.0, 161.0), 61.5);
        assert_eq!(correction_metric(161.0, 38.0), -61.5);
    }

    #[test]
    fn summarize_examples() {
        let s = summarize_values(&[0.0, 0.0, 0.0]).unwrap();
        assert_eq!((s.mean_abs, s.std_abs), (0.0, 0.0));
        let s = summarize_values(&[3.0, -4.0]).unwrap();
        assert_abs_diff_eq!(s.mean_abs, 3.5);
        assert_abs_diff_eq!(s.std_abs, 0.5);
        let s = summarize_values(&[5.0]).unwrap();
        assert_eq!((s.mean_abs, s.std_abs, s.count), (5.0, 0.0, 1));
        assert_eq!(summarize_values(&[]), Err(MetricsError::Empty));
    }

    #[test]
    fn rejects_non_increasing_time() {
        let mut s = SampleSeries::new();
        s.push(1.0, 0.0).unwrap();
        assert!(s.push(1.0, 0.0).is_err());
    }

    #[test]
    fn post_outage_windows() {
        let s = series(&(0..100).map(|i| (i as f64 * 0.1, i as f64)).collect::<Vec<_>>());
        assert!(post_outage_window(&s, &[], 5).is_empty());
        let w = post_outage_window(&s, &[3.0], 5);
        assert_eq!(w.values, vec![31.0, 32.0, 33.0, 34.0, 35.0]);
        let w = post_outage_window(&s, &[9.75], 5);
        assert_eq!(w.values, vec![98.0, 99.0]);
    }

    #[test]
    fn crash_rule() {
        let flat = series(&(0..2000).map(|i| (i as f64 * 0.01, 0.0)).collect::<Vec<_>>());
        assert_eq!(detect_crash(&flat, 0.25, 0.5), None);

        let step = series(
            &(0..2000)
                .map(|i| {
                    let t = i as f64 * 0.01;
                    (t, if t >= 10.0 - 1e-9 { 0.5 } else { 0.0 })
                })
                .collect::<Vec<_>>(),
        );
        assert_abs_diff_eq!(detect_crash(&step, 0.25, 0.5).unwrap(), 10.5, epsilon = 1e-6);

        let spike = series(
            &(0..2000)
                .map(|i| {
                    let t = i as f64 * 0.01;
                    (t, if (5.0..5.1).contains(&t) { 0.3 } else { 0.0 })
                })
                .collect::<Vec<_>>(),
        );
        assert_eq!(detect_crash(&spike, 0.25, 0.5), None);
    }
}
