//! Least-squares estimation of creation and execution coefficients.
//!
//! Both models are linear in a transformed regressor: creation time is
//! `k_c * S + b_c` and execution time is `a * (1 / S) + b`. Fits run on the
//! per-batch-size sample means.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::model::SampleStats;

#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementPoint {
    pub batch_size: u64,
    pub samples: Vec<f64>,
}

impl MeasurementPoint {
    pub fn stats(&self) -> Result<SampleStats> {
        SampleStats::from_samples(&self.samples)
    }

    fn mean(&self) -> f64 {
        self.samples.iter().sum::<f64>() / self.samples.len() as f64
    }
}

/// Repeated timing samples grouped by batch size.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct MeasurementSeries {
    pub points: Vec<MeasurementPoint>,
    pub label: String,
}

impl MeasurementSeries {
    pub fn new(label: impl Into<String>) -> Self {
        Self {
            points: Vec::new(),
            label: label.into(),
        }
    }

    /// Appends a sample to the point for `batch_size`, creating it if needed.
    pub fn push_sample(&mut self, batch_size: u64, seconds: f64) {
        match self.points.iter_mut().find(|p| p.batch_size == batch_size) {
            Some(point) => point.samples.push(seconds),
            None => self.points.push(MeasurementPoint {
                batch_size,
                samples: vec![seconds],
            }),
        }
    }

    pub fn distinct_batch_sizes(&self) -> usize {
        self.points
            .iter()
            .map(|p| p.batch_size)
            .collect::<BTreeSet<_>>()
            .len()
    }

    fn check_fittable(&self) -> Result<()> {
        for p in &self.points {
            if p.batch_size == 0 {
                return Err(Error::InsufficientData("batch size 0 in series".into()));
            }
            if p.samples.is_empty() {
                return Err(Error::InsufficientData(format!(
                    "no samples for batch size {}",
                    p.batch_size
                )));
            }
            if let Some(bad) = p.samples.iter().find(|s| !(**s > 0.0) || !s.is_finite()) {
                return Err(Error::InvalidParameter(format!(
                    "sample {bad} for batch size {} is not a positive time",
                    p.batch_size
                )));
            }
        }
        let distinct = self.distinct_batch_sizes();
        if distinct < 2 {
            return Err(Error::InsufficientData(format!(
                "need at least 2 distinct batch sizes, got {distinct}"
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FitKind {
    /// `k_c * S + b_c`
    Creation,
    /// `a / S + b`
    Execution,
}

impl FitKind {
    fn regressor(&self, batch_size: u64) -> f64 {
        match self {
            FitKind::Creation => batch_size as f64,
            FitKind::Execution => 1.0 / batch_size as f64,
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            FitKind::Creation => "creation",
            FitKind::Execution => "execution",
        }
    }
}

impl fmt::Display for FitKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for FitKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "creation" => Ok(FitKind::Creation),
            "execution" => Ok(FitKind::Execution),
            other => Err(format!("unknown fit kind `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitResult {
    pub kind: FitKind,
    /// `k_c` (seconds per node) or `a` (seconds times nodes).
    pub slope: f64,
    /// `b_c` or `b`, seconds.
    pub intercept: f64,
    /// Mean absolute error against the per-point means, seconds.
    pub mae: f64,
    pub points_used: usize,
}

impl FitResult {
    pub fn predict(&self, batch_size: u64) -> f64 {
        self.slope * self.kind.regressor(batch_size) + self.intercept
    }
}

/// Ordinary least squares on `(x, y)` pairs, centered for conditioning.
/// Returns `(slope, intercept)`.
fn ordinary_least_squares(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let x_mean = xs.iter().sum::<f64>() / n;
    let y_mean = ys.iter().sum::<f64>() / n;
    let (sxy, sxx) = xs
        .iter()
        .zip(ys)
        .fold((0.0, 0.0), |(sxy, sxx), (&x, &y)| {
            let dx = x - x_mean;
            (sxy + dx * (y - y_mean), sxx + dx * dx)
        });
    let slope = sxy / sxx;
    (slope, y_mean - slope * x_mean)
}

pub fn fit(series: &MeasurementSeries, kind: FitKind) -> Result<FitResult> {
    series.check_fittable()?;
    let xs: Vec<f64> = series
        .points
        .iter()
        .map(|p| kind.regressor(p.batch_size))
        .collect();
    let ys: Vec<f64> = series.points.iter().map(MeasurementPoint::mean).collect();
    let (slope, intercept) = ordinary_least_squares(&xs, &ys);
    let mae = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (y - (slope * x + intercept)).abs())
        .sum::<f64>()
        / xs.len() as f64;
    Ok(FitResult {
        kind,
        slope,
        intercept,
        mae,
        points_used: xs.len(),
    })
}

/// Fits `k_c * S + b_c` to the per-point means.
pub fn fit_creation(series: &MeasurementSeries) -> Result<FitResult> {
    fit(series, FitKind::Creation)
}

/// Fits `a / S + b` to the per-point means.
pub fn fit_execution(series: &MeasurementSeries) -> Result<FitResult> {
    fit(series, FitKind::Execution)
}

/// Default fraction of `I_k` above which the linear and reciprocal models
/// stop describing measurements.
pub const DEFAULT_VALIDITY_FRACTION: f64 = 0.25;

/// Drops points with `S > max_fraction * I_k`.
pub fn fit_validity_filter(
    series: &MeasurementSeries,
    max_fraction: f64,
    total_kernel_executions: u64,
) -> Result<MeasurementSeries> {
    if !(max_fraction > 0.0 && max_fraction <= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "validity fraction must be in (0, 1], got {max_fraction}"
        )));
    }
    let bound = max_fraction * total_kernel_executions as f64;
    let filtered = MeasurementSeries {
        points: series
            .points
            .iter()
            .filter(|p| p.batch_size as f64 <= bound)
            .cloned()
            .collect(),
        label: series.label.clone(),
    };
    let distinct = filtered.distinct_batch_sizes();
    if distinct < 2 {
        return Err(Error::InsufficientData(format!(
            "validity bound {bound} leaves {distinct} distinct batch size(s)"
        )));
    }
    Ok(filtered)
}
