//! Split-conformal prediction intervals for per-unit hub probabilities.
//!
//! Scores are residuals standardized by a per-unit difficulty (the spread of
//! the replicate estimates). Units with zero difficulty get zero-width
//! intervals; a zero-difficulty unit with a nonzero residual scores
//! `+inf`, and enough of those push the calibrated quantile to `+inf`,
//! which widens every uncertain unit to the full `[0, 1]` range.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::seed;

#[derive(Debug, Error, PartialEq)]
pub enum ConformalError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("calibration set is empty")]
    EmptyCalibration,
    #[error("truth values have zero range, relative width undefined")]
    DegenerateRange,
    #[error("invalid conformal configuration: {0}")]
    InvalidConfig(String),
    #[error("negative difficulty {value} at position {index}")]
    NegativeDifficulty { index: usize, value: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConformalConfig {
    /// Miscoverage level.
    pub alpha: f64,
    pub calibration_fraction: f64,
    #[serde(default)]
    pub seed: u64,
}

impl Default for ConformalConfig {
    fn default() -> Self {
        Self { alpha: 0.05, calibration_fraction: 0.5, seed: 0 }
    }
}

impl ConformalConfig {
    pub fn validate(&self) -> Result<(), ConformalError> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(ConformalError::InvalidConfig(format!("alpha {} not in (0, 1)", self.alpha)));
        }
        if !(self.calibration_fraction > 0.0 && self.calibration_fraction < 1.0) {
            return Err(ConformalError::InvalidConfig(format!(
                "calibration fraction {} not in (0, 1)",
                self.calibration_fraction
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AdaptivityClass {
    ZeroWidth,
    Intermediate,
    Full,
}

impl AdaptivityClass {
    pub fn as_str(self) -> &'static str {
        match self {
            AdaptivityClass::ZeroWidth => "zero_width",
            AdaptivityClass::Intermediate => "intermediate",
            AdaptivityClass::Full => "full",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "zero_width" => Some(AdaptivityClass::ZeroWidth),
            "intermediate" => Some(AdaptivityClass::Intermediate),
            "full" => Some(AdaptivityClass::Full),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PredictionInterval {
    pub center: f64,
    pub sigma: f64,
    pub lower_raw: f64,
    pub upper_raw: f64,
    /// `max(0, lower_raw)`
    pub lower: f64,
    /// `min(1, upper_raw)`
    pub upper: f64,
    pub adaptivity_class: AdaptivityClass,
}

impl PredictionInterval {
    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }

    pub fn covers(&self, y: f64) -> bool {
        self.lower <= y && y <= self.upper
    }

    pub fn raw_covers(&self, y: f64) -> bool {
        self.lower_raw <= y && y <= self.upper_raw
    }
}

fn same_len(a: usize, b: usize) -> Result<(), ConformalError> {
    if a != b {
        return Err(ConformalError::DimensionMismatch { expected: a, got: b });
    }
    Ok(())
}

/// `|y - ŷ| / σ`, with `0/0 = 0` and `r/0 = +inf` for `r > 0`.
pub fn nonconformity_scores(y: &[f64], y_hat: &[f64], sigma: &[f64]) -> Result<Vec<f64>, ConformalError> {
    same_len(y.len(), y_hat.len())?;
    same_len(y.len(), sigma.len())?;
    y.iter()
        .zip(y_hat)
        .zip(sigma)
        .enumerate()
        .map(|(index, ((&yi, &fi), &si))| {
            if si < 0.0 {
                return Err(ConformalError::NegativeDifficulty { index, value: si });
            }
            let r = (yi - fi).abs();
            Ok(if si == 0.0 {
                if r == 0.0 { 0.0 } else { f64::INFINITY }
            } else {
                r / si
            })
        })
        .collect()
}

/// Rank of the conformal order statistic, `ceil((1 - alpha)(n + 1))`.
pub fn quantile_rank(n: usize, alpha: f64) -> usize {
    // guard against products such as 19.000000000000004
    ((1.0 - alpha) * (n as f64 + 1.0) - 1e-9).ceil().max(1.0) as usize
}

/// The `ceil((1 - alpha)(n + 1))`-th smallest score, or `+inf` when that
/// rank exceeds `n`.
pub fn conformal_quantile(scores: &[f64], alpha: f64) -> Result<f64, ConformalError> {
    if scores.is_empty() {
        return Err(ConformalError::EmptyCalibration);
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(ConformalError::InvalidConfig(format!("alpha {alpha} not in (0, 1)")));
    }
    let k = quantile_rank(scores.len(), alpha);
    if k > scores.len() {
        return Ok(f64::INFINITY);
    }
    let mut sorted = scores.to_vec();
    sorted.sort_by(f64::total_cmp);
    Ok(sorted[k - 1])
}

/// `ŷ ± q̂σ` clamped to `[0, 1]`. A zero difficulty keeps a zero-width
/// interval even when `q̂` is infinite.
pub fn prediction_intervals(y_hat: &[f64], sigma: &[f64], q_hat: f64) -> Result<Vec<PredictionInterval>, ConformalError> {
    same_len(y_hat.len(), sigma.len())?;
    if q_hat.is_nan() || q_hat < 0.0 {
        return Err(ConformalError::InvalidConfig(format!("q_hat {q_hat} must be non-negative")));
    }
    y_hat
        .iter()
        .zip(sigma)
        .enumerate()
        .map(|(index, (&center, &s))| {
            if s < 0.0 {
                return Err(ConformalError::NegativeDifficulty { index, value: s });
            }
            let half = if s == 0.0 { 0.0 } else { q_hat * s };
            let (lower_raw, upper_raw) = (center - half, center + half);
            let lower = lower_raw.max(0.0);
            let upper = upper_raw.min(1.0).max(lower);
            let adaptivity_class = if lower == upper {
                AdaptivityClass::ZeroWidth
            } else if lower == 0.0 && upper == 1.0 {
                AdaptivityClass::Full
            } else {
                AdaptivityClass::Intermediate
            };
            Ok(PredictionInterval { center, sigma: s, lower_raw, upper_raw, lower, upper, adaptivity_class })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ClassShares {
    pub zero_width: f64,
    pub intermediate: f64,
    pub full: f64,
}

impl ClassShares {
    pub fn total(&self) -> f64 {
        self.zero_width + self.intermediate + self.full
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoverageReport {
    pub n: usize,
    pub coverage: f64,
    /// Mean interval width.
    pub miw: f64,
    /// `miw / (y_max - y_min)`; equals `miw` with `riw_degenerate` set when
    /// the truths have zero range.
    pub riw: f64,
    pub riw_degenerate: bool,
    pub class_counts: [usize; 3],
    pub class_shares: ClassShares,
    /// Positions of intervals that miss their truth.
    pub uncovered: Vec<usize>,
}

pub fn relative_interval_width(miw: f64, y_true: &[f64]) -> Result<f64, ConformalError> {
    let max = y_true.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = y_true.iter().copied().fold(f64::INFINITY, f64::min);
    if !(max > min) {
        return Err(ConformalError::DegenerateRange);
    }
    Ok(miw / (max - min))
}

pub fn coverage_report(intervals: &[PredictionInterval], y_true: &[f64]) -> Result<CoverageReport, ConformalError> {
    same_len(intervals.len(), y_true.len())?;
    let n = intervals.len();
    if n == 0 {
        return Err(ConformalError::EmptyCalibration);
    }
    let uncovered: Vec<usize> = intervals
        .iter()
        .zip(y_true)
        .enumerate()
        .filter(|(_, (iv, &y))| !iv.covers(y))
        .map(|(i, _)| i)
        .collect();
    let miw = intervals.iter().map(PredictionInterval::width).sum::<f64>() / n as f64;
    let (riw, riw_degenerate) = match relative_interval_width(miw, y_true) {
        Ok(r) => (r, false),
        Err(_) => (miw, true),
    };
    let mut class_counts = [0usize; 3];
    for iv in intervals {
        class_counts[iv.adaptivity_class as usize] += 1;
    }
    let share = |c: usize| c as f64 / n as f64;
    Ok(CoverageReport {
        n,
        coverage: (n - uncovered.len()) as f64 / n as f64,
        miw,
        riw,
        riw_degenerate,
        class_counts,
        class_shares: ClassShares {
            zero_width: share(class_counts[0]),
            intermediate: share(class_counts[1]),
            full: share(class_counts[2]),
        },
        uncovered,
    })
}

/// Seeded uniform partition of `0..n` into calibration and test positions,
/// each returned in ascending order.
pub fn split_calibration(n: usize, fraction: f64, seed_value: u64) -> Result<(Vec<usize>, Vec<usize>), ConformalError> {
    let n_cal = (fraction * n as f64).round() as usize;
    if n_cal == 0 || n_cal >= n {
        return Err(ConformalError::InvalidConfig(format!(
            "calibration fraction {fraction} of {n} units leaves an empty side"
        )));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut seed::rng(seed::derive(seed_value, seed::stream::CONFORMAL_SPLIT)));
    let mut cal = order[..n_cal].to_vec();
    let mut test = order[n_cal..].to_vec();
    cal.sort_unstable();
    test.sort_unstable();
    Ok((cal, test))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConformalResult {
    pub alpha: f64,
    pub q_hat: f64,
    pub calibration: Vec<usize>,
    pub test: Vec<usize>,
    /// One interval per unit, calibration units included.
    pub intervals: Vec<PredictionInterval>,
    /// Coverage on the held-out test units.
    pub test_report: CoverageReport,
    /// Coverage over every unit.
    pub all_report: CoverageReport,
}

fn pick(v: &[f64], idx: &[usize]) -> Vec<f64> {
    idx.iter().map(|&i| v[i]).collect()
}

/// Calibrates on a seeded subset of units and issues intervals for all.
pub fn conformalize(y: &[f64], y_hat: &[f64], sigma: &[f64], config: &ConformalConfig) -> Result<ConformalResult, ConformalError> {
    config.validate()?;
    same_len(y.len(), y_hat.len())?;
    same_len(y.len(), sigma.len())?;
    let (calibration, test) = split_calibration(y.len(), config.calibration_fraction, config.seed)?;
    let scores = nonconformity_scores(&pick(y, &calibration), &pick(y_hat, &calibration), &pick(sigma, &calibration))?;
    let q_hat = conformal_quantile(&scores, config.alpha)?;
    let intervals = prediction_intervals(y_hat, sigma, q_hat)?;
    let test_intervals: Vec<PredictionInterval> = test.iter().map(|&i| intervals[i].clone()).collect();
    let mut test_report = coverage_report(&test_intervals, &pick(y, &test))?;
    test_report.uncovered = test_report.uncovered.iter().map(|&k| test[k]).collect();
    let all_report = coverage_report(&intervals, y)?;
    Ok(ConformalResult { alpha: config.alpha, q_hat, calibration, test, intervals, test_report, all_report })
}
