//! Oscillation index per level and the average min/max band of a series.
//!
//! The index is
//!
//! ```text
//! N = 1.3247 - 2.5e-6 T^2 + S (2e-4 - 8e-7 T) + 3300 / P^2 - 3.2e7 / P^4
//! ```
//!
//! with T in °C, S in PSU and P in dbar. The two pressure terms diverge as
//! P approaches zero, so levels at or below a pressure floor are rejected.

use chrono::NaiveDateTime;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::region::RegionSegment;

pub const DEFAULT_PRESSURE_FLOOR: f64 = 0.5;
pub const DEFAULT_WINDOW_LEN: usize = 10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum IndexError {
    #[error("pressure {pressure} dbar is at or below the floor {floor} dbar")]
    DivergentIndex { pressure: f64, floor: f64 },
    #[error("all {rejected} records were rejected by the pressure floor")]
    AllSamplesRejected { rejected: usize },
    #[error("series has no samples")]
    SeriesTooShort,
    #[error("window length must be at least 1")]
    ZeroWindow,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IndexSample {
    pub observed_at: NaiveDateTime,
    pub n_value: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IndexBand {
    pub avg_min: f64,
    pub avg_max: f64,
    pub window_len: usize,
}

impl IndexBand {
    pub fn contains(&self, value: f64) -> bool {
        value >= self.avg_min && value <= self.avg_max
    }
}

/// The index series of one segment plus the count of skipped levels.
#[derive(Debug, Clone, PartialEq)]
pub struct IndexSeries {
    pub samples: Vec<IndexSample>,
    pub skipped: usize,
}

/// Evaluates the index with the default pressure floor.
pub fn compute_index(temperature: f64, salinity: f64, pressure: f64) -> Result<f64, IndexError> {
    compute_index_with_floor(temperature, salinity, pressure, DEFAULT_PRESSURE_FLOOR)
}

pub fn compute_index_with_floor(
    temperature: f64,
    salinity: f64,
    pressure: f64,
    floor: f64,
) -> Result<f64, IndexError> {
    if pressure.is_nan() || pressure <= floor {
        return Err(IndexError::DivergentIndex { pressure, floor });
    }
    let t = temperature;
    let p2 = pressure * pressure;
    Ok(1.3247 - 2.5e-6 * t * t + salinity * (2e-4 - 8e-7 * t) + 3300.0 / p2
        - 3.2e7 / (p2 * p2))
}

/// Analytic ∂N/∂T.
pub fn index_temperature_gradient(temperature: f64, salinity: f64) -> f64 {
    -5e-6 * temperature - 8e-7 * salinity
}

/// One sample per record above the floor, in record order.
pub fn compute_series(segment: &RegionSegment, floor: f64) -> Result<IndexSeries, IndexError> {
    let mut samples = Vec::with_capacity(segment.records.len());
    let mut skipped = 0;
    for r in &segment.records {
        match compute_index_with_floor(r.temperature, r.salinity, r.pressure, floor) {
            Ok(n_value) => samples.push(IndexSample { observed_at: r.observed_at, n_value }),
            Err(_) => skipped += 1,
        }
    }
    if samples.is_empty() {
        return Err(IndexError::AllSamplesRejected { rejected: skipped });
    }
    Ok(IndexSeries { samples, skipped })
}

/// Mean of per-window minima and maxima over consecutive windows of
/// `window_len` samples. A trailing partial window counts as a window.
pub fn band_of(series: &[IndexSample], window_len: usize) -> Result<IndexBand, IndexError> {
    if window_len == 0 {
        return Err(IndexError::ZeroWindow);
    }
    if series.is_empty() {
        return Err(IndexError::SeriesTooShort);
    }
    let (mut min_sum, mut max_sum, mut windows) = (0.0, 0.0, 0usize);
    for window in series.chunks(window_len) {
        let (lo, hi) = window.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), s| {
            (lo.min(s.n_value), hi.max(s.n_value))
        });
        min_sum += lo;
        max_sum += hi;
        windows += 1;
    }
    let n = windows as f64;
    Ok(IndexBand { avg_min: min_sum / n, avg_max: max_sum / n, window_len })
}
