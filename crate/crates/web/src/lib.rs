//! Browser bindings for the oceanmine demo page.
//!
//! Every exported function takes plain numbers or text and returns a JSON
//! string, so the page needs no generated glue beyond `wasm-bindgen`'s.

use chrono::{DateTime, NaiveDateTime, TimeDelta};
use serde::Serialize;
use wasm_bindgen::prelude::*;

use oceanmine::advisory::{detect_strong_waves, AdvisoryKind};
use oceanmine::index::{band_of, compute_index_with_floor, IndexSample};
use oceanmine::pipeline::{analyze, AnalysisConfig};
use oceanmine::region::RegionKey;

#[derive(Debug, Serialize, PartialEq)]
pub struct Curve {
    /// (pressure, index) pairs for accepted pressures.
    pub points: Vec<(f64, f64)>,
    pub rejected: usize,
}

/// Index against pressure at fixed temperature and salinity, sampled on
/// `count` evenly spaced pressures in `[p_min, p_max]`.
pub fn index_curve(t: f64, s: f64, p_min: f64, p_max: f64, count: usize, floor: f64) -> Curve {
    let count = count.clamp(2, 5000);
    let mut curve = Curve { points: Vec::with_capacity(count), rejected: 0 };
    for i in 0..count {
        let p = p_min + (p_max - p_min) * i as f64 / (count - 1) as f64;
        match compute_index_with_floor(t, s, p, floor) {
            Ok(n) => curve.points.push((p, n)),
            Err(_) => curve.rejected += 1,
        }
    }
    curve
}

#[derive(Debug, Serialize, PartialEq)]
pub struct BandView {
    pub values: Vec<f64>,
    pub avg_min: f64,
    pub avg_max: f64,
    /// Positions of samples outside the band.
    pub alerts: Vec<usize>,
}

fn demo_epoch() -> NaiveDateTime {
    DateTime::from_timestamp(0, 0).unwrap().naive_utc()
}

/// Parses numbers separated by commas or whitespace.
pub fn parse_values(text: &str) -> Result<Vec<f64>, String> {
    text.split(|c: char| c == ',' || c.is_whitespace())
        .filter(|t| !t.is_empty())
        .map(|t| t.parse::<f64>().map_err(|_| format!("not a number: {t:?}")))
        .collect()
}

/// Band and strong-wave alerts for a hand-typed index series, one sample
/// per minute.
pub fn band_view(text: &str, window_len: usize) -> Result<BandView, String> {
    let values = parse_values(text)?;
    let series: Vec<IndexSample> = values
        .iter()
        .enumerate()
        .map(|(i, &n_value)| IndexSample { observed_at: demo_epoch() + TimeDelta::minutes(i as i64), n_value })
        .collect();
    let band = band_of(&series, window_len).map_err(|e| e.to_string())?;
    let key = RegionKey { platform_id: "demo".into(), lat_cell: 0, lon_cell: 0 };
    let alerts = detect_strong_waves(&key, &series, &band)
        .iter()
        .filter_map(|a| series.iter().position(|s| s.observed_at == a.at))
        .collect();
    Ok(BandView { values, avg_min: band.avg_min, avg_max: band.avg_max, alerts })
}

#[derive(Debug, Serialize)]
pub struct RegionView {
    pub key: String,
    pub records: usize,
    /// (epoch ms, index) pairs.
    pub series: Vec<(i64, f64)>,
    pub wave_alerts: Vec<i64>,
    pub fishing_zones: Vec<i64>,
    pub rules: Vec<RuleView>,
    /// Confidence curve of the top rule, (epoch ms, confidence).
    pub top_curve: Vec<(i64, f64)>,
}

#[derive(Debug, Serialize)]
pub struct RuleView {
    pub label: String,
    pub support: usize,
    pub confidence: f64,
}

#[derive(Debug, Serialize)]
pub struct RunView {
    pub regions: Vec<RegionView>,
    pub report_text: String,
    pub diagnostics: Vec<String>,
}

fn ms(t: NaiveDateTime) -> i64 {
    t.and_utc().timestamp_millis()
}

/// Whole pipeline over pasted feed text with default parameters except the
/// ones exposed on the page.
pub fn run_feed(text: &str, window_len: usize, theta: f64) -> Result<RunView, String> {
    let config = AnalysisConfig { window_len, theta, ..AnalysisConfig::default() };
    let out = analyze(&[("pasted".to_string(), text.to_string())], &config).map_err(|e| e.to_string())?;
    let regions = out
        .regions
        .iter()
        .map(|r| {
            let row = out.report.rows.iter().find(|row| row.region == r.key);
            let times = |kind: AdvisoryKind| -> Vec<i64> {
                row.map(|row| row.advisories.iter().filter(|a| a.kind == kind).map(|a| ms(a.at)).collect())
                    .unwrap_or_default()
            };
            RegionView {
                key: r.key.to_string(),
                records: r.records.len(),
                series: r.series.iter().map(|s| (ms(s.observed_at), s.n_value)).collect(),
                wave_alerts: times(AdvisoryKind::StrongWaveAlert),
                fishing_zones: times(AdvisoryKind::PotentialFishingZone),
                rules: r
                    .rules
                    .iter()
                    .take(20)
                    .map(|rule| RuleView { label: rule.label(config.k), support: rule.support, confidence: rule.confidence })
                    .collect(),
                top_curve: r
                    .curves
                    .first()
                    .map(|(_, c)| c.iter().map(|(t, v)| (ms(*t), *v)).collect())
                    .unwrap_or_default(),
            }
        })
        .collect();
    Ok(RunView {
        regions,
        report_text: out.report.render_text(),
        diagnostics: out.diagnostics.iter().map(|d| d.to_string()).collect(),
    })
}

fn to_json<T: Serialize>(v: &T) -> String {
    serde_json::to_string(v).unwrap_or_else(|e| format!("{{\"error\":{:?}}}", e.to_string()))
}

#[wasm_bindgen(js_name = indexCurve)]
pub fn index_curve_js(t: f64, s: f64, p_min: f64, p_max: f64, count: usize, floor: f64) -> String {
    to_json(&index_curve(t, s, p_min, p_max, count, floor))
}

#[wasm_bindgen(js_name = bandView)]
pub fn band_view_js(text: &str, window_len: usize) -> Result<String, String> {
    band_view(text, window_len).map(|v| to_json(&v))
}

#[wasm_bindgen(js_name = runFeed)]
pub fn run_feed_js(text: &str, window_len: usize, theta: f64) -> Result<String, String> {
    run_feed(text, window_len, theta).map(|v| to_json(&v))
}

#[wasm_bindgen(js_name = sampleFeed)]
pub fn sample_feed() -> String {
    include_str!("../../core/data/sample_oids.txt").to_string()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn curve_skips_pressures_at_the_floor() {
        let c = index_curve(20.0, 35.0, 0.0, 100.0, 101, 0.5);
        assert_eq!(c.rejected, 1);
        assert_eq!(c.points.len(), 100);
        assert_eq!(c.points[0].0, 1.0);
    }

    #[test]
    fn band_view_flags_spike() {
        let v = band_view("1.3, 1.31 1.29\n1.3 4.0 1.3", 3).unwrap();
        assert_eq!(v.alerts, vec![2, 4]);
        assert!(band_view("1, x", 3).is_err());
        assert!(band_view("1 2", 0).is_err());
    }

    #[test]
    fn sample_feed_runs() {
        let v = run_feed(&sample_feed(), 10, 0.8).unwrap();
        assert_eq!(v.regions.len(), 1);
        assert_eq!(v.regions[0].key, "02602_0_76");
        assert!(!v.regions[0].rules.is_empty());
        assert!(v.report_text.contains("02602_0_76"));
    }

    #[test]
    fn garbage_feed_is_an_error() {
        assert!(run_feed("hello", 10, 0.8).is_err());
    }
}
