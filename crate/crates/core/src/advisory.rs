//! Strong-wave alerts, potential-fishing-zone advisories and the composed
//! per-region report.

use std::fmt::Write as _;

use chrono::NaiveDateTime;
use serde::{Deserialize, Serialize};

use crate::index::{IndexBand, IndexSample};
use crate::region::RegionKey;

pub const DEFAULT_THETA: f64 = 0.8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AdvisoryKind {
    StrongWaveAlert,
    PotentialFishingZone,
}

/// The observed value and the threshold it was compared against.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Evidence {
    pub value: f64,
    pub threshold: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Advisory {
    pub kind: AdvisoryKind,
    pub region: RegionKey,
    pub at: NaiveDateTime,
    pub evidence: Evidence,
    /// 1-based rank of the rule in the region's rule list (fishing zones only).
    pub rule_id: Option<usize>,
}

/// One alert per sample strictly outside `[avg_min, avg_max]`.
pub fn detect_strong_waves(
    region: &RegionKey,
    series: &[IndexSample],
    band: &IndexBand,
) -> Vec<Advisory> {
    series
        .iter()
        .filter_map(|s| {
            let threshold = if s.n_value < band.avg_min {
                band.avg_min
            } else if s.n_value > band.avg_max {
                band.avg_max
            } else {
                return None;
            };
            Some(Advisory {
                kind: AdvisoryKind::StrongWaveAlert,
                region: region.clone(),
                at: s.observed_at,
                evidence: Evidence { value: s.n_value, threshold },
                rule_id: None,
            })
        })
        .collect()
}

/// One advisory at every point attaining the curve's maximum, provided that
/// maximum is at least `theta`.
pub fn detect_fishing_zone(
    region: &RegionKey,
    curve: &[(NaiveDateTime, f64)],
    theta: f64,
    rule_id: Option<usize>,
) -> Vec<Advisory> {
    let peak = curve.iter().map(|(_, c)| *c).fold(f64::NEG_INFINITY, f64::max);
    if curve.is_empty() || peak < theta {
        return Vec::new();
    }
    curve
        .iter()
        .filter(|(_, c)| *c == peak)
        .map(|&(at, value)| Advisory {
            kind: AdvisoryKind::PotentialFishingZone,
            region: region.clone(),
            at,
            evidence: Evidence { value, threshold: theta },
            rule_id,
        })
        .collect()
}

/// Everything computed for one region that survived the index stage.
#[derive(Debug, Clone, PartialEq)]
pub struct RegionAnalysis {
    pub samples: Vec<IndexSample>,
    pub skipped: usize,
    pub band: IndexBand,
    /// Label and confidence of the best rule, if any was mined.
    pub top_rule: Option<(String, f64)>,
    pub advisories: Vec<Advisory>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegionResult {
    pub key: RegionKey,
    pub record_count: usize,
    /// `Err` carries the diagnostic for a region that produced no series.
    pub analysis: Result<RegionAnalysis, String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub region: RegionKey,
    pub first_observed: Option<NaiveDateTime>,
    pub last_observed: Option<NaiveDateTime>,
    pub record_count: usize,
    pub sample_count: usize,
    pub skipped: usize,
    pub avg_min: Option<f64>,
    pub avg_max: Option<f64>,
    pub top_rule: Option<String>,
    pub top_confidence: Option<f64>,
    pub advisories: Vec<Advisory>,
    pub diagnostic: Option<String>,
}

impl ReportRow {
    pub fn count(&self, kind: AdvisoryKind) -> usize {
        self.advisories.iter().filter(|a| a.kind == kind).count()
    }

    /// Re-checks every advisory against the numbers in this row.
    pub fn advisories_consistent(&self) -> bool {
        let peak = self
            .advisories
            .iter()
            .filter(|a| a.kind == AdvisoryKind::PotentialFishingZone)
            .map(|a| a.evidence.value)
            .fold(f64::NEG_INFINITY, f64::max);
        self.advisories.iter().all(|a| match a.kind {
            AdvisoryKind::StrongWaveAlert => match (self.avg_min, self.avg_max) {
                (Some(lo), Some(hi)) => a.evidence.value < lo || a.evidence.value > hi,
                _ => false,
            },
            AdvisoryKind::PotentialFishingZone => {
                a.evidence.value >= a.evidence.threshold && a.evidence.value == peak
            }
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportTable {
    pub generated_at: NaiveDateTime,
    pub rows: Vec<ReportRow>,
}

/// Folds per-region results into one table sorted by region key.
pub fn compose_report(mut results: Vec<RegionResult>, generated_at: NaiveDateTime) -> ReportTable {
    results.sort_by(|a, b| a.key.cmp(&b.key));
    let rows = results
        .into_iter()
        .map(|r| match r.analysis {
            Ok(a) => {
                let mut advisories = a.advisories;
                advisories.sort_by(|x, y| {
                    x.at.cmp(&y.at).then((x.kind as u8).cmp(&(y.kind as u8)))
                });
                ReportRow {
                    region: r.key,
                    first_observed: a.samples.first().map(|s| s.observed_at),
                    last_observed: a.samples.last().map(|s| s.observed_at),
                    record_count: r.record_count,
                    sample_count: a.samples.len(),
                    skipped: a.skipped,
                    avg_min: Some(a.band.avg_min),
                    avg_max: Some(a.band.avg_max),
                    top_confidence: a.top_rule.as_ref().map(|(_, c)| *c),
                    top_rule: a.top_rule.map(|(label, _)| label),
                    advisories,
                    diagnostic: None,
                }
            }
            Err(diagnostic) => ReportRow {
                region: r.key,
                first_observed: None,
                last_observed: None,
                record_count: r.record_count,
                sample_count: 0,
                skipped: r.record_count,
                avg_min: None,
                avg_max: None,
                top_rule: None,
                top_confidence: None,
                advisories: Vec::new(),
                diagnostic: Some(diagnostic),
            },
        })
        .collect();
    ReportTable { generated_at, rows }
}

impl ReportTable {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    /// Aligned plain-text rendering, one line per region.
    pub fn render_text(&self) -> String {
        const HEADERS: [&str; 10] = [
            "region", "first", "last", "samples", "skipped", "avg_min", "avg_max", "top_rule",
            "top_conf", "alerts",
        ];
        let opt_time = |t: Option<NaiveDateTime>| {
            t.map_or("-".to_string(), |t| t.format("%Y-%m-%d %H:%M:%S").to_string())
        };
        let opt_num = |v: Option<f64>, prec: usize| v.map_or("-".to_string(), |v| format!("{v:.prec$}"));

        let mut cells: Vec<Vec<String>> = vec![HEADERS.iter().map(|h| h.to_string()).collect()];
        for row in &self.rows {
            let alerts = match &row.diagnostic {
                Some(d) => d.clone(),
                None => format!(
                    "wave={} fish={}",
                    row.count(AdvisoryKind::StrongWaveAlert),
                    row.count(AdvisoryKind::PotentialFishingZone)
                ),
            };
            cells.push(vec![
                row.region.to_string(),
                opt_time(row.first_observed),
                opt_time(row.last_observed),
                row.sample_count.to_string(),
                row.skipped.to_string(),
                opt_num(row.avg_min, 6),
                opt_num(row.avg_max, 6),
                row.top_rule.clone().unwrap_or_else(|| "-".into()),
                opt_num(row.top_confidence, 3),
                alerts,
            ]);
        }
        let widths: Vec<usize> = (0..HEADERS.len())
            .map(|c| cells.iter().map(|r| r[c].len()).max().unwrap_or(0))
            .collect();

        let mut out = format!("generated_at {}\n", self.generated_at.format("%Y-%m-%d %H:%M:%S"));
        for row in &cells {
            let line: Vec<String> =
                row.iter().zip(&widths).map(|(cell, w)| format!("{cell:<w$}")).collect();
            let _ = writeln!(out, "{}", line.join("  ").trim_end());
        }
        out
    }
}
