//! End-to-end driver: parse, decode, segment, index, mine, compose.
//!
//! [`analyze`] is the pure part and works on in-memory feed texts; [`run`]
//! adds file IO around it. Every artifact is rendered in memory first, so a
//! failing run leaves no partial output tree behind.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use chrono::{NaiveDateTime, TimeDelta};
use thiserror::Error;

use crate::advisory::{
    compose_report, detect_fishing_zone, detect_strong_waves, RegionAnalysis, RegionResult,
    ReportTable, DEFAULT_THETA,
};
use crate::episode::{
    confidence_series, episode_label, events_from_series, mine_rules, EpisodeRule, MiningParams,
    DEFAULT_CLASSES, DEFAULT_DELTA_SECS, DEFAULT_MAX_LEN, DEFAULT_MIN_SUPPORT,
};
use crate::index::{band_of, compute_series, IndexSample, DEFAULT_PRESSURE_FLOOR, DEFAULT_WINDOW_LEN};
use crate::profile::{decode_block, CalibrationTable, ProfileRecord};
use crate::region::{segment, RegionKey, RegionSegment, DEFAULT_CELL_SIZE};
use crate::telemetry::parse_stream;
use crate::ISO_FORMAT;

/// Upper bound on episode length; the candidate space grows as k^max_len.
pub const MAX_EPISODE_LEN: usize = 6;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Config,
    Read,
    Parse,
    Decode,
    Index,
    Write,
}

impl std::fmt::Display for Stage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Stage::Config => "config",
            Stage::Read => "read",
            Stage::Parse => "parse",
            Stage::Decode => "decode",
            Stage::Index => "index",
            Stage::Write => "write",
        })
    }
}

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("config: {0}")]
    Config(String),
    #[error("{stage}: {path}: {message}")]
    Io { stage: Stage, path: PathBuf, message: String },
    #[error("data: every input was rejected")]
    AllRejected { diagnostics: Vec<Diagnostic> },
}

impl PipelineError {
    /// 1 config, 2 I/O, 3 data.
    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::Config(_) => 1,
            PipelineError::Io { .. } => 2,
            PipelineError::AllRejected { .. } => 3,
        }
    }
}

/// A non-fatal rejection, attributed to the stage that raised it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Diagnostic {
    pub stage: Stage,
    pub source: String,
    pub message: String,
}

impl std::fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: {}: {}", self.stage, self.source, self.message)
    }
}

/// Analysis parameters; everything except where files live.
#[derive(Debug, Clone, PartialEq)]
pub struct AnalysisConfig {
    pub cell_size: f64,
    pub calibration: CalibrationTable,
    pub pressure_floor: f64,
    pub window_len: usize,
    pub delta: TimeDelta,
    pub k: usize,
    pub max_len: usize,
    pub win_a: TimeDelta,
    pub win_c: TimeDelta,
    pub lag: TimeDelta,
    pub min_support: usize,
    pub theta: f64,
    /// Grid spacing of the confidence curves.
    pub step: TimeDelta,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        let delta = TimeDelta::seconds(DEFAULT_DELTA_SECS);
        Self {
            cell_size: DEFAULT_CELL_SIZE,
            calibration: CalibrationTable::default(),
            pressure_floor: DEFAULT_PRESSURE_FLOOR,
            window_len: DEFAULT_WINDOW_LEN,
            delta,
            k: DEFAULT_CLASSES,
            max_len: DEFAULT_MAX_LEN,
            win_a: TimeDelta::zero(),
            win_c: TimeDelta::zero(),
            lag: delta,
            min_support: DEFAULT_MIN_SUPPORT,
            theta: DEFAULT_THETA,
            step: delta,
        }
    }
}

impl AnalysisConfig {
    pub fn validate(&self) -> Result<(), PipelineError> {
        let fail = |m: &str| Err(PipelineError::Config(m.to_string()));
        if !(self.cell_size.is_finite() && self.cell_size > 0.0) {
            return fail("cell-size must be a positive number of degrees");
        }
        if let Err(e) = self.calibration.validate() {
            return Err(PipelineError::Config(e.to_string()));
        }
        if !(self.pressure_floor.is_finite() && self.pressure_floor >= 0.0) {
            return fail("pressure-floor must be a non-negative number of dbar");
        }
        if self.window_len == 0 {
            return fail("window-len must be at least 1");
        }
        if self.delta <= TimeDelta::zero() {
            return fail("delta must be positive");
        }
        if !(2..=255).contains(&self.k) {
            return fail("k must be between 2 and 255");
        }
        if !(1..=MAX_EPISODE_LEN).contains(&self.max_len) {
            return fail("max-len must be between 1 and 6");
        }
        if self.win_a < TimeDelta::zero() || self.win_c < TimeDelta::zero() {
            return fail("win-a and win-c must not be negative");
        }
        if self.lag < TimeDelta::zero() {
            return fail("lag must not be negative");
        }
        if self.min_support == 0 {
            return fail("min-support must be at least 1");
        }
        if !(self.theta > 0.0 && self.theta <= 1.0) {
            return fail("theta must be in (0, 1]");
        }
        if self.step.num_milliseconds() <= 0 {
            return fail("step must be at least one millisecond");
        }
        Ok(())
    }

    pub fn mining_params(&self) -> MiningParams {
        MiningParams {
            min_support: self.min_support,
            max_len: self.max_len,
            win_a: self.win_a,
            win_c: self.win_c,
            lag: self.lag,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub inputs: Vec<PathBuf>,
    pub output_dir: PathBuf,
    /// Calibration file; overrides `analysis.calibration` when set.
    pub calibration_path: Option<PathBuf>,
    pub analysis: AnalysisConfig,
    pub emit_plots: bool,
}

/// Per-region intermediate products.
#[derive(Debug, Clone, PartialEq)]
pub struct RegionOutput {
    pub key: RegionKey,
    pub records: Vec<ProfileRecord>,
    pub series: Vec<IndexSample>,
    pub rules: Vec<EpisodeRule>,
    /// (rule_id, curve) for every mined rule.
    pub curves: Vec<(usize, Vec<(NaiveDateTime, f64)>)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnalysisOutput {
    pub regions: Vec<RegionOutput>,
    pub report: ReportTable,
    pub diagnostics: Vec<Diagnostic>,
}

/// Runs every stage on in-memory feeds given as (source name, text).
pub fn analyze(
    sources: &[(String, String)],
    config: &AnalysisConfig,
) -> Result<AnalysisOutput, PipelineError> {
    config.validate()?;
    let mut diagnostics = Vec::new();

    let mut blocks = Vec::new();
    for (name, text) in sources {
        match parse_stream(text) {
            Ok(b) => blocks.extend(b),
            Err(e) => diagnostics.push(Diagnostic {
                stage: Stage::Parse,
                source: name.clone(),
                message: e.to_string(),
            }),
        }
    }

    let mut decoded = Vec::new();
    for block in &blocks {
        match decode_block(block, &config.calibration) {
            Ok(records) => decoded.extend(records.into_iter().map(|r| (&block.header, r))),
            Err(e) => diagnostics.push(Diagnostic {
                stage: Stage::Decode,
                source: block.header.platform_id.clone(),
                message: e.to_string(),
            }),
        }
    }
    if decoded.is_empty() {
        return Err(PipelineError::AllRejected { diagnostics });
    }
    let generated_at = decoded.iter().map(|(_, r)| r.observed_at).max().unwrap_or_default();

    let segments = segment(decoded, config.cell_size);
    let mut regions = Vec::with_capacity(segments.len());
    let mut results = Vec::with_capacity(segments.len());
    for seg in segments {
        let (output, result) = analyze_region(seg, config, &mut diagnostics);
        regions.push(output);
        results.push(result);
    }
    if results.iter().all(|r| r.analysis.is_err()) {
        return Err(PipelineError::AllRejected { diagnostics });
    }

    Ok(AnalysisOutput { regions, report: compose_report(results, generated_at), diagnostics })
}

fn analyze_region(
    seg: RegionSegment,
    config: &AnalysisConfig,
    diagnostics: &mut Vec<Diagnostic>,
) -> (RegionOutput, RegionResult) {
    let key = seg.key.clone();
    let record_count = seg.records.len();
    let series = match compute_series(&seg, config.pressure_floor) {
        Ok(s) => s,
        Err(e) => {
            diagnostics.push(Diagnostic {
                stage: Stage::Index,
                source: key.to_string(),
                message: e.to_string(),
            });
            let output = RegionOutput {
                key: key.clone(),
                records: seg.records,
                series: Vec::new(),
                rules: Vec::new(),
                curves: Vec::new(),
            };
            return (output, RegionResult { key, record_count, analysis: Err(e.to_string()) });
        }
    };
    let band = band_of(&series.samples, config.window_len).expect("series is non-empty");
    let events = events_from_series(&series.samples, config.delta, config.k);
    let rules = mine_rules(&events, &config.mining_params());
    let curves: Vec<(usize, Vec<(NaiveDateTime, f64)>)> = rules
        .iter()
        .enumerate()
        .map(|(i, r)| (i + 1, confidence_series(&events, &r.shape(), config.step)))
        .collect();

    let mut advisories = detect_strong_waves(&key, &series.samples, &band);
    if let Some((rule_id, curve)) = curves.first() {
        advisories.extend(detect_fishing_zone(&key, curve, config.theta, Some(*rule_id)));
    }
    let top_rule = rules.first().map(|r| (r.label(config.k), r.confidence));

    let analysis = RegionAnalysis {
        samples: series.samples.clone(),
        skipped: series.skipped,
        band,
        top_rule,
        advisories,
    };
    let output = RegionOutput { key: key.clone(), records: seg.records, series: series.samples, rules, curves };
    (output, RegionResult { key, record_count, analysis: Ok(analysis) })
}

fn iso(t: NaiveDateTime) -> String {
    t.format(ISO_FORMAT).to_string()
}

fn parse_iso(s: &str) -> Result<NaiveDateTime, String> {
    NaiveDateTime::parse_from_str(s, ISO_FORMAT).map_err(|e| format!("bad timestamp {s:?}: {e}"))
}

fn full_precision(v: f64) -> String {
    format!("{v:.16e}")
}

fn seconds(d: TimeDelta) -> String {
    let ms = d.num_milliseconds();
    if ms % 1000 == 0 {
        (ms / 1000).to_string()
    } else {
        format!("{}", ms as f64 / 1000.0)
    }
}

pub const RECORDS_HEADER: [&str; 6] = ["region", "observed_at", "level", "temperature", "salinity", "pressure"];
pub const INDEX_HEADER: [&str; 2] = ["observed_at", "n_value"];
pub const CONFIDENCE_HEADER: [&str; 3] = ["observed_at", "rule_id", "confidence"];
pub const RULES_HEADER: [&str; 8] =
    ["rule_id", "antecedent", "consequent", "win_a", "win_c", "lag", "support", "confidence"];

fn write_csv<const N: usize>(header: [&str; N], rows: impl IntoIterator<Item = [String; N]>) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    // Writing into memory cannot fail.
    w.write_record(header).expect("in-memory csv");
    for row in rows {
        w.write_record(&row).expect("in-memory csv");
    }
    String::from_utf8(w.into_inner().expect("in-memory csv")).expect("utf-8 fields")
}

fn read_csv<const N: usize, T>(
    text: &str,
    header: [&str; N],
    row: impl Fn(&csv::StringRecord) -> Result<T, String>,
) -> Result<Vec<T>, String> {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let found = r.headers().map_err(|e| e.to_string())?;
    if found.iter().ne(header) {
        return Err(format!("expected header {}", header.join(",")));
    }
    r.records().map(|rec| row(&rec.map_err(|e| e.to_string())?)).collect()
}

fn field<T: std::str::FromStr>(rec: &csv::StringRecord, i: usize) -> Result<T, String>
where
    T::Err: std::fmt::Display,
{
    let s = &rec[i];
    s.parse().map_err(|e| format!("{s:?}: {e}"))
}

/// Decoded levels, one per line, at their display precision.
pub fn records_csv(records: &[ProfileRecord]) -> String {
    write_csv(
        RECORDS_HEADER,
        records.iter().map(|r| {
            [
                r.region_key.as_ref().map(ToString::to_string).unwrap_or_default(),
                iso(r.observed_at),
                r.level.to_string(),
                format!("{:.3}", r.temperature),
                format!("{:.3}", r.salinity),
                format!("{:.1}", r.pressure),
            ]
        }),
    )
}

pub fn parse_records_csv(text: &str) -> Result<Vec<ProfileRecord>, String> {
    read_csv(text, RECORDS_HEADER, |rec| {
        Ok(ProfileRecord {
            region_key: if rec[0].is_empty() { None } else { Some(field(rec, 0)?) },
            observed_at: parse_iso(&rec[1])?,
            level: field(rec, 2)?,
            temperature: field(rec, 3)?,
            salinity: field(rec, 4)?,
            pressure: field(rec, 5)?,
        })
    })
}

pub fn index_csv(series: &[IndexSample]) -> String {
    write_csv(INDEX_HEADER, series.iter().map(|s| [iso(s.observed_at), full_precision(s.n_value)]))
}

pub fn parse_index_csv(text: &str) -> Result<Vec<IndexSample>, String> {
    read_csv(text, INDEX_HEADER, |rec| {
        Ok(IndexSample { observed_at: parse_iso(&rec[0])?, n_value: field(rec, 1)? })
    })
}

pub fn confidence_csv(curves: &[(usize, Vec<(NaiveDateTime, f64)>)]) -> String {
    write_csv(
        CONFIDENCE_HEADER,
        curves.iter().flat_map(|(rule_id, curve)| {
            curve.iter().map(move |(t, c)| [iso(*t), rule_id.to_string(), full_precision(*c)])
        }),
    )
}

pub fn parse_confidence_csv(text: &str) -> Result<Vec<(NaiveDateTime, usize, f64)>, String> {
    read_csv(text, CONFIDENCE_HEADER, |rec| Ok((parse_iso(&rec[0])?, field(rec, 1)?, field(rec, 2)?)))
}

pub fn rules_csv(rules: &[EpisodeRule], k: usize) -> String {
    write_csv(
        RULES_HEADER,
        rules.iter().enumerate().map(|(i, r)| {
            [
                (i + 1).to_string(),
                episode_label(&r.antecedent, k),
                episode_label(&r.consequent, k),
                seconds(r.win_a),
                seconds(r.win_c),
                seconds(r.lag),
                r.support.to_string(),
                full_precision(r.confidence),
            ]
        }),
    )
}

fn diagnostics_text(diagnostics: &[Diagnostic]) -> String {
    diagnostics.iter().map(|d| format!("{d}\n")).collect()
}

/// Every output file of a run, keyed by file name.
pub fn render_outputs(
    output: &AnalysisOutput,
    config: &AnalysisConfig,
    emit_plots: bool,
) -> BTreeMap<String, String> {
    let mut files = BTreeMap::new();
    for region in &output.regions {
        let key = &region.key;
        files.insert(format!("records_{key}.csv"), records_csv(&region.records));
        files.insert(format!("rules_{key}.csv"), rules_csv(&region.rules, config.k));
        if emit_plots {
            files.insert(format!("index_{key}.csv"), index_csv(&region.series));
            files.insert(format!("confidence_{key}.csv"), confidence_csv(&region.curves));
        }
    }
    files.insert("report.json".into(), output.report.to_json());
    files.insert("report.txt".into(), output.report.render_text());
    files.insert("diagnostics.txt".into(), diagnostics_text(&output.diagnostics));
    files
}

/// Writes `contents` to `path`.
pub fn emit_plot_data(path: &Path, contents: &str) -> Result<(), PipelineError> {
    std::fs::write(path, contents).map_err(|e| PipelineError::Io {
        stage: Stage::Write,
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

pub fn persist_records(records: &[ProfileRecord], path: &Path) -> Result<(), PipelineError> {
    emit_plot_data(path, &records_csv(records))
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub regions: usize,
    pub records: usize,
    pub files: Vec<PathBuf>,
    pub diagnostics: Vec<Diagnostic>,
}

pub fn run(config: &PipelineConfig) -> Result<RunSummary, PipelineError> {
    let mut analysis = config.analysis.clone();
    if let Some(path) = &config.calibration_path {
        analysis.calibration = CalibrationTable::load(path).map_err(|e| match e {
            crate::profile::CalibrationError::Io(io) => PipelineError::Io {
                stage: Stage::Read,
                path: path.clone(),
                message: io.to_string(),
            },
            other => PipelineError::Config(format!("{}: {other}", path.display())),
        })?;
    }
    analysis.validate()?;
    if config.inputs.is_empty() {
        return Err(PipelineError::Config("no input files given".into()));
    }

    let mut sources = Vec::with_capacity(config.inputs.len());
    for path in &config.inputs {
        let text = std::fs::read_to_string(path).map_err(|e| PipelineError::Io {
            stage: Stage::Read,
            path: path.clone(),
            message: e.to_string(),
        })?;
        sources.push((path.display().to_string(), text));
    }

    let output = analyze(&sources, &analysis)?;
    let files = render_outputs(&output, &analysis, config.emit_plots);
    let written = write_tree(&config.output_dir, &files)?;
    Ok(RunSummary {
        regions: output.regions.len(),
        records: output.regions.iter().map(|r| r.records.len()).sum(),
        files: written,
        diagnostics: output.diagnostics,
    })
}

/// Writes all files or, on the first failure, removes what was written.
fn write_tree(dir: &Path, files: &BTreeMap<String, String>) -> Result<Vec<PathBuf>, PipelineError> {
    let created_dir = !dir.exists();
    let io_err = |path: &Path, e: std::io::Error| PipelineError::Io {
        stage: Stage::Write,
        path: path.to_path_buf(),
        message: e.to_string(),
    };
    std::fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;

    let mut written = Vec::with_capacity(files.len());
    for (name, contents) in files {
        let path = dir.join(name);
        if let Err(e) = emit_plot_data(&path, contents) {
            for p in &written {
                let _ = std::fs::remove_file(p);
            }
            if created_dir {
                let _ = std::fs::remove_dir(dir);
            }
            return Err(e);
        }
        written.push(path);
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn at(s: &str) -> NaiveDateTime {
        NaiveDateTime::parse_from_str(s, "%Y-%m-%d %H:%M:%S%.f").unwrap()
    }

    fn record(level: u32) -> ProfileRecord {
        ProfileRecord {
            region_key: Some(RegionKey { platform_id: "02602".into(), lat_cell: -1, lon_cell: 76 }),
            observed_at: at("2003-01-10 12:49:18.5"),
            level,
            temperature: 13.725,
            salinity: 35.134,
            pressure: 199.5,
        }
    }

    #[test]
    fn records_file_shape_and_reload() {
        assert_eq!(records_csv(&[]), format!("{}\n", RECORDS_HEADER.join(",")));
        let one = records_csv(&[record(1)]);
        assert_eq!(one.lines().count(), 2);
        assert_eq!(
            one.lines().nth(1).unwrap(),
            "02602_-1_76,2003-01-10T12:49:18.500,1,13.725,35.134,199.5"
        );
        let recs = vec![record(1), record(2)];
        assert_eq!(parse_records_csv(&records_csv(&recs)).unwrap(), recs);
    }

    #[test]
    fn index_file_is_exact() {
        assert_eq!(index_csv(&[]).lines().count(), 1);
        let series: Vec<IndexSample> = [1.3935828853874583, -486023.6379921, 0.1, 1e-300]
            .iter()
            .map(|&n_value| IndexSample { observed_at: at("2003-01-10 12:49:18"), n_value })
            .collect();
        let text = index_csv(&series);
        assert_eq!(text.lines().count(), 5);
        assert_eq!(parse_index_csv(&text).unwrap(), series);
    }

    #[test]
    fn confidence_file_reloads() {
        let curves = vec![(1, vec![(at("2003-01-10 12:00:00"), 0.0), (at("2003-01-10 13:00:00"), 2.0 / 3.0)])];
        let back = parse_confidence_csv(&confidence_csv(&curves)).unwrap();
        assert_eq!(back[1], (at("2003-01-10 13:00:00"), 1, 2.0 / 3.0));
    }

    #[test]
    fn config_ranges() {
        assert!(AnalysisConfig::default().validate().is_ok());
        let bad = [
            AnalysisConfig { cell_size: 0.0, ..Default::default() },
            AnalysisConfig { window_len: 0, ..Default::default() },
            AnalysisConfig { k: 1, ..Default::default() },
            AnalysisConfig { theta: 0.0, ..Default::default() },
            AnalysisConfig { theta: 1.5, ..Default::default() },
            AnalysisConfig { min_support: 0, ..Default::default() },
            AnalysisConfig { delta: TimeDelta::zero(), ..Default::default() },
            AnalysisConfig { lag: TimeDelta::seconds(-1), ..Default::default() },
            AnalysisConfig { max_len: 0, ..Default::default() },
        ];
        for cfg in bad {
            let err = cfg.validate().unwrap_err();
            assert_eq!(err.exit_code(), 1, "{cfg:?}");
        }
    }

    #[test]
    fn analyze_rejects_garbage() {
        let err = analyze(&[("x".into(), "not a feed".into())], &AnalysisConfig::default()).unwrap_err();
        match err {
            PipelineError::AllRejected { diagnostics } => {
                assert_eq!(diagnostics.len(), 1);
                assert_eq!(diagnostics[0].stage, Stage::Parse);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn zero_pressure_region_gets_diagnostic_row() {
        let feed = "\
02602 29021 02 65 32 K 2 2003-01-10 11:50:18.0 0.691 76.559 0.000 401647210
35 9D 89 3E 00 00
02603 29021 02 65 32 K 2 2003-01-10 11:50:18.0 0.691 76.559 0.000 401647210
35 9D 89 3E 07 CB
";
        let out = analyze(&[("feed".into(), feed.into())], &AnalysisConfig::default()).unwrap();
        assert_eq!(out.report.rows.len(), 2);
        assert!(out.report.rows[0].diagnostic.is_some());
        assert_eq!(out.report.rows[1].sample_count, 1);
        assert_eq!(out.diagnostics[0].stage, Stage::Index);
    }

    #[test]
    fn non_triple_block_is_skipped() {
        let feed = "\
02602 29021 02 65 32 K 2 2003-01-10 11:50:18.0 0.691 76.559 0.000 401647210
35 9D 89 3E
02602 29022 02 65 32 K 2 2003-01-10 12:50:18.0 0.691 76.559 0.000 401647210
35 9D 89 3E 07 CB
";
        let out = analyze(&[("feed".into(), feed.into())], &AnalysisConfig::default()).unwrap();
        assert_eq!(out.regions[0].records.len(), 1);
        assert_eq!(out.diagnostics.len(), 1);
        assert_eq!(out.diagnostics[0].stage, Stage::Decode);
    }
}
