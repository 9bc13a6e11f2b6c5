//! Time-lagged serial episode rules over a discretized index series.
//!
//! A region's index series is cut into events wherever two consecutive
//! samples are more than `delta` apart, and each sample is replaced by a
//! quantile class. A rule `A[win_a] => C[win_c]` holds in an event when the
//! serial episode `A` occurs within a span of at most `win_a`, and `C`
//! occurs within a span of at most `win_c` starting in `(end_A, end_A + lag]`.
//!
//! Support counts events in which the rule holds (once per event).
//! Confidence divides that by the number of events containing `A` at all.

use std::cmp::Ordering;
use std::collections::BTreeSet;
use std::fmt;

use chrono::{NaiveDateTime, TimeDelta};
use serde::{Deserialize, Serialize};

use crate::index::IndexSample;

pub const DEFAULT_CLASSES: usize = 3;
pub const DEFAULT_MAX_LEN: usize = 2;
pub const DEFAULT_MIN_SUPPORT: usize = 2;
pub const DEFAULT_DELTA_SECS: i64 = 3600;

/// A discretized index class in `0..k`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Symbol(pub u8);

impl Symbol {
    /// LOW/MID/HIGH for three classes, `C<id>` otherwise.
    pub fn label(self, k: usize) -> String {
        match (k, self.0) {
            (3, 0) => "LOW".into(),
            (3, 1) => "MID".into(),
            (3, 2) => "HIGH".into(),
            (_, id) => format!("C{id}"),
        }
    }
}

pub fn episode_label(episode: &[Symbol], k: usize) -> String {
    episode.iter().map(|s| s.label(k)).collect::<Vec<_>>().join("-")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub start: NaiveDateTime,
    pub symbols: Vec<(NaiveDateTime, Symbol)>,
}

impl Event {
    pub fn end(&self) -> NaiveDateTime {
        self.symbols.last().map_or(self.start, |(t, _)| *t)
    }
}

/// The time-independent part of a rule.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RuleShape {
    pub antecedent: Vec<Symbol>,
    pub consequent: Vec<Symbol>,
    pub win_a: TimeDelta,
    pub win_c: TimeDelta,
    pub lag: TimeDelta,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRule {
    pub antecedent: Vec<Symbol>,
    pub consequent: Vec<Symbol>,
    pub win_a: TimeDelta,
    pub win_c: TimeDelta,
    pub lag: TimeDelta,
    pub support: usize,
    /// Events containing the antecedent within `win_a`.
    pub antecedent_count: usize,
    pub confidence: f64,
}

impl EpisodeRule {
    pub fn shape(&self) -> RuleShape {
        RuleShape {
            antecedent: self.antecedent.clone(),
            consequent: self.consequent.clone(),
            win_a: self.win_a,
            win_c: self.win_c,
            lag: self.lag,
        }
    }

    pub fn label(&self, k: usize) -> String {
        format!("{}=>{}", episode_label(&self.antecedent, k), episode_label(&self.consequent, k))
    }
}

/// Confidence, desc; support, desc; then antecedent and consequent.
pub fn rule_order(a: &EpisodeRule, b: &EpisodeRule) -> Ordering {
    b.confidence
        .total_cmp(&a.confidence)
        .then(b.support.cmp(&a.support))
        .then_with(|| a.antecedent.cmp(&b.antecedent))
        .then_with(|| a.consequent.cmp(&b.consequent))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Confidence {
    pub value: f64,
    pub support: usize,
    pub antecedent_count: usize,
}

impl Confidence {
    /// Antecedent never occurs; the rule says nothing.
    pub fn inapplicable(&self) -> bool {
        self.antecedent_count == 0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MiningParams {
    pub min_support: usize,
    pub max_len: usize,
    pub win_a: TimeDelta,
    pub win_c: TimeDelta,
    pub lag: TimeDelta,
}

impl Default for MiningParams {
    fn default() -> Self {
        let delta = TimeDelta::seconds(DEFAULT_DELTA_SECS);
        Self {
            min_support: DEFAULT_MIN_SUPPORT,
            max_len: DEFAULT_MAX_LEN,
            win_a: TimeDelta::zero(),
            win_c: TimeDelta::zero(),
            lag: delta,
        }
    }
}

pub trait Timestamped {
    fn timestamp(&self) -> NaiveDateTime;
}

impl Timestamped for IndexSample {
    fn timestamp(&self) -> NaiveDateTime {
        self.observed_at
    }
}

impl<T> Timestamped for (NaiveDateTime, T) {
    fn timestamp(&self) -> NaiveDateTime {
        self.0
    }
}

/// Splits a time-ordered sequence into maximal runs whose consecutive gaps
/// are at most `delta`.
pub fn split_by_gap<T: Timestamped + Clone>(items: &[T], delta: TimeDelta) -> Vec<Vec<T>> {
    let mut runs: Vec<Vec<T>> = Vec::new();
    for item in items {
        match runs.last_mut() {
            Some(run) if item.timestamp() - run.last().unwrap().timestamp() <= delta => {
                run.push(item.clone())
            }
            _ => runs.push(vec![item.clone()]),
        }
    }
    runs
}

pub fn segment_events(symbols: &[(NaiveDateTime, Symbol)], delta: TimeDelta) -> Vec<Event> {
    split_by_gap(symbols, delta)
        .into_iter()
        .map(|run| Event { start: run[0].0, symbols: run })
        .collect()
}

/// Maps each sample to its k-quantile class.
///
/// Class boundaries are the lower empirical quantiles `sorted[j * n / k]`
/// for `j = 1..k`; a sample's class is the number of boundaries at or below
/// it. Boundaries equal to the series minimum are dropped, so a constant
/// series maps entirely to class 0.
pub fn discretize(series: &[IndexSample], k: usize) -> Vec<(NaiveDateTime, Symbol)> {
    assert!((2..=usize::from(u8::MAX)).contains(&k), "class count must be in 2..=255");
    if series.is_empty() {
        return Vec::new();
    }
    let mut sorted: Vec<f64> = series.iter().map(|s| s.n_value).collect();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let min = sorted[0];
    let bounds: Vec<f64> =
        (1..k).map(|j| sorted[j * n / k]).filter(|&b| b > min).collect();
    series
        .iter()
        .map(|s| {
            let class = bounds.iter().filter(|&&b| b <= s.n_value).count();
            (s.observed_at, Symbol(class as u8))
        })
        .collect()
}

/// Discretizes the whole series, then cuts it into events.
pub fn events_from_series(series: &[IndexSample], delta: TimeDelta, k: usize) -> Vec<Event> {
    segment_events(&discretize(series, k), delta)
}

/// End times of the occurrences of `episode` with span at most `window`.
///
/// For a fixed end index the latest possible start comes from matching the
/// episode backwards greedily, which gives the tightest span.
fn occurrence_ends(event: &Event, episode: &[Symbol], window: TimeDelta) -> Vec<NaiveDateTime> {
    let syms = &event.symbols;
    let Some((&last, rest)) = episode.split_last() else {
        return Vec::new();
    };
    let mut ends = Vec::new();
    for end in 0..syms.len() {
        if syms[end].1 != last {
            continue;
        }
        let mut pos = end;
        let mut matched = true;
        for &want in rest.iter().rev() {
            match syms[..pos].iter().rposition(|(_, s)| *s == want) {
                Some(p) => pos = p,
                None => {
                    matched = false;
                    break;
                }
            }
        }
        if matched && syms[end].0 - syms[pos].0 <= window {
            ends.push(syms[end].0);
        }
    }
    ends
}

/// Start times of the occurrences of `episode` with span at most `window`,
/// using forward greedy matching.
fn occurrence_starts(event: &Event, episode: &[Symbol], window: TimeDelta) -> Vec<NaiveDateTime> {
    let syms = &event.symbols;
    let Some((&first, rest)) = episode.split_first() else {
        return Vec::new();
    };
    let mut starts = Vec::new();
    for start in 0..syms.len() {
        if syms[start].1 != first {
            continue;
        }
        let mut pos = start;
        let mut matched = true;
        for &want in rest {
            match syms[pos + 1..].iter().position(|(_, s)| *s == want) {
                Some(off) => pos += off + 1,
                None => {
                    matched = false;
                    break;
                }
            }
        }
        if matched && syms[pos].0 - syms[start].0 <= window {
            starts.push(syms[start].0);
        }
    }
    starts
}

fn contains_episode(event: &Event, episode: &[Symbol], window: TimeDelta) -> bool {
    !occurrence_ends(event, episode, window).is_empty()
}

fn rule_holds(event: &Event, shape: &RuleShape) -> bool {
    let ends = occurrence_ends(event, &shape.antecedent, shape.win_a);
    if ends.is_empty() {
        return false;
    }
    let starts = occurrence_starts(event, &shape.consequent, shape.win_c);
    ends.iter().any(|&e| starts.iter().any(|&s| s > e && s - e <= shape.lag))
}

/// Number of events containing `episode` within a span of `window`.
pub fn episode_support(events: &[Event], episode: &[Symbol], window: TimeDelta) -> usize {
    events.iter().filter(|e| contains_episode(e, episode, window)).count()
}

pub fn support_of(shape: &RuleShape, events: &[Event]) -> usize {
    events.iter().filter(|e| rule_holds(e, shape)).count()
}

fn ratio(support: usize, antecedent_count: usize) -> f64 {
    if antecedent_count == 0 {
        0.0
    } else {
        support as f64 / antecedent_count as f64
    }
}

pub fn confidence_of(shape: &RuleShape, events: &[Event]) -> Confidence {
    let antecedent_count = episode_support(events, &shape.antecedent, shape.win_a);
    let support = support_of(shape, events);
    Confidence { value: ratio(support, antecedent_count), support, antecedent_count }
}

/// Level-wise search for serial episodes of length `1..=max_len` with
/// support at least `min_support`. Length-n candidates extend a frequent
/// length-(n-1) episode by a frequent symbol and are kept only when their
/// length-(n-1) suffix is frequent too.
pub fn frequent_episodes(
    events: &[Event],
    min_support: usize,
    max_len: usize,
    window: TimeDelta,
) -> Vec<(Vec<Symbol>, usize)> {
    let alphabet: BTreeSet<Symbol> =
        events.iter().flat_map(|e| e.symbols.iter().map(|(_, s)| *s)).collect();

    let mut out = Vec::new();
    let mut level: Vec<Vec<Symbol>> = Vec::new();
    for &sym in &alphabet {
        let support = episode_support(events, &[sym], window);
        if support >= min_support {
            level.push(vec![sym]);
            out.push((vec![sym], support));
        }
    }
    let frequent_symbols: Vec<Symbol> = level.iter().map(|e| e[0]).collect();

    for _ in 2..=max_len {
        if level.is_empty() {
            break;
        }
        let known: BTreeSet<&[Symbol]> = level.iter().map(Vec::as_slice).collect();
        let mut next = Vec::new();
        for prefix in &level {
            for &sym in &frequent_symbols {
                let mut candidate = prefix.clone();
                candidate.push(sym);
                if !known.contains(&candidate[1..]) {
                    continue;
                }
                let support = episode_support(events, &candidate, window);
                if support >= min_support {
                    out.push((candidate.clone(), support));
                    next.push(candidate);
                }
            }
        }
        level = next;
    }
    out
}

/// Every rule between frequent episodes whose support reaches
/// `min_support`, sorted by [`rule_order`].
pub fn mine_rules(events: &[Event], params: &MiningParams) -> Vec<EpisodeRule> {
    assert!(params.min_support >= 1 && params.max_len >= 1);
    let antecedents = frequent_episodes(events, params.min_support, params.max_len, params.win_a);
    let consequents = if params.win_c == params.win_a {
        antecedents.clone()
    } else {
        frequent_episodes(events, params.min_support, params.max_len, params.win_c)
    };

    let mut rules = Vec::new();
    for (antecedent, antecedent_count) in &antecedents {
        for (consequent, _) in &consequents {
            let shape = RuleShape {
                antecedent: antecedent.clone(),
                consequent: consequent.clone(),
                win_a: params.win_a,
                win_c: params.win_c,
                lag: params.lag,
            };
            let support = support_of(&shape, events);
            if support >= params.min_support {
                rules.push(EpisodeRule {
                    antecedent: shape.antecedent,
                    consequent: shape.consequent,
                    win_a: shape.win_a,
                    win_c: shape.win_c,
                    lag: shape.lag,
                    support,
                    antecedent_count: *antecedent_count,
                    confidence: ratio(support, *antecedent_count),
                });
            }
        }
    }
    rules.sort_by(rule_order);
    rules
}

fn align_down(t: NaiveDateTime, step_ms: i64) -> i64 {
    t.and_utc().timestamp_millis().div_euclid(step_ms) * step_ms
}

fn align_up(t: NaiveDateTime, step_ms: i64) -> i64 {
    let ms = t.and_utc().timestamp_millis();
    -((-ms).div_euclid(step_ms) * step_ms)
}

/// Cumulative confidence of one rule on a grid of step-aligned times
/// covering the events, counting at each time only events that started at
/// or before it.
pub fn confidence_series(
    events: &[Event],
    shape: &RuleShape,
    step: TimeDelta,
) -> Vec<(NaiveDateTime, f64)> {
    let step_ms = step.num_milliseconds();
    assert!(step_ms > 0, "step must be positive");
    let (Some(first), Some(last)) =
        (events.iter().map(|e| e.start).min(), events.iter().map(Event::end).max())
    else {
        return Vec::new();
    };
    let per_event: Vec<(NaiveDateTime, bool, bool)> = events
        .iter()
        .map(|e| (e.start, contains_episode(e, &shape.antecedent, shape.win_a), rule_holds(e, shape)))
        .collect();

    let (from, to) = (align_down(first, step_ms), align_up(last, step_ms));
    (0..)
        .map(|i| from + i * step_ms)
        .take_while(|&ms| ms <= to)
        .map(|ms| {
            let t = chrono::DateTime::from_timestamp_millis(ms)
                .expect("grid time in range")
                .naive_utc();
            let (mut support, mut count) = (0, 0);
            for &(start, has_antecedent, holds) in &per_event {
                if start <= t {
                    count += usize::from(has_antecedent);
                    support += usize::from(holds);
                }
            }
            (t, ratio(support, count))
        })
        .collect()
}

impl fmt::Display for Symbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "C{}", self.0)
    }
}
