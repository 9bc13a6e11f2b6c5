//! Reference implementations used only by tests.
//!
//! Nothing here calls into the code paths it is used to check: the index
//! oracle works in exact rational arithmetic and the rule oracle enumerates
//! every index combination of every episode.

#![allow(dead_code)]

use chrono::{NaiveDateTime, TimeDelta};
use num::bigint::BigInt;
use num::rational::BigRational;
use num::ToPrimitive;
use rand::rngs::StdRng;
use rand::Rng;

use oceanmine::episode::{segment_events, Event, MiningParams, Symbol};

fn exact(v: f64) -> BigRational {
    BigRational::from_float(v).expect("finite input")
}

fn dec(mantissa: i64, exp10: i32) -> BigRational {
    let ten = BigInt::from(10);
    let m = BigRational::from_integer(BigInt::from(mantissa));
    if exp10 >= 0 {
        m * BigRational::from_integer(num::pow(ten, exp10 as usize))
    } else {
        m / BigRational::from_integer(num::pow(ten, (-exp10) as usize))
    }
}

/// The oscillation index evaluated exactly over the rationals, with the
/// decimal coefficients taken at face value, then rounded once to f64.
pub fn index_oracle(t: f64, s: f64, p: f64) -> f64 {
    let (t, s, p) = (exact(t), exact(s), exact(p));
    let p2 = &p * &p;
    let p4 = &p2 * &p2;
    let n = dec(13247, -4) - dec(25, -7) * &t * &t
        + &s * (dec(2, -4) - dec(8, -7) * &t)
        + dec(3300, 0) / &p2
        - dec(32, 6) / &p4;
    n.to_f64().expect("representable")
}

/// Rule with everything the oracle and the miner must agree on.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleRule {
    pub antecedent: Vec<Symbol>,
    pub consequent: Vec<Symbol>,
    pub support: usize,
    pub antecedent_count: usize,
    pub confidence: f64,
}

/// Every strictly increasing index tuple of `event` spelling `episode`,
/// reported as (start time, end time).
fn all_occurrences(event: &Event, episode: &[Symbol]) -> Vec<(NaiveDateTime, NaiveDateTime)> {
    fn go(
        syms: &[(NaiveDateTime, Symbol)],
        episode: &[Symbol],
        from: usize,
        chosen: &mut Vec<usize>,
        out: &mut Vec<(NaiveDateTime, NaiveDateTime)>,
    ) {
        if chosen.len() == episode.len() {
            out.push((syms[chosen[0]].0, syms[*chosen.last().unwrap()].0));
            return;
        }
        for i in from..syms.len() {
            chosen.push(i);
            if syms[i].1 == episode[chosen.len() - 1] {
                go(syms, episode, i + 1, chosen, out);
            }
            chosen.pop();
        }
    }
    let mut out = Vec::new();
    go(&event.symbols, episode, 0, &mut Vec::new(), &mut out);
    out
}

fn all_episodes(alphabet: usize, max_len: usize) -> Vec<Vec<Symbol>> {
    let mut out: Vec<Vec<Symbol>> = Vec::new();
    let mut level: Vec<Vec<Symbol>> = vec![Vec::new()];
    for _ in 0..max_len {
        let mut next = Vec::new();
        for e in &level {
            for s in 0..alphabet {
                let mut e2 = e.clone();
                e2.push(Symbol(s as u8));
                next.push(e2);
            }
        }
        out.extend(next.iter().cloned());
        level = next;
    }
    out
}

/// Brute-force rule list over all episodes of length `1..=max_len` on
/// `alphabet` symbols, sorted by confidence desc, support desc, antecedent,
/// consequent.
pub fn brute_force_rules(events: &[Event], alphabet: usize, params: &MiningParams) -> Vec<OracleRule> {
    let episodes = all_episodes(alphabet, params.max_len);
    // occurrences[e][ev] -> list of (start, end)
    let occurrences: Vec<Vec<Vec<(NaiveDateTime, NaiveDateTime)>>> = episodes
        .iter()
        .map(|ep| events.iter().map(|ev| all_occurrences(ev, ep)).collect())
        .collect();

    let mut rules = Vec::new();
    for (ai, a) in episodes.iter().enumerate() {
        let ante_ends: Vec<Vec<NaiveDateTime>> = occurrences[ai]
            .iter()
            .map(|occ| occ.iter().filter(|(s, e)| *e - *s <= params.win_a).map(|(_, e)| *e).collect())
            .collect();
        let antecedent_count = ante_ends.iter().filter(|v| !v.is_empty()).count();
        for (ci, c) in episodes.iter().enumerate() {
            let mut support = 0;
            for (ev, ends) in ante_ends.iter().enumerate() {
                let starts: Vec<NaiveDateTime> = occurrences[ci][ev]
                    .iter()
                    .filter(|(s, e)| *e - *s <= params.win_c)
                    .map(|(s, _)| *s)
                    .collect();
                let holds = ends
                    .iter()
                    .any(|&e| starts.iter().any(|&s| s > e && s <= e + params.lag));
                if holds {
                    support += 1;
                }
            }
            if support >= params.min_support {
                let confidence = if antecedent_count == 0 {
                    0.0
                } else {
                    support as f64 / antecedent_count as f64
                };
                rules.push(OracleRule {
                    antecedent: a.clone(),
                    consequent: c.clone(),
                    support,
                    antecedent_count,
                    confidence,
                });
            }
        }
    }
    rules.sort_by(|x, y| {
        y.confidence
            .partial_cmp(&x.confidence)
            .unwrap()
            .then(y.support.cmp(&x.support))
            .then(x.antecedent.cmp(&y.antecedent))
            .then(x.consequent.cmp(&y.consequent))
    });
    rules
}

pub fn base_time() -> NaiveDateTime {
    chrono::DateTime::from_timestamp(1_042_200_000, 0).unwrap().naive_utc()
}

/// A random mining instance: at most 20 samples, at most 3 symbols,
/// episodes up to length 3.
#[derive(Debug, Clone)]
pub struct MiningInstance {
    pub events: Vec<Event>,
    pub alphabet: usize,
    pub params: MiningParams,
    pub samples: usize,
}

pub fn random_instance(rng: &mut StdRng) -> MiningInstance {
    let samples = rng.gen_range(1..=20);
    let alphabet = rng.gen_range(1..=3);
    let mut t = base_time();
    let mut symbolized = Vec::with_capacity(samples);
    for _ in 0..samples {
        // ties, short gaps and event-breaking gaps
        let gap = [0, 0, 1, 1, 2, 3, 10][rng.gen_range(0..7)];
        t += TimeDelta::seconds(gap);
        symbolized.push((t, Symbol(rng.gen_range(0..alphabet) as u8)));
    }
    let delta = TimeDelta::seconds(rng.gen_range(2..=5));
    let params = MiningParams {
        min_support: rng.gen_range(1..=3),
        max_len: rng.gen_range(1..=3),
        win_a: TimeDelta::seconds(rng.gen_range(0..=3)),
        win_c: TimeDelta::seconds(rng.gen_range(0..=3)),
        lag: TimeDelta::seconds(rng.gen_range(0..=4)),
    };
    MiningInstance { events: segment_events(&symbolized, delta), alphabet, params, samples }
}
