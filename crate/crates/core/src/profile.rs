//! Count-to-physical calibration of profile levels.

use std::path::Path;

use chrono::NaiveDateTime;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::region::RegionKey;
use crate::telemetry::MessageBlock;

#[derive(Debug, Error, PartialEq)]
pub enum DecodeError {
    #[error("lines {first}-{last}: {count} words is not a whole number of (temperature, salinity, pressure) triples")]
    NonTripleWordCount { count: usize, first: usize, last: usize },
}

#[derive(Debug, Error)]
pub enum CalibrationError {
    #[error("cannot read calibration file: {0}")]
    Io(#[from] std::io::Error),
    #[error("cannot parse calibration file: {0}")]
    Syntax(#[from] toml::de::Error),
    #[error("{0} must be a positive finite number")]
    BadResolution(&'static str),
    #[error("{0} must be finite")]
    BadOffset(&'static str),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Channel {
    Temperature,
    Salinity,
    Pressure,
}

impl Channel {
    pub const ALL: [Channel; 3] = [Channel::Temperature, Channel::Salinity, Channel::Pressure];
}

/// Linear calibration `offset + count * resolution` for each channel.
///
/// Loadable from a `key = value` file whose keys are the field names;
/// missing keys keep their default.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CalibrationTable {
    pub temp_offset: f64,
    pub temp_resolution: f64,
    pub sal_offset: f64,
    pub sal_resolution: f64,
    pub pres_offset: f64,
    pub pres_resolution: f64,
}

impl Default for CalibrationTable {
    fn default() -> Self {
        Self {
            temp_offset: -5.0,
            temp_resolution: 0.001,
            sal_offset: 0.0,
            sal_resolution: 0.001,
            pres_offset: 0.0,
            pres_resolution: 0.1,
        }
    }
}

impl CalibrationTable {
    pub fn from_config_str(text: &str) -> Result<Self, CalibrationError> {
        let table: CalibrationTable = toml::from_str(text)?;
        table.validate()?;
        Ok(table)
    }

    pub fn load(path: &Path) -> Result<Self, CalibrationError> {
        Self::from_config_str(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<(), CalibrationError> {
        let resolutions = [
            ("temp_resolution", self.temp_resolution),
            ("sal_resolution", self.sal_resolution),
            ("pres_resolution", self.pres_resolution),
        ];
        for (name, r) in resolutions {
            if !(r.is_finite() && r > 0.0) {
                return Err(CalibrationError::BadResolution(name));
            }
        }
        let offsets = [
            ("temp_offset", self.temp_offset),
            ("sal_offset", self.sal_offset),
            ("pres_offset", self.pres_offset),
        ];
        for (name, o) in offsets {
            if !o.is_finite() {
                return Err(CalibrationError::BadOffset(name));
            }
        }
        Ok(())
    }

    /// (offset, resolution) of a channel.
    pub fn coefficients(&self, channel: Channel) -> (f64, f64) {
        match channel {
            Channel::Temperature => (self.temp_offset, self.temp_resolution),
            Channel::Salinity => (self.sal_offset, self.sal_resolution),
            Channel::Pressure => (self.pres_offset, self.pres_resolution),
        }
    }
}

/// One calibrated level of a profile.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileRecord {
    /// Filled in by region segmentation.
    pub region_key: Option<RegionKey>,
    pub observed_at: NaiveDateTime,
    /// 1-based position within its block.
    pub level: u32,
    pub temperature: f64,
    pub salinity: f64,
    pub pressure: f64,
}

pub fn decode_word(word: u16, channel: Channel, cal: &CalibrationTable) -> f64 {
    let (offset, resolution) = cal.coefficients(channel);
    offset + f64::from(word) * resolution
}

/// Inverse of [`decode_word`]: nearest count for a physical value, saturating
/// at the 16-bit range.
pub fn quantize(value: f64, channel: Channel, cal: &CalibrationTable) -> u16 {
    let (offset, resolution) = cal.coefficients(channel);
    ((value - offset) / resolution).round().clamp(0.0, f64::from(u16::MAX)) as u16
}

fn round_to(value: f64, decimals: i32) -> f64 {
    let scale = 10f64.powi(decimals);
    // f64::round is half-away-from-zero.
    (value * scale).round() / scale
}

/// Rounds temperature and salinity to 3 decimals and pressure to 1.
pub fn apply_precision(mut record: ProfileRecord) -> ProfileRecord {
    record.temperature = round_to(record.temperature, 3);
    record.salinity = round_to(record.salinity, 3);
    record.pressure = round_to(record.pressure, 1);
    record
}

/// Decodes a block's words as consecutive (temperature, salinity, pressure)
/// triples.
pub fn decode_block(
    block: &MessageBlock,
    cal: &CalibrationTable,
) -> Result<Vec<ProfileRecord>, DecodeError> {
    if !block.words.len().is_multiple_of(3) {
        return Err(DecodeError::NonTripleWordCount {
            count: block.words.len(),
            first: block.source_line_span.0,
            last: block.source_line_span.1,
        });
    }
    let observed_at = block.effective_time();
    Ok(block
        .words
        .chunks_exact(3)
        .zip(1u32..)
        .map(|(triple, level)| {
            apply_precision(ProfileRecord {
                region_key: None,
                observed_at,
                level,
                temperature: decode_word(triple[0], Channel::Temperature, cal),
                salinity: decode_word(triple[1], Channel::Salinity, cal),
                pressure: decode_word(triple[2], Channel::Pressure, cal),
            })
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::telemetry::parse_stream;
    use proptest::prelude::*;

    fn record(t: f64, s: f64, p: f64) -> ProfileRecord {
        ProfileRecord {
            region_key: None,
            observed_at: NaiveDateTime::default(),
            level: 1,
            temperature: t,
            salinity: s,
            pressure: p,
        }
    }

    fn block_with(words: Vec<u16>) -> MessageBlock {
        let text = "02602 32134 73 32 K 2 2003-01-10 14:34:18 0.706 76.542 0.000 401647210";
        let mut b = parse_stream(text).unwrap().remove(0);
        b.words = words;
        b
    }

    #[test]
    fn decode_word_boundaries() {
        let cal = CalibrationTable::default();
        assert_eq!(decode_word(0, Channel::Temperature, &cal), -5.0);
        assert!((decode_word(65535, Channel::Temperature, &cal) - 60.535).abs() < 1e-12);
        assert!((decode_word(13725, Channel::Temperature, &cal) - 8.725).abs() < 1e-12);
    }

    #[test]
    fn decode_block_triples() {
        let cal = CalibrationTable::default();
        assert_eq!(decode_block(&block_with(vec![]), &cal).unwrap(), vec![]);
        assert!(matches!(
            decode_block(&block_with(vec![1, 2, 3, 4]), &cal),
            Err(DecodeError::NonTripleWordCount { count: 4, .. })
        ));
        let recs = decode_block(&block_with(vec![18725, 40134, 1995]), &cal).unwrap();
        assert_eq!(recs.len(), 1);
        assert_eq!(recs[0].level, 1);
        assert_eq!(recs[0].temperature, 13.725);
        assert_eq!(recs[0].salinity, 40.134);
        assert_eq!(recs[0].pressure, 199.5);
    }

    #[test]
    fn decode_block_uses_block_time_and_levels() {
        let cal = CalibrationTable::default();
        let mut b = block_with(vec![0, 0, 0, 1, 1, 1]);
        let t = NaiveDateTime::parse_from_str("2003-01-10 12:49:18", "%Y-%m-%d %H:%M:%S").unwrap();
        b.block_time = Some(t);
        let recs = decode_block(&b, &cal).unwrap();
        assert_eq!(recs.iter().map(|r| r.level).collect::<Vec<_>>(), vec![1, 2]);
        assert!(recs.iter().all(|r| r.observed_at == t));
    }

    #[test]
    fn precision_rounds_half_away_from_zero() {
        assert_eq!(apply_precision(record(13.7254999, 0.0, 0.0)).temperature, 13.725);
        assert_eq!(apply_precision(record(0.0, 0.0, 199.55)).pressure, 199.6);
        assert_eq!(apply_precision(record(-0.0005, 0.0, 0.0)).temperature, -0.001);
    }

    #[test]
    fn calibration_config_parsing() {
        let cal = CalibrationTable::from_config_str("temp_offset = 0.0\n# zero based\n").unwrap();
        assert_eq!(cal.temp_offset, 0.0);
        assert_eq!(cal.pres_resolution, 0.1);
        assert!(matches!(
            CalibrationTable::from_config_str("sal_resolution = 0.0"),
            Err(CalibrationError::BadResolution("sal_resolution"))
        ));
        assert!(CalibrationTable::from_config_str("bogus = 1.0").is_err());
    }

    proptest! {
        #[test]
        fn precision_is_idempotent(t in -5.0f64..60.0, s in 0.0f64..65.0, p in 0.0f64..6553.5) {
            let once = apply_precision(record(t, s, p));
            prop_assert_eq!(apply_precision(once.clone()), once);
        }

        #[test]
        fn decode_is_monotone(a in any::<u16>(), b in any::<u16>()) {
            let cal = CalibrationTable::default();
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            for ch in Channel::ALL {
                prop_assert!(decode_word(lo, ch, &cal) <= decode_word(hi, ch, &cal));
                if lo < hi {
                    prop_assert!(decode_word(lo, ch, &cal) < decode_word(hi, ch, &cal));
                }
            }
        }
    }
}
