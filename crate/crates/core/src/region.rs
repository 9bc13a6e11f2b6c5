//! Region segmentation by platform and position cell.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::profile::ProfileRecord;
use crate::telemetry::HeaderFields;

pub const DEFAULT_CELL_SIZE: f64 = 1.0;

/// Platform plus the lat/lon grid cell its message fell into.
///
/// Ordering is lexicographic over (platform, lat_cell, lon_cell).
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct RegionKey {
    pub platform_id: String,
    pub lat_cell: i64,
    pub lon_cell: i64,
}

impl fmt::Display for RegionKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}_{}_{}", self.platform_id, self.lat_cell, self.lon_cell)
    }
}

impl std::str::FromStr for RegionKey {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut parts = s.rsplitn(3, '_');
        let (Some(lon), Some(lat), Some(platform)) = (parts.next(), parts.next(), parts.next())
        else {
            return Err(format!("region key {s:?} is not platform_lat_lon"));
        };
        let cell = |t: &str| t.parse::<i64>().map_err(|_| format!("bad cell {t:?} in {s:?}"));
        Ok(RegionKey { platform_id: platform.to_string(), lat_cell: cell(lat)?, lon_cell: cell(lon)? })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionSegment {
    pub key: RegionKey,
    /// Sorted by (observed_at, level); never empty.
    pub records: Vec<ProfileRecord>,
}

/// Maps a header position onto its grid cell. `cell_size` is in degrees
/// and must be positive.
pub fn region_key_of(header: &HeaderFields, cell_size: f64) -> RegionKey {
    assert!(cell_size > 0.0 && cell_size.is_finite(), "cell_size must be positive");
    RegionKey {
        platform_id: header.platform_id.clone(),
        lat_cell: (header.latitude / cell_size).floor() as i64,
        lon_cell: (header.longitude / cell_size).floor() as i64,
    }
}

/// Partitions records into region segments ordered by key. Each record's
/// `region_key` is set to the segment it lands in.
pub fn segment<'a, I>(records: I, cell_size: f64) -> Vec<RegionSegment>
where
    I: IntoIterator<Item = (&'a HeaderFields, ProfileRecord)>,
{
    let mut groups: BTreeMap<RegionKey, Vec<ProfileRecord>> = BTreeMap::new();
    for (header, mut record) in records {
        let key = region_key_of(header, cell_size);
        record.region_key = Some(key.clone());
        groups.entry(key).or_default().push(record);
    }
    groups
        .into_iter()
        .map(|(key, mut records)| {
            // stable: ties keep input order
            records.sort_by_key(|r| (r.observed_at, r.level));
            RegionSegment { key, records }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::telemetry::parse_header;
    use chrono::NaiveDateTime;

    fn header(platform: &str, lat: f64, lon: f64) -> HeaderFields {
        let mut h = parse_header(
            "02602 29021 02 65 32 K 2 2003-01-10 11:50:18.0 0.691 76.559 0.000 401647210",
        )
        .unwrap();
        h.platform_id = platform.to_string();
        h.latitude = lat;
        h.longitude = lon;
        h
    }

    fn rec(at: &str, level: u32, t: f64) -> ProfileRecord {
        ProfileRecord {
            region_key: None,
            observed_at: NaiveDateTime::parse_from_str(at, "%Y-%m-%d %H:%M:%S").unwrap(),
            level,
            temperature: t,
            salinity: 35.0,
            pressure: 100.0,
        }
    }

    fn key(p: &str, lat: i64, lon: i64) -> RegionKey {
        RegionKey { platform_id: p.into(), lat_cell: lat, lon_cell: lon }
    }

    #[test]
    fn keys_use_floor_division() {
        assert_eq!(region_key_of(&header("02602", 0.691, 76.559), 1.0), key("02602", 0, 76));
        assert_eq!(region_key_of(&header("02602", 0.0, 0.0), 1.0), key("02602", 0, 0));
        assert_eq!(region_key_of(&header("02602", -0.5, 76.559), 1.0), key("02602", -1, 76));
        assert_eq!(region_key_of(&header("02602", 0.691, 76.559), 0.5), key("02602", 1, 153));
    }

    #[test]
    fn key_display_parses_back() {
        let k = key("02602", -1, 76);
        assert_eq!(k.to_string(), "02602_-1_76");
        assert_eq!(k.to_string().parse::<RegionKey>().unwrap(), k);
        assert!("nope".parse::<RegionKey>().is_err());
    }

    #[test]
    fn drifting_positions_share_a_cell() {
        let a = header("02602", 0.691, 76.559);
        let b = header("02602", 0.706, 76.542);
        let segs = segment(
            vec![(&a, rec("2003-01-10 12:49:18", 1, 1.0)), (&b, rec("2003-01-10 14:28:18", 1, 2.0))],
            1.0,
        );
        assert_eq!(segs.len(), 1);
        assert_eq!(segs[0].records.len(), 2);
        assert!(segs[0].records.iter().all(|r| r.region_key.as_ref() == Some(&segs[0].key)));
    }

    #[test]
    fn empty_and_multi_platform() {
        assert!(segment(Vec::<(&HeaderFields, ProfileRecord)>::new(), 1.0).is_empty());
        let a = header("02603", 0.7, 76.5);
        let b = header("02602", 0.7, 76.5);
        let segs = segment(
            vec![(&a, rec("2003-01-10 12:00:00", 1, 1.0)), (&b, rec("2003-01-10 12:00:00", 1, 1.0))],
            1.0,
        );
        assert_eq!(segs.iter().map(|s| s.key.platform_id.as_str()).collect::<Vec<_>>(), ["02602", "02603"]);
    }

    #[test]
    fn records_sorted_and_stable() {
        let h = header("02602", 0.7, 76.5);
        let input = vec![
            (&h, rec("2003-01-10 13:00:00", 1, 1.0)),
            (&h, rec("2003-01-10 12:00:00", 2, 2.0)),
            (&h, rec("2003-01-10 12:00:00", 1, 3.0)),
            (&h, rec("2003-01-10 12:00:00", 1, 4.0)),
        ];
        let segs = segment(input, 1.0);
        let temps: Vec<f64> = segs[0].records.iter().map(|r| r.temperature).collect();
        assert_eq!(temps, vec![3.0, 4.0, 2.0, 1.0]);
    }
}
