//! Granular UTC timestamps.
//!
//! A [`Timestamp`] is an instant truncated to the start of its granularity
//! period, so `2023-01` (month) is stored as `2023-01-01T00:00Z`. The compact
//! textual form doubles as the wire and canonical serialization:
//!
//! | granularity | text               |
//! |-------------|--------------------|
//! | year        | `2023`             |
//! | month       | `2023-06`          |
//! | day         | `2023-06-15`       |
//! | hour        | `2023-06-15T09`    |
//! | minute      | `2023-06-15T09:30` |
//! | unknown     | `unknown`          |
//!
//! Parsing additionally accepts full RFC 3339 instants (with any offset),
//! which are normalized to UTC at minute granularity.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use chrono::{DateTime, Datelike, Duration, NaiveDate, NaiveDateTime, TimeZone, Timelike, Utc};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::MemoryError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Granularity {
    Year,
    Month,
    Day,
    Hour,
    Minute,
    Unknown,
}

impl Granularity {
    /// Larger is finer. `Unknown` has no precision at all.
    fn precision(self) -> u8 {
        match self {
            Granularity::Unknown => 0,
            Granularity::Year => 1,
            Granularity::Month => 2,
            Granularity::Day => 3,
            Granularity::Hour => 4,
            Granularity::Minute => 5,
        }
    }

    pub fn coarser(self, other: Granularity) -> Granularity {
        if self.precision() <= other.precision() {
            self
        } else {
            other
        }
    }

    pub fn is_finer_or_equal(self, other: Granularity) -> bool {
        self.precision() >= other.precision()
    }
}

impl fmt::Display for Granularity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Granularity::Year => "year",
            Granularity::Month => "month",
            Granularity::Day => "day",
            Granularity::Hour => "hour",
            Granularity::Minute => "minute",
            Granularity::Unknown => "unknown",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TemporalRelation {
    Before,
    After,
    Concurrent,
    Unknown,
}

impl TemporalRelation {
    pub fn inverse(self) -> Self {
        match self {
            TemporalRelation::Before => TemporalRelation::After,
            TemporalRelation::After => TemporalRelation::Before,
            other => other,
        }
    }
}

impl fmt::Display for TemporalRelation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            TemporalRelation::Before => "before",
            TemporalRelation::After => "after",
            TemporalRelation::Concurrent => "concurrent",
            TemporalRelation::Unknown => "unknown",
        };
        f.write_str(s)
    }
}

impl FromStr for TemporalRelation {
    type Err = MemoryError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "before" => Ok(TemporalRelation::Before),
            "after" => Ok(TemporalRelation::After),
            "concurrent" => Ok(TemporalRelation::Concurrent),
            "unknown" => Ok(TemporalRelation::Unknown),
            other => Err(MemoryError::BadTimestamp(other.to_string())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Timestamp {
    instant: DateTime<Utc>,
    granularity: Granularity,
}

impl Timestamp {
    pub fn unknown() -> Self {
        Timestamp {
            instant: DateTime::<Utc>::UNIX_EPOCH,
            granularity: Granularity::Unknown,
        }
    }

    /// Builds a timestamp, truncating `instant` to the start of its period.
    pub fn new(instant: DateTime<Utc>, granularity: Granularity) -> Self {
        if granularity == Granularity::Unknown {
            return Timestamp::unknown();
        }
        Timestamp {
            instant: truncate(instant, granularity),
            granularity,
        }
    }

    pub fn year(year: i32) -> Self {
        Self::ymd_hm(year, 1, 1, 0, 0, Granularity::Year)
    }

    pub fn month(year: i32, month: u32) -> Self {
        Self::ymd_hm(year, month, 1, 0, 0, Granularity::Month)
    }

    pub fn day(year: i32, month: u32, day: u32) -> Self {
        Self::ymd_hm(year, month, day, 0, 0, Granularity::Day)
    }

    pub fn minute(year: i32, month: u32, day: u32, hour: u32, minute: u32) -> Self {
        Self::ymd_hm(year, month, day, hour, minute, Granularity::Minute)
    }

    fn ymd_hm(year: i32, month: u32, day: u32, hour: u32, min: u32, g: Granularity) -> Self {
        let instant = Utc
            .with_ymd_and_hms(year, month, day, hour, min, 0)
            .single()
            .unwrap_or_else(|| panic!("invalid calendar date {year}-{month}-{day} {hour}:{min}"));
        Timestamp::new(instant, g)
    }

    pub fn granularity(&self) -> Granularity {
        self.granularity
    }

    pub fn is_known(&self) -> bool {
        self.granularity != Granularity::Unknown
    }

    /// Start of the period; `None` when unknown.
    pub fn instant(&self) -> Option<DateTime<Utc>> {
        self.is_known().then_some(self.instant)
    }

    /// Re-expresses this timestamp at a coarser granularity. Returns `self`
    /// unchanged when `granularity` is finer than the stored one.
    pub fn at_granularity(&self, granularity: Granularity) -> Timestamp {
        if !self.is_known() || granularity == Granularity::Unknown {
            return Timestamp::unknown();
        }
        if self.granularity.is_finer_or_equal(granularity) {
            Timestamp::new(self.instant, granularity)
        } else {
            *self
        }
    }

    /// Orders two timestamps at the coarser of their granularities.
    pub fn relation(&self, other: &Timestamp) -> TemporalRelation {
        if !self.is_known() || !other.is_known() {
            return TemporalRelation::Unknown;
        }
        let g = self.granularity.coarser(other.granularity);
        let a = truncate(self.instant, g);
        let b = truncate(other.instant, g);
        match a.cmp(&b) {
            Ordering::Less => TemporalRelation::Before,
            Ordering::Greater => TemporalRelation::After,
            Ordering::Equal => TemporalRelation::Concurrent,
        }
    }

    /// Total order used for deterministic tie-breaking: unknown first, then by
    /// period start, then coarser before finer.
    pub fn sort_key(&self) -> (bool, i64, u8) {
        (
            self.is_known(),
            if self.is_known() { self.instant.timestamp() } else { 0 },
            self.granularity.precision(),
        )
    }

    /// Anchor used for duration arithmetic: year → July 1, month → the 15th,
    /// finer granularities → period start.
    pub fn midpoint(&self) -> Option<DateTime<Utc>> {
        let start = self.instant()?;
        Some(match self.granularity {
            Granularity::Year => Utc
                .with_ymd_and_hms(start.year(), 7, 1, 0, 0, 0)
                .single()
                .expect("July 1 exists"),
            Granularity::Month => start + Duration::days(14),
            _ => start,
        })
    }

    /// Absolute distance in days between the midpoint anchors.
    pub fn days_between(&self, other: &Timestamp) -> Option<f64> {
        let a = self.midpoint()?;
        let b = other.midpoint()?;
        Some((b - a).num_seconds().abs() as f64 / 86_400.0)
    }

    /// Same period shifted by whole days (used for "yesterday"). Coarser than
    /// day granularity is returned unchanged.
    pub fn shift_days(&self, days: i64) -> Timestamp {
        match self.granularity {
            Granularity::Day | Granularity::Hour | Granularity::Minute => Timestamp {
                instant: self.instant + Duration::days(days),
                granularity: self.granularity,
            },
            _ => *self,
        }
    }

    /// Period shifted by whole months, keeping granularity at month or coarser.
    pub fn shift_months(&self, months: i32) -> Timestamp {
        if !self.is_known() {
            return *self;
        }
        let total = self.instant.year() * 12 + self.instant.month0() as i32 + months;
        let (y, m0) = (total.div_euclid(12), total.rem_euclid(12));
        let g = self.granularity.coarser(Granularity::Month);
        Timestamp::new(
            Utc.with_ymd_and_hms(y, m0 as u32 + 1, 1, 0, 0, 0)
                .single()
                .expect("first of month exists"),
            g,
        )
    }
}

impl PartialOrd for Timestamp {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Timestamp {
    fn cmp(&self, other: &Self) -> Ordering {
        self.sort_key().cmp(&other.sort_key())
    }
}

fn truncate(instant: DateTime<Utc>, g: Granularity) -> DateTime<Utc> {
    let (y, mo, d, h, mi) = (
        instant.year(),
        instant.month(),
        instant.day(),
        instant.hour(),
        instant.minute(),
    );
    let parts = match g {
        Granularity::Year => (y, 1, 1, 0, 0),
        Granularity::Month => (y, mo, 1, 0, 0),
        Granularity::Day => (y, mo, d, 0, 0),
        Granularity::Hour => (y, mo, d, h, 0),
        Granularity::Minute => (y, mo, d, h, mi),
        Granularity::Unknown => return DateTime::<Utc>::UNIX_EPOCH,
    };
    Utc.with_ymd_and_hms(parts.0, parts.1, parts.2, parts.3, parts.4, 0)
        .single()
        .expect("truncated instant exists")
}

impl fmt::Display for Timestamp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let t = self.instant;
        match self.granularity {
            Granularity::Unknown => f.write_str("unknown"),
            Granularity::Year => write!(f, "{:04}", t.year()),
            Granularity::Month => write!(f, "{:04}-{:02}", t.year(), t.month()),
            Granularity::Day => write!(f, "{}", t.format("%Y-%m-%d")),
            Granularity::Hour => write!(f, "{}", t.format("%Y-%m-%dT%H")),
            Granularity::Minute => write!(f, "{}", t.format("%Y-%m-%dT%H:%M")),
        }
    }
}

impl FromStr for Timestamp {
    type Err = MemoryError;

    fn from_str(raw: &str) -> Result<Self, Self::Err> {
        let s = raw.trim();
        let bad = || MemoryError::BadTimestamp(raw.to_string());
        if s.eq_ignore_ascii_case("unknown") || s.is_empty() {
            return Ok(Timestamp::unknown());
        }
        if let Ok(dt) = DateTime::parse_from_rfc3339(s) {
            return Ok(Timestamp::new(dt.with_timezone(&Utc), Granularity::Minute));
        }
        let ymd = |date: &str| NaiveDate::parse_from_str(date, "%Y-%m-%d").map_err(|_| bad());
        match s.len() {
            4 => {
                let y: i32 = s.parse().map_err(|_| bad())?;
                Ok(Timestamp::year(y))
            }
            7 => {
                let d = ymd(&format!("{s}-01"))?;
                Ok(Timestamp::month(d.year(), d.month()))
            }
            10 => {
                let d = ymd(s)?;
                Ok(Timestamp::day(d.year(), d.month(), d.day()))
            }
            13 => {
                let dt = NaiveDateTime::parse_from_str(&format!("{s}:00"), "%Y-%m-%dT%H:%M")
                    .map_err(|_| bad())?;
                Ok(Timestamp::new(dt.and_utc(), Granularity::Hour))
            }
            16 | 19 => {
                let fmt = if s.len() == 16 { "%Y-%m-%dT%H:%M" } else { "%Y-%m-%dT%H:%M:%S" };
                let dt = NaiveDateTime::parse_from_str(s, fmt).map_err(|_| bad())?;
                Ok(Timestamp::new(dt.and_utc(), Granularity::Minute))
            }
            _ => Err(bad()),
        }
    }
}

impl Serialize for Timestamp {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Timestamp {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ts(s: &str) -> Timestamp {
        s.parse().unwrap()
    }

    #[test]
    fn text_form_round_trips() {
        for s in ["2023", "2023-06", "2023-06-15", "2023-06-15T09", "2023-06-15T09:30", "unknown"] {
            assert_eq!(ts(s).to_string(), s);
        }
    }

    #[test]
    fn rfc3339_is_normalized_to_utc_minutes() {
        let t = ts("2023-06-15T09:30:45+02:00");
        assert_eq!(t.to_string(), "2023-06-15T07:30");
        assert_eq!(t.granularity(), Granularity::Minute);
    }

    #[test]
    fn rejects_garbage() {
        assert!("2023-13".parse::<Timestamp>().is_err());
        assert!("June".parse::<Timestamp>().is_err());
    }

    #[test]
    fn relation_uses_coarser_granularity() {
        assert_eq!(ts("2023-01").relation(&ts("2023-06")), TemporalRelation::Before);
        assert_eq!(ts("2023-06-20").relation(&ts("2023-06")), TemporalRelation::Concurrent);
        assert_eq!(ts("2023").relation(&ts("2023-06-01")), TemporalRelation::Concurrent);
        assert_eq!(ts("2024-01-01").relation(&ts("2023")), TemporalRelation::After);
        assert_eq!(ts("unknown").relation(&ts("2023")), TemporalRelation::Unknown);
    }

    #[test]
    fn month_midpoints_give_calendar_distance() {
        assert_eq!(ts("2023-01").days_between(&ts("2023-06")), Some(151.0));
        assert_eq!(ts("2023").days_between(&ts("2024")), Some(366.0));
        assert_eq!(ts("2023-06").days_between(&ts("unknown")), None);
    }

    #[test]
    fn shifting() {
        assert_eq!(ts("2023-03-01").shift_days(-1).to_string(), "2023-02-28");
        assert_eq!(ts("2023-01-10").shift_months(-1).to_string(), "2022-12");
        assert_eq!(ts("2023").shift_months(-12).to_string(), "2022");
    }
}
