//! Millisecond-precision UTC timestamps.
//!
//! Every timestamp in the engine is supplied by the caller; nothing here reads
//! the wall clock. The textual form is RFC 3339 with exactly three fractional
//! digits and a `Z` suffix, which is also the on-disk form in event logs.

use std::fmt;
use std::str::FromStr;

use chrono::{DateTime, SecondsFormat, Utc};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

pub const MS_PER_SECOND: i64 = 1_000;
pub const MS_PER_MINUTE: i64 = 60 * MS_PER_SECOND;
pub const MS_PER_HOUR: i64 = 60 * MS_PER_MINUTE;
pub const MS_PER_DAY: i64 = 24 * MS_PER_HOUR;

/// Milliseconds since the Unix epoch, UTC.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Timestamp(i64);

impl Timestamp {
    pub const MIN: Timestamp = Timestamp(i64::MIN / 2);
    pub const MAX: Timestamp = Timestamp(i64::MAX / 2);

    pub const fn from_millis(ms: i64) -> Self {
        Timestamp(ms)
    }

    /// Wall-clock time, truncated to milliseconds.
    pub fn now() -> Self {
        Timestamp(Utc::now().timestamp_millis())
    }

    pub const fn as_millis(self) -> i64 {
        self.0
    }

    pub fn parse(text: &str) -> Result<Self, TimestampError> {
        let dt = DateTime::parse_from_rfc3339(text.trim()).map_err(|e| TimestampError(format!("{text:?}: {e}")))?;
        Ok(Timestamp(dt.with_timezone(&Utc).timestamp_millis()))
    }

    /// Milliseconds elapsed from `earlier` to `self`.
    pub fn millis_since(self, earlier: Timestamp) -> i64 {
        self.0 - earlier.0
    }

    pub fn plus_millis(self, ms: i64) -> Self {
        Timestamp(self.0 + ms)
    }

    pub fn to_rfc3339(self) -> String {
        match DateTime::<Utc>::from_timestamp_millis(self.0) {
            Some(dt) => dt.to_rfc3339_opts(SecondsFormat::Millis, true),
            None => format!("@{}ms", self.0),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("invalid RFC 3339 timestamp {0}")]
pub struct TimestampError(String);

impl fmt::Display for Timestamp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_rfc3339())
    }
}

impl FromStr for Timestamp {
    type Err = TimestampError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Timestamp::parse(s)
    }
}

impl Serialize for Timestamp {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.to_rfc3339())
    }
}

impl<'de> Deserialize<'de> for Timestamp {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let text = String::deserialize(deserializer)?;
        Timestamp::parse(&text).map_err(serde::de::Error::custom)
    }
}

/// Renders a millisecond duration as `3d 4h 0m 0.000s`-style text for summaries.
pub fn format_duration(ms: i64) -> String {
    let sign = if ms < 0 { "-" } else { "" };
    let ms = ms.unsigned_abs() as i64;
    let days = ms / MS_PER_DAY;
    let hours = (ms % MS_PER_DAY) / MS_PER_HOUR;
    let minutes = (ms % MS_PER_HOUR) / MS_PER_MINUTE;
    let seconds = (ms % MS_PER_MINUTE) as f64 / 1000.0;
    format!("{sign}{days}d {hours}h {minutes}m {seconds:.3}s")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn renders_millisecond_precision() {
        let t = Timestamp::parse("2024-03-01T09:00:00Z").unwrap();
        assert_eq!(t.to_rfc3339(), "2024-03-01T09:00:00.000Z");
        let t = Timestamp::parse("2024-03-01T10:00:00.250+01:00").unwrap();
        assert_eq!(t.to_string(), "2024-03-01T09:00:00.250Z");
    }

    #[test]
    fn rejects_garbage() {
        assert!(Timestamp::parse("yesterday").is_err());
    }

    #[test]
    fn serde_uses_text_form() {
        let t = Timestamp::from_millis(86_400_000);
        let json = serde_json::to_string(&t).unwrap();
        assert_eq!(json, "\"1970-01-02T00:00:00.000Z\"");
        assert_eq!(serde_json::from_str::<Timestamp>(&json).unwrap(), t);
    }

    #[test]
    fn duration_text() {
        assert_eq!(format_duration(MS_PER_DAY + 2 * MS_PER_HOUR + 1500), "1d 2h 0m 1.500s");
    }
}
