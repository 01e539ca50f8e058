//! Calendar partitioning: local hour, weekday/weekend and before/after split.
//!
//! Timestamps are stored in UTC; every partition is derived in the configured
//! local timezone so daylight-saving transitions move the hour labels with the
//! wall clock.

use std::fmt;
use std::str::FromStr;

use chrono::{DateTime, Datelike, LocalResult, NaiveDate, NaiveDateTime, TimeZone, Timelike, Utc, Weekday};
use chrono_tz::Tz;
use serde::{Deserialize, Serialize};

use crate::model::DomainError;

pub const DEFAULT_TIMEZONE: Tz = chrono_tz::America::New_York;

/// Local date on which the default split takes effect (midnight, default zone).
pub const DEFAULT_SPLIT_DATE: (i32, u32, u32) = (2025, 1, 5);

pub fn parse_timezone(name: &str) -> Result<Tz, DomainError> {
    name.parse::<Tz>()
        .map_err(|_| DomainError::UnknownTimezone(name.to_string()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "u32", into = "u32")]
pub struct HourOfDay(u8);

impl HourOfDay {
    pub fn new(hour: u32) -> Result<Self, DomainError> {
        if hour > 23 {
            return Err(DomainError::HourOutOfRange(hour));
        }
        Ok(Self(hour as u8))
    }

    pub fn value(self) -> u8 {
        self.0
    }

    pub fn all() -> impl Iterator<Item = HourOfDay> {
        (0u8..24).map(HourOfDay)
    }
}

impl TryFrom<u32> for HourOfDay {
    type Error = DomainError;

    fn try_from(value: u32) -> Result<Self, Self::Error> {
        Self::new(value)
    }
}

impl From<HourOfDay> for u32 {
    fn from(h: HourOfDay) -> u32 {
        u32::from(h.0)
    }
}

impl fmt::Display for HourOfDay {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DayType {
    Weekday,
    Weekend,
}

impl DayType {
    pub const ALL: [DayType; 2] = [DayType::Weekday, DayType::Weekend];

    pub fn as_str(self) -> &'static str {
        match self {
            DayType::Weekday => "weekday",
            DayType::Weekend => "weekend",
        }
    }
}

impl fmt::Display for DayType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for DayType {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "weekday" => Ok(DayType::Weekday),
            "weekend" => Ok(DayType::Weekend),
            other => Err(format!("unknown day type '{other}'")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Period {
    Before,
    After,
}

impl Period {
    pub const ALL: [Period; 2] = [Period::Before, Period::After];

    pub fn as_str(self) -> &'static str {
        match self {
            Period::Before => "before",
            Period::After => "after",
        }
    }

    pub fn swapped(self) -> Self {
        match self {
            Period::Before => Period::After,
            Period::After => Period::Before,
        }
    }
}

impl fmt::Display for Period {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Period {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "before" => Ok(Period::Before),
            "after" => Ok(Period::After),
            other => Err(format!("unknown period '{other}'")),
        }
    }
}

/// The instant separating the before and after periods, plus the zone used
/// for hour and day-type labels.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SplitConfig {
    pub split_at: DateTime<Utc>,
    pub timezone: Tz,
}

impl SplitConfig {
    pub fn new(split_at: DateTime<Utc>, timezone: Tz) -> Self {
        Self { split_at, timezone }
    }

    /// Split at local midnight starting `date` in `timezone`.
    pub fn at_local_midnight(date: NaiveDate, timezone: Tz) -> Self {
        Self::new(local_to_utc(date.and_hms_opt(0, 0, 0).expect("midnight"), timezone), timezone)
    }

    /// Accepts `YYYY-MM-DD` (local midnight), a naive `YYYY-MM-DDTHH:MM[:SS]`
    /// local time, or an RFC 3339 instant with explicit offset.
    pub fn parse(split: &str, timezone: Tz) -> Result<Self, String> {
        if let Ok(instant) = DateTime::parse_from_rfc3339(split) {
            return Ok(Self::new(instant.to_utc(), timezone));
        }
        if let Ok(date) = NaiveDate::parse_from_str(split, "%Y-%m-%d") {
            return Ok(Self::at_local_midnight(date, timezone));
        }
        for fmt in ["%Y-%m-%dT%H:%M:%S", "%Y-%m-%dT%H:%M", "%Y-%m-%d %H:%M:%S", "%Y-%m-%d %H:%M"] {
            if let Ok(naive) = NaiveDateTime::parse_from_str(split, fmt) {
                return Ok(Self::new(local_to_utc(naive, timezone), timezone));
            }
        }
        Err(format!("cannot parse split timestamp '{split}'"))
    }
}

impl Default for SplitConfig {
    fn default() -> Self {
        let (y, m, d) = DEFAULT_SPLIT_DATE;
        Self::at_local_midnight(
            NaiveDate::from_ymd_opt(y, m, d).expect("valid default split date"),
            DEFAULT_TIMEZONE,
        )
    }
}

/// Resolves a local wall-clock time. Ambiguous times take the earlier
/// instant; times skipped by a DST jump move forward by the gap.
pub fn local_to_utc(naive: NaiveDateTime, tz: Tz) -> DateTime<Utc> {
    match tz.from_local_datetime(&naive) {
        LocalResult::Single(t) => t.to_utc(),
        LocalResult::Ambiguous(earliest, _) => earliest.to_utc(),
        LocalResult::None => {
            let shifted = naive + chrono::Duration::hours(1);
            tz.from_local_datetime(&shifted)
                .earliest()
                .map(|t| t.to_utc())
                .unwrap_or_else(|| Utc.from_utc_datetime(&naive))
        }
    }
}

pub fn hour_of(t: DateTime<Utc>, tz: Tz) -> HourOfDay {
    HourOfDay(t.with_timezone(&tz).hour() as u8)
}

pub fn day_type_of(t: DateTime<Utc>, tz: Tz) -> DayType {
    match t.with_timezone(&tz).weekday() {
        Weekday::Sat | Weekday::Sun => DayType::Weekend,
        _ => DayType::Weekday,
    }
}

/// The split instant itself belongs to the after period.
pub fn period_of(t: DateTime<Utc>, split: &SplitConfig) -> Period {
    if t < split.split_at {
        Period::Before
    } else {
        Period::After
    }
}

/// Inclusive hour range `[start, end]` with a display label.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TimeWindow {
    label: String,
    start: HourOfDay,
    end: HourOfDay,
}

impl TimeWindow {
    pub fn new(label: impl Into<String>, start: u32, end: u32) -> Result<Self, DomainError> {
        let label = label.into();
        if label.is_empty() {
            return Err(DomainError::EmptyWindowLabel);
        }
        let (start, end) = (HourOfDay::new(start)?, HourOfDay::new(end)?);
        if start > end {
            return Err(DomainError::InvertedWindow {
                start: start.value(),
                end: end.value(),
            });
        }
        Ok(Self { label, start, end })
    }

    /// Day [0,23], Morning [6,9], Midday [9,15], Afternoon [15,18].
    pub fn defaults() -> Vec<TimeWindow> {
        [("Day", 0, 23), ("Morning", 6, 9), ("Midday", 9, 15), ("Afternoon", 15, 18)]
            .into_iter()
            .map(|(label, s, e)| TimeWindow::new(label, s, e).expect("default windows are valid"))
            .collect()
    }

    /// Parses a comma-separated list like `Morning=6-9,Evening=18-22`.
    pub fn parse_list(spec: &str) -> Result<Vec<TimeWindow>, DomainError> {
        spec.split(',')
            .map(str::trim)
            .filter(|part| !part.is_empty())
            .map(|part| {
                let malformed = || DomainError::MalformedWindow(part.to_string());
                let (label, range) = part.split_once('=').ok_or_else(malformed)?;
                let (lo, hi) = range.split_once('-').ok_or_else(malformed)?;
                let lo = lo.trim().parse::<u32>().map_err(|_| malformed())?;
                let hi = hi.trim().parse::<u32>().map_err(|_| malformed())?;
                TimeWindow::new(label.trim(), lo, hi)
            })
            .collect()
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn start(&self) -> HourOfDay {
        self.start
    }

    pub fn end(&self) -> HourOfDay {
        self.end
    }

    pub fn contains(&self, hour: HourOfDay) -> bool {
        self.start <= hour && hour <= self.end
    }

    pub fn hours(&self) -> impl Iterator<Item = HourOfDay> {
        (self.start.0..=self.end.0).map(HourOfDay)
    }
}
