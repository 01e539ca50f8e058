//! Domain types shared by every stage of the pipeline: sources, vehicle
//! classes, per-frame counts and time-ordered observation series.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum DomainError {
    #[error("source id must not be empty")]
    EmptySourceId,
    #[error("unknown vehicle class '{0}'")]
    UnknownClass(String),
    #[error("unknown class selector '{0}' (expected 'total' or a vehicle class)")]
    UnknownSelector(String),
    #[error("hour {0} is outside 0..=23")]
    HourOutOfRange(u32),
    #[error("time window [{start}, {end}] has start after end")]
    InvertedWindow { start: u8, end: u8 },
    #[error("time window label must not be empty")]
    EmptyWindowLabel,
    #[error("malformed time window '{0}' (expected LABEL=H1-H2)")]
    MalformedWindow(String),
    #[error("unknown timezone '{0}'")]
    UnknownTimezone(String),
    #[error("observation at index {index} is earlier than its predecessor")]
    UnsortedSeries { index: usize },
    #[error("observation for source '{found}' placed in series for '{expected}'")]
    MixedSources { expected: String, found: String },
    #[error("timestamp {0} ms is out of range")]
    TimestampOutOfRange(i64),
}

/// Opaque key identifying one camera or count source.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(transparent)]
pub struct SourceId(String);

impl SourceId {
    pub fn new(id: impl Into<String>) -> Result<Self, DomainError> {
        let id = id.into();
        if id.is_empty() {
            return Err(DomainError::EmptySourceId);
        }
        Ok(Self(id))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for SourceId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl FromStr for SourceId {
    type Err = DomainError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::new(s)
    }
}

impl<'de> Deserialize<'de> for SourceId {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let raw = String::deserialize(deserializer)?;
        SourceId::new(raw).map_err(serde::de::Error::custom)
    }
}

/// The five detected vehicle classes. The discriminant is the storage ordinal
/// and must never be reordered.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VehicleClass {
    Bicycle = 0,
    Car = 1,
    Motorcycle = 2,
    Bus = 3,
    Truck = 4,
}

impl VehicleClass {
    pub const ALL: [VehicleClass; 5] = [
        VehicleClass::Bicycle,
        VehicleClass::Car,
        VehicleClass::Motorcycle,
        VehicleClass::Bus,
        VehicleClass::Truck,
    ];

    pub fn ordinal(self) -> usize {
        self as usize
    }

    pub fn from_ordinal(ordinal: usize) -> Option<Self> {
        Self::ALL.get(ordinal).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            VehicleClass::Bicycle => "bicycle",
            VehicleClass::Car => "car",
            VehicleClass::Motorcycle => "motorcycle",
            VehicleClass::Bus => "bus",
            VehicleClass::Truck => "truck",
        }
    }
}

impl fmt::Display for VehicleClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for VehicleClass {
    type Err = DomainError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|c| c.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| DomainError::UnknownClass(s.to_string()))
    }
}

/// Per-class vehicle counts for a single frame, indexed by [`VehicleClass::ordinal`].
///
/// Serialized as a map keyed by class name. Missing classes deserialize as
/// zero; unknown keys are rejected.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash)]
pub struct ClassCounts([u32; 5]);

impl ClassCounts {
    pub const fn zero() -> Self {
        Self([0; 5])
    }

    pub const fn from_array(counts: [u32; 5]) -> Self {
        Self(counts)
    }

    pub fn single(class: VehicleClass, count: u32) -> Self {
        let mut counts = Self::zero();
        counts.set(class, count);
        counts
    }

    pub fn get(&self, class: VehicleClass) -> u32 {
        self.0[class.ordinal()]
    }

    pub fn set(&mut self, class: VehicleClass, count: u32) {
        self.0[class.ordinal()] = count;
    }

    pub fn increment(&mut self, class: VehicleClass) {
        self.0[class.ordinal()] = self.0[class.ordinal()].saturating_add(1);
    }

    pub fn as_array(&self) -> [u32; 5] {
        self.0
    }

    pub fn total(&self) -> u64 {
        self.0.iter().map(|&c| u64::from(c)).sum()
    }

    pub fn iter(&self) -> impl Iterator<Item = (VehicleClass, u32)> + '_ {
        VehicleClass::ALL.into_iter().map(move |c| (c, self.get(c)))
    }

    /// Keeps only `selector`'s share of the counts.
    pub fn restrict(&self, selector: ClassSelector) -> Self {
        match selector {
            ClassSelector::Total => *self,
            ClassSelector::Class(class) => Self::single(class, self.get(class)),
        }
    }
}

impl Serialize for ClassCounts {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        use serde::ser::SerializeMap;
        let mut map = serializer.serialize_map(Some(5))?;
        for (class, count) in self.iter() {
            map.serialize_entry(class.name(), &count)?;
        }
        map.end()
    }
}

impl<'de> Deserialize<'de> for ClassCounts {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let raw = BTreeMap::<String, u32>::deserialize(deserializer)?;
        let mut counts = ClassCounts::zero();
        for (name, count) in raw {
            let class = name.parse::<VehicleClass>().map_err(serde::de::Error::custom)?;
            counts.set(class, count);
        }
        Ok(counts)
    }
}

/// Which quantity of a frame's counts feeds the analysis.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash)]
pub enum ClassSelector {
    #[default]
    Total,
    Class(VehicleClass),
}

impl Serialize for ClassSelector {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for ClassSelector {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        String::deserialize(deserializer)?
            .parse()
            .map_err(serde::de::Error::custom)
    }
}

impl ClassSelector {
    pub fn select(self, counts: &ClassCounts) -> u64 {
        match self {
            ClassSelector::Total => counts.total(),
            ClassSelector::Class(class) => u64::from(counts.get(class)),
        }
    }
}

impl fmt::Display for ClassSelector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ClassSelector::Total => f.write_str("total"),
            ClassSelector::Class(class) => class.fmt(f),
        }
    }
}

impl FromStr for ClassSelector {
    type Err = DomainError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s.eq_ignore_ascii_case("total") || s.eq_ignore_ascii_case("all") {
            return Ok(ClassSelector::Total);
        }
        s.parse::<VehicleClass>()
            .map(ClassSelector::Class)
            .map_err(|_| DomainError::UnknownSelector(s.to_string()))
    }
}

/// Converts epoch milliseconds to a UTC instant.
pub fn utc_from_millis(ms: i64) -> Result<DateTime<Utc>, DomainError> {
    DateTime::from_timestamp_millis(ms).ok_or(DomainError::TimestampOutOfRange(ms))
}

/// Drops sub-millisecond precision.
pub fn truncate_to_millis(t: DateTime<Utc>) -> DateTime<Utc> {
    DateTime::from_timestamp_millis(t.timestamp_millis()).unwrap_or(t)
}

/// One timestamped count sample from one source. The total is always derived
/// from the per-class counts.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Observation {
    pub source: SourceId,
    pub captured_at: DateTime<Utc>,
    pub counts: ClassCounts,
}

impl Observation {
    pub fn new(source: SourceId, captured_at: DateTime<Utc>, counts: ClassCounts) -> Self {
        Self {
            source,
            captured_at: truncate_to_millis(captured_at),
            counts,
        }
    }

    pub fn total(&self) -> u64 {
        self.counts.total()
    }

    pub fn value(&self, selector: ClassSelector) -> u64 {
        selector.select(&self.counts)
    }
}

/// Observations of a single source, ordered by capture time.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ObservationSeries {
    source: SourceId,
    items: Vec<Observation>,
}

impl ObservationSeries {
    /// Validates that every item belongs to `source` and that timestamps never
    /// decrease.
    pub fn new(source: SourceId, items: Vec<Observation>) -> Result<Self, DomainError> {
        for (index, item) in items.iter().enumerate() {
            if item.source != source {
                return Err(DomainError::MixedSources {
                    expected: source.to_string(),
                    found: item.source.to_string(),
                });
            }
            if index > 0 && item.captured_at < items[index - 1].captured_at {
                return Err(DomainError::UnsortedSeries { index });
            }
        }
        Ok(Self { source, items })
    }

    /// Like [`ObservationSeries::new`] but sorts first (stable, so equal
    /// timestamps keep their relative order).
    pub fn from_unsorted(source: SourceId, mut items: Vec<Observation>) -> Result<Self, DomainError> {
        items.sort_by_key(|o| o.captured_at);
        Self::new(source, items)
    }

    /// Groups arbitrary observations into one series per source, ordered by source.
    pub fn group(observations: impl IntoIterator<Item = Observation>) -> Vec<ObservationSeries> {
        let mut by_source: BTreeMap<SourceId, Vec<Observation>> = BTreeMap::new();
        for obs in observations {
            by_source.entry(obs.source.clone()).or_default().push(obs);
        }
        by_source
            .into_iter()
            .map(|(source, mut items)| {
                items.sort_by_key(|o| o.captured_at);
                ObservationSeries { source, items }
            })
            .collect()
    }

    pub fn source(&self) -> &SourceId {
        &self.source
    }

    pub fn items(&self) -> &[Observation] {
        &self.items
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn into_items(self) -> Vec<Observation> {
        self.items
    }
}
