use serde::Serialize;

use crate::calendar::{DayType, HourOfDay, Period, TimeWindow};
use crate::model::SourceId;

use super::partition::PartitionedMeanTable;

/// Highest bucket mean inside a window and the hour it occurred at.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PeakValue {
    pub value: f64,
    pub at_hour: HourOfDay,
}

/// Maximum occupied bucket mean over the inclusive window. Ties resolve to
/// the earliest hour; `None` when no hour in the window has samples.
pub fn peak(
    table: &PartitionedMeanTable,
    source: &SourceId,
    day_type: DayType,
    period: Period,
    window: &TimeWindow,
) -> Option<PeakValue> {
    table
        .hours_in(source, day_type, period, window.start(), window.end())
        .fold(None, |best: Option<PeakValue>, (hour, bucket)| match best {
            Some(b) if b.value >= bucket.mean => Some(b),
            _ => Some(PeakValue {
                value: bucket.mean,
                at_hour: hour,
            }),
        })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PeakDifferential {
    pub before: Option<PeakValue>,
    pub after: Option<PeakValue>,
    /// `after - before`, present only when both peaks are.
    pub delta: Option<f64>,
}

pub fn phd(table: &PartitionedMeanTable, source: &SourceId, day_type: DayType, window: &TimeWindow) -> PeakDifferential {
    let before = peak(table, source, day_type, Period::Before, window);
    let after = peak(table, source, day_type, Period::After, window);
    let delta = match (before, after) {
        (Some(b), Some(a)) => Some(a.value - b.value),
        _ => None,
    };
    PeakDifferential { before, after, delta }
}
