use chrono::{DateTime, Utc};

use crate::model::{ClassSelector, ObservationSeries, SourceId};

use super::AnalysisError;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SmoothedPoint {
    pub captured_at: DateTime<Utc>,
    pub value: f64,
}

/// Rolling-mean density of one source. Point `j` carries the timestamp of
/// the last raw observation in its window.
#[derive(Debug, Clone, PartialEq)]
pub struct SmoothedSeries {
    pub source: SourceId,
    pub items: Vec<SmoothedPoint>,
}

/// Trailing mean over the last `window_size` observations (sample-indexed,
/// not time-indexed). Positions without a full window are omitted, so the
/// output has `max(0, n - window_size + 1)` points.
pub fn rolling_mean(
    series: &ObservationSeries,
    window_size: usize,
    selector: ClassSelector,
) -> Result<SmoothedSeries, AnalysisError> {
    if window_size == 0 {
        return Err(AnalysisError::InvalidWindowSize);
    }
    let items = series.items();
    let raw: Vec<u64> = items.iter().map(|o| o.value(selector)).collect();
    let mut out = Vec::with_capacity(raw.len().saturating_sub(window_size - 1));
    // Integer running sum: exact, so each mean is a single rounding.
    let mut sum: u64 = 0;
    for (j, &x) in raw.iter().enumerate() {
        sum += x;
        if j >= window_size {
            sum -= raw[j - window_size];
        }
        if j + 1 >= window_size {
            out.push(SmoothedPoint {
                captured_at: items[j].captured_at,
                value: sum as f64 / window_size as f64,
            });
        }
    }
    Ok(SmoothedSeries {
        source: series.source().clone(),
        items: out,
    })
}
