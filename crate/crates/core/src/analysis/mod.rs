//! Peak Hour Differential analysis.
//!
//! The pipeline is three pure stages applied per source:
//!
//! 1. [`rolling_mean`]: trailing mean over the last `window_size` samples.
//! 2. [`partitioned_means`]: average smoothed density per local hour, day
//!    type and before/after period.
//! 3. [`peak`] / [`phd`]: the largest hourly mean inside each time window,
//!    and the after-minus-before difference of those peaks.
//!
//! [`process_traffic_data`] chains them over every source, day type and
//! window.

mod partition;
mod peak;
mod report;
mod smoothing;

use std::collections::BTreeSet;

use thiserror::Error;

use crate::calendar::{DayType, SplitConfig, TimeWindow};
use crate::model::{ClassSelector, ObservationSeries};

pub use partition::{partitioned_means, BucketKey, BucketMean, PartitionedMeanTable};
pub use peak::{peak, phd, PeakDifferential, PeakValue};
pub use report::{read_means_csv, write_means_csv, MeanRow, PhdReport, PhdRow, MEANS_HEADER, REPORT_HEADER};
pub use smoothing::{rolling_mean, SmoothedPoint, SmoothedSeries};

pub(crate) use report::fmt_real;

pub const DEFAULT_WINDOW_SIZE: usize = 12;

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error("rolling window size must be at least 1")]
    InvalidWindowSize,
    #[error("at least one time window is required")]
    NoWindows,
    #[error("malformed CSV at line {line}: {message}")]
    MalformedCsv { line: u64, message: String },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnalysisConfig {
    pub window_size: usize,
    pub split: SplitConfig,
    pub windows: Vec<TimeWindow>,
    pub selector: ClassSelector,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        Self {
            window_size: DEFAULT_WINDOW_SIZE,
            split: SplitConfig::default(),
            windows: TimeWindow::defaults(),
            selector: ClassSelector::Total,
        }
    }
}

impl AnalysisConfig {
    pub fn validate(&self) -> Result<(), AnalysisError> {
        if self.window_size == 0 {
            return Err(AnalysisError::InvalidWindowSize);
        }
        if self.windows.is_empty() {
            return Err(AnalysisError::NoWindows);
        }
        Ok(())
    }
}

/// Intermediate products of one analysis run.
#[derive(Debug, Clone, PartialEq)]
pub struct AnalysisOutput {
    pub smoothed: Vec<SmoothedSeries>,
    pub table: PartitionedMeanTable,
    pub report: PhdReport,
}

/// Builds the report rows for every (source, day type, window) triple of an
/// existing table, sorted by source, day type, then window label.
pub fn build_report<'a>(
    table: &PartitionedMeanTable,
    sources: impl IntoIterator<Item = &'a crate::model::SourceId>,
    windows: &[TimeWindow],
) -> PhdReport {
    let mut rows = Vec::new();
    for source in sources {
        for day_type in DayType::ALL {
            for window in windows {
                let d = phd(table, source, day_type, window);
                rows.push(PhdRow {
                    source: source.clone(),
                    day_type,
                    window: window.label().to_string(),
                    peak_before: d.before,
                    peak_after: d.after,
                    delta: d.delta,
                });
            }
        }
    }
    rows.sort_by(|a, b| (&a.source, a.day_type, &a.window).cmp(&(&b.source, b.day_type, &b.window)));
    PhdReport { rows }
}

pub fn analyze(observations: &[ObservationSeries], config: &AnalysisConfig) -> Result<AnalysisOutput, AnalysisError> {
    config.validate()?;
    let smoothed = observations
        .iter()
        .map(|s| rolling_mean(s, config.window_size, config.selector))
        .collect::<Result<Vec<_>, _>>()?;
    let table = partitioned_means(&smoothed, &config.split);
    let sources: BTreeSet<_> = observations.iter().map(|s| s.source()).collect();
    let report = build_report(&table, sources, &config.windows);
    Ok(AnalysisOutput { smoothed, table, report })
}

pub fn process_traffic_data(observations: &[ObservationSeries], config: &AnalysisConfig) -> Result<PhdReport, AnalysisError> {
    analyze(observations, config).map(|out| out.report)
}
