//! C ABI over the trafficlens analysis.
//!
//! Handles are opaque and owned by the caller until passed to the matching
//! `*_free` function. Every fallible call returns a [`TlStatus`]; the message
//! for the most recent failure on the calling thread is available from
//! [`tl_last_error_message`].

use std::cell::RefCell;
use std::collections::BTreeMap;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use trafficlens::analysis::{process_traffic_data, AnalysisConfig, PhdReport, PhdRow};
use trafficlens::calendar::{parse_timezone, DayType, SplitConfig, TimeWindow, DEFAULT_TIMEZONE};
use trafficlens::model::{utc_from_millis, ClassCounts, ClassSelector, Observation, ObservationSeries, SourceId};
use trafficlens::store::{SeriesQuery, Store};

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TlStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    InvalidArgument = 3,
    OutOfRange = 4,
    Storage = 5,
    Analysis = 6,
    Panic = 7,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TlDayType {
    Weekday = 0,
    Weekend = 1,
}

/// One report row. `source` and `window` point into the report and stay valid
/// until it is freed. Optional values carry a `has_` flag; hours are local.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct TlReportRow {
    pub source: *const c_char,
    pub day_type: TlDayType,
    pub window: *const c_char,
    pub has_peak_before: bool,
    pub peak_before: f64,
    pub hour_before: u8,
    pub has_peak_after: bool,
    pub peak_after: f64,
    pub hour_after: u8,
    pub has_delta: bool,
    pub delta: f64,
}

/// Accumulates observations and analysis settings.
pub struct TlAnalysis {
    config: AnalysisConfig,
    observations: BTreeMap<SourceId, Vec<Observation>>,
}

/// Result of [`tl_analysis_run`].
pub struct TlReport {
    report: PhdReport,
    strings: Vec<(CString, CString)>,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(message: impl Into<String>) {
    let text = message.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(text).ok());
}

fn clear_error() {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
}

fn fail(status: TlStatus, message: impl Into<String>) -> TlStatus {
    set_error(message);
    status
}

/// Runs `f`, converting a panic into [`TlStatus::Panic`].
fn guard(f: impl FnOnce() -> Result<(), (TlStatus, String)>) -> TlStatus {
    clear_error();
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => TlStatus::Ok,
        Ok(Err((status, message))) => fail(status, message),
        Err(_) => fail(TlStatus::Panic, "internal panic"),
    }
}

unsafe fn read_str<'a>(p: *const c_char, what: &str) -> Result<&'a str, (TlStatus, String)> {
    if p.is_null() {
        return Err((TlStatus::NullPointer, format!("{what} is NULL")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| (TlStatus::InvalidUtf8, format!("{what} is not valid UTF-8")))
}

unsafe fn handle<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, (TlStatus, String)> {
    p.as_mut().ok_or_else(|| (TlStatus::NullPointer, format!("{what} is NULL")))
}

fn invalid(e: impl std::fmt::Display) -> (TlStatus, String) {
    (TlStatus::InvalidArgument, e.to_string())
}

/// Message for the last failed call on this thread, or NULL. The pointer is
/// valid until the next call into this library from the same thread.
#[no_mangle]
pub extern "C" fn tl_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn tl_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Creates an analysis with the default peak windows.
///
/// `tz` may be NULL for America/New_York. Returns NULL on invalid input.
///
/// # Safety
/// `tz` must be NULL or a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn tl_analysis_new(window_size: usize, split_unix_ms: i64, tz: *const c_char) -> *mut TlAnalysis {
    let mut out = ptr::null_mut();
    guard(|| {
        let timezone = if tz.is_null() {
            DEFAULT_TIMEZONE
        } else {
            parse_timezone(read_str(tz, "tz")?).map_err(invalid)?
        };
        let split_at = utc_from_millis(split_unix_ms).map_err(invalid)?;
        let config = AnalysisConfig {
            window_size,
            split: SplitConfig::new(split_at, timezone),
            ..AnalysisConfig::default()
        };
        config.validate().map_err(invalid)?;
        out = Box::into_raw(Box::new(TlAnalysis {
            config,
            observations: BTreeMap::new(),
        }));
        Ok(())
    });
    out
}

/// Replaces the peak windows with a list like `Morning=6-9,Evening=16-19`.
///
/// # Safety
/// `analysis` must come from [`tl_analysis_new`]; `spec` must be NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn tl_analysis_set_windows(analysis: *mut TlAnalysis, spec: *const c_char) -> TlStatus {
    guard(|| {
        let analysis = handle(analysis, "analysis")?;
        let windows = TimeWindow::parse_list(read_str(spec, "spec")?).map_err(invalid)?;
        if windows.is_empty() {
            return Err(invalid("no windows given"));
        }
        analysis.config.windows = windows;
        Ok(())
    })
}

/// Restricts the analysed value to one class (`car`, `bus`, ...) or `total`.
///
/// # Safety
/// `analysis` must come from [`tl_analysis_new`]; `class` must be NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn tl_analysis_set_class(analysis: *mut TlAnalysis, class: *const c_char) -> TlStatus {
    guard(|| {
        let analysis = handle(analysis, "analysis")?;
        analysis.config.selector = read_str(class, "class")?.parse::<ClassSelector>().map_err(invalid)?;
        Ok(())
    })
}

/// Adds one observation. `counts` points to five values in the order
/// bicycle, car, motorcycle, bus, truck.
///
/// # Safety
/// `analysis` must come from [`tl_analysis_new`], `source` must be
/// NUL-terminated and `counts` must point to five readable `uint32_t`.
#[no_mangle]
pub unsafe extern "C" fn tl_analysis_add_observation(
    analysis: *mut TlAnalysis,
    source: *const c_char,
    captured_at_unix_ms: i64,
    counts: *const u32,
) -> TlStatus {
    guard(|| {
        let analysis = handle(analysis, "analysis")?;
        let source = SourceId::new(read_str(source, "source")?).map_err(invalid)?;
        if counts.is_null() {
            return Err((TlStatus::NullPointer, "counts is NULL".into()));
        }
        let mut values = [0u32; 5];
        ptr::copy_nonoverlapping(counts, values.as_mut_ptr(), 5);
        let captured_at = utc_from_millis(captured_at_unix_ms).map_err(|e| (TlStatus::OutOfRange, e.to_string()))?;
        let obs = Observation::new(source.clone(), captured_at, ClassCounts::from_array(values));
        analysis.observations.entry(source).or_default().push(obs);
        Ok(())
    })
}

/// Adds every stored observation from a database written by `collect` or
/// `import`.
///
/// # Safety
/// `analysis` must come from [`tl_analysis_new`]; `path` must be NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn tl_analysis_load_db(analysis: *mut TlAnalysis, path: *const c_char) -> TlStatus {
    guard(|| {
        let analysis = handle(analysis, "analysis")?;
        let path = read_str(path, "path")?;
        let storage = |e: trafficlens::store::StoreError| (TlStatus::Storage, e.to_string());
        let store = Store::open_existing(Path::new(path)).map_err(storage)?;
        for series in store.query_series(&SeriesQuery::default()).map_err(storage)? {
            let source = series.source().clone();
            analysis.observations.entry(source).or_default().extend(series.into_items());
        }
        Ok(())
    })
}

/// Number of observations added so far, or 0 for NULL.
///
/// # Safety
/// `analysis` must be NULL or come from [`tl_analysis_new`].
#[no_mangle]
pub unsafe extern "C" fn tl_analysis_observation_count(analysis: *const TlAnalysis) -> usize {
    analysis.as_ref().map_or(0, |a| a.observations.values().map(Vec::len).sum())
}

/// Computes the report. On success `*out` receives a handle to free with
/// [`tl_report_free`]; on failure it is set to NULL.
///
/// # Safety
/// `analysis` must come from [`tl_analysis_new`]; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn tl_analysis_run(analysis: *const TlAnalysis, out: *mut *mut TlReport) -> TlStatus {
    if out.is_null() {
        return fail(TlStatus::NullPointer, "out is NULL");
    }
    *out = ptr::null_mut();
    guard(|| {
        let analysis = analysis.as_ref().ok_or((TlStatus::NullPointer, "analysis is NULL".to_string()))?;
        let series = analysis
            .observations
            .iter()
            .map(|(source, items)| ObservationSeries::from_unsorted(source.clone(), items.clone()))
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| (TlStatus::Analysis, e.to_string()))?;
        let report = process_traffic_data(&series, &analysis.config).map_err(|e| (TlStatus::Analysis, e.to_string()))?;
        let strings = report
            .rows
            .iter()
            .map(|r| {
                let source = CString::new(r.source.as_str()).map_err(invalid)?;
                let window = CString::new(r.window.as_str()).map_err(invalid)?;
                Ok((source, window))
            })
            .collect::<Result<Vec<_>, (TlStatus, String)>>()?;
        *out = Box::into_raw(Box::new(TlReport { report, strings }));
        Ok(())
    })
}

/// Releases an analysis. NULL is ignored.
///
/// # Safety
/// `analysis` must be NULL or come from [`tl_analysis_new`] and not be used
/// afterwards.
#[no_mangle]
pub unsafe extern "C" fn tl_analysis_free(analysis: *mut TlAnalysis) {
    if !analysis.is_null() {
        drop(Box::from_raw(analysis));
    }
}

/// Number of rows, or 0 for NULL.
///
/// # Safety
/// `report` must be NULL or come from [`tl_analysis_run`].
#[no_mangle]
pub unsafe extern "C" fn tl_report_len(report: *const TlReport) -> usize {
    report.as_ref().map_or(0, |r| r.report.len())
}

fn to_row(row: &PhdRow, (source, window): &(CString, CString)) -> TlReportRow {
    TlReportRow {
        source: source.as_ptr(),
        day_type: match row.day_type {
            DayType::Weekday => TlDayType::Weekday,
            DayType::Weekend => TlDayType::Weekend,
        },
        window: window.as_ptr(),
        has_peak_before: row.peak_before.is_some(),
        peak_before: row.peak_before.map_or(f64::NAN, |p| p.value),
        hour_before: row.peak_before.map_or(0, |p| p.at_hour.value()),
        has_peak_after: row.peak_after.is_some(),
        peak_after: row.peak_after.map_or(f64::NAN, |p| p.value),
        hour_after: row.peak_after.map_or(0, |p| p.at_hour.value()),
        has_delta: row.delta.is_some(),
        delta: row.delta.unwrap_or(f64::NAN),
    }
}

/// Copies row `index` into `*row`. Rows are sorted by source, day type and
/// window label.
///
/// # Safety
/// `report` must come from [`tl_analysis_run`]; `row` must be writable.
#[no_mangle]
pub unsafe extern "C" fn tl_report_row(report: *const TlReport, index: usize, row: *mut TlReportRow) -> TlStatus {
    guard(|| {
        let report = report.as_ref().ok_or((TlStatus::NullPointer, "report is NULL".to_string()))?;
        let out = row.as_mut().ok_or((TlStatus::NullPointer, "row is NULL".to_string()))?;
        let data = report
            .report
            .rows
            .get(index)
            .ok_or_else(|| (TlStatus::OutOfRange, format!("row {index} of {}", report.report.len())))?;
        *out = to_row(data, &report.strings[index]);
        Ok(())
    })
}

/// Report as CSV (header included). Free the result with [`tl_string_free`].
/// Returns NULL on failure.
///
/// # Safety
/// `report` must come from [`tl_analysis_run`].
#[no_mangle]
pub unsafe extern "C" fn tl_report_to_csv(report: *const TlReport) -> *mut c_char {
    let mut out = ptr::null_mut();
    guard(|| {
        let report = report.as_ref().ok_or((TlStatus::NullPointer, "report is NULL".to_string()))?;
        let text = report.report.to_csv_string().map_err(|e| (TlStatus::Analysis, e.to_string()))?;
        out = CString::new(text).map_err(invalid)?.into_raw();
        Ok(())
    });
    out
}

/// Releases a report. NULL is ignored.
///
/// # Safety
/// `report` must be NULL or come from [`tl_analysis_run`] and not be used
/// afterwards, including row string pointers.
#[no_mangle]
pub unsafe extern "C" fn tl_report_free(report: *mut TlReport) {
    if !report.is_null() {
        drop(Box::from_raw(report));
    }
}

/// Releases a string returned by this library. NULL is ignored.
///
/// # Safety
/// `s` must be NULL or come from [`tl_report_to_csv`].
#[no_mangle]
pub unsafe extern "C" fn tl_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}
