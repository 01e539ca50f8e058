//! Durable append-only store of per-frame detection counts (SQLite), with
//! time-range queries that feed the analysis and a CSV export/import path.

mod csv_io;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use chrono::{DateTime, Utc};
use rusqlite::{params, Connection, ErrorCode, OpenFlags};
use serde::Serialize;
use thiserror::Error;

use crate::detect::DetectionResult;
use crate::model::{utc_from_millis, ClassCounts, ClassSelector, Observation, ObservationSeries, SourceId};

pub use csv_io::CSV_HEADER;

/// Aborts the process after inserting this many rows of an append, before
/// commit. Used by crash-injection tests.
pub const FAULT_ABORT_ENV: &str = "TRAFFICLENS_FAULT_ABORT_AFTER_ROWS";

const SCHEMA: &str = "
CREATE TABLE IF NOT EXISTS detections (
    row_id INTEGER PRIMARY KEY AUTOINCREMENT,
    source TEXT NOT NULL,
    captured_at_ms INTEGER NOT NULL,
    bicycle INTEGER NOT NULL,
    car INTEGER NOT NULL,
    motorcycle INTEGER NOT NULL,
    bus INTEGER NOT NULL,
    truck INTEGER NOT NULL,
    total INTEGER NOT NULL,
    threshold REAL NOT NULL,
    model_id TEXT NOT NULL
);
CREATE UNIQUE INDEX IF NOT EXISTS detections_source_time_model
    ON detections (source, captured_at_ms, model_id);
";

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("database error: {0}")]
    Sqlite(#[from] rusqlite::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error("malformed CSV at line {line}: {message}")]
    MalformedCsv { line: u64, message: String },
    #[error("corrupt row {row_id}: {message}")]
    CorruptRow { row_id: i64, message: String },
    #[error("query range start {start} is after end {end}")]
    InvalidRange { start: DateTime<Utc>, end: DateTime<Utc> },
    #[error("record {index}: {message}")]
    InvalidRecord { index: usize, message: String },
    #[error("database file {0} does not exist")]
    Missing(PathBuf),
}

impl StoreError {
    /// Busy, locked, full and I/O failures may succeed on retry.
    pub fn is_retriable(&self) -> bool {
        match self {
            StoreError::Sqlite(rusqlite::Error::SqliteFailure(e, _)) => matches!(
                e.code,
                ErrorCode::DatabaseBusy | ErrorCode::DatabaseLocked | ErrorCode::DiskFull | ErrorCode::SystemIoFailure
            ),
            StoreError::Io(_) => true,
            _ => false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StoredRecord {
    pub row_id: i64,
    pub source: SourceId,
    pub captured_at: DateTime<Utc>,
    pub counts: ClassCounts,
    pub total: u64,
    pub threshold: f64,
    pub model_id: String,
}

/// A row to insert; `row_id` is assigned by the store.
#[derive(Debug, Clone, PartialEq)]
pub struct NewRecord {
    pub source: SourceId,
    pub captured_at: DateTime<Utc>,
    pub counts: ClassCounts,
    pub threshold: f64,
    pub model_id: String,
}

impl From<&DetectionResult> for NewRecord {
    fn from(r: &DetectionResult) -> Self {
        Self {
            source: r.source.clone(),
            captured_at: r.captured_at,
            counts: r.counts,
            threshold: f64::from(r.confidence_threshold),
            model_id: r.model_id.clone(),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct AppendOutcome {
    pub written: usize,
    /// Rows whose (source, captured_at, model_id) already existed.
    pub skipped: usize,
}

/// Half-open `[start, end)` time range.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TimeRange {
    pub start: DateTime<Utc>,
    pub end: DateTime<Utc>,
}

impl TimeRange {
    pub fn new(start: DateTime<Utc>, end: DateTime<Utc>) -> Result<Self, StoreError> {
        if start > end {
            return Err(StoreError::InvalidRange { start, end });
        }
        Ok(Self { start, end })
    }

    pub fn all() -> Self {
        Self {
            start: DateTime::<Utc>::MIN_UTC,
            end: DateTime::<Utc>::MAX_UTC,
        }
    }

    pub fn contains(&self, t: DateTime<Utc>) -> bool {
        self.start <= t && t < self.end
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SeriesQuery {
    /// `None` selects every source present in the store.
    pub sources: Option<Vec<SourceId>>,
    pub range: TimeRange,
    pub selector: ClassSelector,
    pub model_id: Option<String>,
}

impl Default for SeriesQuery {
    fn default() -> Self {
        Self {
            sources: None,
            range: TimeRange::all(),
            selector: ClassSelector::Total,
            model_id: None,
        }
    }
}

/// SQLite-backed detection store. Writes are serialized through one
/// connection; readers may open the same file concurrently.
pub struct Store {
    conn: Mutex<Connection>,
    path: Option<PathBuf>,
    abort_after_rows: Option<usize>,
}

impl Store {
    pub fn open(path: &Path) -> Result<Self, StoreError> {
        let conn = Connection::open(path)?;
        conn.pragma_update(None, "journal_mode", "WAL")?;
        conn.pragma_update(None, "synchronous", "NORMAL")?;
        conn.busy_timeout(std::time::Duration::from_secs(5))?;
        Self::init(conn, Some(path.to_path_buf()))
    }

    /// Opens an existing database without creating it.
    pub fn open_existing(path: &Path) -> Result<Self, StoreError> {
        if !path.exists() {
            return Err(StoreError::Missing(path.to_path_buf()));
        }
        let conn = Connection::open_with_flags(path, OpenFlags::SQLITE_OPEN_READ_WRITE | OpenFlags::SQLITE_OPEN_NO_MUTEX)?;
        conn.busy_timeout(std::time::Duration::from_secs(5))?;
        Self::init(conn, Some(path.to_path_buf()))
    }

    pub fn open_in_memory() -> Result<Self, StoreError> {
        Self::init(Connection::open_in_memory()?, None)
    }

    fn init(conn: Connection, path: Option<PathBuf>) -> Result<Self, StoreError> {
        conn.execute_batch(SCHEMA)?;
        let abort_after_rows = std::env::var(FAULT_ABORT_ENV).ok().and_then(|v| v.parse().ok());
        Ok(Self {
            conn: Mutex::new(conn),
            path,
            abort_after_rows,
        })
    }

    pub fn path(&self) -> Option<&Path> {
        self.path.as_deref()
    }

    fn lock(&self) -> std::sync::MutexGuard<'_, Connection> {
        self.conn.lock().unwrap_or_else(|poisoned| poisoned.into_inner())
    }

    pub fn append(&self, results: &[DetectionResult]) -> Result<AppendOutcome, StoreError> {
        let records: Vec<NewRecord> = results.iter().map(NewRecord::from).collect();
        self.append_records(&records)
    }

    /// Inserts all rows in one transaction. Rows colliding on
    /// (source, captured_at, model_id) are skipped; on error nothing is written.
    pub fn append_records(&self, records: &[NewRecord]) -> Result<AppendOutcome, StoreError> {
        for (index, r) in records.iter().enumerate() {
            if !(r.threshold > 0.0 && r.threshold <= 1.0) {
                return Err(StoreError::InvalidRecord {
                    index,
                    message: format!("threshold {} outside (0, 1]", r.threshold),
                });
            }
            if r.model_id.is_empty() {
                return Err(StoreError::InvalidRecord {
                    index,
                    message: "empty model_id".into(),
                });
            }
        }
        let mut conn = self.lock();
        let tx = conn.transaction()?;
        let mut outcome = AppendOutcome::default();
        {
            let mut insert = tx.prepare_cached(
                "INSERT OR IGNORE INTO detections
                 (source, captured_at_ms, bicycle, car, motorcycle, bus, truck, total, threshold, model_id)
                 VALUES (?1, ?2, ?3, ?4, ?5, ?6, ?7, ?8, ?9, ?10)",
            )?;
            for (i, r) in records.iter().enumerate() {
                if self.abort_after_rows == Some(i) {
                    std::process::abort();
                }
                let [bicycle, car, motorcycle, bus, truck] = r.counts.as_array();
                let changed = insert.execute(params![
                    r.source.as_str(),
                    r.captured_at.timestamp_millis(),
                    bicycle,
                    car,
                    motorcycle,
                    bus,
                    truck,
                    r.counts.total() as i64,
                    r.threshold,
                    r.model_id,
                ])?;
                if changed == 1 {
                    outcome.written += 1;
                } else {
                    outcome.skipped += 1;
                }
            }
        }
        tx.commit()?;
        Ok(outcome)
    }

    pub fn count(&self) -> Result<u64, StoreError> {
        let n: i64 = self.lock().query_row("SELECT COUNT(*) FROM detections", [], |row| row.get(0))?;
        Ok(n as u64)
    }

    pub fn sources(&self) -> Result<Vec<SourceId>, StoreError> {
        let conn = self.lock();
        let mut stmt = conn.prepare("SELECT DISTINCT source FROM detections ORDER BY source")?;
        let ids = stmt
            .query_map([], |row| row.get::<_, String>(0))?
            .collect::<Result<Vec<_>, _>>()?;
        ids.into_iter()
            .map(|id| {
                SourceId::new(id).map_err(|e| StoreError::CorruptRow {
                    row_id: -1,
                    message: e.to_string(),
                })
            })
            .collect()
    }

    /// All rows ordered by row id.
    pub fn records(&self) -> Result<Vec<StoredRecord>, StoreError> {
        let conn = self.lock();
        let mut stmt = conn.prepare(
            "SELECT row_id, source, captured_at_ms, bicycle, car, motorcycle, bus, truck, total, threshold, model_id
             FROM detections ORDER BY row_id",
        )?;
        let raw = stmt
            .query_map([], |row| {
                Ok((
                    row.get::<_, i64>(0)?,
                    row.get::<_, String>(1)?,
                    row.get::<_, i64>(2)?,
                    [
                        row.get::<_, u32>(3)?,
                        row.get::<_, u32>(4)?,
                        row.get::<_, u32>(5)?,
                        row.get::<_, u32>(6)?,
                        row.get::<_, u32>(7)?,
                    ],
                    row.get::<_, i64>(8)?,
                    row.get::<_, f64>(9)?,
                    row.get::<_, String>(10)?,
                ))
            })?
            .collect::<Result<Vec<_>, _>>()?;
        raw.into_iter()
            .map(|(row_id, source, ms, counts, total, threshold, model_id)| {
                let corrupt = |message: String| StoreError::CorruptRow { row_id, message };
                Ok(StoredRecord {
                    row_id,
                    source: SourceId::new(source).map_err(|e| corrupt(e.to_string()))?,
                    captured_at: utc_from_millis(ms).map_err(|e| corrupt(e.to_string()))?,
                    counts: ClassCounts::from_array(counts),
                    total: total as u64,
                    threshold,
                    model_id,
                })
            })
            .collect()
    }

    /// Per-source observation series restricted to `query.range`, each sorted
    /// by capture time. Explicitly requested sources without rows yield empty
    /// series.
    pub fn query_series(&self, query: &SeriesQuery) -> Result<Vec<ObservationSeries>, StoreError> {
        let TimeRange { start, end } = query.range;
        if start > end {
            return Err(StoreError::InvalidRange { start, end });
        }
        let conn = self.lock();
        let mut stmt = conn.prepare_cached(
            "SELECT row_id, source, captured_at_ms, bicycle, car, motorcycle, bus, truck
             FROM detections
             WHERE captured_at_ms >= ?1 AND captured_at_ms < ?2 AND (?3 IS NULL OR model_id = ?3)
             ORDER BY source, captured_at_ms, model_id",
        )?;
        let mut by_source: BTreeMap<String, Vec<Observation>> = BTreeMap::new();
        if let Some(sources) = &query.sources {
            for s in sources {
                by_source.entry(s.to_string()).or_default();
            }
        }
        let mut rows = stmt.query(params![start.timestamp_millis(), end.timestamp_millis(), query.model_id])?;
        while let Some(row) = rows.next()? {
            let source: String = row.get(1)?;
            let slot = match by_source.get_mut(&source) {
                Some(slot) => slot,
                None if query.sources.is_none() => by_source.entry(source.clone()).or_default(),
                None => continue,
            };
            let row_id: i64 = row.get(0)?;
            let corrupt = |message: String| StoreError::CorruptRow { row_id, message };
            let counts = ClassCounts::from_array([row.get(3)?, row.get(4)?, row.get(5)?, row.get(6)?, row.get(7)?]);
            slot.push(Observation::new(
                SourceId::new(source).map_err(|e| corrupt(e.to_string()))?,
                utc_from_millis(row.get(2)?).map_err(|e| corrupt(e.to_string()))?,
                counts.restrict(query.selector),
            ));
        }
        by_source
            .into_iter()
            .map(|(source, items)| {
                let source = SourceId::new(source).map_err(|e| StoreError::CorruptRow {
                    row_id: -1,
                    message: e.to_string(),
                })?;
                ObservationSeries::new(source, items).map_err(|e| StoreError::CorruptRow {
                    row_id: -1,
                    message: e.to_string(),
                })
            })
            .collect()
    }
}
