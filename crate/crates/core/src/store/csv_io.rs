use std::io::{Read, Write};

use crate::model::{utc_from_millis, ClassCounts, SourceId};

use super::{AppendOutcome, NewRecord, Store, StoreError};

pub const CSV_HEADER: [&str; 11] = [
    "row_id",
    "source",
    "captured_at_ms",
    "bicycle",
    "car",
    "motorcycle",
    "bus",
    "truck",
    "total",
    "threshold",
    "model_id",
];

const IMPORT_CHUNK: usize = 4096;

impl Store {
    /// Writes every row, ordered by row id, as RFC 4180 CSV with a header.
    /// Returns the number of data rows.
    pub fn export_csv<W: Write>(&self, out: W) -> Result<usize, StoreError> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(CSV_HEADER)?;
        let records = self.records()?;
        for r in &records {
            let [bicycle, car, motorcycle, bus, truck] = r.counts.as_array();
            w.write_record([
                r.row_id.to_string(),
                r.source.to_string(),
                r.captured_at.timestamp_millis().to_string(),
                bicycle.to_string(),
                car.to_string(),
                motorcycle.to_string(),
                bus.to_string(),
                truck.to_string(),
                r.total.to_string(),
                r.threshold.to_string(),
                r.model_id.clone(),
            ])?;
        }
        w.flush()?;
        Ok(records.len())
    }

    /// Reads CSV in the export format and appends it. Row ids in the file are
    /// not reused; rows already present are skipped. The whole file is
    /// validated before anything is written.
    pub fn import_csv<R: Read>(&self, input: R) -> Result<AppendOutcome, StoreError> {
        let records = parse_csv(input)?;
        let mut outcome = AppendOutcome::default();
        for chunk in records.chunks(IMPORT_CHUNK) {
            let part = self.append_records(chunk)?;
            outcome.written += part.written;
            outcome.skipped += part.skipped;
        }
        Ok(outcome)
    }
}

pub(crate) fn parse_csv<R: Read>(input: R) -> Result<Vec<NewRecord>, StoreError> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(input);
    let header = reader.headers()?.clone();
    if header.iter().ne(CSV_HEADER.iter().copied()) {
        return Err(StoreError::MalformedCsv {
            line: 1,
            message: format!("expected header {}", CSV_HEADER.join(",")),
        });
    }
    let mut out = Vec::new();
    for row in reader.records() {
        let row = row?;
        let line = row.position().map_or(0, |p| p.line());
        let bad = |message: String| StoreError::MalformedCsv { line, message };
        let field = |i: usize| row.get(i).unwrap_or_default();
        let int = |i: usize| -> Result<u32, StoreError> {
            field(i)
                .parse::<u32>()
                .map_err(|e| bad(format!("{}: {e}", CSV_HEADER[i])))
        };
        let source = SourceId::new(field(1)).map_err(|e| bad(e.to_string()))?;
        let ms: i64 = field(2)
            .parse()
            .map_err(|e| bad(format!("captured_at_ms: {e}")))?;
        let captured_at = utc_from_millis(ms).map_err(|e| bad(e.to_string()))?;
        let counts = ClassCounts::from_array([int(3)?, int(4)?, int(5)?, int(6)?, int(7)?]);
        let total: u64 = field(8).parse().map_err(|e| bad(format!("total: {e}")))?;
        if total != counts.total() {
            return Err(bad(format!("total {total} does not match class sum {}", counts.total())));
        }
        let threshold: f64 = field(9).parse().map_err(|e| bad(format!("threshold: {e}")))?;
        if !(threshold > 0.0 && threshold <= 1.0) {
            return Err(bad(format!("threshold {threshold} outside (0, 1]")));
        }
        let model_id = field(10).to_string();
        if model_id.is_empty() {
            return Err(bad("empty model_id".into()));
        }
        out.push(NewRecord {
            source,
            captured_at,
            counts,
            threshold,
            model_id,
        });
    }
    Ok(out)
}
