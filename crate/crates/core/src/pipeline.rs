//! Glue between the collector, a detector backend and the store.

use std::sync::Arc;

use log::{debug, warn};

use crate::detect::{detect_batch, DetectorBackend};
use crate::ingest::{BatchSink, FrameBatch, SinkError};
use crate::store::{AppendOutcome, Store};

/// Batch sink that runs detection on each batch and appends the counts.
pub struct DetectAndStore {
    backend: Box<dyn DetectorBackend>,
    store: Arc<Store>,
    threshold: f32,
    totals: AppendOutcome,
}

impl DetectAndStore {
    pub fn new(backend: Box<dyn DetectorBackend>, store: Arc<Store>, threshold: f32) -> Self {
        Self {
            backend,
            store,
            threshold,
            totals: AppendOutcome::default(),
        }
    }

    pub fn totals(&self) -> AppendOutcome {
        self.totals
    }
}

impl BatchSink for DetectAndStore {
    fn consume(&mut self, batch: &FrameBatch) -> Result<(), SinkError> {
        let results = detect_batch(batch, self.backend.as_mut(), self.threshold).map_err(|e| SinkError {
            retriable: e.is_retriable(),
            message: format!("detection failed: {e}"),
        })?;
        for r in results.iter().filter(|r| r.frame_error.is_some()) {
            warn!("{} at {}: {}", r.source, r.captured_at, r.frame_error.as_deref().unwrap_or_default());
        }
        let outcome = self.store.append(&results).map_err(|e| SinkError {
            retriable: e.is_retriable(),
            message: format!("store append failed: {e}"),
        })?;
        debug!("batch {}: wrote {} skipped {}", batch.batch_id, outcome.written, outcome.skipped);
        self.totals.written += outcome.written;
        self.totals.skipped += outcome.skipped;
        Ok(())
    }
}
