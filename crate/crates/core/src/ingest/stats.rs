use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::sync::atomic::{AtomicU64, Ordering};

use serde::Serialize;

use crate::model::SourceId;

#[derive(Debug, Default)]
struct Counters {
    fetched: AtomicU64,
    discarded_timeout: AtomicU64,
    discarded_error: AtomicU64,
    discarded_queue_full: AtomicU64,
    batched: AtomicU64,
    persisted: AtomicU64,
    sink_failed: AtomicU64,
}

impl Counters {
    fn snapshot(&self) -> SourceStats {
        let get = |c: &AtomicU64| c.load(Ordering::SeqCst);
        SourceStats {
            fetched: get(&self.fetched),
            discarded_timeout: get(&self.discarded_timeout),
            discarded_error: get(&self.discarded_error),
            discarded_queue_full: get(&self.discarded_queue_full),
            batched: get(&self.batched),
            persisted: get(&self.persisted),
            sink_failed: get(&self.sink_failed),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct SourceStats {
    pub fetched: u64,
    pub discarded_timeout: u64,
    pub discarded_error: u64,
    pub discarded_queue_full: u64,
    pub batched: u64,
    pub persisted: u64,
    pub sink_failed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Event {
    Fetched,
    Timeout,
    Error,
    QueueFull,
    Batched,
    Persisted,
    SinkFailed,
}

/// Lock-free counters shared by fetch workers, the batcher and readers.
#[derive(Debug)]
pub struct StatsRecorder {
    total: Counters,
    per_source: HashMap<SourceId, Counters>,
    batches: AtomicU64,
    batches_failed: AtomicU64,
    resident: AtomicU64,
    peak_resident: AtomicU64,
}

impl StatsRecorder {
    pub fn new<'a>(sources: impl IntoIterator<Item = &'a SourceId>) -> Self {
        Self {
            total: Counters::default(),
            per_source: sources.into_iter().map(|s| (s.clone(), Counters::default())).collect(),
            batches: AtomicU64::new(0),
            batches_failed: AtomicU64::new(0),
            resident: AtomicU64::new(0),
            peak_resident: AtomicU64::new(0),
        }
    }

    pub(crate) fn record(&self, source: &SourceId, event: Event, n: u64) {
        fn pick(c: &Counters, event: Event) -> &AtomicU64 {
            match event {
                Event::Fetched => &c.fetched,
                Event::Timeout => &c.discarded_timeout,
                Event::Error => &c.discarded_error,
                Event::QueueFull => &c.discarded_queue_full,
                Event::Batched => &c.batched,
                Event::Persisted => &c.persisted,
                Event::SinkFailed => &c.sink_failed,
            }
        }
        if let Some(counters) = self.per_source.get(source) {
            pick(counters, event).fetch_add(n, Ordering::SeqCst);
        }
        pick(&self.total, event).fetch_add(n, Ordering::SeqCst);
    }

    pub(crate) fn batch_done(&self, ok: bool) {
        self.batches.fetch_add(1, Ordering::SeqCst);
        if !ok {
            self.batches_failed.fetch_add(1, Ordering::SeqCst);
        }
    }

    pub(crate) fn frame_acquired(&self) {
        let now = self.resident.fetch_add(1, Ordering::SeqCst) + 1;
        self.peak_resident.fetch_max(now, Ordering::SeqCst);
    }

    pub(crate) fn frames_released(&self, n: u64) {
        self.resident.fetch_sub(n, Ordering::SeqCst);
    }

    pub fn snapshot(&self) -> CollectorStats {
        let per_source = self
            .per_source
            .iter()
            .map(|(id, c)| (id.to_string(), c.snapshot()))
            .collect();
        CollectorStats {
            totals: self.total.snapshot(),
            batches: self.batches.load(Ordering::SeqCst),
            batches_failed: self.batches_failed.load(Ordering::SeqCst),
            resident_frames: self.resident.load(Ordering::SeqCst),
            peak_resident_frames: self.peak_resident.load(Ordering::SeqCst),
            per_source,
        }
    }
}

/// Point-in-time view of collector counters.
///
/// At quiescence `fetched = discarded_timeout + discarded_error +
/// discarded_queue_full + batched`; while running the difference is the
/// number of frames still queued or buffered.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct CollectorStats {
    #[serde(flatten)]
    pub totals: SourceStats,
    pub batches: u64,
    pub batches_failed: u64,
    pub resident_frames: u64,
    pub peak_resident_frames: u64,
    pub per_source: BTreeMap<String, SourceStats>,
}

impl CollectorStats {
    pub fn in_flight(&self) -> u64 {
        let t = &self.totals;
        t.fetched
            .saturating_sub(t.discarded_timeout + t.discarded_error + t.discarded_queue_full + t.batched)
    }

    pub fn timeout_ratio(&self) -> f64 {
        if self.totals.fetched == 0 {
            return 0.0;
        }
        self.totals.discarded_timeout as f64 / self.totals.fetched as f64
    }
}

impl fmt::Display for CollectorStats {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let t = &self.totals;
        write!(
            f,
            "fetched={} discarded_timeout={} discarded_error={} discarded_queue_full={} batched={} persisted={} sink_failed={} batches={} resident={}",
            t.fetched,
            t.discarded_timeout,
            t.discarded_error,
            t.discarded_queue_full,
            t.batched,
            t.persisted,
            t.sink_failed,
            self.batches,
            self.resident_frames
        )
    }
}
