//! Concurrent frame capture: per-camera polling, latency-gated discard,
//! bounded queueing with drop-newest backpressure, and fixed-size batching.

mod batch;
mod collector;
mod config;
mod fetch;
mod frame;
mod stats;

pub use batch::{form_batches, Batcher};
pub use collector::{run_collector, BatchSink, Collector, SinkError};
pub use config::{
    load_camera_file, parse_camera_list, write_camera_file, CameraEndpoint, CameraEntry, CollectorConfig, ConfigError,
    DEFAULT_BATCH_MAX_WAIT_MS, DEFAULT_BATCH_SIZE, DEFAULT_DOWNLOAD_TIMEOUT_MS, DEFAULT_POLL_INTERVAL_MS,
    DEFAULT_QUEUE_CAPACITY, DEFAULT_WORKERS, WORKERS_ENV,
};
pub use fetch::{fetch_frame, http_client, DiscardReason, FetchOutcome, REQUEST_ID_HEADER};
pub use frame::{Frame, FrameBatch, PayloadFormat};
pub use stats::{CollectorStats, SourceStats, StatsRecorder};
