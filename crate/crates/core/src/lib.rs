//! Traffic camera analytics: concurrent frame collection with latency-gated
//! discard, batched vehicle detection, durable count storage and Peak Hour
//! Differential analysis around a policy split date.

pub mod analysis;
pub mod calendar;
pub mod camsim;
pub mod cli;
pub mod clock;
pub mod detect;
pub mod ingest;
pub mod model;
pub mod pipeline;
pub mod store;
