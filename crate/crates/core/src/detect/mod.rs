//! Detection boundary: turns frame batches into per-class vehicle counts.
//!
//! Backends are exchangeable. [`StubBackend`] decodes the count header that
//! the camera simulator paints into its frames; [`SubprocessBackend`] talks to
//! an external worker over newline-delimited JSON.

mod letterbox;
mod pattern;
pub mod protocol;
mod subprocess;

use chrono::{DateTime, Utc};
use serde::Serialize;
use thiserror::Error;

use crate::ingest::{Frame, FrameBatch};
use crate::model::{ClassCounts, SourceId, VehicleClass};

pub use letterbox::{letterbox, LetterboxGeometry, DEFAULT_INPUT_SIZE, PAD_GRAY};
pub use pattern::{decode_pattern, encode_pattern_jpeg, render_pattern, PatternError, BLOCKS_PER_ROW, HEADER_ROWS};
pub use subprocess::SubprocessBackend;

pub const DEFAULT_CONFIDENCE_THRESHOLD: f32 = 0.25;
pub const STUB_MODEL_ID: &str = "stub-pattern-v1";
/// Confidence the stub assigns to every decoded vehicle.
pub const STUB_CONFIDENCE: f32 = 0.9;

#[derive(Debug, Error)]
pub enum DetectError {
    #[error("image has zero dimension ({width}x{height})")]
    EmptyImage { width: u32, height: u32 },
    #[error("batch of {len} frames exceeds backend max_batch {max}")]
    BatchTooLarge { len: usize, max: usize },
    #[error("confidence threshold {0} is outside (0, 1]")]
    InvalidThreshold(f32),
    #[error(transparent)]
    Backend(#[from] BackendError),
}

impl DetectError {
    /// Whether the same batch may succeed if submitted again.
    pub fn is_retriable(&self) -> bool {
        matches!(self, DetectError::Backend(e) if e.is_retriable())
    }
}

#[derive(Debug, Error)]
pub enum BackendError {
    #[error("detector did not answer within {0} ms")]
    Timeout(u64),
    #[error("detector process exited or closed its pipes")]
    Crashed,
    #[error("detector reported an error: {0}")]
    Worker(String),
    #[error("detector protocol violation: {0}")]
    Protocol(String),
    #[error("detector handshake rejected: {0}")]
    Handshake(String),
    #[error("failed to start detector: {0}")]
    Spawn(#[source] std::io::Error),
}

impl BackendError {
    pub fn is_retriable(&self) -> bool {
        matches!(
            self,
            BackendError::Timeout(_) | BackendError::Crashed | BackendError::Worker(_) | BackendError::Protocol(_)
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct BackendCapabilities {
    pub max_batch: usize,
    pub input_size: u32,
    pub model_id: String,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Detection {
    pub class: VehicleClass,
    pub confidence: f32,
}

/// Raw backend output for one frame.
#[derive(Debug, Clone, PartialEq)]
pub enum FrameDetections {
    /// Individual detections; the gateway applies the threshold.
    Scored(Vec<Detection>),
    /// Counts already thresholded by the backend (external workers).
    Counted(ClassCounts),
    /// The frame could not be decoded.
    Corrupt(String),
}

pub trait DetectorBackend: Send {
    fn capabilities(&self) -> &BackendCapabilities;

    /// Must return exactly one entry per input frame, in order.
    fn infer(&mut self, frames: &[Frame]) -> Result<Vec<FrameDetections>, BackendError>;
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DetectionResult {
    pub source: SourceId,
    pub captured_at: DateTime<Utc>,
    pub counts: ClassCounts,
    pub confidence_threshold: f32,
    pub model_id: String,
    /// Set when the frame was corrupt; counts are then all zero.
    pub frame_error: Option<String>,
}

/// Decodes the count header of a synthetic frame. Frames without a header
/// (or that fail to decode at all) count as empty.
pub fn stub_detect(frame: &Frame) -> ClassCounts {
    match stub_decode(frame) {
        FrameDetections::Scored(dets) => {
            let mut counts = ClassCounts::zero();
            for d in dets {
                counts.increment(d.class);
            }
            counts
        }
        FrameDetections::Counted(c) => c,
        FrameDetections::Corrupt(_) => ClassCounts::zero(),
    }
}

fn stub_decode(frame: &Frame) -> FrameDetections {
    let image = match image::load_from_memory(&frame.payload) {
        Ok(img) => img,
        Err(e) => return FrameDetections::Corrupt(e.to_string()),
    };
    let counts = decode_pattern(&image.to_luma8()).unwrap_or_default();
    let detections = counts
        .iter()
        .flat_map(|(class, n)| {
            std::iter::repeat_n(
                Detection {
                    class,
                    confidence: STUB_CONFIDENCE,
                },
                n as usize,
            )
        })
        .collect();
    FrameDetections::Scored(detections)
}

/// Deterministic in-process backend for tests and simulator runs.
#[derive(Debug, Clone)]
pub struct StubBackend {
    capabilities: BackendCapabilities,
}

impl StubBackend {
    pub fn new(max_batch: usize) -> Self {
        Self {
            capabilities: BackendCapabilities {
                max_batch,
                input_size: DEFAULT_INPUT_SIZE,
                model_id: STUB_MODEL_ID.to_string(),
            },
        }
    }
}

impl Default for StubBackend {
    fn default() -> Self {
        Self::new(crate::ingest::DEFAULT_BATCH_SIZE)
    }
}

impl DetectorBackend for StubBackend {
    fn capabilities(&self) -> &BackendCapabilities {
        &self.capabilities
    }

    fn infer(&mut self, frames: &[Frame]) -> Result<Vec<FrameDetections>, BackendError> {
        Ok(frames.iter().map(stub_decode).collect())
    }
}

/// Runs one batch through `backend` and reduces the output to per-class
/// counts, keeping only detections with confidence at or above `threshold`.
pub fn detect_batch(
    batch: &FrameBatch,
    backend: &mut dyn DetectorBackend,
    threshold: f32,
) -> Result<Vec<DetectionResult>, DetectError> {
    if !(threshold > 0.0 && threshold <= 1.0) {
        return Err(DetectError::InvalidThreshold(threshold));
    }
    let max = backend.capabilities().max_batch;
    if batch.frames.len() > max {
        return Err(DetectError::BatchTooLarge {
            len: batch.frames.len(),
            max,
        });
    }
    let outputs = backend.infer(&batch.frames)?;
    if outputs.len() != batch.frames.len() {
        return Err(BackendError::Protocol(format!(
            "{} results for {} frames",
            outputs.len(),
            batch.frames.len()
        ))
        .into());
    }
    let model_id = backend.capabilities().model_id.clone();
    Ok(batch
        .frames
        .iter()
        .zip(outputs)
        .map(|(frame, output)| {
            let (counts, frame_error) = match output {
                FrameDetections::Scored(dets) => {
                    let mut counts = ClassCounts::zero();
                    for d in dets.iter().filter(|d| d.confidence >= threshold) {
                        counts.increment(d.class);
                    }
                    (counts, None)
                }
                FrameDetections::Counted(counts) => (counts, None),
                FrameDetections::Corrupt(reason) => (ClassCounts::zero(), Some(reason)),
            };
            DetectionResult {
                source: frame.source.clone(),
                captured_at: frame.captured_at,
                counts,
                confidence_threshold: threshold,
                model_id: model_id.clone(),
                frame_error,
            }
        })
        .collect())
}
