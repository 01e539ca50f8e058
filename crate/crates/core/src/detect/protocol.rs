//! Newline-delimited JSON messages exchanged with external detector workers.
//!
//! ```text
//! worker  -> {"type":"hello","max_batch":64,"model_id":"..."}
//! gateway -> {"type":"detect","batch_id":7,"frames":[{"source":..,"captured_at":..,"format":"jpeg","data":BASE64}]}
//! worker  -> {"type":"result","batch_id":7,"results":[{"source":..,"captured_at":..,"counts":{..}}]}
//! worker  -> {"type":"error","batch_id":7,"message":"..."}
//! ```
//!
//! One JSON document per line, UTF-8.

use base64::engine::general_purpose::STANDARD as BASE64;
use base64::Engine;
use chrono::{DateTime, SecondsFormat, Utc};
use serde::{Deserialize, Serialize};

use crate::ingest::Frame;
use crate::model::{ClassCounts, SourceId};

/// Messages a worker may send.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum WorkerMessage {
    Hello {
        max_batch: usize,
        model_id: String,
    },
    Result {
        batch_id: i64,
        results: Vec<WireResult>,
    },
    Error {
        batch_id: i64,
        message: String,
    },
}

/// Messages the gateway sends.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum GatewayMessage {
    Detect { batch_id: i64, frames: Vec<WireFrame> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WireFrame {
    pub source: SourceId,
    pub captured_at: String,
    pub format: String,
    pub data: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WireResult {
    pub source: SourceId,
    pub captured_at: String,
    pub counts: ClassCounts,
}

/// ISO 8601 UTC with millisecond precision, e.g. `2025-01-10T13:30:00.000Z`.
pub fn format_timestamp(t: DateTime<Utc>) -> String {
    t.to_rfc3339_opts(SecondsFormat::Millis, true)
}

pub fn parse_timestamp(s: &str) -> Option<DateTime<Utc>> {
    DateTime::parse_from_rfc3339(s).ok().map(|t| t.to_utc())
}

impl WireFrame {
    pub fn from_frame(frame: &Frame) -> Self {
        Self {
            source: frame.source.clone(),
            captured_at: format_timestamp(frame.captured_at),
            format: frame.payload_format.as_str().to_string(),
            data: BASE64.encode(&frame.payload),
        }
    }

    pub fn decode_payload(&self) -> Result<Vec<u8>, base64::DecodeError> {
        BASE64.decode(&self.data)
    }
}

pub fn detect_request(batch_id: i64, frames: &[Frame]) -> GatewayMessage {
    GatewayMessage::Detect {
        batch_id,
        frames: frames.iter().map(WireFrame::from_frame).collect(),
    }
}

/// Serializes `msg` as a single line including the trailing newline.
pub fn to_line<T: Serialize>(msg: &T) -> String {
    let mut line = serde_json::to_string(msg).expect("protocol messages always serialize");
    line.push('\n');
    line
}
