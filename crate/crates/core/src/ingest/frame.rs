use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::model::SourceId;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PayloadFormat {
    Jpeg,
    Png,
    Unknown,
}

impl PayloadFormat {
    /// Sniffs the format from magic bytes.
    pub fn detect(payload: &[u8]) -> Self {
        match payload {
            [0xFF, 0xD8, 0xFF, ..] => PayloadFormat::Jpeg,
            [0x89, b'P', b'N', b'G', ..] => PayloadFormat::Png,
            _ => PayloadFormat::Unknown,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            PayloadFormat::Jpeg => "jpeg",
            PayloadFormat::Png => "png",
            PayloadFormat::Unknown => "unknown",
        }
    }
}

/// One captured still image. Frames live only until their batch has been
/// consumed; they are never persisted.
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    pub source: SourceId,
    /// When the last payload byte arrived.
    pub captured_at: DateTime<Utc>,
    pub payload: Vec<u8>,
    pub payload_format: PayloadFormat,
    /// Request start to last byte, in milliseconds.
    pub download_ms: f64,
    /// Upstream `x-request-id`, when the camera sends one.
    pub request_id: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrameBatch {
    pub batch_id: u64,
    pub frames: Vec<Frame>,
}

impl FrameBatch {
    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sniffs_formats() {
        assert_eq!(PayloadFormat::detect(&[0xFF, 0xD8, 0xFF, 0xE0]), PayloadFormat::Jpeg);
        assert_eq!(PayloadFormat::detect(b"\x89PNG\r\n"), PayloadFormat::Png);
        assert_eq!(PayloadFormat::detect(b"GIF89a"), PayloadFormat::Unknown);
        assert_eq!(PayloadFormat::detect(&[]), PayloadFormat::Unknown);
    }
}
