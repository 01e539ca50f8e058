use std::collections::HashSet;
use std::path::Path;
use std::time::Duration;

use reqwest::Url;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::SourceId;

pub const DEFAULT_WORKERS: usize = 16;
pub const DEFAULT_BATCH_SIZE: usize = 64;
pub const DEFAULT_DOWNLOAD_TIMEOUT_MS: f64 = 100.0;
pub const DEFAULT_BATCH_MAX_WAIT_MS: f64 = 250.0;
pub const DEFAULT_QUEUE_CAPACITY: usize = 4 * DEFAULT_BATCH_SIZE;
pub const DEFAULT_POLL_INTERVAL_MS: u64 = 2000;
pub const DEFAULT_SINK_RETRIES: u32 = 3;
pub const WORKERS_ENV: &str = "COLLECTOR_WORKERS";

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("{0} must be at least 1")]
    Zero(&'static str),
    #[error("{0} must be a positive number of milliseconds")]
    NonPositive(&'static str),
    #[error("queue_capacity {capacity} is smaller than batch_size {batch_size}")]
    QueueTooSmall { capacity: usize, batch_size: usize },
    #[error("camera '{id}': invalid url '{url}': {reason}")]
    BadUrl { id: String, url: String, reason: String },
    #[error("camera '{0}' is listed more than once")]
    DuplicateCamera(String),
    #[error("camera entry has an empty id")]
    EmptyCameraId,
    #[error("camera list is empty")]
    NoCameras,
    #[error("cannot read camera file {path}: {reason}")]
    CameraFile { path: String, reason: String },
    #[error("{var}='{value}' is not a positive integer")]
    BadEnv { var: &'static str, value: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CollectorConfig {
    pub workers: usize,
    pub batch_size: usize,
    pub download_timeout_ms: f64,
    pub batch_max_wait_ms: f64,
    pub queue_capacity: usize,
    /// Attempts per batch before the sink failure is counted and the batch dropped.
    pub sink_retries: u32,
}

impl Default for CollectorConfig {
    fn default() -> Self {
        Self {
            workers: DEFAULT_WORKERS,
            batch_size: DEFAULT_BATCH_SIZE,
            download_timeout_ms: DEFAULT_DOWNLOAD_TIMEOUT_MS,
            batch_max_wait_ms: DEFAULT_BATCH_MAX_WAIT_MS,
            queue_capacity: DEFAULT_QUEUE_CAPACITY,
            sink_retries: DEFAULT_SINK_RETRIES,
        }
    }
}

impl CollectorConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.workers == 0 {
            return Err(ConfigError::Zero("workers"));
        }
        if self.batch_size == 0 {
            return Err(ConfigError::Zero("batch_size"));
        }
        if self.sink_retries == 0 {
            return Err(ConfigError::Zero("sink_retries"));
        }
        if !(self.download_timeout_ms > 0.0 && self.download_timeout_ms.is_finite()) {
            return Err(ConfigError::NonPositive("download_timeout_ms"));
        }
        if !(self.batch_max_wait_ms > 0.0 && self.batch_max_wait_ms.is_finite()) {
            return Err(ConfigError::NonPositive("batch_max_wait_ms"));
        }
        if self.queue_capacity < self.batch_size {
            return Err(ConfigError::QueueTooSmall {
                capacity: self.queue_capacity,
                batch_size: self.batch_size,
            });
        }
        Ok(())
    }

    /// Applies `COLLECTOR_WORKERS` when set.
    pub fn apply_env(&mut self) -> Result<(), ConfigError> {
        if let Ok(value) = std::env::var(WORKERS_ENV) {
            self.workers = value
                .trim()
                .parse::<usize>()
                .ok()
                .filter(|&n| n > 0)
                .ok_or(ConfigError::BadEnv { var: WORKERS_ENV, value })?;
        }
        Ok(())
    }

    pub fn download_timeout(&self) -> Duration {
        Duration::from_secs_f64(self.download_timeout_ms / 1000.0)
    }

    pub fn batch_max_wait(&self) -> Duration {
        Duration::from_secs_f64(self.batch_max_wait_ms / 1000.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CameraEndpoint {
    pub source: SourceId,
    pub url: Url,
    pub expected_width: u32,
    pub expected_height: u32,
    pub poll_interval: Duration,
}

/// One entry of the camera list file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CameraEntry {
    pub id: String,
    pub url: String,
    #[serde(default = "default_width")]
    pub width: u32,
    #[serde(default = "default_height")]
    pub height: u32,
    #[serde(default = "default_poll_interval_ms")]
    pub poll_interval_ms: u64,
}

fn default_width() -> u32 {
    352
}

fn default_height() -> u32 {
    240
}

fn default_poll_interval_ms() -> u64 {
    DEFAULT_POLL_INTERVAL_MS
}

impl CameraEntry {
    pub fn to_endpoint(&self) -> Result<CameraEndpoint, ConfigError> {
        let source = SourceId::new(&self.id).map_err(|_| ConfigError::EmptyCameraId)?;
        let bad_url = |reason: String| ConfigError::BadUrl {
            id: self.id.clone(),
            url: self.url.clone(),
            reason,
        };
        let url = Url::parse(&self.url).map_err(|e| bad_url(e.to_string()))?;
        if !matches!(url.scheme(), "http" | "https") {
            return Err(bad_url(format!("unsupported scheme '{}'", url.scheme())));
        }
        if url.host_str().is_none() {
            return Err(bad_url("missing host".into()));
        }
        if self.poll_interval_ms == 0 {
            return Err(ConfigError::NonPositive("poll_interval_ms"));
        }
        Ok(CameraEndpoint {
            source,
            url,
            expected_width: self.width,
            expected_height: self.height,
            poll_interval: Duration::from_millis(self.poll_interval_ms),
        })
    }

    pub fn from_endpoint(cam: &CameraEndpoint) -> Self {
        Self {
            id: cam.source.to_string(),
            url: cam.url.to_string(),
            width: cam.expected_width,
            height: cam.expected_height,
            poll_interval_ms: cam.poll_interval.as_millis() as u64,
        }
    }
}

/// Validates a full camera list: every URL parses and ids are unique.
pub fn parse_camera_list(json: &str) -> Result<Vec<CameraEndpoint>, ConfigError> {
    let entries: Vec<CameraEntry> = serde_json::from_str(json).map_err(|e| ConfigError::CameraFile {
        path: "<inline>".into(),
        reason: e.to_string(),
    })?;
    if entries.is_empty() {
        return Err(ConfigError::NoCameras);
    }
    let mut seen = HashSet::new();
    entries
        .iter()
        .map(|entry| {
            if !seen.insert(entry.id.clone()) {
                return Err(ConfigError::DuplicateCamera(entry.id.clone()));
            }
            entry.to_endpoint()
        })
        .collect()
}

pub fn load_camera_file(path: &Path) -> Result<Vec<CameraEndpoint>, ConfigError> {
    let file_error = |reason: String| ConfigError::CameraFile {
        path: path.display().to_string(),
        reason,
    };
    let raw = std::fs::read_to_string(path).map_err(|e| file_error(e.to_string()))?;
    parse_camera_list(&raw).map_err(|e| match e {
        ConfigError::CameraFile { reason, .. } => file_error(reason),
        other => other,
    })
}

pub fn write_camera_file(path: &Path, cameras: &[CameraEndpoint]) -> std::io::Result<()> {
    let entries: Vec<CameraEntry> = cameras.iter().map(CameraEntry::from_endpoint).collect();
    std::fs::write(path, serde_json::to_string_pretty(&entries).map_err(std::io::Error::other)?)
}
