//! Simulated camera fleet serving synthetic frames whose pixels carry the
//! ground-truth vehicle counts.

mod fleet;
mod script;
mod server;

use std::path::Path;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::calendar::{parse_timezone, SplitConfig, DEFAULT_TIMEZONE};

pub use fleet::{camera_id, scripted_fleet, FleetParams, SimCameraSpec, DEFAULT_HEIGHT, DEFAULT_JPEG_QUALITY, DEFAULT_WIDTH, SCENARIOS};
pub use script::{CountScript, CountShape, LatencyModel, Shift, MAX_COUNT};
pub use server::{CamSim, RequestRecord};

#[derive(Debug, Error)]
pub enum CamsimError {
    #[error("unknown scenario '{0}' (expected one of step-change, flat, weekend-only-shift)")]
    UnknownScenario(String),
    #[error("invalid simulator configuration: {0}")]
    Config(String),
    #[error("cannot bind simulator socket: {0}")]
    Bind(std::io::Error),
    #[error("cannot read simulator config {path}: {reason}")]
    ConfigFile { path: String, reason: String },
}

/// Simulator configuration as read from a JSON file. Either `specs` lists the
/// cameras explicitly or `scenario` generates `cameras` of them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    pub scenario: Option<String>,
    pub cameras: usize,
    pub delta: i64,
    pub latency: LatencyModel,
    pub error_rate: f64,
    pub split: String,
    pub timezone: String,
    pub specs: Vec<SimCameraSpec>,
    /// Virtual start time; `None` uses the wall clock.
    pub virtual_origin: Option<DateTime<Utc>>,
    pub speedup: f64,
    pub seed: Option<u64>,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            scenario: Some("step-change".into()),
            cameras: 10,
            delta: -3,
            latency: LatencyModel::default(),
            error_rate: 0.0,
            split: "2025-01-05".into(),
            timezone: DEFAULT_TIMEZONE.name().into(),
            specs: Vec::new(),
            virtual_origin: None,
            speedup: 1.0,
            seed: None,
        }
    }
}

impl SimConfig {
    pub fn load(path: &Path) -> Result<Self, CamsimError> {
        let raw = std::fs::read_to_string(path).map_err(|e| CamsimError::ConfigFile {
            path: path.display().to_string(),
            reason: e.to_string(),
        })?;
        serde_json::from_str(&raw).map_err(|e| CamsimError::ConfigFile {
            path: path.display().to_string(),
            reason: e.to_string(),
        })
    }

    /// Resolves the camera list.
    pub fn build_specs(&self) -> Result<Vec<SimCameraSpec>, CamsimError> {
        if !(self.speedup.is_finite() && self.speedup > 0.0) {
            return Err(CamsimError::Config(format!("speedup {} must be positive", self.speedup)));
        }
        let mut specs = if !self.specs.is_empty() {
            self.specs.clone()
        } else {
            let Some(scenario) = &self.scenario else {
                return Err(CamsimError::Config("neither specs nor scenario given".into()));
            };
            let tz = parse_timezone(&self.timezone).map_err(|e| CamsimError::Config(e.to_string()))?;
            let split = SplitConfig::parse(&self.split, tz).map_err(CamsimError::Config)?;
            let params = FleetParams {
                delta: self.delta,
                split: split.split_at,
                timezone: self.timezone.clone(),
                latency: self.latency,
            };
            scripted_fleet(scenario, self.cameras, &params)?
        };
        for spec in &mut specs {
            if self.specs.is_empty() {
                spec.error_rate = self.error_rate;
            }
            spec.validate()?;
        }
        Ok(specs)
    }
}
