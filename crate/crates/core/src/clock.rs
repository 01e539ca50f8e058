//! Wall-clock and accelerated virtual clocks.
//!
//! The collector stamps frames and the camera simulator evaluates its count
//! scripts through the same [`Clock`], so weeks of simulated traffic can be
//! generated in minutes while both sides agree on "now".

use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

pub trait Clock: Send + Sync {
    fn now(&self) -> DateTime<Utc>;
}

#[derive(Debug, Clone, Copy, Default)]
pub struct SystemClock;

impl Clock for SystemClock {
    fn now(&self) -> DateTime<Utc> {
        Utc::now()
    }
}

fn real_unix_ms() -> f64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs_f64() * 1000.0)
        .unwrap_or(0.0)
}

/// `now = origin + (real_now - anchor) * speedup`.
///
/// Two processes configured with the same origin, anchor and speedup observe
/// the same virtual time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VirtualClock {
    pub origin: DateTime<Utc>,
    pub anchor_unix_ms: i64,
    pub speedup: f64,
}

impl VirtualClock {
    /// Starts the virtual clock at `origin` right now.
    pub fn starting_now(origin: DateTime<Utc>, speedup: f64) -> Self {
        Self {
            origin,
            anchor_unix_ms: real_unix_ms() as i64,
            speedup,
        }
    }

    pub fn load(path: &Path) -> std::io::Result<Self> {
        let raw = std::fs::read_to_string(path)?;
        serde_json::from_str(&raw).map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, e))
    }

    pub fn save(&self, path: &Path) -> std::io::Result<()> {
        let json = serde_json::to_string_pretty(self).map_err(std::io::Error::other)?;
        std::fs::write(path, json)
    }

    /// Real milliseconds needed for `virtual_ms` to elapse.
    pub fn real_ms_for(&self, virtual_ms: f64) -> f64 {
        virtual_ms / self.speedup
    }

    fn at_real_ms(&self, real_ms: f64) -> DateTime<Utc> {
        let virtual_elapsed = (real_ms - self.anchor_unix_ms as f64) * self.speedup;
        self.origin + chrono::Duration::milliseconds(virtual_elapsed.round() as i64)
    }
}

impl Clock for VirtualClock {
    fn now(&self) -> DateTime<Utc> {
        self.at_real_ms(real_unix_ms())
    }
}
