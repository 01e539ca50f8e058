use std::f64::consts::TAU;

use chrono::{DateTime, Timelike, Utc};
use chrono_tz::Tz;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::calendar::{day_type_of, hour_of, parse_timezone, DayType};
use crate::model::{ClassCounts, VehicleClass};

use super::CamsimError;

/// Largest per-class count the pixel pattern can carry.
pub const MAX_COUNT: u32 = 255;

/// Per-request delay distribution, in milliseconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LatencyModel {
    Constant { ms: f64 },
    Uniform { lo_ms: f64, hi_ms: f64 },
    Bimodal { fast_ms: f64, slow_ms: f64, slow_fraction: f64 },
}

impl Default for LatencyModel {
    fn default() -> Self {
        LatencyModel::Constant { ms: 0.0 }
    }
}

impl LatencyModel {
    pub fn validate(&self) -> Result<(), CamsimError> {
        let ok = |ms: f64| ms.is_finite() && ms >= 0.0;
        let valid = match *self {
            LatencyModel::Constant { ms } => ok(ms),
            LatencyModel::Uniform { lo_ms, hi_ms } => ok(lo_ms) && ok(hi_ms) && lo_ms <= hi_ms,
            LatencyModel::Bimodal {
                fast_ms,
                slow_ms,
                slow_fraction,
            } => ok(fast_ms) && ok(slow_ms) && (0.0..=1.0).contains(&slow_fraction),
        };
        if valid {
            Ok(())
        } else {
            Err(CamsimError::Config(format!("invalid latency model {self:?}")))
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            LatencyModel::Constant { ms } => ms,
            LatencyModel::Uniform { lo_ms, hi_ms } if lo_ms == hi_ms => lo_ms,
            LatencyModel::Uniform { lo_ms, hi_ms } => rng.random_range(lo_ms..=hi_ms),
            LatencyModel::Bimodal {
                fast_ms,
                slow_ms,
                slow_fraction,
            } => {
                if rng.random_bool(slow_fraction) {
                    slow_ms
                } else {
                    fast_ms
                }
            }
        }
    }
}

/// Base daily shape of one class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CountShape {
    Constant,
    /// One value per local hour, separately for weekdays and weekends.
    Hourly { weekday: Vec<u32>, weekend: Vec<u32> },
    /// `base + amplitude * cos(2π (h - peak_hour) / 24)`, rounded, with `h`
    /// the fractional local hour.
    Sinusoidal { base: f64, amplitude: f64, peak_hour: f64 },
}

/// Additive change applied from `CountScript::split` onwards to the hours
/// `[start_hour, end_hour]` of matching days.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Shift {
    pub class: VehicleClass,
    /// `None` applies to every day.
    #[serde(default)]
    pub day_type: Option<DayType>,
    pub start_hour: u32,
    pub end_hour: u32,
    pub delta: i64,
}

/// Ground-truth counts as a function of (simulated) time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CountScript {
    /// Counts for every class; the shaped class's entry is added to its shape.
    pub base: ClassCounts,
    pub class: VehicleClass,
    pub shape: CountShape,
    pub timezone: String,
    #[serde(default)]
    pub split: Option<DateTime<Utc>>,
    #[serde(default)]
    pub shifts: Vec<Shift>,
    #[serde(skip)]
    tz: Option<Tz>,
}

impl CountScript {
    pub fn new(base: ClassCounts, class: VehicleClass, shape: CountShape, timezone: &str) -> Result<Self, CamsimError> {
        let mut script = Self {
            base,
            class,
            shape,
            timezone: timezone.to_string(),
            split: None,
            shifts: Vec::new(),
            tz: None,
        };
        script.validate()?;
        Ok(script)
    }

    pub fn constant(counts: ClassCounts) -> Self {
        Self::new(counts, VehicleClass::Car, CountShape::Constant, "UTC").expect("constant script is valid")
    }

    pub fn with_shift(mut self, split: DateTime<Utc>, shift: Shift) -> Result<Self, CamsimError> {
        self.split = Some(split);
        self.shifts.push(shift);
        self.validate()?;
        Ok(self)
    }

    /// Checks parameters and resolves the timezone. Must be called after
    /// deserializing.
    pub fn validate(&mut self) -> Result<(), CamsimError> {
        let tz = parse_timezone(&self.timezone).map_err(|e| CamsimError::Config(e.to_string()))?;
        if let CountShape::Hourly { weekday, weekend } = &self.shape {
            if weekday.len() != 24 || weekend.len() != 24 {
                return Err(CamsimError::Config("hourly profiles need 24 values each".into()));
            }
        }
        if let CountShape::Sinusoidal { base, amplitude, peak_hour } = self.shape {
            if !(base.is_finite() && amplitude.is_finite() && peak_hour.is_finite()) {
                return Err(CamsimError::Config("sinusoidal parameters must be finite".into()));
            }
        }
        for s in &self.shifts {
            if s.start_hour > s.end_hour || s.end_hour > 23 {
                return Err(CamsimError::Config(format!(
                    "shift hours {}-{} outside 0-23",
                    s.start_hour, s.end_hour
                )));
            }
        }
        if !self.shifts.is_empty() && self.split.is_none() {
            return Err(CamsimError::Config("shifts need a split instant".into()));
        }
        self.tz = Some(tz);
        Ok(())
    }

    fn tz(&self) -> Tz {
        self.tz
            .or_else(|| parse_timezone(&self.timezone).ok())
            .unwrap_or(chrono_tz::UTC)
    }

    /// Counts at instant `t`, clamped to `[0, MAX_COUNT]` per class.
    pub fn counts_at(&self, t: DateTime<Utc>) -> ClassCounts {
        let tz = self.tz();
        let hour = hour_of(t, tz).value() as u32;
        let day_type = day_type_of(t, tz);
        let mut values: [i64; 5] = self.base.as_array().map(i64::from);
        let shaped = match &self.shape {
            CountShape::Constant => 0,
            CountShape::Hourly { weekday, weekend } => {
                let table = if day_type == DayType::Weekday { weekday } else { weekend };
                i64::from(table[hour as usize])
            }
            CountShape::Sinusoidal { base, amplitude, peak_hour } => {
                let local = t.with_timezone(&tz);
                let h = f64::from(local.hour()) + f64::from(local.minute()) / 60.0 + f64::from(local.second()) / 3600.0;
                (base + amplitude * (TAU * (h - peak_hour) / 24.0).cos()).round() as i64
            }
        };
        values[self.class.ordinal()] += shaped;
        if self.split.is_some_and(|split| t >= split) {
            for s in &self.shifts {
                let day_ok = s.day_type.is_none_or(|d| d == day_type);
                if day_ok && (s.start_hour..=s.end_hour).contains(&hour) {
                    values[s.class.ordinal()] += s.delta;
                }
            }
        }
        ClassCounts::from_array(values.map(|v| v.clamp(0, i64::from(MAX_COUNT)) as u32))
    }
}
