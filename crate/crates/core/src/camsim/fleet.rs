use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::calendar::{DayType, SplitConfig};
use crate::model::{ClassCounts, SourceId, VehicleClass};

use super::script::{CountScript, CountShape, LatencyModel, Shift};
use super::CamsimError;

pub const DEFAULT_WIDTH: u32 = 352;
pub const DEFAULT_HEIGHT: u32 = 240;
pub const DEFAULT_JPEG_QUALITY: u8 = 85;

pub const SCENARIOS: [&str; 3] = ["step-change", "flat", "weekend-only-shift"];

// Every window peak sits on the second hour of a two-hour plateau, so a
// rolling mean shorter than one hour leaves that hour's bucket exact.
const WEEKDAY_CARS: [u32; 24] = [5, 5, 5, 5, 5, 5, 8, 13, 13, 10, 11, 15, 15, 14, 14, 14, 18, 18, 12, 7, 7, 7, 7, 7];
const WEEKEND_CARS: [u32; 24] = [6, 6, 6, 6, 6, 6, 6, 6, 6, 6, 7, 8, 9, 9, 11, 11, 11, 11, 7, 7, 7, 7, 7, 7];
const MORNING: (u32, u32) = (6, 9);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimCameraSpec {
    pub source: SourceId,
    #[serde(default = "default_width")]
    pub width: u32,
    #[serde(default = "default_height")]
    pub height: u32,
    #[serde(default)]
    pub latency: LatencyModel,
    pub script: CountScript,
    /// Probability that a request is answered with HTTP 500.
    #[serde(default)]
    pub error_rate: f64,
    #[serde(default = "default_quality")]
    pub jpeg_quality: u8,
}

fn default_width() -> u32 {
    DEFAULT_WIDTH
}

fn default_height() -> u32 {
    DEFAULT_HEIGHT
}

fn default_quality() -> u8 {
    DEFAULT_JPEG_QUALITY
}

impl SimCameraSpec {
    pub fn new(source: SourceId, latency: LatencyModel, script: CountScript) -> Self {
        Self {
            source,
            width: DEFAULT_WIDTH,
            height: DEFAULT_HEIGHT,
            latency,
            script,
            error_rate: 0.0,
            jpeg_quality: DEFAULT_JPEG_QUALITY,
        }
    }

    pub fn validate(&mut self) -> Result<(), CamsimError> {
        self.latency.validate()?;
        self.script.validate()?;
        if !(0.0..=1.0).contains(&self.error_rate) {
            return Err(CamsimError::Config(format!("error_rate {} outside [0, 1]", self.error_rate)));
        }
        if self.width == 0 || self.height == 0 {
            return Err(CamsimError::Config(format!("camera '{}' has zero size", self.source)));
        }
        if !(1..=100).contains(&self.jpeg_quality) {
            return Err(CamsimError::Config(format!("jpeg_quality {} outside 1-100", self.jpeg_quality)));
        }
        Ok(())
    }
}

/// Parameters shared by every camera of a scripted fleet.
#[derive(Debug, Clone, PartialEq)]
pub struct FleetParams {
    /// Signed change the scenario applies after the split, equal to the
    /// expected peak differential of the affected windows.
    pub delta: i64,
    pub split: DateTime<Utc>,
    pub timezone: String,
    pub latency: LatencyModel,
}

impl Default for FleetParams {
    fn default() -> Self {
        let split = SplitConfig::default();
        Self {
            delta: -3,
            split: split.split_at,
            timezone: split.timezone.name().to_string(),
            latency: LatencyModel::default(),
        }
    }
}

pub fn camera_id(i: usize) -> SourceId {
    SourceId::new(format!("cam-{i:03}")).expect("generated id is non-empty")
}

/// Builds `n` cameras following a named scenario.
///
/// * `step-change`: weekday cars in the Morning window move by `delta` after
///   the split.
/// * `weekend-only-shift`: every weekend hour moves by `delta` after the split.
/// * `flat`: constant counts.
///
/// Cameras differ by a per-camera offset so their series are distinguishable.
pub fn scripted_fleet(scenario: &str, n: usize, params: &FleetParams) -> Result<Vec<SimCameraSpec>, CamsimError> {
    if !SCENARIOS.contains(&scenario) {
        return Err(CamsimError::UnknownScenario(scenario.to_string()));
    }
    (0..n)
        .map(|i| {
            let offset = (i % 4) as u32;
            let base = ClassCounts::single(VehicleClass::Truck, 1);
            let hourly = CountShape::Hourly {
                weekday: WEEKDAY_CARS.iter().map(|v| v + offset).collect(),
                weekend: WEEKEND_CARS.iter().map(|v| v + offset).collect(),
            };
            let script = match scenario {
                "flat" => {
                    let mut counts = base;
                    counts.set(VehicleClass::Car, 10 + offset);
                    CountScript::new(counts, VehicleClass::Car, CountShape::Constant, &params.timezone)?
                }
                "step-change" => CountScript::new(base, VehicleClass::Car, hourly, &params.timezone)?.with_shift(
                    params.split,
                    Shift {
                        class: VehicleClass::Car,
                        day_type: Some(DayType::Weekday),
                        start_hour: MORNING.0,
                        end_hour: MORNING.1,
                        delta: params.delta,
                    },
                )?,
                _ => CountScript::new(base, VehicleClass::Car, hourly, &params.timezone)?.with_shift(
                    params.split,
                    Shift {
                        class: VehicleClass::Car,
                        day_type: Some(DayType::Weekend),
                        start_hour: 0,
                        end_hour: 23,
                        delta: params.delta,
                    },
                )?,
            };
            Ok(SimCameraSpec::new(camera_id(i), params.latency, script))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::calendar::local_to_utc;
    use chrono::NaiveDate;

    fn local(day: u32, hour: u32) -> DateTime<Utc> {
        local_to_utc(
            NaiveDate::from_ymd_opt(2025, 1, day).unwrap().and_hms_opt(hour, 20, 0).unwrap(),
            chrono_tz::America::New_York,
        )
    }

    fn cars(spec: &SimCameraSpec, t: DateTime<Utc>) -> i64 {
        i64::from(spec.script.counts_at(t).get(VehicleClass::Car))
    }

    #[test]
    fn unknown_scenario_is_rejected() {
        assert!(matches!(
            scripted_fleet("rush-hour", 3, &FleetParams::default()),
            Err(CamsimError::UnknownScenario(_))
        ));
    }

    #[test]
    fn step_change_moves_only_weekday_morning() {
        let fleet = scripted_fleet("step-change", 10, &FleetParams::default()).unwrap();
        assert_eq!(fleet.len(), 10);
        assert_eq!(fleet[3].source.as_str(), "cam-003");
        // 2 Jan 2025 is a Thursday before the split; 9 Jan the Thursday after.
        for spec in &fleet {
            for hour in 0..24 {
                let d = cars(spec, local(9, hour)) - cars(spec, local(2, hour));
                let expected = if (6..=9).contains(&hour) { -3 } else { 0 };
                assert_eq!(d, expected, "{} hour {hour}", spec.source);
                // Saturdays 4 Jan and 11 Jan straddle the split unchanged.
                assert_eq!(cars(spec, local(11, hour)), cars(spec, local(4, hour)));
            }
        }
    }

    #[test]
    fn weekend_shift_and_flat() {
        let params = FleetParams {
            delta: 2,
            ..FleetParams::default()
        };
        let fleet = scripted_fleet("weekend-only-shift", 2, &params).unwrap();
        for hour in 0..24 {
            assert_eq!(cars(&fleet[1], local(11, hour)) - cars(&fleet[1], local(4, hour)), 2);
            assert_eq!(cars(&fleet[1], local(9, hour)), cars(&fleet[1], local(2, hour)));
        }
        let flat = scripted_fleet("flat", 5, &params).unwrap();
        assert_eq!(cars(&flat[4], local(2, 3)), 10);
        assert_eq!(cars(&flat[4], local(11, 17)), 10);
    }

    #[test]
    fn spec_json_defaults() {
        let mut spec: SimCameraSpec = serde_json::from_str(
            r#"{"source":"c1","script":{"base":{"car":5},"class":"car","shape":{"kind":"constant"},"timezone":"UTC"}}"#,
        )
        .unwrap();
        spec.validate().unwrap();
        assert_eq!((spec.width, spec.height), (352, 240));
        assert_eq!(spec.latency, LatencyModel::Constant { ms: 0.0 });
        assert_eq!(spec.script.counts_at(Utc::now()).get(VehicleClass::Car), 5);
    }
}
