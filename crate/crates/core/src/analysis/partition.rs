use std::collections::BTreeMap;
use std::ops::Bound;

use crate::calendar::{day_type_of, hour_of, period_of, DayType, HourOfDay, Period, SplitConfig};
use crate::model::SourceId;

use super::smoothing::SmoothedSeries;

/// Bucket key. Field order is the map's sort order, which keeps all hours of
/// one (source, day type, period) contiguous for window scans.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct BucketKey {
    pub source: SourceId,
    pub day_type: DayType,
    pub period: Period,
    pub hour: HourOfDay,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BucketMean {
    pub mean: f64,
    pub sample_count: usize,
}

/// Mean smoothed density per (source, hour, day type, period). Buckets with
/// no samples are absent.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PartitionedMeanTable {
    entries: BTreeMap<BucketKey, BucketMean>,
}

impl PartitionedMeanTable {
    pub fn get(&self, source: &SourceId, hour: HourOfDay, day_type: DayType, period: Period) -> Option<BucketMean> {
        self.entries
            .get(&BucketKey {
                source: source.clone(),
                day_type,
                period,
                hour,
            })
            .copied()
    }

    /// Occupied buckets for one (source, day type, period) with hours in
    /// `[start, end]`, ascending by hour.
    pub fn hours_in(
        &self,
        source: &SourceId,
        day_type: DayType,
        period: Period,
        start: HourOfDay,
        end: HourOfDay,
    ) -> impl Iterator<Item = (HourOfDay, BucketMean)> + '_ {
        let key = |hour| BucketKey {
            source: source.clone(),
            day_type,
            period,
            hour,
        };
        self.entries
            .range((Bound::Included(key(start)), Bound::Included(key(end))))
            .map(|(k, v)| (k.hour, *v))
    }

    pub fn iter(&self) -> impl Iterator<Item = (&BucketKey, &BucketMean)> {
        self.entries.iter()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn insert(&mut self, key: BucketKey, value: BucketMean) {
        self.entries.insert(key, value);
    }

    /// The same table with before/after labels exchanged.
    pub fn with_periods_swapped(&self) -> Self {
        let entries = self
            .entries
            .iter()
            .map(|(k, v)| {
                let mut k = k.clone();
                k.period = k.period.swapped();
                (k, *v)
            })
            .collect();
        Self { entries }
    }
}

/// Groups smoothed points by local hour, day type and period, and averages
/// each bucket. Sums accumulate in series order then timestamp order, so the
/// result does not depend on how sources were scheduled.
pub fn partitioned_means<'a>(
    smoothed: impl IntoIterator<Item = &'a SmoothedSeries>,
    split: &SplitConfig,
) -> PartitionedMeanTable {
    let mut sums: BTreeMap<BucketKey, (f64, usize)> = BTreeMap::new();
    for series in smoothed {
        for point in &series.items {
            let key = BucketKey {
                source: series.source.clone(),
                day_type: day_type_of(point.captured_at, split.timezone),
                period: period_of(point.captured_at, split),
                hour: hour_of(point.captured_at, split.timezone),
            };
            let slot = sums.entry(key).or_insert((0.0, 0));
            slot.0 += point.value;
            slot.1 += 1;
        }
    }
    let entries = sums
        .into_iter()
        .map(|(key, (sum, n))| {
            (
                key,
                BucketMean {
                    mean: sum / n as f64,
                    sample_count: n,
                },
            )
        })
        .collect();
    PartitionedMeanTable { entries }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::smoothing::SmoothedPoint;
    use chrono::{DateTime, Utc};
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};
    use std::collections::HashMap;

    fn utc(s: &str) -> DateTime<Utc> {
        DateTime::parse_from_rfc3339(s).unwrap().to_utc()
    }

    fn smoothed(id: &str, points: &[(DateTime<Utc>, f64)]) -> SmoothedSeries {
        SmoothedSeries {
            source: SourceId::new(id).unwrap(),
            items: points
                .iter()
                .map(|&(captured_at, value)| SmoothedPoint { captured_at, value })
                .collect(),
        }
    }

    fn h(v: u32) -> HourOfDay {
        HourOfDay::new(v).unwrap()
    }

    #[test]
    fn singleton_bucket() {
        // Friday 2025-01-03 08:10 New York, before the default split.
        let s = smoothed("a", &[(utc("2025-01-03T13:10:00Z"), 7.0)]);
        let table = partitioned_means([&s], &SplitConfig::default());
        assert_eq!(table.len(), 1);
        let source = SourceId::new("a").unwrap();
        assert_eq!(
            table.get(&source, h(8), DayType::Weekday, Period::Before),
            Some(BucketMean { mean: 7.0, sample_count: 1 })
        );
    }

    #[test]
    fn two_point_mean() {
        let s = smoothed(
            "a",
            &[(utc("2025-01-03T13:10:00Z"), 4.0), (utc("2025-01-03T13:50:00Z"), 6.0)],
        );
        let table = partitioned_means([&s], &SplitConfig::default());
        let source = SourceId::new("a").unwrap();
        assert_eq!(
            table.get(&source, h(8), DayType::Weekday, Period::Before),
            Some(BucketMean { mean: 5.0, sample_count: 2 })
        );
    }

    // Brute-force group-by: renders each timestamp as local text and derives
    // hour and weekday from the string, rather than through the calendar API.
    fn brute_force_group_by(series: &[SmoothedSeries], split: &SplitConfig) -> HashMap<(String, u32, String, String), (f64, usize)> {
        let mut groups: HashMap<(String, u32, String, String), Vec<f64>> = HashMap::new();
        for s in series {
            for p in &s.items {
                let local = p.captured_at.with_timezone(&split.timezone).format("%H %a").to_string();
                let (hour, dow) = local.split_once(' ').unwrap();
                let day = if dow == "Sat" || dow == "Sun" { "weekend" } else { "weekday" };
                let period = if p.captured_at.timestamp_millis() < split.split_at.timestamp_millis() {
                    "before"
                } else {
                    "after"
                };
                groups
                    .entry((s.source.to_string(), hour.parse().unwrap(), day.into(), period.into()))
                    .or_default()
                    .push(p.value);
            }
        }
        groups
            .into_iter()
            .map(|(k, vals)| {
                let n = vals.len();
                (k, (vals.iter().sum::<f64>() / n as f64, n))
            })
            .collect()
    }

    #[test]
    fn matches_brute_force_group_by_on_scattered_values() {
        let mut rng = StdRng::seed_from_u64(0x5eed);
        let start = utc("2024-12-29T00:00:00Z").timestamp_millis();
        let two_weeks = 14 * 24 * 3600 * 1000;
        let mut by_source: HashMap<&str, Vec<(DateTime<Utc>, f64)>> = HashMap::new();
        for _ in 0..500 {
            let id = ["a", "b", "c"][rng.random_range(0..3)];
            let t = DateTime::from_timestamp_millis(start + rng.random_range(0..two_weeks)).unwrap();
            by_source.entry(id).or_default().push((t, rng.random_range(0..40) as f64 / 4.0));
        }
        let series: Vec<SmoothedSeries> = by_source
            .into_iter()
            .map(|(id, mut pts)| {
                pts.sort_by_key(|p| p.0);
                smoothed(id, &pts)
            })
            .collect();
        let split = SplitConfig::default();
        let table = partitioned_means(&series, &split);
        let oracle = brute_force_group_by(&series, &split);
        assert_eq!(table.len(), oracle.len());
        for (key, bucket) in table.iter() {
            let okey = (
                key.source.to_string(),
                u32::from(key.hour),
                key.day_type.to_string(),
                key.period.to_string(),
            );
            let (mean, n) = oracle[&okey];
            assert_eq!(bucket.sample_count, n);
            // Quarter-integer values: every partial sum is exact in f64.
            assert_eq!(bucket.mean, mean);
        }
    }

    #[test]
    fn hours_in_scans_only_requested_slice() {
        let a = smoothed(
            "a",
            &[
                (utc("2025-01-03T11:00:00Z"), 1.0), // 06 local
                (utc("2025-01-03T14:00:00Z"), 2.0), // 09 local
                (utc("2025-01-03T16:00:00Z"), 3.0), // 11 local
                (utc("2025-01-06T14:00:00Z"), 4.0), // after split
            ],
        );
        let table = partitioned_means([&a], &SplitConfig::default());
        let source = SourceId::new("a").unwrap();
        let hours: Vec<u8> = table
            .hours_in(&source, DayType::Weekday, Period::Before, h(6), h(9))
            .map(|(hour, _)| hour.value())
            .collect();
        assert_eq!(hours, [6, 9]);
        let swapped = table.with_periods_swapped();
        assert!(swapped.get(&source, h(9), DayType::Weekday, Period::Before).unwrap().mean == 4.0);
    }
}
