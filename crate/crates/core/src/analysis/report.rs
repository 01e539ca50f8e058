//! CSV emission and parsing for Peak Hour Differential reports and the
//! hourly mean tables behind them.

use std::io::{Read, Write};

use serde::Serialize;

use crate::calendar::{DayType, HourOfDay, Period};
use crate::model::SourceId;

use super::partition::PartitionedMeanTable;
use super::peak::PeakValue;
use super::AnalysisError;

pub const REPORT_HEADER: [&str; 8] = [
    "source",
    "day_type",
    "window",
    "peak_before",
    "hour_before",
    "peak_after",
    "hour_after",
    "delta",
];

pub const MEANS_HEADER: [&str; 6] = ["source", "day_type", "period", "hour", "mean", "samples"];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PhdRow {
    pub source: SourceId,
    pub day_type: DayType,
    pub window: String,
    pub peak_before: Option<PeakValue>,
    pub peak_after: Option<PeakValue>,
    pub delta: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct PhdReport {
    pub rows: Vec<PhdRow>,
}

pub(crate) fn fmt_real(v: f64) -> String {
    format!("{v:.6}")
}

fn fmt_opt_real(v: Option<f64>) -> String {
    v.map(fmt_real).unwrap_or_default()
}

fn fmt_opt_hour(p: Option<PeakValue>) -> String {
    p.map(|p| p.at_hour.to_string()).unwrap_or_default()
}

fn parse_opt<T: std::str::FromStr>(field: &str, line: u64, column: &str) -> Result<Option<T>, AnalysisError> {
    if field.is_empty() {
        return Ok(None);
    }
    field.parse::<T>().map(Some).map_err(|_| AnalysisError::MalformedCsv {
        line,
        message: format!("bad {column} value '{field}'"),
    })
}

fn check_header(reader: &mut csv::Reader<impl Read>, expected: &[&str]) -> Result<(), AnalysisError> {
    let header = reader.headers()?;
    if header.iter().ne(expected.iter().copied()) {
        return Err(AnalysisError::MalformedCsv {
            line: 1,
            message: format!("expected header '{}'", expected.join(",")),
        });
    }
    Ok(())
}

impl PhdReport {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn find(&self, source: &str, day_type: DayType, window: &str) -> Option<&PhdRow> {
        self.rows
            .iter()
            .find(|r| r.source.as_str() == source && r.day_type == day_type && r.window == window)
    }

    /// Writes the report CSV. Undefined values become empty fields and reals
    /// carry six decimals.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), AnalysisError> {
        let mut writer = csv::Writer::from_writer(out);
        writer.write_record(REPORT_HEADER)?;
        for row in &self.rows {
            writer.write_record([
                row.source.to_string(),
                row.day_type.to_string(),
                row.window.clone(),
                fmt_opt_real(row.peak_before.map(|p| p.value)),
                fmt_opt_hour(row.peak_before),
                fmt_opt_real(row.peak_after.map(|p| p.value)),
                fmt_opt_hour(row.peak_after),
                fmt_opt_real(row.delta),
            ])?;
        }
        writer.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> Result<String, AnalysisError> {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)?;
        Ok(String::from_utf8(buf).expect("csv output is utf-8"))
    }

    pub fn read_csv<R: Read>(input: R) -> Result<Self, AnalysisError> {
        let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(input);
        check_header(&mut reader, &REPORT_HEADER)?;
        let mut rows = Vec::new();
        for record in reader.records() {
            let record = record?;
            let line = record.position().map(|p| p.line()).unwrap_or(0);
            if record.len() != REPORT_HEADER.len() {
                return Err(AnalysisError::MalformedCsv {
                    line,
                    message: format!("expected {} fields, found {}", REPORT_HEADER.len(), record.len()),
                });
            }
            let malformed = |message: String| AnalysisError::MalformedCsv { line, message };
            let source = SourceId::new(&record[0]).map_err(|e| malformed(e.to_string()))?;
            let day_type = record[1].parse::<DayType>().map_err(malformed)?;
            let peak = |value_col: usize, hour_col: usize| -> Result<Option<PeakValue>, AnalysisError> {
                let value = parse_opt::<f64>(&record[value_col], line, REPORT_HEADER[value_col])?;
                let hour = parse_opt::<u32>(&record[hour_col], line, REPORT_HEADER[hour_col])?;
                match (value, hour) {
                    (Some(value), Some(hour)) => Ok(Some(PeakValue {
                        value,
                        at_hour: HourOfDay::new(hour).map_err(|e| malformed(e.to_string()))?,
                    })),
                    (None, None) => Ok(None),
                    _ => Err(malformed("peak value and hour must be both present or both empty".into())),
                }
            };
            rows.push(PhdRow {
                source,
                day_type,
                window: record[2].to_string(),
                peak_before: peak(3, 4)?,
                peak_after: peak(5, 6)?,
                delta: parse_opt::<f64>(&record[7], line, "delta")?,
            });
        }
        Ok(Self { rows })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MeanRow {
    pub source: SourceId,
    pub day_type: DayType,
    pub period: Period,
    pub hour: HourOfDay,
    pub mean: f64,
    pub samples: usize,
}

pub fn write_means_csv<W: Write>(table: &PartitionedMeanTable, out: W) -> Result<(), AnalysisError> {
    let mut writer = csv::Writer::from_writer(out);
    writer.write_record(MEANS_HEADER)?;
    for (key, bucket) in table.iter() {
        writer.write_record([
            key.source.to_string(),
            key.day_type.to_string(),
            key.period.to_string(),
            key.hour.to_string(),
            fmt_real(bucket.mean),
            bucket.sample_count.to_string(),
        ])?;
    }
    writer.flush()?;
    Ok(())
}

pub fn read_means_csv<R: Read>(input: R) -> Result<Vec<MeanRow>, AnalysisError> {
    let mut reader = csv::Reader::from_reader(input);
    check_header(&mut reader, &MEANS_HEADER)?;
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        let malformed = |message: String| AnalysisError::MalformedCsv { line, message };
        let required = |col: usize| -> Result<&str, AnalysisError> {
            record
                .get(col)
                .filter(|f| !f.is_empty())
                .ok_or_else(|| malformed(format!("missing {}", MEANS_HEADER[col])))
        };
        rows.push(MeanRow {
            source: SourceId::new(required(0)?).map_err(|e| malformed(e.to_string()))?,
            day_type: required(1)?.parse().map_err(malformed)?,
            period: required(2)?.parse().map_err(malformed)?,
            hour: required(3)?
                .parse::<u32>()
                .map_err(|e| malformed(e.to_string()))
                .and_then(|h| HourOfDay::new(h).map_err(|e| malformed(e.to_string())))?,
            mean: required(4)?.parse().map_err(|_| malformed("bad mean".into()))?,
            samples: required(5)?.parse().map_err(|_| malformed("bad samples".into()))?,
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(delta: Option<f64>) -> PhdRow {
        PhdRow {
            source: SourceId::new("cam-1").unwrap(),
            day_type: DayType::Weekday,
            window: "Morning".into(),
            peak_before: Some(PeakValue {
                value: 10.0,
                at_hour: HourOfDay::new(8).unwrap(),
            }),
            peak_after: delta.map(|d| PeakValue {
                value: 10.0 + d,
                at_hour: HourOfDay::new(7).unwrap(),
            }),
            delta,
        }
    }

    #[test]
    fn csv_layout_is_exact() {
        let report = PhdReport {
            rows: vec![row(Some(-2.5)), row(None)],
        };
        let csv = report.to_csv_string().unwrap();
        assert_eq!(
            csv,
            "source,day_type,window,peak_before,hour_before,peak_after,hour_after,delta\n\
             cam-1,weekday,Morning,10.000000,8,7.500000,7,-2.500000\n\
             cam-1,weekday,Morning,10.000000,8,,,\n"
        );
        let back = PhdReport::read_csv(csv.as_bytes()).unwrap();
        assert_eq!(back, report);
    }

    #[test]
    fn malformed_csv_is_rejected() {
        assert!(PhdReport::read_csv("a,b\n1,2\n".as_bytes()).is_err());
        let bad_day = "source,day_type,window,peak_before,hour_before,peak_after,hour_after,delta\n\
                       a,holiday,Day,1,1,1,1,0\n";
        assert!(PhdReport::read_csv(bad_day.as_bytes()).is_err());
        let half_peak = "source,day_type,window,peak_before,hour_before,peak_after,hour_after,delta\n\
                         a,weekday,Day,1.0,,1,1,0\n";
        assert!(PhdReport::read_csv(half_peak.as_bytes()).is_err());
        let header_only = "source,day_type,window,peak_before,hour_before,peak_after,hour_after,delta\n";
        assert!(PhdReport::read_csv(header_only.as_bytes()).unwrap().is_empty());
    }
}
