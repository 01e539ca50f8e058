use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufReader, Write};

use crate::analysis::{analyze, fmt_real, read_means_csv, write_means_csv, AnalysisConfig, MeanRow, PhdReport, DEFAULT_WINDOW_SIZE};
use crate::calendar::{parse_timezone, DayType, HourOfDay, Period, SplitConfig, TimeWindow, DEFAULT_TIMEZONE};
use crate::model::ClassSelector;
use crate::store::{SeriesQuery, Store};

use super::{env_value, missing, output_sink, pick, runtime, usage, AnalyzeArgs, CliError, FileConfig, OutputFormat, ReportArgs, TZ_ENV};

pub(super) const DEFAULT_SPLIT: &str = "2025-01-05";

fn resolve_windows(cli: &Option<String>, file: &Option<String>) -> Result<Vec<TimeWindow>, CliError> {
    match pick(cli, file) {
        Some(spec) => TimeWindow::parse_list(&spec).map_err(usage),
        None => Ok(TimeWindow::defaults()),
    }
}

pub(super) fn resolve_analysis(args: &AnalyzeArgs, file: &FileConfig) -> Result<AnalysisConfig, CliError> {
    let tz_name = args
        .tz
        .clone()
        .or_else(|| env_value(TZ_ENV))
        .or_else(|| file.tz.clone())
        .unwrap_or_else(|| DEFAULT_TIMEZONE.name().to_string());
    let tz = parse_timezone(&tz_name).map_err(usage)?;
    let split_text = pick(&args.split, &file.split).unwrap_or_else(|| DEFAULT_SPLIT.to_string());
    let split = SplitConfig::parse(&split_text, tz).map_err(|e| usage(format!("--split: {e}")))?;
    let selector: ClassSelector = match pick(&args.class, &file.class) {
        Some(c) => c.parse().map_err(usage)?,
        None => ClassSelector::Total,
    };
    let config = AnalysisConfig {
        window_size: pick(&args.window_size, &file.window_size).unwrap_or(DEFAULT_WINDOW_SIZE),
        split,
        windows: resolve_windows(&args.windows, &file.windows)?,
        selector,
    };
    config.validate().map_err(usage)?;
    Ok(config)
}

pub(super) fn run_analyze(args: AnalyzeArgs, file: &FileConfig) -> Result<(), CliError> {
    let db = pick(&args.db, &file.db).ok_or_else(|| missing("analyze", "db"))?;
    let config = resolve_analysis(&args, file)?;
    let output = pick(&args.output, &file.output);
    let means_output = pick(&args.means_output, &file.means_output);

    let store = Store::open_existing(&db).map_err(runtime)?;
    let series = store
        .query_series(&SeriesQuery {
            selector: config.selector,
            model_id: pick(&args.model_id, &file.model_id),
            ..SeriesQuery::default()
        })
        .map_err(runtime)?;
    if series.iter().all(|s| s.is_empty()) {
        eprintln!("warning: {} holds no observations; the report is empty", db.display());
    }
    let result = analyze(&series, &config).map_err(runtime)?;

    let mut out = output_sink(output.as_deref())?;
    result.report.write_csv(&mut out).map_err(runtime)?;
    out.flush().map_err(runtime)?;
    if let Some(path) = means_output {
        let mut means = output_sink(Some(&path))?;
        write_means_csv(&result.table, &mut means).map_err(runtime)?;
        means.flush().map_err(runtime)?;
    }
    Ok(())
}

fn render_table(report: &PhdReport) -> String {
    let peak = |p: Option<crate::analysis::PeakValue>| p.map(|p| format!("{} @{:02}", fmt_real(p.value), p.at_hour.value())).unwrap_or_else(|| "-".into());
    let rows: Vec<[String; 6]> = report
        .rows
        .iter()
        .map(|r| {
            [
                r.source.to_string(),
                r.day_type.to_string(),
                r.window.clone(),
                peak(r.peak_before),
                peak(r.peak_after),
                r.delta.map(fmt_real).unwrap_or_else(|| "-".into()),
            ]
        })
        .collect();
    let header = ["source", "day_type", "window", "peak_before", "peak_after", "delta"];
    let mut widths = header.map(str::len);
    for row in &rows {
        for (w, cell) in widths.iter_mut().zip(row) {
            *w = (*w).max(cell.len());
        }
    }
    let line = |cells: &[&str]| {
        let padded: Vec<String> = cells.iter().zip(widths).map(|(c, w)| format!("{c:<w$}")).collect();
        padded.join("  ").trim_end().to_string() + "\n"
    };
    let mut text = line(&header);
    text += &line(&widths.map(|w| "-".repeat(w)).iter().map(String::as_str).collect::<Vec<_>>());
    for row in &rows {
        text += &line(&row.iter().map(String::as_str).collect::<Vec<_>>());
    }
    text
}

/// (mean, samples) before and after the split.
type HourPair = [Option<(f64, usize)>; 2];

/// Hourly before/after means for every (source, day type, window) hour.
fn write_hourly<W: Write>(means: &[MeanRow], windows: &[TimeWindow], out: W) -> Result<(), CliError> {
    let mut lookup: BTreeMap<(String, DayType, u8), HourPair> = BTreeMap::new();
    for m in means {
        let slot = lookup.entry((m.source.to_string(), m.day_type, m.hour.value())).or_default();
        let i = if m.period == Period::Before { 0 } else { 1 };
        slot[i] = Some((m.mean, m.samples));
    }
    let sources: std::collections::BTreeSet<String> = means.iter().map(|m| m.source.to_string()).collect();
    let mut sorted: Vec<&TimeWindow> = windows.iter().collect();
    sorted.sort_by(|a, b| a.label().cmp(b.label()));
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["source", "day_type", "window", "hour", "mean_before", "samples_before", "mean_after", "samples_after"])
        .map_err(runtime)?;
    for source in &sources {
        for day_type in DayType::ALL {
            for window in &sorted {
                for hour in window.hours() {
                    let slot = lookup.get(&(source.clone(), day_type, hour.value())).copied().unwrap_or_default();
                    let mean = |i: usize| slot[i].map(|(m, _)| fmt_real(m)).unwrap_or_default();
                    let count = |i: usize| slot[i].map_or(0, |(_, n)| n).to_string();
                    w.write_record([
                        source.clone(),
                        day_type.to_string(),
                        window.label().to_string(),
                        HourOfDay::value(hour).to_string(),
                        mean(0),
                        count(0),
                        mean(1),
                        count(1),
                    ])
                    .map_err(runtime)?;
                }
            }
        }
    }
    w.flush().map_err(runtime)?;
    Ok(())
}

pub(super) fn run_report(args: ReportArgs, file: &FileConfig) -> Result<(), CliError> {
    let input = pick(&args.input, &file.input).ok_or_else(|| missing("report", "input"))?;
    let format = pick(&args.format, &file.format).unwrap_or(OutputFormat::Table);
    let windows = resolve_windows(&args.windows, &file.windows)?;
    let means_path = pick(&args.means, &file.means);
    let hourly_output = pick(&args.hourly_output, &file.hourly_output);
    if hourly_output.is_some() && means_path.is_none() {
        return Err(usage("--hourly-output needs --means"));
    }
    let output = pick(&args.output, &file.output);

    let reader = File::open(&input).map_err(|e| runtime(format!("cannot open {}: {e}", input.display())))?;
    let report = PhdReport::read_csv(BufReader::new(reader)).map_err(runtime)?;

    let mut out = output_sink(output.as_deref())?;
    if report.is_empty() {
        writeln!(out, "no data").map_err(runtime)?;
    } else {
        match format {
            OutputFormat::Table => out.write_all(render_table(&report).as_bytes()).map_err(runtime)?,
            OutputFormat::Csv => report.write_csv(&mut out).map_err(runtime)?,
        }
    }
    out.flush().map_err(runtime)?;

    if let (Some(means_path), Some(hourly)) = (means_path, hourly_output) {
        let reader = File::open(&means_path).map_err(|e| runtime(format!("cannot open {}: {e}", means_path.display())))?;
        let means = read_means_csv(BufReader::new(reader)).map_err(runtime)?;
        let mut sink = output_sink(Some(&hourly))?;
        write_hourly(&means, &windows, &mut sink)?;
        sink.flush().map_err(runtime)?;
    }
    Ok(())
}
