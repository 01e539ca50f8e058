use std::path::PathBuf;
use std::sync::Arc;
use std::time::Duration;

use serde::Serialize;
use tokio_util::sync::CancellationToken;

use crate::clock::{Clock, SystemClock, VirtualClock};
use crate::detect::{DetectorBackend, StubBackend, SubprocessBackend, DEFAULT_CONFIDENCE_THRESHOLD};
use crate::ingest::{load_camera_file, Collector, CollectorConfig, WORKERS_ENV};
use crate::pipeline::DetectAndStore;
use crate::store::Store;

use super::{env_value, missing, pick, runtime, usage, CliError, CollectArgs, DetectorKind, FileConfig};

const DEFAULT_DETECTOR_TIMEOUT_MS: u64 = 30_000;
const DEFAULT_STATS_INTERVAL_MS: u64 = 5_000;

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub struct CollectSettings {
    pub cameras: PathBuf,
    pub db: PathBuf,
    pub detector: DetectorKind,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub detector_cmd: Option<String>,
    pub detector_args: Vec<String>,
    pub detector_timeout_ms: u64,
    pub workers: usize,
    pub batch_size: usize,
    pub download_timeout_ms: f64,
    pub batch_max_wait_ms: f64,
    pub queue_capacity: usize,
    pub sink_retries: u32,
    pub threshold: f32,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub duration_ms: Option<u64>,
    pub stats_interval_ms: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub clock_file: Option<PathBuf>,
}

impl CollectSettings {
    pub fn resolve(args: &CollectArgs, file: &FileConfig) -> Result<Self, CliError> {
        let defaults = CollectorConfig::default();
        let env_workers = match env_value(WORKERS_ENV) {
            Some(v) => Some(v.parse::<usize>().ok().filter(|n| *n > 0).ok_or_else(|| {
                usage(format!("{WORKERS_ENV}='{v}' is not a positive integer"))
            })?),
            None => None,
        };
        let settings = Self {
            cameras: pick(&args.cameras, &file.cameras).ok_or_else(|| missing("collect", "cameras"))?,
            db: pick(&args.db, &file.db).ok_or_else(|| missing("collect", "db"))?,
            detector: pick(&args.detector, &file.detector).unwrap_or(DetectorKind::Stub),
            detector_cmd: pick(&args.detector_cmd, &file.detector_cmd),
            detector_args: if args.detector_args.is_empty() {
                file.detector_args.clone().unwrap_or_default()
            } else {
                args.detector_args.clone()
            },
            detector_timeout_ms: pick(&args.detector_timeout_ms, &file.detector_timeout_ms).unwrap_or(DEFAULT_DETECTOR_TIMEOUT_MS),
            workers: args.workers.or(env_workers).or(file.workers).unwrap_or(defaults.workers),
            batch_size: pick(&args.batch_size, &file.batch_size).unwrap_or(defaults.batch_size),
            download_timeout_ms: pick(&args.download_timeout_ms, &file.download_timeout_ms).unwrap_or(defaults.download_timeout_ms),
            batch_max_wait_ms: pick(&args.batch_max_wait_ms, &file.batch_max_wait_ms).unwrap_or(defaults.batch_max_wait_ms),
            queue_capacity: pick(&args.queue_capacity, &file.queue_capacity).unwrap_or(defaults.queue_capacity),
            sink_retries: pick(&args.sink_retries, &file.sink_retries).unwrap_or(defaults.sink_retries),
            threshold: pick(&args.threshold, &file.threshold).unwrap_or(DEFAULT_CONFIDENCE_THRESHOLD),
            duration_ms: pick(&args.duration_ms, &file.duration_ms),
            stats_interval_ms: pick(&args.stats_interval_ms, &file.stats_interval_ms).unwrap_or(DEFAULT_STATS_INTERVAL_MS),
            clock_file: pick(&args.clock_file, &file.clock_file),
        };
        settings.collector_config().validate().map_err(usage)?;
        if !(settings.threshold > 0.0 && settings.threshold <= 1.0) {
            return Err(usage(format!("--threshold {} outside (0, 1]", settings.threshold)));
        }
        if settings.detector == DetectorKind::Subprocess && settings.detector_cmd.is_none() {
            return Err(missing("collect", "detector-cmd"));
        }
        if settings.stats_interval_ms == 0 {
            return Err(usage("--stats-interval-ms must be at least 1"));
        }
        Ok(settings)
    }

    pub fn collector_config(&self) -> CollectorConfig {
        CollectorConfig {
            workers: self.workers,
            batch_size: self.batch_size,
            download_timeout_ms: self.download_timeout_ms,
            batch_max_wait_ms: self.batch_max_wait_ms,
            queue_capacity: self.queue_capacity,
            sink_retries: self.sink_retries,
        }
    }
}

pub(super) fn run(args: CollectArgs, file: &FileConfig) -> Result<(), CliError> {
    let settings = CollectSettings::resolve(&args, file)?;
    if args.print_config {
        println!("{}", serde_json::to_string_pretty(&settings).map_err(runtime)?);
        return Ok(());
    }
    let cameras = load_camera_file(&settings.cameras).map_err(usage)?;
    let clock: Arc<dyn Clock> = match &settings.clock_file {
        Some(path) => Arc::new(VirtualClock::load(path).map_err(|e| usage(format!("cannot read clock file {}: {e}", path.display())))?),
        None => Arc::new(SystemClock),
    };
    let collector = Collector::new(cameras, settings.collector_config(), clock).map_err(usage)?;
    let store = Arc::new(Store::open(&settings.db).map_err(|e| runtime(format!("cannot open {}: {e}", settings.db.display())))?);
    let backend: Box<dyn DetectorBackend> = match settings.detector {
        DetectorKind::Stub => Box::new(StubBackend::new(settings.batch_size)),
        DetectorKind::Subprocess => Box::new(
            SubprocessBackend::spawn(
                settings.detector_cmd.as_deref().unwrap_or_default(),
                &settings.detector_args,
                settings.batch_size,
                Duration::from_millis(settings.detector_timeout_ms),
            )
            .map_err(|e| runtime(format!("detector worker: {e}")))?,
        ),
    };
    let sink = DetectAndStore::new(backend, store, settings.threshold);

    let rt = tokio::runtime::Builder::new_multi_thread().enable_all().build().map_err(runtime)?;
    let stats = rt.block_on(async {
        let stop = CancellationToken::new();
        let recorder = collector.stats();
        let interval = Duration::from_millis(settings.stats_interval_ms);
        let printer_stop = stop.clone();
        let printer = tokio::spawn(async move {
            let mut ticker = tokio::time::interval(interval);
            ticker.tick().await;
            loop {
                tokio::select! {
                    _ = printer_stop.cancelled() => break,
                    _ = ticker.tick() => eprintln!("stats: {}", recorder.snapshot()),
                }
            }
        });
        let stopper = stop.clone();
        let duration = settings.duration_ms.map(Duration::from_millis);
        tokio::spawn(async move {
            match duration {
                Some(d) => {
                    tokio::select! {
                        _ = tokio::time::sleep(d) => {}
                        _ = tokio::signal::ctrl_c() => {}
                    }
                }
                None => {
                    let _ = tokio::signal::ctrl_c().await;
                }
            }
            stopper.cancel();
        });
        let stats = collector.run(sink, stop.clone()).await;
        stop.cancel();
        let _ = printer.await;
        stats
    });
    println!("final: {stats}");
    if stats.batches_failed > 0 {
        return Err(runtime(format!("{} of {} batches could not be stored", stats.batches_failed, stats.batches)));
    }
    Ok(())
}
