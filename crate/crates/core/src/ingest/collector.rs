use std::cmp::Reverse;
use std::collections::BinaryHeap;
use std::sync::Arc;
use std::time::Duration;

use log::{debug, error, warn};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use thiserror::Error;
use tokio::sync::mpsc;
use tokio::time::Instant;
use tokio_util::sync::CancellationToken;

use crate::clock::Clock;

use super::batch::Batcher;
use super::config::{CameraEndpoint, CollectorConfig, ConfigError};
use super::fetch::{fetch_frame, http_client, DiscardReason, FetchOutcome};
use super::frame::{Frame, FrameBatch};
use super::stats::{CollectorStats, Event, StatsRecorder};

#[derive(Debug, Error)]
#[error("{message}")]
pub struct SinkError {
    pub message: String,
    pub retriable: bool,
}

impl SinkError {
    pub fn retriable(message: impl Into<String>) -> Self {
        Self {
            message: message.into(),
            retriable: true,
        }
    }

    pub fn fatal(message: impl Into<String>) -> Self {
        Self {
            message: message.into(),
            retriable: false,
        }
    }
}

/// Single consumer of formed batches. Called on a blocking thread, one batch
/// at a time.
pub trait BatchSink: Send + 'static {
    fn consume(&mut self, batch: &FrameBatch) -> Result<(), SinkError>;
}

impl<F> BatchSink for F
where
    F: FnMut(&FrameBatch) -> Result<(), SinkError> + Send + 'static,
{
    fn consume(&mut self, batch: &FrameBatch) -> Result<(), SinkError> {
        self(batch)
    }
}

const SINK_RETRY_BACKOFF: Duration = Duration::from_millis(20);

/// Polls a fixed camera set with a pool of fetch workers, discards slow or
/// failed downloads, and feeds accepted frames through a bounded queue into
/// the batcher and sink.
///
/// Frames resident at any moment never exceed
/// `queue_capacity + batch_size + workers`: workers hold at most one frame
/// each, the queue is bounded with drop-newest overflow, and the batcher does
/// not read from the queue while the sink is busy with a batch.
pub struct Collector {
    cameras: Arc<[CameraEndpoint]>,
    cfg: CollectorConfig,
    clock: Arc<dyn Clock>,
    client: reqwest::Client,
    stats: Arc<StatsRecorder>,
    phase_seed: Option<u64>,
}

impl Collector {
    pub fn new(cameras: Vec<CameraEndpoint>, cfg: CollectorConfig, clock: Arc<dyn Clock>) -> Result<Self, ConfigError> {
        cfg.validate()?;
        if cameras.is_empty() {
            return Err(ConfigError::NoCameras);
        }
        let stats = Arc::new(StatsRecorder::new(cameras.iter().map(|c| &c.source)));
        Ok(Self {
            cameras: cameras.into(),
            cfg,
            clock,
            client: http_client(),
            stats,
            phase_seed: None,
        })
    }

    /// Fixes the random initial poll phases.
    pub fn with_phase_seed(mut self, seed: u64) -> Self {
        self.phase_seed = Some(seed);
        self
    }

    pub fn stats(&self) -> Arc<StatsRecorder> {
        Arc::clone(&self.stats)
    }

    /// Runs until `stop` is cancelled, then drains queued frames through the
    /// sink and returns the final counters.
    pub async fn run<S: BatchSink>(self, sink: S, stop: CancellationToken) -> CollectorStats {
        let (job_tx, job_rx) = async_channel::bounded::<usize>(self.cfg.workers * 2);
        let (frame_tx, frame_rx) = mpsc::channel::<Frame>(self.cfg.queue_capacity);

        let rng = match self.phase_seed {
            Some(seed) => StdRng::seed_from_u64(seed),
            None => StdRng::from_os_rng(),
        };
        let scheduler = tokio::spawn(schedule(Arc::clone(&self.cameras), job_tx, rng, stop.clone()));

        let workers: Vec<_> = (0..self.cfg.workers)
            .map(|_| {
                tokio::spawn(fetch_worker(
                    Arc::clone(&self.cameras),
                    job_rx.clone(),
                    frame_tx.clone(),
                    self.client.clone(),
                    self.cfg.download_timeout(),
                    Arc::clone(&self.clock),
                    Arc::clone(&self.stats),
                    stop.clone(),
                ))
            })
            .collect();
        drop(frame_tx);
        drop(job_rx);

        let consumer = tokio::spawn(consume_batches(
            frame_rx,
            Batcher::new(self.cfg.batch_size, self.cfg.batch_max_wait()),
            sink,
            Arc::clone(&self.stats),
            self.cfg.sink_retries,
        ));

        let _ = scheduler.await;
        for worker in workers {
            let _ = worker.await;
        }
        if let Err(e) = consumer.await {
            error!("batch consumer failed: {e}");
        }
        self.stats.snapshot()
    }
}

pub async fn run_collector<S: BatchSink>(
    cameras: Vec<CameraEndpoint>,
    cfg: CollectorConfig,
    sink: S,
    clock: Arc<dyn Clock>,
    stop: CancellationToken,
) -> Result<CollectorStats, ConfigError> {
    Ok(Collector::new(cameras, cfg, clock)?.run(sink, stop).await)
}

/// Emits one job per camera every poll interval, starting at a random phase.
/// When workers fall behind the schedule slips rather than bursting.
async fn schedule(cameras: Arc<[CameraEndpoint]>, jobs: async_channel::Sender<usize>, mut rng: StdRng, stop: CancellationToken) {
    let start = Instant::now();
    let mut due: BinaryHeap<Reverse<(Instant, usize)>> = cameras
        .iter()
        .enumerate()
        .map(|(i, cam)| {
            let interval = cam.poll_interval.as_nanos().max(1) as u64;
            Reverse((start + Duration::from_nanos(rng.random_range(0..interval)), i))
        })
        .collect();
    while let Some(Reverse((at, i))) = due.pop() {
        tokio::select! {
            _ = stop.cancelled() => break,
            _ = tokio::time::sleep_until(at) => {}
        }
        tokio::select! {
            _ = stop.cancelled() => break,
            sent = jobs.send(i) => if sent.is_err() { break },
        }
        let next = (at + cameras[i].poll_interval).max(Instant::now());
        due.push(Reverse((next, i)));
    }
}

#[allow(clippy::too_many_arguments)]
async fn fetch_worker(
    cameras: Arc<[CameraEndpoint]>,
    jobs: async_channel::Receiver<usize>,
    frames: mpsc::Sender<Frame>,
    client: reqwest::Client,
    timeout: Duration,
    clock: Arc<dyn Clock>,
    stats: Arc<StatsRecorder>,
    stop: CancellationToken,
) {
    loop {
        let job = tokio::select! {
            biased;
            _ = stop.cancelled() => break,
            job = jobs.recv() => job,
        };
        let Ok(index) = job else { break };
        let cam = &cameras[index];
        let outcome = fetch_frame(&client, cam, timeout, clock.as_ref()).await;
        stats.record(&cam.source, Event::Fetched, 1);
        match outcome {
            FetchOutcome::Frame(frame) => {
                stats.frame_acquired();
                if frames.try_send(frame).is_err() {
                    stats.record(&cam.source, Event::QueueFull, 1);
                    stats.frames_released(1);
                }
            }
            FetchOutcome::Discarded(DiscardReason::Timeout) => stats.record(&cam.source, Event::Timeout, 1),
            FetchOutcome::Discarded(DiscardReason::Error(reason)) => {
                debug!("{}: fetch failed: {reason}", cam.source);
                stats.record(&cam.source, Event::Error, 1);
            }
        }
    }
}

async fn consume_batches<S: BatchSink>(
    mut frames: mpsc::Receiver<Frame>,
    mut batcher: Batcher,
    sink: S,
    stats: Arc<StatsRecorder>,
    retries: u32,
) {
    let mut sink = Some(sink);
    while let Some(batch) = batcher.next_batch(&mut frames).await {
        for frame in &batch.frames {
            stats.record(&frame.source, Event::Batched, 1);
        }
        let Some(mut owned) = sink.take() else { break };
        let joined = tokio::task::spawn_blocking(move || {
            let ok = deliver(&mut owned, &batch, retries);
            (owned, batch, ok)
        })
        .await;
        let (returned, batch, ok) = match joined {
            Ok(done) => done,
            Err(e) => {
                error!("sink panicked: {e}");
                break;
            }
        };
        sink = Some(returned);
        let event = if ok { Event::Persisted } else { Event::SinkFailed };
        for frame in &batch.frames {
            stats.record(&frame.source, event, 1);
        }
        stats.batch_done(ok);
        let n = batch.len() as u64;
        drop(batch);
        stats.frames_released(n);
    }
}

fn deliver<S: BatchSink>(sink: &mut S, batch: &FrameBatch, retries: u32) -> bool {
    for attempt in 1..=retries {
        match sink.consume(batch) {
            Ok(()) => return true,
            Err(e) if e.retriable && attempt < retries => {
                warn!("batch {} attempt {attempt} failed: {e}; retrying", batch.batch_id);
                std::thread::sleep(SINK_RETRY_BACKOFF * attempt);
            }
            Err(e) => {
                error!("dropping batch {} ({} frames): {e}", batch.batch_id, batch.len());
                return false;
            }
        }
    }
    false
}

#[cfg(test)]
mod tests {
    use super::*;

    fn batch(n: usize) -> FrameBatch {
        FrameBatch {
            batch_id: 1,
            frames: vec![
                Frame {
                    source: crate::model::SourceId::new("a").unwrap(),
                    captured_at: crate::model::utc_from_millis(0).unwrap(),
                    payload: vec![0],
                    payload_format: crate::ingest::PayloadFormat::Unknown,
                    download_ms: 0.0,
                    request_id: None,
                };
                n
            ],
        }
    }

    #[test]
    fn deliver_retries_then_gives_up() {
        use std::sync::atomic::{AtomicU32, Ordering};

        let calls = Arc::new(AtomicU32::new(0));
        let seen = Arc::clone(&calls);
        let mut flaky = move |_: &FrameBatch| {
            if seen.fetch_add(1, Ordering::SeqCst) < 2 {
                Err(SinkError::retriable("busy"))
            } else {
                Ok(())
            }
        };
        assert!(deliver(&mut flaky, &batch(2), 3));
        assert_eq!(calls.load(Ordering::SeqCst), 3);

        let attempts = Arc::new(AtomicU32::new(0));
        let seen = Arc::clone(&attempts);
        let mut broken = move |_: &FrameBatch| {
            seen.fetch_add(1, Ordering::SeqCst);
            Err(SinkError::retriable("down"))
        };
        assert!(!deliver(&mut broken, &batch(2), 3));
        assert_eq!(attempts.load(Ordering::SeqCst), 3);

        let fatal_attempts = Arc::new(AtomicU32::new(0));
        let seen = Arc::clone(&fatal_attempts);
        let mut fatal = move |_: &FrameBatch| {
            seen.fetch_add(1, Ordering::SeqCst);
            Err(SinkError::fatal("schema mismatch"))
        };
        assert!(!deliver(&mut fatal, &batch(1), 3));
        assert_eq!(fatal_attempts.load(Ordering::SeqCst), 1);
    }
}
