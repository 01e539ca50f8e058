use std::time::Duration;

use tokio::sync::mpsc;
use tokio::time::Instant;

use super::frame::{Frame, FrameBatch};

/// Groups frames into batches of at most `batch_size`.
///
/// A batch is emitted as soon as it is full, or once `max_wait` has passed
/// since its oldest frame arrived. Arrival order is preserved and empty
/// batches are never produced.
#[derive(Debug)]
pub struct Batcher {
    batch_size: usize,
    max_wait: Duration,
    next_id: u64,
    buffer: Vec<Frame>,
    oldest: Option<Instant>,
}

impl Batcher {
    pub fn new(batch_size: usize, max_wait: Duration) -> Self {
        assert!(batch_size >= 1, "batch_size must be at least 1");
        Self {
            batch_size,
            max_wait,
            next_id: 1,
            buffer: Vec::with_capacity(batch_size),
            oldest: None,
        }
    }

    pub fn buffered(&self) -> usize {
        self.buffer.len()
    }

    fn take(&mut self) -> FrameBatch {
        let batch_id = self.next_id;
        self.next_id += 1;
        self.oldest = None;
        let frames = std::mem::replace(&mut self.buffer, Vec::with_capacity(self.batch_size));
        FrameBatch { batch_id, frames }
    }

    fn push(&mut self, frame: Frame) {
        if self.buffer.is_empty() {
            self.oldest = Some(Instant::now());
        }
        self.buffer.push(frame);
    }

    /// Waits for the next batch. Returns `None` once the channel is closed
    /// and every buffered frame has been flushed.
    pub async fn next_batch(&mut self, rx: &mut mpsc::Receiver<Frame>) -> Option<FrameBatch> {
        loop {
            if self.buffer.len() >= self.batch_size {
                return Some(self.take());
            }
            let Some(oldest) = self.oldest else {
                match rx.recv().await {
                    Some(frame) => {
                        self.push(frame);
                        continue;
                    }
                    None => return None,
                }
            };
            tokio::select! {
                biased;
                received = rx.recv() => match received {
                    Some(frame) => self.push(frame),
                    None => return Some(self.take()),
                },
                _ = tokio::time::sleep_until(oldest + self.max_wait) => return Some(self.take()),
            }
        }
    }
}

/// Stream adapter: consumes `frames` on a background task and yields batches.
pub fn form_batches(mut frames: mpsc::Receiver<Frame>, batch_size: usize, max_wait: Duration) -> mpsc::Receiver<FrameBatch> {
    let (tx, rx) = mpsc::channel(1);
    tokio::spawn(async move {
        let mut batcher = Batcher::new(batch_size, max_wait);
        while let Some(batch) = batcher.next_batch(&mut frames).await {
            if tx.send(batch).await.is_err() {
                break;
            }
        }
    });
    rx
}
