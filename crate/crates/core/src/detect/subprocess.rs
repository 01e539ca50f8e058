use std::io::{BufRead, BufReader, Write};
use std::process::{Child, ChildStdin, Command, Stdio};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::thread;
use std::time::Duration;

use log::{debug, warn};

use super::protocol::{detect_request, parse_timestamp, to_line, WorkerMessage};
use super::{BackendCapabilities, BackendError, DetectorBackend, FrameDetections, DEFAULT_INPUT_SIZE};
use crate::ingest::Frame;

struct Worker {
    child: Child,
    stdin: ChildStdin,
    lines: Receiver<std::io::Result<String>>,
}

impl Worker {
    fn spawn(program: &str, args: &[String]) -> Result<Self, BackendError> {
        let mut child = Command::new(program)
            .args(args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()
            .map_err(BackendError::Spawn)?;
        let stdin = child.stdin.take().ok_or(BackendError::Crashed)?;
        let stdout = child.stdout.take().ok_or(BackendError::Crashed)?;
        let (tx, lines) = mpsc::channel();
        thread::Builder::new()
            .name("detector-stdout".into())
            .spawn(move || {
                for line in BufReader::new(stdout).lines() {
                    if tx.send(line).is_err() {
                        break;
                    }
                }
            })
            .map_err(BackendError::Spawn)?;
        Ok(Self { child, stdin, lines })
    }

    fn next_message(&self, timeout: Duration) -> Result<WorkerMessage, BackendError> {
        loop {
            let line = match self.lines.recv_timeout(timeout) {
                Ok(Ok(line)) => line,
                Ok(Err(_)) | Err(RecvTimeoutError::Disconnected) => return Err(BackendError::Crashed),
                Err(RecvTimeoutError::Timeout) => return Err(BackendError::Timeout(timeout.as_millis() as u64)),
            };
            if line.trim().is_empty() {
                continue;
            }
            return serde_json::from_str(&line)
                .map_err(|e| BackendError::Protocol(format!("unparseable line ({e}): {line}")));
        }
    }
}

impl Drop for Worker {
    fn drop(&mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

/// Detector running as a child process speaking the line protocol in
/// [`super::protocol`]. A worker that times out, crashes or desynchronizes is
/// killed and restarted on the next call.
pub struct SubprocessBackend {
    program: String,
    args: Vec<String>,
    required_batch: usize,
    timeout: Duration,
    capabilities: BackendCapabilities,
    worker: Option<Worker>,
    next_batch_id: i64,
}

impl SubprocessBackend {
    /// Starts the worker and waits for its hello. Workers advertising a
    /// `max_batch` smaller than `required_batch` are rejected.
    pub fn spawn(program: &str, args: &[String], required_batch: usize, timeout: Duration) -> Result<Self, BackendError> {
        let mut backend = Self {
            program: program.to_string(),
            args: args.to_vec(),
            required_batch,
            timeout,
            capabilities: BackendCapabilities {
                max_batch: required_batch,
                input_size: DEFAULT_INPUT_SIZE,
                model_id: String::new(),
            },
            worker: None,
            next_batch_id: 1,
        };
        backend.start()?;
        Ok(backend)
    }

    fn start(&mut self) -> Result<(), BackendError> {
        let worker = Worker::spawn(&self.program, &self.args)?;
        match worker.next_message(self.timeout)? {
            WorkerMessage::Hello { max_batch, model_id } => {
                if max_batch < self.required_batch {
                    return Err(BackendError::Handshake(format!(
                        "worker max_batch {max_batch} is smaller than batch size {}",
                        self.required_batch
                    )));
                }
                if !self.capabilities.model_id.is_empty() && self.capabilities.model_id != model_id {
                    return Err(BackendError::Handshake(format!(
                        "restarted worker reports model '{model_id}', expected '{}'",
                        self.capabilities.model_id
                    )));
                }
                debug!("detector worker ready: model {model_id}, max_batch {max_batch}");
                self.capabilities.max_batch = max_batch;
                self.capabilities.model_id = model_id;
                self.worker = Some(worker);
                Ok(())
            }
            other => Err(BackendError::Handshake(format!("expected hello, got {other:?}"))),
        }
    }

    fn exchange(&mut self, batch_id: i64, frames: &[Frame]) -> Result<Vec<FrameDetections>, BackendError> {
        let worker = self.worker.as_mut().ok_or(BackendError::Crashed)?;
        let line = to_line(&detect_request(batch_id, frames));
        worker
            .stdin
            .write_all(line.as_bytes())
            .and_then(|_| worker.stdin.flush())
            .map_err(|_| BackendError::Crashed)?;
        match worker.next_message(self.timeout)? {
            WorkerMessage::Result { batch_id: echoed, results } => {
                if echoed != batch_id {
                    return Err(BackendError::Protocol(format!("sent batch {batch_id}, got result for {echoed}")));
                }
                if results.len() != frames.len() {
                    return Err(BackendError::Protocol(format!(
                        "{} results for {} frames",
                        results.len(),
                        frames.len()
                    )));
                }
                frames
                    .iter()
                    .zip(results)
                    .map(|(frame, result)| {
                        let aligned = result.source == frame.source
                            && parse_timestamp(&result.captured_at).map(|t| t.timestamp_millis())
                                == Some(frame.captured_at.timestamp_millis());
                        if aligned {
                            Ok(FrameDetections::Counted(result.counts))
                        } else {
                            Err(BackendError::Protocol(format!(
                                "result for {}@{} does not match frame {}",
                                result.source, result.captured_at, frame.source
                            )))
                        }
                    })
                    .collect()
            }
            WorkerMessage::Error { batch_id: echoed, message } if echoed == batch_id => Err(BackendError::Worker(message)),
            other => Err(BackendError::Protocol(format!("unexpected reply to batch {batch_id}: {other:?}"))),
        }
    }
}

impl DetectorBackend for SubprocessBackend {
    fn capabilities(&self) -> &BackendCapabilities {
        &self.capabilities
    }

    fn infer(&mut self, frames: &[Frame]) -> Result<Vec<FrameDetections>, BackendError> {
        if self.worker.is_none() {
            self.start()?;
        }
        let batch_id = self.next_batch_id;
        self.next_batch_id += 1;
        let outcome = self.exchange(batch_id, frames);
        if let Err(e) = &outcome {
            if !matches!(e, BackendError::Worker(_)) {
                warn!("restarting detector worker after: {e}");
                self.worker = None;
            }
        }
        outcome
    }
}
