use std::time::{Duration, Instant};

use crate::clock::Clock;

use super::config::CameraEndpoint;
use super::frame::{Frame, PayloadFormat};

pub const REQUEST_ID_HEADER: &str = "x-request-id";

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DiscardReason {
    /// The full payload did not arrive within the download threshold.
    Timeout,
    /// Connection failure, non-success status or empty body.
    Error(String),
}

#[derive(Debug, Clone, PartialEq)]
pub enum FetchOutcome {
    Frame(Frame),
    Discarded(DiscardReason),
}

pub fn http_client() -> reqwest::Client {
    reqwest::Client::builder()
        .pool_idle_timeout(Duration::from_secs(30))
        .build()
        .expect("HTTP client configuration is static")
}

/// Downloads one still image. The frame is returned only if the last byte
/// arrived within `timeout`; otherwise the request is dropped, which aborts
/// the connection.
pub async fn fetch_frame(client: &reqwest::Client, cam: &CameraEndpoint, timeout: Duration, clock: &dyn Clock) -> FetchOutcome {
    let started = Instant::now();
    let download = async {
        let response = client.get(cam.url.clone()).send().await?.error_for_status()?;
        let request_id = response
            .headers()
            .get(REQUEST_ID_HEADER)
            .and_then(|v| v.to_str().ok())
            .map(str::to_string);
        let body = response.bytes().await?;
        Ok::<_, reqwest::Error>((body, request_id))
    };
    let (body, request_id) = match tokio::time::timeout(timeout, download).await {
        Err(_) => return FetchOutcome::Discarded(DiscardReason::Timeout),
        Ok(Err(e)) if e.is_timeout() => return FetchOutcome::Discarded(DiscardReason::Timeout),
        Ok(Err(e)) => return FetchOutcome::Discarded(DiscardReason::Error(e.to_string())),
        Ok(Ok(done)) => done,
    };
    let elapsed = started.elapsed();
    if elapsed > timeout {
        return FetchOutcome::Discarded(DiscardReason::Timeout);
    }
    if body.is_empty() {
        return FetchOutcome::Discarded(DiscardReason::Error("empty payload".into()));
    }
    let payload = body.to_vec();
    FetchOutcome::Frame(Frame {
        source: cam.source.clone(),
        captured_at: crate::model::truncate_to_millis(clock.now()),
        payload_format: PayloadFormat::detect(&payload),
        payload,
        download_ms: elapsed.as_secs_f64() * 1000.0,
        request_id,
    })
}
