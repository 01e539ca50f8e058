use std::collections::HashMap;
use std::net::SocketAddr;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};
use std::time::Duration;

use axum::body::Bytes;
use axum::extract::{Path, State};
use axum::http::{header, HeaderValue, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::get;
use axum::Router;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use serde::Serialize;
use tokio::task::JoinHandle;
use tokio_util::sync::CancellationToken;

use crate::clock::Clock;
use crate::detect::encode_pattern_jpeg;
use crate::ingest::{CameraEndpoint, REQUEST_ID_HEADER};
use crate::model::{ClassCounts, SourceId};

use super::fleet::SimCameraSpec;
use super::CamsimError;

/// One served (or refused) camera request.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RequestRecord {
    pub request_id: String,
    pub source: SourceId,
    pub latency_ms: f64,
    pub status: u16,
    pub counts: ClassCounts,
}

type CacheKey = (u32, u32, u8, [u32; 5]);

struct SimState {
    specs: HashMap<String, SimCameraSpec>,
    clock: Arc<dyn Clock>,
    rng: Mutex<StdRng>,
    next_id: AtomicU64,
    log: Mutex<Vec<RequestRecord>>,
    cache: Mutex<HashMap<CacheKey, Bytes>>,
}

impl SimState {
    fn jpeg(&self, spec: &SimCameraSpec, counts: ClassCounts) -> Result<Bytes, CamsimError> {
        let key = (spec.width, spec.height, spec.jpeg_quality, counts.as_array());
        if let Some(hit) = self.cache.lock().expect("cache lock").get(&key) {
            return Ok(hit.clone());
        }
        let encoded = Bytes::from(
            encode_pattern_jpeg(&counts, spec.width, spec.height, spec.jpeg_quality)
                .map_err(|e| CamsimError::Config(e.to_string()))?,
        );
        self.cache.lock().expect("cache lock").insert(key, encoded.clone());
        Ok(encoded)
    }
}

/// Running simulated camera fleet.
pub struct CamSim {
    addr: SocketAddr,
    state: Arc<SimState>,
    stop: CancellationToken,
    task: Mutex<Option<JoinHandle<()>>>,
}

impl CamSim {
    /// Binds `addr` (port 0 picks a free port) and starts serving.
    pub async fn start(
        specs: Vec<SimCameraSpec>,
        addr: SocketAddr,
        clock: Arc<dyn Clock>,
        seed: Option<u64>,
    ) -> Result<Self, CamsimError> {
        let mut by_id = HashMap::with_capacity(specs.len());
        for mut spec in specs {
            spec.validate()?;
            let id = spec.source.to_string();
            if by_id.insert(id.clone(), spec).is_some() {
                return Err(CamsimError::Config(format!("camera '{id}' is listed more than once")));
            }
        }
        let rng = match seed {
            Some(seed) => StdRng::seed_from_u64(seed),
            None => StdRng::from_os_rng(),
        };
        let state = Arc::new(SimState {
            specs: by_id,
            clock,
            rng: Mutex::new(rng),
            next_id: AtomicU64::new(1),
            log: Mutex::new(Vec::new()),
            cache: Mutex::new(HashMap::new()),
        });
        let app = Router::new()
            .route("/healthz", get(|| async { "ok" }))
            .route("/cam/{id}", get(serve_camera))
            .with_state(Arc::clone(&state));
        let listener = tokio::net::TcpListener::bind(addr).await.map_err(CamsimError::Bind)?;
        let addr = listener.local_addr().map_err(CamsimError::Bind)?;
        let stop = CancellationToken::new();
        let shutdown = stop.clone();
        let task = tokio::spawn(async move {
            let served = axum::serve(listener, app)
                .with_graceful_shutdown(async move { shutdown.cancelled().await })
                .await;
            if let Err(e) = served {
                log::error!("camera simulator stopped: {e}");
            }
        });
        Ok(Self {
            addr,
            state,
            stop,
            task: Mutex::new(Some(task)),
        })
    }

    pub fn addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn url_for(&self, source: &SourceId) -> String {
        format!("http://{}/cam/{}", self.addr, source)
    }

    /// Collector endpoints for every simulated camera, sorted by id.
    pub fn endpoints(&self, poll_interval: Duration) -> Vec<CameraEndpoint> {
        let mut specs: Vec<&SimCameraSpec> = self.state.specs.values().collect();
        specs.sort_by(|a, b| a.source.cmp(&b.source));
        specs
            .into_iter()
            .map(|spec| CameraEndpoint {
                source: spec.source.clone(),
                url: self.url_for(&spec.source).parse().expect("simulator URL is valid"),
                expected_width: spec.width,
                expected_height: spec.height,
                poll_interval,
            })
            .collect()
    }

    /// Snapshot of the request log in arrival order.
    pub fn requests(&self) -> Vec<RequestRecord> {
        self.state.log.lock().expect("log lock").clone()
    }

    /// Stops accepting requests and waits for the server task. Safe to call
    /// more than once.
    pub async fn shutdown(&self) {
        self.stop.cancel();
        let task = self.task.lock().expect("task lock").take();
        if let Some(task) = task {
            let _ = task.await;
        }
    }
}

impl Drop for CamSim {
    fn drop(&mut self) {
        self.stop.cancel();
    }
}

async fn serve_camera(State(state): State<Arc<SimState>>, Path(id): Path<String>) -> Response {
    let Some(spec) = state.specs.get(&id) else {
        return (StatusCode::NOT_FOUND, format!("unknown camera '{id}'")).into_response();
    };
    let (latency_ms, fail) = {
        let mut rng = state.rng.lock().expect("rng lock");
        let latency = spec.latency.sample(&mut *rng);
        let fail = spec.error_rate > 0.0 && rng.random_bool(spec.error_rate);
        (latency, fail)
    };
    let request_id = format!("r{}", state.next_id.fetch_add(1, Ordering::Relaxed));
    let counts = spec.script.counts_at(state.clock.now());
    let body = if fail { Ok(Bytes::new()) } else { state.jpeg(spec, counts) };
    let status = match (&body, fail) {
        (_, true) => StatusCode::INTERNAL_SERVER_ERROR,
        (Err(_), _) => StatusCode::INTERNAL_SERVER_ERROR,
        _ => StatusCode::OK,
    };
    state.log.lock().expect("log lock").push(RequestRecord {
        request_id: request_id.clone(),
        source: spec.source.clone(),
        latency_ms,
        status: status.as_u16(),
        counts,
    });
    tokio::time::sleep(Duration::from_secs_f64(latency_ms / 1000.0)).await;

    let id_header = HeaderValue::from_str(&request_id).expect("request id is ASCII");
    match body {
        Ok(jpeg) if status == StatusCode::OK => (
            status,
            [
                (header::CONTENT_TYPE, HeaderValue::from_static("image/jpeg")),
                (header::HeaderName::from_static(REQUEST_ID_HEADER), id_header),
            ],
            jpeg,
        )
            .into_response(),
        Err(e) => (status, [(header::HeaderName::from_static(REQUEST_ID_HEADER), id_header)], e.to_string()).into_response(),
        Ok(_) => (status, [(header::HeaderName::from_static(REQUEST_ID_HEADER), id_header)], "injected failure").into_response(),
    }
}
