//! Subprocess detector backend against a scripted worker speaking the line
//! protocol.

use std::path::PathBuf;
use std::time::{Duration, Instant};

use trafficlens::detect::{detect_batch, BackendError, DetectError, DetectorBackend, SubprocessBackend};
use trafficlens::ingest::{Frame, FrameBatch, PayloadFormat};
use trafficlens::model::{utc_from_millis, SourceId, VehicleClass};

fn worker_script() -> String {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures/mock_worker.py")
        .display()
        .to_string()
}

fn spawn(mode: &str, extra: &[&str], batch: usize, timeout_ms: u64) -> Result<SubprocessBackend, BackendError> {
    let mut args = vec![worker_script(), mode.to_string()];
    args.extend(extra.iter().map(|s| s.to_string()));
    SubprocessBackend::spawn("python3", &args, batch, Duration::from_millis(timeout_ms))
}

fn batch(n: usize) -> FrameBatch {
    FrameBatch {
        batch_id: 1,
        frames: (0..n)
            .map(|i| Frame {
                source: SourceId::new(format!("cam-{i}")).unwrap(),
                captured_at: utc_from_millis(1_736_500_000_123 + i as i64).unwrap(),
                payload: vec![0xff, 0xd8, 0xff, i as u8],
                payload_format: PayloadFormat::Jpeg,
                download_ms: 3.0,
                request_id: None,
            })
            .collect(),
    }
}

#[test]
fn counts_come_back_aligned_and_tagged_with_worker_model() {
    let mut backend = spawn("ok", &[], 64, 10_000).unwrap();
    assert_eq!(backend.capabilities().model_id, "mock-v1");
    assert_eq!(backend.capabilities().max_batch, 64);
    let results = detect_batch(&batch(3), &mut backend, 0.25).unwrap();
    assert_eq!(results.len(), 3);
    for (i, r) in results.iter().enumerate() {
        assert_eq!(r.source.as_str(), format!("cam-{i}"));
        assert_eq!(r.captured_at.timestamp_millis(), 1_736_500_000_123 + i as i64);
        assert_eq!(r.counts.get(VehicleClass::Car), 3);
        assert_eq!(r.counts.get(VehicleClass::Bus), i as u32);
        assert_eq!(r.model_id, "mock-v1");
    }
    // Consecutive batches reuse the same process.
    let again = detect_batch(&batch(64), &mut backend, 0.25).unwrap();
    assert_eq!(again[63].counts.get(VehicleClass::Bus), 63);
}

#[test]
fn crashed_worker_is_restarted_on_next_batch() {
    let dir = tempfile::tempdir().unwrap();
    let marker = dir.path().join("crashed");
    let mut backend = spawn("crash-once", &[marker.to_str().unwrap()], 8, 10_000).unwrap();
    let err = detect_batch(&batch(2), &mut backend, 0.25).unwrap_err();
    assert!(matches!(err, DetectError::Backend(BackendError::Crashed)), "{err:?}");
    assert!(err.is_retriable());
    let ok = detect_batch(&batch(2), &mut backend, 0.25).unwrap();
    assert_eq!(ok.len(), 2);
}

#[test]
fn hung_worker_times_out() {
    let mut backend = spawn("hang", &[], 8, 300).unwrap();
    let started = Instant::now();
    let err = backend.infer(&batch(1).frames).unwrap_err();
    assert!(matches!(err, BackendError::Timeout(300)), "{err:?}");
    assert!(started.elapsed() < Duration::from_secs(5));
}

#[test]
fn protocol_violations_are_reported() {
    for mode in ["garbage", "wrong-id", "short"] {
        let mut backend = spawn(mode, &[], 8, 10_000).unwrap();
        let err = backend.infer(&batch(2).frames).unwrap_err();
        assert!(matches!(err, BackendError::Protocol(_)), "{mode}: {err:?}");
    }
}

#[test]
fn worker_error_surfaces_message() {
    let mut backend = spawn("error", &[], 8, 10_000).unwrap();
    match backend.infer(&batch(1).frames) {
        Err(BackendError::Worker(message)) => assert_eq!(message, "model exploded"),
        other => panic!("unexpected {other:?}"),
    }
}

#[test]
fn handshake_failures() {
    assert!(matches!(spawn("small", &[], 64, 10_000), Err(BackendError::Handshake(_))));
    assert!(matches!(spawn("no-hello", &[], 8, 10_000), Err(BackendError::Handshake(_))));
    assert!(matches!(
        SubprocessBackend::spawn("/nonexistent/worker", &[], 8, Duration::from_secs(1)),
        Err(BackendError::Spawn(_))
    ));
}

#[test]
fn oversized_batch_is_rejected_before_sending() {
    let mut backend = spawn("ok", &[], 64, 10_000).unwrap();
    assert!(matches!(
        detect_batch(&batch(65), &mut backend, 0.25),
        Err(DetectError::BatchTooLarge { len: 65, max: 64 })
    ));
}
