use std::net::SocketAddr;
use std::sync::Arc;
use std::time::Duration;

use chrono::{DateTime, Utc};

use crate::camsim::{CamSim, SimConfig};
use crate::clock::{Clock, SystemClock, VirtualClock};
use crate::ingest::{write_camera_file, DEFAULT_POLL_INTERVAL_MS};

use super::{pick, runtime, usage, CamsimArgs, CliError, FileConfig};

const DEFAULT_BIND: &str = "127.0.0.1";
const DEFAULT_PORT: u16 = 8080;

pub(super) fn run(args: CamsimArgs, file: &FileConfig) -> Result<(), CliError> {
    let mut config = match pick(&args.scenario_file, &file.scenario_file) {
        Some(path) => SimConfig::load(&path).map_err(usage)?,
        None => SimConfig::default(),
    };
    if let Some(s) = pick(&args.scenario, &file.scenario) {
        config.scenario = Some(s);
        config.specs.clear();
    }
    if let Some(n) = pick(&args.num_cameras, &file.num_cameras) {
        config.cameras = n;
    }
    if let Some(d) = pick(&args.delta, &file.delta) {
        config.delta = d;
    }
    if let Some(s) = pick(&args.speedup, &file.speedup) {
        config.speedup = s;
    }
    if let Some(s) = pick(&args.seed, &file.seed) {
        config.seed = Some(s);
    }
    if let Some(origin) = pick(&args.virtual_origin, &file.virtual_origin) {
        let parsed = DateTime::parse_from_rfc3339(&origin).map_err(|e| usage(format!("--virtual-origin: {e}")))?;
        config.virtual_origin = Some(parsed.with_timezone(&Utc));
    }
    let specs = config.build_specs().map_err(usage)?;

    let bind = pick(&args.bind, &file.bind).unwrap_or_else(|| DEFAULT_BIND.to_string());
    let port = pick(&args.port, &file.port).unwrap_or(DEFAULT_PORT);
    let addr: SocketAddr = format!("{bind}:{port}").parse().map_err(|e| usage(format!("--bind/--port: {e}")))?;
    let poll = Duration::from_millis(pick(&args.poll_interval_ms, &file.poll_interval_ms).unwrap_or(DEFAULT_POLL_INTERVAL_MS));
    let clock_file = pick(&args.clock_file, &file.clock_file);
    let cameras_out = pick(&args.cameras_out, &file.cameras_out);
    let duration = pick(&args.duration_ms, &file.duration_ms).map(Duration::from_millis);

    let virtual_clock = match config.virtual_origin {
        Some(origin) => Some(VirtualClock::starting_now(origin, config.speedup)),
        None if config.speedup != 1.0 || clock_file.is_some() => Some(VirtualClock::starting_now(Utc::now(), config.speedup)),
        None => None,
    };
    let clock: Arc<dyn Clock> = match virtual_clock {
        Some(vc) => Arc::new(vc),
        None => Arc::new(SystemClock),
    };

    let rt = tokio::runtime::Builder::new_multi_thread().enable_all().build().map_err(runtime)?;
    rt.block_on(async {
        let sim = CamSim::start(specs, addr, clock, config.seed).await.map_err(runtime)?;
        if let (Some(path), Some(vc)) = (&clock_file, &virtual_clock) {
            vc.save(path).map_err(|e| runtime(format!("cannot write {}: {e}", path.display())))?;
        }
        if let Some(path) = &cameras_out {
            write_camera_file(path, &sim.endpoints(poll)).map_err(|e| runtime(format!("cannot write {}: {e}", path.display())))?;
        }
        println!("listening on http://{}", sim.addr());
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
        sim.shutdown().await;
        let log = sim.requests();
        let failed = log.iter().filter(|r| r.status != 200).count();
        println!("served {} requests ({failed} failed)", log.len());
        Ok(())
    })
}
