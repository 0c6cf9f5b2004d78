//! Asynchronous actor-critic training with auxiliary tasks: a global parameter store,
//! parallel workers with private environments and replay buffers, and shared RMSProp.

mod config;
mod log;
mod optim;
mod worker;

pub use config::{OptimizerConfig, ReplayConfig, Schedule, TrainConfig};
pub use log::{parse_log_line, LogRow, TrainLog, LOG_HEADER};
pub use optim::{clip_global_norm, rmsprop_apply, GlobalStore, SharedOptimizerState};
pub use worker::{auxiliary_gradients, episode_seed, view_dims, worker_loop, WorkerContext, WorkerReport};

pub(crate) use worker::sample_action;

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::AtomicBool;
use std::sync::Arc;

use crate::minidoom::{load_map, MapError, MapSpec};
use crate::netcore::{save_checkpoint, CheckpointError, Parameters};

pub const LOG_FILE: &str = "train_log.csv";
pub const FINAL_CHECKPOINT: &str = "final.ckpt";

#[derive(Debug, thiserror::Error)]
pub enum TrainError {
    #[error("invalid training config: {0}")]
    Config(String),
    #[error("cannot read map {path}: {message}")]
    MapFile { path: PathBuf, message: String },
    #[error("map {path}: {source}")]
    Map { path: PathBuf, source: MapError },
    #[error("I/O: {0}")]
    Io(#[from] std::io::Error),
    #[error("checkpoint: {0}")]
    Checkpoint(#[from] CheckpointError),
    #[error("training aborted: {0}")]
    Aborted(String),
}

/// Final parameters, log rows and counters of a run.
#[derive(Debug)]
pub struct TrainOutcome {
    pub params: Parameters,
    pub optimizer: SharedOptimizerState,
    pub log: Vec<LogRow>,
    pub global_steps: u64,
    pub workers: Vec<WorkerReport>,
}

impl TrainOutcome {
    pub fn applied_updates(&self) -> u64 {
        self.optimizer.steps
    }
}

pub fn read_maps(paths: &[PathBuf], step_limit: Option<u32>) -> Result<Vec<Arc<MapSpec>>, TrainError> {
    paths
        .iter()
        .map(|p| {
            let text = fs::read_to_string(p).map_err(|e| TrainError::MapFile { path: p.clone(), message: e.to_string() })?;
            let mut map = load_map(&text).map_err(|source| TrainError::Map { path: p.clone(), source })?;
            if let Some(limit) = step_limit {
                map = map.with_step_limit(limit).map_err(|source| TrainError::Map { path: p.clone(), source })?;
            }
            Ok(Arc::new(map))
        })
        .collect()
}

/// Loads the configured map files and trains on them.
pub fn train(config: &TrainConfig, out_dir: Option<&Path>) -> Result<TrainOutcome, TrainError> {
    config.validate()?;
    let maps = read_maps(&config.maps, config.step_limit)?;
    train_with_maps(config, maps, out_dir)
}

/// Trains on already-parsed maps (`config.maps` is ignored). With `out_dir`, writes the CSV
/// log, periodic checkpoints and `final.ckpt` there.
pub fn train_with_maps(
    config: &TrainConfig,
    maps: Vec<Arc<MapSpec>>,
    out_dir: Option<&Path>,
) -> Result<TrainOutcome, TrainError> {
    config.validate()?;
    if maps.is_empty() {
        return Err(TrainError::Config("no maps".into()));
    }
    let maps: Vec<Arc<MapSpec>> = match config.step_limit {
        Some(limit) => maps
            .into_iter()
            .map(|m| {
                (*m).clone()
                    .with_step_limit(limit)
                    .map(Arc::new)
                    .map_err(|e| TrainError::Config(e.to_string()))
            })
            .collect::<Result<_, _>>()?,
        None => maps,
    };
    let net = config.network_config()?;
    let init = Parameters::init(&net, config.seed).map_err(|e| TrainError::Config(e.to_string()))?;
    let log = match out_dir {
        Some(dir) => {
            fs::create_dir_all(dir)?;
            TrainLog::to_file(&dir.join(LOG_FILE))?
        }
        None => TrainLog::in_memory(),
    };
    let store = GlobalStore::new(init);
    let abort = AtomicBool::new(false);
    let reports: Vec<WorkerReport> = std::thread::scope(|s| {
        let handles: Vec<_> = (0..config.schedule.workers)
            .map(|id| {
                let ctx = WorkerContext {
                    id,
                    store: &store,
                    config,
                    map: maps[id % maps.len()].clone(),
                    log: &log,
                    abort: &abort,
                    checkpoint_dir: out_dir,
                };
                s.spawn(move || worker_loop(ctx))
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("worker thread panicked")).collect()
    });
    for r in &reports {
        if let Some(e) = &r.error {
            eprintln!("worker {} stopped: {e}", r.worker);
        }
    }
    if let Some(r) = reports.iter().find(|r| r.error.as_deref().is_some_and(|e| e.starts_with("checkpoint") || e.starts_with("training log"))) {
        return Err(TrainError::Aborted(r.error.clone().unwrap()));
    }
    let params = store.snapshot();
    if let Some(dir) = out_dir {
        save_checkpoint(&dir.join(FINAL_CHECKPOINT), &params)?;
    }
    Ok(TrainOutcome {
        params,
        optimizer: store.optimizer_state(),
        log: log.into_rows(),
        global_steps: store.steps(),
        workers: reports,
    })
}
