//! HTTP job service: dataset registry, slice images, a FIFO job queue over
//! the operator catalog, and synchronous annotation tools.
//!
//! The route table is documented in `docs/api.md`.

mod datasets;
mod jobs;
mod routes;

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};
use std::thread::JoinHandle;

pub use datasets::{Dataset, DatasetInfo};
pub use jobs::{Job, JobReport, JobState, Target};

use crate::chunk::{profile_budget, HostBackend, MemoryBudget, DEFAULT_FRACTION};
use crate::error::{Error, Result};
use jobs::JobBoard;

#[derive(Debug, Clone)]
pub struct ServiceConfig {
    pub host: String,
    pub port: u16,
    /// Worker threads; each runs one job at a time.
    pub workers: usize,
    /// Queued (not yet running) jobs accepted before submissions get 429.
    pub queue_capacity: usize,
    /// Label states kept per dataset for undo.
    pub snapshots: usize,
    /// Shared by all workers: each gets `usable / workers`.
    pub budget: MemoryBudget,
    /// Scratch directory for label files and job outputs. A fresh
    /// directory under the system temp dir when unset.
    pub workdir: Option<PathBuf>,
}

impl ServiceConfig {
    pub fn new(budget: MemoryBudget) -> Self {
        ServiceConfig {
            host: "127.0.0.1".into(),
            port: 8080,
            workers: 1,
            queue_capacity: 16,
            snapshots: 5,
            budget,
            workdir: None,
        }
    }

    /// Defaults overridden by `HARPIA_PORT`, `HARPIA_WORKERS` and
    /// `HARPIA_BUDGET_FRACTION`; the budget is probed from host memory.
    pub fn from_env() -> Result<Self> {
        fn var<T: std::str::FromStr>(name: &str) -> Result<Option<T>> {
            match std::env::var(name) {
                Ok(v) => v
                    .trim()
                    .parse()
                    .map(Some)
                    .map_err(|_| Error::param(format!("{name}={v:?} is not valid"))),
                Err(_) => Ok(None),
            }
        }
        let fraction = var::<f64>("HARPIA_BUDGET_FRACTION")?.unwrap_or(DEFAULT_FRACTION);
        let mut cfg = ServiceConfig::new(profile_budget(&HostBackend::probed(), fraction)?);
        if let Some(port) = var("HARPIA_PORT")? {
            cfg.port = port;
        }
        if let Some(workers) = var("HARPIA_WORKERS")? {
            cfg.workers = workers;
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.workers == 0 {
            return Err(Error::param("at least one worker is required"));
        }
        if self.queue_capacity == 0 {
            return Err(Error::param("queue capacity must be at least 1"));
        }
        Ok(())
    }

    pub fn worker_budget(&self) -> MemoryBudget {
        MemoryBudget {
            usable_bytes: self.budget.usable_bytes / self.workers as u64,
            ..self.budget
        }
    }
}

pub(crate) struct AppState {
    pub config: ServiceConfig,
    pub workdir: PathBuf,
    pub datasets: Mutex<BTreeMap<u64, Arc<Dataset>>>,
    pub next_dataset: AtomicU64,
    pub board: Arc<JobBoard>,
}

impl AppState {
    pub fn dataset(&self, id: u64) -> Option<Arc<Dataset>> {
        self.datasets
            .lock()
            .unwrap_or_else(|e| e.into_inner())
            .get(&id)
            .cloned()
    }

    pub fn allocate_dataset_id(&self) -> u64 {
        self.next_dataset.fetch_add(1, Ordering::SeqCst)
    }
}

/// A running service: shared state plus its worker threads. Dropping it
/// stops the workers and removes the scratch directory it created.
pub struct Service {
    state: Arc<AppState>,
    workers: Vec<JoinHandle<()>>,
    owns_workdir: bool,
}

static INSTANCE: AtomicU64 = AtomicU64::new(0);

impl Service {
    pub fn start(config: ServiceConfig) -> Result<Self> {
        config.validate()?;
        let (workdir, owns_workdir) = match &config.workdir {
            Some(d) => (d.clone(), false),
            None => {
                let n = INSTANCE.fetch_add(1, Ordering::SeqCst);
                (std::env::temp_dir().join(format!("harpia-{}-{n}", std::process::id())), true)
            }
        };
        std::fs::create_dir_all(&workdir).map_err(|e| Error::io(&workdir, e))?;
        let board = Arc::new(JobBoard::new(config.queue_capacity));
        let budget = config.worker_budget();
        let workers = (0..config.workers)
            .map(|i| {
                let board = board.clone();
                std::thread::Builder::new()
                    .name(format!("harpia-worker-{i}"))
                    .spawn(move || jobs::worker(board, budget))
                    .map_err(|e| Error::io(&workdir, e))
            })
            .collect::<Result<Vec<_>>>()?;
        let state = Arc::new(AppState {
            config,
            workdir,
            datasets: Mutex::new(BTreeMap::new()),
            next_dataset: AtomicU64::new(1),
            board,
        });
        Ok(Service { state, workers, owns_workdir })
    }

    pub fn config(&self) -> &ServiceConfig {
        &self.state.config
    }

    pub fn router(&self) -> axum::Router {
        routes::router(self.state.clone())
    }

    /// Stops accepting jobs, cancels queued ones, flags running ones and
    /// waits for the workers.
    pub fn shutdown(&mut self) {
        self.state.board.shutdown();
        for w in self.workers.drain(..) {
            let _ = w.join();
        }
    }

    /// Serves HTTP until ctrl-c.
    pub async fn serve(mut self) -> Result<()> {
        let addr = format!("{}:{}", self.state.config.host, self.state.config.port);
        let listener = tokio::net::TcpListener::bind(&addr)
            .await
            .map_err(|e| Error::io(&addr, e))?;
        let app = self.router();
        axum::serve(listener, app)
            .with_graceful_shutdown(async {
                let _ = tokio::signal::ctrl_c().await;
            })
            .await
            .map_err(|e| Error::io(&addr, e))?;
        tokio::task::spawn_blocking(move || self.shutdown())
            .await
            .map_err(|e| Error::Internal(e.to_string()))
    }
}

impl Drop for Service {
    fn drop(&mut self) {
        self.shutdown();
        self.state.datasets.lock().unwrap_or_else(|e| e.into_inner()).clear();
        if self.owns_workdir {
            let _ = std::fs::remove_dir_all(&self.state.workdir);
        }
    }
}
