//! FIFO job board and the worker threads that drain it.

use std::collections::{BTreeMap, HashMap, VecDeque};
use std::path::PathBuf;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Condvar, Mutex, MutexGuard};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use super::datasets::{remove_volume, Dataset};
use crate::chunk::{ExecOptions, ExecutionReport, MemoryBudget};
use crate::error::{Error, Result};
use crate::io::{VolumeFile, VolumeMeta};
use crate::registry::{Operator, Role};
use crate::source::SlabSource;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum JobState {
    Queued,
    Running,
    Done,
    Failed,
    Cancelled,
}

impl JobState {
    pub fn is_final(self) -> bool {
        matches!(self, JobState::Done | JobState::Failed | JobState::Cancelled)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Target {
    Volume,
    Labels,
}

/// Trimmed execution report carried by finished jobs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JobReport {
    pub chunk_count: usize,
    pub passes: u8,
    pub total_seconds: f64,
    pub predicted_peak_bytes: u64,
    pub peak_bytes: u64,
    pub residual_bytes: i64,
}

impl From<&ExecutionReport> for JobReport {
    fn from(r: &ExecutionReport) -> Self {
        JobReport {
            chunk_count: r.chunk_count,
            passes: r.passes,
            total_seconds: r.total_seconds,
            predicted_peak_bytes: r.predicted_peak_bytes,
            peak_bytes: r.peak_bytes,
            residual_bytes: r.residual_bytes,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Job {
    pub id: u64,
    pub dataset: u64,
    pub op: String,
    pub params: BTreeMap<String, String>,
    pub target: Target,
    pub state: JobState,
    pub submitted: f64,
    pub started: Option<f64>,
    pub finished: Option<f64>,
    pub report: Option<JobReport>,
    pub error: Option<String>,
}

pub(crate) fn now() -> f64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs_f64())
        .unwrap_or(0.0)
}

struct Entry {
    job: Job,
    op: Option<Operator>,
    dataset: Arc<Dataset>,
    cancel: Arc<AtomicBool>,
}

#[derive(Default)]
struct Board {
    jobs: HashMap<u64, Entry>,
    queue: VecDeque<u64>,
    next_id: u64,
    shutdown: bool,
}

/// Rejections from [`JobBoard::submit`].
#[derive(Debug)]
pub enum SubmitError {
    QueueFull(usize),
    ShuttingDown,
}

pub struct JobBoard {
    board: Mutex<Board>,
    ready: Condvar,
    capacity: usize,
}

impl JobBoard {
    pub fn new(capacity: usize) -> Self {
        JobBoard {
            board: Mutex::new(Board { next_id: 1, ..Board::default() }),
            ready: Condvar::new(),
            capacity,
        }
    }

    fn lock(&self) -> MutexGuard<'_, Board> {
        self.board.lock().unwrap_or_else(|e| e.into_inner())
    }

    pub fn submit(&self, dataset: Arc<Dataset>, op: Operator, target: Target) -> Result<Job, SubmitError> {
        let mut b = self.lock();
        if b.shutdown {
            return Err(SubmitError::ShuttingDown);
        }
        if b.queue.len() >= self.capacity {
            return Err(SubmitError::QueueFull(self.capacity));
        }
        let id = b.next_id;
        b.next_id += 1;
        let job = Job {
            id,
            dataset: dataset.id,
            op: op.name().to_string(),
            params: op.params.0.clone(),
            target,
            state: JobState::Queued,
            submitted: now(),
            started: None,
            finished: None,
            report: None,
            error: None,
        };
        b.jobs.insert(id, Entry { job: job.clone(), op: Some(op), dataset, cancel: Arc::new(AtomicBool::new(false)) });
        b.queue.push_back(id);
        self.ready.notify_one();
        Ok(job)
    }

    pub fn get(&self, id: u64) -> Option<Job> {
        self.lock().jobs.get(&id).map(|e| e.job.clone())
    }

    /// All jobs in submission order.
    pub fn list(&self) -> Vec<Job> {
        let b = self.lock();
        let mut jobs: Vec<Job> = b.jobs.values().map(|e| e.job.clone()).collect();
        jobs.sort_by_key(|j| j.id);
        jobs
    }

    /// Cancels a queued job at once and flags a running one; finished jobs
    /// are left alone. Returns the state after the call.
    pub fn cancel(&self, id: u64) -> Option<JobState> {
        let mut b = self.lock();
        let state = b.jobs.get(&id)?.job.state;
        match state {
            JobState::Queued => {
                b.queue.retain(|&q| q != id);
                let e = b.jobs.get_mut(&id).expect("present");
                e.op = None;
                e.job.state = JobState::Cancelled;
                e.job.finished = Some(now());
                Some(JobState::Cancelled)
            }
            JobState::Running => {
                b.jobs[&id].cancel.store(true, Ordering::SeqCst);
                Some(JobState::Running)
            }
            done => Some(done),
        }
    }

    pub fn queued(&self) -> usize {
        self.lock().queue.len()
    }

    pub fn shutdown(&self) {
        let mut b = self.lock();
        b.shutdown = true;
        for id in std::mem::take(&mut b.queue) {
            if let Some(e) = b.jobs.get_mut(&id) {
                e.op = None;
                e.job.state = JobState::Cancelled;
                e.job.finished = Some(now());
            }
        }
        for e in b.jobs.values() {
            e.cancel.store(true, Ordering::SeqCst);
        }
        self.ready.notify_all();
    }

    /// Blocks until a job is available; None once shut down.
    fn next(&self) -> Option<(u64, Operator, Arc<Dataset>, Arc<AtomicBool>)> {
        let mut b = self.lock();
        loop {
            if b.shutdown {
                return None;
            }
            if let Some(id) = b.queue.pop_front() {
                let e = b.jobs.get_mut(&id).expect("queued job exists");
                e.job.state = JobState::Running;
                e.job.started = Some(now());
                let op = e.op.take().expect("queued job has an operator");
                return Some((id, op, e.dataset.clone(), e.cancel.clone()));
            }
            b = self.ready.wait(b).unwrap_or_else(|e| e.into_inner());
        }
    }

    fn finish(&self, id: u64, outcome: Result<ExecutionReport>) {
        let mut b = self.lock();
        let Some(e) = b.jobs.get_mut(&id) else { return };
        e.job.finished = Some(now());
        match outcome {
            Ok(report) => {
                e.job.state = JobState::Done;
                e.job.report = Some(JobReport::from(&report));
            }
            Err(Error::Cancelled) => e.job.state = JobState::Cancelled,
            Err(err) => {
                e.job.state = JobState::Failed;
                e.job.error = Some(err.to_string());
            }
        }
    }
}

/// Temporary volume file removed unless it was committed.
struct Scratch(Option<PathBuf>);

impl Scratch {
    fn take(&mut self) -> Option<PathBuf> {
        self.0.take()
    }
}

impl Drop for Scratch {
    fn drop(&mut self) {
        if let Some(p) = self.0.take() {
            remove_volume(&p);
        }
    }
}

fn execute(id: u64, op: &Operator, ds: &Dataset, target: Target, budget: &MemoryBudget, cancel: &AtomicBool) -> Result<ExecutionReport> {
    let dir = ds.dir();
    let (volume, labels) = {
        let files = ds.lock();
        let labels = if op.info.inputs.contains(&Role::Labels) {
            let path = dir.join(format!("job-{id}-labels.vol"));
            let copy = ds.copy_labels(&files, &path);
            Some((Scratch(Some(path)), copy?))
        } else {
            None
        };
        (files.volume.clone(), labels)
    };
    let inputs: Vec<&dyn SlabSource> = op
        .info
        .inputs
        .iter()
        .map(|role| match role {
            Role::Volume => &volume.file as &dyn SlabSource,
            Role::Labels => &labels.as_ref().expect("copied above").1 as &dyn SlabSource,
        })
        .collect();
    let dtypes: Vec<_> = inputs.iter().map(|s| s.dtype()).collect();
    let meta = volume.file.meta();
    let out_path = dir.join(format!("job-{id}-out.vol"));
    let mut scratch = Scratch(Some(out_path.clone()));
    let mut out = VolumeFile::create_default(&out_path, VolumeMeta::new(op.out_dtype(&dtypes)?, meta.shape, meta.spacing))?;
    let opts = ExecOptions { cancel: Some(cancel), plan: None };
    let report = op.run(&inputs, &mut out, budget, &opts)?;
    drop(inputs);
    drop(labels);

    let mut files = ds.lock();
    if cancel.load(Ordering::SeqCst) {
        return Err(Error::Cancelled);
    }
    match target {
        Target::Labels => ds.commit_labels(&mut files, out)?,
        Target::Volume => ds.commit_volume(&mut files, out)?,
    }
    scratch.take();
    Ok(report)
}

/// Worker loop: one job at a time until the board shuts down.
pub fn worker(board: Arc<JobBoard>, budget: MemoryBudget) {
    while let Some((id, op, ds, cancel)) = board.next() {
        let target = board.get(id).map(|j| j.target).unwrap_or(Target::Volume);
        let outcome = std::panic::catch_unwind(std::panic::AssertUnwindSafe(|| execute(id, &op, &ds, target, &budget, &cancel)))
            .unwrap_or_else(|_| Err(Error::Internal("worker panicked".into())));
        drop(op);
        drop(ds);
        board.finish(id, outcome);
    }
}
