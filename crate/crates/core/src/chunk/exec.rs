use std::sync::atomic::{AtomicBool, Ordering};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::budget::MemoryBudget;
use super::plan::{plan_for_slices, ChunkPlan, ChunkSpec, OpProfile};
use crate::error::{Error, Result};
use crate::ledger::Ledger;
use crate::source::{NullSink, RowStore, SlabSink, SlabSource};
use crate::volume::{DType, Shape, Volume};

/// The padded inputs of one chunk as handed to an operator.
pub struct Chunk<'a> {
    pub index: usize,
    pub slab: ChunkSpec,
    /// Shape of the whole volume being processed.
    pub volume_shape: Shape,
    /// One padded slab per input, all of the same shape.
    pub inputs: &'a [Volume],
}

impl Chunk<'_> {
    pub fn primary(&self) -> &Volume {
        &self.inputs[0]
    }

    pub fn input(&self, i: usize) -> Option<&Volume> {
        self.inputs.get(i)
    }

    /// Interior slices in slab-local coordinates.
    pub fn local_interior(&self) -> std::ops::Range<usize> {
        self.slab.local_interior()
    }

    /// Global Z of the first slab slice.
    pub fn z_offset(&self) -> usize {
        self.slab.start - self.slab.halo_lo
    }

    pub fn is_first(&self) -> bool {
        self.slab.start == 0
    }

    pub fn is_last(&self) -> bool {
        self.slab.end == self.volume_shape.z
    }
}

/// An operator whose output at a voxel depends only on inputs within
/// `halo_z` slices.
pub trait LocalOperator: Send + Sync {
    fn profile(&self, inputs: &[DType]) -> Result<OpProfile>;
    /// Output over the padded slab, or over its interior only.
    fn apply(&self, chunk: &Chunk<'_>) -> Result<Volume>;
}

/// Per-chunk summaries folded into one global result.
pub trait ChunkReduce: Send + Sync {
    type Summary: Send;
    type Output: Send + Sync;
    fn profile(&self, inputs: &[DType]) -> Result<OpProfile>;
    fn reduce(&self, chunk: &Chunk<'_>) -> Result<Self::Summary>;
    /// Folds the summaries, given in chunk order.
    fn finish(&self, summaries: Vec<Self::Summary>, plan: &ChunkPlan) -> Result<Self::Output>;
}

/// A global operator: a reduction pass, then a chunk-by-chunk apply pass over
/// the same plan.
pub trait TwoPassOperator: ChunkReduce {
    fn apply(&self, chunk: &Chunk<'_>, global: &Self::Output) -> Result<Volume>;
}

#[derive(Default)]
pub struct ExecOptions<'a> {
    /// Checked before every chunk.
    pub cancel: Option<&'a AtomicBool>,
    /// Use this plan instead of deriving one from the budget.
    pub plan: Option<ChunkPlan>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExecutionReport {
    pub chunk_count: usize,
    pub passes: u8,
    pub chunk_seconds: Vec<f64>,
    pub total_seconds: f64,
    pub predicted_peak_bytes: u64,
    /// Ledger high-water mark above the job baseline.
    pub peak_bytes: u64,
    /// Most bytes drawn from the job reservation at once.
    pub working_peak_bytes: u64,
    /// Ledger total after the job minus the baseline.
    pub residual_bytes: i64,
    pub plan: ChunkPlan,
}

thread_local! {
    // nested engine calls (an operator running another operator) stay inside
    // the outer job's accounting
    static JOB_DEPTH: std::cell::Cell<usize> = const { std::cell::Cell::new(0) };
}

struct JobScope {
    started: Instant,
    guard: Option<crate::ledger::ReservationGuard<'static>>,
    chunk_seconds: Vec<f64>,
}

impl JobScope {
    fn begin(plan: &ChunkPlan) -> Self {
        let ledger = Ledger::global();
        let outer = JOB_DEPTH.with(|d| {
            let depth = d.get();
            d.set(depth + 1);
            depth == 0
        });
        let guard = if outer {
            ledger.begin_job();
            Some(ledger.reserve(plan.predicted_peak_bytes))
        } else {
            None
        };
        JobScope {
            started: Instant::now(),
            guard,
            chunk_seconds: Vec::with_capacity(plan.len()),
        }
    }

    fn finish(mut self, plan: ChunkPlan, passes: u8) -> ExecutionReport {
        let working = self.guard.take().map_or(0, |g| g.close());
        let snap = Ledger::global().snapshot();
        ExecutionReport {
            chunk_count: plan.len(),
            passes,
            chunk_seconds: std::mem::take(&mut self.chunk_seconds),
            total_seconds: self.started.elapsed().as_secs_f64(),
            predicted_peak_bytes: plan.predicted_peak_bytes,
            peak_bytes: snap.peak_above_baseline(),
            working_peak_bytes: working,
            residual_bytes: snap.residual_bytes(),
            plan,
        }
    }
}

impl Drop for JobScope {
    fn drop(&mut self) {
        JOB_DEPTH.with(|d| d.set(d.get() - 1));
    }
}

fn check_inputs(inputs: &[&dyn SlabSource]) -> Result<(Shape, Vec<DType>)> {
    let first = inputs
        .first()
        .ok_or_else(|| Error::param("operator needs at least one input"))?;
    let shape = first.shape();
    for (i, s) in inputs.iter().enumerate().skip(1) {
        if s.shape() != shape {
            return Err(Error::Shape(format!(
                "input {i} has shape {} but input 0 has {shape}",
                s.shape()
            )));
        }
    }
    Ok((shape, inputs.iter().map(|s| s.dtype()).collect()))
}

fn make_plan(shape: Shape, dtypes: &[DType], profile: &OpProfile, budget: &MemoryBudget, opts: &ExecOptions<'_>) -> Result<ChunkPlan> {
    match &opts.plan {
        Some(p) => {
            if p.depth != shape.z {
                return Err(Error::param(format!(
                    "plan covers {} slices, volume has {}",
                    p.depth, shape.z
                )));
            }
            p.validate()?;
            Ok(p.clone())
        }
        None => {
            let slice_bytes = dtypes
                .iter()
                .map(|d| (d.size() * shape.slice_len()) as u64)
                .sum();
            plan_for_slices(shape.z, slice_bytes, profile, budget)
        }
    }
}

fn wrap_chunk_error(index: usize, e: Error) -> Error {
    match e {
        Error::Cancelled | Error::ChunkFailed { .. } => e,
        other => Error::ChunkFailed {
            index,
            source: Box::new(other),
        },
    }
}

fn for_each_chunk(
    inputs: &[&dyn SlabSource],
    plan: &ChunkPlan,
    opts: &ExecOptions<'_>,
    times: &mut Vec<f64>,
    mut body: impl FnMut(&Chunk<'_>) -> Result<()>,
) -> Result<()> {
    let shape = inputs[0].shape();
    for (index, slab) in plan.chunks.iter().enumerate() {
        if opts.cancel.is_some_and(|c| c.load(Ordering::Relaxed)) {
            return Err(Error::Cancelled);
        }
        let t0 = Instant::now();
        let slabs = inputs
            .iter()
            .map(|s| s.read_slab(slab.padded()))
            .collect::<Result<Vec<_>>>()
            .map_err(|e| wrap_chunk_error(index, e))?;
        let chunk = Chunk {
            index,
            slab: *slab,
            volume_shape: shape,
            inputs: &slabs,
        };
        body(&chunk).map_err(|e| wrap_chunk_error(index, e))?;
        drop(slabs);
        times.push(t0.elapsed().as_secs_f64());
    }
    Ok(())
}

fn write_interior(sink: &mut dyn SlabSink, chunk: &Chunk<'_>, out: &Volume, out_dtype: DType) -> Result<()> {
    let slab = chunk.slab;
    let sh = out.shape();
    let vs = chunk.volume_shape;
    if sh.y != vs.y || sh.x != vs.x || out.dtype() != out_dtype {
        return Err(Error::Shape(format!(
            "operator produced {sh} {} for a {vs} {out_dtype} volume",
            out.dtype()
        )));
    }
    let local = if sh.z == slab.padded_len() {
        slab.local_interior()
    } else if sh.z == slab.end - slab.start {
        0..sh.z
    } else {
        return Err(Error::Shape(format!(
            "operator produced {} slices for a chunk of {} padded / {} interior",
            sh.z,
            slab.padded_len(),
            slab.end - slab.start
        )));
    };
    sink.write_slab(slab.start, out, local)
}

fn check_sink(sink: &dyn SlabSink, shape: Shape, profile: &OpProfile) -> Result<()> {
    if sink.shape() != shape {
        return Err(Error::Shape(format!(
            "sink shape {} differs from input {shape}",
            sink.shape()
        )));
    }
    if sink.dtype() != profile.out_dtype {
        return Err(Error::param(format!(
            "sink holds {} but the operator produces {}",
            sink.dtype(),
            profile.out_dtype
        )));
    }
    Ok(())
}

/// Runs a local operator chunk by chunk, writing only chunk interiors to
/// `sink`. Each chunk's buffers are released before the next is read.
pub fn run_local(
    inputs: &[&dyn SlabSource],
    op: &dyn LocalOperator,
    sink: &mut dyn SlabSink,
    budget: &MemoryBudget,
    opts: &ExecOptions<'_>,
) -> Result<ExecutionReport> {
    let (shape, dtypes) = check_inputs(inputs)?;
    let profile = op.profile(&dtypes)?;
    check_sink(sink, shape, &profile)?;
    let plan = make_plan(shape, &dtypes, &profile, budget, opts)?;

    let mut job = JobScope::begin(&plan);
    let mut times = Vec::new();
    let result = for_each_chunk(inputs, &plan, opts, &mut times, |chunk| {
        let out = op.apply(chunk)?;
        write_interior(sink, chunk, &out, profile.out_dtype)
    });
    job.chunk_seconds = times;
    let report = job.finish(plan, 1);
    result.map(|_| report)
}

/// Runs a reduction over all chunks and returns the folded result.
pub fn run_reduce<R: ChunkReduce + ?Sized>(
    inputs: &[&dyn SlabSource],
    op: &R,
    budget: &MemoryBudget,
    opts: &ExecOptions<'_>,
) -> Result<(R::Output, ExecutionReport)> {
    let (shape, dtypes) = check_inputs(inputs)?;
    let profile = op.profile(&dtypes)?;
    let plan = make_plan(shape, &dtypes, &profile, budget, opts)?;

    let mut job = JobScope::begin(&plan);
    let mut times = Vec::new();
    let mut summaries = Vec::with_capacity(plan.len());
    let result = for_each_chunk(inputs, &plan, opts, &mut times, |chunk| {
        summaries.push(op.reduce(chunk)?);
        Ok(())
    })
    .and_then(|_| op.finish(summaries, &plan));
    job.chunk_seconds = times;
    let report = job.finish(plan, 1);
    result.map(|out| (out, report))
}

/// Reduce pass over every chunk, then an apply pass over the same chunks.
pub fn run_two_pass<Op: TwoPassOperator + ?Sized>(
    inputs: &[&dyn SlabSource],
    op: &Op,
    sink: &mut dyn SlabSink,
    budget: &MemoryBudget,
    opts: &ExecOptions<'_>,
) -> Result<(Op::Output, ExecutionReport)> {
    let (shape, dtypes) = check_inputs(inputs)?;
    let profile = op.profile(&dtypes)?;
    check_sink(sink, shape, &profile)?;
    let plan = make_plan(shape, &dtypes, &profile, budget, opts)?;

    let mut job = JobScope::begin(&plan);
    let mut times = Vec::new();
    let mut summaries = Vec::with_capacity(plan.len());
    let result = for_each_chunk(inputs, &plan, opts, &mut times, |chunk| {
        summaries.push(op.reduce(chunk)?);
        Ok(())
    })
    .and_then(|_| op.finish(summaries, &plan))
    .and_then(|global| {
        for_each_chunk(inputs, &plan, opts, &mut times, |chunk| {
            let out = op.apply(chunk, &global)?;
            write_interior(sink, chunk, &out, profile.out_dtype)
        })?;
        Ok(global)
    });
    job.chunk_seconds = times;
    let report = job.finish(plan, 2);
    result.map(|g| (g, report))
}

/// Operator over blocks of whole Z-columns: every slice, a range of rows.
/// The output block has the input's shape and dtype.
pub trait RowOperator: Send + Sync {
    fn scratch_factor(&self, dtype: DType) -> f64;
    fn apply(&self, block: &Volume) -> Result<Volume>;
}

/// Rewrites `store` in place, one row block at a time. Blocks are planned
/// like Z-chunks with the roles of Z and Y swapped.
pub fn run_rows(store: &mut dyn RowStore, op: &dyn RowOperator, budget: &MemoryBudget, opts: &ExecOptions<'_>) -> Result<ExecutionReport> {
    let (shape, dtype) = (SlabSource::shape(store), SlabSource::dtype(store));
    let profile = OpProfile::local(0, op.scratch_factor(dtype), dtype);
    let row_bytes = (shape.z * shape.x * dtype.size()) as u64;
    let plan = plan_for_slices(shape.y, row_bytes, &profile, budget)?;
    let mut job = JobScope::begin(&plan);
    let mut times = Vec::with_capacity(plan.len());
    let mut run = || -> Result<()> {
        for (index, slab) in plan.chunks.iter().enumerate() {
            if opts.cancel.is_some_and(|c| c.load(Ordering::Relaxed)) {
                return Err(Error::Cancelled);
            }
            let t0 = Instant::now();
            let mut step = || -> Result<()> {
                let block = store.read_rows(slab.interior())?;
                let out = op.apply(&block)?;
                if out.shape() != block.shape() || out.dtype() != dtype {
                    return Err(Error::Shape(format!(
                        "row operator turned {} {dtype} into {} {}",
                        block.shape(),
                        out.shape(),
                        out.dtype()
                    )));
                }
                drop(block);
                store.write_rows(slab.start, &out)
            };
            step().map_err(|e| wrap_chunk_error(index, e))?;
            times.push(t0.elapsed().as_secs_f64());
        }
        Ok(())
    };
    let result = run();
    job.chunk_seconds = times;
    let report = job.finish(plan, 1);
    result.map(|_| report)
}

impl ExecutionReport {
    /// Folds a later stage of the same job into this report. The plan stays
    /// the first stage's.
    pub fn then(mut self, next: ExecutionReport) -> ExecutionReport {
        self.chunk_count += next.chunk_count;
        self.passes = self.passes.saturating_add(next.passes);
        self.chunk_seconds.extend(next.chunk_seconds);
        self.total_seconds += next.total_seconds;
        self.predicted_peak_bytes = self.predicted_peak_bytes.max(next.predicted_peak_bytes);
        self.peak_bytes = self.peak_bytes.max(next.peak_bytes);
        self.working_peak_bytes = self.working_peak_bytes.max(next.working_peak_bytes);
        self.residual_bytes += next.residual_bytes;
        self
    }
}

fn output_for(inputs: &[&Volume], profile_of: impl FnOnce(&[DType]) -> Result<OpProfile>) -> Result<Volume> {
    let first = inputs
        .first()
        .ok_or_else(|| Error::param("operator needs at least one input"))?;
    let dtypes: Vec<DType> = inputs.iter().map(|v| v.dtype()).collect();
    let profile = profile_of(&dtypes)?;
    Volume::zeros(first.shape(), profile.out_dtype).with_spacing(first.spacing())
}

fn as_sources<'a>(inputs: &'a [&'a Volume]) -> Vec<&'a dyn SlabSource> {
    inputs.iter().map(|v| *v as &dyn SlabSource).collect()
}

/// In-memory convenience over [`run_local`].
pub fn execute_chunked(volume: &Volume, op: &dyn LocalOperator, budget: &MemoryBudget) -> Result<Volume> {
    execute_chunked_with(&[volume], op, budget, &ExecOptions::default()).map(|(v, _)| v)
}

/// Multi-input in-memory execution returning the report as well.
pub fn execute_chunked_with(
    inputs: &[&Volume],
    op: &dyn LocalOperator,
    budget: &MemoryBudget,
    opts: &ExecOptions<'_>,
) -> Result<(Volume, ExecutionReport)> {
    let mut out = output_for(inputs, |d| op.profile(d))?;
    let report = run_local(&as_sources(inputs), op, &mut out, budget, opts)?;
    Ok((out, report))
}

/// In-memory convenience over [`run_two_pass`].
pub fn execute_two_pass<Op: TwoPassOperator>(
    inputs: &[&Volume],
    op: &Op,
    budget: &MemoryBudget,
    opts: &ExecOptions<'_>,
) -> Result<(Volume, Op::Output, ExecutionReport)> {
    let mut out = output_for(inputs, |d| op.profile(d))?;
    let (g, report) = run_two_pass(&as_sources(inputs), op, &mut out, budget, opts)?;
    Ok((out, g, report))
}

/// In-memory convenience over [`run_reduce`].
pub fn execute_reduce<R: ChunkReduce>(
    inputs: &[&Volume],
    op: &R,
    budget: &MemoryBudget,
    opts: &ExecOptions<'_>,
) -> Result<(R::Output, ExecutionReport)> {
    run_reduce(&as_sources(inputs), op, budget, opts)
}

/// Runs a two-pass operator over `inputs` as one chunk.
pub fn execute_whole<Op: TwoPassOperator>(inputs: &[&Volume], op: &Op) -> Result<(Volume, Op::Output)> {
    let depth = inputs
        .first()
        .ok_or_else(|| Error::param("operator needs at least one input"))?
        .shape()
        .z;
    let opts = ExecOptions {
        plan: Some(ChunkPlan::uniform(depth, depth, 0)?),
        ..Default::default()
    };
    let (v, g, _) = execute_two_pass(inputs, op, &MemoryBudget::fixed(u64::MAX), &opts)?;
    Ok((v, g))
}

/// A budget large enough to process `inputs` in a single chunk.
pub fn single_chunk_budget(shape: Shape, dtypes: &[DType], profile: &OpProfile) -> MemoryBudget {
    let bytes: u64 = dtypes.iter().map(|d| (d.size() * shape.len()) as u64).sum();
    MemoryBudget::fixed(((bytes.max(1) as f64) * profile.scratch_factor).ceil() as u64 + 1)
}

/// Budget yielding chunks with `interior` slices for a profile.
pub fn budget_for_interior(shape: Shape, dtypes: &[DType], profile: &OpProfile, interior: usize) -> MemoryBudget {
    let slice: u64 = dtypes.iter().map(|d| (d.size() * shape.slice_len()) as u64).sum();
    let slices = interior + 2 * profile.halo_z;
    MemoryBudget::fixed(((slices as f64) * profile.scratch_factor * slice as f64).ceil() as u64)
}

/// Sink placeholder for reductions run through [`run_local`]-style paths.
pub fn null_sink(shape: Shape, dtype: DType) -> NullSink {
    NullSink { shape, dtype }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// out[z] = in[z-1] + in[z] + in[z+1] with clamped borders.
    struct ZSum;

    impl LocalOperator for ZSum {
        fn profile(&self, _inputs: &[DType]) -> Result<OpProfile> {
            Ok(OpProfile::local(1, 2.0, DType::U32))
        }
        fn apply(&self, chunk: &Chunk<'_>) -> Result<Volume> {
            let v = chunk.primary();
            let s = v.shape();
            let src = v.typed::<u32>()?;
            // halos are only truncated at volume faces, so clamping inside the
            // slab matches clamping in the volume for interior slices
            let at = |z: usize, y: usize, x: usize| src[s.index(z, y, x)];
            Ok(Volume::from_fn(s, |z, y, x| {
                at(z.saturating_sub(1), y, x) + at(z, y, x) + at((z + 1).min(s.z - 1), y, x)
            }))
        }
    }

    struct Fails;

    impl LocalOperator for Fails {
        fn profile(&self, _inputs: &[DType]) -> Result<OpProfile> {
            Ok(OpProfile::local(0, 2.0, DType::U8))
        }
        fn apply(&self, chunk: &Chunk<'_>) -> Result<Volume> {
            if chunk.index == 2 {
                Err(Error::param("boom"))
            } else {
                Ok(chunk.primary().clone())
            }
        }
    }

    fn ramp(shape: Shape) -> Volume {
        Volume::from_fn(shape, |z, y, x| (z * 100 + y * 10 + x) as u32)
    }

    #[test]
    fn chunked_equals_single_chunk() {
        let v = ramp(Shape::new(11, 3, 4));
        let whole = execute_chunked(&v, &ZSum, &MemoryBudget::fixed(1 << 30)).unwrap();
        for interior in 1..6 {
            let opts = ExecOptions {
                plan: Some(ChunkPlan::uniform(11, interior, 1).unwrap()),
                ..Default::default()
            };
            let (out, report) = execute_chunked_with(&[&v], &ZSum, &MemoryBudget::fixed(1 << 30), &opts).unwrap();
            assert_eq!(out, whole, "interior {interior}");
            assert_eq!(report.chunk_count, 11usize.div_ceil(interior));
        }
        assert_eq!(whole.typed::<u32>().unwrap()[0], 100);
    }

    #[test]
    fn failure_names_the_chunk() {
        let v = Volume::filled(Shape::new(8, 2, 2), 1u8);
        let opts = ExecOptions {
            plan: Some(ChunkPlan::uniform(8, 2, 0).unwrap()),
            ..Default::default()
        };
        match execute_chunked_with(&[&v], &Fails, &MemoryBudget::fixed(1 << 30), &opts) {
            Err(Error::ChunkFailed { index, .. }) => assert_eq!(index, 2),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn cancel_stops_before_first_chunk() {
        let v = Volume::filled(Shape::new(8, 2, 2), 1u8);
        let flag = AtomicBool::new(true);
        let opts = ExecOptions {
            cancel: Some(&flag),
            ..Default::default()
        };
        assert!(matches!(
            execute_chunked_with(&[&v], &Fails, &MemoryBudget::fixed(1 << 30), &opts),
            Err(Error::Cancelled)
        ));
    }

    #[test]
    fn mismatched_inputs_rejected() {
        let a = Volume::filled(Shape::new(4, 2, 2), 1u8);
        let b = Volume::filled(Shape::new(4, 2, 3), 1u8);
        assert!(matches!(
            execute_chunked_with(&[&a, &b], &Fails, &MemoryBudget::fixed(1 << 30), &ExecOptions::default()),
            Err(Error::Shape(_))
        ));
    }
}
