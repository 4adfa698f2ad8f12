//! Exact Euclidean distance transform by separable lower envelopes of
//! parabolas, with voxel spacing folded into each axis pass.

use rayon::prelude::*;

use crate::chunk::{run_local, run_rows, Chunk, ExecOptions, ExecutionReport, LocalOperator, MemoryBudget, OpProfile, RowOperator};
use crate::error::{Error, Result};
use crate::source::{RowStore, SlabSource};
use crate::ledger::Buffer;
use crate::volume::{DType, Shape, Spacing, Volume, Voxel};
use crate::with_voxels;

/// Value of every voxel when the mask has no background at all.
pub const NO_BACKGROUND: f32 = f32::INFINITY;

/// `d[i] = min_q f[q] + w·(i − q)²` over finite `f[q]`.
fn envelope_1d(f: &[f64], w: f64, d: &mut [f64], v: &mut Vec<usize>, z: &mut Vec<f64>) {
    let n = f.len();
    v.clear();
    z.clear();
    for q in 0..n {
        if f[q].is_infinite() {
            continue;
        }
        loop {
            match v.last() {
                None => {
                    v.push(q);
                    z.push(f64::NEG_INFINITY);
                    break;
                }
                Some(&p) => {
                    let (qf, pf) = (q as f64, p as f64);
                    let s = ((f[q] + w * qf * qf) - (f[p] + w * pf * pf)) / (2.0 * w * (qf - pf));
                    if s <= *z.last().expect("paired with v") {
                        v.pop();
                        z.pop();
                    } else {
                        v.push(q);
                        z.push(s);
                        break;
                    }
                }
            }
        }
    }
    if v.is_empty() {
        d.iter_mut().for_each(|x| *x = f64::INFINITY);
        return;
    }
    let mut k = 0;
    for (i, out) in d.iter_mut().enumerate() {
        let x = i as f64;
        while k + 1 < v.len() && z[k + 1] < x {
            k += 1;
        }
        let q = v[k] as f64;
        *out = f[v[k]] + w * (x - q) * (x - q);
    }
}

fn pass_axis(s: Shape, data: &mut [f64], axis: usize, w: f64) {
    let dims = s.as_array();
    let n = dims[axis];
    let stride = [s.slice_len(), s.x, 1][axis];
    let starts: Vec<usize> = (0..s.len()).filter(|&i| (i / stride).is_multiple_of(n)).collect();
    let results: Vec<(usize, Vec<f64>)> = starts
        .par_iter()
        .map_init(
            || (Vec::new(), Vec::new()),
            |(v, z), &start| {
                let f: Vec<f64> = (0..n).map(|k| data[start + k * stride]).collect();
                let mut d = vec![0.0; n];
                envelope_1d(&f, w, &mut d, v, z);
                (start, d)
            },
        )
        .collect();
    for (start, d) in results {
        for (k, val) in d.into_iter().enumerate() {
            data[start + k * stride] = val;
        }
    }
}

/// Squared distance from each voxel to the nearest zero voxel, in physical
/// units. Zero on background, `+∞` everywhere if there is no background.
pub fn edt_squared(mask: &Volume, spacing: Spacing) -> Buffer<f64> {
    let s = mask.shape();
    let mut d: Buffer<f64> = with_voxels!(mask.data(), b => b
        .iter()
        .map(|v| if v.to_f64() == 0.0 { 0.0 } else { f64::INFINITY })
        .collect());
    let [sz, sy, sx] = spacing.0;
    pass_axis(s, &mut d, 2, sx * sx);
    pass_axis(s, &mut d, 1, sy * sy);
    pass_axis(s, &mut d, 0, sz * sz);
    d
}

/// Euclidean distance field as `float32`, using the volume's spacing.
pub fn edt(mask: &Volume) -> Volume {
    let sq = edt_squared(mask, mask.spacing());
    let out: Buffer<f32> = sq.iter().map(|&v| v.sqrt() as f32).collect();
    Volume::from_buffer(mask.shape(), mask.spacing(), out).expect("same shape")
}

/// In-memory whole-volume operator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Edt;

impl LocalOperator for Edt {
    fn profile(&self, inputs: &[DType]) -> Result<OpProfile> {
        Ok(OpProfile::whole(crate::filters::scratch(inputs, 8 + 4), DType::F32))
    }
    fn apply(&self, chunk: &Chunk<'_>) -> Result<Volume> {
        Ok(edt(chunk.primary()))
    }
}

/// First stage of [`edt_chunked`]: squared in-slice distances, stored as
/// `float32`. Needs no halo.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EdtPlanar;

impl LocalOperator for EdtPlanar {
    fn profile(&self, inputs: &[DType]) -> Result<OpProfile> {
        Ok(OpProfile::local(0, crate::filters::scratch(inputs, 8 + 4), DType::F32))
    }
    fn apply(&self, chunk: &Chunk<'_>) -> Result<Volume> {
        let v = chunk.primary();
        let s = v.shape();
        let [_, sy, sx] = v.spacing().0;
        let mut d: Buffer<f64> = with_voxels!(v.data(), b => b
            .iter()
            .map(|v| if v.to_f64() == 0.0 { 0.0 } else { f64::INFINITY })
            .collect());
        pass_axis(s, &mut d, 2, sx * sx);
        pass_axis(s, &mut d, 1, sy * sy);
        let out: Buffer<f32> = d.iter().map(|&x| x as f32).collect();
        Volume::from_buffer(s, v.spacing(), out)
    }
}

/// Second stage: the envelope along Z over whole columns, then the root.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EdtColumns {
    pub sz: f64,
}

impl RowOperator for EdtColumns {
    fn scratch_factor(&self, _dtype: DType) -> f64 {
        // f32 block in, f64 work copy, f32 block out
        4.0
    }
    fn apply(&self, block: &Volume) -> Result<Volume> {
        let s = block.shape();
        let mut d = block.to_f64_buffer();
        pass_axis(s, &mut d, 0, self.sz * self.sz);
        let out: Buffer<f32> = d.iter().map(|&x| x.sqrt() as f32).collect();
        Volume::from_buffer(s, block.spacing(), out)
    }
}

/// Out-of-core distance field: Z-chunks compute in-slice distances into
/// `store`, then row blocks finish each Z-column in place. `store` must be a
/// `float32` volume of the source's shape.
pub fn edt_chunked(source: &dyn SlabSource, store: &mut dyn RowStore, budget: &MemoryBudget, opts: &ExecOptions<'_>) -> Result<ExecutionReport> {
    if SlabSource::dtype(store) != DType::F32 {
        return Err(Error::param("distance output must be float32"));
    }
    let first = run_local(&[source], &EdtPlanar, store, budget, opts)?;
    let second = run_rows(store, &EdtColumns { sz: source.spacing().z() }, budget, opts)?;
    Ok(first.then(second))
}
