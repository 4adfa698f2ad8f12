//! Marker-based watershed, flooded independently in every Z-slice.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::chunk::{Chunk, LocalOperator, OpProfile};
use crate::error::{Error, Result};
use crate::ledger::Buffer;
use crate::volume::{DType, LabelVolume, Shape, Volume};

#[derive(Debug, Clone, Copy, PartialEq)]
struct Entry {
    value: f64,
    seq: u64,
    index: usize,
}

impl Eq for Entry {}

impl Ord for Entry {
    // reversed: BinaryHeap pops the lowest (value, seq) first
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .value
            .total_cmp(&self.value)
            .then_with(|| other.seq.cmp(&self.seq))
    }
}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Priority flood of one slice. `labels` holds the seeds on entry and the
/// basins on return.
pub fn flood_slice(height: usize, width: usize, landscape: &[f64], labels: &mut [u32], mask: Option<&[bool]>) {
    let inside = |i: usize| mask.is_none_or(|m| m[i]);
    let mut seeds: Vec<(u32, usize)> = labels
        .iter()
        .enumerate()
        .filter(|&(i, &l)| l != 0 && inside(i))
        .map(|(i, &l)| (l, i))
        .collect();
    // seeds outside the mask are dropped
    for (i, l) in labels.iter_mut().enumerate() {
        if *l != 0 && !inside(i) {
            *l = 0;
        }
    }
    seeds.sort_unstable();
    let mut heap = BinaryHeap::with_capacity(seeds.len());
    let mut seq = 0u64;
    for (_, i) in seeds {
        heap.push(Entry {
            value: landscape[i],
            seq,
            index: i,
        });
        seq += 1;
    }
    while let Some(Entry { index, .. }) = heap.pop() {
        let (y, x) = (index / width, index % width);
        let l = labels[index];
        let mut push = |j: usize| {
            if labels[j] == 0 && inside(j) {
                labels[j] = l;
                heap.push(Entry {
                    value: landscape[j],
                    seq,
                    index: j,
                });
                seq += 1;
            }
        };
        if y > 0 {
            push(index - width);
        }
        if x > 0 {
            push(index - 1);
        }
        if x + 1 < width {
            push(index + 1);
        }
        if y + 1 < height {
            push(index + width);
        }
    }
}

fn check_shapes(landscape: &Volume, markers: &Volume, mask: Option<&Volume>) -> Result<()> {
    if markers.shape() != landscape.shape() || mask.is_some_and(|m| m.shape() != landscape.shape()) {
        return Err(Error::param(format!(
            "watershed inputs disagree: landscape {}, markers {}{}",
            landscape.shape(),
            markers.shape(),
            mask.map(|m| format!(", mask {}", m.shape())).unwrap_or_default()
        )));
    }
    Ok(())
}

/// Floods every Z-slice from the markers over the landscape; out-of-mask and
/// unreachable voxels stay 0.
pub fn watershed_2_5d(landscape: &Volume, markers: &Volume, mask: Option<&Volume>) -> Result<LabelVolume> {
    check_shapes(landscape, markers, mask)?;
    let s: Shape = landscape.shape();
    let values = landscape.to_f64_buffer();
    let mut labels: Buffer<u32> = markers.typed::<u32>()?.iter().copied().collect();
    let inside: Option<Vec<bool>> = mask.map(|m| m.to_f64_buffer().iter().map(|&v| v != 0.0).collect());
    let n = s.slice_len();
    use rayon::prelude::*;
    labels.par_chunks_mut(n).enumerate().for_each(|(z, plane)| {
        let range = z * n..(z + 1) * n;
        flood_slice(s.y, s.x, &values[range.clone()], plane, inside.as_ref().map(|m| &m[range]));
    });
    LabelVolume::from_volume(Volume::from_buffer(s, landscape.spacing(), labels)?)
}

/// Inputs: landscape, markers (`uint32`), and optionally a mask.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Watershed;

impl LocalOperator for Watershed {
    fn profile(&self, inputs: &[DType]) -> Result<OpProfile> {
        if inputs.len() < 2 || inputs[1] != DType::U32 {
            return Err(Error::param("watershed needs a landscape and uint32 markers"));
        }
        Ok(OpProfile::local(0, crate::filters::scratch(inputs, 8 + 4 + 1), DType::U32))
    }
    fn apply(&self, chunk: &Chunk<'_>) -> Result<Volume> {
        let markers = chunk.input(1).ok_or_else(|| Error::param("missing markers"))?;
        Ok(watershed_2_5d(chunk.primary(), markers, chunk.input(2))?.into_volume())
    }
}
