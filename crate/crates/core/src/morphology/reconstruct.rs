use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ledger::Buffer;
use crate::volume::{Volume, Voxel};
use crate::with_voxels;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReconstructKind {
    /// Marker grows under the mask (`marker ≤ mask`).
    Dilation,
    /// Marker shrinks above the mask (`marker ≥ mask`).
    Erosion,
}

impl ReconstructKind {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "dilation" => Ok(ReconstructKind::Dilation),
            "erosion" => Ok(ReconstructKind::Erosion),
            other => Err(Error::param(format!("unknown reconstruction kind {other:?}"))),
        }
    }
}

/// Grayscale geodesic reconstruction with the 6-neighbour cross.
///
/// Propagates from every voxel through a FIFO queue until no value changes,
/// which reaches the same fixed point as iterating the geodesic step. Output
/// has the dtype of `mask`.
pub fn geodesic_reconstruct(marker: &Volume, mask: &Volume, kind: ReconstructKind) -> Result<Volume> {
    if marker.shape() != mask.shape() {
        return Err(Error::Shape(format!("marker {} vs mask {}", marker.shape(), mask.shape())));
    }
    let s = mask.shape();
    let m = mask.to_f64_buffer();
    let mut r = marker.to_f64_buffer();
    let grow = kind == ReconstructKind::Dilation;
    if r.iter().zip(m.iter()).any(|(&a, &b)| if grow { a > b } else { a < b }) {
        return Err(Error::param(match kind {
            ReconstructKind::Dilation => "dilation reconstruction needs marker ≤ mask",
            ReconstructKind::Erosion => "erosion reconstruction needs marker ≥ mask",
        }));
    }
    let mut queue: VecDeque<usize> = (0..s.len()).collect();
    let mut queued = vec![true; s.len()];
    while let Some(p) = queue.pop_front() {
        queued[p] = false;
        let (z, y, x) = s.coords(p);
        let mut visit = |q: usize| {
            let cand = if grow { r[p].min(m[q]) } else { r[p].max(m[q]) };
            let better = if grow { cand > r[q] } else { cand < r[q] };
            if better {
                r[q] = cand;
                if !queued[q] {
                    queued[q] = true;
                    queue.push_back(q);
                }
            }
        };
        if z > 0 {
            visit(p - s.slice_len());
        }
        if z + 1 < s.z {
            visit(p + s.slice_len());
        }
        if y > 0 {
            visit(p - s.x);
        }
        if y + 1 < s.y {
            visit(p + s.x);
        }
        if x > 0 {
            visit(p - 1);
        }
        if x + 1 < s.x {
            visit(p + 1);
        }
    }
    let data = with_voxels!(mask.data(), b => {
        let _ = b;
        typed_from(&r, b)
    });
    Volume::new(s, mask.spacing(), data)
}

fn typed_from<T: Voxel>(values: &[f64], _like: &Buffer<T>) -> crate::volume::VoxelData {
    T::wrap(values.iter().map(|&v| T::from_f64(v)).collect())
}
