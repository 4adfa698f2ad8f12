use rayon::prelude::*;

use super::kernel::clamp;
use super::scratch;
use crate::chunk::{Chunk, LocalOperator, OpProfile};
use crate::error::Result;
use crate::ledger::Buffer;
use crate::volume::{DType, Volume, Voxel};
use crate::with_voxels;

/// Neighbour offsets (dy, dx) clockwise from the top-left; neighbour `i`
/// sets bit `i`.
pub const LBP_NEIGHBOURS: [(isize, isize); 8] = [
    (-1, -1),
    (-1, 0),
    (-1, 1),
    (0, 1),
    (1, 1),
    (1, 0),
    (1, -1),
    (0, -1),
];

/// Slicewise 8-neighbour local binary pattern; a bit is set when the
/// neighbour is `≥` the centre. Output `uint8`.
pub fn lbp2d(volume: &Volume) -> Volume {
    let s = volume.shape();
    let mut out = Buffer::<u8>::zeroed(s.len());
    with_voxels!(volume.data(), src => {
        out.par_chunks_mut(s.slice_len()).enumerate().for_each(|(z, plane)| {
            for y in 0..s.y {
                for x in 0..s.x {
                    let c = src[s.index(z, y, x)];
                    let mut code = 0u8;
                    for (i, (dy, dx)) in LBP_NEIGHBOURS.iter().enumerate() {
                        let n = src[s.index(z, clamp(y as isize + dy, s.y), clamp(x as isize + dx, s.x))];
                        if n.cmp_total(&c).is_ge() {
                            code |= 1 << i;
                        }
                    }
                    plane[y * s.x + x] = code;
                }
            }
        })
    });
    Volume::from_buffer(s, volume.spacing(), out).expect("shape preserved")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Lbp2d;

impl LocalOperator for Lbp2d {
    fn profile(&self, inputs: &[DType]) -> Result<OpProfile> {
        Ok(OpProfile::local(0, scratch(inputs, 1), DType::U8))
    }
    fn apply(&self, chunk: &Chunk<'_>) -> Result<Volume> {
        Ok(lbp2d(chunk.primary()))
    }
}
