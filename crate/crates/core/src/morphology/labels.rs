use std::collections::BTreeMap;

use super::ops::{morph, MorphOp};
use super::se::StructuringElement;
use crate::chunk::{Chunk, LocalOperator, OpProfile};
use crate::error::{Error, Result};
use crate::volume::{DType, LabelVolume, Shape, Volume};

#[derive(Debug, Clone, Copy)]
struct Bounds {
    lo: [usize; 3],
    hi: [usize; 3],
}

fn label_bounds(s: Shape, labels: &[u32]) -> BTreeMap<u32, Bounds> {
    let mut out: BTreeMap<u32, Bounds> = BTreeMap::new();
    for (i, &l) in labels.iter().enumerate() {
        if l == 0 {
            continue;
        }
        let (z, y, x) = s.coords(i);
        let b = out.entry(l).or_insert(Bounds {
            lo: [z, y, x],
            hi: [z, y, x],
        });
        for (k, c) in [z, y, x].into_iter().enumerate() {
            b.lo[k] = b.lo[k].min(c);
            b.hi[k] = b.hi[k].max(c);
        }
    }
    out
}

/// Per-label binary open-then-close. Voxels claimed by several labels go to
/// the smallest id; voxels no label keeps become 0.
pub fn smooth_labels(labels: &Volume, se: &StructuringElement) -> Result<LabelVolume> {
    if se.is_empty() {
        return Err(Error::param("structuring element is empty"));
    }
    let s = labels.shape();
    let src = labels.typed::<u32>()?;
    let mut out = vec![0u32; s.len()];
    let dims = s.as_array();
    // with the origin in the element, a label's result lies within its
    // bounding box grown by this margin, and a box with this margin sees the
    // same clamped values as the full volume
    let margin = 4 * se.extent() + 2;
    for (label, b) in label_bounds(s, src) {
        let (lo, hi): ([usize; 3], [usize; 3]) = if se.contains_origin() {
            (
                std::array::from_fn(|k| b.lo[k].saturating_sub(margin)),
                std::array::from_fn(|k| (b.hi[k] + margin + 1).min(dims[k])),
            )
        } else {
            ([0; 3], dims)
        };
        let sub = Shape::new(hi[0] - lo[0], hi[1] - lo[1], hi[2] - lo[2]);
        let mask = Volume::from_fn(sub, |z, y, x| (src[s.index(z + lo[0], y + lo[1], x + lo[2])] == label) as u32);
        let opened = morph(&mask, MorphOp::Open, se, 1, true)?;
        let smooth = morph(&opened, MorphOp::Close, se, 1, true)?;
        let sv = smooth.typed::<u32>()?;
        for z in 0..sub.z {
            for y in 0..sub.y {
                for x in 0..sub.x {
                    if sv[sub.index(z, y, x)] != 0 {
                        let o = &mut out[s.index(z + lo[0], y + lo[1], x + lo[2])];
                        if *o == 0 {
                            *o = label;
                        }
                    }
                }
            }
        }
    }
    LabelVolume::from_vec(s, out)?.with_spacing(labels.spacing())
}

#[derive(Debug, Clone, PartialEq)]
pub struct SmoothLabels {
    pub se: StructuringElement,
}

impl LocalOperator for SmoothLabels {
    fn profile(&self, inputs: &[DType]) -> Result<OpProfile> {
        if inputs.first() != Some(&DType::U32) {
            return Err(Error::param("label smoothing needs a uint32 label volume"));
        }
        Ok(OpProfile::local(4 * self.se.z_extent(), crate::filters::scratch(inputs, 16), DType::U32))
    }
    fn apply(&self, chunk: &Chunk<'_>) -> Result<Volume> {
        Ok(smooth_labels(chunk.primary(), &self.se)?.into_volume())
    }
}
