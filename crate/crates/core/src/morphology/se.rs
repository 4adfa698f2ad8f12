use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Offset = (isize, isize, isize);

/// A flat structuring element: a set of (dz, dy, dx) offsets.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StructuringElement {
    offsets: Vec<Offset>,
}

impl StructuringElement {
    pub fn from_offsets(offsets: impl IntoIterator<Item = Offset>) -> Result<Self> {
        let set: BTreeSet<Offset> = offsets.into_iter().collect();
        if set.is_empty() {
            return Err(Error::param("structuring element is empty"));
        }
        Ok(StructuringElement {
            offsets: set.into_iter().collect(),
        })
    }

    fn cube_where(r: usize, keep: impl Fn(isize, isize, isize) -> bool) -> Self {
        let r = r as isize;
        let mut offsets = Vec::new();
        for dz in -r..=r {
            for dy in -r..=r {
                for dx in -r..=r {
                    if keep(dz, dy, dx) {
                        offsets.push((dz, dy, dx));
                    }
                }
            }
        }
        StructuringElement { offsets }
    }

    /// All offsets with Chebyshev norm ≤ r.
    pub fn cube(r: usize) -> Self {
        Self::cube_where(r, |_, _, _| true)
    }

    /// Offsets with Euclidean norm ≤ r, in voxel units.
    pub fn ball(r: usize) -> Self {
        let r2 = (r * r) as isize;
        Self::cube_where(r, |z, y, x| z * z + y * y + x * x <= r2)
    }

    /// Offsets along the three axes up to distance r.
    pub fn cross(r: usize) -> Self {
        Self::cube_where(r, |z, y, x| [z, y, x].iter().filter(|&&c| c != 0).count() <= 1)
    }

    /// Parses `box:r`, `ball:r` or `cross:r`.
    pub fn parse(text: &str) -> Result<Self> {
        let (kind, r) = text
            .split_once(':')
            .ok_or_else(|| Error::param(format!("structuring element {text:?} is not kind:radius")))?;
        let r: usize = r
            .trim()
            .parse()
            .map_err(|_| Error::param(format!("bad structuring element radius in {text:?}")))?;
        match kind.trim() {
            "box" | "cube" => Ok(Self::cube(r)),
            "ball" => Ok(Self::ball(r)),
            "cross" => Ok(Self::cross(r)),
            other => Err(Error::param(format!("unknown structuring element kind {other:?}"))),
        }
    }

    pub fn offsets(&self) -> &[Offset] {
        &self.offsets
    }

    pub fn len(&self) -> usize {
        self.offsets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.offsets.is_empty()
    }

    pub fn contains_origin(&self) -> bool {
        self.offsets.binary_search(&(0, 0, 0)).is_ok()
    }

    /// Point reflection through the origin.
    pub fn reflect(&self) -> Self {
        let mut offsets: Vec<Offset> = self.offsets.iter().map(|&(z, y, x)| (-z, -y, -x)).collect();
        offsets.sort();
        StructuringElement { offsets }
    }

    pub fn z_extent(&self) -> usize {
        self.offsets.iter().map(|o| o.0.unsigned_abs()).max().unwrap_or(0)
    }

    /// Largest |component| over all offsets.
    pub fn extent(&self) -> usize {
        self.offsets
            .iter()
            .map(|&(z, y, x)| z.unsigned_abs().max(y.unsigned_abs()).max(x.unsigned_abs()))
            .max()
            .unwrap_or(0)
    }
}

impl fmt::Display for StructuringElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "se[{} offsets, extent {}]", self.len(), self.extent())
    }
}
