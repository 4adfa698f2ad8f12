//! Run-length encoded slice masks and their application to label volumes.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::slice::{check_index, plane_dims, plane_to_volume, Axis};
use crate::volume::LabelVolume;

/// Binary mask of one slice. `runs` holds `[row, col, len]` triples in
/// raster order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RleMask {
    pub axis: Axis,
    pub index: usize,
    pub width: usize,
    pub height: usize,
    pub label: u32,
    pub runs: Vec<[usize; 3]>,
}

impl RleMask {
    pub fn empty(axis: Axis, index: usize, height: usize, width: usize, label: u32) -> Self {
        RleMask {
            axis,
            index,
            width,
            height,
            label,
            runs: Vec::new(),
        }
    }

    /// Encodes a row-major bitmap of `height × width` pixels.
    pub fn encode(axis: Axis, index: usize, height: usize, width: usize, label: u32, bits: &[bool]) -> Result<Self> {
        if bits.len() != height * width {
            return Err(Error::Shape(format!("{} pixels for a {height}x{width} mask", bits.len())));
        }
        let mut m = Self::empty(axis, index, height, width, label);
        for (r, row) in bits.chunks(width.max(1)).enumerate() {
            let mut c = 0;
            while c < width {
                if row[c] {
                    let start = c;
                    while c < width && row[c] {
                        c += 1;
                    }
                    m.runs.push([r, start, c - start]);
                } else {
                    c += 1;
                }
            }
        }
        Ok(m)
    }

    pub fn decode(&self) -> Result<Vec<bool>> {
        self.validate()?;
        let mut bits = vec![false; self.height * self.width];
        for &[r, c, n] in &self.runs {
            bits[r * self.width + c..r * self.width + c + n].fill(true);
        }
        Ok(bits)
    }

    /// Runs must be non-empty, in bounds, sorted and disjoint.
    pub fn validate(&self) -> Result<()> {
        let mut prev_end: Option<(usize, usize)> = None;
        for &[r, c, n] in &self.runs {
            if n == 0 || r >= self.height || c + n > self.width {
                return Err(Error::param(format!(
                    "run [{r}, {c}, {n}] outside a {}x{} mask",
                    self.height, self.width
                )));
            }
            if let Some((pr, pe)) = prev_end {
                if (r, c) < (pr, pe) {
                    return Err(Error::param(format!("run [{r}, {c}, {n}] overlaps or is out of order")));
                }
            }
            prev_end = Some((r, c + n));
        }
        Ok(())
    }

    pub fn area(&self) -> usize {
        self.runs.iter().map(|r| r[2]).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.runs.is_empty()
    }

    pub fn pixels(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.runs.iter().flat_map(|&[r, c, n]| (c..c + n).map(move |cc| (r, cc)))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MaskMode {
    Set,
    Erase,
}

impl MaskMode {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "set" => Ok(MaskMode::Set),
            "erase" => Ok(MaskMode::Erase),
            other => Err(Error::param(format!("unknown mask mode {other:?}"))),
        }
    }
}

/// Writes the mask label (or 0 when erasing) on the mask pixels; returns how
/// many voxels changed.
pub fn apply_mask(labels: &mut LabelVolume, mask: &RleMask, mode: MaskMode) -> Result<usize> {
    let s = labels.shape();
    check_index(s, mask.axis, mask.index)?;
    let (h, w) = plane_dims(s, mask.axis);
    if (mask.height, mask.width) != (h, w) {
        return Err(Error::Shape(format!(
            "{}x{} mask on a {h}x{w} {:?} plane",
            mask.height, mask.width, mask.axis
        )));
    }
    mask.validate()?;
    let value = match mode {
        MaskMode::Set => mask.label,
        MaskMode::Erase => 0,
    };
    let data = labels.labels_mut();
    let mut changed = 0;
    for (r, c) in mask.pixels() {
        let (z, y, x) = plane_to_volume(mask.axis, mask.index, r, c);
        let v = &mut data[s.index(z, y, x)];
        if *v != value {
            *v = value;
            changed += 1;
        }
    }
    Ok(changed)
}
