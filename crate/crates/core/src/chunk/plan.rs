use std::ops::Range;

use serde::{Deserialize, Serialize};

use super::budget::MemoryBudget;
use crate::error::{Error, Result};
use crate::volume::{DType, Shape};

/// What an operator needs from the planner.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OpProfile {
    /// Ghost slices required on each Z side of a chunk.
    pub halo_z: usize,
    /// The operator needs the full Z extent at once.
    pub whole_volume: bool,
    /// Total working bytes divided by one chunk's input bytes.
    pub scratch_factor: f64,
    pub out_dtype: DType,
    /// 1 for local operators, 2 for reduce-then-apply operators.
    pub passes: u8,
}

impl OpProfile {
    pub fn local(halo_z: usize, scratch_factor: f64, out_dtype: DType) -> Self {
        OpProfile {
            halo_z,
            whole_volume: false,
            scratch_factor,
            out_dtype,
            passes: 1,
        }
    }

    pub fn two_pass(halo_z: usize, scratch_factor: f64, out_dtype: DType) -> Self {
        OpProfile {
            passes: 2,
            ..Self::local(halo_z, scratch_factor, out_dtype)
        }
    }

    pub fn whole(scratch_factor: f64, out_dtype: DType) -> Self {
        OpProfile {
            whole_volume: true,
            ..Self::local(0, scratch_factor, out_dtype)
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.scratch_factor >= 2.0) {
            return Err(Error::param(format!(
                "scratch factor {} below the input+output minimum of 2",
                self.scratch_factor
            )));
        }
        if !(self.passes == 1 || self.passes == 2) {
            return Err(Error::param(format!("passes must be 1 or 2, got {}", self.passes)));
        }
        Ok(())
    }
}

/// One Z-slab: interior `[start, end)` plus the halo actually loaded.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChunkSpec {
    pub start: usize,
    pub end: usize,
    pub halo_lo: usize,
    pub halo_hi: usize,
}

impl ChunkSpec {
    pub fn interior(&self) -> Range<usize> {
        self.start..self.end
    }

    /// Interior plus halo, in volume coordinates.
    pub fn padded(&self) -> Range<usize> {
        self.start - self.halo_lo..self.end + self.halo_hi
    }

    /// Interior in coordinates local to the padded slab.
    pub fn local_interior(&self) -> Range<usize> {
        self.halo_lo..self.halo_lo + (self.end - self.start)
    }

    pub fn padded_len(&self) -> usize {
        self.end - self.start + self.halo_lo + self.halo_hi
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChunkPlan {
    pub depth: usize,
    pub chunks: Vec<ChunkSpec>,
    /// Interior slices per chunk (the last chunk may hold fewer).
    pub interior_slices: usize,
    /// Slices, halo included, that fit the budget.
    pub slices_per_chunk: usize,
    pub halo_z: usize,
    pub slice_bytes: u64,
    pub scratch_factor: f64,
    pub usable_bytes: u64,
    /// Working set reserved for the job.
    pub predicted_peak_bytes: u64,
}

impl ChunkPlan {
    /// Uniform plan with `interior` slices per chunk, bypassing the budget.
    pub fn uniform(depth: usize, interior: usize, halo_z: usize) -> Result<Self> {
        if interior == 0 {
            return Err(Error::param("chunk interior must hold at least one slice"));
        }
        Ok(ChunkPlan {
            depth,
            chunks: layout(depth, interior, halo_z),
            interior_slices: interior,
            slices_per_chunk: interior + 2 * halo_z,
            halo_z,
            slice_bytes: 0,
            scratch_factor: 0.0,
            usable_bytes: u64::MAX,
            predicted_peak_bytes: 0,
        })
    }

    pub fn len(&self) -> usize {
        self.chunks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.chunks.is_empty()
    }

    /// Checks the interiors tile `[0, depth)` in order and halos clamp at the
    /// volume faces.
    pub fn validate(&self) -> Result<()> {
        let mut next = 0;
        for c in &self.chunks {
            if c.start != next || c.end <= c.start {
                return Err(Error::param(format!("chunk {c:?} breaks the partition at {next}")));
            }
            if c.halo_lo > c.start || c.end + c.halo_hi > self.depth {
                return Err(Error::param(format!("chunk {c:?} halo leaves the volume")));
            }
            next = c.end;
        }
        if next != self.depth {
            return Err(Error::param(format!(
                "chunks cover 0..{next} of 0..{}",
                self.depth
            )));
        }
        Ok(())
    }

    /// Largest padded slab bytes times the scratch factor.
    pub fn largest_chunk_working_bytes(&self) -> u64 {
        let slices = self.chunks.iter().map(|c| c.padded_len()).max().unwrap_or(0);
        (slices as f64 * self.slice_bytes as f64 * self.scratch_factor).ceil() as u64
    }

    pub fn to_text(&self) -> String {
        serde_json::to_string_pretty(self).expect("plan serializes")
    }
}

fn layout(depth: usize, interior: usize, halo: usize) -> Vec<ChunkSpec> {
    let mut chunks = Vec::new();
    let mut start = 0;
    while start < depth {
        let end = (start + interior).min(depth);
        chunks.push(ChunkSpec {
            start,
            end,
            halo_lo: halo.min(start),
            halo_hi: halo.min(depth - end),
        });
        start = end;
    }
    chunks
}

/// Plans Z-chunks for a volume of `shape` and element type `dtype`.
pub fn plan_chunks(shape: Shape, dtype: DType, profile: &OpProfile, budget: &MemoryBudget) -> Result<ChunkPlan> {
    let slice_bytes = (shape.slice_len() * dtype.size()) as u64;
    plan_for_slices(shape.z, slice_bytes, profile, budget)
}

/// Plans Z-chunks given the input bytes of one slice (all inputs together).
///
/// `t = floor(usable / (scratch · slice_bytes))` slices fit the budget; each
/// chunk keeps `n = t − 2·halo` interior slices. The full `t·scratch·slice`
/// working set is what the job reserves.
pub fn plan_for_slices(depth: usize, slice_bytes: u64, profile: &OpProfile, budget: &MemoryBudget) -> Result<ChunkPlan> {
    profile.validate()?;
    if depth == 0 || slice_bytes == 0 {
        return Err(Error::Shape("cannot plan an empty volume".into()));
    }
    let per_slice = profile.scratch_factor * slice_bytes as f64;
    let fit = (budget.usable_bytes as f64 / per_slice).floor() as usize;
    let halo = profile.halo_z;

    let (interior, halo) = if profile.whole_volume {
        if fit < depth {
            return Err(Error::BudgetTooSmall {
                minimum_bytes: (depth as f64 * per_slice).ceil() as u64,
                usable_bytes: budget.usable_bytes,
            });
        }
        (depth, 0)
    } else {
        if fit <= 2 * halo {
            return Err(Error::BudgetTooSmall {
                minimum_bytes: ((2 * halo + 1) as f64 * per_slice).ceil() as u64,
                usable_bytes: budget.usable_bytes,
            });
        }
        (fit - 2 * halo, halo)
    };

    let predicted = ((fit as f64) * per_slice).ceil().min(budget.usable_bytes as f64) as u64;
    Ok(ChunkPlan {
        depth,
        chunks: layout(depth, interior, halo),
        interior_slices: interior,
        slices_per_chunk: fit,
        halo_z: halo,
        slice_bytes,
        scratch_factor: profile.scratch_factor,
        usable_bytes: budget.usable_bytes,
        predicted_peak_bytes: predicted,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const MIB: u64 = 1 << 20;

    #[test]
    fn worked_arithmetic() {
        let p = OpProfile::local(2, 3.0, DType::F32);
        let plan = plan_for_slices(100, 4 * MIB, &p, &MemoryBudget::fixed(96 * MIB)).unwrap();
        assert_eq!(plan.slices_per_chunk, 8);
        assert_eq!(plan.interior_slices, 4);
        assert_eq!(plan.len(), 25);
        assert_eq!(plan.predicted_peak_bytes, 96 * MIB);
        assert_eq!(plan.chunks[0].halo_lo, 0);
        assert_eq!(plan.chunks[0].halo_hi, 2);
        assert_eq!(plan.chunks[24].halo_hi, 0);
        plan.validate().unwrap();
    }

    #[test]
    fn single_chunk_when_everything_fits() {
        let p = OpProfile::local(0, 2.0, DType::U8);
        let plan = plan_for_slices(10, MIB, &p, &MemoryBudget::fixed(20 * MIB)).unwrap();
        assert_eq!(plan.chunks, vec![ChunkSpec { start: 0, end: 10, halo_lo: 0, halo_hi: 0 }]);
    }

    #[test]
    fn budget_too_small_reports_minimum() {
        let p = OpProfile::local(2, 3.0, DType::F32);
        match plan_for_slices(100, 4 * MIB, &p, &MemoryBudget::fixed(20 * MIB)) {
            Err(Error::BudgetTooSmall { minimum_bytes, .. }) => assert_eq!(minimum_bytes, 60 * MIB),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn whole_volume_needs_everything() {
        let p = OpProfile::whole(2.0, DType::F32);
        assert!(plan_for_slices(10, MIB, &p, &MemoryBudget::fixed(19 * MIB)).is_err());
        let plan = plan_for_slices(10, MIB, &p, &MemoryBudget::fixed(20 * MIB)).unwrap();
        assert_eq!(plan.len(), 1);
    }

    #[test]
    fn scratch_below_two_rejected() {
        let p = OpProfile::local(0, 1.5, DType::U8);
        assert!(plan_for_slices(4, 16, &p, &MemoryBudget::fixed(1 << 20)).is_err());
    }

    proptest! {
        #[test]
        fn interiors_partition_depth(depth in 1usize..300, halo in 0usize..6, extra in 1usize..40, scratch in 2.0f64..8.0) {
            let slice = 1000u64;
            let p = OpProfile::local(halo, scratch, DType::U8);
            let usable = (((2 * halo + extra) as f64) * scratch * slice as f64).ceil() as u64;
            let plan = plan_for_slices(depth, slice, &p, &MemoryBudget::fixed(usable)).unwrap();
            plan.validate().unwrap();
            prop_assert!(plan.predicted_peak_bytes <= usable);
            let mut covered = vec![0u8; depth];
            for c in &plan.chunks {
                for z in c.interior() { covered[z] += 1; }
                prop_assert!(c.halo_lo <= halo && c.halo_hi <= halo);
                prop_assert!(c.padded().end <= depth);
            }
            prop_assert!(covered.iter().all(|&n| n == 1));
        }
    }
}
