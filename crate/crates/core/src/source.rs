//! Slab-level access used by the chunk engine.
//!
//! A [`SlabSource`] hands out Z-slabs on demand and a [`SlabSink`] accepts
//! them, so operators can run over data that never sits in memory as a
//! whole. In-memory [`Volume`]s and on-disk [`VolumeFile`](crate::io::VolumeFile)s
//! implement both.

use std::ops::Range;

use crate::error::Result;
use crate::volume::{DType, Shape, Spacing, Volume};

pub trait SlabSource: Sync {
    fn shape(&self) -> Shape;
    fn dtype(&self) -> DType;
    fn spacing(&self) -> Spacing;
    /// Reads slices `z` into a newly allocated volume.
    fn read_slab(&self, z: Range<usize>) -> Result<Volume>;
}

pub trait SlabSink {
    fn shape(&self) -> Shape;
    fn dtype(&self) -> DType;
    /// Writes slices `local` of `slab` so that `local.start` lands on slice `z0`.
    fn write_slab(&mut self, z0: usize, slab: &Volume, local: Range<usize>) -> Result<()>;
}

impl SlabSource for Volume {
    fn shape(&self) -> Shape {
        Volume::shape(self)
    }
    fn dtype(&self) -> DType {
        Volume::dtype(self)
    }
    fn spacing(&self) -> Spacing {
        Volume::spacing(self)
    }
    fn read_slab(&self, z: Range<usize>) -> Result<Volume> {
        self.slab(z)
    }
}

impl SlabSink for Volume {
    fn shape(&self) -> Shape {
        Volume::shape(self)
    }
    fn dtype(&self) -> DType {
        Volume::dtype(self)
    }
    fn write_slab(&mut self, z0: usize, slab: &Volume, local: Range<usize>) -> Result<()> {
        Volume::write_slab(self, z0, slab, local)
    }
}

/// Random access by row blocks spanning every slice, for passes that need
/// whole Z-columns.
pub trait RowStore: SlabSource + SlabSink {
    /// Rows `y` of every slice, shape (z, y.len(), x).
    fn read_rows(&self, y: Range<usize>) -> Result<Volume>;
    fn write_rows(&mut self, y0: usize, block: &Volume) -> Result<()>;
}

impl RowStore for Volume {
    fn read_rows(&self, y: Range<usize>) -> Result<Volume> {
        self.rows(y)
    }
    fn write_rows(&mut self, y0: usize, block: &Volume) -> Result<()> {
        Volume::write_rows(self, y0, block)
    }
}

/// Sink that drops everything; used by reduction-only passes.
pub struct NullSink {
    pub shape: Shape,
    pub dtype: DType,
}

impl SlabSink for NullSink {
    fn shape(&self) -> Shape {
        self.shape
    }
    fn dtype(&self) -> DType {
        self.dtype
    }
    fn write_slab(&mut self, _z0: usize, _slab: &Volume, _local: Range<usize>) -> Result<()> {
        Ok(())
    }
}
