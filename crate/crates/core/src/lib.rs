//! Out-of-core volumetric image processing and segmentation.
//!
//! Volumes are processed as Z-slabs sized from a memory budget, with halo
//! slices supplying neighbourhood context so chunked results match
//! whole-volume results.

// `!(x > 0.0)` style checks deliberately reject NaN too
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod annotate;
pub mod bench;
pub mod chunk;
pub mod cli;
pub mod error;
pub mod filters;
pub mod io;
pub mod ledger;
pub mod morphology;
pub mod quantify;
pub mod registry;
pub mod service;
pub mod slice;
pub mod threshold;
pub mod source;
pub mod volume;
pub mod watershed;

pub use error::{Error, Result};
pub use volume::{DType, LabelVolume, Shape, Spacing, Volume, Voxel, VoxelData};
