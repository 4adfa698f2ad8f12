//! Flat mathematical morphology and label editing.

pub mod labels;
pub mod ops;
pub mod reconstruct;
pub mod se;

pub use labels::{smooth_labels, SmoothLabels};
pub use ops::{binarize, close, dilate, erode, morph, open, Morph, MorphOp};
pub use reconstruct::{geodesic_reconstruct, ReconstructKind};
pub use se::StructuringElement;
pub use crate::quantify::components::{fill_holes, reconstruct_binary, remove_islands};
