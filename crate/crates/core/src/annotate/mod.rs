//! Slice-level annotation tools producing run-length encoded masks.

pub mod rle;
pub mod snakes;
pub mod tools;

pub use rle::{apply_mask, MaskMode, RleMask};
pub use snakes::{acwe, morph_snakes_acwe, SnakeOutcome, SnakeParams};
pub use tools::{lasso_fill, magic_wand, PlaneConnectivity, Polygon};
