//! Smoothing, denoising, edge and texture filters.
//!
//! Every filter has a whole-volume function and an operator type that the
//! chunk engine can run slab by slab. Borders replicate the edge voxel.

pub mod diffusion;
pub mod edges;
pub mod kernel;
pub mod nlm;
pub mod smooth;
pub mod texture;

use serde::{Deserialize, Serialize};

pub use diffusion::{anisotropic_diffusion, AnisotropicDiffusion, Conduction};
pub use edges::{hessian, prewitt, sobel, EdgeKernel, Hessian, HessianComponent};
pub use kernel::{gaussian_kernel, gaussian_radius};
pub use nlm::{nlm, NonLocalMeans};
pub use smooth::{gaussian, mean, median, unsharp, Gaussian, Mean, Median, Unsharp};
pub use texture::{lbp2d, Lbp2d};

use crate::error::{Error, Result};
use crate::ledger::Buffer;
use crate::volume::{DType, Volume};

/// Parameters shared by the filter suite; each filter reads the ones it needs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, rename_all = "kebab-case")]
pub struct FilterParams {
    pub sigma: f64,
    pub radius: usize,
    pub amount: f64,
    pub kappa: f64,
    pub dt: f64,
    pub iterations: usize,
    pub h: f64,
    pub patch_radius: usize,
    pub search_radius: usize,
    pub mode: Conduction,
}

impl Default for FilterParams {
    fn default() -> Self {
        FilterParams {
            sigma: 1.0,
            radius: 1,
            amount: 1.0,
            kappa: 20.0,
            dt: 0.1,
            iterations: 5,
            h: 10.0,
            patch_radius: 1,
            search_radius: 3,
            mode: Conduction::Exponential,
        }
    }
}

impl FilterParams {
    pub fn validate(&self) -> Result<()> {
        check_positive("sigma", self.sigma)?;
        check_positive("h", self.h)?;
        if self.radius == 0 {
            return Err(Error::param("radius must be at least 1"));
        }
        if self.iterations == 0 {
            return Err(Error::param("iterations must be at least 1"));
        }
        if !(self.dt > 0.0 && self.dt <= 1.0 / 6.0 + 1e-12) {
            return Err(Error::param(format!("dt {} outside (0, 1/6]", self.dt)));
        }
        Ok(())
    }
}

pub(crate) fn check_positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::param(format!("{name} must be positive, got {v}")))
    }
}

/// Working bytes ratio for a filter that needs `extra` bytes per voxel on top
/// of its inputs.
pub(crate) fn scratch(inputs: &[DType], extra: usize) -> f64 {
    let b: usize = inputs.iter().map(|d| d.size()).sum::<usize>().max(1);
    ((b + extra) as f64 / b as f64).max(2.0)
}

pub(crate) fn float_volume(like: &Volume, data: Buffer<f32>) -> Volume {
    Volume::from_buffer(like.shape(), like.spacing(), data).expect("filter preserves shape")
}
