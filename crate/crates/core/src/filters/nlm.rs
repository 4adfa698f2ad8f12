use rayon::prelude::*;

use super::kernel::clamp;
use super::{float_volume, scratch};
use crate::chunk::{Chunk, LocalOperator, OpProfile};
use crate::error::{Error, Result};
use crate::ledger::Buffer;
use crate::volume::{DType, Shape, Volume};

/// Non-local means parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NonLocalMeans {
    pub h: f64,
    pub patch_radius: usize,
    pub search_radius: usize,
    /// Noise level subtracted from patch distances (`2σn²`).
    pub sigma_noise: f64,
    /// Weight patch offsets with a Gaussian instead of uniformly.
    pub gaussian_patch: bool,
}

impl NonLocalMeans {
    pub fn new(h: f64) -> Self {
        NonLocalMeans {
            h,
            patch_radius: 1,
            search_radius: 3,
            sigma_noise: 0.0,
            gaussian_patch: false,
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.h > 0.0 && self.h.is_finite()) {
            return Err(Error::param(format!("h must be positive, got {}", self.h)));
        }
        if !(self.sigma_noise >= 0.0) {
            return Err(Error::param("noise sigma must be non-negative"));
        }
        Ok(())
    }

    pub fn halo(&self) -> usize {
        self.patch_radius + self.search_radius
    }

    fn patch_weights(&self) -> Vec<(isize, isize, isize, f64)> {
        let p = self.patch_radius as isize;
        let sigma = (self.patch_radius.max(1) as f64) / 2.0;
        let mut w = Vec::new();
        for dz in -p..=p {
            for dy in -p..=p {
                for dx in -p..=p {
                    let weight = if self.gaussian_patch {
                        (-((dz * dz + dy * dy + dx * dx) as f64) / (2.0 * sigma * sigma)).exp()
                    } else {
                        1.0
                    };
                    w.push((dz, dy, dx, weight));
                }
            }
        }
        let total: f64 = w.iter().map(|t| t.3).sum();
        w.iter_mut().for_each(|t| t.3 /= total);
        w
    }

    /// Denoises a whole volume; output `float32`.
    pub fn run(&self, volume: &Volume) -> Result<Volume> {
        self.validate()?;
        let s = volume.shape();
        let pad = self.halo();
        let padded = replicate_pad(s, &volume.to_f64_buffer(), pad);
        let ps = Shape::new(s.z + 2 * pad, s.y + 2 * pad, s.x + 2 * pad);
        let patch: Vec<(isize, f64)> = self
            .patch_weights()
            .into_iter()
            .map(|(dz, dy, dx, w)| ((dz * ps.y as isize + dy) * ps.x as isize + dx, w))
            .collect();
        let r = self.search_radius as isize;
        let mut search = Vec::new();
        for dz in -r..=r {
            for dy in -r..=r {
                for dx in -r..=r {
                    search.push((dz * ps.y as isize + dy) * ps.x as isize + dx);
                }
            }
        }
        let h2 = self.h * self.h;
        let bias = 2.0 * self.sigma_noise * self.sigma_noise;
        let mut out = Buffer::<f32>::zeroed(s.len());
        out.par_chunks_mut(s.slice_len()).enumerate().for_each(|(z, plane)| {
            for y in 0..s.y {
                for x in 0..s.x {
                    let p = ps.index(z + pad, y + pad, x + pad) as isize;
                    let (mut wsum, mut acc) = (0.0, 0.0);
                    for &d in &search {
                        let q = p + d;
                        let mut dist = 0.0;
                        for &(o, w) in &patch {
                            let diff = padded[(p + o) as usize] - padded[(q + o) as usize];
                            dist += w * diff * diff;
                        }
                        let w = (-(dist - bias).max(0.0) / h2).exp();
                        wsum += w;
                        acc += w * padded[q as usize];
                    }
                    plane[y * s.x + x] = (acc / wsum) as f32;
                }
            }
        });
        Ok(float_volume(volume, out))
    }
}

/// Copy of `src` with `pad` replicated voxels on every face.
pub(crate) fn replicate_pad(s: Shape, src: &[f64], pad: usize) -> Buffer<f64> {
    let ps = Shape::new(s.z + 2 * pad, s.y + 2 * pad, s.x + 2 * pad);
    let p = pad as isize;
    let mut out = Buffer::<f64>::zeroed(ps.len());
    out.par_chunks_mut(ps.slice_len()).enumerate().for_each(|(z, plane)| {
        let zz = clamp(z as isize - p, s.z);
        for y in 0..ps.y {
            let yy = clamp(y as isize - p, s.y);
            for x in 0..ps.x {
                plane[y * ps.x + x] = src[s.index(zz, yy, clamp(x as isize - p, s.x))];
            }
        }
    });
    out
}

impl LocalOperator for NonLocalMeans {
    fn profile(&self, inputs: &[DType]) -> Result<OpProfile> {
        self.validate()?;
        // the padded copy grows with the halo on Y and X too; 16 bytes per
        // voxel covers it comfortably for the usual radii
        Ok(OpProfile::local(self.halo(), scratch(inputs, 8 + 16 + 4), DType::F32))
    }
    fn apply(&self, chunk: &Chunk<'_>) -> Result<Volume> {
        self.run(chunk.primary())
    }
}

pub fn nlm(volume: &Volume, h: f64, patch_radius: usize, search_radius: usize) -> Result<Volume> {
    NonLocalMeans {
        patch_radius,
        search_radius,
        ..NonLocalMeans::new(h)
    }
    .run(volume)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_is_fixed_point() {
        let v = Volume::filled(Shape::new(4, 5, 6), 9.5f32);
        let out = nlm(&v, 3.0, 1, 2).unwrap();
        assert!(out.typed::<f32>().unwrap().iter().all(|&x| x == 9.5));
    }

    #[test]
    fn piecewise_regions_do_not_blur() {
        let v = Volume::from_fn(Shape::new(6, 6, 10), |_, _, x| if x < 5 { 0u8 } else { 100 });
        let out = nlm(&v, 1.0, 1, 2).unwrap();
        for (a, b) in out.typed::<f32>().unwrap().iter().zip(v.typed::<u8>().unwrap()) {
            assert!((*a as f64 - *b as f64).abs() < 1e-6);
        }
    }

    #[test]
    fn output_stays_within_input_range() {
        let v = crate::filters::tests::random_volume(Shape::cube(7), 5, DType::U8);
        let (lo, hi) = v.min_max();
        let mut op = NonLocalMeans::new(40.0);
        op.search_radius = 2;
        op.gaussian_patch = true;
        let out = op.run(&v).unwrap();
        let (olo, ohi) = out.min_max();
        assert!(olo >= lo - 1e-4 && ohi <= hi + 1e-4);
    }

    #[test]
    fn rejects_non_positive_h() {
        let v = Volume::filled(Shape::cube(2), 1u8);
        assert!(matches!(nlm(&v, 0.0, 1, 1), Err(Error::Parameter(_))));
    }
}
