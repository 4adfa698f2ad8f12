use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::kernel::{clamp, gaussian_radius};
use super::smooth::gaussian_f64;
use super::{check_positive, float_volume, scratch};
use crate::chunk::{Chunk, LocalOperator, OpProfile};
use crate::error::{Error, Result};
use crate::ledger::Buffer;
use crate::volume::{DType, Shape, Volume};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EdgeKernel {
    /// Smoothing taps `[1, 2, 1]`.
    Sobel,
    /// Smoothing taps `[1, 1, 1]`.
    Prewitt,
}

impl EdgeKernel {
    fn smoothing(self) -> [f64; 3] {
        match self {
            EdgeKernel::Sobel => [1.0, 2.0, 1.0],
            EdgeKernel::Prewitt => [1.0, 1.0, 1.0],
        }
    }

    /// 3D gradient magnitude; output `float32`.
    pub fn run(self, volume: &Volume) -> Volume {
        let s = volume.shape();
        let src = volume.to_f64_buffer();
        let sm = self.smoothing();
        let d = [-1.0, 0.0, 1.0];
        let mut out = Buffer::<f32>::zeroed(s.len());
        out.par_chunks_mut(s.slice_len()).enumerate().for_each(|(z, plane)| {
            for y in 0..s.y {
                for x in 0..s.x {
                    let (mut gz, mut gy, mut gx) = (0.0, 0.0, 0.0);
                    for a in 0..3 {
                        let zz = clamp(z as isize + a as isize - 1, s.z);
                        for b in 0..3 {
                            let yy = clamp(y as isize + b as isize - 1, s.y);
                            for c in 0..3 {
                                let v = src[s.index(zz, yy, clamp(x as isize + c as isize - 1, s.x))];
                                gz += d[a] * sm[b] * sm[c] * v;
                                gy += sm[a] * d[b] * sm[c] * v;
                                gx += sm[a] * sm[b] * d[c] * v;
                            }
                        }
                    }
                    plane[y * s.x + x] = (gz * gz + gy * gy + gx * gx).sqrt() as f32;
                }
            }
        });
        float_volume(volume, out)
    }
}

impl LocalOperator for EdgeKernel {
    fn profile(&self, inputs: &[DType]) -> Result<OpProfile> {
        Ok(OpProfile::local(1, scratch(inputs, 12), DType::F32))
    }
    fn apply(&self, chunk: &Chunk<'_>) -> Result<Volume> {
        Ok(self.run(chunk.primary()))
    }
}

pub fn sobel(volume: &Volume) -> Volume {
    EdgeKernel::Sobel.run(volume)
}

pub fn prewitt(volume: &Volume) -> Volume {
    EdgeKernel::Prewitt.run(volume)
}

/// Second-derivative components in output order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HessianComponent {
    Xx,
    Yy,
    Zz,
    Xy,
    Xz,
    Yz,
}

impl HessianComponent {
    pub const ALL: [HessianComponent; 6] = [
        HessianComponent::Xx,
        HessianComponent::Yy,
        HessianComponent::Zz,
        HessianComponent::Xy,
        HessianComponent::Xz,
        HessianComponent::Yz,
    ];

    pub fn parse(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| Error::param(format!("unknown hessian component {s:?}")))
    }

    pub fn name(self) -> &'static str {
        match self {
            HessianComponent::Xx => "xx",
            HessianComponent::Yy => "yy",
            HessianComponent::Zz => "zz",
            HessianComponent::Xy => "xy",
            HessianComponent::Xz => "xz",
            HessianComponent::Yz => "yz",
        }
    }
}

fn component(s: Shape, g: &[f64], which: HessianComponent) -> Buffer<f32> {
    let mut out = Buffer::<f32>::zeroed(s.len());
    out.par_chunks_mut(s.slice_len()).enumerate().for_each(|(z, plane)| {
        let at = |dz: isize, dy: isize, dx: isize, y: usize, x: usize| {
            g[s.index(
                clamp(z as isize + dz, s.z),
                clamp(y as isize + dy, s.y),
                clamp(x as isize + dx, s.x),
            )]
        };
        for y in 0..s.y {
            for x in 0..s.x {
                let c = at(0, 0, 0, y, x);
                let v = match which {
                    HessianComponent::Xx => at(0, 0, 1, y, x) - 2.0 * c + at(0, 0, -1, y, x),
                    HessianComponent::Yy => at(0, 1, 0, y, x) - 2.0 * c + at(0, -1, 0, y, x),
                    HessianComponent::Zz => at(1, 0, 0, y, x) - 2.0 * c + at(-1, 0, 0, y, x),
                    HessianComponent::Xy => {
                        (at(0, 1, 1, y, x) - at(0, 1, -1, y, x) - at(0, -1, 1, y, x) + at(0, -1, -1, y, x)) / 4.0
                    }
                    HessianComponent::Xz => {
                        (at(1, 0, 1, y, x) - at(1, 0, -1, y, x) - at(-1, 0, 1, y, x) + at(-1, 0, -1, y, x)) / 4.0
                    }
                    HessianComponent::Yz => {
                        (at(1, 1, 0, y, x) - at(1, -1, 0, y, x) - at(-1, 1, 0, y, x) + at(-1, -1, 0, y, x)) / 4.0
                    }
                };
                plane[y * s.x + x] = v as f32;
            }
        }
    });
    out
}

/// The six second-derivative components of the Gaussian-smoothed volume, in
/// [`HessianComponent::ALL`] order.
pub fn hessian(volume: &Volume, sigma: f64) -> Result<[Volume; 6]> {
    check_positive("sigma", sigma)?;
    let g = gaussian_f64(volume, sigma);
    Ok(HessianComponent::ALL.map(|c| float_volume(volume, component(volume.shape(), &g, c))))
}

/// One Hessian component as a chunkable operator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hessian {
    pub sigma: f64,
    pub component: HessianComponent,
}

impl Hessian {
    pub fn run(&self, volume: &Volume) -> Result<Volume> {
        check_positive("sigma", self.sigma)?;
        let g = gaussian_f64(volume, self.sigma);
        Ok(float_volume(volume, component(volume.shape(), &g, self.component)))
    }
}

impl LocalOperator for Hessian {
    fn profile(&self, inputs: &[DType]) -> Result<OpProfile> {
        check_positive("sigma", self.sigma)?;
        Ok(OpProfile::local(gaussian_radius(self.sigma) + 2, scratch(inputs, 8 + 8 + 4), DType::F32))
    }
    fn apply(&self, chunk: &Chunk<'_>) -> Result<Volume> {
        self.run(chunk.primary())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn permute_zx(v: &Volume) -> Volume {
        let s = v.shape();
        Volume::from_fn(Shape::new(s.x, s.y, s.z), |z, y, x| v.get_f64(x, y, z) as f32)
    }

    #[test]
    fn constant_maps_to_zero() {
        let v = Volume::filled(Shape::cube(5), 77u8);
        for out in [sobel(&v), prewitt(&v)] {
            assert!(out.typed::<f32>().unwrap().iter().all(|&x| x == 0.0));
        }
        for c in hessian(&v, 1.0).unwrap() {
            assert!(c.typed::<f32>().unwrap().iter().all(|&x| x.abs() < 1e-9));
        }
    }

    #[test]
    fn z_step_peaks_on_the_step_planes() {
        let v = Volume::from_fn(Shape::new(8, 5, 5), |z, _, _| if z < 4 { 0.0f32 } else { 1.0 });
        let out = sobel(&v);
        let s = v.shape();
        for z in 0..8 {
            let r = out.get_f64(z, 2, 2);
            match z {
                3 | 4 => assert_eq!(r, 16.0),
                _ => assert_eq!(r, 0.0),
            }
            assert_eq!(out.get_f64(z, 0, 0), r, "clamped corner behaves as interior");
        }
        let p = prewitt(&v);
        assert_eq!(p.get_f64(3, 2, 2), 9.0);
        assert_eq!(s.z, 8);
    }

    #[test]
    fn x_step_is_permuted_z_step() {
        let zstep = Volume::from_fn(Shape::new(7, 4, 5), |z, _, _| if z >= 3 { 10.0f32 } else { 0.0 });
        let xstep = permute_zx(&zstep);
        assert_eq!(permute_zx(&sobel(&zstep)), sobel(&xstep));
        assert_eq!(permute_zx(&prewitt(&zstep)), prewitt(&xstep));
    }

    #[test]
    fn quadratic_has_unit_curvature() {
        let v = Volume::from_fn(Shape::new(6, 6, 24), |_, _, x| ((x as f32) - 12.0).powi(2) / 2.0);
        let h = hessian(&v, 0.5).unwrap();
        for x in 4..20 {
            assert!((h[0].get_f64(3, 3, x) - 1.0).abs() < 0.05);
            for c in &h[1..] {
                assert!(c.get_f64(3, 3, x).abs() < 0.05);
            }
        }
    }

    #[test]
    fn mixed_component_is_symmetric() {
        let v = crate::filters::tests::random_volume(Shape::new(5, 6, 7), 2, DType::F32);
        let xy = Hessian { sigma: 0.7, component: HessianComponent::Xy }.run(&v).unwrap();
        // swap the roles of x and y by transposing the volume
        let s = v.shape();
        let t = Volume::from_fn(Shape::new(s.z, s.x, s.y), |z, y, x| v.get_f64(z, x, y) as f32);
        let yx = Hessian { sigma: 0.7, component: HessianComponent::Xy }.run(&t).unwrap();
        for z in 0..s.z {
            for y in 0..s.y {
                for x in 0..s.x {
                    assert!((xy.get_f64(z, y, x) - yx.get_f64(z, x, y)).abs() < 1e-5);
                }
            }
        }
    }
}
