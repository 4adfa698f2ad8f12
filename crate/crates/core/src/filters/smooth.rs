use rayon::prelude::*;

use super::kernel::{clamp, gaussian_kernel, gaussian_radius, pass_x, pass_y, pass_z_into};
use super::{check_positive, float_volume, scratch};
use crate::chunk::{Chunk, LocalOperator, OpProfile};
use crate::error::{Error, Result};
use crate::ledger::Buffer;
use crate::volume::{DType, Shape, Volume, Voxel};
use crate::with_voxels;

/// Gaussian-smoothed values kept in `f64`.
pub(crate) fn gaussian_f64(volume: &Volume, sigma: f64) -> Buffer<f64> {
    let s = volume.shape();
    let k = gaussian_kernel(sigma);
    let mut tmp = volume.to_f64_buffer();
    pass_x(s, &mut tmp, &k);
    pass_y(s, &mut tmp, &k);
    let mut out = Buffer::<f64>::zeroed(s.len());
    pass_z_into(s, &tmp, &k, &mut out, |a| a);
    out
}

/// Separable Gaussian smoothing; output `float32`.
pub fn gaussian(volume: &Volume, sigma: f64) -> Result<Volume> {
    check_positive("sigma", sigma)?;
    let s = volume.shape();
    let k = gaussian_kernel(sigma);
    let mut tmp = volume.to_f64_buffer();
    pass_x(s, &mut tmp, &k);
    pass_y(s, &mut tmp, &k);
    let mut out = Buffer::<f32>::zeroed(s.len());
    pass_z_into(s, &tmp, &k, &mut out, |a| a as f32);
    Ok(float_volume(volume, out))
}

/// Box average over a `(2r+1)³` window; output `float32`.
pub fn mean(volume: &Volume, radius: usize) -> Result<Volume> {
    check_radius(radius)?;
    let s = volume.shape();
    let k = vec![1.0; 2 * radius + 1];
    let count = (k.len() * k.len() * k.len()) as f64;
    let mut tmp = volume.to_f64_buffer();
    pass_x(s, &mut tmp, &k);
    pass_y(s, &mut tmp, &k);
    let mut out = Buffer::<f32>::zeroed(s.len());
    pass_z_into(s, &tmp, &k, &mut out, |a| (a / count) as f32);
    Ok(float_volume(volume, out))
}

fn check_radius(radius: usize) -> Result<()> {
    if radius == 0 {
        Err(Error::param("radius must be at least 1"))
    } else {
        Ok(())
    }
}

fn median_typed<T: Voxel>(s: Shape, src: &[T], r: usize) -> Buffer<T> {
    let w = 2 * r + 1;
    let mid = w * w * w / 2;
    let ri = r as isize;
    let xs: Vec<Vec<usize>> = (0..s.x)
        .map(|x| (-ri..=ri).map(|d| clamp(x as isize + d, s.x)).collect())
        .collect();
    let mut out = Buffer::<T>::zeroed(s.len());
    out.par_chunks_mut(s.slice_len()).enumerate().for_each_init(
        || Vec::with_capacity(w * w * w),
        |win, (z, plane)| {
            for y in 0..s.y {
                for x in 0..s.x {
                    win.clear();
                    for dz in -ri..=ri {
                        let zz = clamp(z as isize + dz, s.z);
                        for dy in -ri..=ri {
                            let row = s.index(zz, clamp(y as isize + dy, s.y), 0);
                            win.extend(xs[x].iter().map(|&xx| src[row + xx]));
                        }
                    }
                    let (_, m, _) = win.select_nth_unstable_by(mid, |a, b| a.cmp_total(b));
                    plane[y * s.x + x] = *m;
                }
            }
        },
    );
    out
}

/// Median over a `(2r+1)³` window; output keeps the input dtype.
pub fn median(volume: &Volume, radius: usize) -> Result<Volume> {
    check_radius(radius)?;
    let s = volume.shape();
    let data = with_voxels!(volume.data(), b => Voxel::wrap(median_typed(s, b, radius)));
    Volume::new(s, volume.spacing(), data)
}

/// `I + amount·(I − gaussian(I, σ))`; output `float32`.
pub fn unsharp(volume: &Volume, sigma: f64, amount: f64) -> Result<Volume> {
    check_positive("sigma", sigma)?;
    if !amount.is_finite() {
        return Err(Error::param("amount must be finite"));
    }
    let g = gaussian_f64(volume, sigma);
    let out: Buffer<f32> = with_voxels!(volume.data(), b => b
        .iter()
        .zip(g.iter())
        .map(|(v, g)| {
            let v = v.to_f64();
            (v + amount * (v - g)) as f32
        })
        .collect());
    Ok(float_volume(volume, out))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Gaussian {
    pub sigma: f64,
}

impl LocalOperator for Gaussian {
    fn profile(&self, inputs: &[DType]) -> Result<OpProfile> {
        check_positive("sigma", self.sigma)?;
        Ok(OpProfile::local(gaussian_radius(self.sigma), scratch(inputs, 13), DType::F32))
    }
    fn apply(&self, chunk: &Chunk<'_>) -> Result<Volume> {
        gaussian(chunk.primary(), self.sigma)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mean {
    pub radius: usize,
}

impl LocalOperator for Mean {
    fn profile(&self, inputs: &[DType]) -> Result<OpProfile> {
        check_radius(self.radius)?;
        Ok(OpProfile::local(self.radius, scratch(inputs, 13), DType::F32))
    }
    fn apply(&self, chunk: &Chunk<'_>) -> Result<Volume> {
        mean(chunk.primary(), self.radius)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Median {
    pub radius: usize,
}

impl LocalOperator for Median {
    fn profile(&self, inputs: &[DType]) -> Result<OpProfile> {
        check_radius(self.radius)?;
        let out = *inputs.first().ok_or_else(|| Error::param("median needs an input"))?;
        Ok(OpProfile::local(self.radius, scratch(inputs, out.size()), out))
    }
    fn apply(&self, chunk: &Chunk<'_>) -> Result<Volume> {
        median(chunk.primary(), self.radius)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Unsharp {
    pub sigma: f64,
    pub amount: f64,
}

impl LocalOperator for Unsharp {
    fn profile(&self, inputs: &[DType]) -> Result<OpProfile> {
        check_positive("sigma", self.sigma)?;
        Ok(OpProfile::local(gaussian_radius(self.sigma), scratch(inputs, 21), DType::F32))
    }
    fn apply(&self, chunk: &Chunk<'_>) -> Result<Volume> {
        unsharp(chunk.primary(), self.sigma, self.amount)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::filters::tests::{assert_close, random_volume};

    #[test]
    fn impulse_response_is_the_kernel() {
        let mut v = Volume::zeros(Shape::cube(17), DType::F32);
        v.as_mut_slice::<f32>().unwrap()[Shape::cube(17).index(8, 8, 8)] = 1.0;
        let out = gaussian(&v, 1.0).unwrap();
        let k = gaussian_kernel(1.0);
        let r = gaussian_radius(1.0);
        let got = out.typed::<f32>().unwrap();
        // dense 3D oracle: out(p) = k[dz]·k[dy]·k[dx] for offsets within the kernel
        let s = Shape::cube(17);
        let mut sum = 0.0f64;
        for z in 0..17 {
            for y in 0..17 {
                for x in 0..17 {
                    let off = |c: usize| c as isize - 8 + r as isize;
                    let inside = |o: isize| (0..k.len() as isize).contains(&o);
                    let expect = if inside(off(z)) && inside(off(y)) && inside(off(x)) {
                        k[off(z) as usize] * k[off(y) as usize] * k[off(x) as usize]
                    } else {
                        0.0
                    };
                    let g = got[s.index(z, y, x)] as f64;
                    assert!((g - expect).abs() < 1e-7);
                    sum += g;
                }
            }
        }
        assert!((sum - 1.0).abs() < 1e-6);
    }

    #[test]
    fn constants_are_fixed_points() {
        let v = Volume::filled(Shape::new(5, 6, 7), 42u16);
        for out in [
            gaussian(&v, 1.3).unwrap(),
            mean(&v, 2).unwrap(),
            median(&v, 1).unwrap().convert(DType::F32),
            unsharp(&v, 1.0, 2.0).unwrap(),
        ] {
            assert!(out.typed::<f32>().unwrap().iter().all(|&x| (x - 42.0).abs() < 1e-4));
        }
    }

    #[test]
    fn mean_of_x_ramp_is_centered_average() {
        let v = Volume::from_fn(Shape::new(3, 3, 9), |_, _, x| (x * x) as u8);
        let out = mean(&v, 1).unwrap();
        let o = out.typed::<f32>().unwrap();
        let s = v.shape();
        for x in 1..8 {
            let expect = ((x - 1) * (x - 1) + x * x + (x + 1) * (x + 1)) as f32 / 3.0;
            assert_eq!(o[s.index(1, 1, x)], expect);
        }
        // clamped border: neighbourhood of x=0 is {0, 0, 1}
        assert_eq!(o[s.index(1, 1, 0)], 1.0 / 3.0);
    }

    #[test]
    fn salt_voxel_removed() {
        let mut v = Volume::zeros(Shape::cube(5), DType::U8);
        v.as_mut_slice::<u8>().unwrap()[Shape::cube(5).index(2, 2, 2)] = 255;
        let out = median(&v, 1).unwrap();
        assert!(out.typed::<u8>().unwrap().iter().all(|&x| x == 0));
    }

    #[test]
    fn median_matches_sort_oracle() {
        let v = random_volume(Shape::new(12, 11, 10), 7, DType::U16);
        let s = v.shape();
        let src = v.typed::<u16>().unwrap();
        let out = median(&v, 1).unwrap();
        let got = out.typed::<u16>().unwrap();
        for z in 0..s.z {
            for y in 0..s.y {
                for x in 0..s.x {
                    let mut w = Vec::new();
                    for dz in -1..=1isize {
                        for dy in -1..=1isize {
                            for dx in -1..=1isize {
                                let zz = clamp(z as isize + dz, s.z);
                                let yy = clamp(y as isize + dy, s.y);
                                let xx = clamp(x as isize + dx, s.x);
                                w.push(src[s.index(zz, yy, xx)]);
                            }
                        }
                    }
                    w.sort();
                    assert_eq!(got[s.index(z, y, x)], w[13]);
                }
            }
        }
    }

    #[test]
    fn unsharp_composes_gaussian() {
        let v = Volume::from_fn(Shape::new(4, 4, 12), |_, _, x| if x < 6 { 10.0f32 } else { 50.0 });
        let g = gaussian(&v, 1.0).unwrap();
        let u = unsharp(&v, 1.0, 1.0).unwrap();
        let (gi, ui, vi) = (g.typed::<f32>().unwrap(), u.typed::<f32>().unwrap(), v.typed::<f32>().unwrap());
        for i in 0..vi.len() {
            assert_close((2.0 * vi[i] - gi[i]) as f64, ui[i] as f64, 1e-4);
        }
        assert!(ui.iter().cloned().fold(f32::MIN, f32::max) > 50.0);
        let id = unsharp(&v, 1.0, 0.0).unwrap();
        assert_eq!(id.typed::<f32>().unwrap(), vi);
    }

    #[test]
    fn gaussian_is_affine() {
        let v = random_volume(Shape::new(6, 7, 8), 11, DType::F32);
        let g = gaussian(&v, 0.8).unwrap();
        let scaled = Volume::from_vec(v.shape(), v.typed::<f32>().unwrap().iter().map(|x| 3.0 * x + 2.0).collect()).unwrap();
        let gs = gaussian(&scaled, 0.8).unwrap();
        for (a, b) in g.typed::<f32>().unwrap().iter().zip(gs.typed::<f32>().unwrap()) {
            assert_close((3.0 * a + 2.0) as f64, *b as f64, 1e-4);
        }
    }

    #[test]
    fn non_positive_sigma_rejected() {
        let v = Volume::zeros(Shape::cube(2), DType::U8);
        assert!(matches!(gaussian(&v, 0.0), Err(Error::Parameter(_))));
        assert!(matches!(mean(&v, 0), Err(Error::Parameter(_))));
    }
}
