//! Separable 1D passes over dense `f64` grids with clamp-to-edge borders.

use rayon::prelude::*;

use crate::volume::Shape;

#[inline]
pub(crate) fn clamp(i: isize, n: usize) -> usize {
    i.clamp(0, n as isize - 1) as usize
}

/// Normalized Gaussian taps truncated at `ceil(4σ)`.
pub fn gaussian_kernel(sigma: f64) -> Vec<f64> {
    let r = gaussian_radius(sigma) as isize;
    let mut k: Vec<f64> = (-r..=r)
        .map(|i| (-((i * i) as f64) / (2.0 * sigma * sigma)).exp())
        .collect();
    let sum: f64 = k.iter().sum();
    k.iter_mut().for_each(|w| *w /= sum);
    k
}

pub fn gaussian_radius(sigma: f64) -> usize {
    (4.0 * sigma).ceil() as usize
}

fn convolve_line(src: &[f64], k: &[f64], dst: &mut [f64]) {
    let n = src.len();
    let r = (k.len() / 2) as isize;
    for (i, d) in dst.iter_mut().enumerate() {
        let mut acc = 0.0;
        for (j, w) in k.iter().enumerate() {
            acc += w * src[clamp(i as isize + j as isize - r, n)];
        }
        *d = acc;
    }
}

/// In-place convolution along X.
pub(crate) fn pass_x(s: Shape, data: &mut [f64], k: &[f64]) {
    data.par_chunks_mut(s.x).for_each_init(
        || vec![0.0; s.x],
        |line, row| {
            line.copy_from_slice(row);
            convolve_line(line, k, row);
        },
    );
}

/// In-place convolution along Y.
pub(crate) fn pass_y(s: Shape, data: &mut [f64], k: &[f64]) {
    data.par_chunks_mut(s.slice_len()).for_each_init(
        || (vec![0.0; s.y], vec![0.0; s.y]),
        |(col, out), plane| {
            for x in 0..s.x {
                for y in 0..s.y {
                    col[y] = plane[y * s.x + x];
                }
                convolve_line(col, k, out);
                for y in 0..s.y {
                    plane[y * s.x + x] = out[y];
                }
            }
        },
    );
}

/// Convolution along Z from `src` into `dst`, mapping each result through `f`.
pub(crate) fn pass_z_into<T: Send>(s: Shape, src: &[f64], k: &[f64], dst: &mut [T], f: impl Fn(f64) -> T + Sync) {
    let n = s.slice_len();
    let r = (k.len() / 2) as isize;
    dst.par_chunks_mut(n).enumerate().for_each(|(z, plane)| {
        for (i, d) in plane.iter_mut().enumerate() {
            let mut acc = 0.0;
            for (j, w) in k.iter().enumerate() {
                let zz = clamp(z as isize + j as isize - r, s.z);
                acc += w * src[zz * n + i];
            }
            *d = f(acc);
        }
    });
}
