use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::se::StructuringElement;
use crate::chunk::{Chunk, LocalOperator, OpProfile};
use crate::error::{Error, Result};
use crate::filters::kernel::clamp;
use crate::ledger::Buffer;
use crate::volume::{DType, Shape, Volume, Voxel};
use crate::with_voxels;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MorphOp {
    Erode,
    Dilate,
    Open,
    Close,
}

impl MorphOp {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "erode" => Ok(MorphOp::Erode),
            "dilate" => Ok(MorphOp::Dilate),
            "open" => Ok(MorphOp::Open),
            "close" => Ok(MorphOp::Close),
            other => Err(Error::param(format!("unknown morphology op {other:?}"))),
        }
    }
}

/// One rank pass: `min` over `p + o` when eroding, `max` over `p − o` when
/// dilating, with clamped coordinates.
fn rank_pass<T: Voxel>(s: Shape, src: &[T], se: &StructuringElement, dilate: bool) -> Buffer<T> {
    let offsets: Vec<(isize, isize, isize)> = se
        .offsets()
        .iter()
        .map(|&(z, y, x)| if dilate { (-z, -y, -x) } else { (z, y, x) })
        .collect();
    let mut out = Buffer::<T>::zeroed(s.len());
    out.par_chunks_mut(s.slice_len()).enumerate().for_each(|(z, plane)| {
        for y in 0..s.y {
            for x in 0..s.x {
                let mut acc: Option<T> = None;
                for &(dz, dy, dx) in &offsets {
                    let v = src[s.index(
                        clamp(z as isize + dz, s.z),
                        clamp(y as isize + dy, s.y),
                        clamp(x as isize + dx, s.x),
                    )];
                    acc = Some(match acc {
                        None => v,
                        Some(a) => {
                            let keep_v = if dilate { v.cmp_total(&a).is_gt() } else { v.cmp_total(&a).is_lt() };
                            if keep_v {
                                v
                            } else {
                                a
                            }
                        }
                    });
                }
                plane[y * s.x + x] = acc.expect("non-empty structuring element");
            }
        }
    });
    out
}

fn passes<T: Voxel>(s: Shape, src: Buffer<T>, se: &StructuringElement, seq: &[bool]) -> Buffer<T> {
    let mut cur = src;
    for &dilate in seq {
        cur = rank_pass(s, &cur, se, dilate);
    }
    cur
}

fn sequence(op: MorphOp, iterations: usize) -> Vec<bool> {
    let e = std::iter::repeat_n(false, iterations);
    let d = std::iter::repeat_n(true, iterations);
    match op {
        MorphOp::Erode => e.collect(),
        MorphOp::Dilate => d.collect(),
        MorphOp::Open => e.chain(d).collect(),
        MorphOp::Close => d.chain(e).collect(),
    }
}

/// 0/1 `uint32` copy of a mask (nonzero → 1).
pub fn binarize(volume: &Volume) -> Volume {
    let data: Buffer<u32> = with_voxels!(volume.data(), b => b.iter().map(|v| (v.to_f64() != 0.0) as u32).collect());
    Volume::from_buffer(volume.shape(), volume.spacing(), data).expect("same shape")
}

/// Flat erosion/dilation/opening/closing.
///
/// Binary mode binarizes the input first and returns 0/1 `uint32` labels;
/// grayscale mode keeps the input dtype.
pub fn morph(volume: &Volume, op: MorphOp, se: &StructuringElement, iterations: usize, binary: bool) -> Result<Volume> {
    if se.is_empty() {
        return Err(Error::param("structuring element is empty"));
    }
    if iterations == 0 {
        return Err(Error::param("iterations must be at least 1"));
    }
    let seq = sequence(op, iterations);
    let s = volume.shape();
    let src = if binary { binarize(volume) } else { volume.clone() };
    let data = with_voxels!(src.into_data(), b => Voxel::wrap(passes(s, b, se, &seq)));
    Volume::new(s, volume.spacing(), data)
}

pub fn erode(volume: &Volume, se: &StructuringElement) -> Result<Volume> {
    morph(volume, MorphOp::Erode, se, 1, false)
}

pub fn dilate(volume: &Volume, se: &StructuringElement) -> Result<Volume> {
    morph(volume, MorphOp::Dilate, se, 1, false)
}

pub fn open(volume: &Volume, se: &StructuringElement) -> Result<Volume> {
    morph(volume, MorphOp::Open, se, 1, false)
}

pub fn close(volume: &Volume, se: &StructuringElement) -> Result<Volume> {
    morph(volume, MorphOp::Close, se, 1, false)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Morph {
    pub op: MorphOp,
    pub se: StructuringElement,
    pub iterations: usize,
    pub binary: bool,
}

impl Morph {
    pub fn halo(&self) -> usize {
        let per = self.se.z_extent() * self.iterations;
        match self.op {
            MorphOp::Erode | MorphOp::Dilate => per,
            MorphOp::Open | MorphOp::Close => 2 * per,
        }
    }
}

impl LocalOperator for Morph {
    fn profile(&self, inputs: &[DType]) -> Result<OpProfile> {
        if self.se.is_empty() {
            return Err(Error::param("structuring element is empty"));
        }
        let first = *inputs.first().ok_or_else(|| Error::param("morphology needs an input"))?;
        let out = if self.binary { DType::U32 } else { first };
        // binarized copy plus two rank buffers in flight
        Ok(OpProfile::local(self.halo(), crate::filters::scratch(inputs, 3 * out.size()), out))
    }
    fn apply(&self, chunk: &Chunk<'_>) -> Result<Volume> {
        morph(chunk.primary(), self.op, &self.se, self.iterations, self.binary)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    fn random_mask(seed: u64) -> Volume {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        Volume::from_fn(Shape::cube(9), |_, _, _| rng.random_bool(0.5) as u32)
    }

    fn not(v: &Volume) -> Volume {
        Volume::from_vec(v.shape(), v.typed::<u32>().unwrap().iter().map(|&x| 1 - x).collect()).unwrap()
    }

    fn subset(a: &Volume, b: &Volume) -> bool {
        a.typed::<u32>().unwrap().iter().zip(b.typed::<u32>().unwrap()).all(|(x, y)| x <= y)
    }

    #[test]
    fn square_eroded_by_cross_leaves_centre() {
        let v = Volume::from_fn(Shape::new(1, 5, 5), |_, y, x| ((1..4).contains(&y) && (1..4).contains(&x)) as u32);
        let out = morph(&v, MorphOp::Erode, &StructuringElement::cross(1), 1, true).unwrap();
        let on: Vec<usize> = out.typed::<u32>().unwrap().iter().enumerate().filter(|(_, &l)| l == 1).map(|(i, _)| i).collect();
        assert_eq!(on, vec![12]);
    }

    #[test]
    fn algebra_on_random_masks() {
        let asym = StructuringElement::from_offsets([(0, 0, 0), (0, 0, 1), (1, 0, 0), (0, -1, 1)]).unwrap();
        for seed in 0..8 {
            let m = random_mask(seed);
            for se in [StructuringElement::ball(1), StructuringElement::cube(1), asym.clone()] {
                let e = morph(&m, MorphOp::Erode, &se, 1, true).unwrap();
                let d = morph(&m, MorphOp::Dilate, &se, 1, true).unwrap();
                let dual = not(&morph(&not(&m), MorphOp::Dilate, &se.reflect(), 1, true).unwrap());
                assert_eq!(e, dual);
                assert!(subset(&e, &m) && subset(&m, &d));
                if se == asym {
                    // clamping can map an asymmetric element's offsets outside
                    // the element, so opening is not idempotent at the faces
                    continue;
                }
                let o = morph(&m, MorphOp::Open, &se, 1, true).unwrap();
                assert_eq!(morph(&o, MorphOp::Open, &se, 1, true).unwrap(), o);
                let c = morph(&m, MorphOp::Close, &se, 1, true).unwrap();
                assert_eq!(morph(&c, MorphOp::Close, &se, 1, true).unwrap(), c);
            }
        }
    }

    #[test]
    fn grayscale_keeps_dtype() {
        let v = Volume::from_fn(Shape::new(3, 3, 3), |z, y, x| (z * 9 + y * 3 + x) as u16);
        let e = morph(&v, MorphOp::Erode, &StructuringElement::cube(1), 1, false).unwrap();
        assert_eq!(e.dtype(), DType::U16);
        assert_eq!(e.get_f64(1, 1, 1), 0.0);
        let d = morph(&v, MorphOp::Dilate, &StructuringElement::cube(1), 1, false).unwrap();
        assert_eq!(d.get_f64(1, 1, 1), 26.0);
    }

    #[test]
    fn zero_iterations_rejected() {
        let v = Volume::filled(Shape::cube(2), 1u8);
        assert!(morph(&v, MorphOp::Open, &StructuringElement::ball(1), 0, true).is_err());
    }
}
