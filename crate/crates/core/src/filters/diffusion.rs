use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::kernel::clamp;
use super::{float_volume, scratch};
use crate::chunk::{Chunk, LocalOperator, OpProfile};
use crate::error::{Error, Result};
use crate::ledger::Buffer;
use crate::volume::{DType, Volume};

/// Perona–Malik conduction function.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Conduction {
    /// `exp(−(∇/κ)²)`
    #[default]
    Exponential,
    /// `1 / (1 + (∇/κ)²)`
    Rational,
}

impl Conduction {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "exponential" | "exp" => Ok(Conduction::Exponential),
            "rational" | "rat" => Ok(Conduction::Rational),
            other => Err(Error::param(format!("unknown conduction mode {other:?}"))),
        }
    }

    #[inline]
    fn g(self, grad: f64, kappa: f64) -> f64 {
        if kappa.is_infinite() {
            return 1.0;
        }
        let r = (grad / kappa) * (grad / kappa);
        match self {
            Conduction::Exponential => (-r).exp(),
            Conduction::Rational => 1.0 / (1.0 + r),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnisotropicDiffusion {
    pub iterations: usize,
    pub kappa: f64,
    pub dt: f64,
    pub mode: Conduction,
}

impl AnisotropicDiffusion {
    fn validate(&self) -> Result<()> {
        if self.iterations == 0 {
            return Err(Error::param("iterations must be at least 1"));
        }
        if !(self.kappa > 0.0) {
            return Err(Error::param(format!("kappa must be positive, got {}", self.kappa)));
        }
        if !(self.dt > 0.0 && self.dt <= 1.0 / 6.0 + 1e-12) {
            return Err(Error::param(format!(
                "dt {} outside the stable range (0, 1/6]",
                self.dt
            )));
        }
        Ok(())
    }

    pub fn run(&self, volume: &Volume) -> Result<Volume> {
        self.validate()?;
        let s = volume.shape();
        let mut cur = volume.to_f64_buffer();
        let mut next = Buffer::<f64>::zeroed(s.len());
        let (kappa, dt, mode) = (self.kappa, self.dt, self.mode);
        for _ in 0..self.iterations {
            let src: &[f64] = &cur;
            next.par_chunks_mut(s.slice_len()).enumerate().for_each(|(z, plane)| {
                let zm = clamp(z as isize - 1, s.z);
                let zp = clamp(z as isize + 1, s.z);
                for y in 0..s.y {
                    let ym = clamp(y as isize - 1, s.y);
                    let yp = clamp(y as isize + 1, s.y);
                    for x in 0..s.x {
                        let xm = clamp(x as isize - 1, s.x);
                        let xp = clamp(x as isize + 1, s.x);
                        let c = src[s.index(z, y, x)];
                        let mut flux = 0.0;
                        for q in [
                            s.index(zm, y, x),
                            s.index(zp, y, x),
                            s.index(z, ym, x),
                            s.index(z, yp, x),
                            s.index(z, y, xm),
                            s.index(z, y, xp),
                        ] {
                            let d = src[q] - c;
                            flux += mode.g(d, kappa) * d;
                        }
                        plane[y * s.x + x] = c + dt * flux;
                    }
                }
            });
            std::mem::swap(&mut cur, &mut next);
        }
        drop(next);
        let out: Buffer<f32> = cur.iter().map(|&v| v as f32).collect();
        Ok(float_volume(volume, out))
    }
}

impl LocalOperator for AnisotropicDiffusion {
    fn profile(&self, inputs: &[DType]) -> Result<OpProfile> {
        self.validate()?;
        Ok(OpProfile::local(self.iterations, scratch(inputs, 8 + 8 + 4), DType::F32))
    }
    fn apply(&self, chunk: &Chunk<'_>) -> Result<Volume> {
        self.run(chunk.primary())
    }
}

pub fn anisotropic_diffusion(volume: &Volume, iterations: usize, kappa: f64, dt: f64, mode: Conduction) -> Result<Volume> {
    AnisotropicDiffusion {
        iterations,
        kappa,
        dt,
        mode,
    }
    .run(volume)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::volume::Shape;

    #[test]
    fn pair_moves_by_one() {
        let v = Volume::from_vec(Shape::new(1, 1, 2), vec![0.0f32, 6.0]).unwrap();
        let out = anisotropic_diffusion(&v, 1, f64::INFINITY, 1.0 / 6.0, Conduction::Exponential).unwrap();
        assert_eq!(out.typed::<f32>().unwrap(), &[1.0, 5.0]);
    }

    #[test]
    fn constant_is_fixed_point() {
        let v = Volume::filled(Shape::cube(4), 3u8);
        let out = anisotropic_diffusion(&v, 7, 2.0, 0.1, Conduction::Rational).unwrap();
        assert!(out.typed::<f32>().unwrap().iter().all(|&x| x == 3.0));
    }

    #[test]
    fn mean_is_conserved() {
        let v = crate::filters::tests::random_volume(Shape::new(8, 9, 10), 4, DType::F32);
        let mean = |v: &Volume| v.to_f64_buffer().iter().sum::<f64>() / v.shape().len() as f64;
        for mode in [Conduction::Exponential, Conduction::Rational] {
            let out = anisotropic_diffusion(&v, 10, 0.3, 1.0 / 6.0, mode).unwrap();
            assert!(((mean(&out) - mean(&v)) / mean(&v)).abs() < 1e-4);
        }
    }

    #[test]
    fn unstable_step_rejected() {
        let v = Volume::filled(Shape::cube(2), 3u8);
        assert!(matches!(
            anisotropic_diffusion(&v, 1, 1.0, 0.2, Conduction::Exponential),
            Err(Error::Parameter(_))
        ));
    }
}
