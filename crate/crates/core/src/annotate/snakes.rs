//! Morphological active contours without edges on a single slice.

use serde::{Deserialize, Serialize};

use super::rle::RleMask;
use crate::error::{Error, Result};
use crate::slice::Image;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SnakeParams {
    pub iterations: usize,
    /// Curvature smoothing passes per iteration, 0 to 4.
    pub smoothing: u8,
    /// +1 inflates, −1 deflates, 0 leaves the region to the data term.
    pub balloon: i8,
    /// Weight of the inside fit.
    pub lambda1: f64,
    /// Weight of the outside fit.
    pub lambda2: f64,
}

impl Default for SnakeParams {
    fn default() -> Self {
        SnakeParams {
            iterations: 100,
            smoothing: 1,
            balloon: 0,
            lambda1: 1.0,
            lambda2: 1.0,
        }
    }
}

impl SnakeParams {
    pub fn validate(&self) -> Result<()> {
        if self.iterations == 0 {
            return Err(Error::param("snakes need at least one iteration"));
        }
        if self.smoothing > 4 {
            return Err(Error::param(format!("smoothing must be 0..=4, got {}", self.smoothing)));
        }
        if !(-1..=1).contains(&self.balloon) {
            return Err(Error::param(format!("balloon must be -1, 0 or 1, got {}", self.balloon)));
        }
        if !(self.lambda1 > 0.0 && self.lambda2 > 0.0) {
            return Err(Error::param("lambda1 and lambda2 must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SnakeOutcome {
    pub mask: Vec<bool>,
    /// Iterations performed, the last one included when it changed nothing.
    pub iterations: usize,
}

const CROSS: [(isize, isize); 4] = [(-1, 0), (0, -1), (0, 1), (1, 0)];
// each line is the centre plus one offset and its mirror
const LINES: [(isize, isize); 4] = [(0, 1), (1, 0), (1, 1), (1, -1)];

struct Grid {
    h: usize,
    w: usize,
}

impl Grid {
    fn at(&self, u: &[bool], r: usize, c: usize, dr: isize, dc: isize) -> Option<bool> {
        let (nr, nc) = (r as isize + dr, c as isize + dc);
        (nr >= 0 && nc >= 0 && (nr as usize) < self.h && (nc as usize) < self.w).then(|| u[nr as usize * self.w + nc as usize])
    }

    fn map(&self, u: &[bool], f: impl Fn(usize, usize, bool) -> bool) -> Vec<bool> {
        (0..self.h * self.w).map(|i| f(i / self.w, i % self.w, u[i])).collect()
    }

    /// Out-of-slice neighbours are ignored.
    fn rank_cross(&self, u: &[bool], dilate: bool) -> Vec<bool> {
        self.map(u, |r, c, v| {
            let mut n = CROSS.iter().filter_map(|&(dr, dc)| self.at(u, r, c, dr, dc));
            if dilate {
                v || n.any(|b| b)
            } else {
                v && n.all(|b| b)
            }
        })
    }

    fn line(&self, u: &[bool], r: usize, c: usize, (dr, dc): (isize, isize), all: bool) -> bool {
        let v = u[r * self.w + c];
        let a = self.at(u, r, c, dr, dc);
        let b = self.at(u, r, c, -dr, -dc);
        let mut it = [Some(v), a, b].into_iter().flatten();
        if all {
            it.all(|x| x)
        } else {
            it.any(|x| x)
        }
    }

    /// Supremum over lines of the erosion by each line.
    fn sup_inf(&self, u: &[bool]) -> Vec<bool> {
        self.map(u, |r, c, _| LINES.iter().any(|&l| self.line(u, r, c, l, true)))
    }

    /// Infimum over lines of the dilation by each line.
    fn inf_sup(&self, u: &[bool]) -> Vec<bool> {
        self.map(u, |r, c, _| LINES.iter().all(|&l| self.line(u, r, c, l, false)))
    }

    fn on_boundary(&self, u: &[bool], r: usize, c: usize) -> bool {
        let v = u[r * self.w + c];
        CROSS.iter().any(|&(dr, dc)| self.at(u, r, c, dr, dc).is_some_and(|n| n != v))
    }
}

/// One balloon step: dilation or erosion by the 4-neighbour cross.
pub fn balloon_step(mask: &[bool], height: usize, width: usize, balloon: i8) -> Vec<bool> {
    let g = Grid { h: height, w: width };
    match balloon.signum() {
        1 => g.rank_cross(mask, true),
        -1 => g.rank_cross(mask, false),
        _ => mask.to_vec(),
    }
}

fn attachment(g: &Grid, img: &[f64], u: &[bool], p: &SnakeParams) -> Vec<bool> {
    let (mut sin, mut nin, mut sout, mut nout) = (0.0, 0usize, 0.0, 0usize);
    for (&v, &inside) in img.iter().zip(u) {
        if inside {
            sin += v;
            nin += 1;
        } else {
            sout += v;
            nout += 1;
        }
    }
    if nin == 0 || nout == 0 {
        return u.to_vec();
    }
    let (cin, cout) = (sin / nin as f64, sout / nout as f64);
    g.map(u, |r, c, v| {
        if !g.on_boundary(u, r, c) {
            return v;
        }
        let i = img[r * g.w + c];
        let aux = p.lambda1 * (i - cin).powi(2) - p.lambda2 * (i - cout).powi(2);
        if aux < 0.0 {
            true
        } else if aux > 0.0 {
            false
        } else {
            v
        }
    })
}

/// Evolves `init` (row-major, same size as `img`) and stops early once an
/// iteration leaves the mask unchanged.
pub fn acwe(img: &Image<f64>, init: &[bool], params: &SnakeParams) -> Result<SnakeOutcome> {
    params.validate()?;
    let g = Grid { h: img.height, w: img.width };
    if init.len() != g.h * g.w {
        return Err(Error::Shape(format!("{} mask pixels for a {}x{} slice", init.len(), g.h, g.w)));
    }
    if !init.iter().any(|&b| b) {
        return Err(Error::param("initial snake mask is empty"));
    }
    let mut u = init.to_vec();
    for it in 1..=params.iterations {
        let before = u.clone();
        u = balloon_step(&u, g.h, g.w, params.balloon);
        u = attachment(&g, &img.pixels, &u, params);
        for pass in 0..params.smoothing {
            u = if pass % 2 == 0 { g.sup_inf(&g.inf_sup(&u)) } else { g.inf_sup(&g.sup_inf(&u)) };
        }
        if u == before {
            return Ok(SnakeOutcome { mask: u, iterations: it });
        }
    }
    Ok(SnakeOutcome {
        mask: u,
        iterations: params.iterations,
    })
}

/// [`acwe`] over RLE masks; the result keeps the initial mask's slice and
/// label.
pub fn morph_snakes_acwe(img: &Image<f64>, init: &RleMask, params: &SnakeParams) -> Result<(RleMask, usize)> {
    if (init.height, init.width) != (img.height, img.width) {
        return Err(Error::Shape(format!(
            "{}x{} mask on a {}x{} slice",
            init.height, init.width, img.height, img.width
        )));
    }
    let out = acwe(img, &init.decode()?, params)?;
    let m = RleMask::encode(init.axis, init.index, init.height, init.width, init.label, &out.mask)?;
    Ok((m, out.iterations))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_distr::{Distribution, Normal};

    fn dice(a: &[bool], b: &[bool]) -> f64 {
        let inter = a.iter().zip(b).filter(|(x, y)| **x && **y).count();
        2.0 * inter as f64 / (a.iter().filter(|&&x| x).count() + b.iter().filter(|&&x| x).count()) as f64
    }

    #[test]
    fn two_valued_region_is_a_fixed_point() {
        let (h, w) = (12, 14);
        let truth: Vec<bool> = (0..h * w).map(|i| (i % w) < 6 || (i / w == 3 && i % w == 9)).collect();
        let img = Image::from_vec(h, w, truth.iter().map(|&b| if b { 9.0 } else { 1.0 }).collect()).unwrap();
        let p = SnakeParams { smoothing: 0, ..Default::default() };
        let out = acwe(&img, &truth, &p).unwrap();
        assert_eq!((out.mask, out.iterations), (truth, 1));
        // a straight edge survives the curvature term too
        let half: Vec<bool> = (0..h * w).map(|i| (i % w) < 6).collect();
        let img = Image::from_vec(h, w, half.iter().map(|&b| if b { 9.0 } else { 1.0 }).collect()).unwrap();
        let out = acwe(&img, &half, &SnakeParams { smoothing: 2, ..Default::default() }).unwrap();
        assert_eq!((out.mask, out.iterations), (half, 1));
    }

    #[test]
    fn noisy_disk_is_recovered() {
        let n = 128;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2024);
        let noise = Normal::new(0.0, 15.0).unwrap();
        let disk: Vec<bool> = (0..n * n)
            .map(|i| {
                let (r, c) = ((i / n) as f64 - 63.5, (i % n) as f64 - 63.5);
                r * r + c * c <= 40.0 * 40.0
            })
            .collect();
        let img = Image::from_vec(n, n, disk.iter().map(|&b| if b { 200.0 } else { 50.0 } + noise.sample(&mut rng)).collect()).unwrap();
        let init: Vec<bool> = (0..n * n).map(|i| (59..69).contains(&(i / n)) && (59..69).contains(&(i % n))).collect();
        let p = SnakeParams { iterations: 200, balloon: 1, ..Default::default() };
        let t = std::time::Instant::now();
        let out = acwe(&img, &init, &p).unwrap();
        assert!(t.elapsed().as_secs_f64() <= 10.0);
        assert!(dice(&out.mask, &disk) >= 0.95, "dice {}", dice(&out.mask, &disk));
    }

    #[test]
    fn bad_inputs() {
        let img = Image::new(4, 4, 0.0);
        assert!(acwe(&img, &[false; 16], &SnakeParams::default()).is_err());
        assert!(acwe(&img, &[true; 16], &SnakeParams { iterations: 0, ..Default::default() }).is_err());
        assert!(acwe(&img, &[true; 16], &SnakeParams { lambda2: 0.0, ..Default::default() }).is_err());
        assert!(acwe(&img, &[true; 15], &SnakeParams::default()).is_err());
    }

    proptest! {
        #[test]
        fn balloon_moves_one_pixel(bits in prop::collection::vec(any::<bool>(), 48), sign in prop::sample::select(vec![-1i8, 1])) {
            let (h, w) = (6, 8);
            let g = Grid { h, w };
            let next = balloon_step(&bits, h, w, sign);
            prop_assert_eq!(next.len(), bits.len());
            for i in 0..h * w {
                if next[i] != bits[i] {
                    prop_assert!(g.on_boundary(&bits, i / w, i % w));
                }
            }
        }
    }
}
