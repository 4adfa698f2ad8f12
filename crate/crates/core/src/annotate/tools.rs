//! Magic wand region growing and lasso polygon fill on one slice.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::slice::Image;

/// Pixel adjacency in a slice.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PlaneConnectivity {
    #[serde(rename = "4")]
    Four,
    #[serde(rename = "8")]
    Eight,
}

impl PlaneConnectivity {
    pub fn from_number(n: u32) -> Result<Self> {
        match n {
            4 => Ok(PlaneConnectivity::Four),
            8 => Ok(PlaneConnectivity::Eight),
            other => Err(Error::param(format!("slice connectivity must be 4 or 8, got {other}"))),
        }
    }

    fn offsets(self) -> &'static [(isize, isize)] {
        match self {
            PlaneConnectivity::Four => &[(-1, 0), (0, -1), (0, 1), (1, 0)],
            PlaneConnectivity::Eight => &[(-1, -1), (-1, 0), (-1, 1), (0, -1), (0, 1), (1, -1), (1, 0), (1, 1)],
        }
    }
}

/// Breadth-first growth from `seed` over pixels within `tolerance` of the
/// seed value. Returns a row-major bitmap.
pub fn magic_wand(img: &Image<f64>, seed: (usize, usize), tolerance: f64, conn: PlaneConnectivity) -> Result<Vec<bool>> {
    let (h, w) = (img.height, img.width);
    if seed.0 >= h || seed.1 >= w {
        return Err(Error::param(format!("seed {seed:?} outside a {h}x{w} slice")));
    }
    if !(tolerance >= 0.0) {
        return Err(Error::param(format!("tolerance must be non-negative, got {tolerance}")));
    }
    let reference = img.get(seed.0, seed.1);
    let mut mask = vec![false; h * w];
    let mut queue = VecDeque::from([seed]);
    mask[seed.0 * w + seed.1] = true;
    while let Some((r, c)) = queue.pop_front() {
        for &(dr, dc) in conn.offsets() {
            let (nr, nc) = (r as isize + dr, c as isize + dc);
            if nr < 0 || nc < 0 || nr >= h as isize || nc >= w as isize {
                continue;
            }
            let (nr, nc) = (nr as usize, nc as usize);
            let i = nr * w + nc;
            if !mask[i] && (img.get(nr, nc) - reference).abs() <= tolerance {
                mask[i] = true;
                queue.push_back((nr, nc));
            }
        }
    }
    Ok(mask)
}

/// Closed polygon of `(row, col)` vertices. Pixel `(r, c)` has its centre at
/// the point `(r, c)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Polygon {
    pub vertices: Vec<(f64, f64)>,
}

impl Polygon {
    pub fn new(vertices: Vec<(f64, f64)>) -> Result<Self> {
        if vertices.len() < 3 {
            return Err(Error::param(format!("polygon needs at least 3 vertices, got {}", vertices.len())));
        }
        if vertices.iter().any(|(r, c)| !r.is_finite() || !c.is_finite()) {
            return Err(Error::param("polygon vertices must be finite"));
        }
        Ok(Polygon { vertices })
    }

    fn edges(&self) -> impl Iterator<Item = ((f64, f64), (f64, f64))> + '_ {
        let n = self.vertices.len();
        (0..n).map(move |i| (self.vertices[i], self.vertices[(i + 1) % n]))
    }

    /// Columns where the horizontal line through `row` crosses an edge,
    /// using the half-open rule so shared vertices count once.
    fn crossings(&self, row: f64) -> Vec<f64> {
        let mut xs: Vec<f64> = self
            .edges()
            .filter(|&((r0, _), (r1, _))| (r0 > row) != (r1 > row))
            .map(|((r0, c0), (r1, c1))| c0 + (row - r0) * (c1 - c0) / (r1 - r0))
            .collect();
        xs.sort_by(f64::total_cmp);
        xs
    }

    /// Even-odd test for a single point.
    pub fn contains(&self, row: f64, col: f64) -> bool {
        self.crossings(row).iter().filter(|&&x| col < x).count() % 2 == 1
    }
}

/// Even-odd scanline fill sampled at pixel centres.
pub fn lasso_fill(poly: &Polygon, height: usize, width: usize) -> Vec<bool> {
    let mut mask = vec![false; height * width];
    for r in 0..height {
        let xs = poly.crossings(r as f64);
        if xs.is_empty() {
            continue;
        }
        for c in 0..width {
            let right = xs.len() - xs.partition_point(|&x| x <= c as f64);
            mask[r * width + c] = right % 2 == 1;
        }
    }
    mask
}
