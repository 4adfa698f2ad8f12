//! Per-label volume, surface area and slice perimeter.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::chunk::{run_reduce, Chunk, ChunkPlan, ChunkReduce, ExecOptions, ExecutionReport, MemoryBudget, OpProfile};
use crate::error::{Error, Result};
use crate::source::SlabSource;
use crate::volume::{DType, LabelVolume, Spacing};

/// Exposed faces by normal axis plus in-plane boundary edges, all as counts,
/// so that partial sums merge exactly in any order.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FaceCounts {
    pub voxels: u64,
    /// Faces whose normal is along Z, Y and X.
    pub faces: [u64; 3],
    /// In-slice boundary edges crossed moving along Y and along X.
    pub edges: [u64; 2],
}

impl FaceCounts {
    fn add(&mut self, o: &FaceCounts) {
        self.voxels += o.voxels;
        for i in 0..3 {
            self.faces[i] += o.faces[i];
        }
        for i in 0..2 {
            self.edges[i] += o.edges[i];
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LabelMetric {
    pub label: u32,
    pub voxels: u64,
    /// Physical volume.
    pub volume: f64,
    /// Area of faces shared with another label or the volume border.
    pub surface_area: f64,
    /// Summed over Z-slices, on the 4-neighbour grid.
    pub perimeter: f64,
    /// Share of all voxels.
    pub fraction: f64,
}

/// One row per label present, label 0 included, in ascending label order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsTable {
    pub spacing: Spacing,
    pub rows: Vec<LabelMetric>,
}

pub const CSV_HEADER: [&str; 6] = ["label", "voxels", "volume", "area", "perimeter", "fraction"];

impl MetricsTable {
    pub fn from_counts(counts: &BTreeMap<u32, FaceCounts>, spacing: Spacing) -> Self {
        let [sz, sy, sx] = spacing.0;
        let total: u64 = counts.values().map(|c| c.voxels).sum();
        let rows = counts
            .iter()
            .map(|(&label, c)| LabelMetric {
                label,
                voxels: c.voxels,
                volume: c.voxels as f64 * sz * sy * sx,
                surface_area: c.faces[0] as f64 * sy * sx + c.faces[1] as f64 * sz * sx + c.faces[2] as f64 * sz * sy,
                // an edge crossed along Y runs along X, and the other way round
                perimeter: c.edges[0] as f64 * sx + c.edges[1] as f64 * sy,
                fraction: if total == 0 { 0.0 } else { c.voxels as f64 / total as f64 },
            })
            .collect();
        MetricsTable { spacing, rows }
    }

    pub fn get(&self, label: u32) -> Option<&LabelMetric> {
        self.rows.iter().find(|r| r.label == label)
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let io = |e: csv::Error| Error::io("metrics.csv", std::io::Error::other(e));
        w.write_record(CSV_HEADER).map_err(io)?;
        for r in &self.rows {
            w.write_record([
                r.label.to_string(),
                r.voxels.to_string(),
                r.volume.to_string(),
                r.surface_area.to_string(),
                r.perimeter.to_string(),
                r.fraction.to_string(),
            ])
            .map_err(io)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::io("metrics.csv", e.into_error()))?;
        Ok(String::from_utf8(bytes).expect("csv is utf-8"))
    }
}

/// Tallies interior slices `zr` of a padded label slab. Slices just outside
/// `zr` are context; missing ones are the volume border.
fn tally(labels: &[u32], (d, h, w): (usize, usize, usize), zr: std::ops::Range<usize>) -> BTreeMap<u32, FaceCounts> {
    let mut out: BTreeMap<u32, FaceCounts> = BTreeMap::new();
    let n = h * w;
    let idx = |z: usize, y: usize, x: usize| z * n + y * w + x;
    // runs of equal labels share one map lookup
    let mut cur_label = u32::MAX;
    let mut cur = FaceCounts::default();
    let flush = |label: u32, c: &mut FaceCounts, out: &mut BTreeMap<u32, FaceCounts>| {
        if label != u32::MAX && c.voxels > 0 {
            out.entry(label).or_default().add(c);
        }
        *c = FaceCounts::default();
    };
    for z in zr {
        for y in 0..h {
            for x in 0..w {
                let l = labels[idx(z, y, x)];
                if l != cur_label {
                    flush(cur_label, &mut cur, &mut out);
                    cur_label = l;
                }
                cur.voxels += 1;
                let differs = |o: Option<usize>| o.is_none_or(|i| labels[i] != l) as u64;
                let zf = differs((z > 0).then(|| idx(z - 1, y, x))) + differs((z + 1 < d).then(|| idx(z + 1, y, x)));
                let yf = differs((y > 0).then(|| idx(z, y - 1, x))) + differs((y + 1 < h).then(|| idx(z, y + 1, x)));
                let xf = differs((x > 0).then(|| idx(z, y, x - 1))) + differs((x + 1 < w).then(|| idx(z, y, x + 1)));
                cur.faces[0] += zf;
                cur.faces[1] += yf;
                cur.faces[2] += xf;
                cur.edges[0] += yf;
                cur.edges[1] += xf;
            }
        }
    }
    flush(cur_label, &mut cur, &mut out);
    out
}

/// Chunked reduction over a `uint32` label source.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct LabelMetrics;

impl ChunkReduce for LabelMetrics {
    type Summary = BTreeMap<u32, FaceCounts>;
    type Output = BTreeMap<u32, FaceCounts>;
    fn profile(&self, inputs: &[DType]) -> Result<OpProfile> {
        if inputs.first() != Some(&DType::U32) {
            return Err(Error::param("metrics need a uint32 label volume"));
        }
        Ok(OpProfile::local(1, 2.0, DType::U32))
    }
    fn reduce(&self, chunk: &Chunk<'_>) -> Result<Self::Summary> {
        let v = chunk.primary();
        let s = v.shape();
        Ok(tally(v.typed::<u32>()?, (s.z, s.y, s.x), chunk.local_interior()))
    }
    fn finish(&self, parts: Vec<Self::Summary>, _plan: &ChunkPlan) -> Result<Self::Output> {
        let mut total: BTreeMap<u32, FaceCounts> = BTreeMap::new();
        for part in parts {
            for (l, c) in part {
                total.entry(l).or_default().add(&c);
            }
        }
        Ok(total)
    }
}

pub fn label_metrics(labels: &LabelVolume) -> MetricsTable {
    let s = labels.shape();
    let counts = tally(labels.labels(), (s.z, s.y, s.x), 0..s.z);
    MetricsTable::from_counts(&counts, labels.spacing())
}

pub fn label_metrics_chunked(
    source: &dyn SlabSource,
    budget: &MemoryBudget,
    opts: &ExecOptions<'_>,
) -> Result<(MetricsTable, ExecutionReport)> {
    let (counts, report) = run_reduce(&[source], &LabelMetrics, budget, opts)?;
    Ok((MetricsTable::from_counts(&counts, source.spacing()), report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chunk::budget_for_interior;
    use crate::volume::{Shape, Volume};
    use rand::{Rng, SeedableRng};

    #[test]
    fn small_cube() {
        let labels = LabelVolume::from_fn(Shape::cube(10), |z, y, x| (z / 2 == 2 && y / 2 == 3 && x / 2 == 1) as u32);
        let t = label_metrics(&labels);
        let m = t.get(1).unwrap();
        assert_eq!((m.voxels, m.volume, m.surface_area, m.perimeter), (8, 8.0, 24.0, 16.0));
        assert_eq!(t.get(0).unwrap().voxels, 992);
    }

    #[test]
    fn spacing_scales_each_face() {
        let labels = LabelVolume::from_fn(Shape::cube(6), |z, y, x| ((1..3).contains(&z) && (1..3).contains(&y) && (1..3).contains(&x)) as u32)
            .with_spacing(Spacing([3.0, 2.0, 0.5]))
            .unwrap();
        let m = *label_metrics(&labels).get(1).unwrap();
        assert_eq!(m.volume, 8.0 * 3.0);
        // 8 faces of each orientation
        assert_eq!(m.surface_area, 8.0 * (2.0 * 0.5) + 8.0 * (3.0 * 0.5) + 8.0 * (3.0 * 2.0));
        assert_eq!(m.perimeter, 2.0 * (4.0 * 0.5 + 4.0 * 2.0));
    }

    #[test]
    fn chunked_matches_whole_and_fractions_sum() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
        let s = Shape::new(17, 9, 11);
        let labels = LabelVolume::from_fn(s, |_, _, _| rng.random_range(0..4u32));
        let whole = label_metrics(&labels);
        let p = LabelMetrics.profile(&[DType::U32]).unwrap();
        let budget = budget_for_interior(s, &[DType::U32], &p, 3);
        let vol: &Volume = labels.as_volume();
        let (chunked, report) = label_metrics_chunked(vol, &budget, &ExecOptions::default()).unwrap();
        assert!(report.chunk_count >= 4);
        assert_eq!(whole, chunked);
        let sum: f64 = whole.rows.iter().map(|r| r.fraction).sum();
        assert!((sum - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn csv_columns() {
        let labels = LabelVolume::from_fn(Shape::cube(2), |z, _, _| z as u32);
        let csv = label_metrics(&labels).to_csv().unwrap();
        assert!(csv.starts_with("label,voxels,volume,area,perimeter,fraction\n0,4,4,"));
    }
}
