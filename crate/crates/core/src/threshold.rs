//! Global Otsu and local adaptive thresholds producing binary label volumes.
//!
//! Foreground is always `v > T`.

use std::cmp::Ordering;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::chunk::{
    run_reduce, run_two_pass, Chunk, ChunkPlan, ChunkReduce, ExecOptions, ExecutionReport, LocalOperator, MemoryBudget,
    OpProfile, TwoPassOperator,
};
use crate::error::{Error, Result};
use crate::filters::kernel::{clamp, pass_x, pass_y, pass_z_into};
use crate::ledger::Buffer;
use crate::source::{SlabSink, SlabSource};
use crate::volume::{DType, LabelVolume, Volume, Voxel};
use crate::with_voxels;

pub const DEFAULT_BINS: usize = 256;

/// Fixed-range histogram with 64-bit counts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub lo: f64,
    pub hi: f64,
    /// Integer histograms bin whole values `lo..=hi`; float histograms bin
    /// `[lo, hi]` with right-closed bins.
    pub integer: bool,
    pub counts: Vec<u64>,
}

impl Histogram {
    pub fn new(bins: usize, lo: f64, hi: f64, integer: bool) -> Result<Self> {
        if bins < 2 {
            return Err(Error::param("a histogram needs at least 2 bins"));
        }
        if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
            return Err(Error::param(format!("invalid histogram range ({lo}, {hi})")));
        }
        Ok(Histogram {
            lo,
            hi,
            integer,
            counts: vec![0; bins],
        })
    }

    /// Histogram over the full range of an integer dtype.
    pub fn for_dtype(dtype: DType, bins: usize) -> Result<Self> {
        let (lo, hi) = dtype
            .integer_range()
            .ok_or_else(|| Error::param("float volumes need an explicit histogram range"))?;
        Self::new(bins, lo, hi, true)
    }

    pub fn bins(&self) -> usize {
        self.counts.len()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    #[inline]
    pub fn bin_of(&self, v: f64) -> usize {
        let n = self.bins();
        if self.integer {
            let span = self.hi - self.lo + 1.0;
            (((v - self.lo) * n as f64 / span).floor().max(0.0) as usize).min(n - 1)
        } else {
            let w = (self.hi - self.lo) / n as f64;
            if w == 0.0 {
                return 0;
            }
            let k = ((v - self.lo) / w).ceil() as isize - 1;
            k.clamp(0, n as isize - 1) as usize
        }
    }

    /// Largest value falling in bins `0..=k`: the threshold for a split
    /// after bin `k`.
    pub fn upper_edge(&self, k: usize) -> f64 {
        let n = self.bins() as f64;
        if self.integer {
            let span = self.hi - self.lo + 1.0;
            self.lo + ((k as f64 + 1.0) * span / n).ceil() - 1.0
        } else {
            self.lo + (k as f64 + 1.0) * (self.hi - self.lo) / n
        }
    }

    pub fn add<T: Voxel>(&mut self, values: &[T]) {
        for v in values {
            let b = self.bin_of(v.to_f64());
            self.counts[b] += 1;
        }
    }

    pub fn add_volume(&mut self, v: &Volume) {
        with_voxels!(v.data(), b => self.add(b))
    }

    pub fn merge(&mut self, other: &Histogram) -> Result<()> {
        if other.counts.len() != self.counts.len() || other.lo != self.lo || other.hi != self.hi {
            return Err(Error::param("cannot merge histograms with different binning"));
        }
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
        Ok(())
    }
}

// Arbitrary-precision unsigned products, only for comparing Otsu scores.
fn mul_limbs(a: &[u64], b: &[u64]) -> Vec<u64> {
    let mut out = vec![0u64; a.len() + b.len()];
    for (i, &x) in a.iter().enumerate() {
        let mut carry = 0u128;
        for (j, &y) in b.iter().enumerate() {
            let cur = out[i + j] as u128 + x as u128 * y as u128 + carry;
            out[i + j] = cur as u64;
            carry = cur >> 64;
        }
        out[i + b.len()] = carry as u64;
    }
    out
}

fn limbs(v: u128) -> [u64; 2] {
    [v as u64, (v >> 64) as u64]
}

fn cmp_limbs(a: &[u64], b: &[u64]) -> Ordering {
    let n = a.len().max(b.len());
    for i in (0..n).rev() {
        let x = a.get(i).copied().unwrap_or(0);
        let y = b.get(i).copied().unwrap_or(0);
        match x.cmp(&y) {
            Ordering::Equal => continue,
            o => return o,
        }
    }
    Ordering::Equal
}

/// Split chosen by Otsu's method.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OtsuSplit {
    /// Last bin of the background class.
    pub bin: usize,
    /// Threshold value; foreground is `v > threshold`.
    pub threshold: f64,
}

/// Bin index maximizing the between-class variance, ties to the smallest.
///
/// Scores are compared exactly. With bin index `i` as the class value,
/// `σ_b² ∝ A² / B` where `A = s0·n1 − s1·n0` and `B = n0·n1`.
pub fn otsu_bin(counts: &[u64]) -> Result<usize> {
    let n: u128 = counts.iter().map(|&c| c as u128).sum();
    let s: u128 = counts.iter().enumerate().map(|(i, &c)| i as u128 * c as u128).sum();
    let occupied = counts.iter().filter(|&&c| c > 0).count();
    if occupied < 2 {
        return Err(Error::DegenerateHistogram(format!(
            "{occupied} occupied bin(s); a split needs two"
        )));
    }
    let mut best: Option<(usize, [u64; 2], [u64; 2])> = None;
    let (mut n0, mut s0) = (0u128, 0u128);
    for (k, &c) in counts.iter().enumerate().take(counts.len() - 1) {
        n0 += c as u128;
        s0 += k as u128 * c as u128;
        let n1 = n - n0;
        if n0 == 0 || n1 == 0 {
            continue;
        }
        let s1 = s - s0;
        // μ0 ≤ μ1, so s1·n0 ≥ s0·n1
        let a = s1 * n0 - s0 * n1;
        let b = n0 * n1;
        let better = match &best {
            None => true,
            Some((_, ba, bb)) => {
                let lhs = mul_limbs(&mul_limbs(&limbs(a), &limbs(a)), bb);
                let rhs = mul_limbs(&mul_limbs(ba, ba), &limbs(b));
                cmp_limbs(&lhs, &rhs) == Ordering::Greater
            }
        };
        if better {
            best = Some((k, limbs(a), limbs(b)));
        }
    }
    best.map(|(k, _, _)| k)
        .ok_or_else(|| Error::DegenerateHistogram("no split separates two classes".into()))
}

pub fn otsu_histogram(h: &Histogram) -> Result<OtsuSplit> {
    let bin = otsu_bin(&h.counts)?;
    Ok(OtsuSplit {
        bin,
        threshold: h.upper_edge(bin),
    })
}

/// Histogram binning a volume of this dtype: the dtype range for integers,
/// `(min, max)` for floats.
pub fn histogram_for(volume: &Volume, bins: usize) -> Result<Histogram> {
    match volume.dtype() {
        DType::F32 => {
            let (lo, hi) = volume.min_max();
            if !(hi > lo) {
                return Err(Error::DegenerateHistogram("constant volume".into()));
            }
            Histogram::new(bins, lo, hi, false)
        }
        d => Histogram::for_dtype(d, bins),
    }
}

/// Otsu threshold of a whole volume.
pub fn otsu(volume: &Volume, bins: usize) -> Result<f64> {
    let mut h = histogram_for(volume, bins)?;
    h.add_volume(volume);
    Ok(otsu_histogram(&h)?.threshold)
}

/// Binary labels: 1 where `v > t`.
pub fn apply_threshold(volume: &Volume, t: f64) -> LabelVolume {
    let labels: Buffer<u32> = with_voxels!(volume.data(), b => b
        .par_iter()
        .map(|v| (v.to_f64() > t) as u32)
        .collect::<Vec<_>>()
        .into_iter()
        .collect());
    LabelVolume::from_volume(Volume::from_buffer(volume.shape(), volume.spacing(), labels).expect("same shape"))
        .expect("uint32 labels")
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ApplyThreshold {
    pub threshold: f64,
}

impl LocalOperator for ApplyThreshold {
    fn profile(&self, inputs: &[DType]) -> Result<OpProfile> {
        Ok(OpProfile::local(0, crate::filters::scratch(inputs, 4), DType::U32))
    }
    fn apply(&self, chunk: &Chunk<'_>) -> Result<Volume> {
        Ok(apply_threshold(chunk.primary(), self.threshold).into_volume())
    }
}

/// Chunked min/max of a float volume.
struct MinMax;

impl ChunkReduce for MinMax {
    type Summary = (f64, f64);
    type Output = (f64, f64);
    fn profile(&self, inputs: &[DType]) -> Result<OpProfile> {
        Ok(OpProfile::local(0, 2.0, inputs[0]))
    }
    fn reduce(&self, chunk: &Chunk<'_>) -> Result<(f64, f64)> {
        let s = chunk.primary().slab(chunk.local_interior())?;
        Ok(s.min_max())
    }
    fn finish(&self, parts: Vec<(f64, f64)>, _plan: &ChunkPlan) -> Result<(f64, f64)> {
        Ok(parts
            .into_iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |a, b| (a.0.min(b.0), a.1.max(b.1))))
    }
}

/// Two-pass Otsu: histogram reduce, then threshold.
#[derive(Debug, Clone, PartialEq)]
pub struct Otsu {
    /// Empty histogram defining the binning.
    pub template: Histogram,
}

impl ChunkReduce for Otsu {
    type Summary = Histogram;
    type Output = OtsuSplit;
    fn profile(&self, inputs: &[DType]) -> Result<OpProfile> {
        Ok(OpProfile::two_pass(0, crate::filters::scratch(inputs, 4), DType::U32))
    }
    fn reduce(&self, chunk: &Chunk<'_>) -> Result<Histogram> {
        let mut h = self.template.clone();
        let (n, r) = (chunk.primary().shape().slice_len(), chunk.local_interior());
        with_voxels!(chunk.primary().data(), b => h.add(&b[r.start * n..r.end * n]));
        Ok(h)
    }
    fn finish(&self, parts: Vec<Histogram>, _plan: &ChunkPlan) -> Result<OtsuSplit> {
        let mut total = self.template.clone();
        for p in &parts {
            total.merge(p)?;
        }
        otsu_histogram(&total)
    }
}

impl TwoPassOperator for Otsu {
    fn apply(&self, chunk: &Chunk<'_>, split: &OtsuSplit) -> Result<Volume> {
        Ok(apply_threshold(chunk.primary(), split.threshold).into_volume())
    }
}

/// Chunked Otsu binarization of `source` into `sink` (a `uint32` volume).
/// Float sources take an extra min/max pass to fix the binning.
pub fn otsu_chunked(
    source: &dyn SlabSource,
    bins: usize,
    sink: &mut dyn SlabSink,
    budget: &MemoryBudget,
    opts: &ExecOptions<'_>,
) -> Result<(OtsuSplit, ExecutionReport)> {
    let template = match source.dtype() {
        DType::F32 => {
            let ((lo, hi), _) = run_reduce(&[source], &MinMax, budget, opts)?;
            if !(hi > lo) {
                return Err(Error::DegenerateHistogram("constant volume".into()));
            }
            Histogram::new(bins, lo, hi, false)?
        }
        d => Histogram::for_dtype(d, bins)?,
    };
    run_two_pass(&[source], &Otsu { template }, sink, budget, opts)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LocalKind {
    Mean,
    Median,
    Gaussian,
    Niblack,
    Sauvola,
}

impl LocalKind {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "mean" => Ok(LocalKind::Mean),
            "median" => Ok(LocalKind::Median),
            "gaussian" => Ok(LocalKind::Gaussian),
            "niblack" => Ok(LocalKind::Niblack),
            "sauvola" => Ok(LocalKind::Sauvola),
            other => Err(Error::param(format!("unknown local threshold kind {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LocalThresholdParams {
    pub kind: LocalKind,
    /// Window radius; the window is `(2w+1)³`.
    pub window: usize,
    pub k: f64,
    /// Sauvola dynamic range; `None` picks the dtype default.
    pub r: Option<f64>,
    /// Offset subtracted by the mean, median and gaussian kinds.
    pub c: f64,
}

impl LocalThresholdParams {
    pub fn new(kind: LocalKind, window: usize) -> Self {
        LocalThresholdParams {
            kind,
            window,
            k: 0.2,
            r: None,
            c: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.window == 0 {
            return Err(Error::param("window radius must be at least 1"));
        }
        if let Some(r) = self.r {
            if !(r > 0.0) {
                return Err(Error::param(format!("R must be positive, got {r}")));
            }
        }
        if !self.k.is_finite() || !self.c.is_finite() {
            return Err(Error::param("k and c must be finite"));
        }
        Ok(())
    }
}

/// Default Sauvola range: half the value range of the dtype, 0.5 for floats
/// (assumed normalized).
pub fn default_sauvola_range(dtype: DType) -> f64 {
    match dtype.integer_range() {
        Some((lo, hi)) => (hi - lo + 1.0) / 2.0,
        None => 0.5,
    }
}

pub fn niblack_threshold(m: f64, s: f64, k: f64) -> f64 {
    m + k * s
}

pub fn sauvola_threshold(m: f64, s: f64, k: f64, r: f64) -> f64 {
    m * (1.0 + k * (s / r - 1.0))
}

/// Separable windowed weighted sums of `values` with clamped borders.
fn window_sums(s: crate::volume::Shape, values: Buffer<f64>, taps: &[f64]) -> Buffer<f64> {
    let mut tmp = values;
    pass_x(s, &mut tmp, taps);
    pass_y(s, &mut tmp, taps);
    let mut out = Buffer::<f64>::zeroed(s.len());
    pass_z_into(s, &tmp, taps, &mut out, |a| a);
    out
}

fn window_medians(volume: &Volume, w: usize) -> Buffer<f64> {
    let s = volume.shape();
    let src = volume.to_f64_buffer();
    let wi = w as isize;
    let side = 2 * w + 1;
    let mid = side * side * side / 2;
    let mut out = Buffer::<f64>::zeroed(s.len());
    out.par_chunks_mut(s.slice_len()).enumerate().for_each_init(
        || Vec::with_capacity(side * side * side),
        |win, (z, plane)| {
            for y in 0..s.y {
                for x in 0..s.x {
                    win.clear();
                    for dz in -wi..=wi {
                        for dy in -wi..=wi {
                            for dx in -wi..=wi {
                                win.push(src[s.index(
                                    clamp(z as isize + dz, s.z),
                                    clamp(y as isize + dy, s.y),
                                    clamp(x as isize + dx, s.x),
                                )]);
                            }
                        }
                    }
                    let (_, m, _) = win.select_nth_unstable_by(mid, |a, b| a.total_cmp(b));
                    plane[y * s.x + x] = *m;
                }
            }
        },
    );
    out
}

/// Per-voxel threshold surface `T` for a volume.
pub fn local_threshold_surface(volume: &Volume, p: &LocalThresholdParams) -> Result<Buffer<f64>> {
    p.validate()?;
    let s = volume.shape();
    let w = p.window;
    let ones = vec![1.0; 2 * w + 1];
    let count = (ones.len() as f64).powi(3);
    let t: Buffer<f64> = match p.kind {
        LocalKind::Mean => {
            let sums = window_sums(s, volume.to_f64_buffer(), &ones);
            sums.iter().map(|&v| v / count - p.c).collect()
        }
        LocalKind::Median => window_medians(volume, w).iter().map(|&m| m - p.c).collect(),
        LocalKind::Gaussian => {
            let sigma = w as f64 / 2.0;
            let wi = w as isize;
            let mut taps: Vec<f64> = (-wi..=wi)
                .map(|i| (-((i * i) as f64) / (2.0 * sigma * sigma)).exp())
                .collect();
            let total: f64 = taps.iter().sum();
            taps.iter_mut().for_each(|t| *t /= total);
            window_sums(s, volume.to_f64_buffer(), &taps)
                .iter()
                .map(|&m| m - p.c)
                .collect()
        }
        LocalKind::Niblack | LocalKind::Sauvola => {
            let vals = volume.to_f64_buffer();
            let squares: Buffer<f64> = vals.iter().map(|v| v * v).collect();
            let sums = window_sums(s, vals, &ones);
            let sq = window_sums(s, squares, &ones);
            let r = p.r.unwrap_or_else(|| default_sauvola_range(volume.dtype()));
            sums.iter()
                .zip(sq.iter())
                .map(|(&a, &b)| {
                    let m = a / count;
                    let sd = (b / count - m * m).max(0.0).sqrt();
                    match p.kind {
                        LocalKind::Niblack => niblack_threshold(m, sd, p.k),
                        _ => sauvola_threshold(m, sd, p.k, r),
                    }
                })
                .collect()
        }
    };
    Ok(t)
}

pub fn local_threshold(volume: &Volume, p: &LocalThresholdParams) -> Result<LabelVolume> {
    let t = local_threshold_surface(volume, p)?;
    let labels: Buffer<u32> = with_voxels!(volume.data(), b => b
        .iter()
        .zip(t.iter())
        .map(|(v, &t)| (v.to_f64() > t) as u32)
        .collect());
    LabelVolume::from_volume(Volume::from_buffer(volume.shape(), volume.spacing(), labels)?)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalThreshold(pub LocalThresholdParams);

impl LocalOperator for LocalThreshold {
    fn profile(&self, inputs: &[DType]) -> Result<OpProfile> {
        self.0.validate()?;
        Ok(OpProfile::local(self.0.window, crate::filters::scratch(inputs, 8 * 4 + 4), DType::U32))
    }
    fn apply(&self, chunk: &Chunk<'_>) -> Result<Volume> {
        Ok(local_threshold(chunk.primary(), &self.0)?.into_volume())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chunk::{execute_chunked_with, execute_two_pass};
    use crate::volume::Shape;
    use rand::{Rng, SeedableRng};

    #[test]
    fn two_value_volume_takes_smallest_tie() {
        let v = Volume::from_fn(Shape::new(1, 1, 10), |_, _, x| if x < 6 { 10u8 } else { 200 });
        assert_eq!(otsu(&v, 256).unwrap(), 10.0);
        let mask = apply_threshold(&v, 10.0);
        assert_eq!(mask.labels().iter().sum::<u32>(), 4);
    }

    #[test]
    fn constant_volume_is_degenerate() {
        let v = Volume::filled(Shape::cube(3), 7u16);
        assert!(matches!(otsu(&v, 256), Err(Error::DegenerateHistogram(_))));
        let f = Volume::filled(Shape::cube(3), 0.5f32);
        assert!(matches!(otsu(&f, 256), Err(Error::DegenerateHistogram(_))));
    }

    #[test]
    fn uint16_threshold_is_bin_edge() {
        let v = Volume::from_fn(Shape::new(1, 2, 2), |_, y, _| if y == 0 { 100u16 } else { 60000 });
        assert_eq!(otsu(&v, 256).unwrap(), 255.0);
    }

    #[test]
    fn float_binning_is_right_closed() {
        let h = Histogram::new(4, 0.0, 4.0, false).unwrap();
        assert_eq!(h.bin_of(0.0), 0);
        assert_eq!(h.bin_of(1.0), 0);
        assert_eq!(h.bin_of(1.5), 1);
        assert_eq!(h.bin_of(4.0), 3);
        assert_eq!(h.upper_edge(0), 1.0);
    }

    #[test]
    fn exact_comparison_handles_huge_counts() {
        let counts = [u32::MAX as u64 * 1000, 0, 0, u32::MAX as u64 * 999, 5];
        assert_eq!(otsu_bin(&counts).unwrap(), 0);
    }

    #[test]
    fn merge_order_does_not_matter() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
        let parts: Vec<Histogram> = (0..5)
            .map(|_| {
                let mut h = Histogram::for_dtype(DType::U8, 256).unwrap();
                let vals: Vec<u8> = (0..200).map(|_| rng.random()).collect();
                h.add(&vals);
                h
            })
            .collect();
        let fold = |order: &[usize]| {
            let mut t = Histogram::for_dtype(DType::U8, 256).unwrap();
            for &i in order {
                t.merge(&parts[i]).unwrap();
            }
            otsu_histogram(&t).unwrap()
        };
        assert_eq!(fold(&[0, 1, 2, 3, 4]), fold(&[4, 2, 0, 3, 1]));
    }

    #[test]
    fn chunked_otsu_matches_whole() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(4);
        let v = Volume::from_fn(Shape::new(12, 5, 5), |z, _, _| if z < 6 { rng.random_range(0..80u8) } else { rng.random_range(120..255u8) });
        let t = otsu(&v, 256).unwrap();
        let whole = apply_threshold(&v, t);
        let opts = ExecOptions {
            plan: Some(ChunkPlan::uniform(12, 4, 0).unwrap()),
            ..Default::default()
        };
        let op = Otsu {
            template: Histogram::for_dtype(DType::U8, 256).unwrap(),
        };
        let (out, split, report) = execute_two_pass(&[&v], &op, &MemoryBudget::fixed(1 << 30), &opts).unwrap();
        assert_eq!(split.threshold, t);
        assert_eq!(&out, whole.as_volume());
        assert_eq!(report.chunk_count, 3);
        assert_eq!(report.passes, 2);
    }

    #[test]
    fn chunked_float_otsu_matches_whole() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let v = Volume::from_fn(Shape::new(9, 4, 4), |_, _, _| rng.random::<f32>());
        let t = otsu(&v, 256).unwrap();
        let mut out = Volume::zeros(v.shape(), DType::U32);
        let opts = ExecOptions {
            plan: Some(ChunkPlan::uniform(9, 2, 0).unwrap()),
            ..Default::default()
        };
        let (split, _) = otsu_chunked(&v, 256, &mut out, &MemoryBudget::fixed(1 << 30), &opts).unwrap();
        assert_eq!(split.threshold, t);
        assert_eq!(&out, apply_threshold(&v, t).as_volume());
    }

    #[test]
    fn formula_arithmetic() {
        assert_eq!(niblack_threshold(100.0, 30.0, 0.2), 106.0);
        assert_eq!(sauvola_threshold(100.0, 30.0, 0.2, 128.0), 84.6875);
        assert_eq!(default_sauvola_range(DType::U8), 128.0);
        assert_eq!(default_sauvola_range(DType::U16), 32768.0);
    }

    #[test]
    fn local_mean_matches_window_loop() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(21);
        let s = Shape::new(10, 9, 8);
        let v = Volume::from_fn(s, |_, _, _| rng.random::<u8>());
        let p = LocalThresholdParams { c: 3.0, ..LocalThresholdParams::new(LocalKind::Mean, 1) };
        let mask = local_threshold(&v, &p).unwrap();
        for z in 0..s.z {
            for y in 0..s.y {
                for x in 0..s.x {
                    let mut sum = 0.0;
                    for dz in -1..=1isize {
                        for dy in -1..=1isize {
                            for dx in -1..=1isize {
                                sum += v.get_f64(clamp(z as isize + dz, s.z), clamp(y as isize + dy, s.y), clamp(x as isize + dx, s.x));
                            }
                        }
                    }
                    let expect = (v.get_f64(z, y, x) > sum / 27.0 - 3.0) as u32;
                    assert_eq!(mask.get(z, y, x), expect);
                }
            }
        }
    }

    #[test]
    fn larger_offset_never_shrinks_foreground() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(8);
        let v = Volume::from_fn(Shape::cube(8), |_, _, _| rng.random::<u8>());
        let fg = |c: f64| {
            let p = LocalThresholdParams { c, ..LocalThresholdParams::new(LocalKind::Mean, 1) };
            local_threshold(&v, &p).unwrap()
        };
        let (a, b) = (fg(-5.0), fg(5.0));
        // T = m − c, so raising c lowers T
        for (x, y) in a.labels().iter().zip(b.labels()) {
            assert!(x <= y);
        }
    }

    #[test]
    fn every_local_kind_is_plan_invariant() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2);
        let v = Volume::from_fn(Shape::new(11, 5, 6), |_, _, _| rng.random::<u8>());
        for kind in [LocalKind::Mean, LocalKind::Median, LocalKind::Gaussian, LocalKind::Niblack, LocalKind::Sauvola] {
            let op = LocalThreshold(LocalThresholdParams::new(kind, 2));
            let whole = local_threshold(&v, &op.0).unwrap();
            let opts = ExecOptions {
                plan: Some(ChunkPlan::uniform(11, 3, 2).unwrap()),
                ..Default::default()
            };
            let (out, _) = execute_chunked_with(&[&v], &op, &MemoryBudget::fixed(1 << 30), &opts).unwrap();
            assert_eq!(&out, whole.as_volume(), "{kind:?}");
        }
    }

    #[test]
    fn invalid_kind_is_parameter_error() {
        assert!(matches!(LocalKind::parse("bernsen"), Err(Error::Parameter(_))));
    }
}
