//! Repeated timing and memory measurement over a ladder of volume sizes.

use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::{Rng, SeedableRng};
use serde::{Deserialize, Serialize};

use crate::chunk::{ExecOptions, MemoryBudget};
use crate::error::{Error, Result};
use crate::io::{crop, meta_path_for, save_volume, VolumeFile, VolumeMeta};
use crate::registry::{self, Params, Role};
use crate::source::SlabSource;
use crate::volume::{DType, Shape, Spacing, Volume};

pub const CSV_HEADER: &str = "size_bytes,mean_s,std_s,peak_bytes,residual_bytes";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchScenario {
    pub op: String,
    pub params: Params,
    /// Volume shapes in increasing size.
    pub ladder: Vec<Shape>,
    pub repeats: usize,
    pub budget_bytes: u64,
    pub dtype: DType,
    pub seed: u64,
    /// Reuse the loaded input across repeats instead of rereading it.
    pub warm: bool,
    /// Time file reads and writes too, not only the chunk loop.
    pub include_io: bool,
    /// When set, ladder volumes are Z-crops of this file instead of
    /// synthetic data.
    pub source: Option<PathBuf>,
    /// Scratch directory for ladder volumes.
    pub workdir: PathBuf,
}

impl BenchScenario {
    pub fn new(op: &str, ladder: Vec<Shape>, workdir: &Path) -> Self {
        BenchScenario {
            op: op.to_string(),
            params: Params::default(),
            ladder,
            repeats: 30,
            budget_bytes: 64 << 20,
            dtype: DType::U8,
            seed: 42,
            warm: false,
            include_io: false,
            source: None,
            workdir: workdir.to_path_buf(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.repeats == 0 {
            return Err(Error::param("repeats must be at least 1"));
        }
        if self.ladder.is_empty() {
            return Err(Error::param("size ladder is empty"));
        }
        if self.ladder.windows(2).any(|w| w[0].len() >= w[1].len()) {
            return Err(Error::param("size ladder must be strictly increasing"));
        }
        if self.ladder.iter().any(|s| s.is_empty()) {
            return Err(Error::param("ladder sizes must be non-empty"));
        }
        let info = registry::info(&self.op)?;
        if info.inputs != [Role::Volume] {
            return Err(Error::param(format!("{} needs inputs other than one volume; bench runs single-volume operators", self.op)));
        }
        registry::build(&self.op, &self.params)?;
        Ok(())
    }
}

/// One CSV row.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub size_bytes: u64,
    pub mean_s: f64,
    pub std_s: f64,
    /// Largest ledger peak above the job baseline over all repeats.
    pub peak_bytes: u64,
    /// Residual with the largest magnitude over all repeats.
    pub residual_bytes: i64,
}

pub fn to_csv(rows: &[BenchRow]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&format!("{},{},{},{},{}\n", r.size_bytes, r.mean_s, r.std_s, r.peak_bytes, r.residual_bytes));
    }
    out
}

/// Parses `N` (Z slices of a `default_xy` plane) or `ZxYxX`.
pub fn parse_shape(text: &str, default_xy: (usize, usize)) -> Result<Shape> {
    let parts: Vec<&str> = text.trim().split('x').collect();
    let num = |s: &str| {
        s.trim()
            .parse::<usize>()
            .map_err(|_| Error::param(format!("bad size {text:?}")))
    };
    match parts.as_slice() {
        [z] => Ok(Shape::new(num(z)?, default_xy.0, default_xy.1)),
        [z, y, x] => Ok(Shape::new(num(z)?, num(y)?, num(x)?)),
        _ => Err(Error::param(format!("size {text:?} is neither N nor ZxYxX"))),
    }
}

/// Free bytes on the file system holding `dir`.
pub fn available_disk(dir: &Path) -> Result<u64> {
    use std::os::unix::ffi::OsStrExt;
    let c = std::ffi::CString::new(dir.as_os_str().as_bytes()).map_err(|_| Error::param("path contains a NUL byte"))?;
    let mut st: libc::statvfs = unsafe { std::mem::zeroed() };
    // SAFETY: `c` is a valid C string and `st` is writable for the call.
    let rc = unsafe { libc::statvfs(c.as_ptr(), &mut st) };
    if rc != 0 {
        return Err(Error::io(dir, std::io::Error::last_os_error()));
    }
    Ok(st.f_bavail as u64 * st.f_frsize as u64)
}

/// Asks the kernel to drop cached pages of `path` so the next read is cold.
fn drop_page_cache(path: &Path) {
    use std::os::unix::io::AsRawFd;
    if let Ok(f) = std::fs::File::open(path) {
        // SAFETY: the descriptor is open for the duration of the call.
        unsafe {
            libc::posix_fadvise(f.as_raw_fd(), 0, 0, libc::POSIX_FADV_DONTNEED);
        }
    }
}

fn synthetic(shape: Shape, dtype: DType, seed: u64) -> Volume {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let v = Volume::from_fn(shape, |_, _, _| rng.random::<f32>());
    match dtype {
        DType::F32 => v,
        _ => {
            let (_, hi) = dtype.integer_range().unwrap_or((0.0, 1.0));
            let vals: Vec<f32> = v.typed::<f32>().expect("f32").iter().map(|&x| x * hi as f32).collect();
            Volume::from_vec(shape, vals).expect("shape").convert(dtype)
        }
    }
}

fn stats(times: &[f64]) -> (f64, f64) {
    let n = times.len() as f64;
    let mean = times.iter().sum::<f64>() / n;
    let var = if times.len() > 1 {
        times.iter().map(|t| (t - mean).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    (mean, var.sqrt())
}

/// Runs the scenario and returns one row per ladder size. Ladder volumes and
/// outputs live in `workdir` and are removed afterwards.
pub fn run_bench(scn: &BenchScenario) -> Result<Vec<BenchRow>> {
    scn.validate()?;
    std::fs::create_dir_all(&scn.workdir).map_err(|e| Error::io(&scn.workdir, e))?;
    let op = registry::build(&scn.op, &scn.params)?;
    let src_file = scn.source.as_ref().map(|p| VolumeFile::open_default(p)).transpose()?;
    let dtype = src_file.as_ref().map_or(scn.dtype, |f| f.meta().dtype);
    let out_dtype = op.out_dtype(&[dtype])?;

    let needed: u64 = scn.ladder.iter().map(|s| (s.len() * (dtype.size() + out_dtype.size())) as u64).max().unwrap_or(0);
    let available = available_disk(&scn.workdir)?;
    if needed > available {
        return Err(Error::InsufficientDisk { needed_bytes: needed, available_bytes: available });
    }

    let budget = MemoryBudget::fixed(scn.budget_bytes);
    let mut rows = Vec::with_capacity(scn.ladder.len());
    for (step, &shape) in scn.ladder.iter().enumerate() {
        let data = scn.workdir.join(format!("ladder-{step}.vol"));
        let out_path = scn.workdir.join(format!("ladder-{step}-out.vol"));
        match &src_file {
            Some(f) => {
                let s = f.meta().shape;
                if (shape.y, shape.x) != (s.y, s.x) || shape.z > s.z {
                    return Err(Error::param(format!("ladder size {shape} is not a Z-crop of {s}")));
                }
                crop(f, 0..shape.z, &data, &meta_path_for(&data))?;
            }
            None => save_volume(&synthetic(shape, dtype, scn.seed), &data, &meta_path_for(&data))?,
        }
        let input = VolumeFile::open_default(&data)?;
        let mut warm_copy: Option<Volume> = None;
        let mut times = Vec::with_capacity(scn.repeats);
        let (mut peak, mut residual) = (0u64, 0i64);
        for _ in 0..scn.repeats {
            if !scn.warm {
                drop_page_cache(&data);
            }
            let report = if scn.include_io {
                let t0 = Instant::now();
                let mut out = VolumeFile::create_default(&out_path, VolumeMeta::new(out_dtype, shape, Spacing::default()))?;
                let r = op.run(&[&input as &dyn SlabSource], &mut out, &budget, &ExecOptions::default())?;
                times.push(t0.elapsed().as_secs_f64());
                r
            } else {
                let loaded = match warm_copy.take() {
                    Some(v) => v,
                    None => input.load()?,
                };
                let (out, r) = op.run_volumes(&[&loaded], &budget, &ExecOptions::default())?;
                drop(out);
                if scn.warm {
                    warm_copy = Some(loaded);
                }
                times.push(r.total_seconds);
                r
            };
            peak = peak.max(report.peak_bytes);
            if report.residual_bytes.abs() > residual.abs() {
                residual = report.residual_bytes;
            }
        }
        drop(warm_copy);
        for p in [&data, &out_path] {
            let _ = std::fs::remove_file(p);
            let _ = std::fs::remove_file(meta_path_for(p));
        }
        let (mean_s, std_s) = stats(&times);
        rows.push(BenchRow {
            size_bytes: (shape.len() * dtype.size()) as u64,
            mean_s,
            std_s,
            peak_bytes: peak,
            residual_bytes: residual,
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_ladder_leaves_no_residual() {
        let dir = tempfile::tempdir().unwrap();
        let mut scn = BenchScenario::new("identity", vec![Shape::cube(16), Shape::cube(24)], dir.path());
        scn.repeats = 3;
        let rows = run_bench(&scn).unwrap();
        assert_eq!(rows.len(), 2);
        assert!(rows.iter().all(|r| r.residual_bytes == 0));
        let csv = to_csv(&rows);
        assert_eq!(csv.lines().next(), Some(CSV_HEADER));
        assert_eq!(csv.lines().count(), 3);
        assert_eq!(rows[1].size_bytes, 24 * 24 * 24);
    }

    #[test]
    fn scenario_validation() {
        let dir = tempfile::tempdir().unwrap();
        let mut scn = BenchScenario::new("mean", vec![Shape::cube(8), Shape::cube(8)], dir.path());
        assert!(scn.validate().is_err());
        scn.ladder = vec![Shape::cube(8)];
        scn.repeats = 0;
        assert!(scn.validate().is_err());
        scn.repeats = 1;
        scn.op = "watershed".into();
        assert!(scn.validate().is_err());
    }

    #[test]
    fn shapes_parse() {
        assert_eq!(parse_shape("32", (64, 48)).unwrap(), Shape::new(32, 64, 48));
        assert_eq!(parse_shape("4x5x6", (1, 1)).unwrap(), Shape::new(4, 5, 6));
        assert!(parse_shape("4x5", (1, 1)).is_err());
    }

    #[test]
    fn a_huge_ladder_aborts_before_running() {
        let dir = tempfile::tempdir().unwrap();
        let free = available_disk(dir.path()).unwrap();
        let side = ((free as f64).cbrt() as usize + 2).max(2);
        let mut scn = BenchScenario::new("identity", vec![Shape::new(side * 2, side, side)], dir.path());
        scn.repeats = 1;
        assert!(matches!(run_bench(&scn), Err(Error::InsufficientDisk { .. })));
        assert!(std::fs::read_dir(dir.path()).unwrap().next().is_none());
    }
}
