//! Raw `.vol` volumes with a `.vol.meta` sidecar.
//!
//! The data file is a little-endian, row-major (x fastest) dump of the voxels,
//! optionally preceded by `offset_bytes` of header that is skipped. The
//! sidecar is TOML with these keys:
//!
//! ```toml
//! dtype = "uint16"          # uint8 | uint16 | float32 (uint32 for labels)
//! shape = [64, 128, 128]    # z, y, x voxel counts
//! spacing = [1.0, 0.5, 0.5] # z, y, x physical size of a voxel
//! byte_order = "little"
//! offset_bytes = 0
//! description = "free text"
//! ```

use std::fs::{self, File, OpenOptions};
use std::io::{Read, Seek, SeekFrom, Write};
use std::ops::Range;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ledger::Buffer;
use crate::source::{RowStore, SlabSink, SlabSource};
use crate::volume::{DType, Shape, Spacing, Volume, Voxel, VoxelData};
use crate::with_voxels;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VolumeMeta {
    pub dtype: DType,
    pub shape: Shape,
    pub spacing: Spacing,
    pub byte_order: ByteOrder,
    pub offset_bytes: u64,
    pub description: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ByteOrder {
    Little,
}

#[derive(Serialize, Deserialize)]
struct MetaFile {
    dtype: String,
    shape: [usize; 3],
    #[serde(default = "unit_spacing")]
    spacing: [f64; 3],
    #[serde(default = "little")]
    byte_order: String,
    #[serde(default)]
    offset_bytes: u64,
    #[serde(default)]
    description: String,
}

fn unit_spacing() -> [f64; 3] {
    [1.0; 3]
}

fn little() -> String {
    "little".into()
}

impl VolumeMeta {
    pub fn new(dtype: DType, shape: Shape, spacing: Spacing) -> Self {
        VolumeMeta {
            dtype,
            shape,
            spacing,
            byte_order: ByteOrder::Little,
            offset_bytes: 0,
            description: String::new(),
        }
    }

    pub fn of(volume: &Volume) -> Self {
        VolumeMeta::new(volume.dtype(), volume.shape(), volume.spacing())
    }

    pub fn data_bytes(&self) -> u64 {
        (self.shape.len() * self.dtype.size()) as u64
    }

    pub fn slice_bytes(&self) -> u64 {
        (self.shape.slice_len() * self.dtype.size()) as u64
    }

    pub fn to_toml(&self) -> String {
        let file = MetaFile {
            dtype: self.dtype.name().to_string(),
            shape: self.shape.as_array(),
            spacing: self.spacing.0,
            byte_order: "little".into(),
            offset_bytes: self.offset_bytes,
            description: self.description.clone(),
        };
        toml::to_string(&file).expect("meta serializes")
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let file: MetaFile = toml::from_str(text)
            .map_err(|e| Error::CorruptInput(format!("unreadable meta file: {e}")))?;
        let dtype = DType::parse(&file.dtype)?;
        if file.byte_order != "little" {
            return Err(Error::UnsupportedFormat(format!(
                "byte order {:?} (only little-endian is supported)",
                file.byte_order
            )));
        }
        let spacing = Spacing(file.spacing);
        spacing
            .validate()
            .map_err(|e| Error::CorruptInput(e.to_string()))?;
        let [z, y, x] = file.shape;
        Ok(VolumeMeta {
            dtype,
            shape: Shape::new(z, y, x),
            spacing,
            byte_order: ByteOrder::Little,
            offset_bytes: file.offset_bytes,
            description: file.description,
        })
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_toml()).map_err(|e| Error::io(path, e))
    }
}

/// Conventional sidecar path: `a.vol` → `a.vol.meta`.
pub fn meta_path_for(data_path: &Path) -> PathBuf {
    let mut s = data_path.as_os_str().to_owned();
    s.push(".meta");
    PathBuf::from(s)
}

pub fn load_volume(data_path: &Path, meta_path: &Path) -> Result<Volume> {
    VolumeFile::open(data_path, meta_path)?.load()
}

pub fn save_volume(volume: &Volume, data_path: &Path, meta_path: &Path) -> Result<()> {
    let mut bytes = Vec::with_capacity(volume.byte_len() as usize);
    with_voxels!(volume.data(), b => for v in b.iter() { v.write_le(&mut bytes) });
    fs::write(data_path, &bytes).map_err(|e| Error::io(data_path, e))?;
    VolumeMeta::of(volume).write(meta_path)
}

fn decode(dtype: DType, bytes: &[u8]) -> VoxelData {
    fn typed<T: Voxel>(bytes: &[u8]) -> VoxelData {
        let w = std::mem::size_of::<T>();
        T::wrap(bytes.chunks_exact(w).map(T::read_le).collect::<Buffer<T>>())
    }
    match dtype {
        DType::U8 => VoxelData::U8(Buffer::from_vec(bytes.to_vec())),
        DType::U16 => typed::<u16>(bytes),
        DType::U32 => typed::<u32>(bytes),
        DType::F32 => typed::<f32>(bytes),
    }
}

fn encode(data: &VoxelData, range: Range<usize>) -> Vec<u8> {
    let mut out = Vec::new();
    with_voxels!(data, b => {
        out.reserve(range.len() * std::mem::size_of_val(&b[0]));
        for v in &b[range] {
            v.write_le(&mut out);
        }
    });
    out
}

/// A volume on disk, readable and writable slab by slab.
#[derive(Debug, Clone)]
pub struct VolumeFile {
    data_path: PathBuf,
    meta_path: PathBuf,
    meta: VolumeMeta,
}

impl VolumeFile {
    /// Opens an existing volume, validating the data size against the sidecar.
    pub fn open(data_path: &Path, meta_path: &Path) -> Result<Self> {
        let meta = VolumeMeta::read(meta_path)?;
        let actual = fs::metadata(data_path)
            .map_err(|e| Error::io(data_path, e))?
            .len();
        let expected = meta.offset_bytes + meta.data_bytes();
        if actual != expected {
            return Err(Error::CorruptInput(format!(
                "{} holds {actual} bytes but {} {} voxels need {expected}",
                data_path.display(),
                meta.shape,
                meta.dtype
            )));
        }
        Ok(VolumeFile {
            data_path: data_path.to_path_buf(),
            meta_path: meta_path.to_path_buf(),
            meta,
        })
    }

    pub fn open_default(data_path: &Path) -> Result<Self> {
        Self::open(data_path, &meta_path_for(data_path))
    }

    /// Creates a zero-filled volume file with the given metadata.
    pub fn create(data_path: &Path, meta_path: &Path, mut meta: VolumeMeta) -> Result<Self> {
        meta.offset_bytes = 0;
        let f = File::create(data_path).map_err(|e| Error::io(data_path, e))?;
        f.set_len(meta.data_bytes())
            .map_err(|e| Error::io(data_path, e))?;
        meta.write(meta_path)?;
        Ok(VolumeFile {
            data_path: data_path.to_path_buf(),
            meta_path: meta_path.to_path_buf(),
            meta,
        })
    }

    pub fn create_default(data_path: &Path, meta: VolumeMeta) -> Result<Self> {
        Self::create(data_path, &meta_path_for(data_path), meta)
    }

    pub fn meta(&self) -> &VolumeMeta {
        &self.meta
    }

    pub fn data_path(&self) -> &Path {
        &self.data_path
    }

    pub fn meta_path(&self) -> &Path {
        &self.meta_path
    }

    pub fn load(&self) -> Result<Volume> {
        self.read_slab(0..self.meta.shape.z)
    }

    fn read_bytes(&self, offset: u64, len: usize) -> Result<Vec<u8>> {
        let mut f = File::open(&self.data_path).map_err(|e| Error::io(&self.data_path, e))?;
        f.seek(SeekFrom::Start(self.meta.offset_bytes + offset))
            .map_err(|e| Error::io(&self.data_path, e))?;
        let mut buf = vec![0u8; len];
        f.read_exact(&mut buf)
            .map_err(|e| Error::io(&self.data_path, e))?;
        Ok(buf)
    }

    fn write_bytes(&self, offset: u64, bytes: &[u8]) -> Result<()> {
        let mut f = OpenOptions::new()
            .write(true)
            .open(&self.data_path)
            .map_err(|e| Error::io(&self.data_path, e))?;
        f.seek(SeekFrom::Start(self.meta.offset_bytes + offset))
            .map_err(|e| Error::io(&self.data_path, e))?;
        f.write_all(bytes)
            .map_err(|e| Error::io(&self.data_path, e))
    }

    /// Reads the 2D plane `index` across `axis`, as a volume with one
    /// slice of shape (1, slower, faster).
    pub fn read_plane(&self, axis: crate::slice::Axis, index: usize) -> Result<Volume> {
        use crate::slice::Axis;
        let s = self.meta.shape;
        crate::slice::check_index(s, axis, index)?;
        match axis {
            Axis::Z => self.read_slab(index..index + 1),
            Axis::Y | Axis::X => {
                let (h, w) = crate::slice::plane_dims(s, axis);
                let mut plane = Volume::zeros(Shape::new(1, h, w), self.meta.dtype);
                for z in 0..s.z {
                    let slab = self.read_slab(z..z + 1)?;
                    copy_plane_row(&slab, &mut plane, axis, index, z);
                }
                Ok(plane.with_spacing(self.meta.spacing)?)
            }
        }
    }

    /// Writes a plane previously obtained from [`read_plane`](Self::read_plane).
    pub fn write_plane(&self, axis: crate::slice::Axis, index: usize, plane: &Volume) -> Result<()> {
        use crate::slice::Axis;
        let s = self.meta.shape;
        crate::slice::check_index(s, axis, index)?;
        let (h, w) = crate::slice::plane_dims(s, axis);
        if plane.shape() != Shape::new(1, h, w) || plane.dtype() != self.meta.dtype {
            return Err(Error::Shape(format!(
                "plane {} {} does not fit {axis:?} plane of {s}",
                plane.shape(),
                plane.dtype()
            )));
        }
        match axis {
            Axis::Z => {
                let mut me = self.clone();
                me.write_slab(index, plane, 0..1)
            }
            Axis::Y | Axis::X => {
                let mut me = self.clone();
                for z in 0..s.z {
                    let mut slab = self.read_slab(z..z + 1)?;
                    paste_plane_row(plane, &mut slab, axis, index, z);
                    me.write_slab(z, &slab, 0..1)?;
                }
                Ok(())
            }
        }
    }
}

fn copy_plane_row(slab: &Volume, plane: &mut Volume, axis: crate::slice::Axis, index: usize, z: usize) {
    let s = slab.shape();
    let pw = plane.shape().x;
    match (slab.data(), plane.data_mut()) {
        (VoxelData::U8(a), VoxelData::U8(b)) => copy_row(a, b, s, pw, axis, index, z),
        (VoxelData::U16(a), VoxelData::U16(b)) => copy_row(a, b, s, pw, axis, index, z),
        (VoxelData::U32(a), VoxelData::U32(b)) => copy_row(a, b, s, pw, axis, index, z),
        (VoxelData::F32(a), VoxelData::F32(b)) => copy_row(a, b, s, pw, axis, index, z),
        _ => unreachable!("plane dtype matches file"),
    }
}

fn copy_row<T: Copy>(src: &[T], dst: &mut [T], s: Shape, pw: usize, axis: crate::slice::Axis, index: usize, z: usize) {
    use crate::slice::Axis;
    match axis {
        Axis::Y => dst[z * pw..(z + 1) * pw].copy_from_slice(&src[index * s.x..(index + 1) * s.x]),
        Axis::X => {
            for y in 0..s.y {
                dst[z * pw + y] = src[y * s.x + index];
            }
        }
        Axis::Z => unreachable!(),
    }
}

fn paste_plane_row(plane: &Volume, slab: &mut Volume, axis: crate::slice::Axis, index: usize, z: usize) {
    use crate::slice::Axis;
    let s = slab.shape();
    let pw = plane.shape().x;
    macro_rules! paste {
        ($p:expr, $d:expr) => {
            match axis {
                Axis::Y => $d[index * s.x..(index + 1) * s.x].copy_from_slice(&$p[z * pw..(z + 1) * pw]),
                Axis::X => {
                    for y in 0..s.y {
                        $d[y * s.x + index] = $p[z * pw + y];
                    }
                }
                Axis::Z => unreachable!(),
            }
        };
    }
    match (plane.data(), slab.data_mut()) {
        (VoxelData::U8(p), VoxelData::U8(d)) => paste!(p, d),
        (VoxelData::U16(p), VoxelData::U16(d)) => paste!(p, d),
        (VoxelData::U32(p), VoxelData::U32(d)) => paste!(p, d),
        (VoxelData::F32(p), VoxelData::F32(d)) => paste!(p, d),
        _ => unreachable!("plane dtype matches file"),
    }
}

impl SlabSource for VolumeFile {
    fn shape(&self) -> Shape {
        self.meta.shape
    }
    fn dtype(&self) -> DType {
        self.meta.dtype
    }
    fn spacing(&self) -> Spacing {
        self.meta.spacing
    }
    fn read_slab(&self, z: Range<usize>) -> Result<Volume> {
        let s = self.meta.shape;
        if z.start > z.end || z.end > s.z {
            return Err(Error::Bounds(format!("slab {z:?} outside 0..{}", s.z)));
        }
        let sb = self.meta.slice_bytes();
        let bytes = self.read_bytes(z.start as u64 * sb, (z.len() as u64 * sb) as usize)?;
        Volume::new(s.with_z(z.len()), self.meta.spacing, decode(self.meta.dtype, &bytes))
    }
}

impl SlabSink for VolumeFile {
    fn shape(&self) -> Shape {
        self.meta.shape
    }
    fn dtype(&self) -> DType {
        self.meta.dtype
    }
    fn write_slab(&mut self, z0: usize, slab: &Volume, local: Range<usize>) -> Result<()> {
        let s = self.meta.shape;
        if slab.dtype() != self.meta.dtype || slab.shape().slice_len() != s.slice_len() {
            return Err(Error::Shape(format!(
                "cannot write {} {} slab into {} {} file",
                slab.shape(),
                slab.dtype(),
                s,
                self.meta.dtype
            )));
        }
        if z0 + local.len() > s.z || local.end > slab.shape().z {
            return Err(Error::Bounds(format!("slab write at z={z0} exceeds {s}")));
        }
        let n = s.slice_len();
        let bytes = encode(slab.data(), local.start * n..local.end * n);
        self.write_bytes(z0 as u64 * self.meta.slice_bytes(), &bytes)
    }
}

impl RowStore for VolumeFile {
    fn read_rows(&self, y: Range<usize>) -> Result<Volume> {
        let s = self.meta.shape;
        if y.start > y.end || y.end > s.y {
            return Err(Error::Bounds(format!("rows {y:?} outside 0..{}", s.y)));
        }
        let row = (s.x * self.meta.dtype.size()) as u64;
        let mut bytes = Vec::with_capacity(s.z * y.len() * row as usize);
        for z in 0..s.z {
            let at = z as u64 * self.meta.slice_bytes() + y.start as u64 * row;
            bytes.extend(self.read_bytes(at, (y.len() as u64 * row) as usize)?);
        }
        Volume::new(Shape::new(s.z, y.len(), s.x), self.meta.spacing, decode(self.meta.dtype, &bytes))
    }

    fn write_rows(&mut self, y0: usize, block: &Volume) -> Result<()> {
        let (s, b) = (self.meta.shape, block.shape());
        if b.z != s.z || b.x != s.x || y0 + b.y > s.y || block.dtype() != self.meta.dtype {
            return Err(Error::Shape(format!("row block {b} {} at y={y0} does not fit {s}", block.dtype())));
        }
        let row = (s.x * self.meta.dtype.size()) as u64;
        let n = b.slice_len();
        for z in 0..s.z {
            let bytes = encode(block.data(), z * n..(z + 1) * n);
            self.write_bytes(z as u64 * self.meta.slice_bytes() + y0 as u64 * row, &bytes)?;
        }
        Ok(())
    }
}

/// Writes slices `z` of `input` to a new volume file, streaming one slice at
/// a time.
pub fn crop(input: &VolumeFile, z: Range<usize>, data_path: &Path, meta_path: &Path) -> Result<VolumeFile> {
    let s = input.meta.shape;
    if z.start >= z.end || z.end > s.z {
        return Err(Error::Bounds(format!("crop range {z:?} outside 0..{}", s.z)));
    }
    let mut meta = input.meta.clone();
    meta.shape = s.with_z(z.len());
    meta.offset_bytes = 0;
    let mut out = VolumeFile::create(data_path, meta_path, meta)?;
    for (i, zi) in z.enumerate() {
        let slab = input.read_slab(zi..zi + 1)?;
        out.write_slab(i, &slab, 0..1)?;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    fn paths(dir: &Path, name: &str) -> (PathBuf, PathBuf) {
        let d = dir.join(format!("{name}.vol"));
        let m = meta_path_for(&d);
        (d, m)
    }

    #[test]
    fn load_identity_bytes() {
        let dir = tempfile::tempdir().unwrap();
        let (d, m) = paths(dir.path(), "a");
        fs::write(&d, (0u8..8).collect::<Vec<_>>()).unwrap();
        VolumeMeta::new(DType::U8, Shape::cube(2), Spacing::default())
            .write(&m)
            .unwrap();
        let v = load_volume(&d, &m).unwrap();
        assert_eq!(v.as_slice::<u8>().unwrap(), &[0, 1, 2, 3, 4, 5, 6, 7]);
    }

    #[test]
    fn size_mismatch_is_corrupt_input() {
        let dir = tempfile::tempdir().unwrap();
        let (d, m) = paths(dir.path(), "a");
        fs::write(&d, vec![0u8; 100]).unwrap();
        VolumeMeta::new(DType::F32, Shape::cube(4), Spacing::default())
            .write(&m)
            .unwrap();
        assert!(matches!(load_volume(&d, &m), Err(Error::CorruptInput(_))));
    }

    #[test]
    fn unknown_dtype_is_unsupported() {
        let dir = tempfile::tempdir().unwrap();
        let (d, m) = paths(dir.path(), "a");
        fs::write(&d, vec![0u8; 8]).unwrap();
        fs::write(&m, "dtype = \"complex64\"\nshape = [2, 2, 2]\n").unwrap();
        assert!(matches!(load_volume(&d, &m), Err(Error::UnsupportedFormat(_))));
    }

    #[test]
    fn random_uint16_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let (d, m) = paths(dir.path(), "r");
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let vals: Vec<u16> = (0..16 * 16 * 16).map(|_| rng.random()).collect();
        let v = Volume::from_vec(Shape::cube(16), vals).unwrap();
        save_volume(&v, &d, &m).unwrap();
        assert_eq!(load_volume(&d, &m).unwrap(), v);
    }

    #[test]
    fn zeros_round_trip_and_spacing_preserved() {
        let dir = tempfile::tempdir().unwrap();
        let (d, m) = paths(dir.path(), "z");
        let v = Volume::zeros(Shape::cube(8), DType::U8)
            .with_spacing(Spacing::new(0.5, 0.5, 2.0).unwrap())
            .unwrap();
        save_volume(&v, &d, &m).unwrap();
        let back = load_volume(&d, &m).unwrap();
        assert_eq!(back, v);
        assert_eq!(VolumeMeta::read(&m).unwrap(), VolumeMeta::of(&v));
    }

    #[test]
    fn save_to_unwritable_path_reports_path() {
        let v = Volume::zeros(Shape::cube(2), DType::U8);
        let d = Path::new("/nonexistent-dir/x.vol");
        let err = save_volume(&v, d, &meta_path_for(d)).unwrap_err();
        match err {
            Error::Io { path, .. } => assert_eq!(path, d),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn offset_header_is_skipped() {
        let dir = tempfile::tempdir().unwrap();
        let (d, m) = paths(dir.path(), "o");
        let mut bytes = vec![0xAAu8; 4];
        bytes.extend(1u8..=8);
        fs::write(&d, bytes).unwrap();
        let mut meta = VolumeMeta::new(DType::U8, Shape::cube(2), Spacing::default());
        meta.offset_bytes = 4;
        meta.write(&m).unwrap();
        let v = load_volume(&d, &m).unwrap();
        assert_eq!(v.as_slice::<u8>().unwrap()[0], 1);
    }

    #[test]
    fn slab_io_and_planes() {
        let dir = tempfile::tempdir().unwrap();
        let (d, m) = paths(dir.path(), "p");
        let shape = Shape::new(4, 3, 5);
        let v = Volume::from_fn(shape, |z, y, x| (z * 100 + y * 10 + x) as f32);
        save_volume(&v, &d, &m).unwrap();
        let f = VolumeFile::open(&d, &m).unwrap();
        assert_eq!(f.read_slab(1..3).unwrap(), v.slab(1..3).unwrap());
        let py = f.read_plane(crate::slice::Axis::Y, 2).unwrap();
        assert_eq!(py.shape(), Shape::new(1, 4, 5));
        assert_eq!(py.get_f64(0, 3, 4), 324.0);
        let px = f.read_plane(crate::slice::Axis::X, 1).unwrap();
        assert_eq!(px.shape(), Shape::new(1, 4, 3));
        assert_eq!(px.get_f64(0, 2, 1), 211.0);

        let mut modified = px.clone();
        modified.as_mut_slice::<f32>().unwrap().fill(-1.0);
        f.write_plane(crate::slice::Axis::X, 1, &modified).unwrap();
        let back = f.load().unwrap();
        assert_eq!(back.get_f64(3, 2, 1), -1.0);
        assert_eq!(back.get_f64(3, 2, 2), 322.0);
    }

    #[test]
    fn crop_composes() {
        let dir = tempfile::tempdir().unwrap();
        let (d, m) = paths(dir.path(), "c");
        let v = Volume::from_fn(Shape::new(10, 2, 2), |z, y, x| (z * 4 + y * 2 + x) as u8);
        save_volume(&v, &d, &m).unwrap();
        let f = VolumeFile::open(&d, &m).unwrap();

        let (fd, fm) = paths(dir.path(), "full");
        let full = crop(&f, 0..10, &fd, &fm).unwrap();
        assert_eq!(full.load().unwrap(), v);

        let (d1, m1) = paths(dir.path(), "c1");
        let first = crop(&f, 0..1, &d1, &m1).unwrap();
        assert_eq!(fs::read(first.data_path()).unwrap(), vec![0, 1, 2, 3]);

        let (d2, m2) = paths(dir.path(), "c2");
        let (d3, m3) = paths(dir.path(), "c3");
        let (d4, m4) = paths(dir.path(), "c4");
        let outer = crop(&f, 2..9, &d2, &m2).unwrap();
        let inner = crop(&outer, 1..4, &d3, &m3).unwrap();
        let direct = crop(&f, 3..6, &d4, &m4).unwrap();
        assert_eq!(inner.load().unwrap(), direct.load().unwrap());
    }
}
