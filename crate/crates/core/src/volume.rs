//! Dense voxel grids.
//!
//! Grids are stored row-major in (z, y, x) order with x fastest. Intensity
//! volumes use `uint8`, `uint16` or `float32`; label volumes use `uint32`
//! with 0 meaning "unlabeled".

use std::collections::BTreeMap;
use std::fmt;
use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ledger::Buffer;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Shape {
    pub z: usize,
    pub y: usize,
    pub x: usize,
}

impl Shape {
    pub const fn new(z: usize, y: usize, x: usize) -> Self {
        Shape { z, y, x }
    }

    pub fn cube(n: usize) -> Self {
        Shape::new(n, n, n)
    }

    pub fn len(&self) -> usize {
        self.z * self.y * self.x
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn slice_len(&self) -> usize {
        self.y * self.x
    }

    #[inline]
    pub fn index(&self, z: usize, y: usize, x: usize) -> usize {
        (z * self.y + y) * self.x + x
    }

    #[inline]
    pub fn coords(&self, i: usize) -> (usize, usize, usize) {
        let x = i % self.x;
        let r = i / self.x;
        (r / self.y, r % self.y, x)
    }

    pub fn with_z(&self, z: usize) -> Shape {
        Shape::new(z, self.y, self.x)
    }

    pub fn as_array(&self) -> [usize; 3] {
        [self.z, self.y, self.x]
    }
}

impl fmt::Display for Shape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}x{}x{}", self.z, self.y, self.x)
    }
}

/// Physical size of a voxel along (z, y, x).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Spacing(pub [f64; 3]);

impl Default for Spacing {
    fn default() -> Self {
        Spacing([1.0; 3])
    }
}

impl Spacing {
    pub fn new(sz: f64, sy: f64, sx: f64) -> Result<Self> {
        let s = Spacing([sz, sy, sx]);
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if self.0.iter().all(|v| v.is_finite() && *v > 0.0) {
            Ok(())
        } else {
            Err(Error::param(format!(
                "spacing components must be positive, got {:?}",
                self.0
            )))
        }
    }

    pub fn z(&self) -> f64 {
        self.0[0]
    }
    pub fn y(&self) -> f64 {
        self.0[1]
    }
    pub fn x(&self) -> f64 {
        self.0[2]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DType {
    #[serde(rename = "uint8")]
    U8,
    #[serde(rename = "uint16")]
    U16,
    /// Label storage.
    #[serde(rename = "uint32")]
    U32,
    #[serde(rename = "float32")]
    F32,
}

impl DType {
    pub fn size(self) -> usize {
        match self {
            DType::U8 => 1,
            DType::U16 => 2,
            DType::U32 | DType::F32 => 4,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            DType::U8 => "uint8",
            DType::U16 => "uint16",
            DType::U32 => "uint32",
            DType::F32 => "float32",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "uint8" | "u8" => Ok(DType::U8),
            "uint16" | "u16" => Ok(DType::U16),
            "uint32" | "u32" => Ok(DType::U32),
            "float32" | "f32" => Ok(DType::F32),
            other => Err(Error::UnsupportedFormat(format!("unknown dtype {other:?}"))),
        }
    }

    pub fn is_integer(self) -> bool {
        !matches!(self, DType::F32)
    }

    /// Representable range for integer types.
    pub fn integer_range(self) -> Option<(f64, f64)> {
        match self {
            DType::U8 => Some((0.0, u8::MAX as f64)),
            DType::U16 => Some((0.0, u16::MAX as f64)),
            DType::U32 => Some((0.0, u32::MAX as f64)),
            DType::F32 => None,
        }
    }
}

impl fmt::Display for DType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Scalar element of a voxel grid.
pub trait Voxel:
    Copy + Default + PartialOrd + PartialEq + Send + Sync + fmt::Debug + 'static
{
    const DTYPE: DType;
    fn to_f64(self) -> f64;
    /// Saturating, round-to-nearest conversion for integer types.
    fn from_f64(v: f64) -> Self;
    fn wrap(buf: Buffer<Self>) -> VoxelData;
    fn view(data: &VoxelData) -> Option<&Buffer<Self>>;
    fn view_mut(data: &mut VoxelData) -> Option<&mut Buffer<Self>>;
    fn write_le(self, out: &mut Vec<u8>);
    fn read_le(bytes: &[u8]) -> Self;
    /// Total order usable for sorting (floats via `total_cmp`).
    fn cmp_total(&self, other: &Self) -> std::cmp::Ordering;
}

macro_rules! int_voxel {
    ($t:ty, $variant:ident) => {
        impl Voxel for $t {
            const DTYPE: DType = DType::$variant;
            #[inline]
            fn to_f64(self) -> f64 {
                self as f64
            }
            #[inline]
            fn from_f64(v: f64) -> Self {
                v.round().clamp(<$t>::MIN as f64, <$t>::MAX as f64) as $t
            }
            fn wrap(buf: Buffer<Self>) -> VoxelData {
                VoxelData::$variant(buf)
            }
            fn view(data: &VoxelData) -> Option<&Buffer<Self>> {
                match data {
                    VoxelData::$variant(b) => Some(b),
                    _ => None,
                }
            }
            fn view_mut(data: &mut VoxelData) -> Option<&mut Buffer<Self>> {
                match data {
                    VoxelData::$variant(b) => Some(b),
                    _ => None,
                }
            }
            fn write_le(self, out: &mut Vec<u8>) {
                out.extend_from_slice(&self.to_le_bytes());
            }
            fn read_le(bytes: &[u8]) -> Self {
                <$t>::from_le_bytes(bytes.try_into().expect("element width"))
            }
            #[inline]
            fn cmp_total(&self, other: &Self) -> std::cmp::Ordering {
                self.cmp(other)
            }
        }
    };
}

int_voxel!(u8, U8);
int_voxel!(u16, U16);
int_voxel!(u32, U32);

impl Voxel for f32 {
    const DTYPE: DType = DType::F32;
    #[inline]
    fn to_f64(self) -> f64 {
        self as f64
    }
    #[inline]
    fn from_f64(v: f64) -> Self {
        v as f32
    }
    fn wrap(buf: Buffer<Self>) -> VoxelData {
        VoxelData::F32(buf)
    }
    fn view(data: &VoxelData) -> Option<&Buffer<Self>> {
        match data {
            VoxelData::F32(b) => Some(b),
            _ => None,
        }
    }
    fn view_mut(data: &mut VoxelData) -> Option<&mut Buffer<Self>> {
        match data {
            VoxelData::F32(b) => Some(b),
            _ => None,
        }
    }
    fn write_le(self, out: &mut Vec<u8>) {
        out.extend_from_slice(&self.to_le_bytes());
    }
    fn read_le(bytes: &[u8]) -> Self {
        f32::from_le_bytes(bytes.try_into().expect("element width"))
    }
    #[inline]
    fn cmp_total(&self, other: &Self) -> std::cmp::Ordering {
        self.total_cmp(other)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum VoxelData {
    U8(Buffer<u8>),
    U16(Buffer<u16>),
    U32(Buffer<u32>),
    F32(Buffer<f32>),
}

/// Runs `$body` with `$buf` bound to the typed buffer inside a [`VoxelData`].
#[macro_export]
macro_rules! with_voxels {
    ($data:expr, $buf:ident => $body:expr) => {
        match $data {
            $crate::volume::VoxelData::U8($buf) => $body,
            $crate::volume::VoxelData::U16($buf) => $body,
            $crate::volume::VoxelData::U32($buf) => $body,
            $crate::volume::VoxelData::F32($buf) => $body,
        }
    };
}

impl VoxelData {
    pub fn dtype(&self) -> DType {
        match self {
            VoxelData::U8(_) => DType::U8,
            VoxelData::U16(_) => DType::U16,
            VoxelData::U32(_) => DType::U32,
            VoxelData::F32(_) => DType::F32,
        }
    }

    pub fn len(&self) -> usize {
        with_voxels!(self, b => b.len())
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn zeroed(dtype: DType, len: usize) -> Self {
        match dtype {
            DType::U8 => VoxelData::U8(Buffer::zeroed(len)),
            DType::U16 => VoxelData::U16(Buffer::zeroed(len)),
            DType::U32 => VoxelData::U32(Buffer::zeroed(len)),
            DType::F32 => VoxelData::F32(Buffer::zeroed(len)),
        }
    }
}

/// A dense 3D scalar grid with voxel spacing.
#[derive(Debug, Clone, PartialEq)]
pub struct Volume {
    shape: Shape,
    spacing: Spacing,
    data: VoxelData,
}

impl Volume {
    pub fn new(shape: Shape, spacing: Spacing, data: VoxelData) -> Result<Self> {
        if data.len() != shape.len() {
            return Err(Error::Shape(format!(
                "buffer holds {} elements but shape {shape} needs {}",
                data.len(),
                shape.len()
            )));
        }
        spacing.validate()?;
        Ok(Volume {
            shape,
            spacing,
            data,
        })
    }

    pub fn zeros(shape: Shape, dtype: DType) -> Self {
        Volume {
            shape,
            spacing: Spacing::default(),
            data: VoxelData::zeroed(dtype, shape.len()),
        }
    }

    pub fn from_vec<T: Voxel>(shape: Shape, values: Vec<T>) -> Result<Self> {
        Volume::new(shape, Spacing::default(), T::wrap(Buffer::from_vec(values)))
    }

    pub fn from_buffer<T: Voxel>(shape: Shape, spacing: Spacing, buf: Buffer<T>) -> Result<Self> {
        Volume::new(shape, spacing, T::wrap(buf))
    }

    pub fn from_fn<T: Voxel>(shape: Shape, mut f: impl FnMut(usize, usize, usize) -> T) -> Self {
        let mut v = Vec::with_capacity(shape.len());
        for z in 0..shape.z {
            for y in 0..shape.y {
                for x in 0..shape.x {
                    v.push(f(z, y, x));
                }
            }
        }
        Volume::from_vec(shape, v).expect("length matches shape")
    }

    pub fn filled<T: Voxel>(shape: Shape, value: T) -> Self {
        Volume::from_vec(shape, vec![value; shape.len()]).expect("length matches shape")
    }

    pub fn shape(&self) -> Shape {
        self.shape
    }

    pub fn spacing(&self) -> Spacing {
        self.spacing
    }

    pub fn with_spacing(mut self, spacing: Spacing) -> Result<Self> {
        spacing.validate()?;
        self.spacing = spacing;
        Ok(self)
    }

    pub fn dtype(&self) -> DType {
        self.data.dtype()
    }

    pub fn data(&self) -> &VoxelData {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut VoxelData {
        &mut self.data
    }

    pub fn into_data(self) -> VoxelData {
        self.data
    }

    pub fn byte_len(&self) -> u64 {
        (self.shape.len() * self.dtype().size()) as u64
    }

    pub fn as_slice<T: Voxel>(&self) -> Option<&[T]> {
        T::view(&self.data).map(|b| b.as_slice())
    }

    pub fn as_mut_slice<T: Voxel>(&mut self) -> Option<&mut [T]> {
        T::view_mut(&mut self.data).map(|b| b.as_mut_slice())
    }

    /// Typed view, failing with a parameter error on dtype mismatch.
    pub fn typed<T: Voxel>(&self) -> Result<&[T]> {
        self.as_slice::<T>().ok_or_else(|| {
            Error::param(format!(
                "expected {} voxels, found {}",
                T::DTYPE,
                self.dtype()
            ))
        })
    }

    pub fn get_f64(&self, z: usize, y: usize, x: usize) -> f64 {
        let i = self.shape.index(z, y, x);
        with_voxels!(&self.data, b => b[i].to_f64())
    }

    /// Copies the voxels into a new `float32` buffer.
    pub fn to_f32_buffer(&self) -> Buffer<f32> {
        with_voxels!(&self.data, b => b.iter().map(|v| v.to_f64() as f32).collect())
    }

    pub fn to_f64_buffer(&self) -> Buffer<f64> {
        with_voxels!(&self.data, b => b.iter().map(|v| v.to_f64()).collect())
    }

    /// Converts to another element type (rounded and saturated for integers).
    pub fn convert(&self, dtype: DType) -> Volume {
        if dtype == self.dtype() {
            return self.clone();
        }
        let data = with_voxels!(&self.data, b => match dtype {
            DType::U8 => VoxelData::U8(b.iter().map(|v| u8::from_f64(v.to_f64())).collect()),
            DType::U16 => VoxelData::U16(b.iter().map(|v| u16::from_f64(v.to_f64())).collect()),
            DType::U32 => VoxelData::U32(b.iter().map(|v| u32::from_f64(v.to_f64())).collect()),
            DType::F32 => VoxelData::F32(b.iter().map(|v| v.to_f64() as f32).collect()),
        });
        Volume {
            shape: self.shape,
            spacing: self.spacing,
            data,
        }
    }

    /// Copy of the Z-slab `z`.
    pub fn slab(&self, z: Range<usize>) -> Result<Volume> {
        if z.start > z.end || z.end > self.shape.z {
            return Err(Error::Bounds(format!(
                "slab {z:?} outside 0..{}",
                self.shape.z
            )));
        }
        let n = self.shape.slice_len();
        let range = z.start * n..z.end * n;
        let data = with_voxels!(&self.data, b => Voxel::wrap(Buffer::from_vec(b[range.clone()].to_vec())));
        Ok(Volume {
            shape: self.shape.with_z(z.len()),
            spacing: self.spacing,
            data,
        })
    }

    /// Writes slices `local` of `src` into this volume starting at slice `z0`.
    pub fn write_slab(&mut self, z0: usize, src: &Volume, local: Range<usize>) -> Result<()> {
        if src.shape.slice_len() != self.shape.slice_len() || src.shape.y != self.shape.y {
            return Err(Error::Shape(format!(
                "slab {} does not match volume {}",
                src.shape, self.shape
            )));
        }
        if local.end > src.shape.z || z0 + local.len() > self.shape.z {
            return Err(Error::Bounds(format!(
                "slab write at z={z0} of {} slices exceeds {}",
                local.len(),
                self.shape
            )));
        }
        let n = self.shape.slice_len();
        let dst_range = z0 * n..(z0 + local.len()) * n;
        let src_range = local.start * n..local.end * n;
        macro_rules! copy {
            ($d:expr, $s:expr) => {{
                $d[dst_range].copy_from_slice(&$s[src_range]);
                Ok(())
            }};
        }
        match (&mut self.data, &src.data) {
            (VoxelData::U8(d), VoxelData::U8(s)) => copy!(d, s),
            (VoxelData::U16(d), VoxelData::U16(s)) => copy!(d, s),
            (VoxelData::U32(d), VoxelData::U32(s)) => copy!(d, s),
            (VoxelData::F32(d), VoxelData::F32(s)) => copy!(d, s),
            _ => Err(Error::param(format!(
                "cannot write {} slab into {} volume",
                src.dtype(),
                self.dtype()
            ))),
        }
    }

    /// Copy of rows `y` across every slice, shape (z, y.len(), x).
    pub fn rows(&self, y: Range<usize>) -> Result<Volume> {
        let s = self.shape;
        if y.start > y.end || y.end > s.y {
            return Err(Error::Bounds(format!("rows {y:?} outside 0..{}", s.y)));
        }
        let data = with_voxels!(&self.data, b => {
            let mut out = Vec::with_capacity(s.z * y.len() * s.x);
            for z in 0..s.z {
                out.extend_from_slice(&b[s.index(z, y.start, 0)..s.index(z, y.start, 0) + y.len() * s.x]);
            }
            Voxel::wrap(Buffer::from_vec(out))
        });
        Ok(Volume {
            shape: Shape::new(s.z, y.len(), s.x),
            spacing: self.spacing,
            data,
        })
    }

    /// Inverse of [`rows`](Self::rows): writes a row block starting at row `y0`.
    pub fn write_rows(&mut self, y0: usize, src: &Volume) -> Result<()> {
        let (s, b) = (self.shape, src.shape);
        if b.z != s.z || b.x != s.x || y0 + b.y > s.y {
            return Err(Error::Shape(format!("row block {b} at y={y0} does not fit {s}")));
        }
        macro_rules! copy {
            ($d:expr, $s:expr) => {{
                for z in 0..s.z {
                    let at = s.index(z, y0, 0);
                    $d[at..at + b.y * s.x].copy_from_slice(&$s[z * b.slice_len()..(z + 1) * b.slice_len()]);
                }
                Ok(())
            }};
        }
        match (&mut self.data, &src.data) {
            (VoxelData::U8(d), VoxelData::U8(s)) => copy!(d, s),
            (VoxelData::U16(d), VoxelData::U16(s)) => copy!(d, s),
            (VoxelData::U32(d), VoxelData::U32(s)) => copy!(d, s),
            (VoxelData::F32(d), VoxelData::F32(s)) => copy!(d, s),
            _ => Err(Error::param(format!(
                "cannot write {} rows into {} volume",
                src.dtype(),
                self.dtype()
            ))),
        }
    }

    pub fn min_max(&self) -> (f64, f64) {
        with_voxels!(&self.data, b => min_max_iter(b.iter().map(|v| v.to_f64())))
    }

    /// Auto-contrast window: (min, max) of a subsample taking every 100th voxel.
    pub fn default_window(&self) -> (f64, f64) {
        let (lo, hi) = with_voxels!(&self.data, b => min_max_iter(b.iter().step_by(100).map(|v| v.to_f64())));
        if hi > lo {
            (lo, hi)
        } else {
            (lo, lo + 1.0)
        }
    }
}

fn min_max_iter(it: impl Iterator<Item = f64>) -> (f64, f64) {
    it.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
        (lo.min(v), hi.max(v))
    })
}

/// RGBA display colour of a label.
pub type Rgba = [u8; 4];

/// Dense `u32` labels aligned to a volume; 0 = unlabeled.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelVolume {
    volume: Volume,
    pub palette: BTreeMap<u32, Rgba>,
}

impl LabelVolume {
    pub fn zeros(shape: Shape) -> Self {
        LabelVolume {
            volume: Volume::zeros(shape, DType::U32),
            palette: BTreeMap::new(),
        }
    }

    pub fn from_vec(shape: Shape, labels: Vec<u32>) -> Result<Self> {
        Ok(LabelVolume {
            volume: Volume::from_vec(shape, labels)?,
            palette: BTreeMap::new(),
        })
    }

    pub fn from_fn(shape: Shape, f: impl FnMut(usize, usize, usize) -> u32) -> Self {
        LabelVolume {
            volume: Volume::from_fn(shape, f),
            palette: BTreeMap::new(),
        }
    }

    /// Wraps a `uint32` volume.
    pub fn from_volume(volume: Volume) -> Result<Self> {
        if volume.dtype() != DType::U32 {
            return Err(Error::param(format!(
                "labels must be uint32, found {}",
                volume.dtype()
            )));
        }
        Ok(LabelVolume {
            volume,
            palette: BTreeMap::new(),
        })
    }

    /// Binary mask (labels 0/1) of the voxels where `pred` holds.
    pub fn mask_where(volume: &Volume, pred: impl Fn(f64) -> bool) -> Self {
        let shape = volume.shape();
        let labels: Vec<u32> = with_voxels!(volume.data(), b => b.iter().map(|v| pred(v.to_f64()) as u32).collect());
        let mut lv = LabelVolume::from_vec(shape, labels).expect("shape preserved");
        lv.volume.spacing = volume.spacing();
        lv
    }

    pub fn shape(&self) -> Shape {
        self.volume.shape
    }

    pub fn spacing(&self) -> Spacing {
        self.volume.spacing
    }

    pub fn with_spacing(mut self, spacing: Spacing) -> Result<Self> {
        self.volume = self.volume.with_spacing(spacing)?;
        Ok(self)
    }

    pub fn labels(&self) -> &[u32] {
        self.volume.as_slice::<u32>().expect("u32 storage")
    }

    pub fn labels_mut(&mut self) -> &mut [u32] {
        self.volume.as_mut_slice::<u32>().expect("u32 storage")
    }

    pub fn get(&self, z: usize, y: usize, x: usize) -> u32 {
        self.labels()[self.shape().index(z, y, x)]
    }

    pub fn as_volume(&self) -> &Volume {
        &self.volume
    }

    pub fn into_volume(self) -> Volume {
        self.volume
    }

    /// Checks that the labels can be attached to `volume`.
    pub fn check_aligned(&self, volume: &Volume) -> Result<()> {
        if self.shape() == volume.shape() {
            Ok(())
        } else {
            Err(Error::Shape(format!(
                "labels {} do not match volume {}",
                self.shape(),
                volume.shape()
            )))
        }
    }

    /// Sorted distinct nonzero labels.
    pub fn label_set(&self) -> Vec<u32> {
        let mut s: Vec<u32> = self.labels().iter().copied().filter(|&l| l != 0).collect();
        s.sort_unstable();
        s.dedup();
        s
    }

    pub fn color_of(&self, label: u32) -> Rgba {
        if label == 0 {
            return [0, 0, 0, 0];
        }
        self.palette
            .get(&label)
            .copied()
            .unwrap_or_else(|| default_color(label))
    }
}

/// Deterministic colour for labels without a palette entry.
pub fn default_color(label: u32) -> Rgba {
    if label == 0 {
        return [0, 0, 0, 0];
    }
    // golden-ratio hue walk
    let h = (label as f64 * 0.618_033_988_749_895).fract() * 6.0;
    let c = 220.0;
    let xv = c * (1.0 - ((h % 2.0) - 1.0).abs());
    let (r, g, b) = match h as u32 {
        0 => (c, xv, 0.0),
        1 => (xv, c, 0.0),
        2 => (0.0, c, xv),
        3 => (0.0, xv, c),
        4 => (xv, 0.0, c),
        _ => (c, 0.0, xv),
    };
    [(r + 35.0) as u8, (g + 35.0) as u8, (b + 35.0) as u8, 255]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn new_rejects_wrong_length() {
        let err = Volume::new(
            Shape::cube(2),
            Spacing::default(),
            VoxelData::U8(Buffer::zeroed(7)),
        );
        assert!(matches!(err, Err(Error::Shape(_))));
    }

    #[test]
    fn spacing_must_be_positive() {
        assert!(Spacing::new(1.0, 0.0, 1.0).is_err());
        assert!(Spacing::new(1.0, -2.0, 1.0).is_err());
        assert!(Spacing::new(0.5, 0.5, 2.0).is_ok());
    }

    #[test]
    fn slab_roundtrip() {
        let shape = Shape::new(5, 3, 2);
        let v = Volume::from_fn(shape, |z, y, x| (z * 100 + y * 10 + x) as u16);
        let s = v.slab(1..4).unwrap();
        assert_eq!(s.shape(), Shape::new(3, 3, 2));
        assert_eq!(s.get_f64(0, 2, 1), 121.0);
        let mut w = Volume::zeros(shape, DType::U16);
        w.write_slab(1, &s, 0..3).unwrap();
        assert_eq!(w.get_f64(3, 1, 0), 310.0);
        assert_eq!(w.get_f64(0, 0, 0), 0.0);
    }

    #[test]
    fn convert_saturates() {
        let v = Volume::from_vec(Shape::new(1, 1, 3), vec![-3.0f32, 1.6, 300.0]).unwrap();
        let u = v.convert(DType::U8);
        assert_eq!(u.as_slice::<u8>().unwrap(), &[0, 2, 255]);
    }

    #[test]
    fn dtype_is_fixed_conversions_produce_new_volumes() {
        let v = Volume::zeros(Shape::cube(2), DType::U8);
        let f = v.convert(DType::F32);
        assert_eq!(v.dtype(), DType::U8);
        assert_eq!(f.dtype(), DType::F32);
    }

    #[test]
    fn coords_inverts_index() {
        let s = Shape::new(3, 4, 5);
        for i in 0..s.len() {
            let (z, y, x) = s.coords(i);
            assert_eq!(s.index(z, y, x), i);
        }
    }
}
