//! Windowed 2D slice extraction and PNG encoding.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::volume::{LabelVolume, Shape, Volume, Voxel, VoxelData};
use crate::with_voxels;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    Z,
    Y,
    X,
}

impl Axis {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "z" | "Z" => Ok(Axis::Z),
            "y" | "Y" => Ok(Axis::Y),
            "x" | "X" => Ok(Axis::X),
            other => Err(Error::param(format!("unknown axis {other:?}"))),
        }
    }

    pub fn extent(self, shape: Shape) -> usize {
        match self {
            Axis::Z => shape.z,
            Axis::Y => shape.y,
            Axis::X => shape.x,
        }
    }
}

/// (height, width) of a plane across `axis`: the two remaining axes in
/// (slower, faster) order.
pub fn plane_dims(shape: Shape, axis: Axis) -> (usize, usize) {
    match axis {
        Axis::Z => (shape.y, shape.x),
        Axis::Y => (shape.z, shape.x),
        Axis::X => (shape.z, shape.y),
    }
}

pub fn check_index(shape: Shape, axis: Axis, index: usize) -> Result<()> {
    let n = axis.extent(shape);
    if index < n {
        Ok(())
    } else {
        Err(Error::Bounds(format!(
            "{axis:?} index {index} outside 0..{n}"
        )))
    }
}

/// Maps plane pixel (row, col) back to volume coordinates.
#[inline]
pub fn plane_to_volume(axis: Axis, index: usize, row: usize, col: usize) -> (usize, usize, usize) {
    match axis {
        Axis::Z => (index, row, col),
        Axis::Y => (row, index, col),
        Axis::X => (row, col, index),
    }
}

/// Row-major 2D raster.
#[derive(Debug, Clone, PartialEq)]
pub struct Image<T> {
    pub height: usize,
    pub width: usize,
    pub pixels: Vec<T>,
}

impl<T: Copy> Image<T> {
    pub fn new(height: usize, width: usize, fill: T) -> Self {
        Image {
            height,
            width,
            pixels: vec![fill; height * width],
        }
    }

    pub fn from_vec(height: usize, width: usize, pixels: Vec<T>) -> Result<Self> {
        if pixels.len() != height * width {
            return Err(Error::Shape(format!(
                "{} pixels for a {height}x{width} image",
                pixels.len()
            )));
        }
        Ok(Image {
            height,
            width,
            pixels,
        })
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> T {
        self.pixels[row * self.width + col]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, v: T) {
        self.pixels[row * self.width + col] = v;
    }

    pub fn map<U>(&self, f: impl Fn(T) -> U) -> Image<U> {
        Image {
            height: self.height,
            width: self.width,
            pixels: self.pixels.iter().map(|&p| f(p)).collect(),
        }
    }
}

pub type GrayImage = Image<u8>;

/// Raw plane values as `f64`.
pub fn extract_plane(volume: &Volume, axis: Axis, index: usize) -> Result<Image<f64>> {
    let s = volume.shape();
    check_index(s, axis, index)?;
    let (h, w) = plane_dims(s, axis);
    let pixels = with_voxels!(volume.data(), b => {
        let mut out = Vec::with_capacity(h * w);
        for r in 0..h {
            for c in 0..w {
                let (z, y, x) = plane_to_volume(axis, index, r, c);
                out.push(b[s.index(z, y, x)].to_f64());
            }
        }
        out
    });
    Image::from_vec(h, w, pixels)
}

/// Window/level map of one voxel value to 8 bits.
#[inline]
pub fn window_value(v: f64, low: f64, high: f64) -> u8 {
    (255.0 * (v - low) / (high - low)).round().clamp(0.0, 255.0) as u8
}

/// 8-bit view of a plane: `clamp(round(255·(v−low)/(high−low)), 0, 255)`.
pub fn read_slice(volume: &Volume, axis: Axis, index: usize, window: (f64, f64)) -> Result<GrayImage> {
    let (low, high) = window;
    if !(low < high) {
        return Err(Error::param(format!(
            "window low {low} must be below high {high}"
        )));
    }
    Ok(extract_plane(volume, axis, index)?.map(|v| window_value(v, low, high)))
}

/// Same as [`read_slice`] for a plane volume of shape (1, h, w) such as
/// [`VolumeFile::read_plane`](crate::io::VolumeFile::read_plane) returns.
pub fn window_plane(plane: &Volume, window: (f64, f64)) -> Result<GrayImage> {
    read_slice(plane, Axis::Z, 0, window)
}

pub fn encode_gray_png(img: &GrayImage) -> Result<Vec<u8>> {
    encode_png(img.width, img.height, png::ColorType::Grayscale, &img.pixels)
}

pub fn encode_rgba_png(width: usize, height: usize, rgba: &[u8]) -> Result<Vec<u8>> {
    encode_png(width, height, png::ColorType::Rgba, rgba)
}

fn encode_png(width: usize, height: usize, color: png::ColorType, data: &[u8]) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    {
        let mut enc = png::Encoder::new(&mut out, width as u32, height as u32);
        enc.set_color(color);
        enc.set_depth(png::BitDepth::Eight);
        let mut writer = enc
            .write_header()
            .map_err(|e| Error::UnsupportedFormat(format!("png: {e}")))?;
        writer
            .write_image_data(data)
            .map_err(|e| Error::UnsupportedFormat(format!("png: {e}")))?;
    }
    Ok(out)
}

/// Palette-coloured RGBA overlay of a label plane; label 0 is transparent.
pub fn label_overlay(labels: &LabelVolume, plane: &Volume) -> Result<Vec<u8>> {
    let vals = match plane.data() {
        VoxelData::U32(b) => b,
        _ => return Err(Error::param("label plane must be uint32")),
    };
    let mut rgba = Vec::with_capacity(vals.len() * 4);
    for &l in vals.iter() {
        rgba.extend_from_slice(&labels.color_of(l));
    }
    Ok(rgba)
}
