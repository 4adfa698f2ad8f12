//! Write a volume with its metadata sidecar, reopen it lazily, read planes
//! along each axis and crop a Z range.

use harpia::io::{crop, meta_path_for, save_volume, VolumeFile};
use harpia::slice::{encode_gray_png, read_slice, Axis};
use harpia::{Shape, Spacing, Volume};

fn main() -> harpia::Result<()> {
    let dir = std::env::temp_dir().join("harpia-volume-io");
    std::fs::create_dir_all(&dir).map_err(|e| harpia::Error::Internal(e.to_string()))?;
    let shape = Shape::new(20, 48, 64);
    let v = Volume::from_fn(shape, |z, y, x| ((x + 2 * y) as u16) * 10 + z as u16).with_spacing(Spacing::new(2.0, 0.5, 0.5)?)?;
    let data = dir.join("ramp.vol");
    save_volume(&v, &data, &meta_path_for(&data))?;
    println!("sidecar:\n{}", std::fs::read_to_string(meta_path_for(&data)).unwrap_or_default());

    let file = VolumeFile::open_default(&data)?;
    for axis in [Axis::Z, Axis::Y, Axis::X] {
        let plane = file.read_plane(axis, 5)?;
        println!("{axis:?} plane 5 has shape {}", plane.shape());
    }
    let img = read_slice(&v, Axis::Z, 10, v.default_window())?;
    let png = encode_gray_png(&img)?;
    std::fs::write(dir.join("z10.png"), &png).map_err(|e| harpia::Error::Internal(e.to_string()))?;
    println!("wrote {} byte PNG of slice z=10", png.len());

    let cropped = crop(&file, 4..12, &dir.join("crop.vol"), &dir.join("crop.vol.meta"))?;
    println!("cropped to {} slices, {} bytes", cropped.meta().shape.z, cropped.meta().data_bytes());
    let _ = std::fs::remove_dir_all(&dir);
    Ok(())
}
