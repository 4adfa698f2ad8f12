//! Global Otsu, streamed Otsu and local thresholds on an unevenly lit volume.

use harpia::chunk::{ExecOptions, MemoryBudget};
use harpia::threshold::{apply_threshold, local_threshold, otsu, otsu_chunked, LocalKind, LocalThresholdParams};
use harpia::{DType, Shape, Volume};

fn main() -> harpia::Result<()> {
    let shape = Shape::new(12, 64, 64);
    // bright blobs on a background that brightens to the right
    let v = Volume::from_fn(shape, |_, y, x| {
        let blob = (x % 16 < 6) && (y % 16 < 6);
        (x as f64 * 1.5 + if blob { 90.0 } else { 20.0 }) as u8
    });
    let t = otsu(&v, 256)?;
    let global = apply_threshold(&v, t);
    println!("otsu threshold {t}: {} foreground voxels", global.labels().iter().filter(|&&l| l != 0).count());

    let mut out = Volume::zeros(shape, DType::U32);
    let (split, report) = otsu_chunked(&v, 256, &mut out, &MemoryBudget::fixed(64 << 10), &ExecOptions::default())?;
    println!("streamed otsu threshold {} over {} chunks, identical result: {}", split.threshold, report.chunk_count, out == *global.as_volume());

    for kind in [LocalKind::Mean, LocalKind::Niblack, LocalKind::Sauvola] {
        let p = LocalThresholdParams { k: if kind == LocalKind::Niblack { -0.2 } else { 0.2 }, ..LocalThresholdParams::new(kind, 3) };
        let m = local_threshold(&v, &p)?;
        println!("{kind:?}: {} foreground voxels", m.labels().iter().filter(|&&l| l != 0).count());
    }
    Ok(())
}
