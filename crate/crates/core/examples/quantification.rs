//! Distance maps and per-label metrics, whole-volume and streamed.

use harpia::chunk::{ExecOptions, MemoryBudget};
use harpia::quantify::{edt, label_metrics, label_metrics_chunked};
use harpia::{LabelVolume, Shape, Spacing, Volume};

fn main() -> harpia::Result<()> {
    let shape = Shape::new(20, 30, 30);
    let labels = LabelVolume::from_fn(shape, |z, y, x| {
        if (2..8).contains(&z) && (5..15).contains(&y) && (5..15).contains(&x) {
            1
        } else if (10..18).contains(&z) && (10..25).contains(&y) && (12..20).contains(&x) {
            2
        } else {
            0
        }
    })
    .with_spacing(Spacing::new(2.0, 1.0, 1.0)?)?;

    let table = label_metrics(&labels);
    print!("{}", table.to_csv()?);
    let (streamed, report) = label_metrics_chunked(labels.as_volume(), &MemoryBudget::fixed(32 << 10), &ExecOptions::default())?;
    println!("streamed over {} chunks, same table: {}", report.chunk_count, streamed == table);

    let mask = Volume::from_vec(shape, labels.labels().iter().map(|&l| (l == 1) as u8).collect())?.with_spacing(labels.spacing())?;
    let d = edt(&mask);
    println!("deepest point of label 1 is {:.2} units from background", d.as_slice::<f32>().unwrap().iter().cloned().fold(0.0, f32::max));
    Ok(())
}
