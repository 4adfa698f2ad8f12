//! Plan a Gaussian under a tight budget, print the plan, and confirm the
//! chunked result matches a single-chunk run.

use harpia::chunk::{plan_chunks, single_chunk_budget, execute_chunked_with, ExecOptions, LocalOperator, MemoryBudget};
use harpia::filters::Gaussian;
use harpia::{DType, Shape, Volume};

fn main() -> harpia::Result<()> {
    let shape = Shape::new(48, 64, 64);
    let v = Volume::from_fn(shape, |z, y, x| ((z * 131 + y * 71 + x * 37) % 251) as u8);
    let op = Gaussian { sigma: 1.5 };
    let profile = op.profile(&[DType::U8])?;
    let budget = MemoryBudget::fixed(1 << 20);
    let plan = plan_chunks(shape, DType::U8, &profile, &budget)?;
    println!("halo {} slices, {} per chunk, {} chunks, predicted peak {} B", plan.halo_z, plan.slices_per_chunk, plan.len(), plan.predicted_peak_bytes);
    for c in plan.chunks.iter().take(3) {
        println!("  interior {:?} loaded {:?}", c.interior(), c.padded());
    }

    let (chunked, report) = execute_chunked_with(&[&v], &op, &budget, &ExecOptions::default())?;
    let (whole, _) = execute_chunked_with(&[&v], &op, &single_chunk_budget(shape, &[DType::U8], &profile), &ExecOptions::default())?;
    let diff = chunked
        .to_f64_buffer()
        .iter()
        .zip(whole.to_f64_buffer().iter())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    println!("{} chunks in {:.3}s, peak {} B, residual {} B, max diff vs whole {diff:e}", report.chunk_count, report.total_seconds, report.peak_bytes, report.residual_bytes);
    Ok(())
}
