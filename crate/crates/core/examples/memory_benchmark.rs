//! A small bench ladder: timing and ledger peak/residual per size, as CSV.

use harpia::bench::{run_bench, to_csv, BenchScenario};
use harpia::registry::Params;
use harpia::Shape;

fn main() -> harpia::Result<()> {
    let work = std::env::temp_dir().join("harpia-bench-example");
    let ladder = [8, 16, 32, 64].iter().map(|&z| Shape::new(z, 64, 64)).collect();
    let mut scn = BenchScenario::new("median", ladder, &work);
    scn.params = Params::default().with("radius", 1);
    scn.repeats = 5;
    scn.budget_bytes = 4 << 20;
    let rows = run_bench(&scn)?;
    print!("{}", to_csv(&rows));
    let _ = std::fs::remove_dir_all(&work);
    Ok(())
}
