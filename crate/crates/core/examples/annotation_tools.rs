//! Interactive 2D tools: magic wand, lasso and snakes on one plane, with the
//! results run-length encoded and committed to a label volume.

use harpia::annotate::{apply_mask, lasso_fill, magic_wand, morph_snakes_acwe, MaskMode, PlaneConnectivity, Polygon, RleMask, SnakeParams};
use harpia::slice::{extract_plane, Axis};
use harpia::{LabelVolume, Shape, Volume};

fn main() -> harpia::Result<()> {
    let shape = Shape::new(4, 64, 64);
    let v = Volume::from_fn(shape, |_, y, x| {
        let d = (y as f64 - 32.0).powi(2) + (x as f64 - 30.0).powi(2);
        (if d < 400.0 { 190.0 } else { 50.0 } + ((y * 13 + x * 7) % 11) as f64) as u8
    });
    let img = extract_plane(&v, Axis::Z, 2)?;
    let mut labels = LabelVolume::zeros(shape);

    let wand = magic_wand(&img, (32, 30), 15.0, PlaneConnectivity::Four)?;
    let wand = RleMask::encode(Axis::Z, 2, 64, 64, 1, &wand)?;
    println!("wand: {} pixels in {} runs -> {}", wand.area(), wand.runs.len(), &serde_json::to_string(&wand).unwrap()[..60]);
    println!("committed {} voxels", apply_mask(&mut labels, &wand, MaskMode::Set)?);

    let poly = Polygon::new(vec![(5.0, 5.0), (5.0, 20.0), (20.0, 12.0)])?;
    let lasso = RleMask::encode(Axis::Z, 2, 64, 64, 2, &lasso_fill(&poly, 64, 64))?;
    println!("lasso: {} pixels, committed {}", lasso.area(), apply_mask(&mut labels, &lasso, MaskMode::Set)?);

    let init = RleMask { runs: (28..36).map(|r| [r, 26, 8]).collect(), ..RleMask::empty(Axis::Z, 2, 64, 64, 3) };
    let (snake, iters) = morph_snakes_acwe(&img, &init, &SnakeParams { balloon: 1, iterations: 150, ..Default::default() })?;
    println!("snakes grew {} -> {} pixels in {iters} iterations", init.area(), snake.area());
    println!("erasing the wand region changed {} voxels", apply_mask(&mut labels, &wand, MaskMode::Erase)?);
    Ok(())
}
