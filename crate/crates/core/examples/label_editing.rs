//! Morphology and component-based label cleanup: open away speckle, drop
//! small islands, fill holes and smooth a multi-label volume.

use harpia::morphology::{fill_holes, morph, remove_islands, smooth_labels, MorphOp, StructuringElement};
use harpia::quantify::{connected_components, Connectivity};
use harpia::{Shape, Volume};

fn count(v: &[u32]) -> usize {
    v.iter().filter(|&&l| l != 0).count()
}

fn main() -> harpia::Result<()> {
    let shape = Shape::cube(24);
    // a hollow cube with a few stray voxels
    let mask = Volume::from_fn(shape, |z, y, x| {
        let inside = (4..20).contains(&z) && (4..20).contains(&y) && (4..20).contains(&x);
        let cavity = (9..15).contains(&z) && (9..15).contains(&y) && (9..15).contains(&x);
        let speck = (z * 7 + y * 3 + x) % 97 == 0;
        ((inside && !cavity) || speck) as u32
    });
    let (cc, n) = connected_components(&mask, Connectivity::from_number(6)?)?;
    println!("{n} components, {} voxels", count(cc.labels()));

    let cleaned = remove_islands(&mask, 10, Connectivity::from_number(6)?)?;
    println!("after island removal: {} voxels", count(cleaned.labels()));
    let filled = fill_holes(cleaned.as_volume(), Connectivity::from_number(6)?, 1)?;
    println!("after hole filling: {} voxels (cavity holds {})", count(filled.labels()), 6 * 6 * 6);

    let opened = morph(&mask, MorphOp::Open, &StructuringElement::ball(1), 1, true)?;
    println!("opening with a ball keeps {} voxels", count(opened.typed::<u32>()?));

    let two = Volume::from_fn(shape, |_, y, x| if x < 12 || (y + x) % 5 == 0 { 1u32 } else { 2 });
    let smooth = smooth_labels(&two, &StructuringElement::cube(1))?;
    let flipped = two.typed::<u32>()?.iter().zip(smooth.labels()).filter(|(a, b)| a != b).count();
    println!("label smoothing reassigned {flipped} voxels");
    Ok(())
}
