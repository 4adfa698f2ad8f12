//! Split two touching discs with seeded slice-wise watershed on an inverted
//! distance map.

use harpia::quantify::edt;
use harpia::watershed::watershed_2_5d;
use harpia::{Shape, Volume};

fn main() -> harpia::Result<()> {
    let shape = Shape::new(3, 32, 48);
    let mask = Volume::from_fn(shape, |_, y, x| {
        let a = (x as f64 - 16.0).powi(2) + (y as f64 - 16.0).powi(2) < 121.0;
        let b = (x as f64 - 31.0).powi(2) + (y as f64 - 16.0).powi(2) < 121.0;
        (a || b) as u8
    });
    let dist = edt(&mask);
    let landscape = Volume::from_vec(shape, dist.as_slice::<f32>().unwrap().iter().map(|d| -d).collect())?;
    let markers = Volume::from_fn(shape, |_, y, x| match (y, x) {
        (16, 16) => 1u32,
        (16, 31) => 2,
        _ => 0,
    });
    let labels = watershed_2_5d(&landscape, &markers, Some(&mask))?;
    for l in [1, 2] {
        println!("basin {l}: {} voxels", labels.labels().iter().filter(|&&v| v == l).count());
    }
    let row: String = (0..48).map(|x| char::from(b'0' + labels.get(1, 16, x) as u8)).collect();
    println!("row y=16: {row}");
    Ok(())
}
