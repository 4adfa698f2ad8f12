//! Edge magnitude, Hessian components and local binary patterns on a sphere.

use harpia::filters::{hessian, lbp2d, prewitt, sobel, HessianComponent};
use harpia::{Shape, Volume};

fn main() -> harpia::Result<()> {
    let shape = Shape::cube(32);
    let v = Volume::from_fn(shape, |z, y, x| {
        let d = (z as f64 - 16.0).powi(2) + (y as f64 - 16.0).powi(2) + (x as f64 - 16.0).powi(2);
        if d < 100.0 { 200u8 } else { 40 }
    });
    let s = sobel(&v);
    let p = prewitt(&v);
    let at = |vol: &Volume, z, y, x| vol.get_f64(z, y, x);
    println!("sobel   centre {:.1} rim {:.1}", at(&s, 16, 16, 16), at(&s, 16, 16, 26));
    println!("prewitt centre {:.1} rim {:.1}", at(&p, 16, 16, 16), at(&p, 16, 16, 26));
    let h = hessian(&v, 1.5)?;
    for (c, comp) in HessianComponent::ALL.iter().zip(&h) {
        println!("hessian {} at rim {:+.2}", c.name(), at(comp, 16, 16, 26));
    }
    let codes = lbp2d(&v);
    let mut hist = [0usize; 256];
    for z in 0..shape.z {
        for y in 0..shape.y {
            for x in 0..shape.x {
                hist[codes.get_f64(z, y, x) as usize] += 1;
            }
        }
    }
    let distinct = hist.iter().filter(|&&n| n > 0).count();
    println!("lbp: {distinct} distinct codes, flat regions give code {}", codes.get_f64(0, 0, 0));
    Ok(())
}
