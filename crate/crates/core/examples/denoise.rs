//! Compare denoisers on a noisy two-phase volume by their error against the
//! clean signal.

use harpia::filters::{anisotropic_diffusion, gaussian, median, nlm, Conduction};
use harpia::{Shape, Volume};
use rand::SeedableRng;
use rand_distr::{Distribution, Normal};

fn rmse(a: &Volume, b: &Volume) -> f64 {
    let (a, b) = (a.to_f64_buffer(), b.to_f64_buffer());
    (a.iter().zip(b.iter()).map(|(x, y)| (x - y).powi(2)).sum::<f64>() / a.len() as f64).sqrt()
}

fn main() -> harpia::Result<()> {
    let shape = Shape::new(16, 48, 48);
    let clean = Volume::from_fn(shape, |_, y, x| if (x as i64 - 24).pow(2) + (y as i64 - 24).pow(2) < 225 { 180.0f32 } else { 60.0 });
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
    let noise = Normal::new(0.0, 20.0).unwrap();
    let noisy = Volume::from_vec(shape, clean.as_slice::<f32>().unwrap().iter().map(|&v| v + noise.sample(&mut rng) as f32).collect())?;

    println!("noisy      rmse {:.2}", rmse(&noisy, &clean));
    println!("gaussian   rmse {:.2}", rmse(&gaussian(&noisy, 1.0)?, &clean));
    println!("median r=1 rmse {:.2}", rmse(&median(&noisy, 1)?, &clean));
    println!("diffusion  rmse {:.2}", rmse(&anisotropic_diffusion(&noisy, 10, 30.0, 0.1, Conduction::Exponential)?, &clean));
    println!("nlm        rmse {:.2}", rmse(&nlm(&noisy, 20.0, 1, 3)?, &clean));
    Ok(())
}
