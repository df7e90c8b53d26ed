//! Total-variation denoising of a noisy phantom with the ROF model, plus
//! the gradient, divergence and dual projection it is built from.

use ldct_recon::variational::rof_tv_denoise_traced;
use ldct_recon::{divergence, dual_prox, gradient, psnr, shepp_logan, tv_value, ImageGrid};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

fn main() -> ldct_recon::Result<()> {
    let truth = shepp_logan(128)?;
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let noise = Normal::new(0.0, 0.1).unwrap();
    let noisy = ImageGrid::from_vec(128, truth.values().iter().map(|v| v + noise.sample(&mut rng)).collect())?;
    println!("noisy: PSNR {:.2} dB, TV {:.1}", psnr(&noisy, &truth, 1.0)?, tv_value(&noisy));

    for weight in [0.02, 0.05, 0.1, 0.2] {
        let out = rof_tv_denoise_traced(&noisy, weight, 200)?;
        println!(
            "weight {weight:>4}: PSNR {:.2} dB, TV {:.1}, ROF objective {:.3} -> {:.3}",
            psnr(&out.image, &truth, 1.0)?,
            tv_value(&out.image),
            out.objective.first().unwrap(),
            out.objective.last().unwrap()
        );
    }

    let g = gradient(&truth);
    let p = dual_prox(&g);
    let largest = (0..p.size() * p.size()).map(|j| p.magnitude(j)).fold(0.0, f64::max);
    println!("projected gradient: largest magnitude {largest}");
    println!("<∇x, p> = {:.6}, -<x, div p> = {:.6}", g.dot(&p), -truth.dot(&divergence(&p)));
    Ok(())
}
