//! PSNR and SSIM of a few image degradations against a reference.

use ldct_recon::metrics::mse;
use ldct_recon::{quality_report, rof_tv_denoise, shepp_logan, ImageGrid};

fn main() -> ldct_recon::Result<()> {
    let reference = shepp_logan(128)?;
    let map = |f: &dyn Fn(usize, f64) -> f64| {
        ImageGrid::from_vec(128, reference.values().iter().enumerate().map(|(j, &v)| f(j, v)).collect())
    };
    let cases = [
        ("identical", reference.clone()),
        ("offset +0.02", map(&|_, v| v + 0.02)?),
        ("scaled x0.9", map(&|_, v| 0.9 * v)?),
        ("checkerboard ±0.05", map(&|j, v| v + if (j / 128 + j % 128) % 2 == 0 { 0.05 } else { -0.05 })?),
        ("over-smoothed", rof_tv_denoise(&reference, 0.2, 200)?),
    ];
    for (name, image) in cases {
        let q = quality_report(&image, &reference, 1.0)?;
        let capped = if q.psnr_capped { " (capped)" } else { "" };
        println!("{name:<20} MSE {:.2e}  PSNR {:7.2} dB{capped}  SSIM {:.4}", mse(&image, &reference)?, q.psnr, q.ssim);
    }
    Ok(())
}
