//! Poisson low-dose simulation: detected counts and the noisy line
//! integrals they produce at the standard dose levels.

use ldct_recon::dose::simulate_counts;
use ldct_recon::{forward_project, shepp_logan, simulate_low_dose, DoseModel, FanBeamGeometry};

fn main() -> ldct_recon::Result<()> {
    let geometry = FanBeamGeometry::new(360, 512)?;
    let clean = forward_project(&shepp_logan(256)?, &geometry)?;
    let max = clean.values().iter().cloned().fold(0.0, f64::max);
    println!("clean sinogram: max line integral {max:.4}");

    for dose in [1e3, 5e3, 1e4, 5e4, 1e5] {
        let model = DoseModel::new(dose, 11)?;
        let counts = simulate_counts(&clean, &model)?;
        let noisy = simulate_low_dose(&clean, &model)?;
        let rms = (noisy.values().iter().zip(clean.values()).map(|(a, b)| (a - b).powi(2)).sum::<f64>()
            / clean.values().len() as f64)
            .sqrt();
        let min_count = counts.iter().cloned().fold(f64::INFINITY, f64::min);
        println!(
            "I0 {dose:>8.0e}: fewest counts {min_count:>6.0}, noise rms {rms:.4} ({:.1}% of the largest integral)",
            100.0 * rms / max
        );
    }
    Ok(())
}
