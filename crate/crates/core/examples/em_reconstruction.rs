//! MLEM and OSEM on clean and noisy data, with the EM objective recorded
//! after every full iteration.

use ldct_recon::{
    forward_project, make_subset_schedule, psnr, reconstruct, shepp_logan, simulate_low_dose, DoseModel,
    FanBeamGeometry, FanBeamProjector, Method, SolverConfig,
};

fn main() -> ldct_recon::Result<()> {
    let truth = shepp_logan(128)?;
    let geometry = FanBeamGeometry::new(180, 256)?;
    let clean = forward_project(&truth, &geometry)?;
    let noisy = simulate_low_dose(&clean, &DoseModel::new(1e4, 2)?)?;
    let system = FanBeamProjector::new(geometry, 128)?;
    let schedule = make_subset_schedule(180, 7)?;

    for (label, data) in [("clean", &clean), ("I0 = 1e4", &noisy)] {
        println!("{label}");
        for (method, iterations) in [(Method::Mlem, 20), (Method::Osem, 4)] {
            let config = SolverConfig { full_iterations: iterations, ..Default::default() };
            let (image, trace) = reconstruct(&method, data, &system, &schedule, &config, Some((&truth, 1.0)))?;
            let curve: Vec<String> = trace.rows.iter().map(|r| format!("{:.1}", r.psnr.unwrap())).collect();
            println!(
                "  {:<5} {iterations:>2} iterations: PSNR {:.2} dB, objective {:.3} -> {:.3}",
                method.name(),
                psnr(&image, &truth, 1.0)?,
                trace.rows[0].objective,
                trace.rows.last().unwrap().objective
            );
            println!("        PSNR per iteration [{}]", curve.join(" "));
        }
    }
    Ok(())
}
