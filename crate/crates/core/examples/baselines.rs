//! Every solver on the same low-dose acquisition of a random-ellipse
//! phantom, ranked by PSNR. Hyperparameters are the ones tuned for the
//! 256² ellipse benchmark, reused here at 128².

use ldct_recon::{
    forward_project, make_subset_schedule, quality_report, random_ellipses, reconstruct, simulate_low_dose,
    DoseModel, FanBeamGeometry, FanBeamProjector, Method, SolverConfig,
};

fn main() -> ldct_recon::Result<()> {
    let truth = random_ellipses(128, (3, 8), 1)?.image;
    let geometry = FanBeamGeometry::new(180, 256)?;
    let noisy = simulate_low_dose(&forward_project(&truth, &geometry)?, &DoseModel::new(1e4, 11)?)?;
    let system = FanBeamProjector::new(geometry, 128)?;
    let schedule = make_subset_schedule(180, 7)?;

    let cp = |lambda: f64, tau: f64, iterations| SolverConfig {
        lambda,
        tau,
        sigma: 1.0 / (8.0 * tau * lambda * lambda),
        full_iterations: iterations,
        init_value: 0.2,
        ..Default::default()
    };
    let runs = [
        (Method::Osem, SolverConfig { full_iterations: 1, ..Default::default() }),
        (Method::Mlem, SolverConfig { full_iterations: 20, ..Default::default() }),
        (Method::OsemCp, cp(2e-3, 10.0, 1)),
        (Method::Oscp, SolverConfig { relaxation: 0.1, ..cp(1e-4, 1.0, 8) }),
        (Method::MlemTv { tv_inner_iterations: 50 }, SolverConfig { lambda: 2e-3, full_iterations: 40, ..Default::default() }),
        (Method::RofTv { tv_iterations: 400 }, SolverConfig { lambda: 0.8, full_iterations: 1, ..Default::default() }),
    ];
    let mut results = Vec::new();
    for (method, config) in runs {
        let (image, _) = reconstruct(&method, &noisy, &system, &schedule, &config, None)?;
        results.push((method.name(), quality_report(&image, &truth, 1.0)?));
    }
    results.sort_by(|a, b| b.1.psnr.total_cmp(&a.1.psnr));
    for (name, q) in results {
        println!("{name:<8} PSNR {:6.2} dB  SSIM {:.3}", q.psnr, q.ssim);
    }
    Ok(())
}
