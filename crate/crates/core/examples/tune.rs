//! Coarse grid search for solver hyperparameters.
//!
//! For every grid point the solver runs for `--max-iterations` full passes
//! with the ground truth attached, so the best iteration count comes for
//! free from the trace. Prints every point and finally the best config as
//! JSON, ready to paste into a run config.
//!
//! ```text
//! cargo run --release --example tune -- --method osem-cp --dose 5e3 \
//!     --lambdas 1e-4,2e-4 --taus 30,50,100 --max-iterations 6
//! ```

use clap::{Parser, ValueEnum};
use ldct_recon::pipeline::PhantomSpec;
use ldct_recon::{
    forward_project, make_subset_schedule, reconstruct, simulate_low_dose, DoseModel, FanBeamGeometry,
    FanBeamProjector, Method, SolverConfig,
};

#[derive(Clone, Copy, ValueEnum)]
enum Phantom {
    SheppLogan,
    Ellipses,
}

#[derive(Clone, Copy, ValueEnum)]
enum Solver {
    Osem,
    OsemCp,
    Oscp,
    MlemTv,
    RofTv,
}

#[derive(Parser)]
struct Args {
    #[arg(long, value_enum, default_value = "shepp-logan")]
    phantom: Phantom,
    #[arg(long, default_value_t = 256)]
    size: usize,
    #[arg(long, default_value_t = 360)]
    views: usize,
    #[arg(long, default_value_t = 512)]
    cells: usize,
    #[arg(long)]
    dose: f64,
    /// Noise seed of the simulated acquisition.
    #[arg(long, default_value_t = 11)]
    noise_seed: u64,
    #[arg(long, default_value_t = 7)]
    schedule_seed: u64,
    #[arg(long, value_enum)]
    method: Solver,
    #[arg(long, value_delimiter = ',', default_value = "0")]
    lambdas: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_value = "1")]
    taus: Vec<f64>,
    /// Dual steps as fractions of the bound `1/(8τλ²)`.
    #[arg(long, value_delimiter = ',', default_value = "1")]
    sigma_fractions: Vec<f64>,
    /// OSCP relaxation values.
    #[arg(long, value_delimiter = ',', default_value = "1")]
    relaxations: Vec<f64>,
    /// Initial pixel values.
    #[arg(long, value_delimiter = ',', default_value = "1")]
    inits: Vec<f64>,
    #[arg(long, default_value_t = 5)]
    max_iterations: usize,
    /// ROF iterations for the TV baselines.
    #[arg(long, default_value_t = 50)]
    tv_iterations: usize,
}

fn main() -> ldct_recon::Result<()> {
    let args = Args::parse();
    let phantom = match args.phantom {
        Phantom::SheppLogan => PhantomSpec::SheppLogan { size: args.size, variant: Default::default() },
        Phantom::Ellipses => PhantomSpec::RandomEllipses { size: args.size, count_range: (3, 8), seed: 1 },
    };
    let truth = phantom.build()?;
    let geometry = FanBeamGeometry::new(args.views, args.cells)?;
    let clean = forward_project(&truth, &geometry)?;
    let noisy = simulate_low_dose(&clean, &DoseModel::new(args.dose, args.noise_seed)?)?;
    let system = FanBeamProjector::new(geometry, args.size)?;
    let schedule = make_subset_schedule(args.views, args.schedule_seed)?;

    let mut best: Option<(f64, f64, SolverConfig)> = None;
    for &lambda in &args.lambdas {
        for &tau in &args.taus {
            for &fraction in &args.sigma_fractions {
                for (&relaxation, &init_value) in args
                    .relaxations
                    .iter()
                    .flat_map(|r| args.inits.iter().map(move |i| (r, i)))
                {
                    let sigma = if lambda > 0.0 { fraction / (8.0 * tau * lambda * lambda) } else { 1.0 };
                    let config = SolverConfig {
                        lambda,
                        tau,
                        sigma,
                        relaxation,
                        init_value,
                        full_iterations: args.max_iterations,
                        ..Default::default()
                    };
                    let method = match args.method {
                        Solver::Osem => Method::Osem,
                        Solver::OsemCp => Method::OsemCp,
                        Solver::Oscp => Method::Oscp,
                        Solver::MlemTv => Method::MlemTv { tv_inner_iterations: args.tv_iterations },
                        Solver::RofTv => Method::RofTv { tv_iterations: args.tv_iterations },
                    };
                    let (_, trace) = match reconstruct(&method, &noisy, &system, &schedule, &config, Some((&truth, 1.0))) {
                        Ok(r) => r,
                        Err(e) => {
                            println!("lambda {lambda:e} tau {tau} sigma {sigma:.4e} omega {relaxation} init {init_value}: {e}");
                            continue;
                        }
                    };
                    let row = trace
                        .rows
                        .iter()
                        .max_by(|a, b| a.psnr.partial_cmp(&b.psnr).unwrap())
                        .expect("at least one iteration");
                    let (psnr, ssim) = (row.psnr.unwrap(), row.ssim.unwrap());
                    let curve: Vec<String> = trace.rows.iter().map(|r| format!("{:.2}", r.psnr.unwrap())).collect();
                    println!(
                        "lambda {lambda:e} tau {tau} sigma {sigma:.4e} omega {relaxation} init {init_value}: best T={} PSNR {psnr:.2} SSIM {ssim:.4}  [{}]",
                        row.iteration,
                        curve.join(" ")
                    );
                    // RofTv reports its single row under the OSEM iteration count
                    let iterations = row.iteration;
                    if best.as_ref().map_or(true, |b| psnr > b.0) {
                        best = Some((psnr, ssim, SolverConfig { full_iterations: iterations, ..config }));
                    }
                }
            }
        }
    }
    if let Some((psnr, ssim, config)) = best {
        println!("best PSNR {psnr:.3} SSIM {ssim:.4}");
        println!("{}", serde_json::to_string(&config)?);
    }
    Ok(())
}
