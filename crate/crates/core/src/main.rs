use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use ldct_recon::pipeline::{run_pipeline, RunConfig};

#[derive(Parser)]
#[command(name = "ldct-recon", version, about = "Low-dose fan-beam CT reconstruction experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every (dose, solver) pair of a JSON run configuration.
    Run {
        config: PathBuf,
        /// Overrides `output_dir` from the config.
        #[arg(long)]
        output_dir: Option<PathBuf>,
        /// Overrides the noise seed of the dose list.
        #[arg(long)]
        seed_override: Option<u64>,
        /// Worker threads for the numerical kernels (default: all cores).
        #[arg(long)]
        threads: Option<usize>,
        /// Only report errors.
        #[arg(long)]
        quiet: bool,
    },
}

fn main() -> ExitCode {
    let Command::Run { config, output_dir, seed_override, threads, quiet } = Cli::parse().command;
    let level = if quiet { "error" } else { "info" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();

    if let Some(n) = threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: cannot configure {n} threads: {e}");
            return ExitCode::from(2);
        }
    }
    let mut run = match RunConfig::load(&config) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    if let Some(dir) = output_dir {
        run.output_dir = dir;
    }
    if let Some(seed) = seed_override {
        run.doses.seed = seed;
    }
    match run_pipeline(&run) {
        Ok(manifest) => {
            if !quiet {
                print!("{}", manifest.summary_csv());
            }
            let failed = manifest.results.iter().filter(|r| !r.succeeded()).count();
            if failed == 0 {
                ExitCode::SUCCESS
            } else {
                eprintln!("error: {failed} of {} runs failed", manifest.results.len());
                ExitCode::FAILURE
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
