//! Low-dose fan-beam CT reconstruction with TV-regularized ordered-subset EM.
//!
//! The crate bundles a Siddon ray-driven projector, analytic and random
//! phantoms, a Poisson low-dose simulator, total-variation operators,
//! iterative solvers (MLEM, OSEM, OSEM-CP and baselines), image-quality
//! metrics, and a config-driven experiment pipeline.
//!
//! ```no_run
//! use ldct_recon::{
//!     forward_project, make_subset_schedule, osem_cp, shepp_logan, simulate_low_dose, DoseModel,
//!     FanBeamGeometry, FanBeamProjector, SolverConfig,
//! };
//!
//! let truth = shepp_logan(128).unwrap();
//! let geometry = FanBeamGeometry::new(180, 256).unwrap();
//! let clean = forward_project(&truth, &geometry).unwrap();
//! let noisy = simulate_low_dose(&clean, &DoseModel::new(5e3, 7).unwrap()).unwrap();
//! let system = FanBeamProjector::new(geometry, 128).unwrap();
//! let schedule = make_subset_schedule(180, 7).unwrap();
//! let (lambda, tau) = (1e-4, 100.0);
//! let config = SolverConfig {
//!     lambda,
//!     tau,
//!     sigma: 1.0 / (8.0 * tau * lambda * lambda),
//!     full_iterations: 4,
//!     init_value: 0.2,
//!     ..Default::default()
//! };
//! let (image, trace) = osem_cp(&noisy, &system, &schedule, &config).unwrap();
//! ```

pub mod dose;
pub mod error;
pub mod geometry;
pub mod io;
pub mod metrics;
pub mod phantoms;
pub mod pipeline;
pub mod projector;
pub mod solvers;
pub mod variational;

pub use dose::{simulate_low_dose, DoseModel};
pub use error::{Error, Result};
pub use geometry::{
    make_subset_schedule, make_uniform_angles, FanBeamGeometry, ImageGrid, Sinogram, SubsetSchedule,
};
pub use metrics::{psnr, quality_report, ssim, QualityReport};
pub use phantoms::{random_ellipses, shepp_logan, SheppLoganVariant};
pub use pipeline::{run_pipeline, RunConfig, RunManifest};
pub use projector::{back_project, forward_project, FanBeamProjector, SystemModel, ViewBlock};
pub use solvers::{
    compute_em_objective, mlem, mlem_tv, objective_lambda, osem, osem_cp, oscp, reconstruct, reconstruct_observed,
    rof_tv_post, IterationObserver, Method, RunTrace, SolverConfig, Tracer,
};
pub use variational::{divergence, dual_prox, gradient, positive_root, rof_tv_denoise, tv_value};
