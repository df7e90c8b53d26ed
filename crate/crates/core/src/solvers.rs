//! Iterative reconstruction drivers: MLEM, OSEM, the TV-regularized
//! ordered-subset EM with Chambolle–Pock inner steps (OSEM-CP), and the
//! baselines it is compared against (MLEM-TV, OSCP, ROF-TV post-filtering).
//!
//! Every ordered-subset method uses one projection view per subset and visits
//! the views in the order given by a [`SubsetSchedule`]. Solvers are generic
//! over [`SystemModel`] so the update rules can be exercised on toy systems.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{ImageGrid, Sinogram, SubsetSchedule};
use crate::metrics;
use crate::projector::{forward_project_model, SystemModel, ViewBlock};
use crate::variational::{
    divergence_into, dual_prox_in_place, em_prox_pixel, gradient_into, rof_tv_denoise, tv_value,
};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    /// TV weight `λ`.
    pub lambda: f64,
    /// Primal step `τ`.
    pub tau: f64,
    /// Dual step `σ`.
    pub sigma: f64,
    /// Number of full passes over the data, `T`.
    pub full_iterations: usize,
    /// Floor applied to projection and sensitivity denominators.
    pub epsilon: f64,
    /// Initial pixel value.
    pub init_value: f64,
    /// Initial value of both dual components.
    pub dual_init: f64,
    /// OS-SART relaxation used by [`oscp`].
    pub relaxation: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            lambda: 0.0,
            tau: 1.0,
            sigma: 1.0,
            full_iterations: 5,
            epsilon: 1e-12,
            init_value: 1.0,
            dual_init: 0.0,
            relaxation: 1.0,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if self.full_iterations == 0 {
            return Err(Error::invalid("full_iterations must be at least 1"));
        }
        if !(self.init_value > 0.0) || !self.init_value.is_finite() {
            return Err(Error::invalid("init_value must be positive"));
        }
        if !(self.epsilon > 0.0) {
            return Err(Error::invalid("epsilon must be positive"));
        }
        if !(self.lambda >= 0.0) || !self.lambda.is_finite() {
            return Err(Error::invalid("lambda must be nonnegative"));
        }
        Ok(())
    }

    fn validate_primal_dual(&self) -> Result<()> {
        self.validate()?;
        if !(self.tau > 0.0) || !self.tau.is_finite() {
            return Err(Error::invalid(format!("tau must be positive, got {}", self.tau)));
        }
        if !(self.sigma > 0.0) || !self.sigma.is_finite() {
            return Err(Error::invalid(format!("sigma must be positive, got {}", self.sigma)));
        }
        if !self.dual_init.is_finite() {
            return Err(Error::invalid("dual_init must be finite"));
        }
        // ‖∇‖² ≤ 8 for unit-spacing forward differences
        let product = self.sigma * self.tau * self.lambda * self.lambda * 8.0;
        if product > 1.0 {
            log::warn!("primal-dual steps exceed the usual bound: σ·τ·λ²·8 = {product:.3} > 1");
        }
        Ok(())
    }
}

/// One row of a [`RunTrace`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub iteration: usize,
    pub objective: f64,
    pub tv: f64,
    pub psnr: Option<f64>,
    pub ssim: Option<f64>,
    pub seconds: f64,
}

/// Per-full-iteration diagnostics.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RunTrace {
    pub rows: Vec<TraceRow>,
}

impl RunTrace {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn objectives(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.objective).collect()
    }

    /// CSV with header `iteration,objective,tv,psnr,ssim,seconds`. Missing
    /// metrics, and wall times when `with_timings` is false, are left empty.
    pub fn to_csv(&self, with_timings: bool) -> String {
        let mut out = String::from("iteration,objective,tv,psnr,ssim,seconds\n");
        let opt = |v: Option<f64>| v.map(|x| format!("{x}")).unwrap_or_default();
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                r.iteration,
                r.objective,
                r.tv,
                opt(r.psnr),
                opt(r.ssim),
                if with_timings { format!("{}", r.seconds) } else { String::new() }
            ));
        }
        out
    }
}

/// Reconstruction algorithm together with its algorithm-specific counts.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Method {
    Mlem,
    Osem,
    OsemCp,
    /// Alternates a full MLEM update with ROF smoothing of weight `λ`.
    MlemTv { tv_inner_iterations: usize },
    Oscp,
    /// OSEM reconstruction followed by ROF denoising of weight `λ`.
    RofTv { tv_iterations: usize },
}

impl Method {
    pub fn name(&self) -> &'static str {
        match self {
            Method::Mlem => "mlem",
            Method::Osem => "osem",
            Method::OsemCp => "osem_cp",
            Method::MlemTv { .. } => "mlem_tv",
            Method::Oscp => "oscp",
            Method::RofTv { .. } => "rof_tv",
        }
    }
}

/// Called with the iterate after every full iteration (1-based).
pub trait IterationObserver {
    fn observe(&mut self, iteration: usize, image: &ImageGrid) -> Result<()>;
}

struct NoObserver;

impl IterationObserver for NoObserver {
    fn observe(&mut self, _: usize, _: &ImageGrid) -> Result<()> {
        Ok(())
    }
}

/// Builds a [`RunTrace`]: EM objective, TV, and optionally quality against a
/// reference image.
pub struct Tracer<'a, S: SystemModel> {
    system: &'a S,
    noisy: &'a Sinogram,
    objective_lambda: f64,
    epsilon: f64,
    reference: Option<(&'a ImageGrid, f64)>,
    start: Instant,
    pub trace: RunTrace,
}

impl<'a, S: SystemModel> Tracer<'a, S> {
    pub fn new(system: &'a S, noisy: &'a Sinogram, objective_lambda: f64, epsilon: f64) -> Self {
        Self {
            system,
            noisy,
            objective_lambda,
            epsilon,
            reference: None,
            start: Instant::now(),
            trace: RunTrace::default(),
        }
    }

    pub fn with_reference(mut self, reference: &'a ImageGrid, data_range: f64) -> Self {
        self.reference = Some((reference, data_range));
        self
    }
}

impl<S: SystemModel> IterationObserver for Tracer<'_, S> {
    fn observe(&mut self, iteration: usize, image: &ImageGrid) -> Result<()> {
        let seconds = self.start.elapsed().as_secs_f64();
        let objective = em_objective_impl(image, self.noisy, self.system, self.objective_lambda, self.epsilon)?;
        let (psnr, ssim) = match self.reference {
            Some((r, range)) => (
                Some(metrics::psnr(image, r, range)?),
                Some(metrics::ssim(image, r, range)?),
            ),
            None => (None, None),
        };
        self.trace.rows.push(TraceRow {
            iteration,
            objective,
            tv: tv_value(image),
            psnr,
            ssim,
            seconds,
        });
        Ok(())
    }
}

fn check_inputs<S: SystemModel>(noisy: &Sinogram, system: &S) -> Result<()> {
    if noisy.num_angles() != system.num_views() || noisy.detector_cells() != system.rays_per_view() {
        return Err(Error::shape(
            format!("{}x{} sinogram", system.num_views(), system.rays_per_view()),
            format!("{}x{} sinogram", noisy.num_angles(), noisy.detector_cells()),
        ));
    }
    noisy.check_nonnegative()
}

fn check_schedule<S: SystemModel>(schedule: &SubsetSchedule, system: &S) -> Result<()> {
    if schedule.num_subsets() != system.num_views() {
        return Err(Error::shape(
            format!("schedule over {} views", system.num_views()),
            format!("schedule over {} views", schedule.num_subsets()),
        ));
    }
    Ok(())
}

fn check_iterate(x: &[f64], iteration: usize, nonnegative: bool) -> Result<()> {
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite { iteration });
    }
    if nonnegative {
        if let Some(j) = x.iter().position(|&v| v < 0.0) {
            return Err(Error::Invariant(format!(
                "pixel {j} negative ({}) after full iteration {iteration}",
                x[j]
            )));
        }
    }
    Ok(())
}

/// `p_i / max((Ax)_i, ε)`.
fn em_ratio(measured: &[f64], projected: &[f64], epsilon: f64) -> Vec<f64> {
    measured
        .iter()
        .zip(projected)
        .map(|(p, y)| p / y.max(epsilon))
        .collect()
}

/// Multiplicative EM update `x_j ← x_j·back_j / sens_j`; pixels the data do
/// not see (`sens_j = 0`) keep their value.
fn em_update(x: &mut [f64], back: &[f64], sens: &[f64], epsilon: f64) {
    for ((xj, b), s) in x.iter_mut().zip(back).zip(sens) {
        if *s > 0.0 {
            *xj *= b / s.max(epsilon);
        }
    }
}

fn total_sensitivity<S: SystemModel>(system: &S) -> Result<Vec<f64>> {
    let mut sens = vec![0.0; system.num_pixels()];
    for v in 0..system.num_views() {
        for (s, b) in sens.iter_mut().zip(system.view_block(v)?.sensitivity()) {
            *s += b;
        }
    }
    Ok(sens)
}

fn mlem_impl<S: SystemModel>(
    noisy: &Sinogram,
    system: &S,
    config: &SolverConfig,
    tv_inner_iterations: Option<usize>,
    observer: &mut dyn IterationObserver,
) -> Result<ImageGrid> {
    check_inputs(noisy, system)?;
    config.validate()?;
    let n = system.image_size();
    let sens = total_sensitivity(system)?;
    let mut x = vec![config.init_value; n * n];
    for iteration in 1..=config.full_iterations {
        let mut back = vec![0.0; n * n];
        for v in 0..system.num_views() {
            let block = system.view_block(v)?;
            let ratio = em_ratio(noisy.view(v), &block.forward(&x), config.epsilon);
            block.back_accumulate(&ratio, &mut back);
        }
        em_update(&mut x, &back, &sens, config.epsilon);
        check_iterate(&x, iteration, true)?;
        if let Some(inner) = tv_inner_iterations {
            if config.lambda > 0.0 && inner > 0 {
                let smoothed = rof_tv_denoise(&ImageGrid::from_vec(n, x)?, config.lambda, inner)?;
                x = smoothed.into_values();
                x.iter_mut().for_each(|v| *v = v.max(0.0));
            }
        }
        observer.observe(iteration, &ImageGrid::from_vec(n, x.clone())?)?;
    }
    ImageGrid::from_vec(n, x)
}

#[derive(Clone, Copy, PartialEq)]
enum SubsetUpdate {
    Em,
    EmPrimalDual,
    SartPrimalDual,
}

/// Dual ascent on the TV term followed by the anchor `x + τλ·div q`.
struct TvCoupling {
    n: usize,
    qx: Vec<f64>,
    qy: Vec<f64>,
    gx: Vec<f64>,
    gy: Vec<f64>,
    div: Vec<f64>,
}

impl TvCoupling {
    fn new(n: usize, dual_init: f64) -> Self {
        let mut qx = vec![dual_init; n * n];
        let mut qy = vec![dual_init; n * n];
        dual_prox_in_place(&mut qx, &mut qy);
        Self {
            n,
            qx,
            qy,
            gx: vec![0.0; n * n],
            gy: vec![0.0; n * n],
            div: vec![0.0; n * n],
        }
    }

    fn anchor(&mut self, x: &[f64], x_bar: &[f64], config: &SolverConfig) -> Vec<f64> {
        let lambda = config.lambda;
        if lambda == 0.0 {
            return x.to_vec();
        }
        gradient_into(self.n, x_bar, &mut self.gx, &mut self.gy);
        let s = config.sigma * lambda;
        for j in 0..self.qx.len() {
            self.qx[j] += s * self.gx[j];
            self.qy[j] += s * self.gy[j];
        }
        dual_prox_in_place(&mut self.qx, &mut self.qy);
        divergence_into(self.n, &self.qx, &self.qy, &mut self.div);
        let t = config.tau * lambda;
        x.iter().zip(&self.div).map(|(xj, d)| xj + t * d).collect()
    }
}

fn sart_step(block: &ViewBlock, measured: &[f64], x: &[f64], epsilon: f64) -> (Vec<f64>, Vec<f64>) {
    let projected = block.forward(x);
    let residual: Vec<f64> = block
        .row_sums()
        .into_iter()
        .zip(measured.iter().zip(&projected))
        .map(|(len, (p, y))| if len > 0.0 { (p - y) / len.max(epsilon) } else { 0.0 })
        .collect();
    block.back_with_sensitivity(&residual)
}

fn ordered_subsets_impl<S: SystemModel>(
    update: SubsetUpdate,
    noisy: &Sinogram,
    system: &S,
    schedule: &SubsetSchedule,
    config: &SolverConfig,
    observer: &mut dyn IterationObserver,
) -> Result<ImageGrid> {
    check_inputs(noisy, system)?;
    check_schedule(schedule, system)?;
    match update {
        SubsetUpdate::Em => config.validate()?,
        _ => config.validate_primal_dual()?,
    }
    let n = system.image_size();
    let eps = config.epsilon;
    let mut x = vec![config.init_value; n * n];
    let mut x_bar = x.clone();
    let mut coupling = TvCoupling::new(n, config.dual_init);

    for iteration in 1..=config.full_iterations {
        for &v in schedule.order() {
            let block = system.view_block(v)?;
            let measured = noisy.view(v);
            match update {
                SubsetUpdate::Em => {
                    let ratio = em_ratio(measured, &block.forward(&x), eps);
                    let (back, sens) = block.back_with_sensitivity(&ratio);
                    em_update(&mut x, &back, &sens, eps);
                }
                SubsetUpdate::EmPrimalDual => {
                    let anchor = coupling.anchor(&x, &x_bar, config);
                    let ratio = em_ratio(measured, &block.forward(&x), eps);
                    let (back, sens) = block.back_with_sensitivity(&ratio);
                    for j in 0..x.len() {
                        let u = em_prox_pixel(config.tau, sens[j], back[j], anchor[j], x[j]);
                        x_bar[j] = 2.0 * u - x[j];
                        x[j] = u;
                    }
                }
                SubsetUpdate::SartPrimalDual => {
                    let anchor = coupling.anchor(&x, &x_bar, config);
                    let (back, sens) = sart_step(&block, measured, &x, eps);
                    for j in 0..x.len() {
                        let step = if sens[j] > 0.0 { back[j] / sens[j].max(eps) } else { 0.0 };
                        let u = anchor[j] + config.relaxation * step;
                        x_bar[j] = 2.0 * u - x[j];
                        x[j] = u;
                    }
                }
            }
        }
        // finiteness first: the clamp below would turn NaN into 0
        check_iterate(&x, iteration, false)?;
        if update == SubsetUpdate::SartPrimalDual {
            x.iter_mut().for_each(|v| *v = v.max(0.0));
        }
        check_iterate(&x, iteration, true)?;
        observer.observe(iteration, &ImageGrid::from_vec(n, x.clone())?)?;
    }
    ImageGrid::from_vec(n, x)
}

/// Maximum-likelihood EM: `T` full multiplicative updates.
pub fn mlem<S: SystemModel>(noisy: &Sinogram, system: &S, config: &SolverConfig) -> Result<ImageGrid> {
    mlem_impl(noisy, system, config, None, &mut NoObserver)
}

/// Ordered-subset EM with one view per subset.
pub fn osem<S: SystemModel>(
    noisy: &Sinogram,
    system: &S,
    schedule: &SubsetSchedule,
    config: &SolverConfig,
) -> Result<ImageGrid> {
    ordered_subsets_impl(SubsetUpdate::Em, noisy, system, schedule, config, &mut NoObserver)
}

/// TV-regularized ordered-subset EM. For every view: dual ascent
/// `q ← proj(q + σλ∇x̄)`, primal EM proximal step anchored at `x + τλ·div q`,
/// over-relaxation `x̄ ← 2x_new − x_old`.
///
/// The trace objective uses weight `λ·M` (`M` views): the per-view TV step is
/// applied once per subset, so a full pass carries `M` times the weight.
pub fn osem_cp<S: SystemModel>(
    noisy: &Sinogram,
    system: &S,
    schedule: &SubsetSchedule,
    config: &SolverConfig,
) -> Result<(ImageGrid, RunTrace)> {
    let mut tracer = Tracer::new(
        system,
        noisy,
        config.lambda * system.num_views() as f64,
        config.epsilon,
    );
    let image = ordered_subsets_impl(SubsetUpdate::EmPrimalDual, noisy, system, schedule, config, &mut tracer)?;
    Ok((image, tracer.trace))
}

/// Two-step alternation: one full MLEM update, then `tv_inner_iterations`
/// ROF iterations of weight `λ` and a clamp at zero.
pub fn mlem_tv<S: SystemModel>(
    noisy: &Sinogram,
    system: &S,
    config: &SolverConfig,
    tv_inner_iterations: usize,
) -> Result<ImageGrid> {
    mlem_impl(noisy, system, config, Some(tv_inner_iterations), &mut NoObserver)
}

/// Ordered-subset SART with the same primal-dual TV coupling as
/// [`osem_cp`]: the primal step adds the SART correction
/// `ω·C⁻¹Aᵀ R⁻¹(p − Ax)` (row/column-sum normalized) to the TV anchor.
/// Negative pixels are clamped after each full iteration.
pub fn oscp<S: SystemModel>(
    noisy: &Sinogram,
    system: &S,
    schedule: &SubsetSchedule,
    config: &SolverConfig,
) -> Result<ImageGrid> {
    ordered_subsets_impl(
        SubsetUpdate::SartPrimalDual,
        noisy,
        system,
        schedule,
        config,
        &mut NoObserver,
    )
}

/// OSEM reconstruction post-processed by ROF denoising with weight `λ`.
pub fn rof_tv_post<S: SystemModel>(
    noisy: &Sinogram,
    system: &S,
    schedule: &SubsetSchedule,
    config: &SolverConfig,
    tv_iterations: usize,
) -> Result<ImageGrid> {
    let recon = osem(noisy, system, schedule, config)?;
    rof_post(recon, config, tv_iterations)
}

fn rof_post(recon: ImageGrid, config: &SolverConfig, tv_iterations: usize) -> Result<ImageGrid> {
    if config.lambda == 0.0 || tv_iterations == 0 {
        return Ok(recon);
    }
    let n = recon.size();
    let mut values = rof_tv_denoise(&recon, config.lambda, tv_iterations)?.into_values();
    values.iter_mut().for_each(|v| *v = v.max(0.0));
    ImageGrid::from_vec(n, values)
}

fn em_objective_impl<S: SystemModel>(
    image: &ImageGrid,
    noisy: &Sinogram,
    system: &S,
    lambda: f64,
    epsilon: f64,
) -> Result<f64> {
    let projected = forward_project_model(image, system)?;
    let data: f64 = projected
        .values()
        .iter()
        .zip(noisy.values())
        .map(|(&y, &p)| if p == 0.0 { y } else { y - p * y.max(epsilon).ln() })
        .sum();
    Ok(data + lambda * tv_value(image))
}

/// Penalized Poisson negative log-likelihood up to constants:
/// `Σ_i [(Ax)_i − p_i ln (Ax)_i] + λ·TV(x)`, with `(Ax)_i` floored at
/// `1e-12` inside the logarithm.
pub fn compute_em_objective<S: SystemModel>(
    image: &ImageGrid,
    noisy: &Sinogram,
    system: &S,
    lambda: f64,
) -> Result<f64> {
    check_inputs(noisy, system)?;
    em_objective_impl(image, noisy, system, lambda, SolverConfig::default().epsilon)
}

/// Trace weight given to TV for `method`: `λ·M` for the per-view methods,
/// `λ` for MLEM-TV, 0 for the unregularized ones.
pub fn objective_lambda<S: SystemModel>(method: &Method, system: &S, config: &SolverConfig) -> f64 {
    match method {
        Method::OsemCp | Method::Oscp => config.lambda * system.num_views() as f64,
        Method::MlemTv { .. } => config.lambda,
        _ => 0.0,
    }
}

/// Runs `method`, handing the iterate to `observer` after every full
/// iteration (once, after post-processing, for [`Method::RofTv`]).
pub fn reconstruct_observed<S: SystemModel>(
    method: &Method,
    noisy: &Sinogram,
    system: &S,
    schedule: &SubsetSchedule,
    config: &SolverConfig,
    observer: &mut dyn IterationObserver,
) -> Result<ImageGrid> {
    match method {
        Method::Mlem => mlem_impl(noisy, system, config, None, observer),
        Method::MlemTv { tv_inner_iterations } => {
            mlem_impl(noisy, system, config, Some(*tv_inner_iterations), observer)
        }
        Method::Osem => ordered_subsets_impl(SubsetUpdate::Em, noisy, system, schedule, config, observer),
        Method::OsemCp => ordered_subsets_impl(SubsetUpdate::EmPrimalDual, noisy, system, schedule, config, observer),
        Method::Oscp => ordered_subsets_impl(SubsetUpdate::SartPrimalDual, noisy, system, schedule, config, observer),
        Method::RofTv { tv_iterations } => {
            let recon = ordered_subsets_impl(SubsetUpdate::Em, noisy, system, schedule, config, &mut NoObserver)?;
            let out = rof_post(recon, config, *tv_iterations)?;
            observer.observe(config.full_iterations, &out)?;
            Ok(out)
        }
    }
}

/// Runs `method` and records a trace, optionally scored against `reference`.
pub fn reconstruct<S: SystemModel>(
    method: &Method,
    noisy: &Sinogram,
    system: &S,
    schedule: &SubsetSchedule,
    config: &SolverConfig,
    reference: Option<(&ImageGrid, f64)>,
) -> Result<(ImageGrid, RunTrace)> {
    let mut tracer = Tracer::new(system, noisy, objective_lambda(method, system, config), config.epsilon);
    if let Some((r, range)) = reference {
        tracer = tracer.with_reference(r, range);
    }
    let image = reconstruct_observed(method, noisy, system, schedule, config, &mut tracer)?;
    Ok((image, tracer.trace))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{make_subset_schedule, FanBeamGeometry};
    use crate::projector::{forward_project, FanBeamProjector};

    /// 2×2 image, one view, ray `i` sees only pixel `i` with unit weight.
    struct Diagonal;

    impl SystemModel for Diagonal {
        fn image_size(&self) -> usize {
            2
        }
        fn num_views(&self) -> usize {
            1
        }
        fn rays_per_view(&self) -> usize {
            4
        }
        fn view_block(&self, _view: usize) -> Result<ViewBlock> {
            ViewBlock::from_rows(2, &[vec![(0, 1.0)], vec![(1, 1.0)], vec![(2, 1.0)], vec![(3, 1.0)]])
        }
    }

    fn small_problem() -> (FanBeamProjector, ImageGrid, Sinogram) {
        let g = FanBeamGeometry::new(12, 40).unwrap();
        let n = 16;
        let truth = ImageGrid::from_vec(
            n,
            (0..n * n).map(|j| 0.2 + ((j * 7) % 11) as f64 / 20.0).collect(),
        )
        .unwrap();
        let sino = forward_project(&truth, &g).unwrap();
        (FanBeamProjector::new(g, n).unwrap(), truth, sino)
    }

    #[test]
    fn mlem_decoupled_rays_map_to_data() {
        let p = Sinogram::from_vec(1, 4, vec![0.5, 2.0, 0.0, 3.25]).unwrap();
        let cfg = SolverConfig { full_iterations: 1, ..Default::default() };
        let x = mlem(&p, &Diagonal, &cfg).unwrap();
        assert_eq!(x.values(), p.values());
    }

    #[test]
    fn mlem_zero_data_gives_zero_image() {
        let (sys, _, sino) = small_problem();
        let zero = Sinogram::zeros(sino.num_angles(), sino.detector_cells());
        let x = mlem(&zero, &sys, &SolverConfig { full_iterations: 2, ..Default::default() }).unwrap();
        assert!(x.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn exact_data_fixed_points() {
        let (sys, truth, sino) = small_problem();
        let schedule = make_subset_schedule(12, 3).unwrap();
        let fixed = |x: &ImageGrid| {
            x.values()
                .iter()
                .zip(truth.values())
                .map(|(a, b)| ((a - b) / b).abs())
                .fold(0.0, f64::max)
        };
        // start at the truth by making it the (constant) initial image
        let flat = ImageGrid::filled(16, 0.6);
        let flat_sino = forward_project(&flat, sys.geometry()).unwrap();
        let cfg = SolverConfig { init_value: 0.6, full_iterations: 3, ..Default::default() };
        let x = mlem(&flat_sino, &sys, &cfg).unwrap();
        assert!(x.values().iter().all(|v| ((v - 0.6) / 0.6).abs() < 1e-12));
        let x = osem(&flat_sino, &sys, &schedule, &cfg).unwrap();
        assert!(x.values().iter().all(|v| ((v - 0.6) / 0.6).abs() < 1e-12));
        let x = oscp(&flat_sino, &sys, &schedule, &cfg).unwrap();
        assert!(x.values().iter().all(|v| ((v - 0.6) / 0.6).abs() < 1e-12));
        // non-constant truth is checked through the shared update helpers
        let mut x = truth.values().to_vec();
        for v in 0..12 {
            let block = sys.view_block(v).unwrap();
            let ratio = em_ratio(sino.view(v), &block.forward(&x), 1e-12);
            let (back, sens) = block.back_with_sensitivity(&ratio);
            em_update(&mut x, &back, &sens, 1e-12);
        }
        assert!(fixed(&ImageGrid::from_vec(16, x).unwrap()) < 1e-12);
    }

    #[test]
    fn single_view_osem_equals_mlem() {
        let g = FanBeamGeometry::new(1, 48).unwrap();
        let sys = FanBeamProjector::new(g.clone(), 16).unwrap();
        let truth = ImageGrid::from_vec(16, (0..256).map(|j| (j % 5) as f64 / 4.0).collect()).unwrap();
        let sino = forward_project(&truth, &g).unwrap();
        let cfg = SolverConfig { full_iterations: 4, ..Default::default() };
        let a = mlem(&sino, &sys, &cfg).unwrap();
        let b = osem(&sino, &sys, &SubsetSchedule::sequential(1), &cfg).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn osem_cp_without_tv_tends_to_osem() {
        let (sys, _, sino) = small_problem();
        let schedule = make_subset_schedule(12, 1).unwrap();
        let cfg = SolverConfig { full_iterations: 2, tau: 1e14, sigma: 1.0, lambda: 0.0, ..Default::default() };
        let a = osem(&sino, &sys, &schedule, &cfg).unwrap();
        let (b, trace) = osem_cp(&sino, &sys, &schedule, &cfg).unwrap();
        assert_eq!(trace.len(), 2);
        let diff = a
            .values()
            .iter()
            .zip(b.values())
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max);
        assert!(diff < 1e-8, "{diff}");
    }

    #[test]
    fn mlem_tv_without_weight_equals_mlem() {
        let (sys, _, sino) = small_problem();
        let cfg = SolverConfig { full_iterations: 3, ..Default::default() };
        assert_eq!(mlem(&sino, &sys, &cfg).unwrap(), mlem_tv(&sino, &sys, &cfg, 10).unwrap());
    }

    #[test]
    fn config_errors() {
        let (sys, _, sino) = small_problem();
        let schedule = make_subset_schedule(12, 1).unwrap();
        let bad_tau = SolverConfig { tau: 0.0, ..Default::default() };
        assert!(osem_cp(&sino, &sys, &schedule, &bad_tau).is_err());
        let bad_sigma = SolverConfig { sigma: -1.0, ..Default::default() };
        assert!(oscp(&sino, &sys, &schedule, &bad_sigma).is_err());
        let zero_iter = SolverConfig { full_iterations: 0, ..Default::default() };
        assert!(mlem(&sino, &sys, &zero_iter).is_err());
        let wrong = make_subset_schedule(11, 1).unwrap();
        assert!(osem(&sino, &sys, &wrong, &SolverConfig::default()).is_err());
        let wrong_sino = Sinogram::zeros(12, 39);
        assert!(mlem(&wrong_sino, &sys, &SolverConfig::default()).is_err());
    }

    /// Two views of a 2×2 image, both seeing every pixel with weight `w`.
    struct Heavy(f64);

    impl SystemModel for Heavy {
        fn image_size(&self) -> usize {
            2
        }
        fn num_views(&self) -> usize {
            2
        }
        fn rays_per_view(&self) -> usize {
            4
        }
        fn view_block(&self, _view: usize) -> Result<ViewBlock> {
            ViewBlock::from_rows(2, &(0..4).map(|j| vec![(j, self.0)]).collect::<Vec<_>>())
        }
    }

    #[test]
    fn nan_aborts_with_iteration() {
        // projections overflow to inf, the second view then forms inf − inf
        let p = Sinogram::from_vec(2, 4, vec![1.0; 8]).unwrap();
        let cfg = SolverConfig { init_value: 4.0, ..Default::default() };
        match oscp(&p, &Heavy(f64::MAX), &SubsetSchedule::sequential(2), &cfg) {
            Err(Error::NonFinite { iteration }) => assert_eq!(iteration, 1),
            other => panic!("expected NonFinite, got {other:?}"),
        }
        assert!(check_iterate(&[0.0, f64::NAN], 3, true).is_err());
        assert!(matches!(check_iterate(&[-1.0], 2, true), Err(Error::Invariant(_))));
    }

    #[test]
    fn method_serde_and_trace_csv() {
        let m: Method = serde_json::from_str(r#"{"kind":"mlem_tv","tv_inner_iterations":7}"#).unwrap();
        assert_eq!(m, Method::MlemTv { tv_inner_iterations: 7 });
        assert_eq!(m.name(), "mlem_tv");
        let trace = RunTrace {
            rows: vec![TraceRow { iteration: 1, objective: 2.5, tv: 0.5, psnr: Some(20.0), ssim: None, seconds: 1.5 }],
        };
        assert_eq!(trace.to_csv(false), "iteration,objective,tv,psnr,ssim,seconds\n1,2.5,0.5,20,,\n");
        assert!(trace.to_csv(true).ends_with(",1.5\n"));
    }
}
