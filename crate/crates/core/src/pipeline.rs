//! Config-driven experiment runner: phantom → clean sinogram → noisy
//! sinogram per dose → every solver → metrics and files.
//!
//! Output layout inside `output_dir`:
//!
//! ```text
//! manifest.json             resolved config, geometry, per-pair results, file inventory
//! summary.csv               rows = doses, columns = <solver>_psnr, <solver>_ssim
//! phantom.{pgm,f64,json}    ground truth
//! clean.sino                noiseless sinogram
//! noisy_<dose>.sino         one per dose
//! <solver>_<dose>.{pgm,f64,json}, <solver>_<dose>_trace.csv
//! timings.json              only when `record_timings` is set
//! ```
//!
//! Everything except `timings.json` is a pure function of the config, so
//! reruns are byte-identical.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::dose::{simulate_low_dose, DoseModel};
use crate::error::{Error, Result};
use crate::geometry::{make_subset_schedule, FanBeamGeometry, GeometryRecord, ImageGrid, Sinogram};
use crate::io::{export_image, write_atomic, write_json, write_sinogram};
use crate::metrics::{quality_report, QualityReport};
use crate::phantoms::{load_raw_image, random_ellipses, shepp_logan_variant, SheppLoganVariant};
use crate::projector::{forward_project, FanBeamProjector};
use crate::solvers::{reconstruct, Method, SolverConfig};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PhantomSpec {
    SheppLogan {
        size: usize,
        #[serde(default)]
        variant: SheppLoganVariant,
    },
    RandomEllipses {
        size: usize,
        count_range: (usize, usize),
        seed: u64,
    },
    Raw {
        path: PathBuf,
        width: usize,
        height: usize,
        hu_window: (f64, f64),
    },
}

impl PhantomSpec {
    pub fn build(&self) -> Result<ImageGrid> {
        match self {
            PhantomSpec::SheppLogan { size, variant } => shepp_logan_variant(*size, *variant),
            PhantomSpec::RandomEllipses { size, count_range, seed } => {
                Ok(random_ellipses(*size, *count_range, *seed)?.image)
            }
            PhantomSpec::Raw { path, width, height, hu_window } => {
                Ok(load_raw_image(path, *width, *height, *hu_window)?.image)
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometrySpec {
    pub num_angles: usize,
    pub detector_cells: usize,
    /// Seed of the scrambled view order.
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DoseSpec {
    pub incident_photons: Vec<f64>,
    /// Dose `k` in the list uses noise seed `seed + k`.
    pub seed: u64,
}

/// Replaces the solver config for one dose, e.g. with tuned hyperparameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DoseOverride {
    pub incident_photons: f64,
    pub config: SolverConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSpec {
    /// Unique name used in file names and summary columns.
    pub label: String,
    pub method: Method,
    #[serde(default)]
    pub config: SolverConfig,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub dose_overrides: Vec<DoseOverride>,
}

impl SolverSpec {
    pub fn config_for(&self, incident_photons: f64) -> &SolverConfig {
        self.dose_overrides
            .iter()
            .find(|o| o.incident_photons == incident_photons)
            .map(|o| &o.config)
            .unwrap_or(&self.config)
    }
}

fn default_data_range() -> f64 {
    1.0
}

fn default_window() -> (f64, f64) {
    (0.0, 1.0)
}

fn default_true() -> bool {
    true
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub schema_version: u32,
    pub phantom: PhantomSpec,
    pub geometry: GeometrySpec,
    pub doses: DoseSpec,
    pub solvers: Vec<SolverSpec>,
    pub output_dir: PathBuf,
    #[serde(default = "default_data_range")]
    pub data_range: f64,
    #[serde(default = "default_window")]
    pub display_window: (f64, f64),
    #[serde(default = "default_true")]
    pub write_sinograms: bool,
    /// Also write `timings.json` and the `seconds` trace column.
    #[serde(default)]
    pub record_timings: bool,
}

fn valid_label(label: &str) -> bool {
    !label.is_empty()
        && label
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-')
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::file(path, e))?;
        let mut config = Self::from_json(&text)?;
        // relative raw-image paths are taken relative to the config file
        if let PhantomSpec::Raw { path: raw, .. } = &mut config.phantom {
            if raw.is_relative() {
                if let Some(dir) = path.parent() {
                    *raw = dir.join(&*raw);
                }
            }
        }
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.schema_version != SCHEMA_VERSION {
            return bad(format!(
                "unsupported schema_version {} (expected {SCHEMA_VERSION})",
                self.schema_version
            ));
        }
        if self.solvers.is_empty() {
            return bad("at least one solver is required".into());
        }
        if self.doses.incident_photons.is_empty() {
            return bad("at least one dose is required".into());
        }
        for &i0 in &self.doses.incident_photons {
            if !(i0 > 0.0) || !i0.is_finite() {
                return bad(format!("incident photon count must be positive, got {i0}"));
            }
        }
        let mut labels = std::collections::BTreeSet::new();
        for s in &self.solvers {
            if !valid_label(&s.label) {
                return bad(format!("solver label {:?} must be nonempty [A-Za-z0-9_-]", s.label));
            }
            if !labels.insert(s.label.as_str()) {
                return bad(format!("duplicate solver label {:?}", s.label));
            }
        }
        if !(self.data_range > 0.0) {
            return bad(format!("data_range must be positive, got {}", self.data_range));
        }
        if !(self.display_window.1 > self.display_window.0) {
            return bad(format!("display_window {:?} is empty", self.display_window));
        }
        if let PhantomSpec::Raw { path, .. } = &self.phantom {
            if !path.is_file() {
                return bad(format!("raw phantom {} does not exist", path.display()));
            }
        }
        FanBeamGeometry::new(self.geometry.num_angles, self.geometry.detector_cells)?;
        Ok(())
    }
}

/// Compact dose tag for file names: `1000` → `1e3`, `5000` → `5e3`.
pub fn dose_tag(incident_photons: f64) -> String {
    format!("{incident_photons:e}")
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairResult {
    pub incident_photons: f64,
    pub solver: String,
    pub config: SolverConfig,
    /// Absent when the pair failed.
    pub quality: Option<QualityReport>,
    pub error: Option<String>,
    pub files: Vec<String>,
}

impl PairResult {
    pub fn succeeded(&self) -> bool {
        self.error.is_none()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub schema_version: u32,
    pub library_version: String,
    pub config: RunConfig,
    pub geometry: GeometryRecord,
    pub schedule_order: Vec<usize>,
    pub results: Vec<PairResult>,
    pub files: Vec<String>,
}

impl RunManifest {
    pub fn all_succeeded(&self) -> bool {
        self.results.iter().all(PairResult::succeeded)
    }

    pub fn result(&self, solver: &str, incident_photons: f64) -> Option<&PairResult> {
        self.results
            .iter()
            .find(|r| r.solver == solver && r.incident_photons == incident_photons)
    }

    /// Summary table: one row per dose, PSNR/SSIM columns per solver.
    pub fn summary_csv(&self) -> String {
        let mut out = String::from("incident_photons");
        for s in &self.config.solvers {
            out.push_str(&format!(",{0}_psnr,{0}_ssim", s.label));
        }
        out.push('\n');
        for &i0 in &self.config.doses.incident_photons {
            out.push_str(&format!("{i0}"));
            for s in &self.config.solvers {
                match self.result(&s.label, i0).and_then(|r| r.quality) {
                    Some(q) => out.push_str(&format!(",{},{}", q.psnr, q.ssim)),
                    None => out.push_str(",,"),
                }
            }
            out.push('\n');
        }
        out
    }
}

struct PairOutcome {
    quality: QualityReport,
    files: Vec<String>,
}

#[allow(clippy::too_many_arguments)]
fn run_pair(
    config: &RunConfig,
    solver: &SolverSpec,
    solver_config: &SolverConfig,
    noisy: &Sinogram,
    system: &FanBeamProjector,
    schedule: &crate::geometry::SubsetSchedule,
    truth: &ImageGrid,
    tag: &str,
) -> Result<PairOutcome> {
    let out = &config.output_dir;
    let (image, trace) = reconstruct(
        &solver.method,
        noisy,
        system,
        schedule,
        solver_config,
        Some((truth, config.data_range)),
    )?;
    let quality = quality_report(&image, truth, config.data_range)?;
    let stem = format!("{}_{tag}", solver.label);
    let sidecar = export_image(out, &stem, &image, config.display_window)?;
    let trace_file = format!("{stem}_trace.csv");
    write_atomic(&out.join(&trace_file), trace.to_csv(config.record_timings).as_bytes())?;
    Ok(PairOutcome {
        quality,
        files: vec![sidecar.pgm_file, sidecar.raw_file, format!("{stem}.json"), trace_file],
    })
}

/// Runs every (dose, solver) pair of `config`. Configuration errors abort
/// before any computation; a failing pair is recorded in the manifest and
/// the remaining pairs still run. The manifest and summary are always
/// written.
pub fn run_pipeline(config: &RunConfig) -> Result<RunManifest> {
    config.validate()?;
    let out = &config.output_dir;
    std::fs::create_dir_all(out).map_err(|e| Error::file(out, e))?;

    let truth = config.phantom.build()?;
    let geometry = FanBeamGeometry::new(config.geometry.num_angles, config.geometry.detector_cells)?;
    let schedule = make_subset_schedule(geometry.num_angles(), config.geometry.seed)?;
    let clean = forward_project(&truth, &geometry)?;
    let system = FanBeamProjector::new(geometry.clone(), truth.size())?;

    let mut files = Vec::new();
    export_image(out, "phantom", &truth, config.display_window)?;
    files.extend(["phantom.pgm", "phantom.f64", "phantom.json"].map(String::from));
    if config.write_sinograms {
        write_sinogram(&out.join("clean.sino"), &clean)?;
        files.push("clean.sino".into());
    }

    let mut results = Vec::new();
    let mut timings = BTreeMap::new();
    for (k, &i0) in config.doses.incident_photons.iter().enumerate() {
        let tag = dose_tag(i0);
        let model = DoseModel::new(i0, config.doses.seed.wrapping_add(k as u64))?;
        let noisy = simulate_low_dose(&clean, &model)?;
        if config.write_sinograms {
            let name = format!("noisy_{tag}.sino");
            write_sinogram(&out.join(&name), &noisy)?;
            files.push(name);
        }
        for solver in &config.solvers {
            let solver_config = solver.config_for(i0).clone();
            log::info!("running {} at I0 = {i0}", solver.label);
            let start = Instant::now();
            let outcome = run_pair(config, solver, &solver_config, &noisy, &system, &schedule, &truth, &tag);
            timings.insert(format!("{}_{tag}", solver.label), start.elapsed().as_secs_f64());
            let result = match outcome {
                Ok(o) => {
                    log::info!("{} at I0 = {i0}: PSNR {:.2} dB, SSIM {:.4}", solver.label, o.quality.psnr, o.quality.ssim);
                    files.extend(o.files.iter().cloned());
                    PairResult {
                        incident_photons: i0,
                        solver: solver.label.clone(),
                        config: solver_config,
                        quality: Some(o.quality),
                        error: None,
                        files: o.files,
                    }
                }
                Err(e) => {
                    log::error!("{} at I0 = {i0} failed: {e}", solver.label);
                    PairResult {
                        incident_photons: i0,
                        solver: solver.label.clone(),
                        config: solver_config,
                        quality: None,
                        error: Some(e.to_string()),
                        files: Vec::new(),
                    }
                }
            };
            results.push(result);
        }
    }

    files.push("summary.csv".into());
    if config.record_timings {
        files.push("timings.json".into());
    }
    files.push("manifest.json".into());
    let manifest = RunManifest {
        schema_version: SCHEMA_VERSION,
        library_version: env!("CARGO_PKG_VERSION").to_string(),
        config: config.clone(),
        geometry: geometry.record(config.geometry.seed),
        schedule_order: schedule.order().to_vec(),
        results,
        files,
    };
    write_atomic(&out.join("summary.csv"), manifest.summary_csv().as_bytes())?;
    if config.record_timings {
        write_json(&out.join("timings.json"), &timings)?;
    }
    write_json(&out.join("manifest.json"), &manifest)?;
    Ok(manifest)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn config(dir: &Path) -> RunConfig {
        RunConfig::from_json(&format!(
            r#"{{
                "schema_version": 1,
                "phantom": {{"kind": "shepp_logan", "size": 16}},
                "geometry": {{"num_angles": 8, "detector_cells": 24, "seed": 3}},
                "doses": {{"incident_photons": [1e3, 1e5], "seed": 5}},
                "solvers": [
                    {{"label": "osem", "method": {{"kind": "osem"}}, "config": {{"full_iterations": 2}}}},
                    {{"label": "cp", "method": {{"kind": "osem_cp"}},
                      "config": {{"lambda": 0.01, "tau": 1.0, "sigma": 1.0, "full_iterations": 2}}}}
                ],
                "output_dir": {:?}
            }}"#,
            dir.to_str().unwrap()
        ))
        .unwrap()
    }

    #[test]
    fn dose_tags() {
        assert_eq!(dose_tag(1000.0), "1e3");
        assert_eq!(dose_tag(5000.0), "5e3");
        assert_eq!(dose_tag(12500.0), "1.25e4");
    }

    #[test]
    fn validation() {
        let dir = tempfile::tempdir().unwrap();
        let good = config(dir.path());
        assert!(good.validate().is_ok());
        let mut c = good.clone();
        c.solvers.clear();
        assert!(matches!(run_pipeline(&c), Err(Error::Config(_))));
        assert!(!dir.path().join("manifest.json").exists());
        let mut c = good.clone();
        c.solvers[1].label = "osem".into();
        assert!(c.validate().is_err());
        let mut c = good.clone();
        c.solvers[0].label = "a/b".into();
        assert!(c.validate().is_err());
        let mut c = good.clone();
        c.schema_version = 2;
        assert!(c.validate().is_err());
        let mut c = good;
        c.phantom = PhantomSpec::Raw {
            path: dir.path().join("missing.raw"),
            width: 16,
            height: 16,
            hu_window: (-1024.0, 2048.0),
        };
        assert!(c.validate().is_err());
        assert!(RunConfig::from_json(r#"{"schema_version": 1}"#).is_err());
    }

    #[test]
    fn failed_pair_is_recorded() {
        let dir = tempfile::tempdir().unwrap();
        let mut c = config(dir.path());
        c.solvers[1].config.tau = -1.0;
        let m = run_pipeline(&c).unwrap();
        assert!(!m.all_succeeded());
        assert!(m.result("osem", 1e3).unwrap().succeeded());
        assert!(m.result("cp", 1e3).unwrap().error.is_some());
        let summary = std::fs::read_to_string(dir.path().join("summary.csv")).unwrap();
        assert!(summary.starts_with("incident_photons,osem_psnr,osem_ssim,cp_psnr,cp_ssim\n"));
        assert!(summary.lines().nth(1).unwrap().ends_with(",,"));
        let text = std::fs::read_to_string(dir.path().join("manifest.json")).unwrap();
        let back: RunManifest = serde_json::from_str(&text).unwrap();
        assert_eq!(back, m);
    }
}
