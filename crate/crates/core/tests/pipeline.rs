use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::Command;

use ldct_recon::pipeline::{run_pipeline, RunConfig, RunManifest};

fn config_json(output_dir: &Path, tau: f64) -> String {
    format!(
        r#"{{
  "schema_version": 1,
  "phantom": {{"kind": "shepp_logan", "size": 32}},
  "geometry": {{"num_angles": 24, "detector_cells": 48, "seed": 3}},
  "doses": {{"incident_photons": [1e3, 1e4], "seed": 5}},
  "solvers": [
    {{"label": "osem", "method": {{"kind": "osem"}}, "config": {{"full_iterations": 2}}}},
    {{"label": "osem_cp", "method": {{"kind": "osem_cp"}},
      "config": {{"lambda": 0.01, "tau": {tau}, "sigma": 10.0, "full_iterations": 2, "init_value": 0.2}}}},
    {{"label": "rof_tv", "method": {{"kind": "rof_tv", "tv_iterations": 20}},
      "config": {{"lambda": 0.02, "full_iterations": 1}}}}
  ],
  "output_dir": {}
}}"#,
        serde_json::to_string(output_dir).unwrap()
    )
}

/// Every file below `dir`, keyed by relative path.
fn snapshot(dir: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in std::fs::read_dir(&d).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                out.insert(path.strip_prefix(dir).unwrap().to_path_buf(), std::fs::read(&path).unwrap());
            }
        }
    }
    out
}

#[test]
fn reruns_are_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("run");
    let config = RunConfig::from_json(&config_json(&out, 20.0)).unwrap();
    let manifest = run_pipeline(&config).unwrap();
    assert!(manifest.all_succeeded());
    assert_eq!(manifest.results.len(), 6);
    let first = snapshot(&out);
    assert!(first.contains_key(Path::new("manifest.json")));
    assert!(first.contains_key(Path::new("summary.csv")));
    assert!(first.contains_key(Path::new("osem_cp_1e4.pgm")));

    run_pipeline(&config).unwrap();
    assert_eq!(snapshot(&out), first);

    let single = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let other = tmp.path().join("single");
    let config = RunConfig::from_json(&config_json(&other, 20.0)).unwrap();
    single.install(|| run_pipeline(&config)).unwrap();
    let mut second = snapshot(&other);
    let mut first = first;
    // the manifest embeds the output directory
    first.remove(Path::new("manifest.json"));
    second.remove(Path::new("manifest.json"));
    assert_eq!(second, first);
}

#[test]
fn manifest_round_trips_and_reports_quality() {
    let tmp = tempfile::tempdir().unwrap();
    let config = RunConfig::from_json(&config_json(tmp.path(), 20.0)).unwrap();
    let manifest = run_pipeline(&config).unwrap();
    let text = std::fs::read_to_string(tmp.path().join("manifest.json")).unwrap();
    let back: RunManifest = serde_json::from_str(&text).unwrap();
    assert_eq!(back.results.len(), manifest.results.len());
    let low = manifest.result("osem_cp", 1e3).unwrap().quality.clone().unwrap();
    let high = manifest.result("osem_cp", 1e4).unwrap().quality.clone().unwrap();
    assert!(high.psnr > low.psnr);
    let summary = std::fs::read_to_string(tmp.path().join("summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 3);
    assert!(summary.starts_with("incident_photons,osem_psnr,osem_ssim,osem_cp_psnr"));
}

fn cli(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_ldct-recon")).args(args).output().unwrap()
}

#[test]
fn cli_exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let good = tmp.path().join("good.json");
    std::fs::write(&good, config_json(&tmp.path().join("good"), 20.0)).unwrap();
    let out = cli(&["run", good.to_str().unwrap(), "--quiet"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(tmp.path().join("good/manifest.json").exists());

    let out = cli(&["run", good.to_str().unwrap(), "--output-dir", tmp.path().join("moved").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stdout).starts_with("incident_photons,"));
    assert!(tmp.path().join("moved/summary.csv").exists());

    let partial = tmp.path().join("partial.json");
    std::fs::write(&partial, config_json(&tmp.path().join("partial"), -1.0)).unwrap();
    let out = cli(&["run", partial.to_str().unwrap(), "--quiet"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(tmp.path().join("partial/manifest.json").exists());

    let broken = tmp.path().join("broken.json");
    std::fs::write(&broken, r#"{"schema_version": 1}"#).unwrap();
    assert_eq!(cli(&["run", broken.to_str().unwrap(), "--quiet"]).status.code(), Some(2));
    assert_eq!(cli(&["run", tmp.path().join("missing.json").to_str().unwrap()]).status.code(), Some(2));
}
