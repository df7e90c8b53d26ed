//! PSNR and SSIM against a ground-truth image.
//!
//! SSIM follows the usual definition: an 11×11 Gaussian window with
//! σ = 1.5, `K1 = 0.01`, `K2 = 0.03`, population (co)variances, averaged over
//! every window position that lies fully inside the image.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::ImageGrid;

/// PSNR reported when the two images are identical.
pub const PSNR_CAP: f64 = 99.0;

pub const SSIM_WINDOW: usize = 11;
pub const SSIM_SIGMA: f64 = 1.5;
pub const SSIM_K1: f64 = 0.01;
pub const SSIM_K2: f64 = 0.03;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct QualityReport {
    pub psnr: f64,
    pub ssim: f64,
    pub data_range: f64,
    /// Set when the PSNR is the [`PSNR_CAP`] sentinel.
    pub psnr_capped: bool,
}

fn check_pair(test: &ImageGrid, reference: &ImageGrid, data_range: f64) -> Result<()> {
    test.ensure_same_shape(reference)?;
    if !(data_range > 0.0) || !data_range.is_finite() {
        return Err(Error::invalid(format!("data range must be positive, got {data_range}")));
    }
    Ok(())
}

pub fn mse(test: &ImageGrid, reference: &ImageGrid) -> Result<f64> {
    test.ensure_same_shape(reference)?;
    let sum: f64 = test
        .values()
        .iter()
        .zip(reference.values())
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    Ok(sum / test.len() as f64)
}

/// `10·log10(range² / MSE)`, or [`PSNR_CAP`] for identical images.
pub fn psnr(test: &ImageGrid, reference: &ImageGrid, data_range: f64) -> Result<f64> {
    check_pair(test, reference, data_range)?;
    let err = mse(test, reference)?;
    if err == 0.0 {
        return Ok(PSNR_CAP);
    }
    Ok(10.0 * (data_range * data_range / err).log10())
}

fn gaussian_kernel() -> [f64; SSIM_WINDOW] {
    let mut k = [0.0; SSIM_WINDOW];
    let r = (SSIM_WINDOW / 2) as f64;
    for (i, w) in k.iter_mut().enumerate() {
        let d = i as f64 - r;
        *w = (-d * d / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp();
    }
    let s: f64 = k.iter().sum();
    k.iter_mut().for_each(|w| *w /= s);
    k
}

/// Separable "valid" Gaussian filtering: output is `(n−10) × (n−10)`.
fn filter_valid(n: usize, src: &[f64], kernel: &[f64; SSIM_WINDOW]) -> Vec<f64> {
    let m = n + 1 - SSIM_WINDOW;
    let mut rows = vec![0.0; n * m];
    for r in 0..n {
        for c in 0..m {
            let mut acc = 0.0;
            for (k, w) in kernel.iter().enumerate() {
                acc += w * src[r * n + c + k];
            }
            rows[r * m + c] = acc;
        }
    }
    let mut out = vec![0.0; m * m];
    for r in 0..m {
        for c in 0..m {
            let mut acc = 0.0;
            for (k, w) in kernel.iter().enumerate() {
                acc += w * rows[(r + k) * m + c];
            }
            out[r * m + c] = acc;
        }
    }
    out
}

/// Mean structural similarity.
pub fn ssim(test: &ImageGrid, reference: &ImageGrid, data_range: f64) -> Result<f64> {
    check_pair(test, reference, data_range)?;
    let n = test.size();
    if n < SSIM_WINDOW {
        return Err(Error::invalid(format!(
            "image side {n} is smaller than the {SSIM_WINDOW}-pixel SSIM window"
        )));
    }
    let kernel = gaussian_kernel();
    let x = test.values();
    let y = reference.values();
    let xx: Vec<f64> = x.iter().map(|v| v * v).collect();
    let yy: Vec<f64> = y.iter().map(|v| v * v).collect();
    let xy: Vec<f64> = x.iter().zip(y).map(|(a, b)| a * b).collect();

    let mx = filter_valid(n, x, &kernel);
    let my = filter_valid(n, y, &kernel);
    let mxx = filter_valid(n, &xx, &kernel);
    let myy = filter_valid(n, &yy, &kernel);
    let mxy = filter_valid(n, &xy, &kernel);

    let c1 = (SSIM_K1 * data_range).powi(2);
    let c2 = (SSIM_K2 * data_range).powi(2);
    let total: f64 = (0..mx.len())
        .map(|i| {
            let (ux, uy) = (mx[i], my[i]);
            let vx = mxx[i] - ux * ux;
            let vy = myy[i] - uy * uy;
            let cov = mxy[i] - ux * uy;
            ((2.0 * ux * uy + c1) * (2.0 * cov + c2)) / ((ux * ux + uy * uy + c1) * (vx + vy + c2))
        })
        .sum();
    Ok(total / mx.len() as f64)
}

pub fn quality_report(test: &ImageGrid, reference: &ImageGrid, data_range: f64) -> Result<QualityReport> {
    let psnr = psnr(test, reference, data_range)?;
    Ok(QualityReport {
        psnr,
        ssim: ssim(test, reference, data_range)?,
        data_range,
        psnr_capped: psnr == PSNR_CAP && mse(test, reference)? == 0.0,
    })
}
