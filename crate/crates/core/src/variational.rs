//! Discrete differential operators, isotropic total variation, and the two
//! proximal maps used by the primal-dual solvers.
//!
//! The gradient uses forward differences with a Neumann boundary (the last
//! column/row difference is zero); the divergence is its exact negative
//! adjoint. Grid spacing is taken as one pixel.

use crate::error::{Error, Result};
use crate::geometry::ImageGrid;

/// Per-pixel 2-vector field on the image grid.
#[derive(Clone, Debug, PartialEq)]
pub struct DualField {
    size: usize,
    pub horizontal: Vec<f64>,
    pub vertical: Vec<f64>,
}

impl DualField {
    pub fn zeros(size: usize) -> Self {
        Self::filled(size, 0.0)
    }

    /// Both components set to `value` at every pixel.
    pub fn filled(size: usize, value: f64) -> Self {
        Self {
            size,
            horizontal: vec![value; size * size],
            vertical: vec![value; size * size],
        }
    }

    pub fn from_components(size: usize, horizontal: Vec<f64>, vertical: Vec<f64>) -> Result<Self> {
        if horizontal.len() != size * size || vertical.len() != size * size {
            return Err(Error::shape(
                format!("two components of {} values", size * size),
                format!("{} and {}", horizontal.len(), vertical.len()),
            ));
        }
        Ok(Self {
            size,
            horizontal,
            vertical,
        })
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn magnitude(&self, pixel: usize) -> f64 {
        self.horizontal[pixel].hypot(self.vertical[pixel])
    }

    pub fn dot(&self, other: &DualField) -> f64 {
        let h: f64 = self.horizontal.iter().zip(&other.horizontal).map(|(a, b)| a * b).sum();
        let v: f64 = self.vertical.iter().zip(&other.vertical).map(|(a, b)| a * b).sum();
        h + v
    }
}

pub(crate) fn gradient_into(n: usize, x: &[f64], gx: &mut [f64], gy: &mut [f64]) {
    for r in 0..n {
        let row = &x[r * n..(r + 1) * n];
        let gxr = &mut gx[r * n..(r + 1) * n];
        for c in 0..n - 1 {
            gxr[c] = row[c + 1] - row[c];
        }
        gxr[n - 1] = 0.0;
        let gyr = &mut gy[r * n..(r + 1) * n];
        if r + 1 < n {
            let next = &x[(r + 1) * n..(r + 2) * n];
            for c in 0..n {
                gyr[c] = next[c] - row[c];
            }
        } else {
            gyr.fill(0.0);
        }
    }
}

pub(crate) fn divergence_into(n: usize, qx: &[f64], qy: &[f64], out: &mut [f64]) {
    for r in 0..n {
        for c in 0..n {
            let i = r * n + c;
            let dx = if n == 1 {
                0.0
            } else if c == 0 {
                qx[i]
            } else if c == n - 1 {
                -qx[i - 1]
            } else {
                qx[i] - qx[i - 1]
            };
            let dy = if n == 1 {
                0.0
            } else if r == 0 {
                qy[i]
            } else if r == n - 1 {
                -qy[i - n]
            } else {
                qy[i] - qy[i - n]
            };
            out[i] = dx + dy;
        }
    }
}

/// Forward-difference gradient with Neumann boundary.
pub fn gradient(image: &ImageGrid) -> DualField {
    let n = image.size();
    let mut field = DualField::zeros(n);
    gradient_into(n, image.values(), &mut field.horizontal, &mut field.vertical);
    field
}

/// Negative adjoint of [`gradient`]: `⟨∇x, q⟩ = −⟨x, div q⟩`.
pub fn divergence(field: &DualField) -> ImageGrid {
    let n = field.size;
    let mut out = vec![0.0; n * n];
    divergence_into(n, &field.horizontal, &field.vertical, &mut out);
    ImageGrid::from_vec(n, out).expect("divergence of a finite field is finite")
}

/// Isotropic total variation `Σ_p |(∇x)_p|₂`.
pub fn tv_value(image: &ImageGrid) -> f64 {
    let g = gradient(image);
    g.horizontal
        .iter()
        .zip(&g.vertical)
        .map(|(a, b)| a.hypot(*b))
        .sum()
}

/// Projects each 2-vector onto the closed unit disc.
pub fn dual_prox(candidate: &DualField) -> DualField {
    let mut out = candidate.clone();
    dual_prox_in_place(&mut out.horizontal, &mut out.vertical);
    out
}

pub(crate) fn dual_prox_in_place(qx: &mut [f64], qy: &mut [f64]) {
    for (a, b) in qx.iter_mut().zip(qy.iter_mut()) {
        let m = a.hypot(*b);
        if m > 1.0 {
            *a /= m;
            *b /= m;
            // rounding can leave the magnitude a few ulps above 1
            while a.hypot(*b) > 1.0 {
                *a *= 1.0 - f64::EPSILON;
                *b *= 1.0 - f64::EPSILON;
            }
        }
    }
}

/// Nonnegative root of `u² + b·u − c = 0` for `c ≥ 0`.
///
/// Uses the cancellation-free form `2c / (b + √(b² + 4c))` when `b ≥ 0`.
#[inline]
pub fn positive_root(b: f64, c: f64) -> f64 {
    if c == 0.0 {
        return (-b).max(0.0);
    }
    let s = (b * b + 4.0 * c).sqrt();
    if b >= 0.0 {
        2.0 * c / (b + s)
    } else {
        (s - b) / 2.0
    }
}

/// Closed-form proximal step of the per-pixel EM surrogate
/// `f(u) = colsum·u − previous·ratio_backproj·ln u`:
///
/// `argmin_u τ f(u) + ½(u − anchor)²`, i.e. the nonnegative root of
/// `u² + u(τ·colsum − anchor) − τ·previous·ratio_backproj = 0`.
#[inline]
pub fn em_prox_pixel(tau: f64, colsum: f64, ratio_backproj: f64, anchor: f64, previous: f64) -> f64 {
    positive_root(tau * colsum - anchor, tau * previous * ratio_backproj)
}

/// Per-pixel coefficients of the EM primal proximal step. `colsum` holds the
/// unscaled column sums `Σ_i a_ij`; the step size `tau` is applied inside
/// [`primal_prox_em`].
#[derive(Clone, Debug)]
pub struct ProxCoefficients {
    pub tau: f64,
    pub colsum: Vec<f64>,
    pub ratio_backproj: Vec<f64>,
    pub anchor: Vec<f64>,
    pub previous: Vec<f64>,
}

/// Solves the EM proximal quadratic for every pixel and returns the
/// nonnegative roots.
pub fn primal_prox_em(coeffs: &ProxCoefficients) -> Result<Vec<f64>> {
    let n = coeffs.anchor.len();
    if coeffs.colsum.len() != n || coeffs.ratio_backproj.len() != n || coeffs.previous.len() != n {
        return Err(Error::shape(
            format!("{n} coefficients per term"),
            format!(
                "{} / {} / {}",
                coeffs.colsum.len(),
                coeffs.ratio_backproj.len(),
                coeffs.previous.len()
            ),
        ));
    }
    if !(coeffs.tau > 0.0) {
        return Err(Error::invalid("tau must be positive"));
    }
    let mut out = Vec::with_capacity(n);
    for j in 0..n {
        let (c, r, a, p) = (
            coeffs.colsum[j],
            coeffs.ratio_backproj[j],
            coeffs.anchor[j],
            coeffs.previous[j],
        );
        if c.is_nan() || r.is_nan() || a.is_nan() || p.is_nan() {
            return Err(Error::invalid(format!("NaN coefficient at pixel {j}")));
        }
        if c < 0.0 || r < 0.0 || p < 0.0 {
            return Err(Error::Invariant(format!(
                "negative EM coefficient at pixel {j} (colsum {c}, ratio {r}, previous {p})"
            )));
        }
        out.push(em_prox_pixel(coeffs.tau, c, r, a, p));
    }
    Ok(out)
}

/// Result of [`rof_tv_denoise_traced`].
#[derive(Clone, Debug)]
pub struct RofOutput {
    pub image: ImageGrid,
    /// ROF objective after each iteration.
    pub objective: Vec<f64>,
}

pub fn rof_objective(u: &ImageGrid, noisy: &ImageGrid, weight: f64) -> f64 {
    let fidelity: f64 = u
        .values()
        .iter()
        .zip(noisy.values())
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    0.5 * fidelity + weight * tv_value(u)
}

/// Approximate minimizer of `½‖u − noisy‖² + weight·TV(u)`.
pub fn rof_tv_denoise(noisy: &ImageGrid, weight: f64, iterations: usize) -> Result<ImageGrid> {
    Ok(rof_denoise_impl(noisy, weight, iterations, false)?.image)
}

/// [`rof_tv_denoise`] with the objective recorded after every iteration.
pub fn rof_tv_denoise_traced(noisy: &ImageGrid, weight: f64, iterations: usize) -> Result<RofOutput> {
    rof_denoise_impl(noisy, weight, iterations, true)
}

/// Accelerated primal-dual iteration for the ROF model: the fidelity term is
/// 1-strongly convex, so the step sizes are rebalanced every iteration.
fn rof_denoise_impl(noisy: &ImageGrid, weight: f64, iterations: usize, trace: bool) -> Result<RofOutput> {
    if !(weight > 0.0) || !weight.is_finite() {
        return Err(Error::invalid(format!("ROF weight must be positive, got {weight}")));
    }
    let n = noisy.size();
    let g = noisy.values();
    let npix = n * n;
    // ‖weight·∇‖² ≤ 8·weight²
    let lipschitz = weight * 8f64.sqrt();
    let mut tau = 1.0 / lipschitz;
    let mut sigma = 1.0 / lipschitz;

    let mut u = g.to_vec();
    let mut u_bar = u.clone();
    let mut qx = vec![0.0; npix];
    let mut qy = vec![0.0; npix];
    let mut gx = vec![0.0; npix];
    let mut gy = vec![0.0; npix];
    let mut div = vec![0.0; npix];
    let mut objective = Vec::new();

    for _ in 0..iterations {
        gradient_into(n, &u_bar, &mut gx, &mut gy);
        for j in 0..npix {
            qx[j] += sigma * weight * gx[j];
            qy[j] += sigma * weight * gy[j];
        }
        dual_prox_in_place(&mut qx, &mut qy);
        divergence_into(n, &qx, &qy, &mut div);
        let theta = 1.0 / (1.0 + 2.0 * tau).sqrt();
        for j in 0..npix {
            let prev = u[j];
            let next = (prev + tau * weight * div[j] + tau * g[j]) / (1.0 + tau);
            u[j] = next;
            u_bar[j] = next + theta * (next - prev);
        }
        tau *= theta;
        sigma /= theta;
        if trace {
            let img = ImageGrid::from_vec(n, u.clone())?;
            objective.push(rof_objective(&img, noisy, weight));
        }
    }
    Ok(RofOutput {
        image: ImageGrid::from_vec(n, u)?,
        objective,
    })
}
