//! Test objects: the Shepp–Logan head, seeded random-ellipse images, and
//! ingestion of raw Hounsfield-unit slices.
//!
//! Ellipses live in normalized coordinates `[−1, 1]²` with `y` pointing up.
//! Images are rasterized by sampling each pixel centre (no anti-aliasing).

use std::f64::consts::PI;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::ImageGrid;

/// Smallest phantom side accepted by the generators.
pub const MIN_PHANTOM_SIZE: usize = 16;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Ellipse {
    pub center: (f64, f64),
    pub semi_axes: (f64, f64),
    /// Counter-clockwise rotation in radians.
    pub rotation: f64,
    /// Additive gray value.
    pub intensity: f64,
}

impl Ellipse {
    pub fn contains(&self, x: f64, y: f64) -> bool {
        let (s, c) = self.rotation.sin_cos();
        let dx = x - self.center.0;
        let dy = y - self.center.1;
        let u = (dx * c + dy * s) / self.semi_axes.0;
        let v = (-dx * s + dy * c) / self.semi_axes.1;
        u * u + v * v <= 1.0
    }
}

/// Normalized coordinates of the centre of pixel `(row, col)`.
pub fn normalized_pixel_center(size: usize, row: usize, col: usize) -> (f64, f64) {
    let h = 2.0 / size as f64;
    (-1.0 + (col as f64 + 0.5) * h, 1.0 - (row as f64 + 0.5) * h)
}

/// Sums the intensities of every ellipse containing each pixel centre.
pub fn rasterize(size: usize, ellipses: &[Ellipse]) -> Vec<f64> {
    (0..size * size)
        .into_par_iter()
        .with_min_len(256)
        .map(|p| {
            let (x, y) = normalized_pixel_center(size, p / size, p % size);
            ellipses
                .iter()
                .filter(|e| e.contains(x, y))
                .map(|e| e.intensity)
                .sum()
        })
        .collect()
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SheppLoganVariant {
    /// Original low-contrast intensities (skull 1.0, brain 0.02).
    Classical,
    /// Toft's higher-contrast intensities (skull 1.0, brain 0.2).
    #[default]
    Modified,
}

const SHEPP_LOGAN_SHAPES: [(f64, f64, f64, f64, f64); 10] = [
    // (a, b, x0, y0, rotation in degrees)
    (0.69, 0.92, 0.0, 0.0, 0.0),
    (0.6624, 0.874, 0.0, -0.0184, 0.0),
    (0.11, 0.31, 0.22, 0.0, -18.0),
    (0.16, 0.41, -0.22, 0.0, 18.0),
    (0.21, 0.25, 0.0, 0.35, 0.0),
    (0.046, 0.046, 0.0, 0.1, 0.0),
    (0.046, 0.046, 0.0, -0.1, 0.0),
    (0.046, 0.023, -0.08, -0.605, 0.0),
    (0.023, 0.023, 0.0, -0.606, 0.0),
    (0.023, 0.046, 0.06, -0.605, 0.0),
];

const CLASSICAL_INTENSITIES: [f64; 10] = [1.0, -0.98, -0.02, -0.02, 0.01, 0.01, 0.01, 0.01, 0.01, 0.01];
const MODIFIED_INTENSITIES: [f64; 10] = [1.0, -0.8, -0.2, -0.2, 0.1, 0.1, 0.1, 0.1, 0.1, 0.1];

/// The ten Shepp–Logan ellipses.
pub fn shepp_logan_ellipses(variant: SheppLoganVariant) -> Vec<Ellipse> {
    let intensities = match variant {
        SheppLoganVariant::Classical => CLASSICAL_INTENSITIES,
        SheppLoganVariant::Modified => MODIFIED_INTENSITIES,
    };
    SHEPP_LOGAN_SHAPES
        .iter()
        .zip(intensities)
        .map(|(&(a, b, x0, y0, deg), intensity)| Ellipse {
            center: (x0, y0),
            semi_axes: (a, b),
            rotation: deg.to_radians(),
            intensity,
        })
        .collect()
}

/// Shepp–Logan phantom with the default (modified) intensities.
pub fn shepp_logan(size: usize) -> Result<ImageGrid> {
    shepp_logan_variant(size, SheppLoganVariant::default())
}

pub fn shepp_logan_variant(size: usize, variant: SheppLoganVariant) -> Result<ImageGrid> {
    if size < MIN_PHANTOM_SIZE {
        return Err(Error::invalid(format!(
            "phantom size {size} is below the minimum of {MIN_PHANTOM_SIZE}"
        )));
    }
    let values = rasterize(size, &shepp_logan_ellipses(variant))
        .into_iter()
        .map(|v| if v > 0.0 { v.min(1.0) } else { 0.0 })
        .collect();
    ImageGrid::from_vec(size, values)
}

/// Parameter ranges for [`random_ellipses`]; all draws are uniform.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EllipseRanges {
    pub center: (f64, f64),
    pub semi_axis: (f64, f64),
    pub rotation: (f64, f64),
    pub intensity: (f64, f64),
}

impl Default for EllipseRanges {
    fn default() -> Self {
        Self {
            center: (-0.6, 0.6),
            semi_axis: (0.05, 0.5),
            rotation: (0.0, PI),
            intensity: (0.1, 0.6),
        }
    }
}

/// A random-ellipse phantom together with what is needed to regenerate it.
#[derive(Clone, Debug)]
pub struct RandomEllipses {
    pub image: ImageGrid,
    pub ellipses: Vec<Ellipse>,
    /// Factor applied to the raw ellipse sum to bring it into `[0, 1]`.
    pub scale: f64,
}

/// Image of `count_range.0..=count_range.1` overlapping ellipses drawn with
/// the default [`EllipseRanges`], divided by its maximum when that exceeds 1.
pub fn random_ellipses(size: usize, count_range: (usize, usize), seed: u64) -> Result<RandomEllipses> {
    random_ellipses_with(size, count_range, seed, &EllipseRanges::default())
}

pub fn random_ellipses_with(
    size: usize,
    count_range: (usize, usize),
    seed: u64,
    ranges: &EllipseRanges,
) -> Result<RandomEllipses> {
    if size < MIN_PHANTOM_SIZE {
        return Err(Error::invalid(format!(
            "phantom size {size} is below the minimum of {MIN_PHANTOM_SIZE}"
        )));
    }
    let (lo, hi) = count_range;
    if lo == 0 || lo > hi {
        return Err(Error::invalid(format!("invalid ellipse count range ({lo}, {hi})")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let count = rng.gen_range(lo..=hi);
    let ellipses: Vec<Ellipse> = (0..count)
        .map(|_| Ellipse {
            center: (
                rng.gen_range(ranges.center.0..=ranges.center.1),
                rng.gen_range(ranges.center.0..=ranges.center.1),
            ),
            semi_axes: (
                rng.gen_range(ranges.semi_axis.0..=ranges.semi_axis.1),
                rng.gen_range(ranges.semi_axis.0..=ranges.semi_axis.1),
            ),
            rotation: rng.gen_range(ranges.rotation.0..ranges.rotation.1),
            intensity: rng.gen_range(ranges.intensity.0..=ranges.intensity.1),
        })
        .collect();
    let raw = rasterize(size, &ellipses);
    let peak = raw.iter().copied().fold(0.0, f64::max);
    let scale = if peak > 1.0 { 1.0 / peak } else { 1.0 };
    let values = raw.into_iter().map(|v| if v > 0.0 { (v * scale).min(1.0) } else { 0.0 }).collect();
    Ok(RandomEllipses {
        image: ImageGrid::from_vec(size, values)?,
        ellipses,
        scale,
    })
}

/// Display/ingestion window in Hounsfield units.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HuWindow {
    pub lo: f64,
    pub hi: f64,
}

impl HuWindow {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
            return Err(Error::invalid(format!("HU window [{lo}, {hi}] is empty")));
        }
        Ok(Self { lo, hi })
    }

    /// Maps HU into `[0, 1]`, clamping outside the window.
    pub fn normalize(&self, hu: f64) -> f64 {
        ((hu - self.lo) / (self.hi - self.lo)).clamp(0.0, 1.0)
    }

    pub fn to_hu(&self, value: f64) -> f64 {
        self.lo + value * (self.hi - self.lo)
    }
}

/// A raw slice mapped into `[0, 1]`, remembering its HU window.
#[derive(Clone, Debug)]
pub struct HuImage {
    pub image: ImageGrid,
    pub window: HuWindow,
}

/// Loads a headerless little-endian slice of `i16` HU samples or `f64`
/// samples; the sample type is inferred from the file length.
pub fn load_raw_image(path: &Path, width: usize, height: usize, hu_window: (f64, f64)) -> Result<HuImage> {
    let window = HuWindow::new(hu_window.0, hu_window.1)?;
    if width != height || width == 0 {
        return Err(Error::invalid(format!("raw images must be square, got {width}x{height}")));
    }
    let bytes = std::fs::read(path).map_err(|e| Error::file(path, e))?;
    let count = width * height;
    let samples: Vec<f64> = if bytes.len() == count * 2 {
        bytes
            .chunks_exact(2)
            .map(|b| i16::from_le_bytes([b[0], b[1]]) as f64)
            .collect()
    } else if bytes.len() == count * 8 {
        bytes
            .chunks_exact(8)
            .map(|b| f64::from_le_bytes(b.try_into().expect("chunk of 8")))
            .collect()
    } else {
        return Err(Error::shape(
            format!("{} bytes (i16) or {} bytes (f64) for {width}x{height}", count * 2, count * 8),
            format!("{} bytes", bytes.len()),
        ));
    };
    if samples.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("raw image contains non-finite samples"));
    }
    let values = samples.into_iter().map(|hu| window.normalize(hu)).collect();
    Ok(HuImage {
        image: ImageGrid::from_vec(width, values)?,
        window,
    })
}
