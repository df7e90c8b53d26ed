//! Acquisition geometry, image and sinogram containers, and the ordered-subset
//! schedule shared by every solver.
//!
//! The reconstruction square always has physical side 1.0 centred on the
//! rotation axis, so a `size × size` grid has pixel side `1 / size`. Rows run
//! top to bottom (decreasing `y`), columns left to right (increasing `x`).

use std::f64::consts::{PI, SQRT_2};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Physical side length of the reconstruction square.
pub const IMAGE_SIDE: f64 = 1.0;

/// Radius of the circle circumscribing the reconstruction square.
pub const IMAGE_HALF_DIAGONAL: f64 = IMAGE_SIDE * SQRT_2 / 2.0;

/// Square, row-major attenuation image.
#[derive(Clone, Debug, PartialEq)]
pub struct ImageGrid {
    size: usize,
    values: Vec<f64>,
}

impl ImageGrid {
    pub fn zeros(size: usize) -> Self {
        Self::filled(size, 0.0)
    }

    pub fn filled(size: usize, value: f64) -> Self {
        Self {
            size,
            values: vec![value; size * size],
        }
    }

    /// Wraps row-major `values`; fails unless there are exactly `size²`
    /// finite entries.
    pub fn from_vec(size: usize, values: Vec<f64>) -> Result<Self> {
        if size == 0 {
            return Err(Error::invalid("image size must be positive"));
        }
        if values.len() != size * size {
            return Err(Error::shape(
                format!("{} values for a {size}x{size} image", size * size),
                values.len(),
            ));
        }
        let image = Self { size, values };
        image.check_finite()?;
        Ok(image)
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn width(&self) -> usize {
        self.size
    }

    pub fn height(&self) -> usize {
        self.size
    }

    pub fn pixel_size(&self) -> f64 {
        IMAGE_SIDE / self.size as f64
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.size + col]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, value: f64) {
        self.values[row * self.size + col] = value;
    }

    /// Physical `(x, y)` coordinates of a pixel centre.
    pub fn pixel_center(&self, row: usize, col: usize) -> (f64, f64) {
        let h = self.pixel_size();
        (
            -IMAGE_SIDE / 2.0 + (col as f64 + 0.5) * h,
            IMAGE_SIDE / 2.0 - (row as f64 + 0.5) * h,
        )
    }

    pub fn sum(&self) -> f64 {
        self.values.iter().sum()
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn dot(&self, other: &ImageGrid) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a * b)
            .sum()
    }

    pub fn check_finite(&self) -> Result<()> {
        match self.values.iter().position(|v| !v.is_finite()) {
            None => Ok(()),
            Some(i) => Err(Error::Invariant(format!(
                "pixel {i} is not finite ({})",
                self.values[i]
            ))),
        }
    }

    pub fn check_nonnegative(&self) -> Result<()> {
        match self.values.iter().position(|&v| !(v >= 0.0)) {
            None => Ok(()),
            Some(i) => Err(Error::Invariant(format!(
                "pixel {i} is negative or NaN ({})",
                self.values[i]
            ))),
        }
    }

    pub(crate) fn ensure_same_shape(&self, other: &ImageGrid) -> Result<()> {
        if self.size != other.size {
            return Err(Error::shape(
                format!("{0}x{0} image", self.size),
                format!("{0}x{0} image", other.size),
            ));
        }
        Ok(())
    }
}

/// A straight ray from the source to the centre of one detector cell.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Ray {
    pub source: (f64, f64),
    pub target: (f64, f64),
}

/// Fan-beam acquisition with a flat detector perpendicular to the central ray.
///
/// For a view at angle `θ` the source sits at `SAD·(cos θ, sin θ)` and the
/// detector centre at `−ADD·(cos θ, sin θ)`; cell `k` is offset along
/// `(−sin θ, cos θ)` by `(k − (cells − 1)/2)·spacing`.
#[derive(Clone, Debug, PartialEq)]
pub struct FanBeamGeometry {
    angles: Vec<f64>,
    detector_cells: usize,
    detector_cell_spacing: f64,
    source_axis_distance: f64,
    axis_detector_distance: f64,
}

/// Serialized form of a geometry plus the subset-schedule seed, as recorded
/// in run manifests.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeometryRecord {
    pub num_angles: usize,
    pub detector_cells: usize,
    pub detector_cell_spacing: f64,
    pub source_axis_distance: f64,
    pub axis_detector_distance: f64,
    pub seed: u64,
}

impl FanBeamGeometry {
    /// Uniformly spaced views with the default distances: source at twice
    /// the image diagonal, detector mirrored at the same distance, and cell
    /// spacing chosen so the detector exactly spans the fan subtended by the
    /// circle circumscribing the image.
    pub fn new(num_angles: usize, detector_cells: usize) -> Result<Self> {
        let angles = make_uniform_angles(num_angles)?;
        if detector_cells == 0 {
            return Err(Error::invalid("detector needs at least one cell"));
        }
        let sad = 2.0 * SQRT_2 * IMAGE_SIDE;
        let add = sad;
        let spacing = 2.0 * fan_half_width(sad, add) / detector_cells as f64;
        Self::with_layout(angles, detector_cells, spacing, sad, add)
    }

    pub fn with_layout(
        angles: Vec<f64>,
        detector_cells: usize,
        detector_cell_spacing: f64,
        source_axis_distance: f64,
        axis_detector_distance: f64,
    ) -> Result<Self> {
        if angles.is_empty() {
            return Err(Error::invalid("geometry needs at least one angle"));
        }
        if angles
            .iter()
            .any(|a| !a.is_finite() || *a < 0.0 || *a >= 2.0 * PI)
        {
            return Err(Error::InvalidGeometry("angles must lie in [0, 2π)".into()));
        }
        if angles.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidGeometry(
                "angles must be strictly increasing".into(),
            ));
        }
        if detector_cells == 0 {
            return Err(Error::invalid("detector needs at least one cell"));
        }
        if !(detector_cell_spacing > 0.0) || !detector_cell_spacing.is_finite() {
            return Err(Error::InvalidGeometry(
                "detector cell spacing must be positive".into(),
            ));
        }
        if !(source_axis_distance > IMAGE_HALF_DIAGONAL) || !source_axis_distance.is_finite() {
            return Err(Error::InvalidGeometry(format!(
                "source-axis distance {source_axis_distance} must exceed the image half-diagonal {IMAGE_HALF_DIAGONAL}"
            )));
        }
        if !(axis_detector_distance > 0.0) || !axis_detector_distance.is_finite() {
            return Err(Error::InvalidGeometry(
                "axis-detector distance must be positive".into(),
            ));
        }
        let needed = fan_half_width(source_axis_distance, axis_detector_distance);
        let half_width = detector_cells as f64 * detector_cell_spacing / 2.0;
        if half_width < needed * (1.0 - 1e-9) {
            return Err(Error::InvalidGeometry(format!(
                "detector half-width {half_width} does not cover the fan ({needed} needed)"
            )));
        }
        Ok(Self {
            angles,
            detector_cells,
            detector_cell_spacing,
            source_axis_distance,
            axis_detector_distance,
        })
    }

    pub fn from_record(record: &GeometryRecord) -> Result<Self> {
        Self::with_layout(
            make_uniform_angles(record.num_angles)?,
            record.detector_cells,
            record.detector_cell_spacing,
            record.source_axis_distance,
            record.axis_detector_distance,
        )
    }

    pub fn record(&self, seed: u64) -> GeometryRecord {
        GeometryRecord {
            num_angles: self.num_angles(),
            detector_cells: self.detector_cells,
            detector_cell_spacing: self.detector_cell_spacing,
            source_axis_distance: self.source_axis_distance,
            axis_detector_distance: self.axis_detector_distance,
            seed,
        }
    }

    pub fn num_angles(&self) -> usize {
        self.angles.len()
    }

    pub fn angles(&self) -> &[f64] {
        &self.angles
    }

    pub fn detector_cells(&self) -> usize {
        self.detector_cells
    }

    pub fn detector_cell_spacing(&self) -> f64 {
        self.detector_cell_spacing
    }

    pub fn source_axis_distance(&self) -> f64 {
        self.source_axis_distance
    }

    pub fn axis_detector_distance(&self) -> f64 {
        self.axis_detector_distance
    }

    pub fn num_rays(&self) -> usize {
        self.num_angles() * self.detector_cells
    }

    /// Signed detector coordinate of a cell centre.
    pub fn cell_offset(&self, cell: usize) -> f64 {
        (cell as f64 - (self.detector_cells as f64 - 1.0) / 2.0) * self.detector_cell_spacing
    }

    /// Signed perpendicular distance from the rotation axis to the ray
    /// through `cell` (identical for every view).
    pub fn ray_offset(&self, cell: usize) -> f64 {
        let u = self.cell_offset(cell);
        let sdd = self.source_axis_distance + self.axis_detector_distance;
        self.source_axis_distance * u / (sdd * sdd + u * u).sqrt()
    }

    pub fn ray(&self, view: usize, cell: usize) -> Ray {
        let (sin, cos) = self.angles[view].sin_cos();
        let u = self.cell_offset(cell);
        Ray {
            source: (
                self.source_axis_distance * cos,
                self.source_axis_distance * sin,
            ),
            target: (
                -self.axis_detector_distance * cos - u * sin,
                -self.axis_detector_distance * sin + u * cos,
            ),
        }
    }

    pub(crate) fn check_view(&self, view: usize) -> Result<()> {
        if view >= self.num_angles() {
            return Err(Error::ViewOutOfRange {
                view,
                num_angles: self.num_angles(),
            });
        }
        Ok(())
    }
}

/// Half-width of a flat detector that captures the whole fan through the
/// circle circumscribing the image.
fn fan_half_width(sad: f64, add: f64) -> f64 {
    let half_angle = (IMAGE_HALF_DIAGONAL / sad).asin();
    (sad + add) * half_angle.tan()
}

/// Line integrals indexed by `(angle, cell)`, row-major by angle.
#[derive(Clone, Debug, PartialEq)]
pub struct Sinogram {
    num_angles: usize,
    detector_cells: usize,
    values: Vec<f64>,
}

impl Sinogram {
    pub fn zeros(num_angles: usize, detector_cells: usize) -> Self {
        Self {
            num_angles,
            detector_cells,
            values: vec![0.0; num_angles * detector_cells],
        }
    }

    pub fn for_geometry(geometry: &FanBeamGeometry) -> Self {
        Self::zeros(geometry.num_angles(), geometry.detector_cells())
    }

    pub fn from_vec(num_angles: usize, detector_cells: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != num_angles * detector_cells {
            return Err(Error::shape(
                format!("{} values for {num_angles}x{detector_cells}", num_angles * detector_cells),
                values.len(),
            ));
        }
        Ok(Self {
            num_angles,
            detector_cells,
            values,
        })
    }

    pub fn num_angles(&self) -> usize {
        self.num_angles
    }

    pub fn detector_cells(&self) -> usize {
        self.detector_cells
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn view(&self, view: usize) -> &[f64] {
        let n = self.detector_cells;
        &self.values[view * n..(view + 1) * n]
    }

    pub fn view_mut(&mut self, view: usize) -> &mut [f64] {
        let n = self.detector_cells;
        &mut self.values[view * n..(view + 1) * n]
    }

    pub fn matches(&self, geometry: &FanBeamGeometry) -> Result<()> {
        if self.num_angles != geometry.num_angles() || self.detector_cells != geometry.detector_cells() {
            return Err(Error::shape(
                format!("{}x{} sinogram", geometry.num_angles(), geometry.detector_cells()),
                format!("{}x{} sinogram", self.num_angles, self.detector_cells),
            ));
        }
        Ok(())
    }

    pub fn check_nonnegative(&self) -> Result<()> {
        match self.values.iter().position(|&v| !(v >= 0.0) || !v.is_finite()) {
            None => Ok(()),
            Some(i) => Err(Error::invalid(format!(
                "sinogram entry {i} is negative or non-finite ({})",
                self.values[i]
            ))),
        }
    }
}

/// Order in which single-view subsets are visited during one full iteration.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubsetSchedule {
    order: Vec<usize>,
    seed: u64,
}

impl SubsetSchedule {
    /// Views in acquisition order.
    pub fn sequential(num_angles: usize) -> Self {
        Self {
            order: (0..num_angles).collect(),
            seed: 0,
        }
    }

    pub fn from_order(order: Vec<usize>, seed: u64) -> Result<Self> {
        let mut seen = vec![false; order.len()];
        for &v in &order {
            if v >= order.len() || std::mem::replace(&mut seen[v], true) {
                return Err(Error::invalid("subset order is not a permutation"));
            }
        }
        Ok(Self { order, seed })
    }

    pub fn num_subsets(&self) -> usize {
        self.order.len()
    }

    pub fn order(&self) -> &[usize] {
        &self.order
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn reversed(&self) -> Self {
        Self {
            order: self.order.iter().rev().copied().collect(),
            seed: self.seed,
        }
    }
}

/// `k·2π/n` for `k = 0..n`.
pub fn make_uniform_angles(num_angles: usize) -> Result<Vec<f64>> {
    if num_angles == 0 {
        return Err(Error::invalid("number of angles must be at least 1"));
    }
    let step = 2.0 * PI / num_angles as f64;
    Ok((0..num_angles).map(|k| k as f64 * step).collect())
}

/// Seeded uniform shuffle of the view indices.
pub fn make_subset_schedule(num_angles: usize, seed: u64) -> Result<SubsetSchedule> {
    if num_angles == 0 {
        return Err(Error::invalid("number of angles must be at least 1"));
    }
    let mut order: Vec<usize> = (0..num_angles).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    order.shuffle(&mut rng);
    Ok(SubsetSchedule { order, seed })
}
