//! Low-dose acquisition: Poisson photon counting on clean line integrals.
//!
//! For every ray the detected count is `I_d ~ Poisson(I₀·exp(−p_c))` and the
//! noisy line integral is `−ln(max(I_d, floor)/I₀)`, clamped at zero. Each
//! entry draws from its own ChaCha stream keyed by `(seed, entry index)`, so
//! the result does not depend on evaluation order or thread count.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Sinogram;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DoseModel {
    /// Incident photons per ray, `I₀`.
    pub incident_photons: f64,
    pub seed: u64,
    /// Smallest count kept before taking the logarithm.
    #[serde(default = "default_floor")]
    pub zero_count_floor: f64,
}

fn default_floor() -> f64 {
    1.0
}

impl DoseModel {
    pub fn new(incident_photons: f64, seed: u64) -> Result<Self> {
        let model = Self {
            incident_photons,
            seed,
            zero_count_floor: 1.0,
        };
        model.validate()?;
        Ok(model)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.incident_photons > 0.0) || !self.incident_photons.is_finite() {
            return Err(Error::invalid(format!(
                "incident photon count must be positive, got {}",
                self.incident_photons
            )));
        }
        if !(self.zero_count_floor >= 1.0) {
            return Err(Error::invalid("zero-count floor must be at least 1"));
        }
        Ok(())
    }

    fn entry_rng(&self, index: usize) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(index as u64);
        rng
    }
}

fn check_clean(clean: &Sinogram) -> Result<()> {
    if let Some(i) = clean.values().iter().position(|&v| !(v >= 0.0) || !v.is_finite()) {
        return Err(Error::invalid(format!(
            "clean sinogram entry {i} is negative or non-finite ({})",
            clean.values()[i]
        )));
    }
    Ok(())
}

/// Detected photon counts `I_d` for every ray.
pub fn simulate_counts(clean: &Sinogram, model: &DoseModel) -> Result<Vec<f64>> {
    model.validate()?;
    check_clean(clean)?;
    clean
        .values()
        .par_iter()
        .enumerate()
        .with_min_len(1024)
        .map(|(i, &p)| {
            let mean = model.incident_photons * (-p).exp();
            if mean <= 0.0 {
                // line integral so large that no photon is expected
                return Ok(0.0);
            }
            let poisson = Poisson::new(mean)
                .map_err(|e| Error::invalid(format!("Poisson mean {mean}: {e}")))?;
            Ok(poisson.sample(&mut model.entry_rng(i)))
        })
        .collect()
}

/// Converts detected counts back to line integrals.
pub fn counts_to_line_integrals(counts: &[f64], model: &DoseModel) -> Vec<f64> {
    counts
        .iter()
        .map(|&c| (-(c.max(model.zero_count_floor) / model.incident_photons).ln()).max(0.0))
        .collect()
}

/// Noisy sinogram under the Poisson low-dose model.
pub fn simulate_low_dose(clean: &Sinogram, model: &DoseModel) -> Result<Sinogram> {
    let counts = simulate_counts(clean, model)?;
    Sinogram::from_vec(
        clean.num_angles(),
        clean.detector_cells(),
        counts_to_line_integrals(&counts, model),
    )
}
