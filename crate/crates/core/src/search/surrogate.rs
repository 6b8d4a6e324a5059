//! Energy predictor contract and a clamped pair-potential stand-in.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::elements::CovalentRadiusTable;
use crate::geometry::{for_each_pair_within, GeometryError};
use crate::structure::Structure;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PredictError {
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("predictor produced a non-finite energy")]
    NonFinite,
}

/// Maps a structure to an energy in eV. Must be deterministic.
pub trait EnergyPredictor: Sync {
    fn predict(&self, s: &Structure) -> Result<f64, PredictError>;
}

/// Truncated and shifted Lennard-Jones sum with per-pair parameters taken
/// from covalent radii.
///
/// For a pair with radius sum `R = r_i + r_j`, the well sits at `R`
/// (`σ = R / 2^(1/6)`) with depth `ε = depth_per_angstrom · sqrt(r_i r_j)`.
/// Each pair contribution is shifted to vanish at `cutoff` and capped at
/// `pair_cap` eV, so overlapping atoms give a large but finite energy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PairPotentialSurrogate {
    /// Å.
    pub cutoff: f64,
    /// eV per Å of geometric-mean radius.
    pub depth_per_angstrom: f64,
    /// eV.
    pub pair_cap: f64,
    #[serde(skip)]
    pub radii: CovalentRadiusTable,
}

impl Default for PairPotentialSurrogate {
    fn default() -> Self {
        PairPotentialSurrogate {
            cutoff: 6.0,
            depth_per_angstrom: 0.2,
            pair_cap: 10.0,
            radii: CovalentRadiusTable::default(),
        }
    }
}

impl PairPotentialSurrogate {
    /// Energy of one pair at distance `r` (Å).
    pub fn pair_energy(&self, r_i: f64, r_j: f64, r: f64) -> f64 {
        if r >= self.cutoff {
            return 0.0;
        }
        let sigma = (r_i + r_j) / 2f64.powf(1.0 / 6.0);
        let eps = self.depth_per_angstrom * (r_i * r_j).sqrt();
        let lj = |d: f64| {
            let s6 = (sigma / d).powi(6);
            4.0 * eps * (s6 * s6 - s6)
        };
        if r <= 0.0 {
            return self.pair_cap;
        }
        (lj(r) - lj(self.cutoff)).min(self.pair_cap)
    }
}

impl EnergyPredictor for PairPotentialSurrogate {
    fn predict(&self, s: &Structure) -> Result<f64, PredictError> {
        let r: Vec<f64> = s.sites().iter().map(|site| self.radii.radius(site.element)).collect();
        let mut ordered_sum = 0.0;
        // Ordered pairs visit every interaction twice.
        for_each_pair_within(
            s,
            |_, _| self.cutoff,
            |i, j, _, d| ordered_sum += self.pair_energy(r[i], r[j], d),
        )?;
        let e = 0.5 * ordered_sum;
        if e.is_finite() {
            Ok(e)
        } else {
            Err(PredictError::NonFinite)
        }
    }
}
