//! The single-qubit state family `rho(omega)`, hypothesis sets over the angle
//! and grid maximum-likelihood estimation.

mod grid;
mod hypothesis;

pub use grid::{build_grid, MleEstimate, Observation, ParamGrid, DEFAULT_RESOLUTION_DEG, P_FLOOR};
pub use hypothesis::{HypothesisSet, Piece};

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::quantum::{CMatrix, DensityMatrix};

const BLOCH_TOL: f64 = 1e-12;

/// Known purity constants of the family.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FamilyConfig {
    pub r_z: f64,
    pub r_x: f64,
}

impl FamilyConfig {
    /// The maximum of `r_z² cos²ω + r_x² sin²ω` over the circle is
    /// `max(r_z², r_x²)`, so checking both axes checks every angle.
    pub fn new(r_z: f64, r_x: f64) -> Result<Self> {
        if !r_z.is_finite() || !r_x.is_finite() {
            return Err(Error::InvalidParameter("r_z and r_x must be finite".into()));
        }
        let worst = r_z.powi(2).max(r_x.powi(2));
        if worst > 1.0 + BLOCH_TOL {
            let omega_deg = if r_z.abs() >= r_x.abs() { 0.0 } else { 90.0 };
            return Err(Error::InvalidBlochVector {
                omega_deg,
                norm_sq: worst,
            });
        }
        Ok(FamilyConfig { r_z, r_x })
    }

    /// Pure states on the x-z great circle.
    pub fn pure() -> Self {
        FamilyConfig { r_z: 1.0, r_x: 1.0 }
    }

    /// Bloch components `(x, z)` at `omega_deg`.
    pub fn bloch(&self, omega_deg: f64) -> (f64, f64) {
        let w = omega_deg.to_radians();
        (self.r_x * w.sin(), self.r_z * w.cos())
    }

    pub(crate) fn matrix_at(&self, omega_deg: f64) -> CMatrix {
        let (x, z) = self.bloch(omega_deg);
        CMatrix::from_row_slice(
            2,
            2,
            &[
                Complex64::new(0.5 * (1.0 + z), 0.0),
                Complex64::new(0.5 * x, 0.0),
                Complex64::new(0.5 * x, 0.0),
                Complex64::new(0.5 * (1.0 - z), 0.0),
            ],
        )
    }
}

/// `rho(omega) = ½[[1 + r_z cos ω, r_x sin ω], [r_x sin ω, 1 − r_z cos ω]]`.
pub fn state_from_angle(cfg: &FamilyConfig, omega_deg: f64) -> Result<DensityMatrix> {
    let (x, z) = cfg.bloch(omega_deg);
    let norm_sq = x * x + z * z;
    if !norm_sq.is_finite() || norm_sq > 1.0 + BLOCH_TOL {
        return Err(Error::InvalidBlochVector { omega_deg, norm_sq });
    }
    Ok(DensityMatrix::from_trusted(cfg.matrix_at(omega_deg)))
}
