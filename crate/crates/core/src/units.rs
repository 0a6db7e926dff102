use serde::{Deserialize, Serialize};

use crate::error::{require_positive, Result};

/// Reduced Planck constant and particle mass. Natural units (ħ = m = 1) by default.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhysicalConstants {
    hbar: f64,
    mass: f64,
}

impl Default for PhysicalConstants {
    fn default() -> Self {
        Self {
            hbar: 1.0,
            mass: 1.0,
        }
    }
}

impl PhysicalConstants {
    pub fn new(hbar: f64, mass: f64) -> Result<Self> {
        Ok(Self {
            hbar: require_positive("hbar", hbar)?,
            mass: require_positive("mass", mass)?,
        })
    }

    pub fn hbar(&self) -> f64 {
        self.hbar
    }

    pub fn mass(&self) -> f64 {
        self.mass
    }

    /// 2m/ħ², the factor turning energies into squared wavenumbers.
    pub fn two_m_over_hbar2(&self) -> f64 {
        2.0 * self.mass / (self.hbar * self.hbar)
    }

    /// ħ²/2m.
    pub fn kinetic_scale(&self) -> f64 {
        self.hbar * self.hbar / (2.0 * self.mass)
    }

    pub fn energy_of(&self, k: f64) -> f64 {
        self.kinetic_scale() * k * k
    }

    /// Wavenumber for a non-negative energy.
    pub fn wavenumber_of(&self, energy: f64) -> f64 {
        (self.two_m_over_hbar2() * energy).sqrt()
    }
}
