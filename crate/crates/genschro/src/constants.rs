//! Physical constants in code units.

use crate::error::{Error, Result};

/// Action scale and particle mass. Code units default to hbar = m = 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhysicalConstants {
    pub hbar: f64,
    pub mass: f64,
}

impl PhysicalConstants {
    pub fn new(hbar: f64, mass: f64) -> Result<Self> {
        if !(hbar > 0.0) || !hbar.is_finite() {
            return Err(Error::config(format!("hbar must be positive, got {hbar}")));
        }
        if !(mass > 0.0) || !mass.is_finite() {
            return Err(Error::config(format!("mass must be positive, got {mass}")));
        }
        Ok(PhysicalConstants { hbar, mass })
    }

    /// Kinetic prefactor hbar^2 / (2 m dx^2) shared by every stencil.
    pub fn kinetic_scale(&self, dx: f64) -> f64 {
        self.hbar * self.hbar / (2.0 * self.mass * dx * dx)
    }
}

impl Default for PhysicalConstants {
    fn default() -> Self {
        PhysicalConstants {
            hbar: 1.0,
            mass: 1.0,
        }
    }
}

pub fn default_constants() -> PhysicalConstants {
    PhysicalConstants::default()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_nonpositive() {
        assert!(PhysicalConstants::new(0.0, 1.0).is_err());
        assert!(PhysicalConstants::new(1.0, -2.0).is_err());
        assert!(PhysicalConstants::new(f64::NAN, 1.0).is_err());
    }
}
