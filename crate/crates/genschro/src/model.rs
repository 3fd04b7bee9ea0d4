//! Bundle of grid, constants and profiles describing one physical setup.

use crate::banded::BandedComplexMatrix;
use crate::constants::PhysicalConstants;
use crate::error::Result;
use crate::grid::Grid;
use crate::operators::{assemble_hamiltonian, assemble_momentum, AssemblyForm};
use crate::profiles::{MuProfile, PotentialProfile};

#[derive(Debug, Clone)]
pub struct Model {
    pub grid: Grid,
    pub constants: PhysicalConstants,
    pub mu: MuProfile,
    pub potential: PotentialProfile,
    pub form: AssemblyForm,
}

impl Model {
    pub fn hamiltonian(&self, t: f64) -> Result<BandedComplexMatrix> {
        assemble_hamiltonian(
            &self.grid,
            &self.mu,
            &self.potential,
            &self.constants,
            t,
            self.form,
        )
    }

    pub fn momentum(&self) -> Result<BandedComplexMatrix> {
        assemble_momentum(&self.grid, &self.mu, &self.constants)
    }

    /// Same setup on a coarser grid; refinement studies walk through this.
    pub fn coarsened(&self, factor: usize) -> Result<Model> {
        Ok(Model {
            grid: self.grid.coarsen(factor)?,
            ..self.clone()
        })
    }
}
