//! One-dimensional laboratory for a non-Hermitian, parity-time symmetric
//! Schrödinger field theory built on a generalized momentum operator
//! p = -i hbar ((1 + mu) d/dx + mu'/2).
//!
//! The crate assembles the generalized Hamiltonian as a banded complex
//! matrix (in two algebraically equivalent forms), co-propagates the field
//! pair (psi, phi) with an implicit midpoint scheme, evaluates the
//! probability, current, Hamiltonian, energy-flux and momentum densities,
//! and verifies the continuity equation, total-probability conservation and
//! the operator identities to discretization order. A small eigensolver
//! probes spectral reality for parity-time symmetric configurations.
//!
//! Start with the runnable examples (`cargo run --example free_packet`,
//! `... --example pt_run`, and friends) or the `genschro` binary, which
//! drives config-file scenarios:
//!
//! ```text
//! genschro run <config> [--output-dir D]
//! genschro spectrum <config>
//! genschro check <config>
//! ```

pub mod banded;
pub mod check;
pub mod cli;
pub mod config;
pub mod operators;
pub mod constants;
pub mod densities;
pub mod error;
pub mod fields;
pub mod evolution;
pub mod grid;
pub mod model;
pub mod profiles;
pub mod report;
pub mod scenario;
pub mod spectral;

pub use banded::{BandedComplexMatrix, BandedLu, FormTag};
pub use config::{load_config, parse_config, serialize_config, ScenarioConfig};
pub use constants::PhysicalConstants;
pub use densities::{canonical_momenta, canonical_momenta_alt_sign, conjugated_expectation, current_density, energy_flux, energy_pairing, field_time_derivatives, hamiltonian_density, lagrangian_density, legendre_density, momentum_density, probability_density, total_energy, CanonicalMomenta, DensitySnapshot};
pub use error::{Error, Result};
pub use evolution::{compatible_flux_residual, continuity_residual, probability_drift, run, EvolutionRecord, EvolutionReport, Propagator, RunOptions, StepDiagnostics};
pub use fields::{init_gaussian, pt_alignment_phase, pt_transform, FieldState, InitDiagnostics, PhiMode};
pub use grid::Grid;
pub use operators::{assemble_hamiltonian, assemble_momentum, kinetic_identity_residual, pt_conjugate_matrix_defect, AssemblyForm, CoefficientFields, KineticIdentity};
pub use model::Model;
pub use spectral::{lowest_eigenpairs, reality_tolerance, stationarity_check, SpectralResult, RESIDUAL_BOUND};
pub use profiles::{MuProfile, PotentialProfile, ProfileTable};
