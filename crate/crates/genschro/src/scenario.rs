//! Turn a validated config into a runnable model, initial state and options.

use std::path::{Path, PathBuf};

use crate::config::ScenarioConfig;
use crate::constants::PhysicalConstants;
use crate::error::{Error, Result};
use crate::evolution::RunOptions;
use crate::fields::{init_gaussian, FieldState, PhiMode};
use crate::grid::Grid;
use crate::model::Model;
use crate::operators::AssemblyForm;
use crate::profiles::{MuProfile, PotentialProfile, ProfileTable};

/// Resolve a table path relative to the config file's directory.
fn resolve(base: &Path, file: &str) -> PathBuf {
    let p = Path::new(file);
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

pub fn build_mu(config: &ScenarioConfig, base: &Path) -> Result<MuProfile> {
    Ok(match config.mu.kind.as_str() {
        "zero" => MuProfile::Zero,
        "quadratic_real" => MuProfile::QuadraticReal {
            gamma: config.mu.gamma.unwrap(),
        },
        "linear_imag" => MuProfile::LinearImag {
            lambda: config.mu.lambda.unwrap(),
        },
        "table" => {
            let path = resolve(base, config.mu.file.as_ref().unwrap());
            MuProfile::Table(ProfileTable::load(&path)?)
        }
        other => return Err(Error::config(format!("unknown mu kind `{other}`"))),
    })
}

pub fn build_potential(config: &ScenarioConfig, base: &Path) -> Result<PotentialProfile> {
    Ok(match config.potential.kind.as_str() {
        "zero" => PotentialProfile::Zero,
        "harmonic" => PotentialProfile::Harmonic {
            omega: config.potential.omega.unwrap(),
        },
        "cubic_imag" => PotentialProfile::CubicImag {
            epsilon: config.potential.epsilon.unwrap(),
        },
        "table" => {
            let path = resolve(base, config.potential.file.as_ref().unwrap());
            PotentialProfile::Table(ProfileTable::load(&path)?)
        }
        other => return Err(Error::config(format!("unknown potential kind `{other}`"))),
    })
}

/// Model from config; `base` anchors relative table paths.
pub fn build_model(config: &ScenarioConfig, base: &Path) -> Result<Model> {
    let grid = Grid::new(config.grid.half_width, config.grid.points)?;
    let constants = PhysicalConstants::new(config.physics.hbar, config.physics.mass)?;
    let mu = build_mu(config, base)?;
    let potential = build_potential(config, base)?;
    let form: AssemblyForm = config.assembly.form.parse()?;
    Ok(Model {
        grid,
        constants,
        mu,
        potential,
        form,
    })
}

/// Initial field pair plus any construction warnings.
pub fn build_initial(config: &ScenarioConfig, grid: &Grid) -> Result<(FieldState, Vec<String>)> {
    let phi_mode: PhiMode = config.initial.phi_mode.parse()?;
    let (state, diag) = init_gaussian(
        grid,
        config.initial.x0,
        config.initial.k0,
        config.initial.sigma,
        phi_mode,
    )?;
    Ok((state, diag.warnings))
}

pub fn run_options(config: &ScenarioConfig) -> RunOptions {
    RunOptions {
        dt: config.time.dt,
        steps: config.time.steps,
        snapshot_every: config.time.snapshot_every,
        enforce_pt: false,
    }
}
