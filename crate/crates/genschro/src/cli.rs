//! Command implementations behind the `genschro` binary.

use std::path::{Path, PathBuf};

use crate::config::{load_config, ScenarioConfig};
use crate::error::Result;
use crate::evolution::run;
use crate::report::{write_spectrum_csv, RunReport, SnapshotWriter};
use crate::scenario::{build_initial, build_model, run_options};
use crate::spectral::{lowest_eigenpairs, reality_tolerance};

fn config_base(config_path: &Path) -> PathBuf {
    config_path
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .map(Path::to_path_buf)
        .unwrap_or_else(|| PathBuf::from("."))
}

fn output_dir(config: &ScenarioConfig, output_override: Option<&Path>) -> PathBuf {
    output_override
        .map(Path::to_path_buf)
        .unwrap_or_else(|| PathBuf::from(&config.output.dir))
}

/// Execute a scenario: snapshots.csv, report.json and a console summary.
/// An aborted run leaves `snapshots.csv.partial` and no final files.
pub fn cmd_run(config_path: &Path, output_override: Option<&Path>) -> Result<()> {
    let config = load_config(config_path)?;
    let base = config_base(config_path);
    // Build everything (including table loads) before touching the
    // output directory, so config errors leave no files behind.
    let model = build_model(&config, &base)?;
    let (initial, init_warnings) = build_initial(&config, &model.grid)?;

    let dir = output_dir(&config, output_override);
    std::fs::create_dir_all(&dir)?;
    let mut writer = SnapshotWriter::create(&dir.join("snapshots.csv"), config.output.precision)?;

    let grid = model.grid.clone();
    let evolution = run(&model, initial, &run_options(&config), |step, state, snap| {
        writer.append(step, &grid, state, snap)
    })?;
    writer.finish()?;

    let report = RunReport::from_evolution(&config, &evolution, init_warnings)?;
    report.write(&dir.join("report.json"))?;

    println!("run: {} steps to t = {:.6}", report.summary.steps, report.summary.final_t);
    println!("  total probability drift : {:.3e}", report.summary.probability_drift);
    println!("  energy drift            : {:.3e}", report.summary.energy_drift);
    println!("  max continuity residual : {:.3e}", report.summary.max_continuity_residual);
    println!("  max flux residual       : {:.3e}", report.summary.max_flux_residual);
    println!("  max pairing defect      : {:.3e}", report.summary.max_pt_defect);
    println!("  min rho                 : {:.3e}", report.summary.min_rho);
    println!("  max boundary amplitude  : {:.3e}", report.summary.max_boundary_amplitude);
    for w in &report.warnings {
        println!("  warning: {w}");
    }
    println!("  wrote {}/snapshots.csv and report.json", dir.display());
    Ok(())
}

/// Compute the low spectrum and write spectrum.csv.
pub fn cmd_spectrum(config_path: &Path) -> Result<()> {
    let config = load_config(config_path)?;
    let base = config_base(config_path);
    let model = build_model(&config, &base)?;
    let h = model.hamiltonian(0.0)?;
    let result = lowest_eigenpairs(&h, config.spectral.k, None)?;

    let dir = output_dir(&config, None);
    std::fs::create_dir_all(&dir)?;
    write_spectrum_csv(&dir.join("spectrum.csv"), &result, config.output.precision)?;

    println!("spectrum: {} eigenpairs ({} form)", result.len(), model.form.name());
    for (i, e) in result.eigenvalues.iter().enumerate() {
        let flag = if result.reality_flags[i] {
            "real".to_string()
        } else {
            let partner = result
                .eigenvalues
                .iter()
                .position(|f| (f - e.conj()).norm() <= 1e-6 * e.norm().max(1.0))
                .map(|j| format!("conjugate pair with n = {}", j + 1))
                .unwrap_or_else(|| "complex, partner missing".to_string());
            format!("COMPLEX ({partner})")
        };
        println!(
            "  n = {:2}  E = {:+.9e} {:+.9e} i  residual {:.2e}  [{flag}]",
            i + 1,
            e.re,
            e.im,
            result.residuals[i]
        );
    }
    for w in &result.warnings {
        println!("  warning: {w}");
    }
    println!("  wrote {}/spectrum.csv", dir.display());
    Ok(())
}

/// Run the invariant suite; returns whether every check passed.
pub fn cmd_check(config_path: &Path) -> Result<bool> {
    let config = load_config(config_path)?;
    let base = config_base(config_path);
    let report = crate::check::run_checks(&config, &base)?;
    for o in &report.outcomes {
        println!(
            "{} {:28} measured = {:.6e}  {}",
            if o.passed { "PASS" } else { "FAIL" },
            o.name,
            o.measured,
            o.detail
        );
    }
    let all = report.all_passed();
    println!(
        "{}: {}/{} checks passed",
        if all { "OK" } else { "FAILED" },
        report.outcomes.iter().filter(|o| o.passed).count(),
        report.outcomes.len()
    );
    Ok(all)
}
