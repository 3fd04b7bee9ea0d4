//! Output files: the snapshot CSV stream, the spectrum CSV and the
//! machine-readable run report.
//!
//! Data files carry no timestamps so identical configs reproduce
//! byte-identical output; the JSON report holds the only timestamp.

use std::fs::File;
use std::io::{BufWriter, Write as IoWrite};
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::config::ScenarioConfig;
use crate::densities::DensitySnapshot;
use crate::error::Result;
use crate::evolution::EvolutionReport;
use crate::fields::FieldState;
use crate::grid::Grid;
use crate::spectral::SpectralResult;

/// Fixed column set of snapshots.csv.
pub const SNAPSHOT_COLUMNS: &str = "step,t,x,psi_re,psi_im,phi_re,phi_im,rho,j,hdens,sflux,pdens";

/// Scientific notation with the configured number of significant digits.
pub fn format_float(value: f64, precision: usize) -> String {
    format!("{:.*e}", precision.saturating_sub(1), value)
}

/// Streaming CSV writer that lands on `<final>.partial` until `finish`.
pub struct SnapshotWriter {
    writer: BufWriter<File>,
    partial_path: PathBuf,
    final_path: PathBuf,
    precision: usize,
}

impl SnapshotWriter {
    pub fn create(final_path: &Path, precision: usize) -> Result<Self> {
        let partial_path = with_partial_suffix(final_path);
        let file = File::create(&partial_path)?;
        let mut writer = BufWriter::new(file);
        writeln!(writer, "{SNAPSHOT_COLUMNS}")?;
        Ok(SnapshotWriter {
            writer,
            partial_path,
            final_path: final_path.to_path_buf(),
            precision,
        })
    }

    pub fn append(
        &mut self,
        step: usize,
        grid: &Grid,
        state: &FieldState,
        snapshot: &DensitySnapshot,
    ) -> Result<()> {
        let p = self.precision;
        for k in 0..grid.len() {
            writeln!(
                self.writer,
                "{},{},{},{},{},{},{},{},{},{},{},{}",
                step,
                format_float(state.t, p),
                format_float(grid.node(k), p),
                format_float(state.psi[k].re, p),
                format_float(state.psi[k].im, p),
                format_float(state.phi[k].re, p),
                format_float(state.phi[k].im, p),
                format_float(snapshot.rho[k], p),
                format_float(snapshot.current[k], p),
                format_float(snapshot.hamiltonian[k], p),
                format_float(snapshot.energy_flux[k], p),
                format_float(snapshot.momentum[k], p),
            )?;
        }
        Ok(())
    }

    /// Flush and promote the partial file to its final name.
    pub fn finish(mut self) -> Result<()> {
        self.writer.flush()?;
        drop(self.writer);
        std::fs::rename(&self.partial_path, &self.final_path)?;
        Ok(())
    }
}

fn with_partial_suffix(path: &Path) -> PathBuf {
    let mut name = path.file_name().unwrap_or_default().to_os_string();
    name.push(".partial");
    path.with_file_name(name)
}

/// Acceptance-facing numbers distilled from a run.
#[derive(Debug, Clone, Serialize)]
pub struct RunSummary {
    pub steps: usize,
    pub final_t: f64,
    pub probability_drift: f64,
    pub energy_drift: f64,
    pub max_continuity_residual: f64,
    pub max_flux_residual: f64,
    pub max_pt_defect: f64,
    pub min_rho: f64,
    pub max_imag_residue: f64,
    pub max_boundary_amplitude: f64,
    pub max_solve_residual: f64,
}

/// The structured run report written next to the CSV files.
#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub timestamp_unix: u64,
    pub config: ScenarioConfig,
    pub summary: RunSummary,
    pub records: Vec<crate::evolution::EvolutionRecord>,
    pub warnings: Vec<String>,
}

impl RunReport {
    pub fn from_evolution(
        config: &ScenarioConfig,
        evolution: &EvolutionReport,
        extra_warnings: Vec<String>,
    ) -> Result<RunReport> {
        let mut warnings = extra_warnings;
        warnings.extend(evolution.warnings.iter().cloned());
        let records = evolution.records.clone();
        let last = records.last();
        let mut summary = RunSummary {
            steps: last.map(|r| r.step).unwrap_or(0),
            final_t: last.map(|r| r.t).unwrap_or(0.0),
            probability_drift: evolution.probability_drift()?,
            energy_drift: evolution.energy_drift(),
            max_continuity_residual: evolution.max_continuity_residual(),
            max_flux_residual: evolution.max_flux_residual(),
            max_pt_defect: evolution.max_pt_defect(),
            min_rho: evolution.min_rho(),
            max_imag_residue: evolution.max_imag_residue(),
            max_boundary_amplitude: records
                .iter()
                .map(|r| r.boundary_amplitude)
                .fold(0.0, f64::max),
            max_solve_residual: records
                .iter()
                .map(|r| r.max_solve_residual)
                .fold(0.0, f64::max),
        };
        sanitize_summary(&mut summary, &mut warnings);
        Ok(RunReport {
            timestamp_unix: std::time::SystemTime::now()
                .duration_since(std::time::UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0),
            config: config.clone(),
            summary,
            records,
            warnings,
        })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let mut sanitized = self.clone();
        for record in &mut sanitized.records {
            for field in [
                &mut record.total_probability,
                &mut record.energy_re,
                &mut record.energy_im,
                &mut record.pairing_im,
                &mut record.max_continuity_residual,
                &mut record.max_flux_residual,
                &mut record.pt_defect,
                &mut record.min_rho,
                &mut record.boundary_amplitude,
                &mut record.max_solve_residual,
                &mut record.max_amplitude,
                &mut record.max_imag_residue,
            ] {
                if !field.is_finite() {
                    *field = f64::MAX;
                    if !sanitized
                        .warnings
                        .iter()
                        .any(|w| w.starts_with("overflow:"))
                    {
                        sanitized.warnings.push(format!(
                            "overflow: a non-finite record value at step {} was clamped to f64::MAX",
                            record.step
                        ));
                    }
                }
            }
        }
        let json = serde_json::to_string_pretty(&sanitized)
            .map_err(|e| crate::error::Error::config(format!("report serialization: {e}")))?;
        std::fs::write(path, json)?;
        Ok(())
    }
}

fn sanitize_summary(summary: &mut RunSummary, warnings: &mut Vec<String>) {
    for (name, field) in [
        ("probability_drift", &mut summary.probability_drift),
        ("energy_drift", &mut summary.energy_drift),
        (
            "max_continuity_residual",
            &mut summary.max_continuity_residual,
        ),
        ("max_flux_residual", &mut summary.max_flux_residual),
        ("max_pt_defect", &mut summary.max_pt_defect),
        ("min_rho", &mut summary.min_rho),
        ("max_imag_residue", &mut summary.max_imag_residue),
        (
            "max_boundary_amplitude",
            &mut summary.max_boundary_amplitude,
        ),
        ("max_solve_residual", &mut summary.max_solve_residual),
    ] {
        if !field.is_finite() {
            warnings.push(format!("overflow: summary field {name} was not finite"));
            *field = f64::MAX;
        }
    }
}

/// spectrum.csv with 1-based mode index.
pub fn write_spectrum_csv(path: &Path, result: &SpectralResult, precision: usize) -> Result<()> {
    let partial = with_partial_suffix(path);
    {
        let mut w = BufWriter::new(File::create(&partial)?);
        writeln!(w, "n,re_E,im_E,residual")?;
        for (i, e) in result.eigenvalues.iter().enumerate() {
            writeln!(
                w,
                "{},{},{},{}",
                i + 1,
                format_float(e.re, precision),
                format_float(e.im, precision),
                format_float(result.residuals[i], precision),
            )?;
        }
        w.flush()?;
    }
    std::fs::rename(&partial, path)?;
    Ok(())
}
