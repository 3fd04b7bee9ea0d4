//! The co-evolving field pair (psi, phi).
//!
//! phi plays the role of the parity-time image of psi rather than its
//! complex conjugate; the three construction modes fix how phi is seeded.
//! Evolution never overwrites phi from psi (unless explicitly asked to), so
//! agreement with the transform is something runs demonstrate, not enforce.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grid::Grid;

/// How phi is produced from psi at construction time.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PhiMode {
    /// phi_k = conj(psi_{N-1-k}), the parity-time image.
    PtOfPsi,
    /// phi = conj(psi), the Hermitian pairing.
    Conjugate,
    /// phi starts equal to psi and runs on its own equation afterwards.
    Independent,
}

impl PhiMode {
    pub fn name(self) -> &'static str {
        match self {
            PhiMode::PtOfPsi => "pt_of_psi",
            PhiMode::Conjugate => "conjugate",
            PhiMode::Independent => "independent",
        }
    }
}

impl std::str::FromStr for PhiMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pt_of_psi" => Ok(PhiMode::PtOfPsi),
            "conjugate" => Ok(PhiMode::Conjugate),
            "independent" => Ok(PhiMode::Independent),
            other => Err(Error::config(format!(
                "unknown phi mode `{other}` (expected pt_of_psi, conjugate or independent)"
            ))),
        }
    }
}

/// Field pair at one time instant. Boundary nodes are pinned to zero.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldState {
    pub t: f64,
    pub psi: Vec<Complex64>,
    pub phi: Vec<Complex64>,
    pub phi_mode: PhiMode,
}

impl FieldState {
    /// Wrap explicit field arrays; boundary nodes are forced to zero.
    pub fn from_parts(
        t: f64,
        mut psi: Vec<Complex64>,
        mut phi: Vec<Complex64>,
        phi_mode: PhiMode,
    ) -> Result<Self> {
        if psi.len() != phi.len() {
            return Err(Error::usage("psi and phi must have the same length"));
        }
        if psi.len() < 5 {
            return Err(Error::usage("field arrays need at least 5 nodes"));
        }
        let zero = Complex64::new(0.0, 0.0);
        let n = psi.len();
        psi[0] = zero;
        psi[n - 1] = zero;
        phi[0] = zero;
        phi[n - 1] = zero;
        Ok(FieldState {
            t,
            psi,
            phi,
            phi_mode,
        })
    }

    pub fn len(&self) -> usize {
        self.psi.len()
    }

    pub fn is_empty(&self) -> bool {
        self.psi.is_empty()
    }

    /// Max |phi_k - conj(psi_{N-1-k})|: distance from the parity-time pairing.
    pub fn pt_defect(&self) -> f64 {
        let n = self.len();
        let mut worst = 0.0_f64;
        for k in 0..n {
            worst = worst.max((self.phi[k] - self.psi[n - 1 - k].conj()).norm());
        }
        worst
    }

    /// Largest field amplitude anywhere.
    pub fn max_amplitude(&self) -> f64 {
        crate::grid::max_abs(&self.psi).max(crate::grid::max_abs(&self.phi))
    }

    /// Largest amplitude on the two nodes nearest each boundary.
    pub fn boundary_amplitude(&self) -> f64 {
        let n = self.len();
        [0, 1, n - 2, n - 1]
            .iter()
            .map(|&k| self.psi[k].norm().max(self.phi[k].norm()))
            .fold(0.0, f64::max)
    }

    pub fn all_finite(&self) -> bool {
        self.psi
            .iter()
            .chain(self.phi.iter())
            .all(|z| z.re.is_finite() && z.im.is_finite())
    }
}

/// The parity-time transform of a sample array: out_k = conj(in_{N-1-k}).
pub fn pt_transform(field: &[Complex64]) -> Vec<Complex64> {
    let n = field.len();
    (0..n).map(|k| field[n - 1 - k].conj()).collect()
}

/// Diagnostics from packet construction.
#[derive(Debug, Clone, Default)]
pub struct InitDiagnostics {
    /// Boundary amplitude of the raw packet relative to its peak.
    pub boundary_ratio: f64,
    pub warnings: Vec<String>,
}

/// Normalized Gaussian packet exp(-(x-x0)^2/(4 sigma^2) + i k0 x).
///
/// Boundary nodes are zeroed and psi rescaled so that the quadrature of
/// |psi|^2 is exactly one; phi follows `phi_mode`. A packet whose tails
/// reach the boundary above 1e-10 of its peak yields a warning.
pub fn init_gaussian(
    grid: &Grid,
    x0: f64,
    k0: f64,
    sigma: f64,
    phi_mode: PhiMode,
) -> Result<(FieldState, InitDiagnostics)> {
    if !(sigma > 0.0) || !sigma.is_finite() {
        return Err(Error::config(format!("sigma must be positive, got {sigma}")));
    }
    let n = grid.len();
    let amp = (2.0 * std::f64::consts::PI * sigma * sigma).powf(-0.25);
    let mut psi: Vec<Complex64> = grid.sample(|x| {
        let d = x - x0;
        let envelope = amp * (-d * d / (4.0 * sigma * sigma)).exp();
        Complex64::new(0.0, k0 * x).exp() * envelope
    });
    let peak = crate::grid::max_abs(&psi);
    let boundary = psi[0].norm().max(psi[n - 1].norm());
    let boundary_ratio = if peak > 0.0 { boundary / peak } else { 0.0 };
    let mut diagnostics = InitDiagnostics {
        boundary_ratio,
        warnings: Vec::new(),
    };
    if boundary_ratio > 1e-10 {
        diagnostics.warnings.push(format!(
            "initial packet touches the boundary: amplitude ratio {boundary_ratio:.3e} exceeds 1e-10"
        ));
    }
    psi[0] = Complex64::new(0.0, 0.0);
    psi[n - 1] = Complex64::new(0.0, 0.0);
    let norm_sq: Vec<f64> = psi.iter().map(|z| z.norm_sqr()).collect();
    let total = grid.integrate(&norm_sq);
    if !(total > 0.0) {
        return Err(Error::config(
            "initial packet has zero norm on the grid".to_string(),
        ));
    }
    let scale = 1.0 / total.sqrt();
    for z in &mut psi {
        *z *= scale;
    }
    let phi = match phi_mode {
        PhiMode::PtOfPsi => pt_transform(&psi),
        PhiMode::Conjugate => psi.iter().map(|z| z.conj()).collect(),
        PhiMode::Independent => psi.clone(),
    };
    let state = FieldState::from_parts(0.0, psi, phi, phi_mode)?;
    Ok((state, diagnostics))
}

/// Global-phase alignment factor that best maps `field` onto its own
/// parity-time image; used to test eigenvectors of unbroken symmetry.
pub fn pt_alignment_phase(field: &[Complex64]) -> Complex64 {
    let image = pt_transform(field);
    let mut overlap = Complex64::new(0.0, 0.0);
    for (v, w) in field.iter().zip(&image) {
        overlap += v.conj() * w;
    }
    if overlap.norm() == 0.0 {
        return Complex64::new(1.0, 0.0);
    }
    // PT(c v) = conj(c) PT(v): if PT(v) = e^{2 i theta} v then e^{i theta} v
    // is a fixed point.
    let theta = 0.5 * overlap.arg();
    Complex64::new(0.0, theta).exp()
}
