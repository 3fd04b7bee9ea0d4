//! Pointwise densities and functionals of the field pair.
//!
//! Every density here is a sum of an expression and its complex conjugate
//! (the conjugate line is evaluated literally, not assumed), so the stored
//! arrays are real and the discarded imaginary residue is tracked as a
//! sanity measure. Spatial derivatives use the same second-order stencils
//! as operator assembly; time derivatives always come from the field
//! equations, never from differencing stored time levels.

use num_complex::Complex64;

use crate::banded::BandedComplexMatrix;
use crate::constants::PhysicalConstants;
use crate::error::Result;
use crate::fields::FieldState;
use crate::grid::Grid;
use crate::profiles::{MuProfile, PotentialProfile};

type C64 = Complex64;

fn conj_all(v: &[C64]) -> Vec<C64> {
    v.iter().map(|z| z.conj()).collect()
}

/// Split a manifestly conjugate-paired complex array into its real content
/// and the largest discarded imaginary residue.
fn project_real(pre: Vec<C64>) -> (Vec<f64>, f64) {
    let residue = pre.iter().map(|z| z.im.abs()).fold(0.0, f64::max);
    (pre.into_iter().map(|z| z.re).collect(), residue)
}

/// rho = phi psi + conj(phi psi).
pub fn probability_density(state: &FieldState) -> Vec<f64> {
    probability_density_with_residue(state).0
}

pub(crate) fn probability_density_with_residue(state: &FieldState) -> (Vec<f64>, f64) {
    let pre: Vec<C64> = state
        .psi
        .iter()
        .zip(&state.phi)
        .map(|(p, f)| {
            let z = f * p;
            z + (f.conj() * p.conj())
        })
        .collect();
    project_real(pre)
}

/// j = (hbar/2im) [ (1+mu)^2 (phi psi' - psi phi') - conj line ].
pub fn current_density(
    state: &FieldState,
    mu: &MuProfile,
    grid: &Grid,
    constants: &PhysicalConstants,
) -> Result<Vec<f64>> {
    Ok(current_density_with_residue(state, mu, grid, constants)?.0)
}

pub(crate) fn current_density_with_residue(
    state: &FieldState,
    mu: &MuProfile,
    grid: &Grid,
    constants: &PhysicalConstants,
) -> Result<(Vec<f64>, f64)> {
    let dpsi = grid.gradient(&state.psi);
    let dphi = grid.gradient(&state.phi);
    let factor = C64::new(0.0, -constants.hbar / (2.0 * constants.mass));
    let mut pre = Vec::with_capacity(grid.len());
    for (k, &x) in grid.nodes().iter().enumerate() {
        let (m, _, _) = mu.eval(x)?;
        let one_plus = C64::new(1.0, 0.0) + m;
        let c2 = one_plus * one_plus;
        let z = c2 * (state.phi[k] * dpsi[k] - state.psi[k] * dphi[k]);
        let w = c2.conj()
            * (state.phi[k].conj() * dpsi[k].conj() - state.psi[k].conj() * dphi[k].conj());
        pre.push(factor * (z - w));
    }
    Ok(project_real(pre))
}

/// Hamiltonian density: kinetic bracket plus potential pairing and the
/// conjugate line.
pub fn hamiltonian_density(
    state: &FieldState,
    mu: &MuProfile,
    potential: &PotentialProfile,
    grid: &Grid,
    constants: &PhysicalConstants,
) -> Result<Vec<f64>> {
    Ok(hamiltonian_density_with_residue(state, mu, potential, grid, constants)?.0)
}

pub(crate) fn hamiltonian_density_with_residue(
    state: &FieldState,
    mu: &MuProfile,
    potential: &PotentialProfile,
    grid: &Grid,
    constants: &PhysicalConstants,
) -> Result<(Vec<f64>, f64)> {
    let dpsi = grid.gradient(&state.psi);
    let dphi = grid.gradient(&state.phi);
    let prod: Vec<C64> = state
        .phi
        .iter()
        .zip(&state.psi)
        .map(|(f, p)| f * p)
        .collect();
    let dprod = grid.gradient(&prod);
    let dprod_conj = grid.gradient(&conj_all(&prod));
    let kin_scale = constants.hbar * constants.hbar / (4.0 * constants.mass);
    let mut pre = Vec::with_capacity(grid.len());
    for (k, &x) in grid.nodes().iter().enumerate() {
        let (m, dm, _) = mu.eval(x)?;
        let v = potential.eval(x, state.t, constants)?;
        let one_plus = C64::new(1.0, 0.0) + m;
        let c2 = one_plus * one_plus;
        let mix = 0.5 * (dm * one_plus);
        let quarter = 0.25 * (dm * dm);
        let line1 = kin_scale * (c2 * (dphi[k] * dpsi[k]) + mix * dprod[k] + quarter * prod[k])
            + 0.5 * (v * prod[k]);
        let line2 = kin_scale
            * (c2.conj() * (dphi[k].conj() * dpsi[k].conj())
                + mix.conj() * dprod_conj[k]
                + quarter.conj() * prod[k].conj())
            + 0.5 * (v.conj() * prod[k].conj());
        pre.push(line1 + line2);
    }
    Ok(project_real(pre))
}

/// Plain (unconjugated) pairing integral of psi against H phi, and its
/// conjugate partner built from the conjugated fields and operator. For a
/// parity-time symmetric operator and phi equal to the transform of psi the
/// two halves agree; their mean is the energy.
pub fn energy_pairing(
    state: &FieldState,
    h: &BandedComplexMatrix,
    grid: &Grid,
) -> (Complex64, Complex64) {
    let h_phi = h.matvec(&state.phi);
    let first: Vec<C64> = state
        .psi
        .iter()
        .zip(&h_phi)
        .map(|(p, hp)| p * hp)
        .collect();
    let second: Vec<C64> = state
        .psi
        .iter()
        .zip(&h_phi)
        .map(|(p, hp)| p.conj() * hp.conj())
        .collect();
    (
        grid.integrate_complex(&first),
        grid.integrate_complex(&second),
    )
}

/// Total energy: the mean of the two pairing halves.
pub fn total_energy(state: &FieldState, h: &BandedComplexMatrix, grid: &Grid) -> Complex64 {
    let (a, b) = energy_pairing(state, h, grid);
    0.5 * (a + b)
}

/// Conventional conjugated expectation value integral(conj(psi) H psi) /
/// integral(conj(psi) psi); used by the Hermitian reduction cross-checks.
pub fn conjugated_expectation(
    psi: &[Complex64],
    h: &BandedComplexMatrix,
    grid: &Grid,
) -> Complex64 {
    let h_psi = h.matvec(psi);
    let num: Vec<C64> = psi.iter().zip(&h_psi).map(|(p, hp)| p.conj() * hp).collect();
    let den: Vec<C64> = psi.iter().map(|p| p.conj() * p).collect();
    grid.integrate_complex(&num) / grid.integrate_complex(&den)
}

/// Field time derivatives from the evolution equations:
/// psi_dot = H psi / (i hbar), phi_dot = -H phi / (i hbar).
pub fn field_time_derivatives(
    state: &FieldState,
    h: &BandedComplexMatrix,
    constants: &PhysicalConstants,
) -> (Vec<Complex64>, Vec<Complex64>) {
    let minus_i_over_hbar = C64::new(0.0, -1.0 / constants.hbar);
    let plus_i_over_hbar = C64::new(0.0, 1.0 / constants.hbar);
    let psi_dot = h
        .matvec(&state.psi)
        .into_iter()
        .map(|z| minus_i_over_hbar * z)
        .collect();
    let phi_dot = h
        .matvec(&state.phi)
        .into_iter()
        .map(|z| plus_i_over_hbar * z)
        .collect();
    (psi_dot, phi_dot)
}

/// The generalized Lagrangian density, both lines evaluated literally.
/// Its imaginary part vanishes identically; the complex value is returned
/// so cross-checks can observe the residue.
pub fn lagrangian_density(
    state: &FieldState,
    psi_dot: &[Complex64],
    phi_dot: &[Complex64],
    mu: &MuProfile,
    potential: &PotentialProfile,
    grid: &Grid,
    constants: &PhysicalConstants,
) -> Result<Vec<Complex64>> {
    let _ = phi_dot; // phi_dot does not appear: the pair carries no phi-dot term.
    let dpsi = grid.gradient(&state.psi);
    let dphi = grid.gradient(&state.phi);
    let prod: Vec<C64> = state
        .phi
        .iter()
        .zip(&state.psi)
        .map(|(f, p)| f * p)
        .collect();
    let dprod = grid.gradient(&prod);
    let dprod_conj = grid.gradient(&conj_all(&prod));
    let kin_scale = constants.hbar * constants.hbar / (4.0 * constants.mass);
    let i_half_hbar = C64::new(0.0, 0.5 * constants.hbar);
    let mut out = Vec::with_capacity(grid.len());
    for (k, &x) in grid.nodes().iter().enumerate() {
        let (m, dm, _) = mu.eval(x)?;
        let v = potential.eval(x, state.t, constants)?;
        let one_plus = C64::new(1.0, 0.0) + m;
        let c2 = one_plus * one_plus;
        let mix = 0.5 * (one_plus * dm);
        let quarter = 0.25 * (dm * dm);
        let line1 = i_half_hbar * (state.phi[k] * psi_dot[k])
            - kin_scale * (c2 * (dphi[k] * dpsi[k]) + mix * dprod[k] + quarter * prod[k])
            - 0.5 * (v * prod[k]);
        let line2 = -(i_half_hbar * (state.phi[k].conj() * psi_dot[k].conj()))
            - kin_scale
                * (c2.conj() * (dphi[k].conj() * dpsi[k].conj())
                    + mix.conj() * dprod_conj[k]
                    + quarter.conj() * prod[k].conj())
            - 0.5 * (v.conj() * prod[k].conj());
        out.push(line1 + line2);
    }
    Ok(out)
}

/// The four momentum densities conjugate to (psi, phi, psi*, phi*).
#[derive(Debug, Clone)]
pub struct CanonicalMomenta {
    pub pi_psi: Vec<Complex64>,
    pub pi_phi: Vec<Complex64>,
    pub pi_psi_star: Vec<Complex64>,
    pub pi_phi_star: Vec<Complex64>,
}

/// pi_psi = (i hbar / 2) phi, pi_phi = 0, pi_psi* = -(i hbar / 2) phi*,
/// pi_phi* = 0. The sign of pi_psi* is the one consistent with the
/// Lagrangian and Hamiltonian densities above (see
/// [`canonical_momenta_alt_sign`] for the variant it replaces).
pub fn canonical_momenta(state: &FieldState, constants: &PhysicalConstants) -> CanonicalMomenta {
    let i_half_hbar = C64::new(0.0, 0.5 * constants.hbar);
    let zero = vec![C64::new(0.0, 0.0); state.len()];
    CanonicalMomenta {
        pi_psi: state.phi.iter().map(|f| i_half_hbar * f).collect(),
        pi_phi: zero.clone(),
        pi_psi_star: state
            .phi
            .iter()
            .map(|f| -(i_half_hbar * f.conj()))
            .collect(),
        pi_phi_star: zero,
    }
}

/// Alternative sign convention pi_psi* = +(i hbar / 2) phi*. Kept solely so
/// the Legendre cross-check can demonstrate that this convention breaks the
/// identity sum(pi f_dot) - L = H by i hbar phi* psi_dot* pointwise.
pub fn canonical_momenta_alt_sign(
    state: &FieldState,
    constants: &PhysicalConstants,
) -> CanonicalMomenta {
    let mut momenta = canonical_momenta(state, constants);
    for z in &mut momenta.pi_psi_star {
        *z = -*z;
    }
    momenta
}

/// Legendre combination sum_sigma pi_sigma f_dot_sigma - L, pointwise.
pub fn legendre_density(
    state: &FieldState,
    momenta: &CanonicalMomenta,
    psi_dot: &[Complex64],
    phi_dot: &[Complex64],
    mu: &MuProfile,
    potential: &PotentialProfile,
    grid: &Grid,
    constants: &PhysicalConstants,
) -> Result<Vec<Complex64>> {
    let lag = lagrangian_density(state, psi_dot, phi_dot, mu, potential, grid, constants)?;
    let mut out = Vec::with_capacity(state.len());
    for k in 0..state.len() {
        let sum = momenta.pi_psi[k] * psi_dot[k]
            + momenta.pi_phi[k] * phi_dot[k]
            + momenta.pi_psi_star[k] * psi_dot[k].conj()
            + momenta.pi_phi_star[k] * phi_dot[k].conj();
        out.push(sum - lag[k]);
    }
    Ok(out)
}

/// Energy flux density with the conjugate line evaluated literally.
pub fn energy_flux(
    state: &FieldState,
    psi_dot: &[Complex64],
    phi_dot: &[Complex64],
    mu: &MuProfile,
    grid: &Grid,
    constants: &PhysicalConstants,
) -> Result<Vec<f64>> {
    Ok(energy_flux_with_residue(state, psi_dot, phi_dot, mu, grid, constants)?.0)
}

pub(crate) fn energy_flux_with_residue(
    state: &FieldState,
    psi_dot: &[Complex64],
    phi_dot: &[Complex64],
    mu: &MuProfile,
    grid: &Grid,
    constants: &PhysicalConstants,
) -> Result<(Vec<f64>, f64)> {
    let dpsi = grid.gradient(&state.psi);
    let dphi = grid.gradient(&state.phi);
    let scale = constants.hbar * constants.hbar / (4.0 * constants.mass);
    let mut pre = Vec::with_capacity(grid.len());
    for (k, &x) in grid.nodes().iter().enumerate() {
        let (m, dm, _) = mu.eval(x)?;
        let one_plus = C64::new(1.0, 0.0) + m;
        let c2 = one_plus * one_plus;
        let mix = 0.5 * (one_plus * dm);
        // d/dt (psi phi) from the field equations.
        let prod_dot = psi_dot[k] * state.phi[k] + state.psi[k] * phi_dot[k];
        let line1 = c2 * (psi_dot[k] * dphi[k] + phi_dot[k] * dpsi[k]) + mix * prod_dot;
        let line2 = c2.conj()
            * (psi_dot[k].conj() * dphi[k].conj() + phi_dot[k].conj() * dpsi[k].conj())
            + mix.conj() * prod_dot.conj();
        pre.push(-scale * (line1 + line2));
    }
    Ok(project_real(pre))
}

/// Momentum density -hbar Im(psi' phi), the real form of
/// (i hbar / 2)(psi' phi - conj(psi') conj(phi)).
pub fn momentum_density(
    state: &FieldState,
    grid: &Grid,
    constants: &PhysicalConstants,
) -> Vec<f64> {
    momentum_density_with_residue(state, grid, constants).0
}

pub(crate) fn momentum_density_with_residue(
    state: &FieldState,
    grid: &Grid,
    constants: &PhysicalConstants,
) -> (Vec<f64>, f64) {
    let dpsi = grid.gradient(&state.psi);
    let i_half_hbar = C64::new(0.0, 0.5 * constants.hbar);
    let pre: Vec<C64> = dpsi
        .iter()
        .zip(&state.phi)
        .map(|(dp, f)| {
            let z = dp * f;
            i_half_hbar * (z - z.conj())
        })
        .collect();
    project_real(pre)
}

/// All five densities at one time instant, with imaginary-residue bookkeeping.
#[derive(Debug, Clone)]
pub struct DensitySnapshot {
    pub t: f64,
    pub rho: Vec<f64>,
    pub current: Vec<f64>,
    pub hamiltonian: Vec<f64>,
    pub energy_flux: Vec<f64>,
    pub momentum: Vec<f64>,
    /// Largest |imaginary residue| discarded per density, in the order
    /// (rho, current, hamiltonian, energy_flux, momentum).
    pub imag_residues: [f64; 5],
}

impl DensitySnapshot {
    pub fn compute(
        state: &FieldState,
        mu: &MuProfile,
        potential: &PotentialProfile,
        h: &BandedComplexMatrix,
        grid: &Grid,
        constants: &PhysicalConstants,
    ) -> Result<DensitySnapshot> {
        let (psi_dot, phi_dot) = field_time_derivatives(state, h, constants);
        let (rho, r0) = probability_density_with_residue(state);
        let (current, r1) = current_density_with_residue(state, mu, grid, constants)?;
        let (ham, r2) = hamiltonian_density_with_residue(state, mu, potential, grid, constants)?;
        let (flux, r3) =
            energy_flux_with_residue(state, &psi_dot, &phi_dot, mu, grid, constants)?;
        let (mom, r4) = momentum_density_with_residue(state, grid, constants);
        Ok(DensitySnapshot {
            t: state.t,
            rho,
            current,
            hamiltonian: ham,
            energy_flux: flux,
            momentum: mom,
            imag_residues: [r0, r1, r2, r3, r4],
        })
    }

    pub fn min_rho(&self) -> f64 {
        self.rho.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max_imag_residue(&self) -> f64 {
        self.imag_residues.iter().copied().fold(0.0, f64::max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::{init_gaussian, PhiMode};
    use crate::operators::{assemble_hamiltonian, AssemblyForm};
    use rand::{Rng, SeedableRng};

    fn setup(l: f64, n: usize) -> (Grid, PhysicalConstants) {
        (Grid::new(l, n).unwrap(), PhysicalConstants::default())
    }

    /// Smooth random confined field: a few Gaussian bumps with phases.
    fn random_smooth(grid: &Grid, rng: &mut impl Rng) -> Vec<C64> {
        let l = grid.half_width();
        let bumps: Vec<(f64, f64, f64, f64)> = (0..4)
            .map(|_| {
                (
                    rng.gen_range(-0.4 * l..0.4 * l),
                    rng.gen_range(0.15 * l..0.3 * l),
                    rng.gen_range(-2.0..2.0),
                    rng.gen_range(-1.0..1.0),
                )
            })
            .collect();
        let mut f = grid.sample(|x| {
            let mut acc = C64::new(0.0, 0.0);
            for &(x0, w, k, a) in &bumps {
                let env = a * (-(x - x0) * (x - x0) / (2.0 * w * w)).exp();
                acc += C64::new(0.0, k * x).exp() * env;
            }
            acc
        });
        let n = f.len();
        f[0] = C64::new(0.0, 0.0);
        f[n - 1] = C64::new(0.0, 0.0);
        f
    }

    #[test]
    fn rho_of_conjugate_pair_is_twice_abs_square() {
        let (grid, _) = setup(8.0, 401);
        let (state, _) = init_gaussian(&grid, 0.5, 1.0, 1.0, PhiMode::Conjugate).unwrap();
        let rho = probability_density(&state);
        for (r, p) in rho.iter().zip(&state.psi) {
            assert_eq!(*r, 2.0 * p.norm_sqr());
        }
    }

    #[test]
    fn rho_pointwise_arithmetic() {
        let (_grid, _) = setup(2.0, 5);
        let mut psi = vec![C64::new(0.0, 0.0); 5];
        let mut phi = psi.clone();
        psi[2] = C64::new(1.0, 1.0);
        phi[2] = C64::new(1.0, -1.0);
        let state = FieldState::from_parts(0.0, psi, phi, PhiMode::Independent).unwrap();
        let rho = probability_density(&state);
        assert_eq!(rho[2], 4.0);
    }

    #[test]
    fn rho_of_plane_wave_pair_oscillates() {
        let (grid, _) = setup(10.0, 2001);
        let k0 = 1.0;
        let wave = grid.sample(|x| C64::new(0.0, k0 * x).exp());
        let state =
            FieldState::from_parts(0.0, wave.clone(), wave, PhiMode::Independent).unwrap();
        let rho = probability_density(&state);
        for k in 500..1500 {
            let x = grid.node(k);
            assert!((rho[k] - 2.0 * (2.0 * k0 * x).cos()).abs() < 1e-12);
        }
        // Not sign definite when phi differs from conj(psi).
        assert!(rho.iter().any(|&r| r < 0.0));
    }

    #[test]
    fn current_vanishes_bitwise_when_phi_equals_psi() {
        let (grid, c) = setup(6.0, 301);
        let mut rng = rand::rngs::StdRng::seed_from_u64(7);
        for mu in [
            MuProfile::Zero,
            MuProfile::QuadraticReal { gamma: 0.2 },
            MuProfile::LinearImag { lambda: 0.6 },
        ] {
            let f = random_smooth(&grid, &mut rng);
            let state =
                FieldState::from_parts(0.0, f.clone(), f, PhiMode::Independent).unwrap();
            let j = current_density(&state, &mu, &grid, &c).unwrap();
            assert!(j.iter().all(|&v| v == 0.0), "{}", mu.kind_name());
        }
    }

    #[test]
    fn current_of_plane_wave_matches_symbol() {
        let (grid, c) = setup(10.0, 2001);
        let k0 = 1.2;
        let wave = grid.sample(|x| C64::new(0.0, k0 * x).exp());
        let conj_wave = conj_all(&wave);
        let state = FieldState::from_parts(0.0, wave, conj_wave, PhiMode::Conjugate).unwrap();
        let j = current_density(&state, &MuProfile::Zero, &grid, &c).unwrap();
        let expect = 2.0 * c.hbar * k0 / c.mass * (k0 * grid.dx()).sin() / (k0 * grid.dx());
        for k in 500..1500 {
            assert!((j[k] - expect).abs() < 1e-10, "node {k}: {} vs {expect}", j[k]);
        }
        assert!((expect - 2.0 * c.hbar * k0 / c.mass).abs() < 1e-3);
    }

    #[test]
    fn current_of_real_gaussian_is_roundoff() {
        let (grid, c) = setup(10.0, 801);
        let (state, _) = init_gaussian(&grid, 0.0, 0.0, 1.2, PhiMode::Conjugate).unwrap();
        let j = current_density(&state, &MuProfile::Zero, &grid, &c).unwrap();
        assert!(crate::grid::max_abs_real(&j) < 1e-15);
    }

    #[test]
    fn hamiltonian_density_zero_field() {
        let (grid, c) = setup(4.0, 81);
        let zeros = vec![C64::new(0.0, 0.0); grid.len()];
        let state =
            FieldState::from_parts(0.0, zeros.clone(), zeros, PhiMode::Independent).unwrap();
        let h = hamiltonian_density(&state, &MuProfile::Zero, &PotentialProfile::Zero, &grid, &c)
            .unwrap();
        assert!(h.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn hamiltonian_density_reduces_to_gradient_square() {
        let (grid, c) = setup(8.0, 801);
        let (state, _) = init_gaussian(&grid, 0.3, 0.8, 1.0, PhiMode::Conjugate).unwrap();
        let h = hamiltonian_density(&state, &MuProfile::Zero, &PotentialProfile::Zero, &grid, &c)
            .unwrap();
        let dpsi = grid.gradient(&state.psi);
        for (k, val) in h.iter().enumerate() {
            let textbook = c.hbar * c.hbar / (2.0 * c.mass) * dpsi[k].norm_sqr();
            assert!((val - textbook).abs() <= 1e-13 * textbook.abs().max(1.0));
            assert!(*val >= 0.0);
        }
    }

    #[test]
    fn harmonic_ground_state_energy_from_density() {
        // Analytic oscillator ground state: E = 0.5 in code units.
        let (grid, c) = setup(10.0, 2001);
        let quarter = std::f64::consts::PI.powf(-0.25);
        let mut psi = grid.sample(|x| C64::new(quarter * (-0.5 * x * x).exp(), 0.0));
        let n = psi.len();
        psi[0] = C64::new(0.0, 0.0);
        psi[n - 1] = C64::new(0.0, 0.0);
        let phi = conj_all(&psi);
        let state = FieldState::from_parts(0.0, psi, phi, PhiMode::Conjugate).unwrap();
        let h = hamiltonian_density(
            &state,
            &MuProfile::Zero,
            &PotentialProfile::Harmonic { omega: 1.0 },
            &grid,
            &c,
        )
        .unwrap();
        let e = grid.integrate(&h);
        assert!((e - 0.5).abs() < 2e-3, "energy {e}");
    }

    #[test]
    fn total_energy_is_standard_expectation_for_hermitian_reduction() {
        let (grid, c) = setup(10.0, 1001);
        let (state, _) = init_gaussian(&grid, 0.4, 0.9, 1.0, PhiMode::Conjugate).unwrap();
        let h = assemble_hamiltonian(
            &grid,
            &MuProfile::Zero,
            &PotentialProfile::Harmonic { omega: 1.0 },
            &c,
            0.0,
            AssemblyForm::Divergence,
        )
        .unwrap();
        let e = total_energy(&state, &h, &grid);
        let expect = conjugated_expectation(&state.psi, &h, &grid);
        assert!(e.im.abs() <= 1e-10 * e.norm());
        assert!((e.re - expect.re).abs() <= 1e-8 * expect.re.abs());
        assert!(expect.im.abs() <= 1e-10 * expect.norm());
    }

    #[test]
    fn energy_pairing_halves_agree_for_pt_state() {
        let (grid, c) = setup(10.0, 1001);
        let (state, _) = init_gaussian(&grid, 0.0, 0.7, 1.0, PhiMode::PtOfPsi).unwrap();
        let h = assemble_hamiltonian(
            &grid,
            &MuProfile::LinearImag { lambda: 0.2 },
            &PotentialProfile::Zero,
            &c,
            0.0,
            AssemblyForm::Divergence,
        )
        .unwrap();
        let (a, b) = energy_pairing(&state, &h, &grid);
        let e = total_energy(&state, &h, &grid);
        assert!(
            (a - b).norm() <= 1e-12 * e.norm().max(1.0),
            "halves differ: {a} vs {b}"
        );
        assert!(e.im.abs() <= 1e-8 * e.norm());
        // The energy integral also matches the density integral at O(dx^2).
        let hdens = hamiltonian_density(
            &state,
            &MuProfile::LinearImag { lambda: 0.2 },
            &PotentialProfile::Zero,
            &grid,
            &c,
        )
        .unwrap();
        let from_density = grid.integrate(&hdens);
        assert!((from_density - e.re).abs() < 5e-4 * e.re.abs().max(1.0));
    }

    #[test]
    fn lagrangian_of_stationary_state_integrates_to_zero() {
        // Oscillator ground state at t = 0: psi_dot = -i E psi / hbar.
        let (grid, c) = setup(10.0, 2001);
        let quarter = std::f64::consts::PI.powf(-0.25);
        let mut psi = grid.sample(|x| C64::new(quarter * (-0.5 * x * x).exp(), 0.0));
        let n = psi.len();
        psi[0] = C64::new(0.0, 0.0);
        psi[n - 1] = C64::new(0.0, 0.0);
        let phi = conj_all(&psi);
        let state = FieldState::from_parts(0.0, psi, phi, PhiMode::Conjugate).unwrap();
        let h = assemble_hamiltonian(
            &grid,
            &MuProfile::Zero,
            &PotentialProfile::Harmonic { omega: 1.0 },
            &c,
            0.0,
            AssemblyForm::Divergence,
        )
        .unwrap();
        let (psi_dot, phi_dot) = field_time_derivatives(&state, &h, &c);
        let lag = lagrangian_density(
            &state,
            &psi_dot,
            &phi_dot,
            &MuProfile::Zero,
            &PotentialProfile::Harmonic { omega: 1.0 },
            &grid,
            &c,
        )
        .unwrap();
        let total = grid.integrate_complex(&lag);
        assert!(total.norm() < 2e-3, "integral of L = {total}");
    }

    #[test]
    fn canonical_momenta_values() {
        let (_grid, c) = setup(2.0, 5);
        let mut phi = vec![C64::new(0.0, 0.0); 5];
        phi[2] = C64::new(2.0, 0.0);
        let state =
            FieldState::from_parts(0.0, phi.clone(), phi, PhiMode::Independent).unwrap();
        let momenta = canonical_momenta(&state, &c);
        assert_eq!(momenta.pi_psi[2], C64::new(0.0, 1.0));
        assert!(momenta.pi_phi.iter().all(|z| z.norm() == 0.0));
        assert!(momenta.pi_phi_star.iter().all(|z| z.norm() == 0.0));
        assert_eq!(momenta.pi_psi_star[2], C64::new(0.0, -1.0));
    }

    #[test]
    fn legendre_identity_holds_with_corrected_sign_and_fails_with_alt() {
        let (grid, c) = setup(6.0, 301);
        let mu = MuProfile::LinearImag { lambda: 0.3 };
        let v = PotentialProfile::CubicImag { epsilon: 0.2 };
        let h =
            assemble_hamiltonian(&grid, &mu, &v, &c, 0.0, AssemblyForm::Divergence).unwrap();
        let mut rng = rand::rngs::StdRng::seed_from_u64(42);
        for _ in 0..5 {
            let psi = random_smooth(&grid, &mut rng);
            let phi = random_smooth(&grid, &mut rng);
            let state = FieldState::from_parts(0.0, psi, phi, PhiMode::Independent).unwrap();
            let (psi_dot, phi_dot) = field_time_derivatives(&state, &h, &c);
            let hdens =
                hamiltonian_density(&state, &mu, &v, &grid, &c).unwrap();
            let scale = crate::grid::max_abs_real(&hdens).max(1.0);

            let good = legendre_density(
                &state,
                &canonical_momenta(&state, &c),
                &psi_dot,
                &phi_dot,
                &mu,
                &v,
                &grid,
                &c,
            )
            .unwrap();
            let worst_good = hdens
                .iter()
                .zip(&good)
                .map(|(h, l)| (C64::new(*h, 0.0) - l).norm())
                .fold(0.0, f64::max);
            assert!(
                worst_good <= 1e-11 * scale,
                "corrected-sign defect {worst_good} vs scale {scale}"
            );

            let bad = legendre_density(
                &state,
                &canonical_momenta_alt_sign(&state, &c),
                &psi_dot,
                &phi_dot,
                &mu,
                &v,
                &grid,
                &c,
            )
            .unwrap();
            let worst_bad = hdens
                .iter()
                .zip(&bad)
                .map(|(h, l)| (C64::new(*h, 0.0) - l).norm())
                .fold(0.0, f64::max);
            // The defect is i hbar phi* psi_dot* pointwise.
            let expected_defect = state
                .phi
                .iter()
                .zip(&psi_dot)
                .map(|(f, pd)| (C64::new(0.0, c.hbar) * f.conj() * pd.conj()).norm())
                .fold(0.0, f64::max);
            assert!(worst_bad > 0.5 * expected_defect && expected_defect > 1e-3 * scale);
            let worst_pointwise = hdens
                .iter()
                .zip(&bad)
                .zip(state.phi.iter().zip(&psi_dot))
                .map(|((h, l), (f, pd))| {
                    let defect = C64::new(0.0, c.hbar) * f.conj() * pd.conj();
                    (C64::new(*h, 0.0) + defect - l).norm()
                })
                .fold(0.0, f64::max);
            assert!(
                worst_pointwise <= 1e-11 * scale.max(expected_defect),
                "alt-sign defect is not i hbar phi* psi_dot*: {worst_pointwise}"
            );
        }
    }

    #[test]
    fn energy_flux_zero_field_and_plane_wave() {
        let (grid, c) = setup(10.0, 2001);
        let zeros = vec![C64::new(0.0, 0.0); grid.len()];
        let state =
            FieldState::from_parts(0.0, zeros.clone(), zeros.clone(), PhiMode::Independent)
                .unwrap();
        let flux =
            energy_flux(&state, &zeros, &zeros, &MuProfile::Zero, &grid, &c).unwrap();
        assert!(flux.iter().all(|&v| v == 0.0));

        // psi = e^{i(kx - w t)}, phi = conj(psi): flux tends to hbar^2 w k / m.
        let k0 = 1.1;
        let omega = 0.5 * k0 * k0;
        let wave = grid.sample(|x| C64::new(0.0, k0 * x).exp());
        let state = FieldState::from_parts(
            0.0,
            wave.clone(),
            conj_all(&wave),
            PhiMode::Conjugate,
        )
        .unwrap();
        let psi_dot: Vec<C64> = state
            .psi
            .iter()
            .map(|z| C64::new(0.0, -omega) * z)
            .collect();
        let phi_dot: Vec<C64> = state
            .phi
            .iter()
            .map(|z| C64::new(0.0, omega) * z)
            .collect();
        let flux =
            energy_flux(&state, &psi_dot, &phi_dot, &MuProfile::Zero, &grid, &c).unwrap();
        let expect = c.hbar * c.hbar * omega * k0 / c.mass;
        for k in 500..1500 {
            assert!(
                (flux[k] - expect).abs() < 2e-4 * expect.abs(),
                "node {k}: {} vs {expect}",
                flux[k]
            );
        }
    }

    #[test]
    fn energy_flux_of_real_stationary_pair_vanishes() {
        let (grid, c) = setup(10.0, 1001);
        let quarter = std::f64::consts::PI.powf(-0.25);
        let mut psi = grid.sample(|x| C64::new(quarter * (-0.5 * x * x).exp(), 0.0));
        let n = psi.len();
        psi[0] = C64::new(0.0, 0.0);
        psi[n - 1] = C64::new(0.0, 0.0);
        let state =
            FieldState::from_parts(0.0, psi.clone(), psi, PhiMode::Independent).unwrap();
        let e0 = 0.5;
        let psi_dot: Vec<C64> = state
            .psi
            .iter()
            .map(|z| C64::new(0.0, -e0 / c.hbar) * z)
            .collect();
        let phi_dot: Vec<C64> = state
            .phi
            .iter()
            .map(|z| C64::new(0.0, e0 / c.hbar) * z)
            .collect();
        let flux = energy_flux(
            &state,
            &psi_dot,
            &phi_dot,
            &MuProfile::QuadraticReal { gamma: 0.1 },
            &grid,
            &c,
        )
        .unwrap();
        assert!(crate::grid::max_abs_real(&flux) < 1e-14);
    }

    #[test]
    fn momentum_density_of_real_fields_vanishes() {
        let (grid, c) = setup(5.0, 201);
        let f = grid.sample(|x| C64::new((-(x * x)).exp(), 0.0));
        let state = FieldState::from_parts(0.0, f.clone(), f, PhiMode::Independent).unwrap();
        let p = momentum_density(&state, &grid, &c);
        assert!(p.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn momentum_density_of_plane_wave_has_printed_sign() {
        let (grid, c) = setup(10.0, 2001);
        let k0 = 0.9;
        let wave = grid.sample(|x| C64::new(0.0, k0 * x).exp());
        let state = FieldState::from_parts(
            0.0,
            wave.clone(),
            conj_all(&wave),
            PhiMode::Conjugate,
        )
        .unwrap();
        let p = momentum_density(&state, &grid, &c);
        let expect = -c.hbar * k0 * (k0 * grid.dx()).sin() / (k0 * grid.dx());
        for k in 500..1500 {
            assert!((p[k] - expect).abs() < 1e-12);
        }
        assert!((expect + c.hbar * k0).abs() < 1e-3);
    }

    #[test]
    fn moving_packet_total_momentum_is_finite_and_real() {
        let (grid, c) = setup(10.0, 1001);
        let (state, _) = init_gaussian(&grid, 0.0, 1.5, 1.0, PhiMode::Conjugate).unwrap();
        let p = momentum_density(&state, &grid, &c);
        let total = grid.integrate(&p);
        assert!(total.is_finite());
        // For phi = conj(psi) the sign convention gives total -hbar k0.
        assert!((total + c.hbar * 1.5).abs() < 1e-2);
    }

    #[test]
    fn snapshot_residues_are_negligible() {
        let (grid, c) = setup(8.0, 401);
        let mu = MuProfile::LinearImag { lambda: 0.25 };
        let v = PotentialProfile::Harmonic { omega: 1.0 };
        let h = assemble_hamiltonian(&grid, &mu, &v, &c, 0.0, AssemblyForm::Divergence).unwrap();
        let (state, _) = init_gaussian(&grid, 0.0, 0.6, 0.8, PhiMode::PtOfPsi).unwrap();
        let snap = DensitySnapshot::compute(&state, &mu, &v, &h, &grid, &c).unwrap();
        assert!(snap.max_imag_residue() == 0.0);
        assert!(snap.min_rho().is_finite());
    }
}
