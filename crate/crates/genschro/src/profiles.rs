//! Analytic families for the auxiliary function mu(x) and the potential
//! V(x, t), plus a tabulated kind loaded from plain-text files.
//!
//! Built-in kinds satisfy f(x) = conj(f(-x)) identically; the table kind is
//! whatever the file says and is how non-symmetric inputs enter the crate.

use std::fmt;
use std::path::{Path, PathBuf};

use num_complex::Complex64;

use crate::constants::PhysicalConstants;
use crate::error::{Error, Result};

/// Auxiliary function mu with exact first and second derivatives.
#[derive(Debug, Clone, PartialEq)]
pub enum MuProfile {
    /// mu = 0: plain Schrödinger kinetics.
    Zero,
    /// mu = gamma x^2, real and even.
    QuadraticReal { gamma: f64 },
    /// mu = i lambda x, imaginary and odd.
    LinearImag { lambda: f64 },
    /// Values from a file; derivatives by fourth-order differences.
    Table(ProfileTable),
}

impl MuProfile {
    /// (mu, mu', mu'') at a point.
    pub fn eval(&self, x: f64) -> Result<(Complex64, Complex64, Complex64)> {
        let zero = Complex64::new(0.0, 0.0);
        match self {
            MuProfile::Zero => Ok((zero, zero, zero)),
            MuProfile::QuadraticReal { gamma } => Ok((
                Complex64::new(gamma * (x * x), 0.0),
                Complex64::new(2.0 * gamma * x, 0.0),
                Complex64::new(2.0 * gamma, 0.0),
            )),
            MuProfile::LinearImag { lambda } => Ok((
                Complex64::new(0.0, lambda * x),
                Complex64::new(0.0, *lambda),
                zero,
            )),
            MuProfile::Table(t) => Ok((t.value(x)?, t.deriv1(x)?, t.deriv2(x)?)),
        }
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            MuProfile::Zero => "zero",
            MuProfile::QuadraticReal { .. } => "quadratic_real",
            MuProfile::LinearImag { .. } => "linear_imag",
            MuProfile::Table(_) => "table",
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, MuProfile::Zero)
    }
}

/// Interaction potential V(x, t). All built-in kinds are static.
#[derive(Debug, Clone, PartialEq)]
pub enum PotentialProfile {
    Zero,
    /// V = m omega^2 x^2 / 2.
    Harmonic { omega: f64 },
    /// V = i epsilon x^3.
    CubicImag { epsilon: f64 },
    Table(ProfileTable),
}

impl PotentialProfile {
    pub fn eval(&self, x: f64, _t: f64, constants: &PhysicalConstants) -> Result<Complex64> {
        match self {
            PotentialProfile::Zero => Ok(Complex64::new(0.0, 0.0)),
            PotentialProfile::Harmonic { omega } => {
                let wx = omega * x;
                Ok(Complex64::new(0.5 * constants.mass * (wx * wx), 0.0))
            }
            PotentialProfile::CubicImag { epsilon } => {
                Ok(Complex64::new(0.0, epsilon * (x * x * x)))
            }
            PotentialProfile::Table(t) => t.value(x),
        }
    }

    /// Built-ins are static; a time series hook would flip this.
    pub fn is_time_dependent(&self) -> bool {
        false
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            PotentialProfile::Zero => "zero",
            PotentialProfile::Harmonic { .. } => "harmonic",
            PotentialProfile::CubicImag { .. } => "cubic_imag",
            PotentialProfile::Table(_) => "table",
        }
    }
}

/// Uniformly spaced complex samples with precomputed fourth-order
/// finite-difference derivative tables.
#[derive(Clone, PartialEq)]
pub struct ProfileTable {
    path: PathBuf,
    x0: f64,
    h: f64,
    values: Vec<Complex64>,
    d1: Vec<Complex64>,
    d2: Vec<Complex64>,
}

impl fmt::Debug for ProfileTable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ProfileTable")
            .field("path", &self.path)
            .field("points", &self.values.len())
            .field("x0", &self.x0)
            .field("h", &self.h)
            .finish()
    }
}

impl ProfileTable {
    /// Load `x re [im]` rows. x must be uniform and strictly increasing;
    /// at least six rows are needed for the derivative stencils.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            Error::config(format!("cannot read table file `{}`: {e}", path.display()))
        })?;
        Self::parse(&text, path)
    }

    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        let fail = |line: usize, msg: String| Error::TableFormat {
            path: path.display().to_string(),
            line,
            msg,
        };
        let mut xs = Vec::new();
        let mut values = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let cols: Vec<&str> = line.split_whitespace().collect();
            if cols.len() != 2 && cols.len() != 3 {
                return Err(fail(i + 1, format!("expected 2 or 3 columns, got {}", cols.len())));
            }
            let mut nums = [0.0_f64; 3];
            for (j, c) in cols.iter().enumerate() {
                nums[j] = c
                    .parse()
                    .map_err(|_| fail(i + 1, format!("cannot parse `{c}` as a number")))?;
            }
            xs.push(nums[0]);
            values.push(Complex64::new(nums[1], if cols.len() == 3 { nums[2] } else { 0.0 }));
        }
        if xs.len() < 6 {
            return Err(fail(0, format!("need at least 6 rows, got {}", xs.len())));
        }
        let h = xs[1] - xs[0];
        if !(h > 0.0) {
            return Err(fail(2, "x column must be strictly increasing".into()));
        }
        for (i, w) in xs.windows(2).enumerate() {
            let step = w[1] - w[0];
            if !(step > 0.0) {
                return Err(fail(i + 2, "x column must be strictly increasing".into()));
            }
            if ((step - h) / h).abs() > 1e-8 {
                return Err(fail(
                    i + 2,
                    format!("x spacing {step} deviates from uniform spacing {h}"),
                ));
            }
        }
        let d1 = fd4_first(&values, h);
        let d2 = fd4_second(&values, h);
        Ok(ProfileTable {
            path: path.to_path_buf(),
            x0: xs[0],
            h,
            values,
            d1,
            d2,
        })
    }

    pub fn x_min(&self) -> f64 {
        self.x0
    }

    pub fn x_max(&self) -> f64 {
        self.x0 + self.h * (self.values.len() - 1) as f64
    }

    fn check_range(&self, x: f64) -> Result<()> {
        let slack = 1e-12 * self.h.max(1.0);
        if x < self.x_min() - slack || x > self.x_max() + slack {
            return Err(Error::TableRange {
                x,
                min: self.x_min(),
                max: self.x_max(),
            });
        }
        Ok(())
    }

    pub fn value(&self, x: f64) -> Result<Complex64> {
        self.check_range(x)?;
        Ok(interp_cubic(&self.values, self.x0, self.h, x))
    }

    pub fn deriv1(&self, x: f64) -> Result<Complex64> {
        self.check_range(x)?;
        Ok(interp_cubic(&self.d1, self.x0, self.h, x))
    }

    pub fn deriv2(&self, x: f64) -> Result<Complex64> {
        self.check_range(x)?;
        Ok(interp_cubic(&self.d2, self.x0, self.h, x))
    }
}

/// Fourth-order first derivative on the table lattice.
fn fd4_first(v: &[Complex64], h: f64) -> Vec<Complex64> {
    let n = v.len();
    let inv = 1.0 / (12.0 * h);
    let mut out = vec![Complex64::new(0.0, 0.0); n];
    out[0] = (-25.0 * v[0] + 48.0 * v[1] - 36.0 * v[2] + 16.0 * v[3] - 3.0 * v[4]) * inv;
    out[1] = (-3.0 * v[0] - 10.0 * v[1] + 18.0 * v[2] - 6.0 * v[3] + v[4]) * inv;
    for k in 2..n - 2 {
        out[k] = (v[k - 2] - 8.0 * v[k - 1] + 8.0 * v[k + 1] - v[k + 2]) * inv;
    }
    out[n - 2] = (3.0 * v[n - 1] + 10.0 * v[n - 2] - 18.0 * v[n - 3] + 6.0 * v[n - 4]
        - v[n - 5])
        * inv;
    out[n - 1] = (25.0 * v[n - 1] - 48.0 * v[n - 2] + 36.0 * v[n - 3] - 16.0 * v[n - 4]
        + 3.0 * v[n - 5])
        * inv;
    out
}

/// Fourth-order second derivative on the table lattice.
fn fd4_second(v: &[Complex64], h: f64) -> Vec<Complex64> {
    let n = v.len();
    let inv = 1.0 / (12.0 * h * h);
    let mut out = vec![Complex64::new(0.0, 0.0); n];
    out[0] = (45.0 * v[0] - 154.0 * v[1] + 214.0 * v[2] - 156.0 * v[3] + 61.0 * v[4]
        - 10.0 * v[5])
        * inv;
    out[1] = (10.0 * v[0] - 15.0 * v[1] - 4.0 * v[2] + 14.0 * v[3] - 6.0 * v[4] + v[5]) * inv;
    for k in 2..n - 2 {
        out[k] =
            (-v[k - 2] + 16.0 * v[k - 1] - 30.0 * v[k] + 16.0 * v[k + 1] - v[k + 2]) * inv;
    }
    out[n - 2] = (10.0 * v[n - 1] - 15.0 * v[n - 2] - 4.0 * v[n - 3] + 14.0 * v[n - 4]
        - 6.0 * v[n - 5]
        + v[n - 6])
        * inv;
    out[n - 1] = (45.0 * v[n - 1] - 154.0 * v[n - 2] + 214.0 * v[n - 3] - 156.0 * v[n - 4]
        + 61.0 * v[n - 5]
        - 10.0 * v[n - 6])
        * inv;
    out
}

/// Four-point Lagrange interpolation on a uniform lattice.
fn interp_cubic(v: &[Complex64], x0: f64, h: f64, x: f64) -> Complex64 {
    let n = v.len();
    let raw = (x - x0) / h;
    // Window [i-1, i, i+1, i+2] clamped to the table.
    let i = (raw.floor() as isize).clamp(1, n as isize - 3) as usize;
    let t = raw - i as f64;
    let tm = t + 1.0;
    let tp = t - 1.0;
    let tq = t - 2.0;
    let w0 = -t * tp * tq / 6.0;
    let w1 = tm * tp * tq / 2.0;
    let w2 = -tm * t * tq / 2.0;
    let w3 = tm * t * tp / 6.0;
    w0 * v[i - 1] + w1 * v[i] + w2 * v[i + 1] + w3 * v[i + 2]
}
