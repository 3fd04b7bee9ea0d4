//! Symmetric 1D lattice, quadrature and parity utilities.
//!
//! The node count is forced odd so that x = 0 is a node and the reflection
//! k -> N-1-k maps every node onto the exact negation of its partner. All
//! parity checks in the crate rely on that index map being exact, so the
//! node array is built by mirroring the left half instead of accumulating
//! -L + k*dx across the whole interval.

use num_complex::Complex64;

use crate::constants::PhysicalConstants;
use crate::error::{Error, Result};

/// Uniform symmetric lattice on [-half_width, half_width].
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    half_width: f64,
    dx: f64,
    nodes: Vec<f64>,
}

impl Grid {
    /// Build a grid with an odd number of points (>= 5) on [-L, L].
    pub fn new(half_width: f64, points: usize) -> Result<Self> {
        if !(half_width > 0.0) || !half_width.is_finite() {
            return Err(Error::config(format!(
                "grid half_width must be positive and finite, got {half_width}"
            )));
        }
        if points < 5 {
            return Err(Error::config(format!(
                "grid needs at least 5 points, got {points}"
            )));
        }
        if points % 2 == 0 {
            return Err(Error::config(format!(
                "grid point count must be odd so x = 0 is a node, got {points}"
            )));
        }
        let dx = 2.0 * half_width / (points - 1) as f64;
        let half = (points - 1) / 2;
        let mut nodes = vec![0.0; points];
        for k in 0..half {
            let x = if k == 0 {
                -half_width
            } else {
                -half_width + k as f64 * dx
            };
            nodes[k] = x;
            nodes[points - 1 - k] = -x;
        }
        nodes[half] = 0.0;
        if nodes.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::config(
                "grid nodes are not strictly increasing; half_width/points combination degenerates in f64",
            ));
        }
        Ok(Grid {
            half_width,
            dx,
            nodes,
        })
    }

    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    pub fn dx(&self) -> f64 {
        self.dx
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn node(&self, k: usize) -> f64 {
        self.nodes[k]
    }

    /// Midpoint between nodes k and k+1. Mirrored interfaces negate exactly.
    pub fn half_node(&self, k: usize) -> f64 {
        0.5 * (self.nodes[k] + self.nodes[k + 1])
    }

    /// Grid with the same half-width and (points-1)/factor + 1 nodes.
    ///
    /// `points - 1` must be divisible by `factor`; used by refinement studies.
    pub fn coarsen(&self, factor: usize) -> Result<Grid> {
        let n = self.len();
        if factor == 0 || (n - 1) % factor != 0 {
            return Err(Error::config(format!(
                "cannot coarsen a {n}-point grid by factor {factor}"
            )));
        }
        Grid::new(self.half_width, (n - 1) / factor + 1)
    }

    /// Composite trapezoidal quadrature of real samples.
    pub fn integrate(&self, values: &[f64]) -> f64 {
        assert_eq!(values.len(), self.len(), "sample count must match grid");
        let n = values.len();
        let mut sum = 0.5 * (values[0] + values[n - 1]);
        for v in &values[1..n - 1] {
            sum += v;
        }
        self.dx * sum
    }

    /// Composite trapezoidal quadrature of complex samples.
    pub fn integrate_complex(&self, values: &[Complex64]) -> Complex64 {
        assert_eq!(values.len(), self.len(), "sample count must match grid");
        let n = values.len();
        let mut sum = 0.5 * (values[0] + values[n - 1]);
        for v in &values[1..n - 1] {
            sum += v;
        }
        self.dx * sum
    }

    /// First derivative on nodes: central stencil inside, one-sided
    /// second-order stencils at the two end nodes.
    pub fn gradient(&self, values: &[Complex64]) -> Vec<Complex64> {
        assert_eq!(values.len(), self.len(), "sample count must match grid");
        let n = values.len();
        let inv2 = 0.5 / self.dx;
        let mut out = vec![Complex64::new(0.0, 0.0); n];
        out[0] = (-3.0 * values[0] + 4.0 * values[1] - values[2]) * inv2;
        for k in 1..n - 1 {
            out[k] = (values[k + 1] - values[k - 1]) * inv2;
        }
        out[n - 1] = (3.0 * values[n - 1] - 4.0 * values[n - 2] + values[n - 3]) * inv2;
        out
    }

    /// Max deviation from the parity-time condition f(x) = conj(f(-x)),
    /// evaluated through the exact index reflection.
    pub fn check_pt_symmetry(&self, samples: &[Complex64]) -> f64 {
        assert_eq!(samples.len(), self.len(), "sample count must match grid");
        let n = samples.len();
        let mut worst = 0.0_f64;
        for k in 0..n {
            let defect = (samples[k] - samples[n - 1 - k].conj()).norm();
            worst = worst.max(defect);
        }
        worst
    }

    /// Sample a scalar function on all nodes.
    pub fn sample<F: FnMut(f64) -> Complex64>(&self, mut f: F) -> Vec<Complex64> {
        self.nodes.iter().map(|&x| f(x)).collect()
    }
}

/// Sanity bound used by tests: relative scale of a sample set.
pub fn max_abs(values: &[Complex64]) -> f64 {
    values.iter().map(|v| v.norm()).fold(0.0, f64::max)
}

/// Max |v| over a real array.
pub fn max_abs_real(values: &[f64]) -> f64 {
    values.iter().map(|v| v.abs()).fold(0.0, f64::max)
}

pub use crate::constants::default_constants;

/// Convenience: grid plus constants commonly travel together in tests.
pub fn unit_setup(half_width: f64, points: usize) -> Result<(Grid, PhysicalConstants)> {
    Ok((Grid::new(half_width, points)?, default_constants()))
}
