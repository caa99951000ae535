use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grid::Grid;

/// Two-component Dirac spinor sampled on the position grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SpinorField {
    pub upper: Vec<Complex64>,
    pub lower: Vec<Complex64>,
}

impl SpinorField {
    pub fn zeros(n: usize) -> Self {
        Self {
            upper: vec![Complex64::default(); n],
            lower: vec![Complex64::default(); n],
        }
    }

    pub fn new(upper: Vec<Complex64>, lower: Vec<Complex64>) -> Result<Self> {
        if upper.len() != lower.len() {
            return Err(Error::LengthMismatch {
                expected: upper.len(),
                got: lower.len(),
            });
        }
        Ok(Self { upper, lower })
    }

    pub fn len(&self) -> usize {
        self.upper.len()
    }

    pub fn is_empty(&self) -> bool {
        self.upper.is_empty()
    }

    pub fn check_grid(&self, grid: &Grid) -> Result<()> {
        if self.len() != grid.len() {
            return Err(Error::LengthMismatch {
                expected: grid.len(),
                got: self.len(),
            });
        }
        Ok(())
    }

    /// Pointwise `psi^dagger psi`.
    pub fn density(&self) -> Vec<f64> {
        self.upper
            .iter()
            .zip(&self.lower)
            .map(|(a, b)| a.norm_sqr() + b.norm_sqr())
            .collect()
    }

    pub fn norm_sqr(&self, grid: &Grid) -> f64 {
        grid.norm_sqr(&self.upper) + grid.norm_sqr(&self.lower)
    }

    pub fn inner(&self, other: &Self, grid: &Grid) -> Complex64 {
        grid.inner(&self.upper, &other.upper) + grid.inner(&self.lower, &other.lower)
    }

    pub fn scale(&mut self, factor: f64) {
        self.upper.iter_mut().for_each(|v| *v *= factor);
        self.lower.iter_mut().for_each(|v| *v *= factor);
    }

    /// Largest pointwise deviation `max_j |a_j - b_j|` over both components.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.upper
            .iter()
            .zip(&other.upper)
            .chain(self.lower.iter().zip(&other.lower))
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    /// Largest density over the outermost `width` points at each end of the box.
    pub fn edge_density(&self, width: usize) -> f64 {
        let rho = self.density();
        let n = rho.len();
        let w = width.min(n / 2);
        rho[..w]
            .iter()
            .chain(&rho[n - w..])
            .copied()
            .fold(0.0, f64::max)
    }
}

/// Number of points on each side of the box watched by the edge monitor.
pub fn edge_band(n: usize) -> usize {
    (n / 64).max(2)
}
