use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Grid, MC2};

/// Smoothed rectangular barrier
/// `V(x) = V0/2 [tanh((x + L/2)/eps) - tanh((x - L/2)/eps)]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BarrierSpec {
    pub height: f64,
    pub width: f64,
    pub smoothness: f64,
}

impl BarrierSpec {
    pub fn none() -> Self {
        Self {
            height: 0.0,
            width: 1.0,
            smoothness: 1.0,
        }
    }

    pub fn potential(&self, x: f64) -> f64 {
        let half = self.width / 2.0;
        // tanh is odd, so this form is exactly even in x
        0.5 * self.height
            * (((x + half) / self.smoothness).tanh() - ((x - half) / self.smoothness).tanh())
    }

    pub fn sample(&self, grid: &Grid) -> Vec<f64> {
        grid.positions().map(|x| self.potential(x)).collect()
    }

    pub fn validate(&self, grid: &Grid) -> Result<()> {
        if !(self.width > 0.0) || !(self.smoothness > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "barrier width and smoothness must be positive (L = {}, eps = {})",
                self.width, self.smoothness
            )));
        }
        if self.height != 0.0 && self.smoothness < 2.0 * grid.dx() * (1.0 - 1e-9) {
            return Err(Error::InvalidParameter(format!(
                "barrier smoothness {:.4e} not resolved by dx = {:.4e} (need eps >= 2 dx)",
                self.smoothness,
                grid.dx()
            )));
        }
        Ok(())
    }

    /// `V0 > 2 m c^2`.
    pub fn is_supercritical(&self) -> bool {
        self.height > 2.0 * MC2
    }

    /// Klein regime for a packet of mean energy `energy`: supercritical and
    /// `(E - V0)^2 > m^2 c^4`.
    pub fn is_klein_regime(&self, energy: f64) -> bool {
        self.is_supercritical() && (energy - self.height).powi(2) > MC2 * MC2
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::COMPTON;
    use approx::assert_relative_eq;

    fn spec() -> BarrierSpec {
        BarrierSpec {
            height: 1.0,
            width: 4.0 * COMPTON,
            smoothness: 0.3 * COMPTON,
        }
    }

    #[test]
    fn plateau_value() {
        let b = spec();
        assert_relative_eq!(b.potential(0.0), (4.0f64 / 0.6).tanh(), max_relative = 1e-15);
        assert_relative_eq!(b.potential(0.0), 0.9999967, max_relative = 1e-7);
    }

    #[test]
    fn edge_value() {
        let b = spec();
        let edge = b.potential(b.width / 2.0);
        assert_relative_eq!(edge, 0.5 * (4.0f64 / 0.3).tanh(), max_relative = 1e-14);
        assert_relative_eq!(edge, 0.5, max_relative = 1e-10);
        assert_relative_eq!(b.potential(-b.width / 2.0), edge);
    }

    #[test]
    fn vanishes_far_away() {
        let b = spec();
        assert!(b.potential(1.0).abs() < 1e-300);
        assert!(b.potential(-1.0).abs() < 1e-300);
    }

    #[test]
    fn classification() {
        let sub = BarrierSpec { height: 1.77 * MC2, ..spec() };
        assert!(!sub.is_supercritical());
        let sup = BarrierSpec { height: 9.0 * MC2, ..spec() };
        assert!(sup.is_supercritical());
        let e = crate::basis::energy(450.0);
        assert!(sup.is_klein_regime(e));
        assert!(!sup.is_klein_regime(sup.height));
    }

    #[test]
    fn resolution_check() {
        let g = Grid::new(64, -1.0, 1.0).unwrap();
        assert!(spec().validate(&g).is_err());
        let fine = Grid::new(4096, -0.1, 0.1).unwrap();
        assert!(spec().validate(&fine).is_ok());
    }

    proptest::proptest! {
        #[test]
        fn even_and_monotone(x in 0.0f64..0.2, h in 0.01f64..2e5, l in 1e-3f64..0.2, eps in 1e-4f64..0.05) {
            let b = BarrierSpec { height: h, width: l, smoothness: eps };
            proptest::prop_assert_eq!(b.potential(x), b.potential(-x));
            let step = 1e-4;
            if x > 0.0 {
                proptest::prop_assert!(b.potential(x + step) <= b.potential(x) + 1e-12 * h);
            }
        }
    }
}
