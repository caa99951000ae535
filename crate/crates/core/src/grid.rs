//! Periodic position box and its conjugate momentum lattice.
//!
//! Positions are `x_j = x_min + j dx` for `j = 0..n`. Momentum modes are
//! stored in ascending order, `p_m = (m - n/2) dp` for `m = 0..n`, so mode
//! `0` is the single Nyquist mode `-n/2 dp` and mode `n/2` is `p = 0`.
//!
//! Transform convention (continuum Fourier normalization):
//!
//! ```text
//! f~(p_m) = dx / sqrt(2 pi) * sum_j f(x_j) exp(-i p_m x_j)
//! f(x_j)  = dp / sqrt(2 pi) * sum_m f~(p_m) exp(+i p_m x_j)
//! ```
//!
//! With `dx dp n = 2 pi` the pair is exactly inverse and Parseval reads
//! `sum |f|^2 dx = sum |f~|^2 dp`.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

/// Speed of light in atomic units.
pub const C: f64 = 137.036;
/// Electron rest energy `m c^2` in atomic units (m = 1).
pub const MC2: f64 = C * C;
/// Reduced Compton wavelength `hbar / (m c)` in atomic units.
pub const COMPTON: f64 = 1.0 / C;

#[derive(Clone)]
pub struct Grid {
    n: usize,
    x_min: f64,
    x_max: f64,
    dx: f64,
    dp: f64,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    // exp(-i p_m x_min), indexed by mode
    origin_phase: Vec<Complex64>,
}

impl fmt::Debug for Grid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Grid")
            .field("n", &self.n)
            .field("x_min", &self.x_min)
            .field("x_max", &self.x_max)
            .field("dx", &self.dx)
            .field("dp", &self.dp)
            .finish()
    }
}

impl PartialEq for Grid {
    fn eq(&self, other: &Self) -> bool {
        self.n == other.n && self.x_min == other.x_min && self.x_max == other.x_max
    }
}

impl Grid {
    pub fn new(n: usize, x_min: f64, x_max: f64) -> Result<Self> {
        if n < 8 || !n.is_power_of_two() {
            return Err(Error::GridSize(n));
        }
        if !(x_max > x_min) || !x_min.is_finite() || !x_max.is_finite() {
            return Err(Error::DegenerateBox { x_min, x_max });
        }
        let length = x_max - x_min;
        let dx = length / n as f64;
        let dp = 2.0 * PI / length;
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(n);
        let inverse = planner.plan_fft_inverse(n);
        let origin_phase = (0..n)
            .map(|m| Complex64::from_polar(1.0, -(m as f64 - (n / 2) as f64) * dp * x_min))
            .collect();
        Ok(Self {
            n,
            x_min,
            x_max,
            dx,
            dp,
            forward,
            inverse,
            origin_phase,
        })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn x_min(&self) -> f64 {
        self.x_min
    }

    pub fn x_max(&self) -> f64 {
        self.x_max
    }

    pub fn length(&self) -> f64 {
        self.x_max - self.x_min
    }

    pub fn dx(&self) -> f64 {
        self.dx
    }

    pub fn dp(&self) -> f64 {
        self.dp
    }

    pub fn x(&self, j: usize) -> f64 {
        self.x_min + j as f64 * self.dx
    }

    pub fn positions(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.n).map(move |j| self.x(j))
    }

    /// Momentum of mode `m` (ascending order).
    pub fn p(&self, m: usize) -> f64 {
        (m as f64 - (self.n / 2) as f64) * self.dp
    }

    pub fn momenta(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.n).map(move |m| self.p(m))
    }

    pub fn nyquist_mode(&self) -> usize {
        0
    }

    pub fn zero_mode(&self) -> usize {
        self.n / 2
    }

    pub fn p_max(&self) -> f64 {
        self.dp * (self.n / 2) as f64
    }

    /// Mode index of `-p_m`; the Nyquist and zero modes map to themselves.
    pub fn mirror_mode(&self, m: usize) -> usize {
        (self.n - m) % self.n
    }

    /// Grid index of `-x_j`, valid when the box is symmetric about zero.
    pub fn mirror_point(&self, j: usize) -> usize {
        (self.n - j) % self.n
    }

    pub fn is_symmetric(&self) -> bool {
        (self.x_min + self.x_max).abs() <= 1e-12 * self.length()
    }

    /// Mode index for raw FFT bin `k`.
    pub(crate) fn mode_of_bin(&self, k: usize) -> usize {
        (k + self.n / 2) % self.n
    }

    pub(crate) fn bin_of_mode(&self, m: usize) -> usize {
        (m + self.n / 2) % self.n
    }

    pub(crate) fn fft_forward(&self, buf: &mut [Complex64]) {
        self.forward.process(buf);
    }

    pub(crate) fn fft_inverse(&self, buf: &mut [Complex64]) {
        self.inverse.process(buf);
    }

    fn check_len(&self, len: usize) -> Result<()> {
        if len != self.n {
            return Err(Error::LengthMismatch {
                expected: self.n,
                got: len,
            });
        }
        Ok(())
    }

    /// Position samples to mode coefficients (ascending mode order).
    pub fn to_momentum(&self, field: &[Complex64]) -> Result<Vec<Complex64>> {
        self.check_len(field.len())?;
        let mut buf = field.to_vec();
        self.fft_forward(&mut buf);
        let scale = self.dx / (2.0 * PI).sqrt();
        let mut out = vec![Complex64::default(); self.n];
        for (k, v) in buf.into_iter().enumerate() {
            let m = self.mode_of_bin(k);
            out[m] = v * self.origin_phase[m] * scale;
        }
        Ok(out)
    }

    /// Mode coefficients (ascending mode order) to position samples.
    pub fn to_position(&self, coeffs: &[Complex64]) -> Result<Vec<Complex64>> {
        self.check_len(coeffs.len())?;
        let mut buf = vec![Complex64::default(); self.n];
        for (m, c) in coeffs.iter().enumerate() {
            buf[self.bin_of_mode(m)] = c * self.origin_phase[m].conj();
        }
        self.fft_inverse(&mut buf);
        let scale = self.dp / (2.0 * PI).sqrt();
        buf.iter_mut().for_each(|v| *v *= scale);
        Ok(buf)
    }

    /// `sum_j |f_j|^2 dx`.
    pub fn norm_sqr(&self, field: &[Complex64]) -> f64 {
        field.iter().map(|v| v.norm_sqr()).sum::<f64>() * self.dx
    }

    /// `sum_j conj(a_j) b_j dx`.
    pub fn inner(&self, a: &[Complex64], b: &[Complex64]) -> Complex64 {
        a.iter().zip(b).map(|(x, y)| x.conj() * y).sum::<Complex64>() * self.dx
    }

    /// Riemann sum of a real density, `sum_j rho_j dx`.
    pub fn integrate(&self, density: &[f64]) -> f64 {
        density.iter().sum::<f64>() * self.dx
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_field(n: usize, seed: u64) -> Vec<Complex64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
            .collect()
    }

    #[test]
    fn small_grid_spacings() {
        let g = Grid::new(8, -PI, PI).unwrap();
        assert_relative_eq!(g.dx(), PI / 4.0, epsilon = 1e-15);
        assert_relative_eq!(g.dp(), 1.0, epsilon = 1e-15);
        let modes: Vec<f64> = g.momenta().collect();
        assert_eq!(modes, vec![-4.0, -3.0, -2.0, -1.0, 0.0, 1.0, 2.0, 3.0]);
        assert_relative_eq!(g.dx() * g.dp() * 8.0, 2.0 * PI, epsilon = 1e-14);
    }

    #[test]
    fn momentum_spacing_from_box() {
        let g = Grid::new(1024, -2.0, 2.0).unwrap();
        assert_relative_eq!(g.dp(), PI / 2.0, epsilon = 1e-15);
    }

    #[test]
    fn rejects_bad_sizes() {
        assert!(matches!(Grid::new(12, -1.0, 1.0), Err(Error::GridSize(12))));
        assert!(matches!(Grid::new(4, -1.0, 1.0), Err(Error::GridSize(4))));
        assert!(matches!(
            Grid::new(16, 1.0, 1.0),
            Err(Error::DegenerateBox { .. })
        ));
    }

    #[test]
    fn modes_symmetric_up_to_nyquist() {
        let g = Grid::new(64, -3.0, 5.0).unwrap();
        for m in 1..64 {
            assert_relative_eq!(g.p(m), -g.p(g.mirror_mode(m)), epsilon = 1e-12);
        }
        assert_eq!(g.mirror_mode(0), 0);
        assert_relative_eq!(g.p(0), -g.p_max());
    }

    #[test]
    fn plane_wave_maps_to_single_mode() {
        let g = Grid::new(32, -1.3, 2.1).unwrap();
        let m0 = 21;
        let p = g.p(m0);
        let f: Vec<Complex64> = g
            .positions()
            .map(|x| Complex64::from_polar(1.0, p * x))
            .collect();
        let c = g.to_momentum(&f).unwrap();
        for (m, v) in c.iter().enumerate() {
            if m == m0 {
                assert_relative_eq!(v.norm(), g.length() / (2.0 * PI).sqrt(), epsilon = 1e-12);
            } else {
                assert!(v.norm() < 1e-12, "mode {m}: {v}");
            }
        }
    }

    #[test]
    fn roundtrip_and_parseval() {
        let g = Grid::new(256, -0.7, 0.9).unwrap();
        let f = random_field(256, 7);
        let c = g.to_momentum(&f).unwrap();
        let back = g.to_position(&c).unwrap();
        let err = f
            .iter()
            .zip(&back)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max);
        assert!(err < 1e-12, "roundtrip error {err}");
        let nx = g.norm_sqr(&f);
        let np: f64 = c.iter().map(|v| v.norm_sqr()).sum::<f64>() * g.dp();
        assert_relative_eq!(nx, np, max_relative = 1e-12);
    }

    #[test]
    fn length_mismatch() {
        let g = Grid::new(16, -1.0, 1.0).unwrap();
        assert!(matches!(
            g.to_momentum(&[Complex64::default(); 8]),
            Err(Error::LengthMismatch { expected: 16, got: 8 })
        ));
    }

    proptest::proptest! {
        #[test]
        fn transform_is_unitary(seed in 0u64..1000, log_n in 3u32..10, lo in -3.0f64..0.0, len in 0.1f64..5.0) {
            let n = 1usize << log_n;
            let g = Grid::new(n, lo, lo + len).unwrap();
            let f = random_field(n, seed);
            let back = g.to_position(&g.to_momentum(&f).unwrap()).unwrap();
            let err = f.iter().zip(&back).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
            proptest::prop_assert!(err <= 1e-12);
            let c = g.to_momentum(&f).unwrap();
            let np: f64 = c.iter().map(|v| v.norm_sqr()).sum::<f64>() * g.dp();
            proptest::prop_assert!((g.norm_sqr(&f) - np).abs() <= 1e-12 * np);
        }
    }
}
