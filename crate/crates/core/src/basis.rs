//! Free Dirac plane-wave eigenbasis on the grid.
//!
//! In one dimension the free Hamiltonian is `H0 = c sigma_1 p + sigma_3 m c^2`.
//! Each grid mode `p` carries a positive-energy spinor `u+(p)` (eigenvalue
//! `+E_p`) and a negative-energy spinor `u-(p)` (eigenvalue `-E_p`), both with
//! the plane wave `exp(i p x)`:
//!
//! ```text
//! v_p(x) = u+(p) exp(i p x) / sqrt(2 pi)
//! w_p(x) = u-(p) exp(i p x) / sqrt(2 pi)
//! ```
//!
//! so that on the grid `<v_p|v_k> = <w_p|w_k> = delta_pk / dp` and
//! `<v_p|w_k> = 0`. Spinors are real, unit-norm, and positive in their first
//! nonzero component.
//!
//! The Nyquist mode has no partner `+p_max` on the grid, so its `sigma_1`
//! coupling is dropped and its 2x2 block is `diag(E, -E)`. This keeps the
//! discrete dynamics parity symmetric; the same block is used by the stepper.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::SpinorField;
use crate::grid::{Grid, C, MC2};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModeKind {
    Particle,
    Antiparticle,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FreeMode {
    pub p: f64,
    pub energy: f64,
    pub kind: ModeKind,
    pub spinor: [f64; 2],
}

/// Real symmetric 2x2 block `[[a, b], [b, -a]]` of the free Hamiltonian at one mode.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModeBlock {
    pub a: f64,
    pub b: f64,
}

impl ModeBlock {
    pub fn energy(&self) -> f64 {
        self.a.hypot(self.b)
    }

    pub fn particle_spinor(&self) -> [f64; 2] {
        let e = self.energy();
        let s = 1.0 / (2.0 * e * (e + self.a)).sqrt();
        [(self.a + e) * s, self.b * s]
    }

    pub fn antiparticle_spinor(&self) -> [f64; 2] {
        let e = self.energy();
        let s = 1.0 / (2.0 * e * (e + self.a)).sqrt();
        [-self.b * s, (self.a + e) * s]
    }
}

pub fn energy(p: f64) -> f64 {
    C * (p * p + C * C).sqrt()
}

/// Hamiltonian block for mode `m` of `grid`.
pub fn mode_block(grid: &Grid, m: usize) -> ModeBlock {
    let p = grid.p(m);
    if m == grid.nyquist_mode() {
        ModeBlock { a: energy(p), b: 0.0 }
    } else {
        ModeBlock { a: MC2, b: C * p }
    }
}

fn mode_index(grid: &Grid, p: f64) -> Result<usize> {
    let idx = (p / grid.dp()).round() + (grid.len() / 2) as f64;
    if idx < 0.0 || idx >= grid.len() as f64 {
        return Err(Error::InvalidParameter(format!(
            "momentum {p} outside the grid"
        )));
    }
    let m = idx as usize;
    if (grid.p(m) - p).abs() > 1e-9 * grid.dp().max(p.abs()) {
        return Err(Error::InvalidParameter(format!(
            "momentum {p} is not a grid mode"
        )));
    }
    Ok(m)
}

pub fn free_mode(p: f64, kind: ModeKind, grid: &Grid) -> Result<FreeMode> {
    let m = mode_index(grid, p)?;
    let block = mode_block(grid, m);
    let spinor = match kind {
        ModeKind::Particle => block.particle_spinor(),
        ModeKind::Antiparticle => block.antiparticle_spinor(),
    };
    Ok(FreeMode {
        p: grid.p(m),
        energy: block.energy(),
        kind,
        spinor,
    })
}

/// Positive/negative expansion coefficients `g+(p)`, `g-(p)` in the
/// continuum convention: `psi = sum_p dp (g+ v_p + g- w_p)`.
#[derive(Debug, Clone, PartialEq)]
pub struct WavepacketCoefficients {
    pub g_plus: Vec<Complex64>,
    pub g_minus: Vec<Complex64>,
    pub dp: f64,
}

impl WavepacketCoefficients {
    pub fn norm_sqr(&self) -> f64 {
        self.g_plus
            .iter()
            .chain(&self.g_minus)
            .map(|g| g.norm_sqr())
            .sum::<f64>()
            * self.dp
    }

    pub fn negative_weight(&self) -> f64 {
        self.g_minus.iter().map(|g| g.norm_sqr()).sum::<f64>() * self.dp
    }
}

#[derive(Debug, Clone)]
pub struct ModeBasis {
    grid: Grid,
    blocks: Vec<ModeBlock>,
    particle: Vec<[f64; 2]>,
    antiparticle: Vec<[f64; 2]>,
}

impl ModeBasis {
    pub fn new(grid: &Grid) -> Self {
        let blocks: Vec<ModeBlock> = (0..grid.len()).map(|m| mode_block(grid, m)).collect();
        let particle = blocks.iter().map(ModeBlock::particle_spinor).collect();
        let antiparticle = blocks.iter().map(ModeBlock::antiparticle_spinor).collect();
        Self {
            grid: grid.clone(),
            blocks,
            particle,
            antiparticle,
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn block(&self, m: usize) -> ModeBlock {
        self.blocks[m]
    }

    pub fn energy(&self, m: usize) -> f64 {
        self.blocks[m].energy()
    }

    pub fn particle_spinor(&self, m: usize) -> [f64; 2] {
        self.particle[m]
    }

    pub fn antiparticle_spinor(&self, m: usize) -> [f64; 2] {
        self.antiparticle[m]
    }

    /// Group velocity `dE/dp` of mode `m` in units of `c`.
    pub fn velocity(&self, m: usize) -> f64 {
        let b = self.blocks[m];
        b.b / b.energy()
    }

    /// `v_m(x)` (particle) or `w_m(x)` (antiparticle) sampled on the grid.
    pub fn mode_field(&self, m: usize, kind: ModeKind) -> SpinorField {
        let u = match kind {
            ModeKind::Particle => self.particle[m],
            ModeKind::Antiparticle => self.antiparticle[m],
        };
        let p = self.grid.p(m);
        let norm = 1.0 / (2.0 * PI).sqrt();
        let (upper, lower) = self
            .grid
            .positions()
            .map(|x| {
                let e = Complex64::from_polar(norm, p * x);
                (e * u[0], e * u[1])
            })
            .unzip();
        SpinorField { upper, lower }
    }

    /// Spectrum of both spinor components, `psi~(p)`, ascending mode order.
    pub fn spectrum(&self, field: &SpinorField) -> Result<[Vec<Complex64>; 2]> {
        field.check_grid(&self.grid)?;
        Ok([
            self.grid.to_momentum(&field.upper)?,
            self.grid.to_momentum(&field.lower)?,
        ])
    }

    /// Projects a spectrum onto the particle and antiparticle spinors of each mode.
    pub fn split_spectrum(&self, spec: &[Vec<Complex64>; 2]) -> (Vec<Complex64>, Vec<Complex64>) {
        let n = self.len();
        let mut plus = Vec::with_capacity(n);
        let mut minus = Vec::with_capacity(n);
        for m in 0..n {
            let (u, w) = (self.particle[m], self.antiparticle[m]);
            let (a, b) = (spec[0][m], spec[1][m]);
            plus.push(a * u[0] + b * u[1]);
            minus.push(a * w[0] + b * w[1]);
        }
        (plus, minus)
    }

    /// `g+(p) = <v_p|psi>`, `g-(p) = <w_p|psi>`.
    pub fn project(&self, field: &SpinorField) -> Result<WavepacketCoefficients> {
        let spec = self.spectrum(field)?;
        let (g_plus, g_minus) = self.split_spectrum(&spec);
        Ok(WavepacketCoefficients {
            g_plus,
            g_minus,
            dp: self.grid.dp(),
        })
    }

    /// `sum_p dp (plus_p v_p + minus_p w_p)`; either side may be omitted.
    pub fn synthesize(
        &self,
        plus: Option<&[Complex64]>,
        minus: Option<&[Complex64]>,
    ) -> Result<SpinorField> {
        let n = self.len();
        let zero = Complex64::default();
        let mut up = vec![zero; n];
        let mut lo = vec![zero; n];
        for m in 0..n {
            if let Some(c) = plus {
                let u = self.particle[m];
                up[m] += c[m] * u[0];
                lo[m] += c[m] * u[1];
            }
            if let Some(c) = minus {
                let w = self.antiparticle[m];
                up[m] += c[m] * w[0];
                lo[m] += c[m] * w[1];
            }
        }
        Ok(SpinorField {
            upper: self.grid.to_position(&up)?,
            lower: self.grid.to_position(&lo)?,
        })
    }

    pub fn reconstruct(&self, coeffs: &WavepacketCoefficients) -> Result<SpinorField> {
        self.synthesize(Some(&coeffs.g_plus), Some(&coeffs.g_minus))
    }

    /// Mean velocity in units of `c`: the group velocity `c^2 p / E_p`
    /// averaged over `|g+|^2 + |g-|^2`. Under field evolution both families of
    /// coefficients advance with `exp(-i E_p t)` in the density, so the
    /// negative-energy content drifts with the same sign of velocity as the
    /// positive-energy content at equal plane-wave momentum.
    pub fn mean_velocity(&self, coeffs: &WavepacketCoefficients) -> Result<f64> {
        let weight = coeffs.norm_sqr();
        if weight <= 0.0 {
            return Err(Error::ZeroNorm);
        }
        let v: f64 = (0..self.len())
            .map(|m| (coeffs.g_plus[m].norm_sqr() + coeffs.g_minus[m].norm_sqr()) * self.velocity(m))
            .sum::<f64>()
            * coeffs.dp;
        Ok(v / weight)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WavepacketSpec {
    pub x0: f64,
    pub p0: f64,
    pub width: f64,
}

impl WavepacketSpec {
    /// Compact support `[x0 - D pi/2, x0 + D pi/2]`.
    pub fn support(&self) -> (f64, f64) {
        let half = self.width * PI / 2.0;
        (self.x0 - half, self.x0 + half)
    }

    pub fn right_edge(&self) -> f64 {
        self.support().1
    }

    pub fn contains(&self, x: f64) -> bool {
        let (lo, hi) = self.support();
        x > lo && x < hi
    }

    pub fn validate(&self, grid: &Grid) -> Result<()> {
        if !(self.width > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "wavepacket width must be positive, got {}",
                self.width
            )));
        }
        let (lo, hi) = self.support();
        if lo < grid.x_min() || hi > grid.x_max() {
            return Err(Error::SupportOutsideBox {
                lo,
                hi,
                x_min: grid.x_min(),
                x_max: grid.x_max(),
            });
        }
        Ok(())
    }

    /// Unnormalized upper-component profile `cos^8((x-x0)/D) exp(i p0 x)` on the support.
    pub fn profile(&self, x: f64) -> Complex64 {
        if !self.contains(x) {
            return Complex64::default();
        }
        let c = ((x - self.x0) / self.width).cos();
        Complex64::from_polar(c.powi(8), self.p0 * x)
    }
}

/// Initial spinor `(cos^8((x-x0)/D) e^{i p0 x}, 0)`, normalized to one on the grid.
pub fn initial_wavepacket(spec: &WavepacketSpec, grid: &Grid) -> Result<SpinorField> {
    spec.validate(grid)?;
    let upper: Vec<Complex64> = grid.positions().map(|x| spec.profile(x)).collect();
    let mut field = SpinorField {
        lower: vec![Complex64::default(); upper.len()],
        upper,
    };
    let norm = field.norm_sqr(grid);
    if norm <= 0.0 {
        return Err(Error::ZeroNorm);
    }
    field.scale(1.0 / norm.sqrt());
    Ok(field)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::COMPTON;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn grid() -> Grid {
        Grid::new(64, -0.3, 0.3).unwrap()
    }

    #[test]
    fn rest_mode_spinors() {
        let g = grid();
        let v = free_mode(0.0, ModeKind::Particle, &g).unwrap();
        assert_eq!(v.spinor, [1.0, 0.0]);
        assert_relative_eq!(v.energy, MC2, max_relative = 1e-15);
        let w = free_mode(0.0, ModeKind::Antiparticle, &g).unwrap();
        assert_eq!(w.spinor, [0.0, 1.0]);
    }

    #[test]
    fn antiparticle_rest_limit() {
        // lower component kept positive, so both limits are (0, 1)
        for p in [1e-3, -1e-3] {
            let b = ModeBlock { a: MC2, b: C * p };
            let s = b.antiparticle_spinor();
            assert!(s[0].abs() < 1e-5);
            assert_relative_eq!(s[1], 1.0, epsilon = 1e-9);
        }
    }

    #[test]
    fn relativistic_particle_normalization() {
        let block = ModeBlock { a: MC2, b: C * 200.0 };
        let e = block.energy();
        assert_relative_eq!(e, C * (200.0f64.powi(2) + C * C).sqrt(), max_relative = 1e-15);
        let s = block.particle_spinor();
        assert_relative_eq!(s[0], ((e + MC2) / (2.0 * e)).sqrt(), max_relative = 1e-14);
        assert_relative_eq!(s[1] / s[0], C * 200.0 / (MC2 + e), max_relative = 1e-14);
        assert_relative_eq!(s[0] * s[0] + s[1] * s[1], 1.0, epsilon = 1e-15);
        // antiparticle ratio matches cp/(mc^2 - E)
        let w = block.antiparticle_spinor();
        assert_relative_eq!(w[1] / w[0], C * 200.0 / (MC2 - e), max_relative = 1e-14);
    }

    #[test]
    fn spinors_are_eigenvectors() {
        let g = grid();
        for m in 0..g.len() {
            let blk = mode_block(&g, m);
            let e = blk.energy();
            assert!(e >= MC2);
            for (u, sign) in [(blk.particle_spinor(), 1.0), (blk.antiparticle_spinor(), -1.0)] {
                let hu = [blk.a * u[0] + blk.b * u[1], blk.b * u[0] - blk.a * u[1]];
                assert!((hu[0] - sign * e * u[0]).abs() < 1e-9 * e);
                assert!((hu[1] - sign * e * u[1]).abs() < 1e-9 * e);
                assert_relative_eq!(u[0] * u[0] + u[1] * u[1], 1.0, epsilon = 1e-14);
            }
            assert!(blk.particle_spinor()[0] > 0.0);
            assert!(blk.antiparticle_spinor()[1] > 0.0);
            let (u, w) = (blk.particle_spinor(), blk.antiparticle_spinor());
            assert!((u[0] * w[0] + u[1] * w[1]).abs() < 1e-15);
        }
    }

    #[test]
    fn rejects_off_grid_momentum() {
        let g = grid();
        assert!(free_mode(0.37 * g.dp(), ModeKind::Particle, &g).is_err());
    }

    #[test]
    fn orthonormality_brute_force() {
        // direct grid sums, no transforms
        let g = Grid::new(16, -0.05, 0.05).unwrap();
        let b = ModeBasis::new(&g);
        let fields: Vec<SpinorField> = (0..16)
            .flat_map(|m| {
                [
                    b.mode_field(m, ModeKind::Particle),
                    b.mode_field(m, ModeKind::Antiparticle),
                ]
            })
            .collect();
        for (i, fi) in fields.iter().enumerate() {
            for (j, fj) in fields.iter().enumerate() {
                let ov = fi.inner(fj, &g) * g.dp();
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((ov - expect).norm() < 1e-10, "({i},{j}): {ov}");
            }
        }
    }

    #[test]
    fn projecting_a_mode_gives_kronecker() {
        let g = grid();
        let b = ModeBasis::new(&g);
        let k = 40;
        let c = b.project(&b.mode_field(k, ModeKind::Particle)).unwrap();
        for m in 0..g.len() {
            let expect = if m == k { 1.0 / g.dp() } else { 0.0 };
            assert!((c.g_plus[m] - expect).norm() < 1e-10 / g.dp());
            assert!(c.g_minus[m].norm() < 1e-10 / g.dp());
        }
    }

    #[test]
    fn reconstruction_of_random_field() {
        let g = Grid::new(128, -0.4, 0.2).unwrap();
        let b = ModeBasis::new(&g);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut rnd = || Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        let field = SpinorField {
            upper: (0..128).map(|_| rnd()).collect(),
            lower: (0..128).map(|_| rnd()).collect(),
        };
        let c = b.project(&field).unwrap();
        let back = b.reconstruct(&c).unwrap();
        assert!(field.max_abs_diff(&back) < 1e-10);
        assert_relative_eq!(c.norm_sqr(), field.norm_sqr(&g), max_relative = 1e-12);
    }

    #[test]
    fn wavepacket_support_and_peak() {
        let g = Grid::new(2048, -2.2, 2.2).unwrap();
        let spec = WavepacketSpec {
            x0: -120.0 * COMPTON,
            p0: 100.0,
            width: 70.0 * COMPTON,
        };
        let f = initial_wavepacket(&spec, &g).unwrap();
        let (lo, hi) = spec.support();
        assert_relative_eq!(lo, (-120.0 - 35.0 * PI) * COMPTON, max_relative = 1e-14);
        assert_relative_eq!(hi, (-120.0 + 35.0 * PI) * COMPTON, max_relative = 1e-14);
        for (j, x) in g.positions().enumerate() {
            if x <= lo || x >= hi {
                assert_eq!(f.upper[j], Complex64::default());
            }
            assert_eq!(f.lower[j], Complex64::default());
        }
        assert_relative_eq!(f.norm_sqr(&g), 1.0, epsilon = 1e-14);
        assert_eq!(spec.profile(lo), Complex64::default());
        let peak = spec.profile(spec.x0);
        assert_relative_eq!(peak.norm(), 1.0);
        assert_relative_eq!(peak.arg(), Complex64::from_polar(1.0, spec.p0 * spec.x0).arg(), epsilon = 1e-12);
    }

    #[test]
    fn support_must_fit() {
        let g = Grid::new(64, -0.1, 0.1).unwrap();
        let spec = WavepacketSpec { x0: 0.0, p0: 10.0, width: 1.0 };
        assert!(matches!(
            initial_wavepacket(&spec, &g),
            Err(Error::SupportOutsideBox { .. })
        ));
    }

    #[test]
    fn compact_packet_has_negative_energy_content() {
        let g = Grid::new(1024, -0.56, 0.56).unwrap();
        let b = ModeBasis::new(&g);
        let spec = WavepacketSpec {
            x0: -35.0 * COMPTON,
            p0: 200.0,
            width: 16.0 * COMPTON,
        };
        let f = initial_wavepacket(&spec, &g).unwrap();
        let c = b.project(&f).unwrap();
        assert!(c.negative_weight() > 1e-3);
        assert_relative_eq!(c.norm_sqr(), 1.0, epsilon = 1e-12);
        assert!(b.reconstruct(&c).unwrap().max_abs_diff(&f) < 1e-10);
    }

    #[test]
    fn mean_velocity_limits() {
        let g = Grid::new(256, -0.5, 0.5).unwrap();
        let b = ModeBasis::new(&g);
        let rest = b.project(&b.mode_field(g.zero_mode(), ModeKind::Particle)).unwrap();
        assert!(b.mean_velocity(&rest).unwrap().abs() < 1e-12);
        let fine = Grid::new(256, -0.05, 0.05).unwrap();
        let bf = ModeBasis::new(&fine);
        let fast = bf.project(&bf.mode_field(255, ModeKind::Particle)).unwrap();
        let v = bf.mean_velocity(&fast).unwrap();
        assert!(v < 1.0 && v > 0.99);
        let zero = WavepacketCoefficients {
            g_plus: vec![Complex64::default(); 256],
            g_minus: vec![Complex64::default(); 256],
            dp: g.dp(),
        };
        assert!(matches!(b.mean_velocity(&zero), Err(Error::ZeroNorm)));
    }
}
