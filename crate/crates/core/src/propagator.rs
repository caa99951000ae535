//! Symmetric split-operator evolution under `H = H0 + V(x)` and the
//! single-particle propagator matrix in the free `{v, w}` basis.
//!
//! One step is `K(dt/2) P(dt) K(dt/2)` with the kinetic factor applied per
//! momentum mode in closed form,
//! `exp(-i h tau) = cos(E tau) I - i sin(E tau)/E h`, and the potential
//! factor `exp(-i V(x) dt)` applied per grid point. Consecutive half kinetic
//! factors are fused when several steps run back to back.

use std::io::{Read, Write};

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use num_complex::Complex64;
use rayon::prelude::*;

use crate::basis::{ModeBasis, ModeKind};
use crate::error::{Error, Result};
use crate::field::{edge_band, SpinorField};
use crate::grid::Grid;

/// Per-mode 2x2 unitary `[[d0, off], [off, d1]]` (the blocks are symmetric).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KineticFactor {
    pub d0: Complex64,
    pub d1: Complex64,
    pub off: Complex64,
}

impl KineticFactor {
    fn new(a: f64, b: f64, tau: f64) -> Self {
        let e = a.hypot(b);
        let (s, c) = (e * tau).sin_cos();
        let r = s / e;
        Self {
            d0: Complex64::new(c, -r * a),
            d1: Complex64::new(c, r * a),
            off: Complex64::new(0.0, -r * b),
        }
    }

    #[inline]
    fn apply(&self, u: Complex64, l: Complex64) -> (Complex64, Complex64) {
        (self.d0 * u + self.off * l, self.off * u + self.d1 * l)
    }

    /// `max |M M^dagger - I|`.
    pub fn unitarity_defect(&self) -> f64 {
        let m = [[self.d0, self.off], [self.off, self.d1]];
        let mut worst: f64 = 0.0;
        for i in 0..2 {
            for j in 0..2 {
                let mut s = Complex64::default();
                for k in 0..2 {
                    s += m[i][k] * m[j][k].conj();
                }
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((s - target).norm());
            }
        }
        worst
    }
}

#[derive(Debug, Clone)]
pub struct SplitStepper {
    grid: Grid,
    dt: f64,
    potential: Vec<f64>,
    // indexed by raw FFT bin, scaled by 1/n so a forward/inverse pair is identity
    half_kinetic: Vec<KineticFactor>,
    full_kinetic: Vec<KineticFactor>,
    potential_phase: Vec<Complex64>,
}

/// Outcome of a field evolution.
#[derive(Debug, Clone, PartialEq)]
pub struct Evolved {
    pub field: SpinorField,
    /// Largest density seen in the edge bands at any intermediate step.
    pub edge_max: f64,
}

pub const EDGE_THRESHOLD: f64 = 1e-8;

impl SplitStepper {
    pub fn new(basis: &ModeBasis, potential: Vec<f64>, dt: f64) -> Result<Self> {
        let grid = basis.grid().clone();
        if potential.len() != grid.len() {
            return Err(Error::LengthMismatch {
                expected: grid.len(),
                got: potential.len(),
            });
        }
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(Error::InvalidParameter(format!("time step must be positive, got {dt}")));
        }
        let n = grid.len();
        let table = |tau: f64| -> Vec<KineticFactor> {
            (0..n)
                .map(|k| {
                    let b = basis.block(grid.mode_of_bin(k));
                    let mut f = KineticFactor::new(b.a, b.b, tau);
                    let s = 1.0 / n as f64;
                    f.d0 *= s;
                    f.d1 *= s;
                    f.off *= s;
                    f
                })
                .collect()
        };
        let half_kinetic = table(dt / 2.0);
        let full_kinetic = table(dt);
        let potential_phase = potential
            .iter()
            .map(|v| Complex64::from_polar(1.0, -v * dt))
            .collect();
        Ok(Self {
            grid,
            dt,
            potential,
            half_kinetic,
            full_kinetic,
            potential_phase,
        })
    }

    pub fn free(basis: &ModeBasis, dt: f64) -> Result<Self> {
        Self::new(basis, vec![0.0; basis.len()], dt)
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn potential(&self) -> &[f64] {
        &self.potential
    }

    pub fn is_free(&self) -> bool {
        self.potential.iter().all(|v| *v == 0.0)
    }

    /// True when `V(x) = V(-x)` on a box symmetric about zero.
    pub fn is_parity_symmetric(&self) -> bool {
        if !self.grid.is_symmetric() {
            return false;
        }
        (0..self.grid.len()).all(|j| self.potential[j] == self.potential[self.grid.mirror_point(j)])
    }

    /// Kinetic factor for `tau = dt/2` of mode `m`, without the FFT scaling.
    pub fn half_kinetic_factor(&self, m: usize) -> KineticFactor {
        let s = self.grid.len() as f64;
        let f = self.half_kinetic[self.grid.bin_of_mode(m)];
        KineticFactor {
            d0: f.d0 * s,
            d1: f.d1 * s,
            off: f.off * s,
        }
    }

    pub fn potential_phase(&self) -> &[Complex64] {
        &self.potential_phase
    }

    /// Number of whole steps covering `t`; errors if `t` is not a step multiple.
    pub fn steps_for(&self, t: f64) -> Result<usize> {
        let k = t / self.dt;
        let r = k.round();
        if r < 0.0 || (k - r).abs() > 1e-6 * r.max(1.0) {
            return Err(Error::InvalidParameter(format!(
                "time {t} is not a multiple of dt = {}",
                self.dt
            )));
        }
        Ok(r as usize)
    }

    fn kinetic(&self, table: &[KineticFactor], up: &mut [Complex64], lo: &mut [Complex64]) {
        self.grid.fft_forward(up);
        self.grid.fft_forward(lo);
        for ((u, l), f) in up.iter_mut().zip(lo.iter_mut()).zip(table) {
            let (a, b) = f.apply(*u, *l);
            *u = a;
            *l = b;
        }
        self.grid.fft_inverse(up);
        self.grid.fft_inverse(lo);
    }

    fn apply_potential(&self, up: &mut [Complex64], lo: &mut [Complex64]) {
        for ((u, l), ph) in up.iter_mut().zip(lo.iter_mut()).zip(&self.potential_phase) {
            *u *= ph;
            *l *= ph;
        }
    }

    /// One symmetric split step.
    pub fn step(&self, field: &SpinorField) -> Result<SpinorField> {
        Ok(self.evolve(field, 1)?.field)
    }

    /// `n_steps` symmetric steps with fused inner half-kinetic factors.
    pub fn evolve(&self, field: &SpinorField, n_steps: usize) -> Result<Evolved> {
        field.check_grid(&self.grid)?;
        let mut up = field.upper.clone();
        let mut lo = field.lower.clone();
        let band = edge_band(self.grid.len());
        let mut edge_max = edge_of(&up, &lo, band);
        if n_steps > 0 {
            self.kinetic(&self.half_kinetic, &mut up, &mut lo);
            for s in 0..n_steps {
                self.apply_potential(&mut up, &mut lo);
                edge_max = edge_max.max(edge_of(&up, &lo, band));
                let table = if s + 1 == n_steps {
                    &self.half_kinetic
                } else {
                    &self.full_kinetic
                };
                self.kinetic(table, &mut up, &mut lo);
            }
            edge_max = edge_max.max(edge_of(&up, &lo, band));
        }
        Ok(Evolved {
            field: SpinorField {
                upper: up,
                lower: lo,
            },
            edge_max,
        })
    }

    /// Like [`evolve`](Self::evolve) but fails when the edge monitor exceeds
    /// [`EDGE_THRESHOLD`].
    pub fn evolve_field(&self, field: &SpinorField, n_steps: usize) -> Result<Evolved> {
        let out = self.evolve(field, n_steps)?;
        if out.edge_max > EDGE_THRESHOLD {
            return Err(Error::EdgeBreach {
                density: out.edge_max,
                threshold: EDGE_THRESHOLD,
            });
        }
        Ok(out)
    }

    /// Evolves through the increasing step counts in `checkpoints`, calling
    /// `visit` with each intermediate field.
    pub fn evolve_through<F>(&self, field: &SpinorField, checkpoints: &[usize], mut visit: F) -> Result<f64>
    where
        F: FnMut(usize, &SpinorField) -> Result<()>,
    {
        let mut current = field.clone();
        let mut done = 0;
        let mut edge_max: f64 = 0.0;
        for (i, &target) in checkpoints.iter().enumerate() {
            if target < done {
                return Err(Error::InvalidParameter("checkpoints must be increasing".into()));
            }
            let out = self.evolve(&current, target - done)?;
            edge_max = edge_max.max(out.edge_max);
            current = out.field;
            done = target;
            visit(i, &current)?;
        }
        Ok(edge_max)
    }
}

fn edge_of(up: &[Complex64], lo: &[Complex64], band: usize) -> f64 {
    let n = up.len();
    let w = band.min(n / 2);
    (0..w)
        .chain(n - w..n)
        .map(|j| up[j].norm_sqr() + lo[j].norm_sqr())
        .fold(0.0, f64::max)
}

/// Blocks of `<basis_row | U(t) | basis_col>` in orthonormal discrete
/// normalization (the continuum amplitude times `dp`), so that the assembled
/// `2N x 2N` matrix is unitary. Each block is row-major `N x N`, indexed
/// `[row mode][source mode]`.
#[derive(Debug, Clone, PartialEq)]
pub struct PropagatorMatrix {
    pub t: f64,
    pub n: usize,
    pub vv: Vec<Complex64>,
    pub vw: Vec<Complex64>,
    pub wv: Vec<Complex64>,
    pub ww: Vec<Complex64>,
}

impl PropagatorMatrix {
    pub fn identity(n: usize) -> Self {
        let mut vv = vec![Complex64::default(); n * n];
        for i in 0..n {
            vv[i * n + i] = Complex64::new(1.0, 0.0);
        }
        Self {
            t: 0.0,
            n,
            ww: vv.clone(),
            vw: vec![Complex64::default(); n * n],
            wv: vec![Complex64::default(); n * n],
            vv,
        }
    }

    /// Element of the assembled `2N x 2N` matrix; indices `< N` are particle modes.
    pub fn get(&self, row: usize, col: usize) -> Complex64 {
        let n = self.n;
        match (row < n, col < n) {
            (true, true) => self.vv[row * n + col],
            (true, false) => self.vw[row * n + col - n],
            (false, true) => self.wv[(row - n) * n + col],
            (false, false) => self.ww[(row - n) * n + col - n],
        }
    }

    pub fn set(&mut self, row: usize, col: usize, value: Complex64) {
        let n = self.n;
        match (row < n, col < n) {
            (true, true) => self.vv[row * n + col] = value,
            (true, false) => self.vw[row * n + col - n] = value,
            (false, true) => self.wv[(row - n) * n + col] = value,
            (false, false) => self.ww[(row - n) * n + col - n] = value,
        }
    }

    /// Column `col` of the assembled matrix split as (particle rows, antiparticle rows).
    pub fn column(&self, col: usize) -> (Vec<Complex64>, Vec<Complex64>) {
        let n = self.n;
        (
            (0..n).map(|r| self.get(r, col)).collect(),
            (n..2 * n).map(|r| self.get(r, col)).collect(),
        )
    }

    /// `max |U U^dagger - I|` over the assembled matrix.
    pub fn unitarity_defect(&self) -> f64 {
        let dim = 2 * self.n;
        let rows: Vec<Vec<Complex64>> = (0..dim)
            .map(|r| (0..dim).map(|c| self.get(r, c)).collect())
            .collect();
        (0..dim)
            .into_par_iter()
            .map(|i| {
                let ri = &rows[i];
                let mut worst: f64 = 0.0;
                for (j, rj) in rows.iter().enumerate().skip(i) {
                    let s: Complex64 = ri.iter().zip(rj).map(|(a, b)| a * b.conj()).sum();
                    let target = if i == j { 1.0 } else { 0.0 };
                    worst = worst.max((s - target).norm());
                }
                worst
            })
            .reduce(|| 0.0, f64::max)
    }

    /// Largest elementwise difference between two matrices of equal size.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        [(&self.vv, &other.vv), (&self.vw, &other.vw), (&self.wv, &other.wv), (&self.ww, &other.ww)]
            .iter()
            .flat_map(|(a, b)| a.iter().zip(b.iter()).map(|(x, y)| (x - y).norm()))
            .fold(0.0, f64::max)
    }

    const MAGIC: &'static [u8; 8] = b"QFTPMAT1";

    /// Binary checkpoint: magic `QFTPMAT1`, `u64` mode count `N`, `u64`
    /// matrix count, then per matrix `f64` time followed by the blocks
    /// `vv, vw, wv, ww`, each `N x N` row-major as `(re, im)` pairs. All
    /// numbers little-endian.
    pub fn write_checkpoint<W: Write>(matrices: &[PropagatorMatrix], mut out: W) -> Result<()> {
        let n = matrices.first().map(|m| m.n).unwrap_or(0);
        out.write_all(Self::MAGIC)?;
        out.write_u64::<LittleEndian>(n as u64)?;
        out.write_u64::<LittleEndian>(matrices.len() as u64)?;
        for m in matrices {
            if m.n != n {
                return Err(Error::Checkpoint("mixed matrix sizes".into()));
            }
            out.write_f64::<LittleEndian>(m.t)?;
            for block in [&m.vv, &m.vw, &m.wv, &m.ww] {
                for z in block.iter() {
                    out.write_f64::<LittleEndian>(z.re)?;
                    out.write_f64::<LittleEndian>(z.im)?;
                }
            }
        }
        Ok(())
    }

    pub fn read_checkpoint<R: Read>(mut input: R) -> Result<Vec<PropagatorMatrix>> {
        let mut magic = [0u8; 8];
        input.read_exact(&mut magic)?;
        if &magic != Self::MAGIC {
            return Err(Error::Checkpoint("bad magic".into()));
        }
        let n = input.read_u64::<LittleEndian>()? as usize;
        let count = input.read_u64::<LittleEndian>()? as usize;
        let mut out = Vec::with_capacity(count);
        for _ in 0..count {
            let t = input.read_f64::<LittleEndian>()?;
            let mut blocks: Vec<Vec<Complex64>> = Vec::with_capacity(4);
            for _ in 0..4 {
                let mut b = Vec::with_capacity(n * n);
                for _ in 0..n * n {
                    let re = input.read_f64::<LittleEndian>()?;
                    let im = input.read_f64::<LittleEndian>()?;
                    b.push(Complex64::new(re, im));
                }
                blocks.push(b);
            }
            let ww = blocks.pop().unwrap();
            let wv = blocks.pop().unwrap();
            let vw = blocks.pop().unwrap();
            let vv = blocks.pop().unwrap();
            out.push(PropagatorMatrix { t, n, vv, vw, wv, ww });
        }
        Ok(out)
    }
}

/// Source column `index` of the `2N` basis: particle modes first.
pub fn basis_column(basis: &ModeBasis, index: usize) -> SpinorField {
    let n = basis.len();
    if index < n {
        basis.mode_field(index, ModeKind::Particle)
    } else {
        basis.mode_field(index - n, ModeKind::Antiparticle)
    }
}

/// Orthonormal-normalized projections `dp <v_p|psi>`, `dp <w_p|psi>` of an
/// evolved basis column.
fn project_column(basis: &ModeBasis, field: &SpinorField) -> Result<(Vec<Complex64>, Vec<Complex64>)> {
    let dp = basis.grid().dp();
    let c = basis.project(field)?;
    Ok((
        c.g_plus.into_iter().map(|z| z * dp).collect(),
        c.g_minus.into_iter().map(|z| z * dp).collect(),
    ))
}

/// Evolves all `2N` basis columns to each time in `times` and projects them
/// back onto the basis. Columns run in parallel; the result does not depend on
/// scheduling.
pub fn build_propagator_matrices(
    stepper: &SplitStepper,
    basis: &ModeBasis,
    times: &[f64],
) -> Result<Vec<PropagatorMatrix>> {
    let n = basis.len();
    let checkpoints = times
        .iter()
        .map(|t| stepper.steps_for(*t))
        .collect::<Result<Vec<_>>>()?;
    let columns: Vec<Vec<(Vec<Complex64>, Vec<Complex64>)>> = (0..2 * n)
        .into_par_iter()
        .map(|col| {
            let mut per_time = Vec::with_capacity(times.len());
            stepper.evolve_through(&basis_column(basis, col), &checkpoints, |_, f| {
                per_time.push(project_column(basis, f)?);
                Ok(())
            })?;
            Ok(per_time)
        })
        .collect::<Result<_>>()?;
    let mut out: Vec<PropagatorMatrix> = times
        .iter()
        .map(|&t| {
            let mut m = PropagatorMatrix::identity(n);
            m.t = t;
            m
        })
        .collect();
    for (col, per_time) in columns.into_iter().enumerate() {
        for (ti, (plus, minus)) in per_time.into_iter().enumerate() {
            for r in 0..n {
                out[ti].set(r, col, plus[r]);
                out[ti].set(n + r, col, minus[r]);
            }
        }
    }
    Ok(out)
}

pub fn build_propagator_matrix(stepper: &SplitStepper, basis: &ModeBasis, t: f64) -> Result<PropagatorMatrix> {
    Ok(build_propagator_matrices(stepper, basis, &[t])?.remove(0))
}

pub fn unitarity_defect(matrix: &PropagatorMatrix) -> f64 {
    matrix.unitarity_defect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::barrier::BarrierSpec;
    use crate::grid::{COMPTON, MC2};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_field(n: usize, seed: u64) -> SpinorField {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut rnd = || Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        SpinorField {
            upper: (0..n).map(|_| rnd()).collect(),
            lower: (0..n).map(|_| rnd()).collect(),
        }
    }

    fn setup(n: usize, height: f64) -> (ModeBasis, SplitStepper) {
        let g = Grid::new(n, -0.1, 0.1).unwrap();
        let basis = ModeBasis::new(&g);
        let barrier = BarrierSpec {
            height,
            width: 4.0 * COMPTON,
            smoothness: 0.3 * COMPTON,
        };
        let emax = basis.energy(0);
        let dt = (0.5 / emax).min(if height > 0.0 { 0.1 / height } else { f64::INFINITY });
        let stepper = SplitStepper::new(&basis, barrier.sample(&g), dt).unwrap();
        (basis, stepper)
    }

    #[test]
    fn kinetic_factors_unitary() {
        let (basis, stepper) = setup(64, MC2);
        for m in 0..basis.len() {
            assert!(stepper.half_kinetic_factor(m).unitarity_defect() < 1e-14);
        }
        for ph in stepper.potential_phase() {
            assert!((ph.norm() - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn free_mode_acquires_phase() {
        let (basis, stepper) = setup(64, 0.0);
        for m in [0, 5, 32, 63] {
            let v = basis.mode_field(m, ModeKind::Particle);
            let out = stepper.step(&v).unwrap();
            let mut expect = v.clone();
            let ph = Complex64::from_polar(1.0, -basis.energy(m) * stepper.dt());
            expect.upper.iter_mut().chain(expect.lower.iter_mut()).for_each(|z| *z *= ph);
            assert!(out.max_abs_diff(&expect) < 1e-13, "mode {m}");
            let w = basis.mode_field(m, ModeKind::Antiparticle);
            let out = stepper.step(&w).unwrap();
            let mut expect = w.clone();
            let ph = Complex64::from_polar(1.0, basis.energy(m) * stepper.dt());
            expect.upper.iter_mut().chain(expect.lower.iter_mut()).for_each(|z| *z *= ph);
            assert!(out.max_abs_diff(&expect) < 1e-13, "mode {m}");
        }
    }

    #[test]
    fn constant_potential_is_global_phase() {
        let g = Grid::new(64, -0.1, 0.1).unwrap();
        let basis = ModeBasis::new(&g);
        let dt = 1e-6;
        let vc = 3000.0;
        let free = SplitStepper::free(&basis, dt).unwrap();
        let shifted = SplitStepper::new(&basis, vec![vc; 64], dt).unwrap();
        let f = random_field(64, 1);
        let a = free.evolve(&f, 5).unwrap().field;
        let mut b = shifted.evolve(&f, 5).unwrap().field;
        let ph = Complex64::from_polar(1.0, vc * 5.0 * dt);
        b.upper.iter_mut().chain(b.lower.iter_mut()).for_each(|z| *z *= ph);
        assert!(a.max_abs_diff(&b) < 1e-12);
    }

    #[test]
    fn norm_preserved_per_step() {
        let (_, stepper) = setup(128, 1.77 * MC2);
        let g = stepper.grid().clone();
        let mut f = random_field(128, 9);
        let n0 = f.norm_sqr(&g);
        for _ in 0..20 {
            f = stepper.step(&f).unwrap();
            let n1 = f.norm_sqr(&g);
            assert!(((n1 - n0) / n0).abs() <= 1e-13);
        }
    }

    #[test]
    fn zero_steps_is_identity() {
        let (_, stepper) = setup(32, MC2);
        let f = random_field(32, 4);
        assert_eq!(stepper.evolve(&f, 0).unwrap().field, f);
    }

    #[test]
    fn fused_steps_match_single_steps() {
        let (_, stepper) = setup(64, 2.0 * MC2);
        let f = random_field(64, 5);
        let mut one = f.clone();
        for _ in 0..7 {
            one = stepper.step(&one).unwrap();
        }
        let fused = stepper.evolve(&f, 7).unwrap().field;
        assert!(one.max_abs_diff(&fused) < 1e-12);
    }

    #[test]
    fn edge_breach_reported() {
        let (_, stepper) = setup(32, 0.0);
        let f = random_field(32, 2);
        assert!(matches!(
            stepper.evolve_field(&f, 1),
            Err(Error::EdgeBreach { .. })
        ));
    }

    #[test]
    fn matrix_identity_at_zero_and_diagonal_when_free() {
        let (basis, stepper) = setup(16, 0.0);
        let m0 = build_propagator_matrix(&stepper, &basis, 0.0).unwrap();
        assert!(m0.max_abs_diff(&PropagatorMatrix::identity(16)) < 1e-12);
        let t = 10.0 * stepper.dt();
        let m = build_propagator_matrix(&stepper, &basis, t).unwrap();
        for p in 0..16 {
            for k in 0..16 {
                let e = basis.energy(p);
                let (dv, dw) = if p == k {
                    (Complex64::from_polar(1.0, -e * t), Complex64::from_polar(1.0, e * t))
                } else {
                    (Complex64::default(), Complex64::default())
                };
                assert!((m.vv[p * 16 + k] - dv).norm() < 1e-12);
                assert!((m.ww[p * 16 + k] - dw).norm() < 1e-12);
                assert!(m.vw[p * 16 + k].norm() < 1e-12);
                assert!(m.wv[p * 16 + k].norm() < 1e-12);
            }
        }
        assert!(m.unitarity_defect() < 1e-12);
        assert_eq!(PropagatorMatrix::identity(8).unitarity_defect(), 0.0);
    }

    #[test]
    fn barrier_matrix_is_unitary() {
        let (basis, stepper) = setup(32, 1.77 * MC2);
        let m = build_propagator_matrix(&stepper, &basis, 40.0 * stepper.dt()).unwrap();
        assert!(m.unitarity_defect() < 1e-12);
        assert!(m.vw.iter().any(|z| z.norm() > 1e-6));
    }

    #[test]
    fn deterministic_blocks() {
        let (basis, stepper) = setup(16, 1.77 * MC2);
        let t = 12.0 * stepper.dt();
        let a = build_propagator_matrix(&stepper, &basis, t).unwrap();
        let b = build_propagator_matrix(&stepper, &basis, t).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn checkpoint_roundtrip() {
        let (basis, stepper) = setup(8, 1.77 * MC2);
        let ms = build_propagator_matrices(&stepper, &basis, &[0.0, 4.0 * stepper.dt()]).unwrap();
        let mut bytes = Vec::new();
        PropagatorMatrix::write_checkpoint(&ms, &mut bytes).unwrap();
        assert_eq!(bytes.len(), 8 + 16 + 2 * (8 + 4 * 64 * 16));
        assert_eq!(&bytes[..8], b"QFTPMAT1");
        let back = PropagatorMatrix::read_checkpoint(&bytes[..]).unwrap();
        assert_eq!(back, ms);
        assert!(PropagatorMatrix::read_checkpoint(&b"garbage!........"[..]).is_err());
    }

    #[test]
    fn steps_for_rejects_fractional_times() {
        let (_, stepper) = setup(8, 0.0);
        assert_eq!(stepper.steps_for(3.0 * stepper.dt()).unwrap(), 3);
        assert!(stepper.steps_for(2.5 * stepper.dt()).is_err());
    }
}
