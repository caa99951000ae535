//! Exact Fock-space reference for a handful of modes.
//!
//! A toy model has `n` particle modes `b_m`, `n` antiparticle modes `d_m`
//! and `n` sites with two spinor slots each. Mode functions are the columns
//! of a unitary `W` over the `2n` slots (particle modes first). The
//! single-particle Hamiltonian `h` acts on `psi = (b_0.., d_0^dagger..)` and
//! the many-body Hamiltonian is `H = sum_ab h_ab psi_a^dagger psi_b` on the
//! `4^n`-dimensional Fock space built by a Jordan-Wigner construction.
//! The field at slot `s` is `Phi_s = sum_m W[s, m] b_m + W[s, n + m] d_m`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;

use crate::density::{Evolution, ModeSpace};
use crate::error::{Error, Result};
use crate::field::SpinorField;

pub const MAX_MODES: usize = 4;

type CMat = DMatrix<Complex64>;

fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

/// `exp(-i a t)` for Hermitian `a`.
fn hermitian_exp(a: &CMat, t: f64) -> CMat {
    let n = a.nrows();
    let m = a * Complex64::new(0.0, -t);
    let squarings = (m.norm() / 0.25).log2().ceil().max(0.0) as i32;
    let x = m * c(0.5f64.powi(squarings));
    let mut term = CMat::identity(n, n);
    let mut u = term.clone();
    for k in 1..=20 {
        term = &term * &x * c(1.0 / k as f64);
        u += &term;
    }
    for _ in 0..squarings {
        u = &u * &u;
    }
    let polish = CMat::identity(n, n) * c(1.5) - u.adjoint() * &u * c(0.5);
    u * polish
}

fn random_unitary<R: Rng>(dim: usize, rng: &mut R) -> CMat {
    let m = CMat::from_fn(dim, dim, |_, _| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
    m.qr().q()
}

fn random_hermitian<R: Rng>(dim: usize, scale: f64, rng: &mut R) -> CMat {
    let m = CMat::from_fn(dim, dim, |_, _| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
    (&m + m.adjoint()) * c(0.5 * scale)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ToyModel {
    pub n_modes: usize,
    /// Mode functions as columns over the `2n` slots; slot `2j + c` is spinor
    /// component `c` at site `j`.
    pub modes: CMat,
    /// Single-particle Hamiltonian in the mode basis.
    pub hamiltonian: CMat,
    pub g_plus: Vec<Complex64>,
    pub g_minus: Vec<Complex64>,
}

impl ToyModel {
    pub fn new(modes: CMat, hamiltonian: CMat, g_plus: Vec<Complex64>, g_minus: Vec<Complex64>) -> Result<Self> {
        let n = g_plus.len();
        if n == 0 || n > MAX_MODES {
            return Err(Error::TooManyModes(n));
        }
        for (m, what) in [(&modes, "mode matrix"), (&hamiltonian, "hamiltonian")] {
            if m.nrows() != 2 * n || m.ncols() != 2 * n {
                return Err(Error::InvalidParameter(format!("{what} must be {0}x{0}", 2 * n)));
            }
        }
        if g_minus.len() != n {
            return Err(Error::LengthMismatch {
                expected: n,
                got: g_minus.len(),
            });
        }
        let herm = (&hamiltonian - hamiltonian.adjoint()).camax();
        if herm > 1e-14 {
            return Err(Error::InvalidParameter(format!("hamiltonian not Hermitian ({herm:e})")));
        }
        let unit = (&modes * modes.adjoint() - CMat::identity(2 * n, 2 * n)).camax();
        if unit > 1e-12 {
            return Err(Error::InvalidParameter(format!("mode functions not orthonormal ({unit:e})")));
        }
        Ok(Self {
            n_modes: n,
            modes,
            hamiltonian,
            g_plus,
            g_minus,
        })
    }

    /// Random mode functions, energies `+-E` with `E` in `[1, 3]` plus a
    /// random Hermitian coupling, and random normalized coefficients.
    pub fn random<R: Rng>(n: usize, rng: &mut R) -> Result<Self> {
        if n == 0 || n > MAX_MODES {
            return Err(Error::TooManyModes(n));
        }
        let modes = random_unitary(2 * n, rng);
        let mut h = random_hermitian(2 * n, 1.5, rng);
        for m in 0..n {
            let e = rng.gen_range(1.0..3.0);
            h[(m, m)] += c(e);
            h[(n + m, n + m)] -= c(e);
        }
        let h = (&h + h.adjoint()) * c(0.5);
        let (gp, gm) = random_coefficients(n, rng);
        Self::new(modes, h, gp, gm)
    }

    /// Two decoupled halves: modes `0..k` live on sites `0..k` and modes
    /// `k..n` on sites `k..n`, and `h` never couples the halves. The initial
    /// packet lives on the first half only.
    pub fn local<R: Rng>(n: usize, k: usize, rng: &mut R) -> Result<Self> {
        if n == 0 || n > MAX_MODES {
            return Err(Error::TooManyModes(n));
        }
        if k == 0 || k >= n {
            return Err(Error::InvalidParameter(format!("split {k} must lie in 1..{n}")));
        }
        // group of a mode column: particle m and antiparticle m belong with site m
        let group = |col: usize| usize::from(col % n >= k);
        let mut modes = CMat::zeros(2 * n, 2 * n);
        let mut h = CMat::zeros(2 * n, 2 * n);
        for g in 0..2 {
            let cols: Vec<usize> = (0..2 * n).filter(|&col| group(col) == g).collect();
            let slots: Vec<usize> = (0..2 * n).filter(|&s| usize::from(s / 2 >= k) == g).collect();
            let u = random_unitary(cols.len(), rng);
            let hh = random_hermitian(cols.len(), 1.5, rng);
            for (a, &col_a) in cols.iter().enumerate() {
                for (r, &slot) in slots.iter().enumerate() {
                    modes[(slot, col_a)] = u[(r, a)];
                }
                for (b, &col_b) in cols.iter().enumerate() {
                    h[(col_a, col_b)] = hh[(a, b)];
                }
            }
        }
        for m in 0..n {
            let e = rng.gen_range(1.0..3.0);
            h[(m, m)] += c(e);
            h[(n + m, n + m)] -= c(e);
        }
        let (mut gp, mut gm) = random_coefficients(n, rng);
        for m in k..n {
            gp[m] = Complex64::default();
            gm[m] = Complex64::default();
        }
        let norm = gp.iter().chain(&gm).map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        gp.iter_mut().chain(gm.iter_mut()).for_each(|z| *z /= norm);
        Self::new(modes, h, gp, gm)
    }

    pub fn fock_dim(&self) -> usize {
        1 << (2 * self.n_modes)
    }

    /// Single-particle evolution `exp(-i h t)` in the mode basis.
    pub fn single_particle_propagator(&self, t: f64) -> CMat {
        hermitian_exp(&self.hamiltonian, t)
    }

    /// First-quantized initial packet `sum g+ v + g- w` over the slots.
    pub fn packet(&self) -> SpinorField {
        let coeffs = DVector::from_iterator(
            2 * self.n_modes,
            self.g_plus.iter().chain(&self.g_minus).copied(),
        );
        slots_to_field(&(&self.modes * coeffs))
    }
}

fn random_coefficients<R: Rng>(n: usize, rng: &mut R) -> (Vec<Complex64>, Vec<Complex64>) {
    let mut rnd = || Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
    let mut gp: Vec<Complex64> = (0..n).map(|_| rnd()).collect();
    let mut gm: Vec<Complex64> = (0..n).map(|_| rnd()).collect();
    let norm = gp.iter().chain(&gm).map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    gp.iter_mut().chain(gm.iter_mut()).for_each(|z| *z /= norm);
    (gp, gm)
}

fn slots_to_field(v: &DVector<Complex64>) -> SpinorField {
    let sites = v.len() / 2;
    SpinorField {
        upper: (0..sites).map(|j| v[2 * j]).collect(),
        lower: (0..sites).map(|j| v[2 * j + 1]).collect(),
    }
}

fn field_to_slots(f: &SpinorField) -> DVector<Complex64> {
    DVector::from_iterator(
        2 * f.len(),
        f.upper.iter().zip(&f.lower).flat_map(|(u, l)| [*u, *l]),
    )
}

impl ModeSpace for ToyModel {
    fn modes(&self) -> usize {
        self.n_modes
    }

    fn sites(&self) -> usize {
        self.n_modes
    }

    fn site_measure(&self) -> f64 {
        1.0
    }

    fn project(&self, field: &SpinorField) -> Result<(Vec<Complex64>, Vec<Complex64>)> {
        if field.len() != self.n_modes {
            return Err(Error::LengthMismatch {
                expected: self.n_modes,
                got: field.len(),
            });
        }
        let c = self.modes.adjoint() * field_to_slots(field);
        let n = self.n_modes;
        Ok(((0..n).map(|m| c[m]).collect(), (0..n).map(|m| c[n + m]).collect()))
    }

    fn synthesize(&self, plus: Option<&[Complex64]>, minus: Option<&[Complex64]>) -> Result<SpinorField> {
        let n = self.n_modes;
        let mut c = DVector::zeros(2 * n);
        for m in 0..n {
            if let Some(p) = plus {
                c[m] = p[m];
            }
            if let Some(q) = minus {
                c[n + m] = q[m];
            }
        }
        Ok(slots_to_field(&(&self.modes * c)))
    }
}

impl Evolution for ToyModel {
    fn evolve_many(&self, field: &SpinorField, times: &[f64]) -> Result<(Vec<SpinorField>, f64)> {
        let c0 = self.modes.adjoint() * field_to_slots(field);
        let out = times
            .iter()
            .map(|&t| slots_to_field(&(&self.modes * (self.single_particle_propagator(t) * &c0))))
            .collect();
        Ok((out, 0.0))
    }
}

/// Jordan-Wigner annihilation operators for the `2n` fermionic modes
/// `[b_0, .., b_{n-1}, d_0, .., d_{n-1}]`.
#[derive(Debug, Clone)]
pub struct FockSpace {
    pub n_modes: usize,
    pub annihilators: Vec<CMat>,
}

impl FockSpace {
    pub fn new(n_modes: usize) -> Result<Self> {
        if n_modes == 0 || n_modes > MAX_MODES {
            return Err(Error::TooManyModes(n_modes));
        }
        let k = 2 * n_modes;
        let dim = 1usize << k;
        let annihilators = (0..k)
            .map(|i| {
                let mut a = CMat::zeros(dim, dim);
                for state in 0..dim {
                    if state & (1 << i) != 0 {
                        let below = (state & ((1 << i) - 1)).count_ones();
                        let sign = if below % 2 == 0 { 1.0 } else { -1.0 };
                        a[(state ^ (1 << i), state)] = c(sign);
                    }
                }
                a
            })
            .collect();
        Ok(Self { n_modes, annihilators })
    }

    pub fn dim(&self) -> usize {
        1 << (2 * self.n_modes)
    }

    pub fn b(&self, m: usize) -> &CMat {
        &self.annihilators[m]
    }

    pub fn d(&self, m: usize) -> &CMat {
        &self.annihilators[self.n_modes + m]
    }

    /// `psi_a`: `b_a` for `a < n`, `d_{a-n}^dagger` otherwise.
    pub fn psi(&self, a: usize) -> CMat {
        if a < self.n_modes {
            self.b(a).clone()
        } else {
            self.d(a - self.n_modes).adjoint()
        }
    }

    pub fn vacuum(&self) -> DVector<Complex64> {
        let mut v = DVector::zeros(self.dim());
        v[0] = c(1.0);
        v
    }

    /// `sum_ab h_ab psi_a^dagger psi_b`.
    pub fn many_body_hamiltonian(&self, h: &CMat) -> CMat {
        let k = 2 * self.n_modes;
        let psi: Vec<CMat> = (0..k).map(|a| self.psi(a)).collect();
        let mut out = CMat::zeros(self.dim(), self.dim());
        for a in 0..k {
            let ad = psi[a].adjoint();
            for b in 0..k {
                if h[(a, b)] != Complex64::default() {
                    out += &ad * &psi[b] * h[(a, b)];
                }
            }
        }
        out
    }

    /// `Phi_s` at every slot for the mode functions `w`.
    pub fn fields(&self, w: &CMat) -> Vec<CMat> {
        let n = self.n_modes;
        (0..2 * n)
            .map(|s| {
                let mut f = CMat::zeros(self.dim(), self.dim());
                for m in 0..n {
                    f += self.b(m) * w[(s, m)];
                    f += self.d(m) * w[(s, n + m)];
                }
                f
            })
            .collect()
    }

    /// `sum g+ b^dagger + g- d^dagger` applied to the vacuum.
    pub fn packet_state(&self, g_plus: &[Complex64], g_minus: &[Complex64]) -> DVector<Complex64> {
        let mut op = CMat::zeros(self.dim(), self.dim());
        for m in 0..self.n_modes {
            op += self.b(m).adjoint() * g_plus[m];
            op += self.d(m).adjoint() * g_minus[m];
        }
        op * self.vacuum()
    }

    /// Largest deviation from the canonical anticommutation relations
    /// `{a_i, a_j^dagger} = delta_ij`, `{a_i, a_j} = 0` over all mode pairs.
    pub fn anticommutator_defect(&self) -> f64 {
        let k = 2 * self.n_modes;
        let id = CMat::identity(self.dim(), self.dim());
        let mut worst: f64 = 0.0;
        for i in 0..k {
            for j in 0..k {
                let a = &self.annihilators[i];
                let bd = self.annihilators[j].adjoint();
                let mut ac = a * &bd + &bd * a;
                if i == j {
                    ac -= &id;
                }
                worst = worst.max(ac.camax());
                let b = &self.annihilators[j];
                worst = worst.max((a * b + b * a).camax());
            }
        }
        worst
    }
}

fn heisenberg(op: &CMat, evo: &CMat) -> CMat {
    evo.adjoint() * op * evo
}

fn expectation(state: &DVector<Complex64>, op: &CMat) -> Complex64 {
    state.dotc(&(op * state))
}

/// Site density operators `sum_c Phi_{jc}^dagger Phi_{jc}` at every site.
fn density_operators(fields: &[CMat]) -> Vec<CMat> {
    (0..fields.len() / 2)
        .map(|j| fields[2 * j].adjoint() * &fields[2 * j] + fields[2 * j + 1].adjoint() * &fields[2 * j + 1])
        .collect()
}

/// `<chi| Phi^dagger(t, x) Phi(t, x) |chi>` at every site, with the state
/// evolved by the exponential of the many-body Hamiltonian.
pub fn exact_density(model: &ToyModel, t: f64) -> Result<Vec<f64>> {
    let fock = FockSpace::new(model.n_modes)?;
    let hmb = fock.many_body_hamiltonian(&model.hamiltonian);
    let state = hermitian_exp(&hmb, t) * fock.packet_state(&model.g_plus, &model.g_minus);
    let rho = density_operators(&fock.fields(&model.modes));
    Ok(rho.iter().map(|r| expectation(&state, r).re).collect())
}

/// Vacuum density `<0| Phi^dagger(t, x) Phi(t, x) |0>` at every site.
pub fn exact_vacuum_density(model: &ToyModel, t: f64) -> Result<Vec<f64>> {
    let fock = FockSpace::new(model.n_modes)?;
    let hmb = fock.many_body_hamiltonian(&model.hamiltonian);
    let state = hermitian_exp(&hmb, t) * fock.vacuum();
    let rho = density_operators(&fock.fields(&model.modes));
    Ok(rho.iter().map(|r| expectation(&state, r).re).collect())
}

/// Largest deviation of the equal-time field anticommutators
/// `{Phi_s(t), Phi_r(t)^dagger} = delta_sr` and `{Phi_s(t), Phi_r(t)} = 0`.
pub fn field_anticommutator_defect(model: &ToyModel, t: f64) -> Result<f64> {
    let fock = FockSpace::new(model.n_modes)?;
    let evo = hermitian_exp(&fock.many_body_hamiltonian(&model.hamiltonian), t);
    let fields: Vec<CMat> = fock.fields(&model.modes).iter().map(|f| heisenberg(f, &evo)).collect();
    let id = CMat::identity(fock.dim(), fock.dim());
    let mut worst: f64 = 0.0;
    for (s, fs) in fields.iter().enumerate() {
        for (r, fr) in fields.iter().enumerate() {
            let frd = fr.adjoint();
            let mut ac = fs * &frd + &frd * fs;
            if s == r {
                ac -= &id;
            }
            worst = worst.max(ac.camax());
            worst = worst.max((fs * fr + fr * fs).camax());
        }
    }
    Ok(worst)
}

/// Both sides of the beyond-cone identity for an intervention `f` on
/// sites and a density probe at site `probe` and time `t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CausalityIdentity {
    /// `<chi| O |chi>` with `O = sum_x f(x) Phi^dagger(0, x) Phi(0, x)`.
    pub zzz: f64,
    /// `<chi| O'(t) O |chi>`.
    pub lhs: Complex64,
    /// `<0| O'(t) |0>`.
    pub vacuum: f64,
    /// `|<chi| sum f Phi^dagger O' Phi |chi> - <0|O'|0> sum f |chi|^2|`: the
    /// steps that need no space-like separation.
    pub algebraic_residual: f64,
    /// `|<chi| O' O |chi> - <0| O' |0>|`.
    pub full_defect: f64,
}

pub fn exact_causality_identity(model: &ToyModel, f: &[f64], probe: usize, t: f64) -> Result<CausalityIdentity> {
    let n = model.n_modes;
    if f.len() != n {
        return Err(Error::LengthMismatch { expected: n, got: f.len() });
    }
    if probe >= n {
        return Err(Error::InvalidParameter(format!("probe site {probe} outside 0..{n}")));
    }
    if let Some((j, v)) = f.iter().enumerate().find(|(_, v)| **v < 0.0) {
        return Err(Error::NegativeProfile { x: j as f64, value: *v });
    }
    let fock = FockSpace::new(n)?;
    let fields = fock.fields(&model.modes);
    let rho = density_operators(&fields);
    let evo = hermitian_exp(&fock.many_body_hamiltonian(&model.hamiltonian), t);
    let o_prime = heisenberg(&rho[probe], &evo);
    let mut o = CMat::zeros(fock.dim(), fock.dim());
    for (j, fj) in f.iter().enumerate() {
        o += &rho[j] * c(*fj);
    }
    let chi = fock.packet_state(&model.g_plus, &model.g_minus);
    let vac = fock.vacuum();
    let zzz = expectation(&chi, &o).re;
    let lhs = expectation(&chi, &(&o_prime * &o));
    let vacuum = expectation(&vac, &o_prime).re;
    let mut reordered = CMat::zeros(fock.dim(), fock.dim());
    for (j, fj) in f.iter().enumerate() {
        for comp in 0..2 {
            let phi = &fields[2 * j + comp];
            reordered += phi.adjoint() * &o_prime * phi * c(*fj);
        }
    }
    let packet = model.packet();
    let weight: f64 = (0..n)
        .map(|j| f[j] * (packet.upper[j].norm_sqr() + packet.lower[j].norm_sqr()))
        .sum();
    let algebraic_residual = (expectation(&chi, &reordered) - c(vacuum * weight)).norm();
    Ok(CausalityIdentity {
        zzz,
        lhs,
        vacuum,
        algebraic_residual,
        full_defect: (lhs - c(vacuum)).norm(),
    })
}
