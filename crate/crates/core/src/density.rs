//! Second-quantized charge density of a one-particle state evolving in an
//! external potential, split into vacuum and wavepacket pieces.
//!
//! The initial state is the wavepacket excitation of the free vacuum built
//! from the coefficients `g+` (particle modes) and `g-` (antiparticle modes).
//! Everything is expressed through two evolved auxiliary fields,
//! `phi+ = U chi+` with `chi+ = sum g+ v` and `phi- = U chi-c` with
//! `chi-c = sum conj(g-) w`, and their particle/antiparticle projections:
//!
//! ```text
//! A+ = P+ phi+     B+ = P- phi+     A- = P+ phi-     B- = P- phi-
//! rho1 = rho_vac,e + |A+|^2 - |A-|^2
//! rho2 = rho_vac,p + |B-c|^2 - |B+c|^2
//! rho3 = 2 Re(A+^dagger B-c) - 2 Re(A-^dagger B+c)
//! ```
//!
//! where `Bc` denotes the antiparticle part re-synthesized from conjugated
//! coefficients. The vacuum parts sum, over every source mode, the amplitude
//! that the evolution carries into the opposite-energy subspace.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::basis::ModeBasis;
use crate::error::{Error, Result};
use crate::field::SpinorField;
use crate::propagator::{PropagatorMatrix, SplitStepper};

/// A finite set of orthonormal particle and antiparticle modes over a set of
/// sites carrying two spinor components each.
pub trait ModeSpace: Sync {
    /// Number of particle modes (equal to the number of antiparticle modes).
    fn modes(&self) -> usize;
    /// Number of sites.
    fn sites(&self) -> usize;
    /// Measure attached to one site when integrating densities; synthesized
    /// fields are normalized so that `sum |psi_j|^2 * measure` is their norm.
    fn site_measure(&self) -> f64;
    /// Orthonormal coefficients `(<v_m|psi>, <w_m|psi>)`.
    fn project(&self, field: &SpinorField) -> Result<(Vec<Complex64>, Vec<Complex64>)>;
    /// `sum_m plus_m v_m + minus_m w_m` for orthonormal coefficients.
    fn synthesize(&self, plus: Option<&[Complex64]>, minus: Option<&[Complex64]>) -> Result<SpinorField>;
    /// Site index of the parity image, when the space has one.
    fn mirror_site(&self, _j: usize) -> Option<usize> {
        None
    }
    /// Mode index of the parity image, when the space has one.
    fn mirror_mode(&self, _m: usize) -> Option<usize> {
        None
    }

    /// Unit-normalized particle (`index < modes`) or antiparticle mode.
    fn unit_mode(&self, index: usize) -> Result<SpinorField> {
        let n = self.modes();
        let mut c = vec![Complex64::default(); n];
        if index < n {
            c[index] = Complex64::new(1.0, 0.0);
            self.synthesize(Some(&c), None)
        } else {
            c[index - n] = Complex64::new(1.0, 0.0);
            self.synthesize(None, Some(&c))
        }
    }
}

impl ModeSpace for ModeBasis {
    fn modes(&self) -> usize {
        self.len()
    }

    fn sites(&self) -> usize {
        self.len()
    }

    fn site_measure(&self) -> f64 {
        self.grid().dx()
    }

    fn project(&self, field: &SpinorField) -> Result<(Vec<Complex64>, Vec<Complex64>)> {
        let s = self.grid().dp().sqrt();
        let c = ModeBasis::project(self, field)?;
        Ok((
            c.g_plus.into_iter().map(|z| z * s).collect(),
            c.g_minus.into_iter().map(|z| z * s).collect(),
        ))
    }

    fn synthesize(&self, plus: Option<&[Complex64]>, minus: Option<&[Complex64]>) -> Result<SpinorField> {
        let s = 1.0 / self.grid().dp().sqrt();
        let scale = |c: &[Complex64]| c.iter().map(|z| z * s).collect::<Vec<_>>();
        let plus = plus.map(scale);
        let minus = minus.map(scale);
        ModeBasis::synthesize(self, plus.as_deref(), minus.as_deref())
    }

    fn mirror_site(&self, j: usize) -> Option<usize> {
        self.grid().is_symmetric().then(|| self.grid().mirror_point(j))
    }

    fn mirror_mode(&self, m: usize) -> Option<usize> {
        self.grid().is_symmetric().then(|| self.grid().mirror_mode(m))
    }
}

/// Single-particle time evolution `U(t)` acting on fields.
pub trait Evolution: Sync {
    /// Fields at each of the increasing `times`, plus the largest density
    /// seen in the edge bands along the way (zero when not monitored).
    fn evolve_many(&self, field: &SpinorField, times: &[f64]) -> Result<(Vec<SpinorField>, f64)>;

    /// Whether `U` commutes with the parity map of the mode space.
    fn parity_symmetric(&self) -> bool {
        false
    }
}

impl Evolution for SplitStepper {
    fn evolve_many(&self, field: &SpinorField, times: &[f64]) -> Result<(Vec<SpinorField>, f64)> {
        let steps = times
            .iter()
            .map(|t| self.steps_for(*t))
            .collect::<Result<Vec<_>>>()?;
        let mut out = Vec::with_capacity(times.len());
        let edge = self.evolve_through(field, &steps, |_, f| {
            out.push(f.clone());
            Ok(())
        })?;
        Ok((out, edge))
    }

    fn parity_symmetric(&self) -> bool {
        self.is_parity_symmetric()
    }
}

/// Evolution by stored propagator matrices.
#[derive(Debug, Clone)]
pub struct MatrixEvolution<'a> {
    pub basis: &'a ModeBasis,
    pub matrices: &'a [PropagatorMatrix],
}

impl MatrixEvolution<'_> {
    fn apply(&self, m: &PropagatorMatrix, field: &SpinorField) -> Result<SpinorField> {
        let n = m.n;
        let (plus, minus) = ModeSpace::project(self.basis, field)?;
        let mut op = vec![Complex64::default(); n];
        let mut om = vec![Complex64::default(); n];
        for r in 0..n {
            let row = r * n;
            let mut sp = Complex64::default();
            let mut sm = Complex64::default();
            for k in 0..n {
                sp += m.vv[row + k] * plus[k] + m.vw[row + k] * minus[k];
                sm += m.wv[row + k] * plus[k] + m.ww[row + k] * minus[k];
            }
            op[r] = sp;
            om[r] = sm;
        }
        ModeSpace::synthesize(self.basis, Some(&op), Some(&om))
    }
}

impl Evolution for MatrixEvolution<'_> {
    fn evolve_many(&self, field: &SpinorField, times: &[f64]) -> Result<(Vec<SpinorField>, f64)> {
        let fields = times
            .iter()
            .map(|t| {
                let m = self
                    .matrices
                    .iter()
                    .find(|m| (m.t - t).abs() <= 1e-12 * t.abs().max(1e-300))
                    .ok_or_else(|| Error::InvalidParameter(format!("no propagator stored for t = {t}")))?;
                self.apply(m, field)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok((fields, 0.0))
    }
}

/// Charge density at one time, decomposed into its three terms.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityDecomposition {
    pub t: f64,
    pub measure: f64,
    pub rho1: Vec<f64>,
    pub rho2: Vec<f64>,
    pub rho3: Vec<f64>,
    /// Electron part of the vacuum density (contained in `rho1`).
    pub vac_electron: Vec<f64>,
    /// Positron part of the vacuum density (contained in `rho2`).
    pub vac_positron: Vec<f64>,
    /// False when the vacuum sum was skipped and the vacuum parts are zero.
    pub vacuum_computed: bool,
    /// Weight moved across the energy gap; the wavepacket integrates to
    /// `norm - 2 blocked`.
    pub blocked: f64,
    /// Largest edge-band density of the evolved wavepacket fields.
    pub edge_max: f64,
}

impl DensityDecomposition {
    /// Adds vacuum terms to a decomposition computed without them.
    pub fn with_vacuum(mut self, vacuum: VacuumTerms) -> Result<Self> {
        if self.vacuum_computed {
            return Err(Error::InvalidParameter("vacuum terms already present".into()));
        }
        for v in [&vacuum.electron, &vacuum.positron] {
            if v.len() != self.len() {
                return Err(Error::LengthMismatch {
                    expected: self.len(),
                    got: v.len(),
                });
            }
        }
        for j in 0..self.len() {
            self.rho1[j] += vacuum.electron[j];
            self.rho2[j] += vacuum.positron[j];
        }
        self.vac_electron = vacuum.electron;
        self.vac_positron = vacuum.positron;
        self.vacuum_computed = true;
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.rho1.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rho1.is_empty()
    }

    pub fn rho_vac(&self) -> Vec<f64> {
        self.vac_electron.iter().zip(&self.vac_positron).map(|(a, b)| a + b).collect()
    }

    pub fn rho_total(&self) -> Vec<f64> {
        (0..self.len()).map(|j| self.rho1[j] + self.rho2[j] + self.rho3[j]).collect()
    }

    /// `rho_total - rho_vac`.
    pub fn rho_wp(&self) -> Vec<f64> {
        (0..self.len())
            .map(|j| {
                self.rho1[j] - self.vac_electron[j] + self.rho2[j] - self.vac_positron[j] + self.rho3[j]
            })
            .collect()
    }

    pub fn integrate(&self, rho: &[f64]) -> f64 {
        rho.iter().sum::<f64>() * self.measure
    }

    /// Smallest value of `rho_total` and `rho_vac` (should not be negative).
    pub fn min_density(&self) -> f64 {
        self.rho_total()
            .into_iter()
            .chain(self.rho_vac())
            .fold(f64::INFINITY, f64::min)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParticleCount {
    pub n_total: f64,
    pub n_vac: f64,
    pub electrons_from_pairs: f64,
}

impl ParticleCount {
    /// `N_total - N_vac - 1`.
    pub fn wavepacket_defect(&self) -> f64 {
        self.n_total - self.n_vac - 1.0
    }
}

pub fn particle_count(d: &DensityDecomposition) -> ParticleCount {
    let n_total = d.integrate(&d.rho_total());
    let n_vac = d.integrate(&d.rho_vac());
    ParticleCount {
        n_total,
        n_vac,
        electrons_from_pairs: n_vac / 2.0,
    }
}

/// Wavepacket part of the decomposition at each output time.
#[derive(Debug, Clone, PartialEq)]
pub struct WavepacketTerms {
    pub rho1: Vec<f64>,
    pub rho2: Vec<f64>,
    pub rho3: Vec<f64>,
    /// `|P+ U chi-|^2 + |P- U chi+|^2`: weight moved across the energy gap,
    /// which enters the number with a minus sign.
    pub blocked: f64,
    pub edge_max: f64,
}

fn norm_sqr(c: &[Complex64]) -> f64 {
    c.iter().map(Complex64::norm_sqr).sum()
}

fn conj(c: &[Complex64]) -> Vec<Complex64> {
    c.iter().map(|z| z.conj()).collect()
}

/// Wavepacket terms for the initial coefficients `(g_plus, g_minus)`
/// (orthonormal normalization) at each of `times`.
pub fn wavepacket_terms<S: ModeSpace, E: Evolution>(
    space: &S,
    evolution: &E,
    g_plus: &[Complex64],
    g_minus: &[Complex64],
    times: &[f64],
) -> Result<Vec<WavepacketTerms>> {
    let chi_plus = space.synthesize(Some(g_plus), None)?;
    let chi_minus_c = space.synthesize(None, Some(&conj(g_minus)))?;
    let (phi_plus, edge_p) = evolution.evolve_many(&chi_plus, times)?;
    let (phi_minus, edge_m) = evolution.evolve_many(&chi_minus_c, times)?;
    let edge_max = edge_p.max(edge_m);
    phi_plus
        .iter()
        .zip(&phi_minus)
        .map(|(fp, fm)| {
            let (a_plus, b_plus) = space.project(fp)?;
            let (a_minus, b_minus) = space.project(fm)?;
            let pv = space.synthesize(Some(&a_plus), None)?;
            let pw = space.synthesize(None, Some(&conj(&b_minus)))?;
            let hv = space.synthesize(Some(&a_minus), None)?;
            let hw = space.synthesize(None, Some(&conj(&b_plus)))?;
            let n = space.sites();
            let mut rho1 = vec![0.0; n];
            let mut rho2 = vec![0.0; n];
            let mut rho3 = vec![0.0; n];
            for j in 0..n {
                let pv2 = pv.upper[j].norm_sqr() + pv.lower[j].norm_sqr();
                let hv2 = hv.upper[j].norm_sqr() + hv.lower[j].norm_sqr();
                let pw2 = pw.upper[j].norm_sqr() + pw.lower[j].norm_sqr();
                let hw2 = hw.upper[j].norm_sqr() + hw.lower[j].norm_sqr();
                let cross_p = pv.upper[j].conj() * pw.upper[j] + pv.lower[j].conj() * pw.lower[j];
                let cross_h = hv.upper[j].conj() * hw.upper[j] + hv.lower[j].conj() * hw.lower[j];
                rho1[j] = pv2 - hv2;
                rho2[j] = pw2 - hw2;
                rho3[j] = 2.0 * cross_p.re - 2.0 * cross_h.re;
            }
            Ok(WavepacketTerms {
                rho1,
                rho2,
                rho3,
                blocked: norm_sqr(&a_minus) + norm_sqr(&b_plus),
                edge_max,
            })
        })
        .collect()
}

/// Vacuum densities (electron, positron) at each time.
#[derive(Debug, Clone, PartialEq)]
pub struct VacuumTerms {
    pub electron: Vec<f64>,
    pub positron: Vec<f64>,
}

/// Source columns per work unit; fixed so the summation order does not depend
/// on the thread count.
pub const COLUMN_CHUNK: usize = 8;

/// Evolves every basis column and accumulates the vacuum densities at each
/// of `times`. When the evolution is parity symmetric and the space has a
/// parity map, only one column of each mirror pair is evolved and its
/// contribution is added at both `x` and `-x`.
pub fn vacuum_terms<S: ModeSpace, E: Evolution>(space: &S, evolution: &E, times: &[f64]) -> Result<Vec<VacuumTerms>> {
    let n = space.modes();
    let sites = space.sites();
    let use_parity = evolution.parity_symmetric()
        && space.mirror_mode(0).is_some()
        && space.mirror_site(0).is_some();
    // (column, mirrored weight): mirrored columns add f(x) + f(-x)
    let mut plan: Vec<(usize, bool)> = Vec::with_capacity(2 * n);
    for col in 0..2 * n {
        let m = col % n;
        if use_parity {
            let mm = space.mirror_mode(m).unwrap();
            if mm == m {
                plan.push((col, false));
            } else if mm < m {
                plan.push((col, true));
            }
        } else {
            plan.push((col, false));
        }
    }
    let mirror: Vec<usize> = if use_parity {
        (0..sites).map(|j| space.mirror_site(j).unwrap()).collect()
    } else {
        Vec::new()
    };
    let zero = || {
        times
            .iter()
            .map(|_| VacuumTerms {
                electron: vec![0.0; sites],
                positron: vec![0.0; sites],
            })
            .collect::<Vec<_>>()
    };
    let partials: Vec<Vec<VacuumTerms>> = plan
        .par_chunks(COLUMN_CHUNK)
        .map(|chunk| {
            let mut acc = zero();
            for &(col, mirrored) in chunk {
                let source = space.unit_mode(col)?;
                let (evolved, _) = evolution.evolve_many(&source, times)?;
                for (ti, f) in evolved.iter().enumerate() {
                    let (plus, minus) = space.project(f)?;
                    let (target, g) = if col < n {
                        (&mut acc[ti].positron, space.synthesize(None, Some(&conj(&minus)))?)
                    } else {
                        (&mut acc[ti].electron, space.synthesize(Some(&plus), None)?)
                    };
                    for j in 0..sites {
                        let r = g.upper[j].norm_sqr() + g.lower[j].norm_sqr();
                        target[j] += r;
                        if mirrored {
                            target[mirror[j]] += r;
                        }
                    }
                }
            }
            Ok(acc)
        })
        .collect::<Result<_>>()?;
    let mut total = zero();
    for part in partials {
        for (t, p) in total.iter_mut().zip(part) {
            t.electron.iter_mut().zip(&p.electron).for_each(|(a, b)| *a += b);
            t.positron.iter_mut().zip(&p.positron).for_each(|(a, b)| *a += b);
        }
    }
    Ok(total)
}

/// Full decomposition at each of `times`; the vacuum sum is skipped when
/// `with_vacuum` is false.
pub fn decompose<S: ModeSpace, E: Evolution>(
    space: &S,
    evolution: &E,
    g_plus: &[Complex64],
    g_minus: &[Complex64],
    times: &[f64],
    with_vacuum: bool,
) -> Result<Vec<DensityDecomposition>> {
    let wp = wavepacket_terms(space, evolution, g_plus, g_minus, times)?;
    let vac = if with_vacuum {
        Some(vacuum_terms(space, evolution, times)?)
    } else {
        None
    };
    let measure = space.site_measure();
    Ok(wp
        .into_iter()
        .enumerate()
        .map(|(i, w)| {
            let (ve, vp) = match &vac {
                Some(v) => (v[i].electron.clone(), v[i].positron.clone()),
                None => (vec![0.0; w.rho1.len()], vec![0.0; w.rho1.len()]),
            };
            DensityDecomposition {
                t: times[i],
                measure,
                rho1: w.rho1.iter().zip(&ve).map(|(a, b)| a + b).collect(),
                rho2: w.rho2.iter().zip(&vp).map(|(a, b)| a + b).collect(),
                rho3: w.rho3,
                vac_electron: ve,
                vac_positron: vp,
                vacuum_computed: with_vacuum,
                blocked: w.blocked,
                edge_max: w.edge_max,
            }
        })
        .collect())
}

/// Vacuum density from stored propagator matrices, read directly off the
/// off-diagonal blocks.
pub fn vacuum_density(matrix: &PropagatorMatrix, basis: &ModeBasis) -> Result<VacuumTerms> {
    let n = matrix.n;
    let sites = basis.len();
    let mut electron = vec![0.0; sites];
    let mut positron = vec![0.0; sites];
    let mut coeffs = vec![Complex64::default(); n];
    for q in 0..n {
        for p in 0..n {
            coeffs[p] = matrix.vw[p * n + q];
        }
        let g = ModeSpace::synthesize(basis, Some(&coeffs), None)?;
        for j in 0..sites {
            electron[j] += g.upper[j].norm_sqr() + g.lower[j].norm_sqr();
        }
        for p in 0..n {
            coeffs[p] = matrix.wv[p * n + q].conj();
        }
        let g = ModeSpace::synthesize(basis, None, Some(&coeffs))?;
        for j in 0..sites {
            positron[j] += g.upper[j].norm_sqr() + g.lower[j].norm_sqr();
        }
    }
    Ok(VacuumTerms { electron, positron })
}

/// `<X>` of `rho_wp` restricted to `[a, b]`.
pub fn conditional_mean_position(d: &DensityDecomposition, positions: &[f64], region: (f64, f64)) -> Result<f64> {
    let rho = d.rho_wp();
    let (mut mass, mut first) = (0.0, 0.0);
    for (x, r) in positions.iter().zip(&rho) {
        if *x >= region.0 && *x <= region.1 {
            mass += r;
            first += x * r;
        }
    }
    mass *= d.measure;
    first *= d.measure;
    if mass < 1e-12 {
        return Err(Error::NoTransmission { mass });
    }
    Ok(first / mass)
}

/// `int_a^b rho_wp dx`.
pub fn region_mass(d: &DensityDecomposition, positions: &[f64], region: (f64, f64)) -> f64 {
    let rho = d.rho_wp();
    positions
        .iter()
        .zip(&rho)
        .filter(|(x, _)| **x >= region.0 && **x <= region.1)
        .map(|(_, r)| r)
        .sum::<f64>()
        * d.measure
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::barrier::BarrierSpec;
    use crate::grid::{Grid, COMPTON, MC2};
    use crate::propagator::build_propagator_matrices;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_coeffs(n: usize, seed: u64) -> (Vec<Complex64>, Vec<Complex64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut rnd = || Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        let mut gp: Vec<Complex64> = (0..n).map(|_| rnd()).collect();
        let mut gm: Vec<Complex64> = (0..n).map(|_| 0.3 * rnd()).collect();
        let norm: f64 = gp.iter().chain(&gm).map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        gp.iter_mut().chain(gm.iter_mut()).for_each(|z| *z /= norm);
        (gp, gm)
    }

    fn setup(n: usize, height: f64, lo: f64) -> (ModeBasis, SplitStepper) {
        let g = Grid::new(n, lo, 0.1).unwrap();
        let basis = ModeBasis::new(&g);
        let barrier = BarrierSpec {
            height,
            width: 4.0 * COMPTON,
            smoothness: 0.3 * COMPTON,
        };
        let dt = 0.5 / basis.energy(0);
        let stepper = SplitStepper::new(&basis, barrier.sample(&g), dt).unwrap();
        (basis, stepper)
    }

    // sum_m exp(-i E_m t) (g+_m v_m(x) + g-_m w_m(x)) evaluated point by point
    fn free_density(basis: &ModeBasis, gp: &[Complex64], gm: &[Complex64], t: f64) -> Vec<f64> {
        let g = basis.grid();
        let s = (g.dp() / (2.0 * std::f64::consts::PI)).sqrt();
        g.positions()
            .map(|x| {
                let mut up = Complex64::default();
                let mut lo = Complex64::default();
                for m in 0..basis.len() {
                    let e = Complex64::from_polar(s, g.p(m) * x - basis.energy(m) * t);
                    let (u, w) = (basis.particle_spinor(m), basis.antiparticle_spinor(m));
                    up += e * (gp[m] * u[0] + gm[m] * w[0]);
                    lo += e * (gp[m] * u[1] + gm[m] * w[1]);
                }
                up.norm_sqr() + lo.norm_sqr()
            })
            .collect()
    }

    #[test]
    fn free_evolution_matches_plane_wave_sum() {
        let (basis, stepper) = setup(64, 0.0, -0.1);
        let (gp, gm) = random_coeffs(64, 3);
        let times = [0.0, 7.0 * stepper.dt(), 30.0 * stepper.dt()];
        let d = decompose(&basis, &stepper, &gp, &gm, &times, true).unwrap();
        for (di, t) in d.iter().zip(times) {
            let expect = free_density(&basis, &gp, &gm, t);
            let total = di.rho_total();
            for j in 0..64 {
                assert!((total[j] - expect[j]).abs() < 1e-10, "t={t} j={j}");
            }
            assert!(di.rho_vac().iter().all(|v| v.abs() < 1e-20));
            let c = particle_count(di);
            assert!((c.n_total - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn initial_density_is_packet_density() {
        let (basis, stepper) = setup(64, 1.77 * MC2, -0.1);
        let (gp, gm) = random_coeffs(64, 5);
        let d = decompose(&basis, &stepper, &gp, &gm, &[0.0], true).unwrap();
        let chi = ModeSpace::synthesize(&basis, Some(&gp), Some(&gm)).unwrap();
        let rho = chi.density();
        let wp = d[0].rho_wp();
        for j in 0..64 {
            assert!((wp[j] - rho[j]).abs() < 1e-10);
        }
        assert!(d[0].rho_vac().iter().all(|v| v.abs() < 1e-20));
    }

    #[test]
    fn interference_term_integrates_to_zero() {
        let (basis, stepper) = setup(64, 9.0 * MC2, -0.1);
        let (gp, gm) = random_coeffs(64, 8);
        let d = decompose(&basis, &stepper, &gp, &gm, &[40.0 * stepper.dt()], false).unwrap();
        assert!(d[0].integrate(&d[0].rho3).abs() < 1e-10);
        assert!(d[0].rho3.iter().any(|v| v.abs() > 1e-6));
    }

    #[test]
    fn wavepacket_number_loses_twice_the_blocked_weight() {
        let (basis, stepper) = setup(64, 9.0 * MC2, -0.1);
        let (gp, gm) = random_coeffs(64, 9);
        let norm: f64 = gp.iter().chain(&gm).map(|z| z.norm_sqr()).sum();
        let d = decompose(&basis, &stepper, &gp, &gm, &[0.0, 40.0 * stepper.dt()], false).unwrap();
        assert!(d[0].blocked < 1e-28);
        assert!(d[1].blocked > 1e-6);
        for di in &d {
            let c = particle_count(di);
            assert!((c.n_total - c.n_vac - (norm - 2.0 * di.blocked)).abs() < 1e-12);
        }
    }

    #[test]
    fn streamed_and_matrix_paths_agree() {
        let (basis, stepper) = setup(32, 9.0 * MC2, -0.1);
        let (gp, gm) = random_coeffs(32, 11);
        let times = [10.0 * stepper.dt(), 25.0 * stepper.dt()];
        let mats = build_propagator_matrices(&stepper, &basis, &times).unwrap();
        let me = MatrixEvolution {
            basis: &basis,
            matrices: &mats,
        };
        let a = decompose(&basis, &stepper, &gp, &gm, &times, true).unwrap();
        let b = decompose(&basis, &me, &gp, &gm, &times, true).unwrap();
        for (x, y) in a.iter().zip(&b) {
            for (p, q) in x.rho_total().iter().zip(y.rho_total()) {
                assert!((p - q).abs() < 1e-9);
            }
        }
        for (m, x) in mats.iter().zip(&a) {
            let v = vacuum_density(m, &basis).unwrap();
            for j in 0..32 {
                assert!((v.electron[j] - x.vac_electron[j]).abs() < 1e-9);
                assert!((v.positron[j] - x.vac_positron[j]).abs() < 1e-9);
            }
            // integrated vacuum density equals the Frobenius weight of the off-diagonal blocks
            let frob: f64 = m.vw.iter().chain(&m.wv).map(|z| z.norm_sqr()).sum();
            let nv = x.integrate(&x.rho_vac());
            assert!((nv - frob).abs() < 1e-9 * frob.max(1e-12));
            assert!(nv > 1e-6);
        }
    }

    #[test]
    fn parity_shortcut_matches_full_sum() {
        let (basis, stepper) = setup(32, 9.0 * MC2, -0.1);
        assert!(stepper.is_parity_symmetric());
        let times = [20.0 * stepper.dt()];
        struct NoParity<'a>(&'a SplitStepper);
        impl Evolution for NoParity<'_> {
            fn evolve_many(&self, f: &SpinorField, t: &[f64]) -> Result<(Vec<SpinorField>, f64)> {
                self.0.evolve_many(f, t)
            }
        }
        let fast = vacuum_terms(&basis, &stepper, &times).unwrap();
        let full = vacuum_terms(&basis, &NoParity(&stepper), &times).unwrap();
        for j in 0..32 {
            assert!((fast[0].electron[j] - full[0].electron[j]).abs() < 1e-10);
            assert!((fast[0].positron[j] - full[0].positron[j]).abs() < 1e-10);
        }
        // an asymmetric box disables the shortcut
        let (_, skew) = setup(32, 9.0 * MC2, -0.12);
        assert!(!skew.is_parity_symmetric());
    }

    #[test]
    fn vacuum_matches_first_order_expansion_at_short_times() {
        let g = Grid::new(32, -0.1, 0.1).unwrap();
        let basis = ModeBasis::new(&g);
        let barrier = BarrierSpec {
            height: 9.0 * MC2,
            width: 4.0 * COMPTON,
            smoothness: 0.3 * COMPTON,
        };
        let pot = barrier.sample(&g);
        let dt = 1e-3 / basis.energy(0);
        let stepper = SplitStepper::new(&basis, pot.clone(), dt).unwrap();
        // first order: U_vw = -i t <v|V|w>, so N_vac = 2 t^2 sum |<v|V|w>|^2
        let mut weight = 0.0;
        for q in 0..32 {
            let mut f = ModeSpace::unit_mode(&basis, 32 + q).unwrap();
            for j in 0..32 {
                f.upper[j] *= pot[j];
                f.lower[j] *= pot[j];
            }
            let (plus, _) = ModeSpace::project(&basis, &f).unwrap();
            weight += plus.iter().map(|z| z.norm_sqr()).sum::<f64>();
        }
        for k in [2.0, 4.0] {
            let t = k * dt;
            let v = vacuum_terms(&basis, &stepper, &[t]).unwrap();
            let n = (v[0].electron.iter().chain(&v[0].positron).sum::<f64>()) * g.dx();
            let expect = 2.0 * t * t * weight;
            assert!((n / expect - 1.0).abs() < 0.02, "t={t}: {n} vs {expect}");
        }
    }

    #[test]
    fn no_transmission_signal() {
        let (basis, stepper) = setup(32, 0.0, -0.1);
        let mut gp = vec![Complex64::default(); 32];
        gp[16] = Complex64::new(1.0, 0.0);
        let gm = vec![Complex64::default(); 32];
        let d = decompose(&basis, &stepper, &gp, &gm, &[0.0], false).unwrap();
        let xs: Vec<f64> = basis.grid().positions().collect();
        assert!(matches!(
            conditional_mean_position(&d[0], &xs, (0.5, 1.0)),
            Err(Error::NoTransmission { .. })
        ));
        let mean = conditional_mean_position(&d[0], &xs, (-0.1, 0.1)).unwrap();
        let expect = xs.iter().sum::<f64>() / 32.0;
        assert!((mean - expect).abs() < 1e-12);
        assert!((region_mass(&d[0], &xs, (-1.0, 1.0)) - 1.0).abs() < 1e-12);
    }
}
