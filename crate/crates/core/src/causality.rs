//! Light-cone bookkeeping and the beyond-cone independence test: the density
//! at space-like separated points must not depend on how the initial packet
//! was reshaped.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::basis::{ModeBasis, WavepacketSpec};
use crate::density::{wavepacket_terms, Evolution, ModeSpace};
use crate::error::{Error, Result};
use crate::field::SpinorField;
use crate::grid::{Grid, C};
use crate::propagator::SplitStepper;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LightCone {
    pub x_edge: f64,
    /// Left edge of the support.
    pub x_back: f64,
}

impl LightCone {
    pub fn from_packet(spec: &WavepacketSpec) -> Self {
        Self {
            x_edge: spec.right_edge(),
            x_back: spec.support().0,
        }
    }

    pub fn front(&self, t: f64) -> f64 {
        self.x_edge + C * t
    }

    /// Backward front after wrapping through the periodic box; points
    /// between `front(t)` and this are space-like to the whole support.
    pub fn wrapped_back(&self, t: f64, grid: &Grid) -> f64 {
        self.x_back - C * t + grid.length()
    }
}

/// Positive reshaping `f(x)` of the initial packet on its support.
#[derive(Debug, Clone, PartialEq)]
pub enum Intervention {
    Identity,
    /// `sqrt(2) theta(x - x0)`: keeps the right half of the packet.
    RightHalf,
    /// `1 + amplitude exp(-(x - center)^2 / (2 width^2))`.
    GaussianBump { center: f64, width: f64, amplitude: f64 },
    /// Arbitrary profile tabulated on the grid.
    Tabulated(Vec<f64>),
}

impl Intervention {
    pub fn name(&self) -> String {
        match self {
            Intervention::Identity => "identity".into(),
            Intervention::RightHalf => "right_half".into(),
            Intervention::GaussianBump { .. } => "gaussian_bump".into(),
            Intervention::Tabulated(_) => "tabulated".into(),
        }
    }

    /// `f` at every grid point; one outside the packet support.
    pub fn profile(&self, grid: &Grid, packet: &WavepacketSpec) -> Result<Vec<f64>> {
        let values: Vec<f64> = match self {
            Intervention::Identity => vec![1.0; grid.len()],
            Intervention::RightHalf => grid
                .positions()
                .map(|x| if x >= packet.x0 { 2f64.sqrt() } else { 0.0 })
                .collect(),
            Intervention::GaussianBump {
                center,
                width,
                amplitude,
            } => grid
                .positions()
                .map(|x| 1.0 + amplitude * (-(x - center).powi(2) / (2.0 * width * width)).exp())
                .collect(),
            Intervention::Tabulated(v) => {
                if v.len() != grid.len() {
                    return Err(Error::LengthMismatch {
                        expected: grid.len(),
                        got: v.len(),
                    });
                }
                v.clone()
            }
        };
        let mut out = Vec::with_capacity(grid.len());
        for (x, f) in grid.positions().zip(values) {
            if !packet.contains(x) {
                out.push(1.0);
            } else if f < 0.0 || !f.is_finite() {
                return Err(Error::NegativeProfile { x, value: f });
            } else {
                out.push(f);
            }
        }
        Ok(out)
    }

    /// The three reshapings used by the causality sweep.
    pub fn standard_set(packet: &WavepacketSpec) -> Vec<Intervention> {
        vec![
            Intervention::Identity,
            Intervention::RightHalf,
            Intervention::GaussianBump {
                center: packet.x0 + 0.25 * packet.width,
                width: 0.3 * packet.width,
                amplitude: 1.0,
            },
        ]
    }
}

/// Reshapes `field` pointwise by the profile and restores unit norm.
pub fn apply_intervention(
    field: &SpinorField,
    intervention: &Intervention,
    grid: &Grid,
    packet: &WavepacketSpec,
) -> Result<SpinorField> {
    field.check_grid(grid)?;
    let f = intervention.profile(grid, packet)?;
    let mut out = field.clone();
    for (j, fj) in f.iter().enumerate() {
        out.upper[j] *= fj;
        out.lower[j] *= fj;
    }
    let norm = out.norm_sqr(grid);
    if norm <= 0.0 {
        return Err(Error::ZeroNorm);
    }
    out.scale(1.0 / norm.sqrt());
    Ok(out)
}

pub fn front_overlay(cone: &LightCone, t: f64) -> f64 {
    cone.front(t)
}

/// Probe times and distances beyond the front, in grid spacings.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbeSet {
    pub times: Vec<f64>,
    pub margins: Vec<usize>,
}

impl ProbeSet {
    /// Margins of 2, 5 and 10 spacings at a third, two thirds and all of
    /// `t_final`, rounded to whole steps.
    pub fn standard(t_final: f64, dt: f64) -> Self {
        let steps = (t_final / dt).round() as usize;
        let times = [steps / 3, 2 * steps / 3, steps]
            .iter()
            .map(|s| *s as f64 * dt)
            .collect();
        Self {
            times,
            margins: vec![2, 5, 10],
        }
    }
}

/// First grid index strictly beyond `front` by at least `margin` spacings.
pub fn probe_index(grid: &Grid, front: f64, margin: usize) -> Result<usize> {
    let target = front + margin as f64 * grid.dx();
    let j = ((target - grid.x_min()) / grid.dx() - 1e-9).ceil();
    if j < 0.0 || j >= grid.len() as f64 {
        return Err(Error::InvalidParameter(format!(
            "probe at {target} lies outside the box [{}, {})",
            grid.x_min(),
            grid.x_max()
        )));
    }
    let j = j as usize;
    if grid.x(j) <= front {
        return Err(Error::ProbeInsideCone {
            t: f64::NAN,
            x: grid.x(j),
            front,
        });
    }
    Ok(j)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProbeResult {
    pub t: f64,
    pub margin: usize,
    pub x: f64,
    pub front: f64,
    /// `rho - rho_vac` at the probe for each intervention.
    pub wavepacket: Vec<f64>,
    /// Largest pairwise difference of the total density between interventions.
    pub max_pair_diff: f64,
    /// Largest `|rho - rho_vac|` over interventions.
    pub max_beyond_cone: f64,
    pub threshold: f64,
}

impl ProbeResult {
    pub fn passes(&self) -> bool {
        self.max_pair_diff <= self.threshold && self.max_beyond_cone <= self.threshold
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CausalityReport {
    pub interventions: Vec<String>,
    /// Largest density outside the cone, two spacings clear of both the
    /// forward and the wrapped backward front, of the
    /// reshaped packets evolved without potential, at each probe time.
    pub floor: Vec<f64>,
    /// Largest vacuum density at each probe time, when it was computed.
    pub vacuum_peak: Option<Vec<f64>>,
    pub probes: Vec<ProbeResult>,
}

impl CausalityReport {
    /// Worst pairwise difference over probes at least `min_margin` spacings out.
    pub fn max_defect(&self, min_margin: usize) -> f64 {
        self.probes
            .iter()
            .filter(|p| p.margin >= min_margin)
            .map(|p| p.max_pair_diff.max(p.max_beyond_cone))
            .fold(0.0, f64::max)
    }

    pub fn passes(&self, min_margin: usize) -> bool {
        self.probes.iter().filter(|p| p.margin >= min_margin).all(ProbeResult::passes)
    }
}

/// Pass threshold at one time: `max(1e-6 max rho_vac, 3 floor)`.
pub fn threshold(vacuum_peak: Option<f64>, floor: f64) -> f64 {
    let rel = vacuum_peak.map_or(0.0, |v| 1e-6 * v);
    rel.max(3.0 * floor)
}

fn wavepacket_density<E: Evolution>(
    basis: &ModeBasis,
    evolution: &E,
    field: &SpinorField,
    times: &[f64],
) -> Result<Vec<Vec<f64>>> {
    let (gp, gm) = ModeSpace::project(basis, field)?;
    Ok(wavepacket_terms(basis, evolution, &gp, &gm, times)?
        .into_iter()
        .map(|w| (0..w.rho1.len()).map(|j| w.rho1[j] + w.rho2[j] + w.rho3[j]).collect())
        .collect())
}

/// Runs every intervention and compares the densities at the probes.
/// `vacuum_peak`, when given, holds `max rho_vac` at each probe time.
pub fn causality_defect(
    basis: &ModeBasis,
    stepper: &SplitStepper,
    packet: &WavepacketSpec,
    interventions: &[Intervention],
    probes: &ProbeSet,
    vacuum_peak: Option<&[f64]>,
) -> Result<CausalityReport> {
    let grid = basis.grid();
    let cone = LightCone::from_packet(packet);
    if let Some(v) = vacuum_peak {
        if v.len() != probes.times.len() {
            return Err(Error::LengthMismatch {
                expected: probes.times.len(),
                got: v.len(),
            });
        }
    }
    let mut indices = Vec::new();
    for &t in &probes.times {
        for &m in &probes.margins {
            let j = probe_index(grid, cone.front(t), m).map_err(|e| match e {
                Error::ProbeInsideCone { x, front, .. } => Error::ProbeInsideCone { t, x, front },
                other => other,
            })?;
            let back = cone.wrapped_back(t, grid);
            if grid.x(j) >= back {
                return Err(Error::ProbeInsideCone { t, x: grid.x(j), front: back });
            }
            indices.push(j);
        }
    }
    let initial = crate::basis::initial_wavepacket(packet, grid)?;
    let free = SplitStepper::free(basis, stepper.dt())?;
    let reshaped = interventions
        .iter()
        .map(|iv| apply_intervention(&initial, iv, grid, packet))
        .collect::<Result<Vec<_>>>()?;
    // the same reshaped packets evolved without potential set the floor
    let free_runs: Vec<Vec<Vec<f64>>> = reshaped
        .par_iter()
        .map(|f| wavepacket_density(basis, &free, f, &probes.times))
        .collect::<Result<_>>()?;
    let floor: Vec<f64> = probes
        .times
        .iter()
        .enumerate()
        .map(|(ti, &t)| {
            let from = probe_index(grid, cone.front(t), 2).unwrap_or(grid.len());
            let back = cone.wrapped_back(t, grid) - 2.0 * grid.dx();
            let to = (from..grid.len()).find(|&j| grid.x(j) >= back).unwrap_or(grid.len());
            free_runs
                .iter()
                .flat_map(|r| r[ti][from..to.max(from)].iter())
                .fold(0.0, |a: f64, b| a.max(b.abs()))
        })
        .collect();
    let runs: Vec<Vec<Vec<f64>>> = reshaped
        .par_iter()
        .map(|f| wavepacket_density(basis, stepper, f, &probes.times))
        .collect::<Result<_>>()?;
    let mut out = Vec::new();
    let mut k = 0;
    for (ti, &t) in probes.times.iter().enumerate() {
        let thr = threshold(vacuum_peak.map(|v| v[ti]), floor[ti]);
        for &m in &probes.margins {
            let j = indices[k];
            k += 1;
            let values: Vec<f64> = runs.iter().map(|r| r[ti][j]).collect();
            let mut diff: f64 = 0.0;
            for a in 0..values.len() {
                for b in a + 1..values.len() {
                    diff = diff.max((values[a] - values[b]).abs());
                }
            }
            out.push(ProbeResult {
                t,
                margin: m,
                x: grid.x(j),
                front: cone.front(t),
                max_beyond_cone: values.iter().fold(0.0, |a: f64, b| a.max(b.abs())),
                wavepacket: values,
                max_pair_diff: diff,
                threshold: thr,
            });
        }
    }
    Ok(CausalityReport {
        interventions: interventions.iter().map(Intervention::name).collect(),
        floor,
        vacuum_peak: vacuum_peak.map(<[f64]>::to_vec),
        probes: out,
    })
}

/// Largest `|psi|^2` of `field` beyond `x`.
pub fn leakage_beyond(field: &SpinorField, grid: &Grid, x: f64) -> f64 {
    grid.positions()
        .zip(field.upper.iter().zip(&field.lower))
        .filter(|(xj, _)| *xj > x)
        .map(|(_, (u, l)): (f64, (&Complex64, &Complex64))| u.norm_sqr() + l.norm_sqr())
        .fold(0.0, f64::max)
}
