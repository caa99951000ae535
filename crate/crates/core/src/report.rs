//! Scenario runner and its on-disk outputs.

use std::fs::{self, File};
use std::io::{BufReader, BufWriter};
use std::path::{Path, PathBuf};

use log::info;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::basis::{initial_wavepacket, ModeBasis, ModeKind};
use crate::causality::{causality_defect, CausalityReport, LightCone};
use crate::density::{
    conditional_mean_position, decompose, particle_count, region_mass, vacuum_density, DensityDecomposition,
    Evolution, MatrixEvolution, ModeSpace,
};
use crate::error::{Error, Result};
use crate::propagator::{build_propagator_matrices, PropagatorMatrix, SplitStepper, EDGE_THRESHOLD};
use crate::scenario::{Scenario, Setup};

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Propagator checkpoint: loaded when it exists, otherwise built and written.
    pub checkpoint: Option<PathBuf>,
    /// Skip the causality sweep even when the scenario asks for it.
    pub skip_causality: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TimeSummary {
    pub t: f64,
    pub n_total: f64,
    pub n_vac: f64,
    pub electrons_from_pairs: f64,
    /// `N_total - N_vac`.
    pub n_wavepacket: f64,
    /// Weight moved across the energy gap: `n_wavepacket = 1 - 2 blocked_weight`.
    pub blocked_weight: f64,
    pub rho3_integral: f64,
    pub min_density: f64,
    pub transmitted_mass: f64,
    pub reflected_mass: f64,
    /// Conditional mean position of the transmitted part (absent when nothing is transmitted).
    pub x_tr: Option<f64>,
    pub x_free: f64,
    pub transmitted_peak: Option<f64>,
    pub light_cone_front: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CausalitySummary {
    pub interventions: Vec<String>,
    pub floor_max: f64,
    pub vacuum_peak_max: Option<f64>,
    /// Worst defect over probes at least five spacings beyond the front.
    pub max_defect: f64,
    pub min_threshold: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunSummary {
    pub scenario: String,
    pub n_points: usize,
    pub x_min: f64,
    pub x_max: f64,
    pub dx: f64,
    pub dp: f64,
    pub dt: f64,
    pub steps: usize,
    pub vacuum_computed: bool,
    pub mean_velocity: f64,
    pub negative_energy_weight: f64,
    /// `max |G - I|` of the Gram matrix of evolved basis columns (all of
    /// them with a checkpoint, an evenly spaced sample otherwise).
    pub unitarity_defect: f64,
    pub unitarity_columns: usize,
    pub edge_density_max: f64,
    pub edge_ok: bool,
    pub times: Vec<TimeSummary>,
    pub causality: Option<CausalitySummary>,
}

impl RunSummary {
    pub fn to_text(&self) -> String {
        toml::to_string(self).expect("summary serializes")
    }
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub summary: RunSummary,
    pub positions: Vec<f64>,
    pub densities: Vec<DensityDecomposition>,
    pub free: Vec<DensityDecomposition>,
    pub causality: Option<CausalityReport>,
}

fn union_times(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut all: Vec<f64> = a.iter().chain(b).copied().collect();
    all.sort_by(f64::total_cmp);
    all.dedup_by(|x, y| (*x - *y).abs() <= 1e-12 * x.abs().max(1e-300));
    all
}

fn index_of(times: &[f64], t: f64) -> usize {
    times
        .iter()
        .position(|s| (s - t).abs() <= 1e-12 * t.abs().max(1e-300))
        .expect("time present")
}

/// Gram-matrix defect of the evolved basis columns `cols` at time `t`.
pub fn sampled_unitarity_defect<E: Evolution>(basis: &ModeBasis, evolution: &E, cols: &[usize], t: f64) -> Result<f64> {
    let evolved: Vec<(Vec<Complex64>, Vec<Complex64>)> = cols
        .iter()
        .map(|&c| {
            let f = ModeSpace::unit_mode(basis, c)?;
            let (out, _) = evolution.evolve_many(&f, &[t])?;
            ModeSpace::project(basis, &out[0])
        })
        .collect::<Result<_>>()?;
    let mut worst: f64 = 0.0;
    for (i, a) in evolved.iter().enumerate() {
        for (j, b) in evolved.iter().enumerate().skip(i) {
            let s: Complex64 = a.0.iter().zip(&b.0).chain(a.1.iter().zip(&b.1)).map(|(x, y)| x.conj() * y).sum();
            let target = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((s - target).norm());
        }
    }
    Ok(worst)
}

fn load_or_build(
    path: &Path,
    stepper: &SplitStepper,
    basis: &ModeBasis,
    times: &[f64],
) -> Result<Vec<PropagatorMatrix>> {
    if path.exists() {
        let mats = PropagatorMatrix::read_checkpoint(BufReader::new(File::open(path)?))?;
        for &t in times {
            if !mats.iter().any(|m| m.n == basis.len() && (m.t - t).abs() <= 1e-12 * t.abs().max(1e-300)) {
                return Err(Error::Checkpoint(format!(
                    "{} holds no {}-mode propagator for t = {t}",
                    path.display(),
                    basis.len()
                )));
            }
        }
        info!("loaded {} propagators from {}", mats.len(), path.display());
        return Ok(mats);
    }
    let mats = build_propagator_matrices(stepper, basis, times)?;
    PropagatorMatrix::write_checkpoint(&mats, BufWriter::new(File::create(path)?))?;
    info!("wrote {} propagators to {}", mats.len(), path.display());
    Ok(mats)
}

pub fn run(scenario: &Scenario, options: &RunOptions) -> Result<RunOutput> {
    let Setup {
        grid,
        basis,
        stepper,
        free,
    } = scenario.setup()?;
    let positions: Vec<f64> = grid.positions().collect();
    let chi = initial_wavepacket(&scenario.packet, &grid)?;
    let coeffs = basis.project(&chi)?;
    let (gp, gm) = ModeSpace::project(&basis, &chi)?;
    let probes = if options.skip_causality { None } else { scenario.probes() };
    let probe_times = probes.as_ref().map(|p| p.times.clone()).unwrap_or_default();
    let times = union_times(&scenario.time.outputs, &probe_times);
    let t_final = *times.last().expect("times");
    info!(
        "{}: n = {}, dt = {:e}, {} steps, vacuum = {}",
        scenario.name,
        grid.len(),
        stepper.dt(),
        stepper.steps_for(t_final)?,
        scenario.vacuum
    );

    let n = basis.len();
    let (all, unitarity_defect, unitarity_columns) = match &options.checkpoint {
        Some(path) => {
            let mats = load_or_build(path, &stepper, &basis, &times)?;
            let evolution = MatrixEvolution {
                basis: &basis,
                matrices: &mats,
            };
            let mut d = decompose(&basis, &evolution, &gp, &gm, &times, false)?;
            if scenario.vacuum {
                d = d
                    .into_par_iter()
                    .map(|di| {
                        let m = mats
                            .iter()
                            .find(|m| (m.t - di.t).abs() <= 1e-12 * di.t.abs().max(1e-300))
                            .expect("propagator present");
                        di.with_vacuum(vacuum_density(m, &basis)?)
                    })
                    .collect::<Result<_>>()?;
            }
            let m = mats
                .iter()
                .find(|m| (m.t - t_final).abs() <= 1e-12 * t_final.max(1e-300))
                .expect("final propagator");
            (d, m.unitarity_defect(), 2 * n)
        }
        None => {
            let d = decompose(&basis, &stepper, &gp, &gm, &times, scenario.vacuum)?;
            let cols: Vec<usize> = (0..8).map(|k| (k * 2 * n) / 8 + (k * 37) % (n / 8).max(1)).collect();
            (d, sampled_unitarity_defect(&basis, &stepper, &cols, t_final)?, cols.len())
        }
    };
    let free_d = decompose(&basis, &free, &gp, &gm, &times, false)?;

    let cone = LightCone::from_packet(&scenario.packet);
    let tr = scenario.transmitted_region();
    let rf = scenario.reflected_region();
    let summaries: Vec<TimeSummary> = scenario
        .time
        .outputs
        .iter()
        .map(|&t| {
            let d = &all[index_of(&times, t)];
            let f = &free_d[index_of(&times, t)];
            let count = particle_count(d);
            let wp = d.rho_wp();
            let x_tr = conditional_mean_position(d, &positions, tr).ok();
            let peak = positions
                .iter()
                .zip(&wp)
                .filter(|(x, _)| **x >= tr.0 && **x <= tr.1)
                .max_by(|a, b| a.1.total_cmp(b.1))
                .map(|(x, _)| *x)
                .filter(|_| x_tr.is_some());
            TimeSummary {
                t,
                n_total: count.n_total,
                n_vac: count.n_vac,
                electrons_from_pairs: count.electrons_from_pairs,
                n_wavepacket: d.integrate(&wp),
                blocked_weight: d.blocked,
                rho3_integral: d.integrate(&d.rho3),
                min_density: d.min_density(),
                transmitted_mass: region_mass(d, &positions, tr),
                reflected_mass: region_mass(d, &positions, rf),
                x_tr,
                x_free: conditional_mean_position(f, &positions, (grid.x_min(), grid.x_max()))
                    .unwrap_or(f64::NAN),
                transmitted_peak: peak,
                light_cone_front: cone.front(t),
            }
        })
        .collect();
    let edge = all.iter().map(|d| d.edge_max).fold(0.0, f64::max);

    let causality = match &probes {
        Some(p) => {
            let peaks: Option<Vec<f64>> = scenario.vacuum.then(|| {
                p.times
                    .iter()
                    .map(|&t| all[index_of(&times, t)].rho_vac().into_iter().fold(0.0, f64::max))
                    .collect()
            });
            let mut wide = scenario.clone();
            wide.grid = scenario.causality_grid()?;
            wide.vacuum = false;
            let sweep = if wide.grid == scenario.grid { None } else { Some(wide.setup()?) };
            let (cb, cs) = match &sweep {
                Some(w) => (&w.basis, &w.stepper),
                None => (&basis, &stepper),
            };
            Some(causality_defect(
                cb,
                cs,
                &scenario.packet,
                &scenario.interventions()?,
                p,
                peaks.as_deref(),
            )?)
        }
        None => None,
    };
    let causality_summary = causality.as_ref().map(|r| CausalitySummary {
        interventions: r.interventions.clone(),
        floor_max: r.floor.iter().copied().fold(0.0, f64::max),
        vacuum_peak_max: r.vacuum_peak.as_ref().map(|v| v.iter().copied().fold(0.0, f64::max)),
        max_defect: r.max_defect(5),
        min_threshold: r.probes.iter().map(|p| p.threshold).fold(f64::INFINITY, f64::min),
        pass: r.passes(5),
    });

    let keep: Vec<usize> = scenario.time.outputs.iter().map(|&t| index_of(&times, t)).collect();
    let pick = |v: &[DensityDecomposition]| keep.iter().map(|&i| v[i].clone()).collect::<Vec<_>>();
    Ok(RunOutput {
        summary: RunSummary {
            scenario: scenario.name.clone(),
            n_points: grid.len(),
            x_min: grid.x_min(),
            x_max: grid.x_max(),
            dx: grid.dx(),
            dp: grid.dp(),
            dt: stepper.dt(),
            steps: stepper.steps_for(scenario.final_time())?,
            vacuum_computed: scenario.vacuum,
            mean_velocity: basis.mean_velocity(&coeffs)?,
            negative_energy_weight: coeffs.negative_weight(),
            unitarity_defect,
            unitarity_columns,
            edge_density_max: edge,
            edge_ok: edge <= EDGE_THRESHOLD,
            times: summaries,
            causality: causality_summary,
        },
        positions,
        densities: pick(&all),
        free: pick(&free_d),
        causality,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FreeComparison {
    pub t: f64,
    /// Absent when nothing is transmitted yet.
    pub x_tr: Option<f64>,
    pub x_free: f64,
}

/// Paired runs with and without the barrier at each output time.
pub fn compare_free(scenario: &Scenario) -> Result<Vec<FreeComparison>> {
    let setup = scenario.setup()?;
    let grid = &setup.grid;
    let positions: Vec<f64> = grid.positions().collect();
    let chi = initial_wavepacket(&scenario.packet, grid)?;
    let (gp, gm) = ModeSpace::project(&setup.basis, &chi)?;
    let times = &scenario.time.outputs;
    let with = decompose(&setup.basis, &setup.stepper, &gp, &gm, times, false)?;
    let without = decompose(&setup.basis, &setup.free, &gp, &gm, times, false)?;
    let region = if scenario.barrier.height == 0.0 {
        (grid.x_min(), grid.x_max())
    } else {
        scenario.transmitted_region()
    };
    times
        .iter()
        .zip(with.iter().zip(&without))
        .map(|(&t, (a, b))| {
            let x_tr = match conditional_mean_position(a, &positions, region) {
                Ok(x) => Some(x),
                Err(Error::NoTransmission { .. }) => None,
                Err(e) => return Err(e),
            };
            Ok(FreeComparison {
                t,
                x_tr,
                x_free: conditional_mean_position(b, &positions, (grid.x_min(), grid.x_max()))?,
            })
        })
        .collect()
}

fn fmt(v: f64) -> String {
    format!("{v:e}")
}

/// Writes `density_NNN.csv` per output time, `summary.toml`, `config.toml`
/// and, when present, `causality.csv` into `dir`.
pub fn write_outputs(output: &RunOutput, scenario: &Scenario, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    for (i, d) in output.densities.iter().enumerate() {
        let mut w = csv::Writer::from_path(dir.join(format!("density_{i:03}.csv")))?;
        w.write_record(["x", "rho_total", "rho_vac", "rho_wp", "rho1", "rho2", "rho3"])?;
        let (total, vac, wp) = (d.rho_total(), d.rho_vac(), d.rho_wp());
        for j in 0..d.len() {
            w.write_record([
                fmt(output.positions[j]),
                fmt(total[j]),
                fmt(vac[j]),
                fmt(wp[j]),
                fmt(d.rho1[j]),
                fmt(d.rho2[j]),
                fmt(d.rho3[j]),
            ])?;
        }
        w.flush()?;
    }
    if let Some(r) = &output.causality {
        let mut w = csv::Writer::from_path(dir.join("causality.csv"))?;
        let mut header: Vec<String> = ["t", "margin", "x", "front", "threshold", "max_pair_diff", "max_beyond_cone", "pass"]
            .map(String::from)
            .to_vec();
        header.extend(r.interventions.iter().map(|n| format!("rho_wp_{n}")));
        w.write_record(&header)?;
        for p in &r.probes {
            let mut row = vec![
                fmt(p.t),
                p.margin.to_string(),
                fmt(p.x),
                fmt(p.front),
                fmt(p.threshold),
                fmt(p.max_pair_diff),
                fmt(p.max_beyond_cone),
                p.passes().to_string(),
            ];
            row.extend(p.wavepacket.iter().map(|v| fmt(*v)));
            w.write_record(&row)?;
        }
        w.flush()?;
    }
    fs::write(dir.join("summary.toml"), output.summary.to_text())?;
    fs::write(dir.join("config.toml"), scenario.to_toml())?;
    Ok(())
}

/// Evolves a single free mode for one step; used by the self-test.
pub fn free_mode_phase_error(basis: &ModeBasis, dt: f64, m: usize) -> Result<f64> {
    let stepper = SplitStepper::free(basis, dt)?;
    let v = basis.mode_field(m, ModeKind::Particle);
    let out = stepper.step(&v)?;
    let ph = Complex64::from_polar(1.0, -basis.energy(m) * dt);
    Ok(v
        .upper
        .iter()
        .zip(&out.upper)
        .chain(v.lower.iter().zip(&out.lower))
        .map(|(a, b)| (a * ph - b).norm())
        .fold(0.0, f64::max))
}
