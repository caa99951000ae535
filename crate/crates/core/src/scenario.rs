//! Scenario files and the figure presets.
//!
//! A scenario is a TOML document:
//!
//! ```toml
//! name = "desk-fig2"
//! vacuum = true
//!
//! [grid]
//! n = 1024
//! x_min = -0.56
//! x_max = 0.56
//!
//! [packet]
//! x0 = -0.2554
//! p0 = 200.0
//! width = 0.1168
//!
//! [barrier]
//! height = 33240.0
//! width = 0.0292
//! smoothness = 0.00219
//!
//! [time]
//! dt = 1.25e-6
//! outputs = [0.0, 1.5e-3, 3.0e-3]
//!
//! [causality]
//! margins = [2, 5, 10]
//! interventions = ["identity", "right_half", "gaussian_bump"]
//! ```
//!
//! All quantities are in atomic units.

use serde::{Deserialize, Serialize};

use crate::barrier::BarrierSpec;
use crate::basis::{ModeBasis, WavepacketSpec};
use crate::causality::{Intervention, ProbeSet};
use crate::error::{Error, Result};
use crate::grid::{Grid, C, COMPTON, MC2};
use crate::propagator::SplitStepper;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridConfig {
    pub n: usize,
    pub x_min: f64,
    pub x_max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeConfig {
    pub dt: f64,
    pub outputs: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CausalityConfig {
    #[serde(default = "default_margins")]
    pub margins: Vec<usize>,
    /// Probe times; a third, two thirds and all of the last output time when absent.
    #[serde(default)]
    pub times: Option<Vec<f64>>,
    #[serde(default = "default_interventions")]
    pub interventions: Vec<String>,
}

fn default_margins() -> Vec<usize> {
    vec![2, 5, 10]
}

fn default_interventions() -> Vec<String> {
    ["identity", "right_half", "gaussian_bump"].map(String::from).to_vec()
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub name: String,
    /// Whether to evaluate the vacuum density (costly: one evolution per basis mode).
    #[serde(default = "default_true")]
    pub vacuum: bool,
    pub grid: GridConfig,
    pub packet: WavepacketSpec,
    pub barrier: BarrierSpec,
    pub time: TimeConfig,
    #[serde(default)]
    pub causality: Option<CausalityConfig>,
}

/// Everything needed to evolve a scenario.
#[derive(Debug, Clone)]
pub struct Setup {
    pub grid: Grid,
    pub basis: ModeBasis,
    pub stepper: SplitStepper,
    pub free: SplitStepper,
}

pub const PRESETS: [&str; 6] = ["fig1", "fig2", "fig3", "desk-fig1", "desk-fig2", "desk-fig3"];

impl Scenario {
    pub fn from_toml(text: &str) -> Result<Self> {
        Ok(toml::from_str(text)?)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scenario serializes")
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn final_time(&self) -> f64 {
        self.time.outputs.iter().copied().fold(0.0, f64::max)
    }

    /// Transmitted region `x >= L/2 + 3 eps`.
    pub fn transmitted_region(&self) -> (f64, f64) {
        (self.barrier.width / 2.0 + 3.0 * self.barrier.smoothness, self.grid.x_max)
    }

    /// Reflected region `x <= -L/2 - 3 eps`.
    pub fn reflected_region(&self) -> (f64, f64) {
        (self.grid.x_min, -self.barrier.width / 2.0 - 3.0 * self.barrier.smoothness)
    }

    pub fn interventions(&self) -> Result<Vec<Intervention>> {
        let names = self
            .causality
            .as_ref()
            .map(|c| c.interventions.clone())
            .unwrap_or_else(default_interventions);
        let standard = Intervention::standard_set(&self.packet);
        names
            .iter()
            .map(|n| match n.as_str() {
                "identity" => Ok(standard[0].clone()),
                "right_half" => Ok(standard[1].clone()),
                "gaussian_bump" => Ok(standard[2].clone()),
                other => Err(Error::InvalidParameter(format!("unknown intervention '{other}'"))),
            })
            .collect()
    }

    pub fn probes(&self) -> Option<ProbeSet> {
        let c = self.causality.as_ref()?;
        let mut set = ProbeSet::standard(self.final_time(), self.time.dt);
        if let Some(t) = &c.times {
            set.times = t.clone();
        }
        set.margins = c.margins.clone();
        Some(set)
    }

    /// Checks every sub-specification and the step-size rules
    /// `max(E_p) dt <= 0.5`, `V0 dt <= 0.1`.
    pub fn setup(&self) -> Result<Setup> {
        let grid = Grid::new(self.grid.n, self.grid.x_min, self.grid.x_max)?;
        self.packet.validate(&grid)?;
        self.barrier.validate(&grid)?;
        let basis = ModeBasis::new(&grid);
        let dt = self.time.dt;
        let emax = basis.energy(grid.nyquist_mode());
        if emax * dt > 0.5 * (1.0 + 1e-9) {
            return Err(Error::InvalidParameter(format!(
                "dt = {dt:e} too large: max(E) dt = {:.3} exceeds 0.5",
                emax * dt
            )));
        }
        if self.barrier.height.abs() * dt > 0.1 * (1.0 + 1e-9) {
            return Err(Error::InvalidParameter(format!(
                "dt = {dt:e} too large: V0 dt = {:.3} exceeds 0.1",
                self.barrier.height.abs() * dt
            )));
        }
        if self.time.outputs.is_empty() {
            return Err(Error::InvalidParameter("no output times".into()));
        }
        if self.time.outputs.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::InvalidParameter("output times must be increasing".into()));
        }
        let stepper = SplitStepper::new(&basis, self.barrier.sample(&grid), dt)?;
        for t in &self.time.outputs {
            stepper.steps_for(*t)?;
        }
        if let Some(c) = &self.causality {
            for t in c.times.iter().flatten() {
                stepper.steps_for(*t)?;
            }
        }
        self.interventions()?;
        let free = SplitStepper::free(&basis, dt)?;
        Ok(Setup {
            grid,
            basis,
            stepper,
            free,
        })
    }

    /// Grid for the causality sweep: same spacing and centre, with the box
    /// doubled until the probes stay clear of the cone wrapped through the
    /// periodic boundary at every probe time.
    pub fn causality_grid(&self) -> Result<GridConfig> {
        let probes = self.probes().unwrap_or_else(|| ProbeSet::standard(self.final_time(), self.time.dt));
        let t = probes.times.iter().copied().fold(0.0, f64::max);
        let margin = probes.margins.iter().copied().max().unwrap_or(0) + 4;
        let (lo, hi) = self.packet.support();
        let mut g = self.grid.clone();
        let dx = (g.x_max - g.x_min) / g.n as f64;
        let centre = 0.5 * (g.x_min + g.x_max);
        while g.x_max - g.x_min < hi - lo + 2.0 * C * t + 2.0 * margin as f64 * dx {
            let half = g.x_max - g.x_min;
            g = GridConfig {
                n: 2 * g.n,
                x_min: centre - half,
                x_max: centre + half,
            };
        }
        Ok(g)
    }

    /// Same scenario with the barrier switched off.
    pub fn without_barrier(&self) -> Self {
        let mut s = self.clone();
        s.barrier.height = 0.0;
        s.name = format!("{}-free", self.name);
        s
    }

    pub fn preset(name: &str) -> Result<Self> {
        let lam = COMPTON;
        let barrier = |v0: f64, l: f64| BarrierSpec {
            height: v0 * MC2,
            width: l * lam,
            smoothness: 0.3 * lam,
        };
        let packet = |x0: f64, p0: f64, d: f64| WavepacketSpec {
            x0: x0 * lam,
            p0,
            width: d * lam,
        };
        // (grid, steps to the caption time, caption time)
        let (grid, steps, t, pk, br, vacuum) = match name {
            "fig1" | "desk-fig1" => (
                GridConfig {
                    n: 4096,
                    x_min: -2.1,
                    x_max: 2.1,
                },
                13_000,
                1.5e-2,
                packet(-120.0, 100.0, 70.0),
                barrier(0.5, 4.0),
                name == "fig1",
            ),
            "fig2" | "desk-fig2" => (
                GridConfig {
                    n: if name == "fig2" { 2048 } else { 1024 },
                    x_min: -0.56,
                    x_max: 0.56,
                },
                if name == "fig2" { 4800 } else { 2400 },
                3e-3,
                packet(-35.0, 200.0, 16.0),
                barrier(1.77, 4.0),
                true,
            ),
            // negative-energy content runs left at nearly c, hence the wider box
            "fig3" | "desk-fig3" => (
                GridConfig {
                    n: if name == "fig3" { 4096 } else { 2048 },
                    x_min: -1.12,
                    x_max: 1.12,
                },
                if name == "fig3" { 15_600 } else { 7_800 },
                4.5e-3,
                packet(-40.0, 450.0, 16.0),
                barrier(9.0, 16.0),
                name == "fig3",
            ),
            other => return Err(Error::UnknownPreset(other.to_string())),
        };
        let dt = t / steps as f64;
        let outputs = [0, steps / 3, 2 * steps / 3, steps]
            .iter()
            .map(|s| *s as f64 * dt)
            .collect();
        Ok(Self {
            name: name.to_string(),
            vacuum,
            grid,
            packet: pk,
            barrier: br,
            time: TimeConfig { dt, outputs },
            causality: Some(CausalityConfig {
                margins: default_margins(),
                times: None,
                interventions: default_interventions(),
            }),
        })
    }
}
