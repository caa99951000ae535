use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use log::{error, info};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use qft_tunnel::oracle::{exact_density, field_anticommutator_defect, ToyModel};
use qft_tunnel::density::decompose;
use qft_tunnel::report::{compare_free, run, write_outputs, RunOptions};
use qft_tunnel::scenario::{Scenario, PRESETS};
use qft_tunnel::{Error, Result};

#[derive(Parser)]
#[command(version, about = "Dirac field wavepacket tunneling with vacuum pair creation")]
struct Cli {
    /// Worker threads (defaults to all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Input {
    /// Scenario TOML file.
    #[arg(long, conflicts_with = "preset")]
    scenario: Option<PathBuf>,
    /// Built-in scenario.
    #[arg(long, value_parser = clap::builder::PossibleValuesParser::new(PRESETS))]
    preset: Option<String>,
}

impl Input {
    fn load(&self) -> Result<Scenario> {
        match (&self.scenario, &self.preset) {
            (Some(path), _) => Scenario::load(path),
            (None, Some(name)) => Scenario::preset(name),
            (None, None) => Err(Error::InvalidParameter("pass --scenario or --preset".into())),
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Full decomposition at every output time.
    Run {
        #[command(flatten)]
        input: Input,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Propagator checkpoint (read when present, written otherwise).
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        /// Skip the vacuum contribution.
        #[arg(long)]
        no_vacuum: bool,
    },
    /// Mean transmitted position against the free packet.
    CompareFree {
        #[command(flatten)]
        input: Input,
    },
    /// Only the causality sweep.
    Causality {
        #[command(flatten)]
        input: Input,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Checks the mode-expansion formulas against exact Fock-space evolution.
    OracleSelftest {
        #[arg(long, default_value_t = 50)]
        models: usize,
        #[arg(long, default_value_t = 3)]
        modes: usize,
        #[arg(long, default_value_t = 7)]
        seed: u64,
    },
}

fn execute(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Run {
            input,
            out,
            checkpoint,
            no_vacuum,
        } => {
            let mut scenario = input.load()?;
            if no_vacuum {
                scenario.vacuum = false;
            }
            let output = run(
                &scenario,
                &RunOptions {
                    checkpoint,
                    skip_causality: false,
                },
            )?;
            write_outputs(&output, &scenario, &out)?;
            print!("{}", output.summary.to_text());
            if !output.summary.edge_ok {
                error!(
                    "density reached the box edge ({:e}); enlarge the box",
                    output.summary.edge_density_max
                );
            }
            Ok(output.summary.edge_ok)
        }
        Command::CompareFree { input } => {
            let scenario = input.load()?;
            println!("t,x_tr,x_free,shift");
            for c in compare_free(&scenario)? {
                match c.x_tr {
                    Some(tr) => println!("{:e},{tr:e},{:e},{:e}", c.t, c.x_free, tr - c.x_free),
                    None => println!("{:e},,{:e},", c.t, c.x_free),
                }
            }
            Ok(true)
        }
        Command::Causality { input, out } => {
            let mut scenario = input.load()?;
            scenario.vacuum = false;
            if scenario.causality.is_none() {
                scenario.causality = Scenario::preset("desk-fig2")?.causality;
            }
            let output = run(&scenario, &RunOptions::default())?;
            write_outputs(&output, &scenario, &out)?;
            let c = output.summary.causality.as_ref().expect("causality requested");
            print!("{}", toml::to_string(c).expect("serializes"));
            Ok(c.pass)
        }
        Command::OracleSelftest { models, modes, seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut worst_density: f64 = 0.0;
            let mut worst_anti: f64 = 0.0;
            for _ in 0..models {
                let model = ToyModel::random(modes, &mut rng)?;
                let t = 0.7;
                let exact = exact_density(&model, t)?;
                let d = decompose(&model, &model, &model.g_plus, &model.g_minus, &[t], true)?;
                let total = d[0].rho_total();
                for (a, b) in exact.iter().zip(&total) {
                    worst_density = worst_density.max((a - b).abs());
                }
                worst_anti = worst_anti.max(field_anticommutator_defect(&model, t)?);
            }
            println!("models = {models}\ndensity_defect = {worst_density:e}\nanticommutator_defect = {worst_anti:e}");
            Ok(worst_density <= 1e-10 && worst_anti <= 1e-14)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            error!("{e}");
            return ExitCode::FAILURE;
        }
    }
    match execute(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            info!("diagnostics failed");
            ExitCode::FAILURE
        }
        Err(e) => {
            error!("{e}");
            ExitCode::FAILURE
        }
    }
}
