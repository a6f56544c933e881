use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use csun_bench::coverage::parse_grid_size;
use csun_bench::{
    coverage_map, run_sweep, write_sweep_csv, ConstraintsFile, GridSpec, Preset, SweepConfig,
};
use csun_core::blocks::{write_trace_csv, BcdState};
use csun_core::channel::{generate_scenario, load_scenario, save_scenario, ScenarioConfig};
use csun_core::maxmin::joint_maxmin;
use csun_core::model::{check_feasibility, objective_min, objective_sum};
use csun_core::sum::joint_sum;
use csun_core::units::dbm_to_watts;
use csun_core::{ConstraintSet, Scenario};

#[derive(Parser)]
#[command(
    name = "csun",
    version,
    about = "UAV swarm spectrum sharing: allocation, sweeps and coverage maps"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Objective {
    Sum,
    Maxmin,
}

#[derive(Clone, Copy, ValueEnum)]
enum PresetArg {
    Desk,
    Paper,
}

impl From<PresetArg> for Preset {
    fn from(p: PresetArg) -> Self {
        match p {
            PresetArg::Desk => Preset::Desk,
            PresetArg::Paper => Preset::Paper,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Generate a scenario snapshot.
    Gen {
        /// Generator settings (JSON); fields left out take the preset's values.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "desk")]
        preset: PresetArg,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        /// Also write the preset's constraint file here.
        #[arg(long)]
        constraints_out: Option<PathBuf>,
    },
    /// Run the joint allocation on a scenario file.
    Solve {
        #[arg(long, value_enum)]
        objective: Objective,
        #[arg(long)]
        scenario: PathBuf,
        /// Constraint file; the desk defaults are used when absent.
        #[arg(long)]
        constraints: Option<PathBuf>,
        /// Per-block objective trace.
        #[arg(long)]
        trace: Option<PathBuf>,
        /// Final allocation as JSON.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Sweep one parameter over seeded snapshots and write the results table.
    Sweep {
        /// eps_p (dBm), num_uavs, num_subchannels or e_total (J).
        #[arg(long)]
        param: String,
        #[arg(
            long,
            value_delimiter = ',',
            allow_hyphen_values = true,
            required = true
        )]
        values: Vec<f64>,
        #[arg(long, default_value_t = 10)]
        snapshots: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_enum, default_value = "desk")]
        preset: PresetArg,
        #[arg(long)]
        mc_samples: Option<usize>,
        /// Record wall-clock times (makes the output non-reproducible).
        #[arg(long)]
        timing: bool,
        /// Output CSV; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Per-subchannel coverage map of one slot of a max-min allocation.
    Coverage {
        #[arg(long, default_value_t = -92.0, allow_hyphen_values = true)]
        threshold_dbm: f64,
        #[arg(long, default_value = "200x200")]
        grid: String,
        /// Scenario file; by default a single slot of four users next to five satellite users.
        #[arg(long)]
        scenario: Option<PathBuf>,
        #[arg(long)]
        constraints: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        slot: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Gen {
            config,
            preset,
            seed,
            out,
            constraints_out,
        } => {
            let preset = Preset::from(preset);
            let mut cfg = match &config {
                Some(path) => {
                    let text = std::fs::read_to_string(path)
                        .with_context(|| format!("reading {}", path.display()))?;
                    serde_json::from_str::<ScenarioConfig>(&text)
                        .with_context(|| format!("parsing {}", path.display()))?
                }
                None => preset.scenario(seed),
            };
            cfg.seed = seed;
            let sc = generate_scenario(&cfg)?;
            save_scenario(&sc, &out)?;
            if let Some(path) = constraints_out {
                ConstraintsFile::save(&preset.constraints(sc.num_uavs), path)?;
            }
            eprintln!(
                "wrote {}: K = {}, M = {}, G = {}, N = {}, N_s = {}",
                out.display(),
                sc.num_uavs,
                sc.antennas_per_user,
                sc.num_subchannels,
                sc.num_slots(),
                sc.num_sat_users
            );
        }
        Command::Solve {
            objective,
            scenario,
            constraints,
            trace,
            out,
        } => {
            let sc = load_scenario(&scenario)?;
            let cs = load_constraints(constraints.as_deref(), &sc)?;
            let (state, column) = match objective {
                Objective::Sum => (joint_sum(&sc, &cs, Default::default())?, "D_a"),
                Objective::Maxmin => (joint_maxmin(&sc, &cs, Default::default())?, "tau"),
            };
            if let Some(path) = trace {
                write_trace_csv(&state.trace, column, create(&path)?)?;
            }
            if let Some(path) = out {
                serde_json::to_writer_pretty(create(&path)?, &state.alloc)?;
            }
            report(&state, &sc, &cs)?;
        }
        Command::Sweep {
            param,
            values,
            snapshots,
            seed,
            preset,
            mc_samples,
            timing,
            out,
        } => {
            let preset = Preset::from(preset);
            let mut cfg = SweepConfig::new(param.parse()?, values, snapshots, seed);
            cfg.preset = preset;
            cfg.mc_samples = mc_samples.unwrap_or(preset.mc_samples());
            cfg.record_timing = timing;
            let rows = run_sweep(&cfg)?;
            match out {
                Some(path) => write_sweep_csv(&rows, create(&path)?)?,
                None => write_sweep_csv(&rows, io::stdout().lock())?,
            }
        }
        Command::Coverage {
            threshold_dbm,
            grid,
            scenario,
            constraints,
            slot,
            seed,
            out,
        } => {
            let (nx, ny) = parse_grid_size(&grid)?;
            let sc = match &scenario {
                Some(path) => load_scenario(path)?,
                None => generate_scenario(&ScenarioConfig {
                    users_per_slot: vec![4],
                    num_sat_users: 5,
                    seed,
                    ..ScenarioConfig::default()
                })?,
            };
            let cs = load_constraints(constraints.as_deref(), &sc)?;
            let state = joint_maxmin(&sc, &cs, Default::default())?;
            let area = [
                sc.geometry
                    .users
                    .iter()
                    .chain(std::iter::once(&sc.geometry.sat_users))
                    .flatten()
                    .map(|p| p[0])
                    .fold(0.0, f64::max),
                sc.geometry
                    .users
                    .iter()
                    .chain(std::iter::once(&sc.geometry.sat_users))
                    .flatten()
                    .map(|p| p[1])
                    .fold(0.0, f64::max),
            ];
            let area = if area[0] > 0.0 && area[1] > 0.0 {
                area
            } else {
                ScenarioConfig::default().area
            };
            let map = coverage_map(
                &state.alloc,
                &sc,
                slot,
                GridSpec::over_area(nx, ny, area),
                dbm_to_watts(threshold_dbm),
            )?;
            match out {
                Some(path) => map.write_csv(create(&path)?)?,
                None => map.write_csv(io::stdout().lock())?,
            }
            for g in 0..sc.num_subchannels {
                let owner = state
                    .alloc
                    .owner(slot, g)
                    .map_or("idle".to_string(), |u| format!("user {u}"));
                eprintln!(
                    "subchannel {g} ({owner}): {} of {} cells covered",
                    map.covered_cells(g),
                    nx * ny
                );
            }
        }
    }
    Ok(())
}

fn load_constraints(path: Option<&Path>, sc: &Scenario) -> Result<ConstraintSet> {
    let cs = match path {
        Some(p) => ConstraintsFile::load(p)?,
        None => Preset::Desk.constraints(sc.num_uavs),
    };
    cs.validate(sc.num_uavs)?;
    Ok(cs)
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(
        File::create(path).with_context(|| format!("creating {}", path.display()))?,
    ))
}

fn report(state: &BcdState, sc: &Scenario, cs: &ConstraintSet) -> Result<()> {
    let feas = check_feasibility(&state.alloc, sc, cs, 1e-6)?;
    let mut out = io::stdout().lock();
    writeln!(
        out,
        "outer iterations: {} (converged: {})",
        state.iteration, state.converged
    )?;
    writeln!(
        out,
        "D_a: {:.6}",
        objective_sum(&state.alloc, &state.slack, sc)?
    )?;
    writeln!(
        out,
        "min user efficiency: {:.6}",
        objective_min(&state.alloc, &state.slack, sc)?
    )?;
    writeln!(
        out,
        "feasible: {} (worst relative violation {:.3e})",
        feas.feasible, feas.worst_relative
    )?;
    writeln!(out, "hover times: {:?}", state.alloc.hover)?;
    Ok(())
}
