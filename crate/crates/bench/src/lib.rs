//! Baselines, exhaustive oracles, coverage maps and parameter sweeps around the csun solvers.

pub mod baseline;
pub mod brute;
pub mod config;
pub mod coverage;
pub mod sweep;

pub use baseline::baseline_equal;
pub use brute::{brute_force_assignment, BruteForce, BruteObjective};
pub use config::{ConstraintsFile, Preset};
pub use coverage::{coverage_map, CoverageMap, GridSpec};
pub use sweep::{run_sweep, write_sweep_csv, Arm, SweepConfig, SweepParam, SweepRow};
