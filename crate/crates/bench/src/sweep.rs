//! Parameter sweeps over seeded snapshots, three arms each.

use std::fmt;
use std::io::Write;
use std::str::FromStr;
use std::time::Instant;

use csun_core::blocks::SolverConfig;
use csun_core::channel::generate_scenario;
use csun_core::maxmin::joint_maxmin;
use csun_core::rate::mc_objectives;
use csun_core::sum::joint_sum;
use csun_core::units::dbm_to_watts;
use csun_core::{Allocation, Error, Result};
use rayon::prelude::*;
use serde::Serialize;

use crate::baseline::baseline_equal;
use crate::config::Preset;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepParam {
    /// Interference threshold, dBm.
    EpsP,
    NumUavs,
    NumSubchannels,
    /// Swarm energy budget, joules.
    ETotal,
}

impl SweepParam {
    pub fn name(self) -> &'static str {
        match self {
            SweepParam::EpsP => "eps_p",
            SweepParam::NumUavs => "num_uavs",
            SweepParam::NumSubchannels => "num_subchannels",
            SweepParam::ETotal => "e_total",
        }
    }
}

impl FromStr for SweepParam {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "eps_p" => Ok(SweepParam::EpsP),
            "num_uavs" => Ok(SweepParam::NumUavs),
            "num_subchannels" => Ok(SweepParam::NumSubchannels),
            "e_total" => Ok(SweepParam::ETotal),
            other => Err(Error::Usage(format!(
                "unknown sweep parameter {other:?} (expected eps_p, num_uavs, num_subchannels or e_total)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Arm {
    JointSum,
    JointMaxmin,
    Baseline,
}

impl fmt::Display for Arm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Arm::JointSum => "joint_sum",
            Arm::JointMaxmin => "joint_maxmin",
            Arm::Baseline => "baseline",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    pub param: SweepParam,
    pub values: Vec<f64>,
    pub snapshots: usize,
    /// Snapshot `s` uses scenario seed `seed + s`; the same seed drives the Monte-Carlo
    /// fading shared by all arms.
    pub seed: u64,
    pub preset: Preset,
    pub mc_samples: usize,
    /// With `false`, `wall_ms` is written as 0 so that output bytes depend only on the inputs.
    pub record_timing: bool,
    pub solver: SolverConfig,
}

impl SweepConfig {
    pub fn new(param: SweepParam, values: Vec<f64>, snapshots: usize, seed: u64) -> Self {
        Self {
            param,
            values,
            snapshots,
            seed,
            preset: Preset::Desk,
            mc_samples: Preset::Desk.mc_samples(),
            record_timing: false,
            solver: SolverConfig::default(),
        }
    }
}

/// One `(value, snapshot, arm)` result.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub param: &'static str,
    pub value: f64,
    pub snapshot: usize,
    pub arm: Arm,
    /// Monte-Carlo overall efficiency.
    #[serde(rename = "D_e")]
    pub d_e: f64,
    /// Monte-Carlo minimum per-user efficiency.
    #[serde(rename = "D_min")]
    pub d_min: f64,
    /// Outer iterations; 0 for the baseline.
    pub outer_iters: usize,
    pub wall_ms: f64,
}

/// Runs every arm on every `(value, snapshot)`; rows come back ordered by value, snapshot, arm.
pub fn run_sweep(cfg: &SweepConfig) -> Result<Vec<SweepRow>> {
    if cfg.values.is_empty() || cfg.snapshots == 0 {
        return Err(Error::Usage(
            "a sweep needs at least one value and one snapshot".into(),
        ));
    }
    let jobs: Vec<(f64, usize)> = cfg
        .values
        .iter()
        .flat_map(|&v| (0..cfg.snapshots).map(move |s| (v, s)))
        .collect();
    let per_job: Vec<Vec<SweepRow>> = jobs
        .par_iter()
        .map(|&(v, s)| run_point(cfg, v, s))
        .collect::<Result<_>>()?;
    Ok(per_job.into_iter().flatten().collect())
}

fn count(param: SweepParam, v: f64) -> Result<usize> {
    if v >= 1.0 && v.fract() == 0.0 && v.is_finite() {
        Ok(v as usize)
    } else {
        Err(Error::Usage(format!(
            "{} must be a positive integer, got {v}",
            param.name()
        )))
    }
}

fn run_point(cfg: &SweepConfig, value: f64, snapshot: usize) -> Result<Vec<SweepRow>> {
    let seed = cfg.seed.wrapping_add(snapshot as u64);
    let mut sc_cfg = cfg.preset.scenario(seed);
    match cfg.param {
        SweepParam::NumUavs => sc_cfg.num_uavs = count(cfg.param, value)?,
        SweepParam::NumSubchannels => sc_cfg.num_subchannels = count(cfg.param, value)?,
        _ => {}
    }
    let sc = generate_scenario(&sc_cfg)?;
    let mut cs = cfg.preset.constraints(sc.num_uavs);
    match cfg.param {
        SweepParam::EpsP => cs.eps_p = dbm_to_watts(value),
        SweepParam::ETotal => {
            let share = value / sc.num_uavs as f64;
            cs.e_com.iter_mut().for_each(|e| *e = share);
        }
        _ => {}
    }

    let timed = |f: &dyn Fn() -> Result<(Allocation, usize)>| -> Result<(Allocation, usize, f64)> {
        let start = Instant::now();
        let (alloc, iters) = f()?;
        let ms = if cfg.record_timing {
            start.elapsed().as_secs_f64() * 1e3
        } else {
            0.0
        };
        Ok((alloc, iters, ms))
    };
    let arms: [(Arm, Box<dyn Fn() -> Result<(Allocation, usize)>>); 3] = [
        (
            Arm::JointSum,
            Box::new(|| joint_sum(&sc, &cs, cfg.solver).map(|st| (st.alloc, st.iteration))),
        ),
        (
            Arm::JointMaxmin,
            Box::new(|| joint_maxmin(&sc, &cs, cfg.solver).map(|st| (st.alloc, st.iteration))),
        ),
        (
            Arm::Baseline,
            Box::new(|| baseline_equal(&sc, &cs).map(|a| (a, 0))),
        ),
    ];
    let mut rows = Vec::with_capacity(3);
    for (arm, run) in &arms {
        let (alloc, outer_iters, wall_ms) = timed(run.as_ref())?;
        let mc = mc_objectives(&alloc, &sc, cfg.mc_samples, seed)?;
        rows.push(SweepRow {
            param: cfg.param.name(),
            value,
            snapshot,
            arm: *arm,
            d_e: mc.d_e,
            d_min: mc.d_min,
            outer_iters,
            wall_ms,
        });
    }
    Ok(rows)
}

/// Writes rows under the header `param,value,snapshot,arm,D_e,D_min,outer_iters,wall_ms`.
pub fn write_sweep_csv<W: Write>(rows: &[SweepRow], out: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(out);
    for row in rows {
        wtr.serialize(row)?;
    }
    if rows.is_empty() {
        wtr.write_record([
            "param",
            "value",
            "snapshot",
            "arm",
            "D_e",
            "D_min",
            "outer_iters",
            "wall_ms",
        ])?;
    }
    wtr.flush()?;
    Ok(())
}
