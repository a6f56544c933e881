//! Pieces shared by the sum and max-min pipelines: frozen per-subchannel scores, resource
//! rows of the power subproblem, equal power splitting, and the outer-loop trace.

use std::io::Write;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::kernels::{ConcaveTerm, KernelOptions, ResourceRow};
use crate::model::{
    approx_rate_unchecked, check_feasibility, Allocation, ConstraintSet, Scenario, SlackState,
    DEFAULT_FEASIBILITY_TOL,
};
use crate::units::LOG2_E;

/// `x[n][u][g]`.
pub type Assignment = Vec<Vec<Vec<bool>>>;

/// Scores and resource usage of every `(n, u, g)` for frozen powers, times and slacks.
///
/// Usage does not depend on which user holds a subchannel, only on whether it is held.
#[derive(Debug, Clone, PartialEq)]
pub struct FrozenRates {
    /// `T_n R_a(P_{n,g}, w_{n,u,g})`, bit*s/Hz.
    pub value: Vec<Vec<Vec<f64>>>,
    /// `y l~^2 p` summed over UAVs, `[n][i][g]`, watts.
    pub interference: Vec<Vec<Vec<f64>>>,
    /// `T_n p_{n,g,k}`, `[n][g][k]`, joules.
    pub energy: Vec<Vec<Vec<f64>>>,
    /// `p_{n,g,k}`, `[n][g][k]`, watts.
    pub power: Vec<Vec<Vec<f64>>>,
}

impl FrozenRates {
    pub fn new(
        sc: &Scenario,
        power: &[Vec<Vec<f64>>],
        hover: &[f64],
        slack: &SlackState,
    ) -> Result<Self> {
        let n_slots = sc.num_slots();
        if power.len() != n_slots || hover.len() != n_slots || slack.w.len() != n_slots {
            return Err(Error::Usage(
                "frozen blocks do not match the scenario".into(),
            ));
        }
        let (m, noise) = (sc.antennas_per_user, sc.noise_power);
        let mut value = Vec::with_capacity(n_slots);
        let mut interference = Vec::with_capacity(n_slots);
        let mut energy = Vec::with_capacity(n_slots);
        for n in 0..n_slots {
            value.push(
                (0..sc.users_per_slot[n])
                    .map(|u| {
                        (0..sc.num_subchannels)
                            .map(|g| {
                                hover[n]
                                    * approx_rate_unchecked(
                                        &power[n][g],
                                        slack.w[n][u][g],
                                        sc.uav_gains(n, u, g),
                                        m,
                                        noise,
                                    )
                            })
                            .collect()
                    })
                    .collect(),
            );
            interference.push(
                (0..sc.num_sat_users)
                    .map(|i| {
                        (0..sc.num_subchannels)
                            .map(|g| {
                                if !sc.sat_occupancy[n][i][g] {
                                    return 0.0;
                                }
                                sc.gain_sat[n][i][g]
                                    .iter()
                                    .zip(&power[n][g])
                                    .map(|(l, p)| l * l * p)
                                    .sum()
                            })
                            .collect()
                    })
                    .collect(),
            );
            energy.push(
                power[n]
                    .iter()
                    .map(|row| row.iter().map(|p| hover[n] * p).collect())
                    .collect(),
            );
        }
        Ok(Self {
            value,
            interference,
            energy,
            power: power.to_vec(),
        })
    }

    pub fn num_slots(&self) -> usize {
        self.value.len()
    }

    pub fn num_subchannels(&self) -> usize {
        self.power.first().map_or(0, Vec::len)
    }

    /// Worst relative violation of the interference, energy and per-slot power rows by `x`.
    pub fn row_violation(&self, x: &Assignment, cs: &ConstraintSet) -> f64 {
        let held = |n: usize, g: usize| x[n].iter().filter(|row| row[g]).count() as f64;
        let mut worst: f64 = 0.0;
        let k_count = cs.e_com.len();
        let mut energy = vec![0.0; k_count];
        for n in 0..self.num_slots() {
            if cs.eps_p.is_finite() {
                for per_g in &self.interference[n] {
                    let load: f64 = per_g.iter().enumerate().map(|(g, v)| held(n, g) * v).sum();
                    worst = worst.max((load - cs.eps_p) / cs.eps_p);
                }
            }
            let mut slot_power = vec![0.0; k_count];
            for g in 0..self.num_subchannels() {
                let h = held(n, g);
                if h == 0.0 {
                    continue;
                }
                for k in 0..k_count {
                    slot_power[k] += h * self.power[n][g][k];
                    energy[k] += h * self.energy[n][g][k];
                }
            }
            for p in slot_power {
                worst = worst.max((p - cs.p_max) / cs.p_max);
            }
        }
        for (e, budget) in energy.iter().zip(&cs.e_com) {
            worst = worst.max((e - budget) / budget);
        }
        worst.max(0.0)
    }

    /// `sum x * value`.
    pub fn total(&self, x: &Assignment) -> f64 {
        x.iter()
            .zip(&self.value)
            .flat_map(|(xn, vn)| xn.iter().zip(vn))
            .flat_map(|(xu, vu)| xu.iter().zip(vu))
            .filter(|(on, _)| **on)
            .map(|(_, v)| v)
            .sum()
    }

    /// Per-user totals `[n][u]`.
    pub fn user_totals(&self, x: &Assignment) -> Vec<Vec<f64>> {
        x.iter()
            .zip(&self.value)
            .map(|(xn, vn)| {
                xn.iter()
                    .zip(vn)
                    .map(|(xu, vu)| {
                        xu.iter()
                            .zip(vu)
                            .filter(|(on, _)| **on)
                            .map(|(_, v)| v)
                            .sum()
                    })
                    .collect()
            })
            .collect()
    }

    /// Smallest per-user total.
    pub fn min_total(&self, x: &Assignment) -> f64 {
        let m = self
            .user_totals(x)
            .iter()
            .flatten()
            .copied()
            .fold(f64::INFINITY, f64::min);
        if m.is_finite() {
            m
        } else {
            0.0
        }
    }
}

/// Compensation term `M [log2 w - log2(e)(1 - 1/w)]` of the approximate rate.
pub(crate) fn compensation(w: f64, m: usize) -> f64 {
    m as f64 * (w.log2() - LOG2_E * (1.0 - 1.0 / w))
}

/// The power subproblem for a frozen assignment, hovering times and slacks, in kernel form.
///
/// Variables are `p_{n,g,k}` for held subchannels in slots with positive hovering time.
pub(crate) struct PowerProgram {
    pub terms: Vec<ConcaveTerm>,
    pub rows: Vec<ResourceRow>,
    /// `(n, g, owner)` per block of `K` consecutive variables.
    pub blocks: Vec<(usize, usize, usize)>,
}

impl PowerProgram {
    pub fn build(
        sc: &Scenario,
        cs: &ConstraintSet,
        x: &Assignment,
        hover: &[f64],
        slack: &SlackState,
    ) -> Self {
        let k_count = sc.num_uavs;
        let m = sc.antennas_per_user as f64;
        let mut blocks = Vec::new();
        let mut terms = Vec::new();
        for n in 0..sc.num_slots() {
            if hover[n] <= 0.0 {
                continue;
            }
            for g in 0..sc.num_subchannels {
                let Some(u) = x[n].iter().position(|row| row[g]) else {
                    continue;
                };
                blocks.push((n, g, u));
                let w = slack.w[n][u][g];
                for &l in sc.uav_gains(n, u, g) {
                    terms.push(ConcaveTerm {
                        alpha: hover[n],
                        beta: m * l * l / (w * sc.noise_power),
                    });
                }
            }
        }
        let mut rows = Vec::new();
        if cs.eps_p.is_finite() {
            for n in 0..sc.num_slots() {
                for i in 0..sc.num_sat_users {
                    let coeffs: Vec<(usize, f64)> = blocks
                        .iter()
                        .enumerate()
                        .filter(|(_, b)| b.0 == n && sc.sat_occupancy[n][i][b.1])
                        .flat_map(|(bi, b)| {
                            sc.gain_sat[n][i][b.1]
                                .iter()
                                .enumerate()
                                .map(move |(k, l)| (bi * k_count + k, l * l))
                        })
                        .collect();
                    if !coeffs.is_empty() {
                        rows.push(ResourceRow {
                            coeffs,
                            rhs: cs.eps_p,
                        });
                    }
                }
            }
        }
        for k in 0..k_count {
            let coeffs = blocks
                .iter()
                .enumerate()
                .map(|(bi, b)| (bi * k_count + k, hover[b.0]))
                .collect();
            rows.push(ResourceRow {
                coeffs,
                rhs: cs.e_com[k],
            });
        }
        for n in 0..sc.num_slots() {
            for k in 0..k_count {
                let coeffs = blocks
                    .iter()
                    .enumerate()
                    .filter(|(_, b)| b.0 == n)
                    .map(|(bi, _)| (bi * k_count + k, 1.0))
                    .collect();
                rows.push(ResourceRow {
                    coeffs,
                    rhs: cs.p_max,
                });
            }
        }
        Self {
            terms,
            rows,
            blocks,
        }
    }

    /// Scatters a kernel solution into a full power tensor (zeros elsewhere).
    pub fn scatter(&self, sc: &Scenario, p: &[f64]) -> Vec<Vec<Vec<f64>>> {
        let k_count = sc.num_uavs;
        let mut power = vec![vec![vec![0.0; k_count]; sc.num_subchannels]; sc.num_slots()];
        for (bi, &(n, g, _)) in self.blocks.iter().enumerate() {
            power[n][g].copy_from_slice(&p[bi * k_count..(bi + 1) * k_count]);
        }
        power
    }
}

/// Chooses the slacks that drive the next kernel solve of a power alternation.
///
/// Normally that is the fixed point of the latest power. Once the consistent objective repeats
/// with period two (or 20 iterations pass without settling) the alternation is damped for good:
/// the new driving slack is the average of the previous one and the fixed point.
#[derive(Debug, Default)]
pub(crate) struct SlackDamper {
    damped: bool,
}

impl SlackDamper {
    pub fn next(
        &mut self,
        history: &[f64],
        tol: f64,
        driving: &SlackState,
        fixed: &SlackState,
    ) -> SlackState {
        if let [.., a, b, c] = history {
            if relative_change(*a, *c) <= tol && relative_change(*b, *c) > tol {
                self.damped = true;
            }
        }
        if history.len() >= 20 {
            self.damped = true;
        }
        if !self.damped {
            return fixed.clone();
        }
        let w = driving
            .w
            .iter()
            .zip(&fixed.w)
            .map(|(dn, fn_)| {
                dn.iter()
                    .zip(fn_)
                    .map(|(du, fu)| du.iter().zip(fu).map(|(d, f)| 0.5 * (d + f)).collect())
                    .collect()
            })
            .collect();
        SlackState { w }
    }
}

/// Equal power over the held subchannels of each slot (`p_max / count` per UAV), then scaled
/// down by the smallest common factor that satisfies the interference and energy rows.
///
/// With `x = None` every subchannel counts as held.
pub fn equal_power(
    sc: &Scenario,
    cs: &ConstraintSet,
    hover: &[f64],
    x: Option<&Assignment>,
) -> Vec<Vec<Vec<f64>>> {
    let (k_count, g_count) = (sc.num_uavs, sc.num_subchannels);
    let held = |n: usize, g: usize| x.map_or(true, |x| x[n].iter().any(|row| row[g]));
    let mut power = vec![vec![vec![0.0; k_count]; g_count]; sc.num_slots()];
    for n in 0..sc.num_slots() {
        let count = (0..g_count).filter(|&g| held(n, g)).count();
        if count == 0 {
            continue;
        }
        for g in (0..g_count).filter(|&g| held(n, g)) {
            power[n][g]
                .iter_mut()
                .for_each(|p| *p = cs.p_max / count as f64);
        }
    }
    let mut scale: f64 = 1.0;
    if cs.eps_p.is_finite() {
        for n in 0..sc.num_slots() {
            for i in 0..sc.num_sat_users {
                let load: f64 = (0..g_count)
                    .filter(|&g| sc.sat_occupancy[n][i][g])
                    .map(|g| {
                        sc.gain_sat[n][i][g]
                            .iter()
                            .zip(&power[n][g])
                            .map(|(l, p)| l * l * p)
                            .sum::<f64>()
                    })
                    .sum();
                if load > cs.eps_p {
                    scale = scale.min(cs.eps_p / load);
                }
            }
        }
    }
    for k in 0..k_count {
        let used: f64 = (0..sc.num_slots())
            .map(|n| hover[n] * power[n].iter().map(|row| row[k]).sum::<f64>())
            .sum();
        if used > cs.e_com[k] {
            scale = scale.min(cs.e_com[k] / used);
        }
    }
    if scale < 1.0 {
        scale *= 1.0 - 4.0 * f64::EPSILON;
        power
            .iter_mut()
            .flatten()
            .flatten()
            .for_each(|p| *p *= scale);
    }
    power
}

/// Tunables of the block-coordinate pipelines.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    /// Outer stopping threshold on the relative objective change.
    pub outer_tol: f64,
    /// Inner stopping threshold of the power alternation.
    pub inner_tol: f64,
    pub max_outer: usize,
    pub max_subchannel_iters: usize,
    pub max_power_iters: usize,
    pub kernel: KernelOptions,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            outer_tol: 1e-2,
            inner_tol: 1e-3,
            max_outer: 50,
            max_subchannel_iters: 500,
            max_power_iters: 200,
            kernel: KernelOptions::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    Subchannel,
    Power,
    Time,
}

/// Objective after one inner block of an outer iteration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TraceRow {
    pub outer_iter: usize,
    pub phase: Phase,
    /// `D_a` for the sum pipeline, the minimum user efficiency for max-min.
    pub value: f64,
    /// Worst relative constraint violation of the iterate.
    pub worst_violation: f64,
}

/// Writes the trace as CSV; `value_column` names the objective column (`D_a` or `tau`).
pub fn write_trace_csv<W: Write>(trace: &[TraceRow], value_column: &str, out: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(out);
    wtr.write_record(["outer_iter", "phase", value_column, "worst_violation"])?;
    for row in trace {
        let phase = match row.phase {
            Phase::Subchannel => "subchannel",
            Phase::Power => "power",
            Phase::Time => "time",
        };
        wtr.write_record([
            row.outer_iter.to_string(),
            phase.to_string(),
            row.value.to_string(),
            row.worst_violation.to_string(),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}

/// State of one block-coordinate run.
#[derive(Debug, Clone, PartialEq)]
pub struct BcdState {
    /// Completed outer iterations.
    pub iteration: usize,
    pub alloc: Allocation,
    pub slack: SlackState,
    pub trace: Vec<TraceRow>,
    pub config: SolverConfig,
    /// False if the outer loop hit `max_outer`.
    pub converged: bool,
    /// Number of subchannel passes that ended on an iteration cap.
    pub capped_passes: usize,
}

impl BcdState {
    pub(crate) fn new(sc: &Scenario, cs: &ConstraintSet, config: SolverConfig) -> Self {
        let mut alloc = Allocation::zeros(sc);
        let t0 = (cs.t_total / sc.num_slots() as f64).min(cs.t_max);
        alloc.hover.iter_mut().for_each(|t| *t = t0);
        Self {
            iteration: 0,
            alloc,
            slack: SlackState::ones(sc),
            trace: Vec::new(),
            config,
            converged: false,
            capped_passes: 0,
        }
    }

    pub(crate) fn record(
        &mut self,
        sc: &Scenario,
        cs: &ConstraintSet,
        phase: Phase,
        value: f64,
    ) -> Result<()> {
        let report = check_feasibility(&self.alloc, sc, cs, DEFAULT_FEASIBILITY_TOL)?;
        self.trace.push(TraceRow {
            outer_iter: self.iteration,
            phase,
            value,
            worst_violation: report.worst_relative,
        });
        Ok(())
    }
}

/// Hovering times from an LP solution, nudged down if round-off broke a time or energy row.
pub(crate) fn settle_hover(
    mut t: Vec<f64>,
    sc: &Scenario,
    cs: &ConstraintSet,
    x: &Assignment,
    power: &[Vec<Vec<f64>>],
) -> Vec<f64> {
    for v in t.iter_mut() {
        *v = v.clamp(0.0, cs.t_max);
    }
    let mut scale: f64 = 1.0;
    let total: f64 = t.iter().sum();
    if total > cs.t_total {
        scale = scale.min(cs.t_total / total);
    }
    for k in 0..sc.num_uavs {
        let used: f64 = (0..sc.num_slots())
            .map(|n| t[n] * slot_energy_rate(x, power, n, k))
            .sum();
        if used > cs.e_com[k] {
            scale = scale.min(cs.e_com[k] / used);
        }
    }
    if scale < 1.0 {
        t.iter_mut()
            .for_each(|v| *v *= scale * (1.0 - 4.0 * f64::EPSILON));
    }
    t
}

/// `sum_u sum_g x p_{n,g,k}`: power drawn by UAV `k` in slot `n`.
pub(crate) fn slot_energy_rate(x: &Assignment, power: &[Vec<Vec<f64>>], n: usize, k: usize) -> f64 {
    (0..power[n].len())
        .map(|g| x[n].iter().filter(|row| row[g]).count() as f64 * power[n][g][k])
        .sum()
}

/// Relative change used by the stopping rules; `0/0` counts as converged.
pub(crate) fn relative_change(prev: f64, cur: f64) -> f64 {
    if cur == 0.0 {
        if prev == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    } else {
        (1.0 - prev / cur).abs()
    }
}
