//! Sum-efficiency pipeline: dual-priced subchannel assignment, alternating power allocation,
//! hovering-time LP and the block-coordinate outer loop.

use std::collections::HashSet;

use crate::blocks::{
    equal_power, relative_change, settle_hover, slot_energy_rate, Assignment, BcdState,
    FrozenRates, Phase, PowerProgram, SlackDamper, SolverConfig,
};
use crate::error::{Error, Result};
use crate::kernels::{maximize_separable_concave, solve_lp, DualState, LinearProgram, LpStatus};
use crate::model::{objective_sum, Allocation, ConstraintSet, Scenario, SlackState};

/// Tolerance on row feasibility of a candidate assignment.
const ROW_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct SubchannelOutcome {
    pub assign: Assignment,
    pub iterations: usize,
    /// False when the iteration cap was hit before the assignment settled.
    pub converged: bool,
    pub duals: DualState,
}

/// Dual-priced subchannel assignment for frozen powers, times and slacks.
///
/// Each `(n, g)` goes to the user with the largest score `T R_a` minus the price of the
/// resources the subchannel consumes, if that margin is positive. Prices follow projected
/// subgradient steps `delta_1 / t` on the interference, energy and power rows. The pass stops
/// once the assignment repeats; the best row-feasible assignment seen (the empty one and
/// `incumbent` included) is topped up with idle subchannels that still fit and returned.
pub fn allocate_subchannels_sum(
    rates: &FrozenRates,
    cs: &ConstraintSet,
    incumbent: Option<&Assignment>,
    max_iters: usize,
) -> Result<SubchannelOutcome> {
    let n_slots = rates.num_slots();
    let g_count = rates.num_subchannels();
    let k_count = cs.e_com.len();
    let n_sat = rates.interference.first().map_or(0, Vec::len);
    let empty: Assignment = rates
        .value
        .iter()
        .map(|vn| vec![vec![false; g_count]; vn.len()])
        .collect();
    if let Some(inc) = incumbent {
        if inc.len() != n_slots || inc.iter().zip(&empty).any(|(a, b)| a.len() != b.len()) {
            return Err(Error::Usage("incumbent assignment has wrong shape".into()));
        }
    }

    let v_max = rates
        .value
        .iter()
        .flatten()
        .flatten()
        .copied()
        .fold(0.0, f64::max)
        .max(f64::MIN_POSITIVE);
    let mut duals = DualState::zeros(n_slots, n_sat, k_count, g_count);
    // Scale-free initial steps: a row violated by its own right-hand side moves its price
    // by about the largest score.
    let energy_step: Vec<f64> = cs.e_com.iter().map(|e| v_max / (e * e)).collect();
    duals.steps = [
        if cs.eps_p.is_finite() {
            v_max / (cs.eps_p * cs.eps_p)
        } else {
            0.0
        },
        energy_step.iter().copied().fold(0.0, f64::max),
        v_max / (cs.p_max * cs.p_max),
    ];

    let mut best = empty.clone();
    let mut best_value = 0.0;
    if let Some(inc) = incumbent {
        if rates.row_violation(inc, cs) <= ROW_TOL {
            best = inc.clone();
            best_value = rates.total(inc);
        }
    }

    let mut seen: HashSet<Vec<bool>> = HashSet::new();
    let mut prev: Option<Vec<bool>> = None;
    let mut converged = false;
    let mut iterations = 0;
    for t in 1..=max_iters {
        iterations = t;
        let mut x = empty.clone();
        for n in 0..n_slots {
            for g in 0..g_count {
                let mut price = 0.0;
                for i in 0..n_sat {
                    price += duals.lambda[n][i] * rates.interference[n][i][g];
                }
                for k in 0..k_count {
                    price += duals.mu[k] * rates.energy[n][g][k]
                        + duals.gamma[n][k] * rates.power[n][g][k];
                }
                let mut pick: Option<(usize, f64)> = None;
                for (u, vu) in rates.value[n].iter().enumerate() {
                    if pick.is_none_or(|(_, v)| vu[g] > v) {
                        pick = Some((u, vu[g]));
                    }
                }
                let margin = pick.map_or(0.0, |(_, v)| v - price);
                duals.zeta[n][g] = margin.max(0.0);
                if let Some((u, _)) = pick.filter(|_| margin > 0.0) {
                    x[n][u][g] = true;
                }
            }
        }

        let violation = rates.row_violation(&x, cs);
        let feasible = violation <= ROW_TOL;
        if feasible {
            let value = rates.total(&x);
            if value > best_value {
                best_value = value;
                best = x.clone();
            }
        }
        let key: Vec<bool> = x.iter().flatten().flatten().copied().collect();
        if prev.as_ref() == Some(&key) {
            if feasible {
                converged = true;
                break;
            }
        } else if seen.contains(&key) {
            // Limit cycle: the best feasible member has already been recorded.
            converged = true;
            break;
        }
        seen.insert(key.clone());
        prev = Some(key);

        // Projected subgradient step on the multipliers (descent on the dual).
        let tf = t as f64;
        let held = |n: usize, g: usize| x[n].iter().any(|row| row[g]);
        for n in 0..n_slots {
            if cs.eps_p.is_finite() {
                for i in 0..n_sat {
                    let load: f64 = (0..g_count)
                        .filter(|&g| held(n, g))
                        .map(|g| rates.interference[n][i][g])
                        .sum();
                    duals.lambda[n][i] =
                        (duals.lambda[n][i] - duals.steps[0] / tf * (cs.eps_p - load)).max(0.0);
                }
            }
            for k in 0..k_count {
                let used: f64 = (0..g_count)
                    .filter(|&g| held(n, g))
                    .map(|g| rates.power[n][g][k])
                    .sum();
                duals.gamma[n][k] =
                    (duals.gamma[n][k] - duals.steps[2] / tf * (cs.p_max - used)).max(0.0);
            }
        }
        for k in 0..k_count {
            let used: f64 = (0..n_slots)
                .flat_map(|n| (0..g_count).map(move |g| (n, g)))
                .filter(|&(n, g)| held(n, g))
                .map(|(n, g)| rates.energy[n][g][k])
                .sum();
            duals.mu[k] = (duals.mu[k] - energy_step[k] / tf * (cs.e_com[k] - used)).max(0.0);
        }
    }
    fill_idle(&mut best, rates, cs);
    Ok(SubchannelOutcome {
        assign: best,
        iterations,
        converged,
        duals,
    })
}

/// Hands idle subchannels to their best user, largest score first, while the rows still hold.
///
/// Prices cannot separate subchannels with identical usage and score, so the dual pass may
/// stop one subchannel short of what the rows admit.
fn fill_idle(x: &mut Assignment, rates: &FrozenRates, cs: &ConstraintSet) {
    let mut idle: Vec<(usize, usize, usize, f64)> = Vec::new();
    for (n, vn) in rates.value.iter().enumerate() {
        for g in 0..rates.num_subchannels() {
            if x[n].iter().any(|row| row[g]) {
                continue;
            }
            let mut pick: Option<(usize, f64)> = None;
            for (u, vu) in vn.iter().enumerate() {
                if pick.is_none_or(|(_, v)| vu[g] > v) {
                    pick = Some((u, vu[g]));
                }
            }
            if let Some((u, v)) = pick.filter(|(_, v)| *v > 0.0) {
                idle.push((n, g, u, v));
            }
        }
    }
    idle.sort_by(|a, b| b.3.total_cmp(&a.3));
    for (n, g, u, _) in idle {
        x[n][u][g] = true;
        if rates.row_violation(x, cs) > ROW_TOL {
            x[n][u][g] = false;
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PowerOutcome {
    pub power: Vec<Vec<Vec<f64>>>,
    /// Slacks at their fixed point for `power`.
    pub slack: SlackState,
    /// Objective at `(power, slack)`.
    pub value: f64,
    pub iterations: usize,
    /// Objective of every consistent inner iterate.
    pub history: Vec<f64>,
}

fn consistent_sum(
    sc: &Scenario,
    x: &Assignment,
    hover: &[f64],
    power: &[Vec<Vec<f64>>],
) -> Result<(SlackState, f64)> {
    let slack = SlackState::for_power(sc, power)?;
    let rates = FrozenRates::new(sc, power, hover, &slack)?;
    Ok((slack, rates.total(x)))
}

/// Power allocation for a frozen assignment and hovering times.
///
/// Alternates the concave kernel with slacks held fixed and the slack fixed point, from
/// `P = 0, w = 1`, until the objective changes by at most `inner_tol`. Returns the best
/// consistent iterate.
pub fn allocate_power_sum(
    sc: &Scenario,
    cs: &ConstraintSet,
    x: &Assignment,
    hover: &[f64],
    cfg: &SolverConfig,
) -> Result<PowerOutcome> {
    let mut slack = SlackState::ones(sc);
    let mut damper = SlackDamper::default();
    let mut best: Option<PowerOutcome> = None;
    let mut history = Vec::new();
    let mut prev = f64::NAN;
    for j in 1..=cfg.max_power_iters {
        let program = PowerProgram::build(sc, cs, x, hover, &slack);
        let sol = maximize_separable_concave(
            &crate::kernels::SeparableConcaveProgram {
                terms: program.terms.clone(),
                rows: program.rows.clone(),
            },
            cfg.kernel,
        )?;
        let power = program.scatter(sc, &sol.p);
        let (next_slack, value) = consistent_sum(sc, x, hover, &power)?;
        history.push(value);
        if best.as_ref().is_none_or(|b| value > b.value) {
            best = Some(PowerOutcome {
                power,
                slack: next_slack.clone(),
                value,
                iterations: j,
                history: Vec::new(),
            });
        }
        slack = damper.next(&history, cfg.inner_tol, &slack, &next_slack);
        if j >= 2 && relative_change(prev, value) <= cfg.inner_tol {
            let mut out = best.expect("at least one iterate");
            out.iterations = j;
            out.history = history;
            return Ok(out);
        }
        prev = value;
    }
    let residual = match history.as_slice() {
        [.., a, b] => relative_change(*a, *b),
        _ => f64::NAN,
    };
    Err(Error::Numerical {
        message: format!("power alternation did not settle, objective trace {history:?}"),
        residual,
    })
}

/// Per-slot efficiency coefficient `sum_{u,g} x R_a` at frozen powers and slacks.
pub(crate) fn slot_rates(
    sc: &Scenario,
    x: &Assignment,
    power: &[Vec<Vec<f64>>],
    slack: &SlackState,
) -> Result<Vec<Vec<f64>>> {
    let unit = vec![1.0; sc.num_slots()];
    let rates = FrozenRates::new(sc, power, &unit, slack)?;
    Ok(rates.user_totals(x))
}

/// Hovering times maximizing `sum_n c_n T_n` under the energy, total-time and per-slot caps.
pub fn schedule_time_sum(
    sc: &Scenario,
    cs: &ConstraintSet,
    x: &Assignment,
    power: &[Vec<Vec<f64>>],
    slack: &SlackState,
) -> Result<Vec<f64>> {
    let n_slots = sc.num_slots();
    let c: Vec<f64> = slot_rates(sc, x, power, slack)?
        .iter()
        .map(|r| r.iter().sum())
        .collect();
    let mut a = Vec::with_capacity(sc.num_uavs + 1);
    let mut b = Vec::with_capacity(sc.num_uavs + 1);
    for k in 0..sc.num_uavs {
        a.push(
            (0..n_slots)
                .map(|n| slot_energy_rate(x, power, n, k))
                .collect(),
        );
        b.push(cs.e_com[k]);
    }
    a.push(vec![1.0; n_slots]);
    b.push(cs.t_total);
    let lp = LinearProgram {
        c,
        a,
        b,
        lo: vec![0.0; n_slots],
        hi: vec![cs.t_max; n_slots],
    };
    let sol = solve_lp(&lp)?;
    if sol.status != LpStatus::Optimal {
        return Err(Error::Internal(format!(
            "time LP returned {:?} although T = 0 is feasible",
            sol.status
        )));
    }
    Ok(settle_hover(sol.x, sc, cs, x, power))
}

/// Block-coordinate maximization of the approximate overall efficiency.
///
/// Starts from `T_n = min(T_total / N, T_max)` and, for the first subchannel pass only, the
/// equal-power split (with zero power every score would vanish). Each outer iteration runs
/// subchannel, power and time blocks; a block result that would lower the objective is
/// discarded, so the trace never decreases.
pub fn joint_sum(sc: &Scenario, cs: &ConstraintSet, cfg: SolverConfig) -> Result<BcdState> {
    sc.validate()?;
    cs.validate(sc.num_uavs)?;
    let mut st = BcdState::new(sc, cs, cfg);
    let mut prev = 0.0;
    for r in 1..=cfg.max_outer {
        st.iteration = r;

        let frozen = if r == 1 {
            equal_power(sc, cs, &st.alloc.hover, None)
        } else {
            st.alloc.power.clone()
        };
        let frozen_slack = SlackState::for_power(sc, &frozen)?;
        let rates = FrozenRates::new(sc, &frozen, &st.alloc.hover, &frozen_slack)?;
        let incumbent = (r > 1).then(|| st.alloc.assign.clone());
        let pass =
            allocate_subchannels_sum(&rates, cs, incumbent.as_ref(), cfg.max_subchannel_iters)?;
        if !pass.converged {
            st.capped_passes += 1;
        }
        st.alloc.assign = pass.assign;
        st.alloc.power = frozen;
        st.alloc.clear_unassigned_power();
        st.slack = SlackState::fixed_point(&st.alloc, sc)?;
        let mut value = objective_sum(&st.alloc, &st.slack, sc)?;
        st.record(sc, cs, Phase::Subchannel, value)?;

        let po = allocate_power_sum(sc, cs, &st.alloc.assign, &st.alloc.hover, &cfg)?;
        if po.value > value {
            st.alloc.power = po.power;
            st.slack = po.slack;
            value = po.value;
        }
        st.record(sc, cs, Phase::Power, value)?;

        let hover = schedule_time_sum(sc, cs, &st.alloc.assign, &st.alloc.power, &st.slack)?;
        let candidate = Allocation {
            hover,
            ..st.alloc.clone()
        };
        let t_value = objective_sum(&candidate, &st.slack, sc)?;
        if t_value >= value {
            st.alloc = candidate;
            value = t_value;
        }
        st.record(sc, cs, Phase::Time, value)?;

        if relative_change(prev, value) <= cfg.outer_tol {
            st.converged = true;
            break;
        }
        prev = value;
    }
    Ok(st)
}
