//! Max-min fairness pipeline: greedy subchannel assignment with coverage, max-min power
//! alternation, epigraph time LP and the block-coordinate outer loop.

use crate::blocks::{
    compensation, equal_power, relative_change, settle_hover, slot_energy_rate, Assignment,
    BcdState, FrozenRates, Phase, PowerProgram, SlackDamper, SolverConfig,
};
use crate::error::{Error, Result};
use crate::kernels::{
    maximize_minrow_concave, solve_lp, LinearProgram, LpStatus, MinRowProgram, RateRow,
};
use crate::model::{objective_min, Allocation, ConstraintSet, Scenario, SlackState};
use crate::sum::slot_rates;

fn best_remaining(values: &[f64], free: &[bool]) -> Option<usize> {
    let mut pick: Option<usize> = None;
    for g in (0..values.len()).filter(|&g| free[g]) {
        if pick.is_none_or(|p| values[g] > values[p]) {
            pick = Some(g);
        }
    }
    pick
}

fn argmin(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if *v < values[best] {
            best = i;
        }
    }
    best
}

/// Gain-greedy assignment of one slot in which every user gets a subchannel.
///
/// Users take their best subchannel one by one, poorest (by total score) first; every
/// remaining subchannel then goes to whoever currently has the lowest total, who picks its
/// best one. `values[u][g]` are the per-subchannel scores; needs `G >= U`.
pub fn greedy_coverage_init(values: &[Vec<f64>]) -> Result<Vec<Vec<bool>>> {
    let u_count = values.len();
    let g_count = values.first().map_or(0, Vec::len);
    if g_count < u_count {
        return Err(Error::Config(format!(
            "{u_count} users cannot each hold one of {g_count} subchannels"
        )));
    }
    let mut x = vec![vec![false; g_count]; u_count];
    let mut free = vec![true; g_count];
    let mut totals = vec![0.0; u_count];
    let mut order: Vec<usize> = (0..u_count).collect();
    let potential: Vec<f64> = values.iter().map(|r| r.iter().sum()).collect();
    order.sort_by(|&a, &b| potential[a].total_cmp(&potential[b]).then(a.cmp(&b)));
    for &u in &order {
        let g = best_remaining(&values[u], &free).expect("G >= U leaves a subchannel");
        x[u][g] = true;
        free[g] = false;
        totals[u] += values[u][g];
    }
    while free.iter().any(|&f| f) {
        let u = argmin(&totals);
        let g = best_remaining(&values[u], &free).expect("a subchannel is free");
        x[u][g] = true;
        free[g] = false;
        totals[u] += values[u][g];
    }
    Ok(x)
}

/// Bundles of a holding considered by an exchange: every subset of size one or two, plus the
/// whole holding.
fn bundles(held: &[usize]) -> Vec<Vec<usize>> {
    let mut out = vec![Vec::new()];
    for (i, &a) in held.iter().enumerate() {
        out.push(vec![a]);
        for &b in &held[i + 1..] {
            out.push(vec![a, b]);
        }
    }
    if held.len() > 2 {
        out.push(held.to_vec());
    }
    out
}

/// Best exchange between the worst-off user and one other user: each side hands over a bundle
/// and keeps at least one subchannel. Returns `(other, given, taken)` only if the smaller of
/// the two new totals beats the worst-off total.
fn best_exchange(
    values: &[Vec<f64>],
    x: &[Vec<bool>],
    v: &[f64],
    worst: usize,
) -> Option<(usize, Vec<usize>, Vec<usize>)> {
    let held = |u: usize| -> Vec<usize> { (0..x[u].len()).filter(|&g| x[u][g]).collect() };
    let worth = |u: usize, set: &[usize]| -> f64 { set.iter().map(|&g| values[u][g]).sum() };
    let mine = held(worst);
    let mut best: Option<(f64, usize, Vec<usize>, Vec<usize>)> = None;
    for other in (0..values.len()).filter(|&u| u != worst) {
        let theirs = held(other);
        for give in bundles(&mine) {
            for take in bundles(&theirs) {
                if (give.is_empty() && take.is_empty())
                    || (give.len() == mine.len() && take.is_empty())
                    || (take.len() == theirs.len() && give.is_empty())
                {
                    continue;
                }
                let me = v[worst] - worth(worst, &give) + worth(worst, &take);
                let them = v[other] - worth(other, &take) + worth(other, &give);
                let m = me.min(them);
                if m > v[worst] + 1e-12 * v[worst].abs().max(1e-300)
                    && best.as_ref().is_none_or(|b| m > b.0)
                {
                    best = Some((m, other, give.clone(), take));
                }
            }
        }
    }
    best.map(|(_, other, give, take)| (other, give, take))
}

/// Greedy initialization followed by improving moves, for one slot.
///
/// A move hands the cheapest subchannel of the best-off user holding more than one to the
/// worst-off user, and is applied only if the receiver stays at or below the donor. When no
/// such move qualifies, the worst-off user may instead exchange a bundle (one, two or all of
/// its subchannels) with another user's bundle, provided both end above the old minimum. Stops
/// when neither applies or the minimum has not grown by more than `1e-3` (relative) over `U`
/// consecutive steps.
pub fn greedy_maxmin_slot(values: &[Vec<f64>]) -> Result<Vec<Vec<bool>>> {
    let mut x = greedy_coverage_init(values)?;
    let u_count = values.len();
    let g_count = values.first().map_or(0, Vec::len);
    let total = |x: &[Vec<bool>], u: usize| -> f64 {
        (0..g_count)
            .filter(|&g| x[u][g])
            .map(|g| values[u][g])
            .sum()
    };
    let mut stagnant = 0;
    for _ in 0..4 * g_count * u_count.max(1) {
        let v: Vec<f64> = (0..u_count).map(|u| total(&x, u)).collect();
        let tau = v.iter().copied().fold(f64::INFINITY, f64::min);
        let worst = argmin(&v);
        let donor = (0..u_count)
            .filter(|&u| x[u].iter().filter(|&&b| b).count() > 1)
            .fold(None, |acc: Option<usize>, u| match acc {
                Some(b) if v[b] >= v[u] => Some(b),
                _ => Some(u),
            })
            .filter(|&d| d != worst);
        let transfer = donor.and_then(|donor| {
            let g = (0..g_count)
                .filter(|&g| x[donor][g])
                .fold(None, |acc: Option<usize>, g| match acc {
                    Some(b) if values[donor][b] <= values[donor][g] => Some(b),
                    _ => Some(g),
                })
                .expect("donor holds subchannels");
            let gain = values[worst][g];
            (gain > 0.0 && v[worst] + gain <= v[donor] - values[donor][g]).then_some((donor, g))
        });
        let other = if let Some((donor, g)) = transfer {
            x[donor][g] = false;
            x[worst][g] = true;
            donor
        } else if let Some((other, give, take)) = best_exchange(values, &x, &v, worst) {
            for g in give {
                x[worst][g] = false;
                x[other][g] = true;
            }
            for g in take {
                x[other][g] = false;
                x[worst][g] = true;
            }
            other
        } else {
            break;
        };
        debug_assert!(total(&x, worst).min(total(&x, other)) >= v[worst].min(v[other]));
        let new_tau = (0..u_count)
            .map(|u| total(&x, u))
            .fold(f64::INFINITY, f64::min);
        if relative_change(tau, new_tau) <= 1e-3 {
            stagnant += 1;
            if stagnant >= u_count {
                break;
            }
        } else {
            stagnant = 0;
        }
    }
    Ok(x)
}

/// Max-min subchannel assignment for frozen powers, times and slacks.
///
/// The interference, energy and power rows are not checked: with a feasible predecessor whose
/// power vanishes on unheld subchannels, every exclusive assignment satisfies them. Per slot,
/// the incumbent is kept when the greedy result does not raise that slot's minimum.
pub fn allocate_subchannels_maxmin(
    rates: &FrozenRates,
    incumbent: Option<&Assignment>,
) -> Result<Assignment> {
    let mut x = Vec::with_capacity(rates.num_slots());
    for (n, values) in rates.value.iter().enumerate() {
        let greedy = greedy_maxmin_slot(values)?;
        let slot_min = |xs: &[Vec<bool>]| {
            xs.iter()
                .zip(values)
                .map(|(xu, vu)| {
                    xu.iter()
                        .zip(vu)
                        .filter(|(on, _)| **on)
                        .map(|(_, v)| v)
                        .sum::<f64>()
                })
                .fold(f64::INFINITY, f64::min)
        };
        let covered = |xs: &[Vec<bool>]| xs.iter().all(|row| row.iter().any(|&b| b));
        let keep = incumbent.map(|inc| &inc[n]).filter(|inc| {
            inc.len() == values.len() && covered(inc) && slot_min(inc) >= slot_min(&greedy)
        });
        x.push(keep.cloned().unwrap_or(greedy));
    }
    Ok(x)
}

#[derive(Debug, Clone, PartialEq)]
pub struct MaxminPowerOutcome {
    pub power: Vec<Vec<Vec<f64>>>,
    pub slack: SlackState,
    /// Smallest per-user efficiency at `(power, slack)`.
    pub tau: f64,
    pub iterations: usize,
    pub history: Vec<f64>,
}

fn consistent_min(
    sc: &Scenario,
    x: &Assignment,
    hover: &[f64],
    power: &[Vec<Vec<f64>>],
) -> Result<(SlackState, f64)> {
    let slack = SlackState::for_power(sc, power)?;
    let rates = FrozenRates::new(sc, power, hover, &slack)?;
    Ok((slack, rates.min_total(x)))
}

/// Power allocation maximizing the smallest per-user efficiency for frozen `x` and `T`.
///
/// Alternates the min-row kernel (slacks fixed) with the slack fixed point from `P = 0,
/// w = 1` until the minimum changes by at most `inner_tol`; returns the best consistent iterate.
pub fn allocate_power_maxmin(
    sc: &Scenario,
    cs: &ConstraintSet,
    x: &Assignment,
    hover: &[f64],
    cfg: &SolverConfig,
) -> Result<MaxminPowerOutcome> {
    for (n, xn) in x.iter().enumerate() {
        if let Some(u) = xn.iter().position(|row| !row.iter().any(|&b| b)) {
            return Err(Error::Usage(format!(
                "user {u} of slot {n} holds no subchannel"
            )));
        }
    }
    let k_count = sc.num_uavs;
    let mut slack = SlackState::ones(sc);
    let mut damper = SlackDamper::default();
    let mut best: Option<MaxminPowerOutcome> = None;
    let mut history = Vec::new();
    let mut prev = f64::NAN;
    for j in 1..=cfg.max_power_iters {
        let program = PowerProgram::build(sc, cs, x, hover, &slack);
        let mut rate_rows = Vec::with_capacity(sc.num_users());
        for n in 0..sc.num_slots() {
            for u in 0..sc.users_per_slot[n] {
                let vars = program
                    .blocks
                    .iter()
                    .enumerate()
                    .filter(|(_, b)| b.0 == n && b.2 == u)
                    .flat_map(|(bi, _)| bi * k_count..(bi + 1) * k_count)
                    .collect();
                let constant = hover[n]
                    * (0..sc.num_subchannels)
                        .filter(|&g| x[n][u][g])
                        .map(|g| compensation(slack.w[n][u][g], sc.antennas_per_user))
                        .sum::<f64>();
                rate_rows.push(RateRow { vars, constant });
            }
        }
        let prog = MinRowProgram {
            terms: program.terms.clone(),
            rate_rows,
            rows: program.rows.clone(),
        };
        let sol = maximize_minrow_concave(&prog, cfg.kernel)?;
        let power = program.scatter(sc, &sol.p);
        let (next_slack, tau) = consistent_min(sc, x, hover, &power)?;
        history.push(tau);
        if best.as_ref().is_none_or(|b| tau > b.tau) {
            best = Some(MaxminPowerOutcome {
                power,
                slack: next_slack.clone(),
                tau,
                iterations: j,
                history: Vec::new(),
            });
        }
        slack = damper.next(&history, cfg.inner_tol, &slack, &next_slack);
        if j >= 2 && relative_change(prev, tau) <= cfg.inner_tol {
            let mut out = best.expect("at least one iterate");
            out.iterations = j;
            out.history = history;
            return Ok(out);
        }
        prev = tau;
    }
    let residual = match history.as_slice() {
        [.., a, b] => relative_change(*a, *b),
        _ => f64::NAN,
    };
    Err(Error::Numerical {
        message: format!("max-min power alternation did not settle, tau trace {history:?}"),
        residual,
    })
}

/// Hovering times maximizing the smallest `c_{n,u} T_n`, via the epigraph LP.
///
/// Among optimal schedules, a second LP picks one maximizing the overall efficiency.
pub fn schedule_time_maxmin(
    sc: &Scenario,
    cs: &ConstraintSet,
    x: &Assignment,
    power: &[Vec<Vec<f64>>],
    slack: &SlackState,
) -> Result<Vec<f64>> {
    let n_slots = sc.num_slots();
    let coeffs = slot_rates(sc, x, power, slack)?;
    let mut a: Vec<Vec<f64>> = Vec::new();
    let mut b = Vec::new();
    for k in 0..sc.num_uavs {
        let mut row: Vec<f64> = (0..n_slots)
            .map(|n| slot_energy_rate(x, power, n, k))
            .collect();
        row.push(0.0);
        a.push(row);
        b.push(cs.e_com[k]);
    }
    let mut time_row = vec![1.0; n_slots];
    time_row.push(0.0);
    a.push(time_row);
    b.push(cs.t_total);
    for (n, per_u) in coeffs.iter().enumerate() {
        for &c in per_u {
            let mut row = vec![0.0; n_slots + 1];
            row[n] = -c;
            row[n_slots] = 1.0;
            a.push(row);
            b.push(0.0);
        }
    }
    let mut c = vec![0.0; n_slots + 1];
    c[n_slots] = 1.0;
    let mut lo = vec![0.0; n_slots + 1];
    let mut hi = vec![cs.t_max; n_slots + 1];
    hi[n_slots] = f64::INFINITY;
    let stage1 = solve_lp(&LinearProgram {
        c,
        a: a.clone(),
        b: b.clone(),
        lo: lo.clone(),
        hi: hi.clone(),
    })?;
    if stage1.status != LpStatus::Optimal {
        return Err(Error::Internal(format!(
            "max-min time LP returned {:?}",
            stage1.status
        )));
    }
    let tau_star = stage1.x[n_slots];
    let first = settle_hover(stage1.x[..n_slots].to_vec(), sc, cs, x, power);
    let min_of = |t: &[f64]| {
        coeffs
            .iter()
            .enumerate()
            .flat_map(|(n, per_u)| per_u.iter().map(move |c| c * t[n]))
            .fold(f64::INFINITY, f64::min)
    };

    // Second stage: keep every user at tau* and spend what is left on overall efficiency.
    lo[n_slots] = tau_star;
    hi[n_slots] = tau_star;
    let mut c2: Vec<f64> = coeffs.iter().map(|per_u| per_u.iter().sum()).collect();
    c2.push(0.0);
    let stage2 = solve_lp(&LinearProgram {
        c: c2,
        a,
        b,
        lo,
        hi,
    })?;
    if stage2.status == LpStatus::Optimal {
        let second = settle_hover(stage2.x[..n_slots].to_vec(), sc, cs, x, power);
        if min_of(&second) >= min_of(&first) * (1.0 - 1e-12) {
            return Ok(second);
        }
    }
    Ok(first)
}

/// Block-coordinate maximization of the smallest per-user efficiency.
///
/// Same shell as [`crate::sum::joint_sum`] with the max-min blocks. Requires `G >= U_n` in
/// every slot.
pub fn joint_maxmin(sc: &Scenario, cs: &ConstraintSet, cfg: SolverConfig) -> Result<BcdState> {
    sc.validate()?;
    cs.validate(sc.num_uavs)?;
    if let Some((n, &u)) = sc
        .users_per_slot
        .iter()
        .enumerate()
        .find(|(_, &u)| u > sc.num_subchannels)
    {
        return Err(Error::Config(format!(
            "slot {n} has {u} users but only {} subchannels",
            sc.num_subchannels
        )));
    }
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
        st.alloc.assign = allocate_subchannels_maxmin(&rates, incumbent.as_ref())?;
        st.alloc.power = frozen;
        st.alloc.clear_unassigned_power();
        st.slack = SlackState::fixed_point(&st.alloc, sc)?;
        let mut value = objective_min(&st.alloc, &st.slack, sc)?;
        st.record(sc, cs, Phase::Subchannel, value)?;

        let po = allocate_power_maxmin(sc, cs, &st.alloc.assign, &st.alloc.hover, &cfg)?;
        if po.tau > value {
            st.alloc.power = po.power;
            st.slack = po.slack;
            value = po.tau;
        }
        st.record(sc, cs, Phase::Power, value)?;

        let hover = schedule_time_maxmin(sc, cs, &st.alloc.assign, &st.alloc.power, &st.slack)?;
        let candidate = Allocation {
            hover,
            ..st.alloc.clone()
        };
        let t_value = objective_min(&candidate, &st.slack, sc)?;
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
