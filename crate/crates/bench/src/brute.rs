//! Exhaustive subchannel search for frozen powers, times and slacks.

use csun_core::blocks::{Assignment, FrozenRates};
use csun_core::{ConstraintSet, Error, Result};

/// Largest number of assignments a single search may visit.
pub const MAX_STATES: f64 = 1e6;

const ROW_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BruteObjective {
    /// Maximize `sum x * value`.
    Sum,
    /// Maximize the smallest per-user total; every user must hold a subchannel.
    Maxmin,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BruteForce {
    pub assign: Assignment,
    pub value: f64,
    /// Assignments scored.
    pub examined: usize,
}

/// Exact optimum over exclusive assignments `x[n][u][g]`.
///
/// Each subchannel is idle or held by one user. With `enforce_rows` the interference, energy
/// and power rows of the frozen usage must hold too; since the energy rows couple slots, that
/// search runs over all slots jointly. Without it the slots are searched independently, which
/// is exact for both objectives. Ties keep the first assignment in enumeration order.
pub fn brute_force_assignment(
    rates: &FrozenRates,
    cs: &ConstraintSet,
    objective: BruteObjective,
    enforce_rows: bool,
) -> Result<BruteForce> {
    let g_count = rates.num_subchannels();
    let users: Vec<usize> = rates.value.iter().map(Vec::len).collect();
    if objective == BruteObjective::Maxmin {
        if let Some((n, &u)) = users.iter().enumerate().find(|(_, &u)| u > g_count) {
            return Err(Error::Config(format!(
                "slot {n}: {u} users cannot each hold one of {g_count} subchannels"
            )));
        }
    }
    let slot_states = |u: usize| ((u + 1) as f64).powi(g_count as i32);
    if enforce_rows {
        let states: f64 = users.iter().map(|&u| slot_states(u)).product();
        if states > MAX_STATES {
            return Err(Error::Usage(format!(
                "joint search over {states:e} assignments exceeds {MAX_STATES:e}"
            )));
        }
        let slots: Vec<usize> = (0..users.len()).collect();
        search(rates, cs, objective, &slots, &users, g_count, true)
    } else {
        if let Some(&u) = users.iter().find(|&&u| slot_states(u) > MAX_STATES) {
            return Err(Error::Usage(format!(
                "slot search over {:e} assignments exceeds {MAX_STATES:e}",
                slot_states(u)
            )));
        }
        let mut assign: Assignment = users
            .iter()
            .map(|&u| vec![vec![false; g_count]; u])
            .collect();
        let mut examined = 0;
        for n in 0..users.len() {
            let part = search(rates, cs, objective, &[n], &users, g_count, false)?;
            assign[n] = part.assign[n].clone();
            examined += part.examined;
        }
        let value = score(rates, &assign, objective);
        Ok(BruteForce {
            assign,
            value,
            examined,
        })
    }
}

fn score(rates: &FrozenRates, x: &Assignment, objective: BruteObjective) -> f64 {
    match objective {
        BruteObjective::Sum => rates.total(x),
        BruteObjective::Maxmin => rates.min_total(x),
    }
}

/// Enumerates the owners of every `(n, g)` for `n` in `slots` as a mixed-radix counter.
fn search(
    rates: &FrozenRates,
    cs: &ConstraintSet,
    objective: BruteObjective,
    slots: &[usize],
    users: &[usize],
    g_count: usize,
    enforce_rows: bool,
) -> Result<BruteForce> {
    let mut x: Assignment = users
        .iter()
        .map(|&u| vec![vec![false; g_count]; u])
        .collect();
    // Digit 0 means idle, digit u + 1 means user u.
    let cells: Vec<(usize, usize)> = slots
        .iter()
        .flat_map(|&n| (0..g_count).map(move |g| (n, g)))
        .collect();
    let mut digits = vec![0usize; cells.len()];
    let covered = |x: &Assignment| {
        slots
            .iter()
            .all(|&n| x[n].iter().all(|row| row.iter().any(|&b| b)))
    };
    let slot_score = |x: &Assignment| -> f64 {
        match objective {
            BruteObjective::Sum => slots
                .iter()
                .map(|&n| {
                    x[n].iter()
                        .zip(&rates.value[n])
                        .map(|(xu, vu)| dot(xu, vu))
                        .sum::<f64>()
                })
                .sum(),
            BruteObjective::Maxmin => slots
                .iter()
                .flat_map(|&n| x[n].iter().zip(&rates.value[n]).map(|(xu, vu)| dot(xu, vu)))
                .fold(f64::INFINITY, f64::min),
        }
    };
    let mut best: Option<(Assignment, f64)> = None;
    let mut examined = 0;
    loop {
        examined += 1;
        let admissible = (objective == BruteObjective::Sum || covered(&x))
            && (!enforce_rows || rates.row_violation(&x, cs) <= ROW_TOL);
        if admissible {
            let v = slot_score(&x);
            if best.as_ref().is_none_or(|(_, b)| v > *b) {
                best = Some((x.clone(), v));
            }
        }
        // Advance the counter.
        let mut pos = 0;
        loop {
            if pos == cells.len() {
                let (assign, value) =
                    best.ok_or_else(|| Error::Config("no admissible assignment exists".into()))?;
                return Ok(BruteForce {
                    assign,
                    value,
                    examined,
                });
            }
            let (n, g) = cells[pos];
            if digits[pos] > 0 {
                x[n][digits[pos] - 1][g] = false;
            }
            digits[pos] += 1;
            if digits[pos] <= users[n] {
                x[n][digits[pos] - 1][g] = true;
                break;
            }
            digits[pos] = 0;
            pos += 1;
        }
    }
}

fn dot(x: &[bool], v: &[f64]) -> f64 {
    x.iter().zip(v).filter(|(on, _)| **on).map(|(_, v)| v).sum()
}
