use crate::error::{usage, Result};
use crate::model::{Allocation, ConstraintSet, Scenario};

/// Default relative tolerance applied to each constraint family.
pub const DEFAULT_FEASIBILITY_TOL: f64 = 1e-9;

/// Expected leakage power (watts) from the swarm into satellite user `i` during slot `n`.
///
/// Sums `x * y * l~^2 * p` over users, UAVs and subchannels.
pub fn leakage_interference(alloc: &Allocation, sc: &Scenario, n: usize, i: usize) -> Result<f64> {
    sc.check_slot(n)?;
    if i >= sc.num_sat_users {
        return Err(usage(format!(
            "satellite user {i} out of range (N_s = {})",
            sc.num_sat_users
        )));
    }
    if alloc.assign.len() != sc.num_slots() || alloc.power.len() != sc.num_slots() {
        return Err(usage("allocation slot count differs from scenario"));
    }
    Ok(leakage_unchecked(alloc, sc, n, i))
}

pub(crate) fn leakage_unchecked(alloc: &Allocation, sc: &Scenario, n: usize, i: usize) -> f64 {
    let mut total = 0.0;
    for g in 0..sc.num_subchannels {
        if !sc.sat_occupancy[n][i][g] {
            continue;
        }
        let users_on_g = alloc.assign[n].iter().filter(|row| row[g]).count();
        if users_on_g == 0 {
            continue;
        }
        let per_user: f64 = sc.gain_sat[n][i][g]
            .iter()
            .zip(&alloc.power[n][g])
            .map(|(l, p)| l * l * p)
            .sum();
        total += users_on_g as f64 * per_user;
    }
    total
}

/// Worst violation in each constraint family, in the family's own unit.
#[derive(Debug, Clone, PartialEq)]
pub struct FeasibilityReport {
    /// Leakage above `eps_p`, watts.
    pub interference: f64,
    /// Energy above `E_com`, joules.
    pub energy: f64,
    /// Per-slot power above `p_max`, watts.
    pub power: f64,
    /// `sum T - T_total`, seconds.
    pub total_time: f64,
    /// `T_n - T_max`, seconds.
    pub slot_time: f64,
    /// Number of `(n, g)` pairs held by more than one user.
    pub exclusivity: usize,
    /// Magnitude of the most negative power or time entry.
    pub negativity: f64,
    /// Largest violation relative to its right-hand side, over all families.
    pub worst_relative: f64,
    /// Relative tolerance used.
    pub tolerance: f64,
    pub feasible: bool,
}

/// Evaluates every constraint family of the joint problem for `alloc`.
pub fn check_feasibility(
    alloc: &Allocation,
    sc: &Scenario,
    cs: &ConstraintSet,
    tol: f64,
) -> Result<FeasibilityReport> {
    alloc.check_shape(sc)?;
    cs.validate(sc.num_uavs)?;
    let n_slots = sc.num_slots();
    let k_count = sc.num_uavs;
    let mut worst_rel: f64 = 0.0;

    let mut interference: f64 = 0.0;
    if cs.eps_p.is_finite() {
        for n in 0..n_slots {
            for i in 0..sc.num_sat_users {
                let excess = leakage_unchecked(alloc, sc, n, i) - cs.eps_p;
                interference = interference.max(excess);
                worst_rel = worst_rel.max(excess / cs.eps_p);
            }
        }
    }

    // Per-UAV power in each slot and energy over the flight.
    let mut power: f64 = 0.0;
    let mut energy_used = vec![0.0; k_count];
    for n in 0..n_slots {
        let mut slot_power = vec![0.0; k_count];
        for g in 0..sc.num_subchannels {
            let holders = alloc.assign[n].iter().filter(|row| row[g]).count() as f64;
            for (k, &p) in alloc.power[n][g].iter().enumerate() {
                slot_power[k] += holders * p;
            }
        }
        for (k, &p) in slot_power.iter().enumerate() {
            power = power.max(p - cs.p_max);
            energy_used[k] += p * alloc.hover[n];
        }
    }
    worst_rel = worst_rel.max(power / cs.p_max);
    let mut energy: f64 = 0.0;
    for (used, budget) in energy_used.iter().zip(&cs.e_com) {
        energy = energy.max(used - budget);
        worst_rel = worst_rel.max((used - budget) / budget);
    }

    let total_time = alloc.hover.iter().sum::<f64>() - cs.t_total;
    worst_rel = worst_rel.max(total_time / cs.t_total);
    let slot_time = alloc
        .hover
        .iter()
        .map(|t| t - cs.t_max)
        .fold(f64::NEG_INFINITY, f64::max)
        .max(0.0);
    worst_rel = worst_rel.max(slot_time / cs.t_max);

    let mut exclusivity = 0;
    for n in 0..n_slots {
        for g in 0..sc.num_subchannels {
            if alloc.assign[n].iter().filter(|row| row[g]).count() > 1 {
                exclusivity += 1;
            }
        }
    }

    let min_power = alloc
        .power
        .iter()
        .flatten()
        .flatten()
        .copied()
        .fold(0.0, f64::min);
    let min_time = alloc.hover.iter().copied().fold(0.0, f64::min);
    let negativity = (-min_power).max(-min_time).max(0.0);
    worst_rel = worst_rel
        .max(-min_power / cs.p_max)
        .max(-min_time / cs.t_max);

    let interference = interference.max(0.0);
    let energy = energy.max(0.0);
    let power = power.max(0.0);
    let total_time = total_time.max(0.0);
    let feasible = exclusivity == 0 && worst_rel <= tol && worst_rel.is_finite();

    Ok(FeasibilityReport {
        interference,
        energy,
        power,
        total_time,
        slot_time,
        exclusivity,
        negativity,
        worst_relative: worst_rel.max(0.0),
        tolerance: tol,
        feasible,
    })
}
