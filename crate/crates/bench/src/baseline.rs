//! Equal-allocation reference scheme.

use csun_core::blocks::{equal_power, FrozenRates};
use csun_core::maxmin::greedy_coverage_init;
use csun_core::{Allocation, ConstraintSet, Result, Scenario, SlackState};

/// Gain-greedy subchannels, equal hovering times and equal power.
///
/// Hovering times are `min(T_max, T_total / N)`. Subchannels come from the same greedy
/// coverage initializer as the max-min pipeline, scored with an equal split of `p_max` over
/// all subchannels; if a slot has more users than subchannels, each subchannel simply goes
/// to its best user. Each UAV then splits `p_max` over the held subchannels of a slot, and
/// all powers are scaled down by the smallest common factor that satisfies the interference
/// and energy rows.
pub fn baseline_equal(sc: &Scenario, cs: &ConstraintSet) -> Result<Allocation> {
    sc.validate()?;
    cs.validate(sc.num_uavs)?;
    let n_slots = sc.num_slots();
    let t = (cs.t_total / n_slots as f64).min(cs.t_max);
    let hover = vec![t; n_slots];

    let probe = equal_power(sc, cs, &hover, None);
    let slack = SlackState::for_power(sc, &probe)?;
    let rates = FrozenRates::new(sc, &probe, &hover, &slack)?;
    let mut assign = Vec::with_capacity(n_slots);
    for values in &rates.value {
        let x = if values.len() <= sc.num_subchannels {
            greedy_coverage_init(values)?
        } else {
            best_user_only(values, sc.num_subchannels)
        };
        assign.push(x);
    }
    let power = equal_power(sc, cs, &hover, Some(&assign));
    let mut alloc = Allocation {
        assign,
        power,
        hover,
    };
    alloc.clear_unassigned_power();
    Ok(alloc)
}

fn best_user_only(values: &[Vec<f64>], g_count: usize) -> Vec<Vec<bool>> {
    let mut x = vec![vec![false; g_count]; values.len()];
    for g in 0..g_count {
        let mut best = 0;
        for u in 1..values.len() {
            if values[u][g] > values[best][g] {
                best = u;
            }
        }
        x[best][g] = true;
    }
    x
}
