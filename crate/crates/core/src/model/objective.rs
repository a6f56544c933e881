use crate::error::{Error, Result};
use crate::model::{Allocation, Scenario, SlackState};
use crate::units::LOG2_E;

/// Large-scale approximation of the ergodic rate of one subchannel, bits/s/Hz.
///
/// `sum_k log2(1 + M l_k^2 p_k / (w sigma^2)) + M [log2 w - log2(e) (1 - 1/w)]`.
/// Exact (as a lower envelope) when `w` is the slack fixed point for `power`.
pub fn approx_rate(power: &[f64], w: f64, gains: &[f64], m: usize, noise: f64) -> Result<f64> {
    if !(w >= 1.0) {
        return Err(Error::Domain(format!("slack w must be >= 1, got {w}")));
    }
    if power.len() != gains.len() {
        return Err(Error::Usage(format!(
            "{} powers for {} gains",
            power.len(),
            gains.len()
        )));
    }
    if let Some(p) = power.iter().find(|p| !(**p >= 0.0)) {
        return Err(Error::Domain(format!(
            "power must be non-negative, got {p}"
        )));
    }
    if !(noise > 0.0) {
        return Err(Error::Domain(format!(
            "noise power must be positive, got {noise}"
        )));
    }
    Ok(approx_rate_unchecked(power, w, gains, m, noise))
}

#[inline]
pub(crate) fn approx_rate_unchecked(
    power: &[f64],
    w: f64,
    gains: &[f64],
    m: usize,
    noise: f64,
) -> f64 {
    let m = m as f64;
    let scale = m / (w * noise);
    let rate: f64 = power
        .iter()
        .zip(gains)
        .map(|(p, l)| (scale * l * l * p).ln_1p())
        .sum::<f64>()
        * LOG2_E;
    rate + m * (w.log2() - LOG2_E * (1.0 - 1.0 / w))
}

fn check_slack(slack: &SlackState, alloc: &Allocation, sc: &Scenario) -> Result<()> {
    alloc.check_shape(sc)?;
    let ok = slack.w.len() == sc.num_slots()
        && slack.w.iter().zip(&sc.users_per_slot).all(|(per_u, &u)| {
            per_u.len() == u && per_u.iter().all(|row| row.len() == sc.num_subchannels)
        });
    if !ok {
        return Err(Error::Usage(
            "slack state shape differs from scenario".into(),
        ));
    }
    Ok(())
}

/// Per-user approximate efficiency `sum_g x T_n R_a`, indexed `[n][u]`.
pub fn per_user_totals(
    alloc: &Allocation,
    slack: &SlackState,
    sc: &Scenario,
) -> Result<Vec<Vec<f64>>> {
    check_slack(slack, alloc, sc)?;
    let mut totals = Vec::with_capacity(sc.num_slots());
    for n in 0..sc.num_slots() {
        let mut row = vec![0.0; sc.users_per_slot[n]];
        for (u, total) in row.iter_mut().enumerate() {
            for g in alloc.served_subchannels(n, u) {
                let w = slack.w[n][u][g];
                let r = approx_rate(
                    &alloc.power[n][g],
                    w,
                    sc.uav_gains(n, u, g),
                    sc.antennas_per_user,
                    sc.noise_power,
                )?;
                *total += alloc.hover[n] * r;
            }
        }
        totals.push(row);
    }
    Ok(totals)
}

/// Approximate data transmission efficiency `D_a`, bit*s/Hz.
pub fn objective_sum(alloc: &Allocation, slack: &SlackState, sc: &Scenario) -> Result<f64> {
    Ok(per_user_totals(alloc, slack, sc)?.iter().flatten().sum())
}

/// Minimum per-user approximate efficiency, bit*s/Hz.
pub fn objective_min(alloc: &Allocation, slack: &SlackState, sc: &Scenario) -> Result<f64> {
    let totals = per_user_totals(alloc, slack, sc)?;
    let min = totals
        .iter()
        .flatten()
        .copied()
        .fold(f64::INFINITY, f64::min);
    Ok(if min.is_finite() { min.max(0.0) } else { 0.0 })
}
