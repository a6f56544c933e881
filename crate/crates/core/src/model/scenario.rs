use serde::{Deserialize, Serialize};

use crate::error::{usage, Error, Result};

/// A point in metres: `[x, y, z]`.
pub type Position = [f64; 3];

/// Node positions used to derive the large-scale gains.
///
/// Hand-built scenarios may leave every list empty; only coverage maps need it.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Geometry {
    /// UAV hovering positions per slot, `[n][k]`.
    pub uavs: Vec<Vec<Position>>,
    /// UAV-user positions per slot, `[n][u]`.
    pub users: Vec<Vec<Position>>,
    /// Satellite-user positions, `[i]`.
    pub sat_users: Vec<Position>,
}

/// Large-scale description of one network snapshot.
///
/// Gains are amplitude gains `l`; every formula squares them itself.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    /// `K`, UAVs in the swarm.
    pub num_uavs: usize,
    /// `M`, receive antennas per UAV user.
    pub antennas_per_user: usize,
    /// `G`, subchannels shared with the satellite.
    pub num_subchannels: usize,
    /// `U_n` for each slot; its length is the slot count `N`.
    pub users_per_slot: Vec<usize>,
    /// `N_s`, satellite users.
    pub num_sat_users: usize,
    /// Noise power `sigma^2` in watts.
    pub noise_power: f64,
    /// Carrier frequency in hertz.
    pub carrier_freq: f64,
    /// Constant specific attenuation in dB/km applied on top of free-space loss.
    pub atten_db_per_km: f64,
    /// UAV-to-user amplitude gains `l[n][u][g][k]`.
    pub gain_uav: Vec<Vec<Vec<Vec<f64>>>>,
    /// UAV-to-satellite-user amplitude gains `l~[n][i][g][k]`.
    pub gain_sat: Vec<Vec<Vec<Vec<f64>>>>,
    /// Satellite occupancy `y[n][i][g]`.
    pub sat_occupancy: Vec<Vec<Vec<bool>>>,
    pub geometry: Geometry,
}

impl Scenario {
    pub fn num_slots(&self) -> usize {
        self.users_per_slot.len()
    }

    /// Total UAV users `N_U`.
    pub fn num_users(&self) -> usize {
        self.users_per_slot.iter().sum()
    }

    /// Gains `l[n][u][g][..]` for every UAV.
    pub fn uav_gains(&self, n: usize, u: usize, g: usize) -> &[f64] {
        &self.gain_uav[n][u][g]
    }

    /// Checks dimensions and value ranges of every tensor.
    pub fn validate(&self) -> Result<()> {
        let k = self.num_uavs;
        let g = self.num_subchannels;
        if k == 0 || g == 0 || self.antennas_per_user == 0 || self.users_per_slot.is_empty() {
            return Err(Error::Config("K, M, G and N must all be positive".into()));
        }
        if !(self.noise_power > 0.0 && self.noise_power.is_finite()) {
            return Err(Error::Config(format!(
                "noise power must be positive and finite, got {}",
                self.noise_power
            )));
        }
        let n_slots = self.num_slots();
        if self.gain_uav.len() != n_slots
            || self.gain_sat.len() != n_slots
            || self.sat_occupancy.len() != n_slots
        {
            return Err(usage(
                "slot dimension of gain/occupancy tensors differs from N",
            ));
        }
        for n in 0..n_slots {
            check_gain_block(&self.gain_uav[n], self.users_per_slot[n], g, k, "l", n)?;
            check_gain_block(&self.gain_sat[n], self.num_sat_users, g, k, "l_tilde", n)?;
            let occ = &self.sat_occupancy[n];
            if occ.len() != self.num_sat_users || occ.iter().any(|row| row.len() != g) {
                return Err(usage(format!("y[{n}] has wrong shape")));
            }
        }
        Ok(())
    }

    /// Returns an error unless `n` addresses a slot.
    pub(crate) fn check_slot(&self, n: usize) -> Result<()> {
        if n >= self.num_slots() {
            return Err(usage(format!(
                "slot {n} out of range (N = {})",
                self.num_slots()
            )));
        }
        Ok(())
    }
}

fn check_gain_block(
    block: &[Vec<Vec<f64>>],
    rows: usize,
    g: usize,
    k: usize,
    name: &str,
    n: usize,
) -> Result<()> {
    if block.len() != rows {
        return Err(usage(format!(
            "{name}[{n}] has {} rows, expected {rows}",
            block.len()
        )));
    }
    for (r, per_g) in block.iter().enumerate() {
        if per_g.len() != g || per_g.iter().any(|v| v.len() != k) {
            return Err(usage(format!("{name}[{n}][{r}] has wrong shape")));
        }
        for (gi, per_k) in per_g.iter().enumerate() {
            for (ki, &l) in per_k.iter().enumerate() {
                let power_gain = l * l;
                if !(l.is_finite() && l >= 0.0 && power_gain > 0.0 && power_gain <= 1.0) {
                    return Err(Error::Domain(format!(
                        "{name}[{n}][{r}][{gi}][{ki}] = {l} gives a power gain outside (0, 1]"
                    )));
                }
            }
        }
    }
    Ok(())
}
