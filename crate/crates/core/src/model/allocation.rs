use serde::{Deserialize, Serialize};

use crate::error::{usage, Result};
use crate::model::Scenario;

/// Joint decision: subchannel indicators, transmit powers and hovering times.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Allocation {
    /// `x[n][u][g]`: subchannel `g` of slot `n` serves user `u`.
    pub assign: Vec<Vec<Vec<bool>>>,
    /// `p[n][g][k]` in watts, the diagonal of `P_{n,g}`.
    pub power: Vec<Vec<Vec<f64>>>,
    /// Hovering time `T[n]` in seconds.
    pub hover: Vec<f64>,
}

impl Allocation {
    /// All-zero allocation shaped for `sc`.
    pub fn zeros(sc: &Scenario) -> Self {
        let g = sc.num_subchannels;
        Self {
            assign: sc
                .users_per_slot
                .iter()
                .map(|&u| vec![vec![false; g]; u])
                .collect(),
            power: vec![vec![vec![0.0; sc.num_uavs]; g]; sc.num_slots()],
            hover: vec![0.0; sc.num_slots()],
        }
    }

    /// User served on `(n, g)`, if any. Lowest index wins if exclusivity is broken.
    pub fn owner(&self, n: usize, g: usize) -> Option<usize> {
        self.assign[n].iter().position(|row| row[g])
    }

    /// Subchannels held by user `(n, u)`.
    pub fn served_subchannels(&self, n: usize, u: usize) -> impl Iterator<Item = usize> + '_ {
        self.assign[n][u]
            .iter()
            .enumerate()
            .filter(|(_, &on)| on)
            .map(|(g, _)| g)
    }

    /// Verifies the tensor shapes against `sc`.
    pub fn check_shape(&self, sc: &Scenario) -> Result<()> {
        let (n_slots, g, k) = (sc.num_slots(), sc.num_subchannels, sc.num_uavs);
        if self.assign.len() != n_slots
            || self.power.len() != n_slots
            || self.hover.len() != n_slots
        {
            return Err(usage("allocation slot count differs from scenario"));
        }
        for n in 0..n_slots {
            if self.assign[n].len() != sc.users_per_slot[n]
                || self.assign[n].iter().any(|r| r.len() != g)
            {
                return Err(usage(format!("x[{n}] has wrong shape")));
            }
            if self.power[n].len() != g || self.power[n].iter().any(|r| r.len() != k) {
                return Err(usage(format!("P[{n}] has wrong shape")));
            }
        }
        Ok(())
    }

    /// Zeroes the powers of subchannels no user holds.
    pub fn clear_unassigned_power(&mut self) {
        for n in 0..self.power.len() {
            for g in 0..self.power[n].len() {
                if self.owner(n, g).is_none() {
                    self.power[n][g].iter_mut().for_each(|p| *p = 0.0);
                }
            }
        }
    }
}

/// Slack variables `w[n][u][g] >= 1`, one per (slot, user, subchannel).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlackState {
    pub w: Vec<Vec<Vec<f64>>>,
}

impl SlackState {
    /// `w = 1` everywhere (equivalently `v = 0`).
    pub fn ones(sc: &Scenario) -> Self {
        Self {
            w: sc
                .users_per_slot
                .iter()
                .map(|&u| vec![vec![1.0; sc.num_subchannels]; u])
                .collect(),
        }
    }

    /// Log-domain view `v = ln w`.
    pub fn v(&self, n: usize, u: usize, g: usize) -> f64 {
        self.w[n][u][g].ln()
    }
}
