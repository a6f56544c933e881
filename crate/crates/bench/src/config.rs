//! Constraint files and scale presets.

use std::fs;
use std::path::Path;
use std::str::FromStr;

use csun_core::channel::ScenarioConfig;
use csun_core::units::{dbm_to_watts, watts_to_dbm};
use csun_core::{ConstraintSet, Error, Result};
use serde::{Deserialize, Serialize};

/// On-disk constraint set. A missing or `null` `eps_p_dbm` drops the interference rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstraintsFile {
    #[serde(default)]
    pub eps_p_dbm: Option<f64>,
    pub e_com_joules: Vec<f64>,
    pub p_max_watts: f64,
    pub t_total_s: f64,
    pub t_max_s: f64,
}

impl ConstraintsFile {
    pub fn to_constraints(&self) -> ConstraintSet {
        ConstraintSet {
            eps_p: self.eps_p_dbm.map_or(f64::INFINITY, dbm_to_watts),
            e_com: self.e_com_joules.clone(),
            p_max: self.p_max_watts,
            t_total: self.t_total_s,
            t_max: self.t_max_s,
        }
    }

    pub fn from_constraints(cs: &ConstraintSet) -> Self {
        Self {
            eps_p_dbm: cs.eps_p.is_finite().then(|| watts_to_dbm(cs.eps_p)),
            e_com_joules: cs.e_com.clone(),
            p_max_watts: cs.p_max,
            t_total_s: cs.t_total,
            t_max_s: cs.t_max,
        }
    }

    pub fn load(path: impl AsRef<Path>) -> Result<ConstraintSet> {
        let path = path.as_ref();
        let text = fs::read_to_string(path)?;
        let file: Self = serde_json::from_str(&text).map_err(|e| Error::Parse {
            context: path.display().to_string(),
            message: e.to_string(),
        })?;
        Ok(file.to_constraints())
    }

    pub fn save(cs: &ConstraintSet, path: impl AsRef<Path>) -> Result<()> {
        let text = serde_json::to_string_pretty(&Self::from_constraints(cs))
            .map_err(|e| Error::Internal(format!("constraint serialization failed: {e}")))?;
        fs::write(path, text)?;
        Ok(())
    }
}

/// Problem scale.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Preset {
    /// K = 4, M = 4, G = 8, five groups of four users, five satellite users.
    #[default]
    Desk,
    /// K = 6, M = 6, G = 16, twenty groups of ten users, ten satellite users.
    Paper,
}

/// Interference threshold of both presets, dBm.
pub const DEFAULT_EPS_P_DBM: f64 = -77.0;
/// Swarm energy budget, split evenly over the UAVs, joules.
pub const DEFAULT_E_TOTAL: f64 = 30.0;
pub const DEFAULT_P_MAX: f64 = 0.3;
pub const DEFAULT_T_TOTAL: f64 = 100.0;
pub const DEFAULT_T_MAX: f64 = 7.5;

impl Preset {
    pub fn scenario(self, seed: u64) -> ScenarioConfig {
        match self {
            Preset::Desk => ScenarioConfig {
                seed,
                ..ScenarioConfig::default()
            },
            Preset::Paper => ScenarioConfig {
                num_uavs: 6,
                antennas_per_user: 6,
                num_subchannels: 16,
                users_per_slot: vec![10; 20],
                num_sat_users: 10,
                seed,
                ..ScenarioConfig::default()
            },
        }
    }

    pub fn constraints(self, num_uavs: usize) -> ConstraintSet {
        ConstraintSet::uniform(
            dbm_to_watts(DEFAULT_EPS_P_DBM),
            DEFAULT_E_TOTAL,
            num_uavs,
            DEFAULT_P_MAX,
            DEFAULT_T_TOTAL,
            DEFAULT_T_MAX,
        )
    }

    /// Monte-Carlo samples per link used when scoring allocations.
    pub fn mc_samples(self) -> usize {
        10_000
    }
}

impl FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "desk" => Ok(Preset::Desk),
            "paper" => Ok(Preset::Paper),
            other => Err(Error::Usage(format!(
                "unknown preset {other:?} (expected desk or paper)"
            ))),
        }
    }
}
