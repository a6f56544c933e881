//! Synthetic snapshot generator, free-space path loss and scenario files.

use std::fs;
use std::path::Path;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Geometry, Position, Scenario};
use crate::rng::{stream_rng, unit_hash};
use crate::units::dbm_to_watts;

/// Free-space path loss in dB, plus a constant specific attenuation.
///
/// `32.45 + 20 log10(f / MHz) + 20 log10(d / km) + atten * d / km`.
pub fn fspl_db(distance_m: f64, freq_hz: f64, atten_db_per_km: f64) -> Result<f64> {
    if !(distance_m > 0.0 && distance_m.is_finite()) || !(freq_hz > 0.0 && freq_hz.is_finite()) {
        return Err(Error::Domain(format!(
            "path loss needs positive distance and frequency, got d = {distance_m} m, f = {freq_hz} Hz"
        )));
    }
    Ok(fspl_unchecked(distance_m, freq_hz, atten_db_per_km))
}

#[inline]
pub(crate) fn fspl_unchecked(distance_m: f64, freq_hz: f64, atten_db_per_km: f64) -> f64 {
    let d_km = distance_m / 1e3;
    32.45 + 20.0 * (freq_hz / 1e6).log10() + 20.0 * d_km.log10() + atten_db_per_km * d_km
}

/// Amplitude gain `l = 10^(-loss/20)` between two points.
pub fn amplitude_gain(a: &Position, b: &Position, freq_hz: f64, atten_db_per_km: f64) -> f64 {
    let d = distance(a, b).max(1e-3);
    10f64.powf(-fspl_unchecked(d, freq_hz, atten_db_per_km) / 20.0)
}

pub fn distance(a: &Position, b: &Position) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt()
}

/// Knobs of the synthetic snapshot generator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScenarioConfig {
    /// Width and depth of the service area, metres.
    pub area: [f64; 2],
    /// UAV hovering altitude, metres.
    pub altitude: f64,
    /// Radius of the circle the swarm hovers on, metres.
    pub formation_radius: f64,
    pub num_uavs: usize,
    pub antennas_per_user: usize,
    pub num_subchannels: usize,
    /// One entry per slot.
    pub users_per_slot: Vec<usize>,
    pub num_sat_users: usize,
    pub carrier_freq: f64,
    /// Noise power, watts.
    pub noise_power: f64,
    pub atten_db_per_km: f64,
    /// Probability that a satellite user occupies a given subchannel.
    pub sat_density: f64,
    /// Standard deviation of an independent per-subchannel gain offset, dB. Zero keeps gains flat in frequency.
    pub subchannel_jitter_db: f64,
    pub seed: u64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            area: [10_000.0, 10_000.0],
            altitude: 200.0,
            formation_radius: 100.0,
            num_uavs: 4,
            antennas_per_user: 4,
            num_subchannels: 8,
            users_per_slot: vec![4; 5],
            num_sat_users: 5,
            carrier_freq: 5.8e9,
            noise_power: dbm_to_watts(-107.0),
            atten_db_per_km: 0.01,
            sat_density: 0.25,
            subchannel_jitter_db: 0.0,
            seed: 0,
        }
    }
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        if self.num_uavs == 0 || self.antennas_per_user == 0 || self.num_subchannels == 0 {
            return Err(Error::Config("K, M and G must be positive".into()));
        }
        if self.users_per_slot.is_empty() {
            return Err(Error::Config("at least one slot is required".into()));
        }
        if let Some(n) = self.users_per_slot.iter().position(|&u| u == 0) {
            return Err(Error::Config(format!("user group {n} is empty")));
        }
        if !(0.0..=1.0).contains(&self.sat_density) {
            return Err(Error::Config(format!(
                "sat_density must lie in [0, 1], got {}",
                self.sat_density
            )));
        }
        let positive = |v: f64| v > 0.0 && v.is_finite();
        if !positive(self.area[0]) || !positive(self.area[1]) {
            return Err(Error::Config("area extent must be positive".into()));
        }
        if !(self.altitude >= 10.0 && self.altitude.is_finite()) {
            return Err(Error::Config(format!(
                "altitude must be at least 10 m, got {}",
                self.altitude
            )));
        }
        if !positive(self.carrier_freq) || !positive(self.noise_power) {
            return Err(Error::Config(
                "carrier frequency and noise power must be positive".into(),
            ));
        }
        if !(self.atten_db_per_km >= 0.0)
            || !(self.subchannel_jitter_db >= 0.0)
            || !(self.formation_radius >= 0.0)
        {
            return Err(Error::Config(
                "attenuation, jitter and formation radius must be non-negative".into(),
            ));
        }
        Ok(())
    }
}

// Independent random streams, so changing one dimension leaves the other draws intact.
const STREAM_USERS: u64 = 1;
const STREAM_SAT_USERS: u64 = 2;
const STREAM_OCCUPANCY: u64 = 3;
const STREAM_JITTER: u64 = 4;

/// Draws one snapshot: positions, gains and satellite occupancy. Deterministic in `cfg.seed`.
pub fn generate_scenario(cfg: &ScenarioConfig) -> Result<Scenario> {
    cfg.validate()?;
    let (k_count, g_count) = (cfg.num_uavs, cfg.num_subchannels);
    let n_slots = cfg.users_per_slot.len();

    let ground = |rng: &mut ChaCha8Rng| -> Position {
        [
            rng.random::<f64>() * cfg.area[0],
            rng.random::<f64>() * cfg.area[1],
            0.0,
        ]
    };
    let mut user_rng = stream_rng(cfg.seed, &[STREAM_USERS]);
    let users: Vec<Vec<Position>> = cfg
        .users_per_slot
        .iter()
        .map(|&u| (0..u).map(|_| ground(&mut user_rng)).collect())
        .collect();
    let mut sat_rng = stream_rng(cfg.seed, &[STREAM_SAT_USERS]);
    let sat_users: Vec<Position> = (0..cfg.num_sat_users)
        .map(|_| ground(&mut sat_rng))
        .collect();

    let uavs: Vec<Vec<Position>> = users
        .iter()
        .map(|group| {
            let cx = group.iter().map(|p| p[0]).sum::<f64>() / group.len() as f64;
            let cy = group.iter().map(|p| p[1]).sum::<f64>() / group.len() as f64;
            (0..k_count)
                .map(|k| {
                    let phi = std::f64::consts::TAU * k as f64 / k_count as f64;
                    [
                        cx + cfg.formation_radius * phi.cos(),
                        cy + cfg.formation_radius * phi.sin(),
                        cfg.altitude,
                    ]
                })
                .collect()
        })
        .collect();

    let gain_block = |rx: &Position, n: usize, tag: u64, idx: usize| -> Vec<Vec<f64>> {
        let flat: Vec<f64> = uavs[n]
            .iter()
            .map(|tx| amplitude_gain(tx, rx, cfg.carrier_freq, cfg.atten_db_per_km))
            .collect();
        (0..g_count)
            .map(|g| {
                if cfg.subchannel_jitter_db == 0.0 {
                    return flat.clone();
                }
                let mut rng = stream_rng(
                    cfg.seed,
                    &[STREAM_JITTER, tag, n as u64, idx as u64, g as u64],
                );
                flat.iter()
                    .map(|&l| {
                        let z: f64 = rng.sample(StandardNormal);
                        (l * 10f64.powf(cfg.subchannel_jitter_db * z / 20.0)).min(1.0)
                    })
                    .collect()
            })
            .collect()
    };

    let gain_uav = (0..n_slots)
        .map(|n| {
            users[n]
                .iter()
                .enumerate()
                .map(|(u, rx)| gain_block(rx, n, 0, u))
                .collect()
        })
        .collect();
    let gain_sat = (0..n_slots)
        .map(|n| {
            sat_users
                .iter()
                .enumerate()
                .map(|(i, rx)| gain_block(rx, n, 1, i))
                .collect()
        })
        .collect();
    // Occupancy draws are keyed by (n, i, g) so that adding subchannels keeps the existing ones.
    let sat_occupancy = (0..n_slots)
        .map(|n| {
            (0..cfg.num_sat_users)
                .map(|i| {
                    (0..g_count)
                        .map(|g| {
                            unit_hash(cfg.seed, &[STREAM_OCCUPANCY, n as u64, i as u64, g as u64])
                                < cfg.sat_density
                        })
                        .collect()
                })
                .collect()
        })
        .collect();

    let sc = Scenario {
        num_uavs: k_count,
        antennas_per_user: cfg.antennas_per_user,
        num_subchannels: g_count,
        users_per_slot: cfg.users_per_slot.clone(),
        num_sat_users: cfg.num_sat_users,
        noise_power: cfg.noise_power,
        carrier_freq: cfg.carrier_freq,
        atten_db_per_km: cfg.atten_db_per_km,
        gain_uav,
        gain_sat,
        sat_occupancy,
        geometry: Geometry {
            uavs,
            users,
            sat_users,
        },
    };
    sc.validate()?;
    Ok(sc)
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Meta {
    num_uavs: usize,
    antennas_per_user: usize,
    num_subchannels: usize,
    users_per_slot: Vec<usize>,
    num_sat_users: usize,
    noise_power: f64,
    carrier_freq: f64,
    #[serde(default)]
    atten_db_per_km: f64,
}

#[derive(Serialize, Deserialize)]
struct ScenarioFile {
    meta: Meta,
    l: Vec<Vec<Vec<Vec<f64>>>>,
    l_tilde: Vec<Vec<Vec<Vec<f64>>>>,
    y: Vec<Vec<Vec<u8>>>,
    #[serde(default)]
    geometry: Geometry,
}

/// Serializes a scenario to JSON. Floats are written in shortest round-trip form.
pub fn scenario_to_json(sc: &Scenario) -> Result<String> {
    let file = ScenarioFile {
        meta: Meta {
            num_uavs: sc.num_uavs,
            antennas_per_user: sc.antennas_per_user,
            num_subchannels: sc.num_subchannels,
            users_per_slot: sc.users_per_slot.clone(),
            num_sat_users: sc.num_sat_users,
            noise_power: sc.noise_power,
            carrier_freq: sc.carrier_freq,
            atten_db_per_km: sc.atten_db_per_km,
        },
        l: sc.gain_uav.clone(),
        l_tilde: sc.gain_sat.clone(),
        y: sc
            .sat_occupancy
            .iter()
            .map(|per_i| {
                per_i
                    .iter()
                    .map(|row| row.iter().map(|&b| b as u8).collect())
                    .collect()
            })
            .collect(),
        geometry: sc.geometry.clone(),
    };
    serde_json::to_string(&file).map_err(|e| Error::Internal(e.to_string()))
}

/// Parses the JSON produced by [`scenario_to_json`]; `context` names the source in errors.
pub fn scenario_from_json(text: &str, context: &str) -> Result<Scenario> {
    let parse_err = |message: String| Error::Parse {
        context: context.to_string(),
        message,
    };
    let file: ScenarioFile = serde_json::from_str(text)
        .map_err(|e| parse_err(format!("{e} (line {}, column {})", e.line(), e.column())))?;
    let mut sat_occupancy = Vec::with_capacity(file.y.len());
    for (n, per_i) in file.y.iter().enumerate() {
        let mut rows = Vec::with_capacity(per_i.len());
        for (i, row) in per_i.iter().enumerate() {
            let mut out = Vec::with_capacity(row.len());
            for (g, &v) in row.iter().enumerate() {
                match v {
                    0 => out.push(false),
                    1 => out.push(true),
                    _ => {
                        return Err(parse_err(format!(
                            "field y[{n}][{i}][{g}] must be 0 or 1, got {v}"
                        )))
                    }
                }
            }
            rows.push(out);
        }
        sat_occupancy.push(rows);
    }
    let m = file.meta;
    let sc = Scenario {
        num_uavs: m.num_uavs,
        antennas_per_user: m.antennas_per_user,
        num_subchannels: m.num_subchannels,
        users_per_slot: m.users_per_slot,
        num_sat_users: m.num_sat_users,
        noise_power: m.noise_power,
        carrier_freq: m.carrier_freq,
        atten_db_per_km: m.atten_db_per_km,
        gain_uav: file.l,
        gain_sat: file.l_tilde,
        sat_occupancy,
        geometry: file.geometry,
    };
    sc.validate().map_err(|e| parse_err(e.to_string()))?;
    Ok(sc)
}

pub fn save_scenario(sc: &Scenario, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, scenario_to_json(sc)?)?;
    Ok(())
}

pub fn load_scenario(path: impl AsRef<Path>) -> Result<Scenario> {
    let path = path.as_ref();
    let text = fs::read_to_string(path)?;
    scenario_from_json(&text, &path.display().to_string())
}
