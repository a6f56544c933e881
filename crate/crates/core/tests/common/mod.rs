#![allow(dead_code)]

use csun_core::blocks::Assignment;
use csun_core::model::Geometry;
use csun_core::{ConstraintSet, Scenario};

pub const NOISE: f64 = 1e-10;

/// Hand-built scenario: `gain(n, u, g, k)` and `sat_gain(n, i, g, k)` give amplitude gains,
/// `occupied(n, i, g)` the satellite occupancy.
pub fn scenario(
    k: usize,
    m: usize,
    g: usize,
    users: &[usize],
    n_sat: usize,
    gain: impl Fn(usize, usize, usize, usize) -> f64,
    sat_gain: impl Fn(usize, usize, usize, usize) -> f64,
    occupied: impl Fn(usize, usize, usize) -> bool,
) -> Scenario {
    let n_slots = users.len();
    let sc = Scenario {
        num_uavs: k,
        antennas_per_user: m,
        num_subchannels: g,
        users_per_slot: users.to_vec(),
        num_sat_users: n_sat,
        noise_power: NOISE,
        carrier_freq: 5.8e9,
        atten_db_per_km: 0.0,
        gain_uav: (0..n_slots)
            .map(|n| {
                (0..users[n])
                    .map(|u| {
                        (0..g)
                            .map(|gg| (0..k).map(|kk| gain(n, u, gg, kk)).collect())
                            .collect()
                    })
                    .collect()
            })
            .collect(),
        gain_sat: (0..n_slots)
            .map(|n| {
                (0..n_sat)
                    .map(|i| {
                        (0..g)
                            .map(|gg| (0..k).map(|kk| sat_gain(n, i, gg, kk)).collect())
                            .collect()
                    })
                    .collect()
            })
            .collect(),
        sat_occupancy: (0..n_slots)
            .map(|n| {
                (0..n_sat)
                    .map(|i| (0..g).map(|gg| occupied(n, i, gg)).collect())
                    .collect()
            })
            .collect(),
        geometry: Geometry::default(),
    };
    sc.validate().expect("hand-built scenario must be valid");
    sc
}

/// Scenario without satellite users and with one gain everywhere.
pub fn flat(k: usize, m: usize, g: usize, users: &[usize], l: f64) -> Scenario {
    scenario(
        k,
        m,
        g,
        users,
        0,
        |_, _, _, _| l,
        |_, _, _, _| 1e-6,
        |_, _, _| false,
    )
}

/// Loose limits: nothing but the per-slot power cap is likely to bind.
pub fn loose(k: usize) -> ConstraintSet {
    ConstraintSet {
        eps_p: f64::INFINITY,
        e_com: vec![1e6; k],
        p_max: 0.3,
        t_total: 100.0,
        t_max: 7.5,
    }
}

pub fn empty_assign(sc: &Scenario) -> Assignment {
    sc.users_per_slot
        .iter()
        .map(|&u| vec![vec![false; sc.num_subchannels]; u])
        .collect()
}

pub fn close(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * a.abs().max(b.abs()).max(1e-300)
}

/// Every exclusive assignment of one slot with `users` users and `g` subchannels, idle allowed.
pub fn slot_assignments(users: usize, g: usize) -> Vec<Vec<Vec<bool>>> {
    let total = (users + 1).pow(g as u32);
    (0..total)
        .map(|mut code| {
            let mut x = vec![vec![false; g]; users];
            for gg in 0..g {
                let d = code % (users + 1);
                code /= users + 1;
                if d > 0 {
                    x[d - 1][gg] = true;
                }
            }
            x
        })
        .collect()
}
