use csun_core::channel::{
    amplitude_gain, fspl_db, generate_scenario, load_scenario, save_scenario, scenario_from_json,
    scenario_to_json, ScenarioConfig,
};
use csun_core::Error;

#[test]
fn free_space_loss_at_one_and_ten_km() {
    assert!((fspl_db(1000.0, 5.8e9, 0.0).unwrap() - 107.72).abs() < 5e-3);
    assert!((fspl_db(10_000.0, 5.8e9, 0.0).unwrap() - 127.72).abs() < 5e-3);
}

#[test]
fn doubling_distance_adds_six_db() {
    for d in [10.0, 333.0, 4e4] {
        let step = fspl_db(2.0 * d, 5.8e9, 0.0).unwrap() - fspl_db(d, 5.8e9, 0.0).unwrap();
        assert!((step - 20.0 * 2f64.log10()).abs() < 1e-12);
    }
}

#[test]
fn attenuation_term_is_linear_in_km() {
    let plain = fspl_db(3000.0, 5.8e9, 0.0).unwrap();
    assert!((fspl_db(3000.0, 5.8e9, 0.01).unwrap() - plain - 0.03).abs() < 1e-12);
}

#[test]
fn loss_increases_with_distance_and_frequency() {
    let mut last = f64::NEG_INFINITY;
    for d in [1.0, 10.0, 150.0, 2e3, 5e4] {
        let v = fspl_db(d, 5.8e9, 0.01).unwrap();
        assert!(v > last);
        last = v;
    }
    assert!(fspl_db(500.0, 6e9, 0.0).unwrap() > fspl_db(500.0, 5.8e9, 0.0).unwrap());
}

#[test]
fn loss_rejects_non_positive_inputs() {
    assert!(matches!(fspl_db(0.0, 5.8e9, 0.0), Err(Error::Domain(_))));
    assert!(matches!(fspl_db(-1.0, 5.8e9, 0.0), Err(Error::Domain(_))));
    assert!(matches!(fspl_db(100.0, 0.0, 0.0), Err(Error::Domain(_))));
}

#[test]
fn uav_overhead_at_200_m() {
    let l = amplitude_gain(&[0.0, 0.0, 200.0], &[0.0, 0.0, 0.0], 5.8e9, 0.0);
    let loss = 32.45 + 20.0 * 5800f64.log10() + 20.0 * 0.2f64.log10();
    assert!((loss - 93.74).abs() < 5e-3);
    assert!(((l * l) / 10f64.powf(-loss / 10.0) - 1.0).abs() < 1e-12);
}

#[test]
fn generation_is_deterministic() {
    let cfg = ScenarioConfig {
        seed: 42,
        ..ScenarioConfig::default()
    };
    let a = generate_scenario(&cfg).unwrap();
    let b = generate_scenario(&cfg).unwrap();
    assert_eq!(a, b);
    let c = generate_scenario(&ScenarioConfig { seed: 43, ..cfg }).unwrap();
    assert_ne!(a, c);
}

#[test]
fn generated_gains_are_proper_fractions() {
    for seed in 0..5 {
        let sc = generate_scenario(&ScenarioConfig {
            seed,
            ..ScenarioConfig::default()
        })
        .unwrap();
        for l in sc
            .gain_uav
            .iter()
            .chain(&sc.gain_sat)
            .flatten()
            .flatten()
            .flatten()
        {
            assert!(l * l > 0.0 && l * l < 1.0, "{l}");
        }
        assert_eq!(sc.geometry.uavs.len(), sc.num_slots());
        for (n, uavs) in sc.geometry.uavs.iter().enumerate() {
            assert_eq!(uavs.len(), sc.num_uavs);
            // The swarm hovers around the centroid of its group.
            let users = &sc.geometry.users[n];
            let cx = users.iter().map(|p| p[0]).sum::<f64>() / users.len() as f64;
            let sx = uavs.iter().map(|p| p[0]).sum::<f64>() / uavs.len() as f64;
            assert!((cx - sx).abs() <= ScenarioConfig::default().formation_radius + 1e-6);
            assert!(uavs.iter().all(|p| (p[2] - 200.0).abs() < 1e-9));
        }
    }
}

#[test]
fn zero_density_means_no_occupancy() {
    let sc = generate_scenario(&ScenarioConfig {
        sat_density: 0.0,
        seed: 9,
        ..ScenarioConfig::default()
    })
    .unwrap();
    assert!(sc.sat_occupancy.iter().flatten().flatten().all(|&y| !y));
    let full = generate_scenario(&ScenarioConfig {
        sat_density: 1.0,
        seed: 9,
        ..ScenarioConfig::default()
    })
    .unwrap();
    assert!(full.sat_occupancy.iter().flatten().flatten().all(|&y| y));
}

#[test]
fn gains_are_flat_across_subchannels_by_default() {
    let sc = generate_scenario(&ScenarioConfig {
        seed: 1,
        ..ScenarioConfig::default()
    })
    .unwrap();
    for per_g in sc.gain_uav.iter().flatten() {
        assert!(per_g.iter().all(|row| row == &per_g[0]));
    }
    let jit = generate_scenario(&ScenarioConfig {
        seed: 1,
        subchannel_jitter_db: 3.0,
        ..ScenarioConfig::default()
    })
    .unwrap();
    assert!(jit
        .gain_uav
        .iter()
        .flatten()
        .any(|per_g| per_g.iter().any(|row| row != &per_g[0])));
}

#[test]
fn empty_user_group_is_a_config_error() {
    let cfg = ScenarioConfig {
        users_per_slot: vec![4, 0, 4],
        ..ScenarioConfig::default()
    };
    assert!(matches!(generate_scenario(&cfg), Err(Error::Config(_))));
}

#[test]
fn json_round_trip_is_exact() {
    let sc = generate_scenario(&ScenarioConfig {
        seed: 5,
        subchannel_jitter_db: 1.0,
        ..ScenarioConfig::default()
    })
    .unwrap();
    let back = scenario_from_json(&scenario_to_json(&sc).unwrap(), "memory").unwrap();
    assert_eq!(sc, back);

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("sc.json");
    save_scenario(&sc, &path).unwrap();
    assert_eq!(load_scenario(&path).unwrap(), sc);
}

#[test]
fn bad_occupancy_value_names_the_field() {
    let sc = generate_scenario(&ScenarioConfig {
        seed: 5,
        sat_density: 0.0,
        ..ScenarioConfig::default()
    })
    .unwrap();
    let mut doc: serde_json::Value = serde_json::from_str(&scenario_to_json(&sc).unwrap()).unwrap();
    doc["y"][1][2][3] = 2.into();
    match scenario_from_json(&doc.to_string(), "bad.json") {
        Err(Error::Parse { context, message }) => {
            assert_eq!(context, "bad.json");
            assert!(message.contains("y[1][2][3]"), "{message}");
        }
        other => panic!("expected parse error, got {other:?}"),
    }
}

#[test]
fn missing_noise_is_a_parse_error() {
    let sc = generate_scenario(&ScenarioConfig {
        seed: 5,
        ..ScenarioConfig::default()
    })
    .unwrap();
    let mut doc: serde_json::Value = serde_json::from_str(&scenario_to_json(&sc).unwrap()).unwrap();
    doc["meta"].as_object_mut().unwrap().remove("noise_power");
    match scenario_from_json(&doc.to_string(), "bad.json") {
        Err(Error::Parse { message, .. }) => assert!(message.contains("noise_power"), "{message}"),
        other => panic!("expected parse error, got {other:?}"),
    }
}
