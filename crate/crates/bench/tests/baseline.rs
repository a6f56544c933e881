use csun_bench::{baseline_equal, Preset};
use csun_core::channel::{generate_scenario, ScenarioConfig};
use csun_core::model::check_feasibility;
use csun_core::units::dbm_to_watts;
use csun_core::ConstraintSet;

#[test]
fn paper_defaults_hover_five_seconds_per_group() {
    let sc = generate_scenario(&Preset::Paper.scenario(0)).unwrap();
    assert_eq!(sc.num_slots(), 20);
    let alloc = baseline_equal(&sc, &Preset::Paper.constraints(sc.num_uavs)).unwrap();
    assert!(alloc.hover.iter().all(|&t| t == 5.0), "{:?}", alloc.hover);
}

#[test]
fn hover_time_is_capped_by_t_max() {
    let sc = generate_scenario(&ScenarioConfig {
        seed: 2,
        ..ScenarioConfig::default()
    })
    .unwrap();
    let alloc = baseline_equal(&sc, &Preset::Desk.constraints(sc.num_uavs)).unwrap();
    assert!(alloc.hover.iter().all(|&t| t == 7.5));
}

#[test]
fn slack_rows_give_an_even_power_split() {
    let sc = generate_scenario(&ScenarioConfig {
        seed: 4,
        ..ScenarioConfig::default()
    })
    .unwrap();
    let cs = ConstraintSet::uniform(f64::INFINITY, 1e6, sc.num_uavs, 0.3, 100.0, 7.5);
    let alloc = baseline_equal(&sc, &cs).unwrap();
    for n in 0..sc.num_slots() {
        let held: Vec<bool> = (0..sc.num_subchannels)
            .map(|g| alloc.assign[n].iter().any(|row| row[g]))
            .collect();
        let count = held.iter().filter(|&&h| h).count();
        assert!(count >= sc.users_per_slot[n]);
        for g in 0..sc.num_subchannels {
            let want = if held[g] { 0.3 / count as f64 } else { 0.0 };
            for k in 0..sc.num_uavs {
                assert!(
                    (alloc.power[n][g][k] - want).abs() < 1e-15,
                    "n {n} g {g}: {}",
                    alloc.power[n][g][k]
                );
            }
        }
    }
}

#[test]
fn every_user_is_covered_and_subchannels_are_exclusive() {
    let sc = generate_scenario(&ScenarioConfig {
        seed: 6,
        ..ScenarioConfig::default()
    })
    .unwrap();
    let alloc = baseline_equal(&sc, &Preset::Desk.constraints(sc.num_uavs)).unwrap();
    for xn in &alloc.assign {
        assert!(xn.iter().all(|row| row.iter().any(|&b| b)));
        for g in 0..sc.num_subchannels {
            assert!(xn.iter().filter(|row| row[g]).count() <= 1);
        }
    }
}

#[test]
fn baseline_is_always_feasible() {
    for seed in 0..20 {
        let sc = generate_scenario(&ScenarioConfig {
            seed,
            ..ScenarioConfig::default()
        })
        .unwrap();
        for (eps, e) in [(-77.0, 30.0), (-100.0, 30.0), (-77.0, 0.5), (-120.0, 0.05)] {
            let cs = ConstraintSet::uniform(dbm_to_watts(eps), e, sc.num_uavs, 0.3, 100.0, 7.5);
            let alloc = baseline_equal(&sc, &cs).unwrap();
            let rep = check_feasibility(&alloc, &sc, &cs, 1e-9).unwrap();
            assert!(rep.feasible, "seed {seed}, eps {eps}, e {e}: {rep:?}");
        }
    }
}

#[test]
fn crowded_slot_still_gets_an_exclusive_assignment() {
    let cfg = ScenarioConfig {
        users_per_slot: vec![10, 3],
        num_subchannels: 4,
        seed: 1,
        ..ScenarioConfig::default()
    };
    let sc = generate_scenario(&cfg).unwrap();
    let cs = Preset::Desk.constraints(sc.num_uavs);
    let alloc = baseline_equal(&sc, &cs).unwrap();
    for g in 0..4 {
        assert_eq!(alloc.assign[0].iter().filter(|row| row[g]).count(), 1);
    }
    assert!(check_feasibility(&alloc, &sc, &cs, 1e-9).unwrap().feasible);
}
