mod common;

use common::{close, empty_assign, flat, loose, scenario, slot_assignments};
use csun_core::blocks::{FrozenRates, SolverConfig};
use csun_core::channel::{generate_scenario, ScenarioConfig};
use csun_core::model::{approx_rate, check_feasibility, objective_sum};
use csun_core::rate::solve_slack_fixed_point;
use csun_core::sum::{allocate_power_sum, allocate_subchannels_sum, joint_sum, schedule_time_sum};
use csun_core::units::dbm_to_watts;
use csun_core::{Allocation, ConstraintSet, Scenario, SlackState};

/// Frozen rates for one slot and one UAV with the given per-subchannel powers.
fn frozen(values: Vec<Vec<f64>>, power: &[f64]) -> FrozenRates {
    FrozenRates {
        value: vec![values],
        interference: vec![vec![]],
        energy: vec![power.iter().map(|&p| vec![p]).collect()],
        power: vec![power.iter().map(|&p| vec![p]).collect()],
    }
}

#[test]
fn lone_user_takes_every_subchannel() {
    let rates = frozen(vec![vec![1.0, 2.0, 0.5, 4.0]], &[0.01; 4]);
    let out = allocate_subchannels_sum(&rates, &loose(1), None, 500).unwrap();
    assert_eq!(out.assign, vec![vec![vec![true; 4]]]);
    assert!(out.converged);
}

#[test]
fn dominant_user_takes_every_subchannel() {
    let rates = frozen(vec![vec![3.0, 2.0, 5.0], vec![1.0, 1.5, 4.0]], &[0.01; 3]);
    let out = allocate_subchannels_sum(&rates, &loose(1), None, 500).unwrap();
    assert_eq!(out.assign, vec![vec![vec![true; 3], vec![false; 3]]]);
}

#[test]
fn tight_power_cap_matches_exhaustive_search() {
    // Each subchannel needs 0.15 W, the cap of 0.3 W admits two of the three.
    let cases = [
        vec![vec![3.0, 1.0, 2.0], vec![2.0, 2.5, 1.0]],
        vec![vec![1.0, 1.0, 1.0], vec![0.5, 2.0, 0.9]],
        vec![vec![0.2, 4.0, 3.9], vec![3.8, 0.1, 0.3]],
    ];
    let cs = loose(1);
    for values in cases {
        let rates = frozen(values.clone(), &[0.15; 3]);
        let out = allocate_subchannels_sum(&rates, &cs, None, 500).unwrap();
        let best = slot_assignments(2, 3)
            .into_iter()
            .map(|x| vec![x])
            .filter(|x| rates.row_violation(x, &cs) <= 1e-9)
            .map(|x| rates.total(&x))
            .fold(f64::NEG_INFINITY, f64::max);
        assert!(rates.row_violation(&out.assign, &cs) <= 1e-9);
        assert_eq!(
            rates.total(&out.assign),
            best,
            "{values:?}: {:?}",
            out.assign
        );
    }
}

#[test]
fn subchannel_output_is_exclusive() {
    let rates = frozen(
        vec![
            vec![1.0, 2.0, 3.0],
            vec![3.0, 2.0, 1.0],
            vec![2.0, 2.0, 2.0],
        ],
        &[0.05; 3],
    );
    let out = allocate_subchannels_sum(&rates, &loose(1), None, 500).unwrap();
    for g in 0..3 {
        assert!(out.assign[0].iter().filter(|row| row[g]).count() <= 1);
    }
}

#[test]
fn empty_assignment_gets_no_power() {
    let sc = flat(2, 2, 3, &[2], 1e-4);
    let out = allocate_power_sum(
        &sc,
        &loose(2),
        &empty_assign(&sc),
        &[5.0],
        &SolverConfig::default(),
    )
    .unwrap();
    assert!(out.power.iter().flatten().flatten().all(|&p| p == 0.0));
    assert!(out.slack.w.iter().flatten().flatten().all(|&w| w == 1.0));
    assert_eq!(out.value, 0.0);
}

#[test]
fn lone_link_runs_at_the_cap() {
    let sc = flat(1, 1, 1, &[1], 1e-4);
    let mut x = empty_assign(&sc);
    x[0][0][0] = true;
    let out = allocate_power_sum(&sc, &loose(1), &x, &[5.0], &SolverConfig::default()).unwrap();
    assert!((out.power[0][0][0] - 0.3).abs() < 1e-9, "{:?}", out.power);
    let w = solve_slack_fixed_point(&[out.power[0][0][0]], &[1e-4], 1, common::NOISE).unwrap();
    assert!(close(out.slack.w[0][0][0], w, 1e-9));
}

/// `D_a` of one link with slack at its fixed point.
fn exact_rate(sc: &Scenario, p: &[f64]) -> f64 {
    let gains = sc.uav_gains(0, 0, 0);
    let w = solve_slack_fixed_point(p, gains, sc.antennas_per_user, sc.noise_power).unwrap();
    approx_rate(p, w, gains, sc.antennas_per_user, sc.noise_power).unwrap()
}

#[test]
fn shared_budget_splits_evenly_and_matches_grid() {
    // Two UAVs with identical gains; the interference row caps p_1 + p_2 at 0.1 W.
    let sc = scenario(
        2,
        2,
        1,
        &[1],
        1,
        |_, _, _, _| 1e-4,
        |_, _, _, _| 1e-5,
        |_, _, _| true,
    );
    let cs = ConstraintSet {
        eps_p: 1e-11,
        e_com: vec![1e6; 2],
        p_max: 0.3,
        t_total: 100.0,
        t_max: 7.5,
    };
    let mut x = empty_assign(&sc);
    x[0][0][0] = true;
    let out = allocate_power_sum(&sc, &cs, &x, &[5.0], &SolverConfig::default()).unwrap();
    let p = &out.power[0][0];
    assert!((p[0] - p[1]).abs() < 1e-6, "{p:?}");
    assert!(p[0] + p[1] <= 0.1 * (1.0 + 1e-9));

    let step = 1e-3 * cs.p_max;
    let mut grid_best = f64::NEG_INFINITY;
    for i in 0..=334 {
        for j in 0..=334 {
            let q = [i as f64 * step, j as f64 * step];
            if 1e-10 * (q[0] + q[1]) <= cs.eps_p * (1.0 + 1e-12) {
                grid_best = grid_best.max(5.0 * exact_rate(&sc, &q));
            }
        }
    }
    assert!(
        out.value >= grid_best - 1e-9 * grid_best,
        "{} vs grid {grid_best}",
        out.value
    );
    assert!(out.value <= grid_best * (1.0 + 1e-3));
}

#[test]
fn power_outcome_is_feasible_and_consistent() {
    let sc = generate_scenario(&ScenarioConfig {
        seed: 4,
        ..ScenarioConfig::default()
    })
    .unwrap();
    let cs = ConstraintSet::uniform(dbm_to_watts(-77.0), 30.0, sc.num_uavs, 0.3, 100.0, 7.5);
    let mut x = empty_assign(&sc);
    for n in 0..sc.num_slots() {
        for g in 0..sc.num_subchannels {
            x[n][g % sc.users_per_slot[n]][g] = true;
        }
    }
    let hover = vec![7.5; sc.num_slots()];
    let out = allocate_power_sum(&sc, &cs, &x, &hover, &SolverConfig::default()).unwrap();
    let alloc = Allocation {
        assign: x,
        power: out.power.clone(),
        hover,
    };
    assert!(check_feasibility(&alloc, &sc, &cs, 1e-9).unwrap().feasible);
    let fixed = SlackState::fixed_point(&alloc, &sc).unwrap();
    for (a, b) in fixed
        .w
        .iter()
        .flatten()
        .flatten()
        .zip(out.slack.w.iter().flatten().flatten())
    {
        assert!(close(*a, *b, 1e-6));
    }
    assert!(close(
        objective_sum(&alloc, &out.slack, &sc).unwrap(),
        out.value,
        1e-9
    ));
    assert_eq!(
        out.value,
        out.history
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
    );
}

fn two_slot_setup(
    held: [usize; 2],
) -> (
    Scenario,
    Vec<Vec<Vec<bool>>>,
    Vec<Vec<Vec<f64>>>,
    SlackState,
) {
    let sc = flat(1, 1, 2, &[1, 1], 1e-4);
    let mut x = empty_assign(&sc);
    let mut power = vec![vec![vec![0.0]; 2]; 2];
    for n in 0..2 {
        for g in 0..held[n] {
            x[n][0][g] = true;
            power[n][g][0] = 0.1;
        }
    }
    let slack = SlackState::for_power(&sc, &power).unwrap();
    (sc, x, power, slack)
}

#[test]
fn equal_slots_hover_to_the_cap() {
    let (sc, x, power, slack) = two_slot_setup([1, 1]);
    let t = schedule_time_sum(&sc, &loose(1), &x, &power, &slack).unwrap();
    assert_eq!(t, vec![7.5, 7.5]);
}

#[test]
fn richer_slot_gets_the_time() {
    // c = (2r, r), T_total = 10, T_max = 7.5.
    let (sc, x, power, slack) = two_slot_setup([2, 1]);
    let cs = ConstraintSet {
        t_total: 10.0,
        ..loose(1)
    };
    let t = schedule_time_sum(&sc, &cs, &x, &power, &slack).unwrap();
    assert!(
        (t[0] - 7.5).abs() < 1e-12 && (t[1] - 2.5).abs() < 1e-12,
        "{t:?}"
    );
}

#[test]
fn energy_row_caps_hovering() {
    let (sc, x, power, slack) = two_slot_setup([2, 1]);
    // Slot 0 draws 0.2 W, slot 1 draws 0.1 W.
    let cs = ConstraintSet {
        e_com: vec![1.0],
        ..loose(1)
    };
    let t = schedule_time_sum(&sc, &cs, &x, &power, &slack).unwrap();
    let used = 0.2 * t[0] + 0.1 * t[1];
    assert!(used <= 1.0 * (1.0 + 1e-12), "{t:?}");
    assert!(t.iter().all(|&v| (0.0..=7.5).contains(&v)));
    // Both slots earn the same per joule, so the energy row binds.
    assert!((used - 1.0).abs() < 1e-9);
}

fn desk(seed: u64) -> (Scenario, ConstraintSet) {
    let sc = generate_scenario(&ScenarioConfig {
        seed,
        ..ScenarioConfig::default()
    })
    .unwrap();
    let cs = ConstraintSet::uniform(dbm_to_watts(-77.0), 30.0, sc.num_uavs, 0.3, 100.0, 7.5);
    (sc, cs)
}

#[test]
fn joint_sum_is_monotone_feasible_and_fast() {
    for seed in 0..20 {
        let (sc, cs) = desk(seed);
        let st = joint_sum(&sc, &cs, SolverConfig::default()).unwrap();
        for w in st.trace.windows(2) {
            assert!(
                w[1].value >= w[0].value * (1.0 - 1e-9),
                "seed {seed}: {:?}",
                st.trace
            );
        }
        assert!(
            st.converged && st.iteration <= 5,
            "seed {seed}: {} iterations",
            st.iteration
        );
        let rep = check_feasibility(&st.alloc, &sc, &cs, 1e-9).unwrap();
        assert!(rep.feasible, "seed {seed}: {rep:?}");
        let fixed = SlackState::fixed_point(&st.alloc, &sc).unwrap();
        for (a, b) in fixed
            .w
            .iter()
            .flatten()
            .flatten()
            .zip(st.slack.w.iter().flatten().flatten())
        {
            assert!(close(*a, *b, 1e-6));
        }
        let last = st.trace.last().unwrap().value;
        assert!(close(
            objective_sum(&st.alloc, &st.slack, &sc).unwrap(),
            last,
            1e-9
        ));
    }
}

#[test]
fn infinite_threshold_equals_no_satellite_rows() {
    let (sc, cs) = desk(3);
    let open = ConstraintSet {
        eps_p: f64::INFINITY,
        ..cs.clone()
    };
    let a = joint_sum(&sc, &open, SolverConfig::default()).unwrap();
    let mut bare = sc.clone();
    bare.num_sat_users = 0;
    bare.gain_sat = vec![vec![]; sc.num_slots()];
    bare.sat_occupancy = vec![vec![]; sc.num_slots()];
    let b = joint_sum(&bare, &cs, SolverConfig::default()).unwrap();
    let (va, vb) = (
        objective_sum(&a.alloc, &a.slack, &sc).unwrap(),
        objective_sum(&b.alloc, &b.slack, &bare).unwrap(),
    );
    assert!(close(va, vb, 1e-6), "{va} vs {vb}");
}

#[test]
fn joint_sum_is_deterministic() {
    let (sc, cs) = desk(7);
    let a = joint_sum(&sc, &cs, SolverConfig::default()).unwrap();
    let b = joint_sum(&sc, &cs, SolverConfig::default()).unwrap();
    assert_eq!(a, b);
}
