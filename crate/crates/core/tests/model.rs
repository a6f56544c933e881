mod common;

use common::{close, flat, loose, scenario};
use csun_core::model::{
    approx_rate, check_feasibility, leakage_interference, objective_min, objective_sum,
    per_user_totals,
};
use csun_core::units::{dbm_to_watts, watts_to_dbm, LOG2_E};
use csun_core::{Allocation, ConstraintSet, Error, SlackState};
use proptest::prelude::*;

fn one_sat(l_tilde2: f64, g: usize) -> csun_core::Scenario {
    scenario(
        1,
        1,
        g,
        &[1],
        1,
        |_, _, _, _| 1e-4,
        move |_, _, _, _| l_tilde2.sqrt(),
        |_, _, _| true,
    )
}

#[test]
fn leakage_of_empty_assignment_is_zero() {
    let sc = one_sat(1e-9, 2);
    let mut alloc = Allocation::zeros(&sc);
    alloc.power[0][0][0] = 0.3;
    assert_eq!(leakage_interference(&alloc, &sc, 0, 0).unwrap(), 0.0);
}

#[test]
fn single_leakage_term_exceeds_threshold() {
    let sc = one_sat(1e-9, 1);
    let mut alloc = Allocation::zeros(&sc);
    alloc.assign[0][0][0] = true;
    alloc.power[0][0][0] = 0.1;
    let leak = leakage_interference(&alloc, &sc, 0, 0).unwrap();
    assert!(close(leak, 1e-10, 1e-9), "{leak}");
    assert!((watts_to_dbm(leak) + 70.0).abs() < 1e-6);
    assert!(leak > dbm_to_watts(-77.0));
}

#[test]
fn two_leakage_terms_add() {
    let sc = one_sat(5e-12 / 0.1, 2);
    let mut alloc = Allocation::zeros(&sc);
    for g in 0..2 {
        alloc.assign[0][0][g] = true;
        alloc.power[0][g][0] = 0.1;
    }
    let leak = leakage_interference(&alloc, &sc, 0, 0).unwrap();
    assert!(close(leak, 1e-11, 1e-9), "{leak}");
}

#[test]
fn leakage_rejects_bad_indices() {
    let sc = one_sat(1e-9, 1);
    let alloc = Allocation::zeros(&sc);
    assert!(matches!(
        leakage_interference(&alloc, &sc, 1, 0),
        Err(Error::Usage(_))
    ));
    assert!(matches!(
        leakage_interference(&alloc, &sc, 0, 3),
        Err(Error::Usage(_))
    ));
}

#[test]
fn zero_allocation_is_feasible() {
    let sc = one_sat(1e-9, 3);
    let cs = ConstraintSet::uniform(dbm_to_watts(-77.0), 30.0, 1, 0.3, 100.0, 7.5);
    let rep = check_feasibility(&Allocation::zeros(&sc), &sc, &cs, 1e-9).unwrap();
    assert!(rep.feasible);
    assert_eq!(rep.worst_relative, 0.0);
    assert_eq!(
        (
            rep.interference,
            rep.energy,
            rep.power,
            rep.total_time,
            rep.slot_time
        ),
        (0.0, 0.0, 0.0, 0.0, 0.0)
    );
}

#[test]
fn energy_exactly_tight_is_feasible() {
    let sc = flat(1, 1, 1, &[1], 1e-4);
    let cs = ConstraintSet {
        eps_p: f64::INFINITY,
        e_com: vec![30.0],
        p_max: 0.3,
        t_total: 100.0,
        t_max: 100.0,
    };
    let mut alloc = Allocation::zeros(&sc);
    alloc.assign[0][0][0] = true;
    alloc.power[0][0][0] = 0.3;
    alloc.hover[0] = 100.0;
    let rep = check_feasibility(&alloc, &sc, &cs, 0.0).unwrap();
    assert!(rep.feasible, "{rep:?}");
    assert_eq!(rep.energy, 0.0);
}

#[test]
fn too_much_hovering_is_reported() {
    let sc = flat(1, 1, 1, &[1; 20], 1e-4);
    let cs = loose(1);
    let mut alloc = Allocation::zeros(&sc);
    alloc.hover = vec![7.5; 20];
    let rep = check_feasibility(&alloc, &sc, &cs, 1e-9).unwrap();
    assert!(!rep.feasible);
    assert!(close(rep.total_time, 150.0 - 100.0, 1e-12));
    assert_eq!(rep.slot_time, 0.0);
}

#[test]
fn shared_subchannel_breaks_exclusivity() {
    let sc = flat(1, 1, 2, &[2], 1e-4);
    let mut alloc = Allocation::zeros(&sc);
    alloc.assign[0][0][1] = true;
    alloc.assign[0][1][1] = true;
    let rep = check_feasibility(&alloc, &sc, &loose(1), 1e-9).unwrap();
    assert_eq!(rep.exclusivity, 1);
    assert!(!rep.feasible);
}

#[test]
fn feasibility_rejects_wrong_shape() {
    let sc = flat(1, 1, 2, &[2], 1e-4);
    let other = flat(1, 1, 3, &[2], 1e-4);
    let alloc = Allocation::zeros(&other);
    assert!(matches!(
        check_feasibility(&alloc, &sc, &loose(1), 1e-9),
        Err(Error::Usage(_))
    ));
}

fn reference_rate(p: &[f64], w: f64, l: &[f64], m: usize, noise: f64) -> f64 {
    let mut r = 0.0;
    for (pk, lk) in p.iter().zip(l) {
        r += (1.0 + m as f64 * lk * lk * pk / (w * noise)).log2();
    }
    r + m as f64 * (w.log2() - LOG2_E * (1.0 - 1.0 / w))
}

#[test]
fn approx_rate_vanishes_at_zero() {
    assert_eq!(
        approx_rate(&[0.0, 0.0], 1.0, &[1e-4, 2e-4], 4, 1e-10).unwrap(),
        0.0
    );
}

#[test]
fn approx_rate_at_fixed_point_of_scalar_case() {
    let w = (1.0 + 13f64.sqrt()) / 2.0;
    // l^2 p / sigma^2 = 3 with sigma^2 = 1e-10, l^2 = 1e-9.
    let l = [1e-9f64.sqrt()];
    let got = approx_rate(&[0.3], w, &l, 1, 1e-10).unwrap();
    let want = (1.0 + 3.0 / w).log2() + w.log2() - LOG2_E * (1.0 - 1.0 / w);
    assert!(close(got, want, 1e-12), "{got} vs {want}");
}

#[test]
fn approx_rate_matches_reference_when_w_doubles() {
    let (p, l) = ([0.1, 0.2, 0.05], [3e-5, 1e-5, 2e-5]);
    for w in [1.0, 2.0, 4.0, 8.0] {
        let got = approx_rate(&p, w, &l, 4, 1e-10).unwrap();
        assert!(close(got, reference_rate(&p, w, &l, 4, 1e-10), 1e-12));
    }
    let first_sum = |w: f64| {
        p.iter()
            .zip(&l)
            .map(|(p, l)| (1.0 + 4.0 * l * l * p / (w * 1e-10)).log2())
            .sum::<f64>()
    };
    assert!(first_sum(4.0) < first_sum(2.0));
}

#[test]
fn approx_rate_rejects_bad_inputs() {
    assert!(matches!(
        approx_rate(&[0.1], 0.5, &[1e-4], 1, 1e-10),
        Err(Error::Domain(_))
    ));
    assert!(matches!(
        approx_rate(&[-0.1], 1.0, &[1e-4], 1, 1e-10),
        Err(Error::Domain(_))
    ));
    assert!(matches!(
        approx_rate(&[0.1, 0.1], 1.0, &[1e-4], 1, 1e-10),
        Err(Error::Usage(_))
    ));
}

#[test]
fn objectives_of_empty_assignment_are_zero() {
    let sc = flat(2, 2, 3, &[2, 1], 1e-4);
    let mut alloc = Allocation::zeros(&sc);
    alloc
        .power
        .iter_mut()
        .flatten()
        .flatten()
        .for_each(|p| *p = 0.1);
    alloc.hover = vec![5.0, 5.0];
    let slack = SlackState::fixed_point(&alloc, &sc).unwrap();
    assert_eq!(objective_sum(&alloc, &slack, &sc).unwrap(), 0.0);
    assert_eq!(objective_min(&alloc, &slack, &sc).unwrap(), 0.0);
}

#[test]
fn single_term_objective_is_time_times_rate() {
    let sc = flat(1, 2, 2, &[1], 1e-4);
    let mut alloc = Allocation::zeros(&sc);
    alloc.assign[0][0][1] = true;
    alloc.power[0][1][0] = 0.2;
    alloc.hover[0] = 2.0;
    let slack = SlackState::fixed_point(&alloc, &sc).unwrap();
    let r = approx_rate(&[0.2], slack.w[0][0][1], &[1e-4], 2, common::NOISE).unwrap();
    assert!(close(
        objective_sum(&alloc, &slack, &sc).unwrap(),
        2.0 * r,
        1e-12
    ));
    assert!(close(
        objective_min(&alloc, &slack, &sc).unwrap(),
        2.0 * r,
        1e-12
    ));
}

#[test]
fn objective_sum_is_additive_over_disjoint_supports() {
    let sc = scenario(
        2,
        2,
        4,
        &[2, 2],
        0,
        |n, u, g, k| 1e-5 * (1.0 + (n + 2 * u + 3 * g + k) as f64 % 5.0),
        |_, _, _, _| 1e-6,
        |_, _, _| false,
    );
    let mut base = Allocation::zeros(&sc);
    base.hover = vec![3.0, 4.0];
    for (i, p) in base.power.iter_mut().flatten().flatten().enumerate() {
        *p = 0.01 * (1 + i % 7) as f64;
    }
    let slack = SlackState::fixed_point(&base, &sc).unwrap();
    let (mut a, mut b, mut both) = (base.clone(), base.clone(), base.clone());
    a.assign[0][0][0] = true;
    a.assign[1][1][2] = true;
    b.assign[0][1][3] = true;
    b.assign[1][0][1] = true;
    for x in [&a, &b] {
        for n in 0..2 {
            for u in 0..2 {
                for g in 0..4 {
                    both.assign[n][u][g] |= x.assign[n][u][g];
                }
            }
        }
    }
    let f = |x: &Allocation| objective_sum(x, &slack, &sc).unwrap();
    assert!(close(f(&both), f(&a) + f(&b), 1e-12));
}

#[test]
fn objective_min_picks_the_poorest_user() {
    let sc = flat(1, 1, 3, &[2], 1e-4);
    let mut alloc = Allocation::zeros(&sc);
    alloc.hover[0] = 1.0;
    alloc.power[0].iter_mut().for_each(|p| p[0] = 0.1);
    alloc.assign[0][0] = vec![true, true, false];
    alloc.assign[0][1] = vec![false, false, true];
    let slack = SlackState::fixed_point(&alloc, &sc).unwrap();
    let totals = per_user_totals(&alloc, &slack, &sc).unwrap();
    assert!(close(totals[0][0], 2.0 * totals[0][1], 1e-12));
    assert_eq!(objective_min(&alloc, &slack, &sc).unwrap(), totals[0][1]);
}

#[test]
fn objective_min_equals_mean_for_symmetric_users() {
    let sc = flat(2, 2, 4, &[2, 2], 1e-4);
    let mut alloc = Allocation::zeros(&sc);
    alloc.hover = vec![5.0, 5.0];
    alloc
        .power
        .iter_mut()
        .flatten()
        .flatten()
        .for_each(|p| *p = 0.05);
    for n in 0..2 {
        for g in 0..4 {
            alloc.assign[n][g % 2][g] = true;
        }
    }
    let slack = SlackState::fixed_point(&alloc, &sc).unwrap();
    let sum = objective_sum(&alloc, &slack, &sc).unwrap();
    assert!(close(
        objective_min(&alloc, &slack, &sc).unwrap(),
        sum / 4.0,
        1e-12
    ));
}

proptest! {
    #[test]
    fn leakage_is_linear_and_monotone(
        p in prop::collection::vec(0.0f64..0.3, 6),
        q in prop::collection::vec(0.0f64..0.3, 6),
        t in 0.0f64..3.0,
    ) {
        let sc = scenario(2, 1, 3, &[2], 2, |_, _, _, _| 1e-4, |_, i, g, k| 1e-5 * (1 + i + g + k) as f64, |_, i, g| (i + g) % 2 == 0);
        let build = |v: &[f64]| {
            let mut a = Allocation::zeros(&sc);
            for g in 0..3 {
                a.assign[0][g % 2][g] = true;
                for k in 0..2 {
                    a.power[0][g][k] = v[2 * g + k];
                }
            }
            a
        };
        let (ap, aq) = (build(&p), build(&q));
        let combo: Vec<f64> = p.iter().zip(&q).map(|(a, b)| a + t * b).collect();
        for i in 0..2 {
            let lp = leakage_interference(&ap, &sc, 0, i).unwrap();
            let lq = leakage_interference(&aq, &sc, 0, i).unwrap();
            let lc = leakage_interference(&build(&combo), &sc, 0, i).unwrap();
            prop_assert!((lc - (lp + t * lq)).abs() <= 1e-12 * lc.abs().max(1e-30));
            prop_assert!(lc >= lp);
        }
    }

    #[test]
    fn approx_rate_is_concave_in_power_and_convex_in_log_slack(
        p in prop::collection::vec(0.0f64..0.3, 3),
        q in prop::collection::vec(0.0f64..0.3, 3),
        v1 in 0.0f64..5.0,
        v2 in 0.0f64..5.0,
    ) {
        let l = [2e-5, 5e-5, 1e-5];
        let w = 1.7;
        let mid: Vec<f64> = p.iter().zip(&q).map(|(a, b)| 0.5 * (a + b)).collect();
        let f = |x: &[f64]| approx_rate(x, w, &l, 3, 1e-10).unwrap();
        prop_assert!(f(&mid) >= 0.5 * (f(&p) + f(&q)) - 1e-12 * f(&mid).abs().max(1.0));
        let g = |v: f64| approx_rate(&p, v.exp(), &l, 3, 1e-10).unwrap();
        let gm = g(0.5 * (v1 + v2));
        prop_assert!(gm <= 0.5 * (g(v1) + g(v2)) + 1e-12 * gm.abs().max(1.0));
    }

    #[test]
    fn zero_allocation_is_always_feasible(
        eps in 1e-15f64..1e-3,
        e in 0.1f64..100.0,
        p_max in 0.01f64..1.0,
        t_max in 0.1f64..10.0,
        extra in 0.0f64..100.0,
    ) {
        let sc = one_sat(1e-9, 2);
        let cs = ConstraintSet::uniform(eps, e, 1, p_max, t_max + extra, t_max);
        prop_assert!(check_feasibility(&Allocation::zeros(&sc), &sc, &cs, 1e-9).unwrap().feasible);
    }

    #[test]
    fn objective_min_is_at_most_the_mean(seed in 0u64..1000) {
        let sc = flat(2, 2, 4, &[2, 3], 1e-4);
        let mut alloc = Allocation::zeros(&sc);
        alloc.hover = vec![1.0 + (seed % 5) as f64, 2.0];
        for (i, p) in alloc.power.iter_mut().flatten().flatten().enumerate() {
            *p = 0.01 * ((seed as usize + 3 * i) % 11) as f64;
        }
        for n in 0..2 {
            for g in 0..4 {
                let u = (seed as usize / (g + 1) + n) % sc.users_per_slot[n];
                alloc.assign[n][u][g] = true;
            }
        }
        let slack = SlackState::fixed_point(&alloc, &sc).unwrap();
        let sum = objective_sum(&alloc, &slack, &sc).unwrap();
        prop_assert!(objective_min(&alloc, &slack, &sc).unwrap() <= sum / sc.num_users() as f64 + 1e-9);
    }
}
