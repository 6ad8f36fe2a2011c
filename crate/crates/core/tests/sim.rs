use whittle_core::apps::*;
use whittle_core::index::{whittle_index, IndexOptions};
use whittle_core::sim::*;
use whittle_core::{steady_state, BanditModel, Error, ThresholdKind, ThresholdPolicy};

fn repairman() -> BanditModel {
    build_repairman(&RepairmanParams::uniform(40, 1.0, 1.5, 0.3, 2.0, 0.5, |i| i as f64)).unwrap()
}

fn instance(k: usize, budget: f64) -> RmabpInstance {
    let bandits: Vec<BanditModel> = (0..k).map(|_| repairman()).collect();
    let index_tables = bandits.iter().map(|b| whittle_index(b, &IndexOptions::default()).unwrap().index).collect();
    RmabpInstance { bandits, budget, index_tables, exact_m: false }
}

fn opts(reps: usize, parallel: bool) -> SimOptions {
    SimOptions { horizon: 2000.0, replications: reps, seed: 42, warmup_fraction: 0.1, parallel }
}

#[test]
fn parallel_and_sequential_agree_bitwise() {
    let inst = instance(3, 1.0);
    for policy in [SimPolicy::Index, SimPolicy::RandomFeasible, SimPolicy::Myopic] {
        let a = simulate(&inst, &policy, &opts(6, true)).unwrap();
        let b = simulate(&inst, &policy, &opts(6, false)).unwrap();
        assert_eq!(a.avg_cost.to_bits(), b.avg_cost.to_bits());
        assert_eq!(a, b);
    }
}

#[test]
fn seed_changes_the_outcome() {
    let inst = instance(2, 1.0);
    let a = simulate(&inst, &SimPolicy::Index, &opts(3, true)).unwrap();
    let b = simulate(&inst, &SimPolicy::Index, &SimOptions { seed: 43, ..opts(3, true) }).unwrap();
    assert_ne!(a.avg_cost, b.avg_cost);
}

#[test]
fn single_replication_has_infinite_interval() {
    let r = simulate(&instance(1, 1.0), &SimPolicy::Index, &opts(1, false)).unwrap();
    assert!(r.ci_halfwidth.is_infinite());
}

#[test]
fn threshold_run_tracks_stationary_cost() {
    let m = repairman();
    let pol = ThresholdPolicy::new(3, ThresholdKind::ZeroOne);
    let want = steady_state(&m, &pol.to_passive_set(40)).unwrap().e_cost;
    let inst = RmabpInstance { bandits: vec![m], budget: f64::INFINITY, index_tables: vec![], exact_m: false };
    let r = simulate(&inst, &SimPolicy::FixedThresholds(vec![pol]), &SimOptions { horizon: 2e4, ..opts(8, true) }).unwrap();
    assert!((r.avg_cost - want).abs() < 0.03 * want, "{} vs {want}", r.avg_cost);
}

#[test]
fn never_clearing_overflows() {
    let p = CdnParams::uniform(6, 1.0, 0.0, 1.0, 0.0, 1.0);
    let inst = RmabpInstance { bandits: vec![build_cdn(&p).unwrap()], budget: 1.0, index_tables: vec![], exact_m: false };
    let err = simulate(&inst, &SimPolicy::AllPassive, &opts(2, false)).unwrap_err();
    assert!(matches!(err, Error::ExplodedState { bandit: 0, state: 5 }));
}

#[test]
fn budget_is_respected() {
    let inst = instance(4, 2.0);
    for policy in [SimPolicy::Index, SimPolicy::RandomFeasible, SimPolicy::Myopic] {
        let r = simulate(&inst, &policy, &opts(4, true)).unwrap();
        assert!(r.per_bandit_activity.iter().sum::<f64>() <= 2.0 + 1e-9);
    }
}

#[test]
fn bound_sits_below_simulation() {
    let inst = instance(4, 2.0);
    let b = lagrangian_bound(&inst, &uniform_grid(20.0, 201)).unwrap();
    let r = simulate(&inst, &SimPolicy::Index, &opts(10, true)).unwrap();
    assert!(b.bound <= r.avg_cost + 3.0 * r.ci_halfwidth, "{b:?} vs {}", r.avg_cost);
    assert!(b.bound.is_finite());
}

#[test]
fn bound_without_budget_is_unconstrained_optimum() {
    let inst = instance(2, f64::INFINITY);
    let b = lagrangian_bound(&inst, &uniform_grid(5.0, 11)).unwrap();
    assert_eq!(b.w_star, 0.0);
    let best = (-1..=10)
        .map(|t| steady_state(&inst.bandits[0], &ThresholdPolicy::new(t, ThresholdKind::ZeroOne).to_passive_set(40)).unwrap().e_cost)
        .fold(f64::INFINITY, f64::min);
    assert!((b.bound - 2.0 * best).abs() < 1e-9);
}
