mod common;

use proptest::prelude::*;
use rand::Rng;
use whittle_core::chain::steady_state;
use whittle_core::{collapse_impulses, crossing_subsidy, validate_model, Action, BanditModel, Error, PassiveSetPolicy};

/// Expected lump cost accumulated from entering `m` until a non-impulsive
/// state is reached, by direct recursion over the raw jump probabilities.
fn expected_lump(model: &BanditModel, actions: &[Action], m: usize) -> f64 {
    let spec = model.spec(m, actions[m]);
    if !spec.impulse {
        return 0.0;
    }
    spec.jumps.iter().map(|j| j.prob * (j.lump + expected_lump(model, actions, j.to))).sum()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn impulse_cost_matches_raw_sum(seed in any::<u64>(), bits in any::<u64>()) {
        let model = common::random_model(seed, 8, 0.35);
        prop_assert!(validate_model(&model).ok);
        let n = model.n_states();
        let pol = PassiveSetPolicy::from_bits(n, bits);
        let ss = match steady_state(&model, &pol) {
            Ok(ss) => ss,
            Err(Error::NotUnichain(_)) => return Ok(()),
            Err(e) => return Err(TestCaseError::fail(e.to_string())),
        };
        let actions = pol.actions();
        let holding: f64 = (0..n).map(|s| ss.pi[s] * model.cost(s, actions[s])).sum();
        let raw: f64 = (0..n)
            .filter(|&s| !model.is_impulse(s, actions[s]))
            .map(|s| {
                let flow: f64 = model.spec(s, actions[s]).rates.iter()
                    .map(|&(to, q)| q * expected_lump(&model, &actions, to))
                    .sum();
                ss.pi[s] * flow
            })
            .sum();
        prop_assert!((ss.e_cost - holding - raw).abs() < 1e-10, "{} vs {}", ss.e_cost - holding, raw);
        let total: f64 = ss.pi.iter().sum();
        prop_assert!((total - 1.0).abs() < 1e-10);
        prop_assert!(ss.pi.iter().all(|&p| p >= 0.0));
        for s in 0..n {
            if model.is_impulse(s, actions[s]) {
                prop_assert_eq!(ss.pi[s], 0.0);
            }
        }
    }

    #[test]
    fn birth_death_product_form(seed in any::<u64>()) {
        let mut rng = common::rng(seed);
        let n = rng.random_range(2..=10);
        let up: Vec<f64> = (0..n - 1).map(|_| rng.random_range(0.01..50.0)).collect();
        let down: Vec<f64> = (0..n - 1).map(|_| rng.random_range(0.01..50.0)).collect();
        let mut m = BanditModel::new(n);
        for i in 0..n - 1 {
            m.add_rate(i, Action::Passive, i + 1, up[i]).add_rate(i + 1, Action::Passive, i, down[i]);
        }
        let ss = steady_state(&m, &PassiveSetPolicy::all_passive(n)).unwrap();
        let mut w = vec![1.0; n];
        for i in 1..n {
            w[i] = w[i - 1] * up[i - 1] / down[i - 1];
        }
        let z: f64 = w.iter().sum();
        for i in 0..n {
            prop_assert!((ss.pi[i] - w[i] / z).abs() < 1e-10);
        }
    }

    #[test]
    fn crossing_subsidy_is_symmetric(seed in any::<u64>(), a in any::<u64>(), b in any::<u64>()) {
        let model = common::random_model(seed, 6, 0.2);
        let n = model.n_states();
        let (pa, pb) = (PassiveSetPolicy::from_bits(n, a), PassiveSetPolicy::from_bits(n, b));
        if let (Ok(x), Ok(y)) = (crossing_subsidy(&model, &pa, &pb), crossing_subsidy(&model, &pb, &pa)) {
            match (x, y) {
                (Some(x), Some(y)) => prop_assert!((x - y).abs() <= 1e-9 * (1.0 + x.abs())),
                (None, None) => {}
                _ => prop_assert!(false, "definedness differs"),
            }
        }
    }
}

#[test]
fn cdn_clearing_redirects_arrivals() {
    use whittle_core::apps::{build_cdn, CdnParams};
    use whittle_core::{ThresholdKind, ThresholdPolicy};
    let p = CdnParams::uniform(6, 1.5, 0.2, 1.0, 0.5, 3.0);
    let m = build_cdn(&p).unwrap();
    let pol = ThresholdPolicy::new(2, ThresholdKind::ZeroOne).to_passive_set(6);
    let ch = collapse_impulses(&m, &pol).unwrap();
    let t = ch.transitions[2].iter().find(|t| t.to == 0).unwrap();
    assert_eq!(t.rate, 1.5);
    assert_eq!(t.lump, 3.0);
    assert_eq!(t.via, vec![3]);
}
