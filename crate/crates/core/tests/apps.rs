mod common;

use rand::Rng;
use whittle_core::apps::*;
use whittle_core::index::{closed_form_index, detect_threshold_structure, whittle_index, IndexOptions, IndexPath, Verdict};
use whittle_core::{steady_state, ThresholdKind, ThresholdPolicy};

fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
}

fn random_repairman(rng: &mut impl Rng, n: usize) -> RepairmanParams {
    let mut r: Vec<f64> = (0..n).map(|_| rng.random_range(0.5..3.0)).collect();
    r.sort_by(f64::total_cmp);
    let mut psi: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..0.5)).collect();
    psi[0] = 0.0;
    RepairmanParams {
        lambda: (0..n).map(|_| rng.random_range(0.5..2.0)).collect(),
        r,
        psi,
        lb: (0..n).map(|_| rng.random_range(0.0..2.0)).collect(),
        lr: (0..n).map(|_| rng.random_range(0.0..1.0)).collect(),
        cd: (0..n).map(|i| i as f64 * rng.random_range(0.0..1.0)).collect(),
    }
}

fn random_cdn(rng: &mut impl Rng, n: usize) -> CdnParams {
    let mut lambda: Vec<f64> = (0..n).map(|_| rng.random_range(0.5..2.0)).collect();
    lambda.sort_by(f64::total_cmp);
    let mut theta: Vec<f64> = (0..n).map(|i| i as f64 * rng.random_range(0.0..0.2)).collect();
    theta[0] = 0.0;
    CdnParams {
        lambda,
        theta,
        ch: vec![rng.random_range(0.5..2.0); n],
        la: vec![rng.random_range(0.0..1.0); n],
        ls: vec![rng.random_range(1.0..5.0); n],
    }
}

#[test]
fn repairman_stationary_matches_solver() {
    let mut rng = common::rng(11);
    for _ in 0..5 {
        let p = random_repairman(&mut rng, 15);
        let m = build_repairman(&p).unwrap();
        for t in -1..=13 {
            let ss = steady_state(&m, &ThresholdPolicy::new(t, ThresholdKind::ZeroOne).to_passive_set(15)).unwrap();
            assert!(close(&ss.pi, &mr_stationary(&p, t).unwrap(), 1e-10), "threshold {t}");
        }
    }
}

#[test]
fn cdn_stationary_matches_solver() {
    let mut rng = common::rng(12);
    for _ in 0..5 {
        let p = random_cdn(&mut rng, 15);
        let m = build_cdn(&p).unwrap();
        for t in 0..=13 {
            let ss = steady_state(&m, &ThresholdPolicy::new(t as isize, ThresholdKind::ZeroOne).to_passive_set(15)).unwrap();
            assert!(close(&ss.pi, &cdn_stationary(&p, t).unwrap(), 1e-10), "threshold {t}");
        }
    }
}

#[test]
fn tcp_stationary_matches_solver() {
    for (gamma, alpha) in [(0.0, 2.0), (0.5, 1.0), (0.7, 0.5)] {
        let p = TcpParams { lambda: 1.3, gamma, alpha, n_states: 20 };
        let m = build_tcp(&p).unwrap();
        for t in 1..19 {
            let ss = steady_state(&m, &ThresholdPolicy::new(t as isize, ThresholdKind::OneZero).to_passive_set(20)).unwrap();
            assert!(close(&ss.pi, &tcp_stationary(&p, t).unwrap(), 1e-12), "threshold {t}");
        }
    }
}

#[test]
fn closed_forms_match_difference_quotients() {
    let mut rng = common::rng(13);
    let p = random_repairman(&mut rng, 12);
    let m = build_repairman(&p).unwrap();
    for n in 0..10 {
        let a = mr_whittle(&p, n).unwrap();
        let b = closed_form_index(&m, ThresholdKind::ZeroOne, n).unwrap();
        assert!((a - b).abs() < 1e-8 * (1.0 + a.abs()), "repairman {n}: {a} vs {b}");
    }
    let p = random_cdn(&mut rng, 12);
    let m = build_cdn(&p).unwrap();
    for n in 1..10 {
        let a = cdn_whittle(&p, n).unwrap();
        let b = closed_form_index(&m, ThresholdKind::ZeroOne, n).unwrap();
        assert!((a - b).abs() < 1e-8 * (1.0 + a.abs()), "cdn {n}: {a} vs {b}");
    }
    for gamma in [0.0, 0.5] {
        let p = TcpParams { lambda: 0.8, gamma, alpha: 2.0, n_states: 12 };
        let m = build_tcp(&p).unwrap();
        // The window-halving floor moving with n breaks the unit-half step in E_f.
        for n in (2..10).filter(|&n| p.floor_state(n) == p.floor_state(n - 1)) {
            let a = tcp_whittle(&p, n).unwrap();
            let b = closed_form_index(&m, ThresholdKind::OneZero, n).unwrap();
            assert!((a - b).abs() < 1e-8 * (1.0 + a.abs()), "tcp {n}: {a} vs {b}");
        }
    }
}

#[test]
fn tcp_window_two_example() {
    let p = TcpParams { lambda: 1.0, gamma: 0.0, alpha: 2.0, n_states: 8 };
    assert!((tcp_whittle(&p, 2).unwrap() + 1.0 / 6.0).abs() < 1e-15);
    let res = whittle_index(&build_tcp(&p).unwrap(), &IndexOptions::default()).unwrap();
    assert_eq!(res.verdict, Verdict::Indexable);
    assert!((res.index[2].finite().unwrap() + 1.0 / 6.0).abs() < 1e-12);
}

#[test]
fn detected_orientations() {
    let mut rng = common::rng(14);
    let rep = build_repairman(&random_repairman(&mut rng, 6)).unwrap();
    let cdn = build_cdn(&random_cdn(&mut rng, 6)).unwrap();
    let tcp = build_tcp(&TcpParams { lambda: 1.0, gamma: 0.5, alpha: 0.5, n_states: 6 }).unwrap();
    assert_eq!(detect_threshold_structure(&rep).kind(), Some(ThresholdKind::ZeroOne));
    assert_eq!(detect_threshold_structure(&cdn).kind(), Some(ThresholdKind::ZeroOne));
    assert_eq!(detect_threshold_structure(&tcp).kind(), Some(ThresholdKind::OneZero));
}

#[test]
fn cdn_certificate_holds_for_nondecreasing_arrivals() {
    let mut rng = common::rng(15);
    for _ in 0..10 {
        let p = random_cdn(&mut rng, 20);
        assert!(p.lambda_nondecreasing());
        let top: Vec<f64> = (0..=18).map(|n| -cdn_stationary(&p, n).unwrap()[n]).collect();
        assert!(top.windows(2).all(|w| w[1] > w[0]), "{top:?}");
    }
}

#[test]
fn deterioration_index_grows_with_cost() {
    let mut rng = common::rng(16);
    for _ in 0..10 {
        let mut cd: Vec<f64> = (0..52).map(|_| rng.random_range(0.0..5.0)).collect();
        cd.sort_by(f64::total_cmp);
        let p = RepairmanParams {
            lambda: (0..52).map(|_| rng.random_range(0.5..2.0)).collect(),
            cd,
            ..RepairmanParams::uniform(52, 1.0, rng.random_range(0.5..2.0), 0.0, 0.0, rng.random_range(0.0..1.0), |_| 0.0)
        };
        let w: Vec<f64> = (1..=50).map(|n| mr_whittle_deterioration(&p, n).unwrap()).collect();
        assert!(w.windows(2).all(|x| x[1] >= x[0] - 1e-12));
    }
}

#[test]
fn breakdown_index_grows_with_breakdown_rate() {
    let mut rng = common::rng(17);
    for _ in 0..10 {
        let mut psi: Vec<f64> = (0..52).map(|_| rng.random_range(0.0..1.0)).collect();
        psi.sort_by(f64::total_cmp);
        let p = RepairmanParams {
            psi,
            ..RepairmanParams::uniform(52, rng.random_range(0.5..2.0), rng.random_range(0.5..2.0), 0.0, rng.random_range(0.5..3.0), rng.random_range(0.0..1.0), |_| 0.0)
        };
        let w: Vec<f64> = (1..=50).map(|n| mr_whittle_breakdown(&p, n).unwrap()).collect();
        assert!(w.windows(2).all(|x| x[1] >= x[0] - 1e-12), "{w:?}");
    }
}

#[test]
fn breakdown_index_matches_general_form() {
    let mut rng = common::rng(18);
    let mut psi: Vec<f64> = (0..10).map(|_| rng.random_range(0.1..1.0)).collect();
    psi[0] = 0.0;
    let p = RepairmanParams { psi, ..RepairmanParams::uniform(10, 1.2, 0.9, 0.0, 2.5, 0.7, |_| 0.0) };
    for n in 1..8 {
        let a = mr_whittle_breakdown(&p, n).unwrap();
        let b = mr_whittle(&p, n).unwrap();
        assert!((a - b).abs() < 1e-10, "{n}: {a} vs {b}");
    }
}

#[test]
fn discrete_time_form_is_recovered() {
    let mut rng = common::rng(19);
    let n = 22;
    let psi: Vec<f64> = (0..n).map(|i| if i == 0 { 0.0 } else { rng.random_range(0.0..0.9) }).collect();
    let lambda: Vec<f64> = psi.iter().map(|x| 1.0 - x).collect();
    let p = RepairmanParams { lambda, psi, ..RepairmanParams::uniform(n, 1.0, 1.0, 0.0, 3.0, 0.5, |_| 0.0) };
    for s in 1..=20 {
        let a = mr_whittle_breakdown(&p, s).unwrap();
        let b = mr_whittle_discrete(&p, s).unwrap();
        assert!((a - b).abs() < 1e-10, "{s}: {a} vs {b}");
    }
}

#[test]
fn applications_take_the_closed_form_path() {
    let mut rng = common::rng(20);
    let m = build_repairman(&RepairmanParams::uniform(12, 1.0, 1.0, 0.0, 0.0, 0.5, |i| (i * i) as f64)).unwrap();
    let res = whittle_index(&m, &IndexOptions::default()).unwrap();
    assert_eq!(res.path, IndexPath::ClosedForm);
    let cdn = build_cdn(&random_cdn(&mut rng, 12)).unwrap();
    let res = whittle_index(&cdn, &IndexOptions::default()).unwrap();
    assert_eq!(res.verdict, Verdict::Indexable);
}
