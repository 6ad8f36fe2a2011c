#![allow(dead_code)]

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use whittle_core::{Action, BanditModel, Jump};

/// Random model with up to `max_n` states. Impulse jumps only go to states of
/// lower rank in a random order, so no impulse cycle can arise.
pub fn random_model(seed: u64, max_n: usize, impulse_prob: f64) -> BanditModel {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.random_range(1..=max_n);
    let mut rank: Vec<usize> = (0..n).collect();
    rank.shuffle(&mut rng);
    let mut m = BanditModel::new(n);
    for s in 0..n {
        for a in Action::BOTH {
            let lower: Vec<usize> = (0..n).filter(|&t| rank[t] < rank[s]).collect();
            if !lower.is_empty() && rng.random_bool(impulse_prob) {
                let k = rng.random_range(1..=lower.len().min(3));
                let targets: Vec<usize> = lower.choose_multiple(&mut rng, k).copied().collect();
                let w: Vec<f64> = targets.iter().map(|_| rng.random_range(0.1..1.0)).collect();
                let z: f64 = w.iter().sum();
                let mut jumps: Vec<Jump> = targets
                    .iter()
                    .zip(&w)
                    .map(|(&to, &x)| Jump { to, prob: x / z, lump: rng.random_range(-2.0..5.0) })
                    .collect();
                let rest: f64 = jumps[1..].iter().map(|j| j.prob).sum();
                jumps[0].prob = 1.0 - rest;
                m.set_impulse(s, a, jumps);
            } else {
                for t in (0..n).filter(|&t| t != s) {
                    if rng.random_bool(0.5) {
                        m.add_rate(s, a, t, rng.random_range(0.05..3.0));
                    }
                }
                m.set_cost(s, a, rng.random_range(-1.0..5.0));
                m.set_f(s, a, if a == Action::Passive { 1.0 } else { 0.0 });
            }
        }
    }
    m
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
