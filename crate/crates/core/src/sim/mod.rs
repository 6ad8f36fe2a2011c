//! Event-driven simulation of K bandits coupled by a per-instant budget, and
//! the Lagrangian lower bound on the achievable average cost.

mod bound;

pub use bound::{lagrangian_bound, uniform_grid, BoundResult};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};
use crate::index::IndexValue;
use crate::model::{Action, BanditModel};
use crate::policy::ThresholdPolicy;

#[derive(Debug, Clone, PartialEq)]
pub struct RmabpInstance {
    pub bandits: Vec<BanditModel>,
    /// Bound on Σ_k usage_k(n_k, a_k) at every instant.
    pub budget: f64,
    /// Per-bandit index tables; only needed by [`SimPolicy::Index`].
    pub index_tables: Vec<Vec<IndexValue>>,
    /// Fill the budget by index regardless of sign.
    pub exact_m: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SimPolicy {
    Index,
    AllPassive,
    RandomFeasible,
    Myopic,
    /// One policy per bandit, or a single policy applied to all.
    FixedThresholds(Vec<ThresholdPolicy>),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimOptions {
    pub horizon: f64,
    pub replications: usize,
    pub seed: u64,
    /// Leading fraction of the horizon excluded from the averages.
    pub warmup_fraction: f64,
    /// Run replications on the rayon pool.
    pub parallel: bool,
}

impl Default for SimOptions {
    fn default() -> Self {
        Self { horizon: 1e4, replications: 10, seed: 0, warmup_fraction: 0.1, parallel: true }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationResult {
    pub avg_cost: f64,
    /// 95% Student-t half-width across replications; infinite for one replication.
    pub ci_halfwidth: f64,
    pub horizon: f64,
    pub replications: usize,
    pub seed: u64,
    pub per_bandit_activity: Vec<f64>,
    pub per_replication: Vec<f64>,
}

const BUDGET_SLACK: f64 = 1e-9;

fn fits(load: f64, budget: f64) -> bool {
    load <= budget + BUDGET_SLACK * (1.0 + budget.abs())
}

fn passive_load(inst: &RmabpInstance, state: &[usize]) -> Result<f64> {
    let load: f64 = inst.bandits.iter().zip(state).map(|(b, &n)| b.usage(n, Action::Passive)).sum();
    if fits(load, inst.budget) {
        Ok(load)
    } else {
        Err(Error::InfeasibleState(state.to_vec()))
    }
}

/// Greedy fill in the given priority order, activating each bandit whose
/// activation keeps the budget satisfied.
fn greedy_fill(inst: &RmabpInstance, state: &[usize], order: impl IntoIterator<Item = usize>) -> Result<Vec<Action>> {
    let mut load = passive_load(inst, state)?;
    let mut actions = vec![Action::Passive; state.len()];
    for k in order {
        let b = &inst.bandits[k];
        let delta = b.usage(state[k], Action::Active) - b.usage(state[k], Action::Passive);
        if fits(load + delta, inst.budget) {
            load += delta;
            actions[k] = Action::Active;
        }
    }
    Ok(actions)
}

/// Activate bandits in decreasing order of their current index (lowest id
/// first on ties) while the budget allows. Bandits with a negative index stay
/// passive unless `exact_m` is set.
pub fn index_policy_assign(inst: &RmabpInstance, state: &[usize]) -> Result<Vec<Action>> {
    let mut ranked = Vec::with_capacity(state.len());
    for (k, &n) in state.iter().enumerate() {
        let v = inst
            .index_tables
            .get(k)
            .and_then(|t| t.get(n))
            .ok_or(Error::MissingIndex { bandit: k, state: n })?;
        let Some(w) = v.as_f64() else { continue };
        if w < 0.0 && !inst.exact_m {
            continue;
        }
        ranked.push((w, k));
    }
    ranked.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    greedy_fill(inst, state, ranked.into_iter().map(|(_, k)| k))
}

fn myopic_assign(inst: &RmabpInstance, state: &[usize]) -> Result<Vec<Action>> {
    let mut ranked: Vec<(f64, usize)> = state
        .iter()
        .enumerate()
        .map(|(k, &n)| (inst.bandits[k].cost(n, Action::Passive) - inst.bandits[k].cost(n, Action::Active), k))
        .filter(|&(s, _)| s >= 0.0)
        .collect();
    ranked.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    greedy_fill(inst, state, ranked.into_iter().map(|(_, k)| k))
}

fn fixed_assign(inst: &RmabpInstance, state: &[usize], pols: &[ThresholdPolicy]) -> Result<Vec<Action>> {
    let actions: Vec<Action> = state
        .iter()
        .enumerate()
        .map(|(k, &n)| pols[if pols.len() == 1 { 0 } else { k }].action(n))
        .collect();
    let load: f64 = inst.bandits.iter().zip(state).zip(&actions).map(|((b, &n), &a)| b.usage(n, a)).sum();
    if fits(load, inst.budget) {
        Ok(actions)
    } else {
        Err(Error::InfeasibleState(state.to_vec()))
    }
}

fn decide(inst: &RmabpInstance, policy: &SimPolicy, state: &[usize], rng: &mut ChaCha8Rng) -> Result<Vec<Action>> {
    match policy {
        SimPolicy::Index => index_policy_assign(inst, state),
        SimPolicy::AllPassive => {
            passive_load(inst, state)?;
            Ok(vec![Action::Passive; state.len()])
        }
        SimPolicy::RandomFeasible => {
            let mut order: Vec<usize> = (0..state.len()).collect();
            order.shuffle(rng);
            greedy_fill(inst, state, order)
        }
        SimPolicy::Myopic => myopic_assign(inst, state),
        SimPolicy::FixedThresholds(p) => fixed_assign(inst, state, p),
    }
}

struct Replication {
    avg_cost: f64,
    activity: Vec<f64>,
}

struct Engine<'a> {
    inst: &'a RmabpInstance,
    policy: &'a SimPolicy,
    rng: ChaCha8Rng,
    state: Vec<usize>,
    actions: Vec<Action>,
    max_jumps: usize,
}

impl Engine<'_> {
    /// Resolve pending impulses in bandit-id order, re-deciding actions after
    /// every jump. Returns the lump cost incurred.
    fn settle(&mut self) -> Result<f64> {
        let mut lump = 0.0;
        let mut jumps = 0;
        loop {
            let pending = (0..self.state.len()).find(|&k| self.inst.bandits[k].is_impulse(self.state[k], self.actions[k]));
            let Some(k) = pending else { return Ok(lump) };
            jumps += 1;
            if jumps > self.max_jumps {
                return Err(Error::ImpulseLoop(self.max_jumps));
            }
            let spec = self.inst.bandits[k].spec(self.state[k], self.actions[k]);
            let u: f64 = self.rng.random();
            let mut acc = 0.0;
            let mut pick = spec.jumps.last().expect("impulse without jumps");
            for j in &spec.jumps {
                acc += j.prob;
                if u < acc {
                    pick = j;
                    break;
                }
            }
            lump += pick.lump;
            self.state[k] = pick.to;
            self.actions = decide(self.inst, self.policy, &self.state, &mut self.rng)?;
        }
    }

    fn run(mut self, opts: &SimOptions) -> Result<Replication> {
        let k_count = self.state.len();
        let warm = opts.warmup_fraction * opts.horizon;
        let window = opts.horizon - warm;
        let mut t = 0.0;
        let mut cost = 0.0;
        let mut active_time = vec![0.0; k_count];
        self.actions = decide(self.inst, self.policy, &self.state, &mut self.rng)?;
        let initial_lump = self.settle()?;
        if warm <= 0.0 {
            cost += initial_lump;
        }
        let mut rates = vec![0.0; k_count];
        loop {
            for k in 0..k_count {
                let spec = self.inst.bandits[k].spec(self.state[k], self.actions[k]);
                rates[k] = spec.total_rate() + spec.overflow;
            }
            let total: f64 = rates.iter().sum();
            let dt = if total > 0.0 {
                let u: f64 = self.rng.random();
                -(1.0 - u).ln() / total
            } else {
                f64::INFINITY
            };
            let end = (t + dt).min(opts.horizon);
            let lo = t.max(warm);
            if end > lo {
                let d = end - lo;
                for k in 0..k_count {
                    cost += self.inst.bandits[k].cost(self.state[k], self.actions[k]) * d;
                    if self.actions[k] == Action::Active {
                        active_time[k] += d;
                    }
                }
            }
            if t + dt >= opts.horizon {
                break;
            }
            t += dt;

            let mut u = self.rng.random::<f64>() * total;
            let mut k = rates.iter().rposition(|&r| r > 0.0).expect("positive total rate");
            for (i, &r) in rates.iter().enumerate() {
                if u < r {
                    k = i;
                    break;
                }
                u -= r;
            }
            let spec = self.inst.bandits[k].spec(self.state[k], self.actions[k]);
            let mut to = None;
            for &(dest, q) in &spec.rates {
                if u < q {
                    to = Some(dest);
                    break;
                }
                u -= q;
            }
            let Some(to) = to.or_else(|| (spec.overflow <= 0.0).then(|| spec.rates.last().map(|r| r.0)).flatten()) else {
                return Err(Error::ExplodedState { bandit: k, state: self.state[k] });
            };
            self.state[k] = to;
            self.actions = decide(self.inst, self.policy, &self.state, &mut self.rng)?;
            let lump = self.settle()?;
            if t >= warm {
                cost += lump;
            }
        }
        Ok(Replication { avg_cost: cost / window, activity: active_time.iter().map(|a| a / window).collect() })
    }
}

fn run_replication(inst: &RmabpInstance, policy: &SimPolicy, opts: &SimOptions, rep: usize) -> Result<Replication> {
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    rng.set_stream(rep as u64);
    let engine = Engine {
        inst,
        policy,
        rng,
        state: vec![0; inst.bandits.len()],
        actions: vec![Action::Passive; inst.bandits.len()],
        max_jumps: inst.bandits.iter().map(|b| b.n_states()).sum::<usize>() + 1,
    };
    engine.run(opts)
}

fn check(inst: &RmabpInstance, policy: &SimPolicy, opts: &SimOptions) -> Result<()> {
    if inst.bandits.is_empty() {
        return Err(Error::InvalidParams("instance has no bandits".into()));
    }
    if !(opts.horizon > 0.0 && opts.horizon.is_finite()) {
        return Err(Error::InvalidParams("horizon must be positive and finite".into()));
    }
    if !(0.0..1.0).contains(&opts.warmup_fraction) {
        return Err(Error::InvalidParams("warm-up fraction must lie in [0,1)".into()));
    }
    if opts.replications == 0 {
        return Err(Error::InvalidParams("need at least one replication".into()));
    }
    if inst.budget.is_nan() {
        return Err(Error::InvalidParams("budget is NaN".into()));
    }
    if let SimPolicy::FixedThresholds(p) = policy {
        if p.len() != 1 && p.len() != inst.bandits.len() {
            return Err(Error::InvalidParams(format!("{} thresholds for {} bandits", p.len(), inst.bandits.len())));
        }
    }
    if let SimPolicy::Index = policy {
        if inst.index_tables.len() != inst.bandits.len() {
            return Err(Error::InvalidParams("one index table per bandit is required".into()));
        }
    }
    Ok(())
}

/// Simulate `opts.replications` independent trajectories from the all-zero
/// joint state. Replication `r` draws from stream `r` of a ChaCha generator
/// seeded with `opts.seed`; results are combined in replication order, so the
/// outcome does not depend on `opts.parallel`.
pub fn simulate(inst: &RmabpInstance, policy: &SimPolicy, opts: &SimOptions) -> Result<SimulationResult> {
    check(inst, policy, opts)?;
    let reps: Vec<Result<Replication>> = if opts.parallel {
        (0..opts.replications).into_par_iter().map(|r| run_replication(inst, policy, opts, r)).collect()
    } else {
        (0..opts.replications).map(|r| run_replication(inst, policy, opts, r)).collect()
    };
    let reps: Vec<Replication> = reps.into_iter().collect::<Result<_>>()?;

    let n = reps.len() as f64;
    let per_replication: Vec<f64> = reps.iter().map(|r| r.avg_cost).collect();
    let mean = per_replication.iter().sum::<f64>() / n;
    let ci_halfwidth = if reps.len() < 2 {
        f64::INFINITY
    } else {
        let var = per_replication.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
        t_quantile(0.975, n - 1.0) * (var / n).sqrt()
    };
    let mut activity = vec![0.0; inst.bandits.len()];
    for r in &reps {
        for (a, x) in activity.iter_mut().zip(&r.activity) {
            *a += x / n;
        }
    }
    Ok(SimulationResult {
        avg_cost: mean,
        ci_halfwidth,
        horizon: opts.horizon,
        replications: opts.replications,
        seed: opts.seed,
        per_bandit_activity: activity,
        per_replication,
    })
}

/// Quantile of Student's t distribution with `dof` degrees of freedom.
pub fn t_quantile(p: f64, dof: f64) -> f64 {
    StudentsT::new(0.0, 1.0, dof).expect("positive degrees of freedom").inverse_cdf(p)
}
