//! Impulse collapsing and steady-state functionals of a single bandit under a
//! stationary policy.

use std::collections::BTreeMap;

use petgraph::algo::tarjan_scc;
use petgraph::graph::{DiGraph, NodeIndex};

use crate::config::Tolerances;
use crate::error::{Error, Result};
use crate::model::{Action, BanditModel, ConstraintMode};
use crate::policy::PassiveSetPolicy;

/// A finite-rate transition of the collapsed chain. `via` lists the impulse
/// states traversed instantaneously on the way to `to`.
#[derive(Debug, Clone, PartialEq)]
pub struct EffTransition {
    pub to: usize,
    pub rate: f64,
    pub lump: f64,
    pub via: Vec<usize>,
}

/// Generator over the states that are not impulsive under their action.
#[derive(Debug, Clone, PartialEq)]
pub struct EffectiveChain {
    pub actions: Vec<Action>,
    /// `live[n]` is false when `n` is impulsive under `actions[n]`.
    pub live: Vec<bool>,
    /// Outgoing transitions per source state; empty for impulse states.
    pub transitions: Vec<Vec<EffTransition>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SteadyState {
    pub pi: Vec<f64>,
    /// E(T): holding cost rate plus lump costs per unit time.
    pub e_cost: f64,
    pub e_f: f64,
    /// Time-average budget usage.
    pub e_usage: f64,
    /// Stationary mass on the top two states.
    pub tail_mass: f64,
    /// States whose action influences the functionals: the recurrent class and
    /// every impulse state it passes through.
    pub relevant: Vec<bool>,
}

/// (destination, probability, accumulated lump, impulse states traversed)
type Branch = (usize, f64, f64, Vec<usize>);

struct Resolver<'a> {
    model: &'a BanditModel,
    actions: &'a [Action],
    memo: Vec<Option<Vec<Branch>>>,
    on_stack: Vec<bool>,
}

impl Resolver<'_> {
    fn resolve(&mut self, m: usize) -> Result<Vec<Branch>> {
        let a = self.actions[m];
        if !self.model.is_impulse(m, a) {
            return Ok(vec![(m, 1.0, 0.0, Vec::new())]);
        }
        if let Some(b) = &self.memo[m] {
            return Ok(b.clone());
        }
        if self.on_stack[m] {
            let cyc: Vec<usize> = (0..self.on_stack.len()).filter(|&i| self.on_stack[i]).collect();
            return Err(Error::ImpulseCycle(cyc));
        }
        self.on_stack[m] = true;
        // Merge branches that end in the same place with the same lump.
        let mut merged: BTreeMap<(usize, u64), (f64, f64, Vec<usize>)> = BTreeMap::new();
        for j in &self.model.spec(m, a).jumps {
            if j.prob <= 0.0 {
                continue;
            }
            for (to, p, lump, via) in self.resolve(j.to)? {
                let total = lump + j.lump;
                let e = merged.entry((to, total.to_bits())).or_insert((0.0, total, Vec::new()));
                e.0 += j.prob * p;
                e.2.push(m);
                e.2.extend(via);
            }
        }
        self.on_stack[m] = false;
        let out: Vec<Branch> = merged
            .into_iter()
            .map(|((to, _), (p, lump, mut via))| {
                via.sort_unstable();
                via.dedup();
                (to, p, lump, via)
            })
            .collect();
        self.memo[m] = Some(out.clone());
        Ok(out)
    }
}

pub fn collapse_impulses(model: &BanditModel, policy: &PassiveSetPolicy) -> Result<EffectiveChain> {
    let n = model.n_states();
    let actions = policy.actions();
    let live: Vec<bool> = (0..n).map(|s| !model.is_impulse(s, actions[s])).collect();
    let mut r = Resolver { model, actions: &actions, memo: vec![None; n], on_stack: vec![false; n] };
    // Resolve every impulse state up front so that unreachable cycles surface too.
    for s in (0..n).filter(|&s| !live[s]) {
        r.resolve(s)?;
    }
    let mut transitions = vec![Vec::new(); n];
    for s in (0..n).filter(|&s| live[s]) {
        for &(to, q) in &model.spec(s, actions[s]).rates {
            if q <= 0.0 {
                continue;
            }
            for (dest, p, lump, via) in r.resolve(to)? {
                transitions[s].push(EffTransition { to: dest, rate: q * p, lump, via });
            }
        }
    }
    Ok(EffectiveChain { actions, live, transitions })
}

/// Closed communicating classes of the collapsed chain.
fn closed_classes(chain: &EffectiveChain) -> Vec<Vec<usize>> {
    let n = chain.live.len();
    let mut g = DiGraph::<usize, ()>::new();
    let mut node = vec![NodeIndex::end(); n];
    for s in (0..n).filter(|&s| chain.live[s]) {
        node[s] = g.add_node(s);
    }
    for s in (0..n).filter(|&s| chain.live[s]) {
        for t in &chain.transitions[s] {
            if t.to != s && t.rate > 0.0 {
                g.update_edge(node[s], node[t.to], ());
            }
        }
    }
    let mut out = Vec::new();
    for scc in tarjan_scc(&g) {
        let members: Vec<usize> = scc.iter().map(|&x| g[x]).collect();
        let leaves = members.iter().any(|&s| {
            chain.transitions[s].iter().any(|t| t.rate > 0.0 && !members.contains(&t.to))
        });
        if !leaves {
            let mut m = members;
            m.sort_unstable();
            out.push(m);
        }
    }
    out.sort();
    out
}

/// Grassmann–Taksar–Heyman state reduction on an irreducible generator given
/// by its off-diagonal rates. Returns the normalised stationary vector.
pub fn gth(mut a: Vec<Vec<f64>>) -> Result<Vec<f64>> {
    let n = a.len();
    for k in (1..n).rev() {
        let s: f64 = a[k][..k].iter().sum();
        if !(s > 0.0) || !s.is_finite() {
            return Err(Error::NumericalFailure(format!("GTH pivot {s} at step {k}")));
        }
        for i in 0..k {
            a[i][k] /= s;
        }
        for i in 0..k {
            let aik = a[i][k];
            if aik == 0.0 {
                continue;
            }
            for j in 0..k {
                if i != j {
                    a[i][j] += aik * a[k][j];
                }
            }
        }
    }
    let mut pi = vec![0.0; n];
    if n == 0 {
        return Ok(pi);
    }
    pi[0] = 1.0;
    for k in 1..n {
        pi[k] = (0..k).map(|i| pi[i] * a[i][k]).sum();
    }
    let total: f64 = pi.iter().sum();
    if !(total > 0.0) || !total.is_finite() {
        return Err(Error::NumericalFailure(format!("GTH normalisation {total}")));
    }
    pi.iter_mut().for_each(|p| *p /= total);
    Ok(pi)
}

pub fn steady_state(model: &BanditModel, policy: &PassiveSetPolicy) -> Result<SteadyState> {
    steady_state_with(model, policy, &Tolerances::default())
}

pub fn steady_state_with(model: &BanditModel, policy: &PassiveSetPolicy, tol: &Tolerances) -> Result<SteadyState> {
    let n = model.n_states();
    let chain = collapse_impulses(model, policy)?;
    let classes = closed_classes(&chain);
    if classes.len() != 1 {
        return Err(Error::NotUnichain(classes.len()));
    }
    let class = &classes[0];
    let mut pos = vec![usize::MAX; n];
    for (i, &s) in class.iter().enumerate() {
        pos[s] = i;
    }
    let c = class.len();
    let mut a = vec![vec![0.0; c]; c];
    for (i, &s) in class.iter().enumerate() {
        for t in &chain.transitions[s] {
            if t.to != s {
                a[i][pos[t.to]] += t.rate;
            }
        }
    }
    let local = gth(a)?;
    let mut pi = vec![0.0; n];
    for (i, &s) in class.iter().enumerate() {
        let p = local[i];
        if p < -tol.clamp {
            return Err(Error::NumericalFailure(format!("negative stationary mass {p} at state {s}")));
        }
        pi[s] = p.max(0.0);
    }
    let sum: f64 = pi.iter().sum();
    if (sum - 1.0).abs() > tol.normalization {
        return Err(Error::NumericalFailure(format!("stationary mass sums to {sum}")));
    }

    let mut relevant = vec![false; n];
    let (mut e_cost, mut e_table_f, mut e_usage) = (0.0, 0.0, 0.0);
    for &s in class {
        let act = chain.actions[s];
        relevant[s] = true;
        e_cost += pi[s] * model.cost(s, act);
        e_table_f += pi[s] * model.f(s, act);
        e_usage += pi[s] * model.usage(s, act);
        for t in &chain.transitions[s] {
            e_cost += pi[s] * t.rate * t.lump;
            if t.rate > 0.0 {
                for &v in &t.via {
                    relevant[v] = true;
                }
            }
        }
    }
    let e_f = match model.constraint {
        ConstraintMode::Table => e_table_f,
        ConstraintMode::PolicyBoundary => -boundary_states(model, &chain).iter().map(|&m| pi[m]).sum::<f64>(),
    };
    let tail_mass = pi[n.saturating_sub(2)..].iter().sum();
    Ok(SteadyState { pi, e_cost, e_f, e_usage, tail_mass, relevant })
}

/// States after which the policy triggers an impulse on the next step up, plus
/// the top state if mass overflows the truncation from there.
pub fn boundary_states(model: &BanditModel, chain: &EffectiveChain) -> Vec<usize> {
    let n = model.n_states();
    (0..n)
        .filter(|&m| chain.live[m])
        .filter(|&m| {
            if m + 1 < n {
                !chain.live[m + 1]
            } else {
                model.spec(m, chain.actions[m]).overflow > 0.0
            }
        })
        .collect()
}

/// Subsidy at which policies A and B incur the same relaxed cost; `None` when
/// their constraint functionals coincide.
pub fn crossing_subsidy(model: &BanditModel, a: &PassiveSetPolicy, b: &PassiveSetPolicy) -> Result<Option<f64>> {
    let tol = Tolerances::default();
    let sa = steady_state_with(model, a, &tol)?;
    let sb = steady_state_with(model, b, &tol)?;
    let df = sa.e_f - sb.e_f;
    if df.abs() < tol.functional_eq {
        return Ok(None);
    }
    Ok(Some((sa.e_cost - sb.e_cost) / df))
}
