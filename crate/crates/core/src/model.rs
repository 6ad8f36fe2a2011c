//! Single-bandit model: finite state set, per-action finite rates or impulse
//! jumps, cost rates, lump costs and the constraint function.

use std::fmt;

use petgraph::algo::tarjan_scc;
use petgraph::graph::DiGraph;
use serde::{Deserialize, Serialize};

use crate::config::Tolerances;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Action {
    Passive,
    Active,
}

impl Action {
    pub const BOTH: [Action; 2] = [Action::Passive, Action::Active];

    pub fn index(self) -> usize {
        match self {
            Action::Passive => 0,
            Action::Active => 1,
        }
    }

    pub fn from_index(a: usize) -> Option<Action> {
        match a {
            0 => Some(Action::Passive),
            1 => Some(Action::Active),
            _ => None,
        }
    }
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.index())
    }
}

/// One instantaneous jump out of an impulse state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Jump {
    pub to: usize,
    pub prob: f64,
    #[serde(default)]
    pub lump: f64,
}

/// Everything the model says about one (state, action) pair.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ActionSpec {
    pub impulse: bool,
    /// Finite transition rates `(to, rate)`; only meaningful when not impulsive.
    pub rates: Vec<(usize, f64)>,
    /// Jump distribution; only meaningful when impulsive.
    pub jumps: Vec<Jump>,
    pub cost: f64,
    pub f: f64,
    /// Per-instant budget usage. Falls back to `f` when absent.
    pub usage: Option<f64>,
    /// Rate of transitions that leave the truncated state space.
    pub overflow: f64,
}

impl ActionSpec {
    pub fn total_rate(&self) -> f64 {
        self.rates.iter().map(|&(_, q)| q).sum()
    }
}

/// How E(f) is evaluated.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConstraintMode {
    /// E(f) = Σ π(n) f(n, a(n)).
    #[default]
    Table,
    /// f depends on the policy: E(f) = −Σ π(m) over states m that are the last
    /// non-impulsive state before the policy triggers an impulse (or before the
    /// truncation boundary, if mass overflows there).
    PolicyBoundary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BanditModel {
    pub states: Vec<[ActionSpec; 2]>,
    #[serde(default)]
    pub constraint: ConstraintMode,
    /// Lowest threshold considered by threshold searches.
    #[serde(default = "default_floor")]
    pub threshold_floor: isize,
}

fn default_floor() -> isize {
    -1
}

impl BanditModel {
    pub fn new(n_states: usize) -> Self {
        Self {
            states: vec![Default::default(); n_states],
            constraint: ConstraintMode::Table,
            threshold_floor: -1,
        }
    }

    pub fn n_states(&self) -> usize {
        self.states.len()
    }

    pub fn spec(&self, n: usize, a: Action) -> &ActionSpec {
        &self.states[n][a.index()]
    }

    pub fn spec_mut(&mut self, n: usize, a: Action) -> &mut ActionSpec {
        &mut self.states[n][a.index()]
    }

    pub fn add_rate(&mut self, n: usize, a: Action, to: usize, rate: f64) -> &mut Self {
        self.spec_mut(n, a).rates.push((to, rate));
        self
    }

    pub fn set_impulse(&mut self, n: usize, a: Action, jumps: Vec<Jump>) -> &mut Self {
        let s = self.spec_mut(n, a);
        s.impulse = true;
        s.jumps = jumps;
        self
    }

    pub fn set_cost(&mut self, n: usize, a: Action, c: f64) -> &mut Self {
        self.spec_mut(n, a).cost = c;
        self
    }

    pub fn set_f(&mut self, n: usize, a: Action, f: f64) -> &mut Self {
        self.spec_mut(n, a).f = f;
        self
    }

    pub fn set_usage(&mut self, n: usize, a: Action, u: f64) -> &mut Self {
        self.spec_mut(n, a).usage = Some(u);
        self
    }

    pub fn set_overflow(&mut self, n: usize, a: Action, q: f64) -> &mut Self {
        self.spec_mut(n, a).overflow = q;
        self
    }

    pub fn with_constraint(mut self, mode: ConstraintMode) -> Self {
        self.constraint = mode;
        self
    }

    pub fn with_floor(mut self, floor: isize) -> Self {
        self.threshold_floor = floor;
        self
    }

    pub fn is_impulse(&self, n: usize, a: Action) -> bool {
        self.spec(n, a).impulse
    }

    pub fn cost(&self, n: usize, a: Action) -> f64 {
        self.spec(n, a).cost
    }

    pub fn f(&self, n: usize, a: Action) -> f64 {
        self.spec(n, a).f
    }

    pub fn usage(&self, n: usize, a: Action) -> f64 {
        let s = self.spec(n, a);
        s.usage.unwrap_or(s.f)
    }

    /// True if some state loses probability mass through the truncation.
    pub fn is_truncated(&self) -> bool {
        self.states.iter().flatten().any(|s| s.overflow > 0.0)
    }

    /// Both actions in state `n` are indistinguishable: same dynamics, costs
    /// and constraint values. The action taken there cannot matter.
    pub fn actions_identical(&self, n: usize) -> bool {
        self.states[n][0] == self.states[n][1]
    }

    /// Multiply every cost rate and lump cost by `c`.
    pub fn scale_costs(&mut self, c: f64) {
        for s in self.states.iter_mut().flatten() {
            s.cost *= c;
            for j in &mut s.jumps {
                j.lump *= c;
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Warning,
    Error,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Issue {
    pub severity: Severity,
    pub state: Option<usize>,
    pub action: Option<Action>,
    pub message: String,
}

impl fmt::Display for Issue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sev = match self.severity {
            Severity::Warning => "warning",
            Severity::Error => "error",
        };
        write!(f, "{sev}")?;
        match (self.state, self.action) {
            (Some(n), Some(a)) => write!(f, " [state {n}, action {a}]")?,
            (Some(n), None) => write!(f, " [state {n}]")?,
            _ => {}
        }
        write!(f, ": {}", self.message)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub ok: bool,
    pub issues: Vec<Issue>,
}

impl ValidationReport {
    pub fn errors(&self) -> impl Iterator<Item = &Issue> {
        self.issues.iter().filter(|i| i.severity == Severity::Error)
    }
}

pub fn validate_model(model: &BanditModel) -> ValidationReport {
    validate_model_with(model, &Tolerances::default())
}

pub fn validate_model_with(model: &BanditModel, tol: &Tolerances) -> ValidationReport {
    let n = model.n_states();
    let mut issues = Vec::new();
    let mut err = |state: Option<usize>, action: Option<Action>, message: String| {
        issues.push(Issue { severity: Severity::Error, state, action, message });
    };
    if n == 0 {
        err(None, None, "model has no states".into());
    }
    for s in 0..n {
        for a in Action::BOTH {
            let spec = model.spec(s, a);
            let at = (Some(s), Some(a));
            for (name, v) in [("cost rate", spec.cost), ("constraint value", spec.f), ("usage", spec.usage.unwrap_or(0.0))] {
                if !v.is_finite() {
                    err(at.0, at.1, format!("non-finite {name}"));
                }
            }
            if !(spec.overflow >= 0.0 && spec.overflow.is_finite()) {
                err(at.0, at.1, format!("invalid overflow rate {}", spec.overflow));
            }
            for &(to, q) in &spec.rates {
                if to >= n {
                    err(at.0, at.1, format!("rate target {to} out of range"));
                } else if to == s {
                    err(at.0, at.1, "self-loop rate".into());
                }
                if !(q >= 0.0 && q.is_finite()) {
                    err(at.0, at.1, format!("negative or non-finite rate {q}"));
                }
            }
            if spec.impulse {
                if spec.cost != 0.0 {
                    err(at.0, at.1, "nonzero cost rate on impulse state-action".into());
                }
                if spec.f != 0.0 {
                    err(at.0, at.1, "nonzero constraint value on impulse state-action".into());
                }
                if !spec.rates.is_empty() || spec.overflow != 0.0 {
                    err(at.0, at.1, "finite rates on impulse state-action".into());
                }
                let mut sum = 0.0;
                for j in &spec.jumps {
                    if j.to >= n {
                        err(at.0, at.1, format!("jump target {} out of range", j.to));
                    }
                    if !(0.0..=1.0).contains(&j.prob) {
                        err(at.0, at.1, format!("jump probability {} outside [0,1]", j.prob));
                    }
                    if !j.lump.is_finite() {
                        err(at.0, at.1, "non-finite lump cost".into());
                    }
                    sum += j.prob;
                }
                if (sum - 1.0).abs() > tol.prob_sum {
                    err(at.0, at.1, format!("impulse jump probabilities sum to {sum}"));
                }
            } else if !spec.jumps.is_empty() {
                err(at.0, at.1, "jump probabilities on non-impulse state-action".into());
            }
        }
    }

    // Impulse graph over states: an edge for every positive jump under any action.
    let mut g = DiGraph::<(), ()>::new();
    let nodes: Vec<_> = (0..n).map(|_| g.add_node(())).collect();
    for s in 0..n {
        for a in Action::BOTH {
            let spec = model.spec(s, a);
            if spec.impulse {
                for j in spec.jumps.iter().filter(|j| j.prob > 0.0 && j.to < n) {
                    g.update_edge(nodes[s], nodes[j.to], ());
                }
            }
        }
    }
    for scc in tarjan_scc(&g) {
        let cyclic = scc.len() > 1 || g.contains_edge(scc[0], scc[0]);
        if cyclic {
            let mut members: Vec<usize> = scc.iter().map(|x| x.index()).collect();
            members.sort_unstable();
            let list = members.iter().map(|m| m.to_string()).collect::<Vec<_>>().join(",");
            err(Some(members[0]), None, format!("impulse cycle {{{list}}}"));
        }
    }

    let ok = !issues.iter().any(|i| i.severity == Severity::Error);
    ValidationReport { ok, issues }
}
