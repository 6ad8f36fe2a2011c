//! Model and instance files (TOML).
//!
//! A model file holds exactly one of `[builder]` or `[explicit]`:
//!
//! ```toml
//! truncation = 20
//! [builder]
//! kind = "repairman"
//! lambda = 1.0          # scalars broadcast over all states
//! r = [1.0, 1.0, 2.0]   # arrays give per-state values
//! ```
//!
//! An instance file lists bandits with multiplicities and the budget:
//!
//! ```toml
//! budget = 2
//! [[bandits]]
//! count = 4
//! model = { truncation = 20, builder = { kind = "repairman", lambda = 1, r = 1, cd = [0, 1, 2] } }
//! [simulation]
//! horizon = 1e4
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use whittle_core::apps::{build_cdn, build_repairman, build_tcp, CdnParams, RepairmanParams, TcpParams};
use whittle_core::{Action, BanditModel, ConstraintMode, Jump, Tolerances};

use crate::CliError;

/// A per-state parameter given as one value for every state or as an array.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Param {
    Scalar(f64),
    Array(Vec<f64>),
}

impl Param {
    fn len(&self) -> Option<usize> {
        match self {
            Param::Scalar(_) => None,
            Param::Array(v) => Some(v.len()),
        }
    }

    fn expand(&self, name: &str, n: usize) -> Result<Vec<f64>, CliError> {
        match self {
            Param::Scalar(x) => Ok(vec![*x; n]),
            Param::Array(v) if v.len() == n => Ok(v.clone()),
            Param::Array(v) => Err(CliError::Parse(format!("{name} has {} entries, expected {n}", v.len()))),
        }
    }
}

fn zero() -> Param {
    Param::Scalar(0.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum BuilderSpec {
    Repairman {
        lambda: Param,
        r: Param,
        #[serde(default = "zero")]
        psi: Param,
        #[serde(default = "zero")]
        lb: Param,
        #[serde(default = "zero")]
        lr: Param,
        #[serde(default = "zero")]
        cd: Param,
    },
    Tcp {
        lambda: f64,
        gamma: f64,
        alpha: f64,
    },
    Cdn {
        lambda: Param,
        theta: Param,
        #[serde(default = "zero")]
        ch: Param,
        #[serde(default = "zero")]
        la: Param,
        ls: Param,
    },
}

impl BuilderSpec {
    fn params(&self) -> Vec<(&'static str, &Param)> {
        match self {
            BuilderSpec::Repairman { lambda, r, psi, lb, lr, cd } => {
                vec![("lambda", lambda), ("r", r), ("psi", psi), ("lb", lb), ("lr", lr), ("cd", cd)]
            }
            BuilderSpec::Tcp { .. } => vec![],
            BuilderSpec::Cdn { lambda, theta, ch, la, ls } => {
                vec![("lambda", lambda), ("theta", theta), ("ch", ch), ("la", la), ("ls", ls)]
            }
        }
    }

    fn build(&self, truncation: Option<usize>) -> Result<BanditModel, CliError> {
        let params = self.params();
        let n = match truncation {
            Some(n) => n,
            None => params
                .iter()
                .find_map(|(_, p)| p.len())
                .ok_or_else(|| CliError::Parse("truncation is required when every parameter is a scalar".into()))?,
        };
        let get = |name: &str| -> Result<Vec<f64>, CliError> {
            let (_, p) = params.iter().find(|(k, _)| *k == name).expect("known parameter");
            p.expand(name, n)
        };
        let model = match self {
            BuilderSpec::Repairman { .. } => build_repairman(&RepairmanParams {
                lambda: get("lambda")?,
                r: get("r")?,
                psi: get("psi")?,
                lb: get("lb")?,
                lr: get("lr")?,
                cd: get("cd")?,
            }),
            BuilderSpec::Tcp { lambda, gamma, alpha } => {
                build_tcp(&TcpParams { lambda: *lambda, gamma: *gamma, alpha: *alpha, n_states: n })
            }
            BuilderSpec::Cdn { theta, .. } => {
                let mut th = get("theta")?;
                if matches!(theta, Param::Scalar(_)) {
                    th[0] = 0.0;
                }
                build_cdn(&CdnParams { lambda: get("lambda")?, theta: th, ch: get("ch")?, la: get("la")?, ls: get("ls")? })
            }
        };
        model.map_err(|e| CliError::Parse(e.to_string()))
    }
}

/// One transition entry: a rate for ordinary state-actions, a jump
/// probability (and optional lump cost) for impulse ones.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransitionEntry {
    pub from: usize,
    pub to: usize,
    pub action: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rate: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub impulse_prob: Option<f64>,
    #[serde(default, skip_serializing_if = "is_zero")]
    pub lump: f64,
}

fn is_zero(x: &f64) -> bool {
    *x == 0.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OverflowEntry {
    pub state: usize,
    pub action: usize,
    pub rate: f64,
}

/// Tables are indexed `[state][action]` with action 0 passive, 1 active.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExplicitSpec {
    pub states: usize,
    #[serde(default)]
    pub transitions: Vec<TransitionEntry>,
    pub cost: Vec<[f64; 2]>,
    pub f: Vec<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub usage: Option<Vec<[f64; 2]>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub impulse: Option<Vec<[bool; 2]>>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub overflow: Vec<OverflowEntry>,
}

fn action(a: usize) -> Result<Action, CliError> {
    Action::from_index(a).ok_or_else(|| CliError::Parse(format!("action {a} is not 0 or 1")))
}

impl ExplicitSpec {
    fn check_state(&self, what: &str, s: usize) -> Result<(), CliError> {
        if s < self.states {
            Ok(())
        } else {
            Err(CliError::Parse(format!("{what} state {s} outside 0..{}", self.states)))
        }
    }

    fn check_table<T>(&self, name: &str, t: &[T]) -> Result<(), CliError> {
        if t.len() == self.states {
            Ok(())
        } else {
            Err(CliError::Parse(format!("{name} table has {} rows, expected {}", t.len(), self.states)))
        }
    }

    fn build(&self) -> Result<BanditModel, CliError> {
        let n = self.states;
        self.check_table("cost", &self.cost)?;
        self.check_table("f", &self.f)?;
        if let Some(u) = &self.usage {
            self.check_table("usage", u)?;
        }
        if let Some(t) = &self.impulse {
            self.check_table("impulse", t)?;
        }
        let mut m = BanditModel::new(n);
        for s in 0..n {
            for a in Action::BOTH {
                let spec = m.spec_mut(s, a);
                spec.cost = self.cost[s][a.index()];
                spec.f = self.f[s][a.index()];
                spec.usage = self.usage.as_ref().map(|u| u[s][a.index()]);
                spec.impulse = self.impulse.as_ref().is_some_and(|t| t[s][a.index()]);
            }
        }
        for t in &self.transitions {
            let a = action(t.action)?;
            self.check_state("from", t.from)?;
            self.check_state("to", t.to)?;
            match (t.rate, t.impulse_prob) {
                (Some(q), None) => {
                    if t.lump != 0.0 {
                        return Err(CliError::Parse(format!("lump on rate entry {} -> {}", t.from, t.to)));
                    }
                    m.add_rate(t.from, a, t.to, q);
                }
                (None, Some(p)) => {
                    let spec = m.spec_mut(t.from, a);
                    if !spec.impulse {
                        return Err(CliError::Parse(format!("impulse_prob on non-impulse state {} action {a}", t.from)));
                    }
                    spec.jumps.push(Jump { to: t.to, prob: p, lump: t.lump });
                }
                _ => {
                    return Err(CliError::Parse(format!(
                        "entry {} -> {} needs exactly one of rate and impulse_prob",
                        t.from, t.to
                    )))
                }
            }
        }
        for o in &self.overflow {
            let a = action(o.action)?;
            self.check_state("overflow", o.state)?;
            m.set_overflow(o.state, a, o.rate);
        }
        Ok(m)
    }

    /// Explicit form of a model; parsing it back yields the same model.
    pub fn from_model(m: &BanditModel) -> Self {
        let n = m.n_states();
        let mut transitions = Vec::new();
        let mut overflow = Vec::new();
        for s in 0..n {
            for a in Action::BOTH {
                let spec = m.spec(s, a);
                for &(to, rate) in &spec.rates {
                    transitions.push(TransitionEntry { from: s, to, action: a.index(), rate: Some(rate), impulse_prob: None, lump: 0.0 });
                }
                for j in &spec.jumps {
                    transitions.push(TransitionEntry {
                        from: s,
                        to: j.to,
                        action: a.index(),
                        rate: None,
                        impulse_prob: Some(j.prob),
                        lump: j.lump,
                    });
                }
                if spec.overflow != 0.0 {
                    overflow.push(OverflowEntry { state: s, action: a.index(), rate: spec.overflow });
                }
            }
        }
        let table = |g: &dyn Fn(usize, Action) -> f64| -> Vec<[f64; 2]> {
            (0..n).map(|s| [g(s, Action::Passive), g(s, Action::Active)]).collect()
        };
        let any_usage = m.states.iter().flatten().any(|s| s.usage.is_some());
        let any_impulse = m.states.iter().flatten().any(|s| s.impulse);
        ExplicitSpec {
            states: n,
            transitions,
            cost: table(&|s, a| m.cost(s, a)),
            f: table(&|s, a| m.f(s, a)),
            usage: any_usage.then(|| table(&|s, a| m.usage(s, a))),
            impulse: any_impulse.then(|| (0..n).map(|s| [m.is_impulse(s, Action::Passive), m.is_impulse(s, Action::Active)]).collect()),
            overflow,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpecFile {
    /// Number of states for builder models.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub truncation: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub constraint_mode: Option<ConstraintMode>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threshold_floor: Option<isize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub builder: Option<BuilderSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub explicit: Option<ExplicitSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tolerances: Option<Tolerances>,
}

impl ModelSpecFile {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Parse(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        Self::parse(&read(path)?)
    }

    pub fn tolerances(&self) -> Tolerances {
        self.tolerances.unwrap_or_default()
    }

    pub fn build(&self) -> Result<BanditModel, CliError> {
        let mut m = match (&self.builder, &self.explicit) {
            (Some(b), None) => b.build(self.truncation)?,
            (None, Some(e)) => {
                if self.truncation.is_some_and(|t| t != e.states) {
                    return Err(CliError::Parse("truncation disagrees with explicit state count".into()));
                }
                e.build()?
            }
            _ => return Err(CliError::Parse("exactly one of [builder] and [explicit] is required".into())),
        };
        if let Some(c) = self.constraint_mode {
            m.constraint = c;
        }
        if let Some(f) = self.threshold_floor {
            m.threshold_floor = f;
        }
        Ok(m)
    }

    /// Explicit spec file describing `m`.
    pub fn explicit_from(m: &BanditModel, tolerances: Option<Tolerances>) -> Self {
        ModelSpecFile {
            truncation: None,
            constraint_mode: Some(m.constraint),
            threshold_floor: Some(m.threshold_floor),
            builder: None,
            explicit: Some(ExplicitSpec::from_model(m)),
            tolerances,
        }
    }

    pub fn to_toml(&self) -> Result<String, CliError> {
        toml::to_string(self).map_err(|e| CliError::Parse(e.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ModelRef {
    /// Path to a model file, relative to the instance file.
    File(PathBuf),
    Inline(ModelSpecFile),
}

fn one() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BanditEntry {
    #[serde(default = "one")]
    pub count: usize,
    pub model: ModelRef,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulationDefaults {
    pub horizon: f64,
    pub replications: usize,
    pub seed: u64,
    pub warmup_fraction: f64,
}

impl Default for SimulationDefaults {
    fn default() -> Self {
        let o = whittle_core::sim::SimOptions::default();
        Self { horizon: o.horizon, replications: o.replications, seed: o.seed, warmup_fraction: o.warmup_fraction }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceSpecFile {
    pub bandits: Vec<BanditEntry>,
    pub budget: f64,
    #[serde(default)]
    pub exact_m: bool,
    #[serde(default)]
    pub simulation: SimulationDefaults,
}

/// An instance file with every bandit model resolved and replicated.
#[derive(Debug, Clone)]
pub struct LoadedInstance {
    pub bandits: Vec<(BanditModel, Tolerances)>,
    pub budget: f64,
    pub exact_m: bool,
    pub simulation: SimulationDefaults,
}

impl InstanceSpecFile {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let spec: Self = toml::from_str(text).map_err(|e| CliError::Parse(e.to_string()))?;
        if !spec.budget.is_finite() {
            return Err(CliError::Parse("budget must be finite".into()));
        }
        if spec.bandits.is_empty() {
            return Err(CliError::Parse("no bandits".into()));
        }
        if spec.bandits.iter().any(|b| b.count == 0) {
            return Err(CliError::Parse("bandit count must be at least 1".into()));
        }
        Ok(spec)
    }

    pub fn load(path: &Path) -> Result<LoadedInstance, CliError> {
        let spec = Self::parse(&read(path)?)?;
        let base = path.parent().unwrap_or(Path::new("."));
        spec.resolve(base)
    }

    pub fn resolve(&self, base: &Path) -> Result<LoadedInstance, CliError> {
        let mut bandits = Vec::new();
        for entry in &self.bandits {
            let file = match &entry.model {
                ModelRef::File(p) => ModelSpecFile::load(&base.join(p))?,
                ModelRef::Inline(m) => m.clone(),
            };
            let model = file.build()?;
            let tol = file.tolerances();
            bandits.extend(std::iter::repeat_n((model, tol), entry.count));
        }
        Ok(LoadedInstance { bandits, budget: self.budget, exact_m: self.exact_m, simulation: self.simulation })
    }
}

fn read(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| CliError::Parse(format!("{}: {e}", path.display())))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scalars_broadcast_and_arrays_fix_length() {
        let f = ModelSpecFile::parse(
            "[builder]\nkind = \"repairman\"\nlambda = 1\nr = 1\ncd = [0, 1, 2, 3]\n",
        )
        .unwrap();
        let m = f.build().unwrap();
        assert_eq!(m.n_states(), 4);
        assert_eq!(m.cost(3, Action::Passive), 3.0);
    }

    #[test]
    fn scalar_only_builder_needs_truncation() {
        let f = ModelSpecFile::parse("[builder]\nkind = \"repairman\"\nlambda = 1\nr = 1\n").unwrap();
        assert!(matches!(f.build(), Err(CliError::Parse(_))));
    }

    #[test]
    fn bad_action_is_a_parse_error() {
        let f = ModelSpecFile::parse(
            "[explicit]\nstates = 2\ncost = [[0, 0], [0, 0]]\nf = [[0, 0], [0, 0]]\ntransitions = [{ from = 0, to = 1, action = 3, rate = 1 }]\n",
        )
        .unwrap();
        assert!(matches!(f.build(), Err(CliError::Parse(_))));
    }

    #[test]
    fn both_forms_rejected() {
        let f = ModelSpecFile::parse(
            "[builder]\nkind = \"tcp\"\nlambda = 1\ngamma = 0\nalpha = 2\n[explicit]\nstates = 1\ncost = [[0, 0]]\nf = [[0, 0]]\n",
        )
        .unwrap();
        assert!(f.build().is_err());
    }
}
