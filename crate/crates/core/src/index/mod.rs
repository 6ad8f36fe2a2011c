//! Indexability checks and Whittle-index computation.
//!
//! [`whittle_index`] tries, in order: the difference-quotient table over
//! threshold policies when threshold structure is detected and certified, the
//! envelope restricted to threshold policies, and the envelope over all
//! passive sets.

pub mod envelope;
pub mod threshold;

use std::cmp::Ordering;
use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::chain::steady_state_with;
use crate::config::Tolerances;
use crate::error::{Error, Result};
use crate::model::{validate_model_with, BanditModel};
use crate::policy::{PassiveSetPolicy, ThresholdKind, ThresholdPolicy};

pub use envelope::{build_envelope, read_index, Candidate, Envelope, Orientation};
pub use threshold::{
    closed_form_index, detect_threshold_structure, indexable_by_monotone_ef, Condition, ThresholdDetection,
};

/// Index of one state. Infinite values mark states whose action never
/// switches at a finite subsidy; `Undefined` marks states that no considered
/// policy ever visits.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IndexValue {
    Finite(f64),
    PosInf,
    NegInf,
    Undefined,
}

impl IndexValue {
    pub fn is_undefined(&self) -> bool {
        matches!(self, IndexValue::Undefined)
    }

    /// Numeric value with ±∞ mapped to the float infinities.
    pub fn as_f64(&self) -> Option<f64> {
        match *self {
            IndexValue::Finite(w) => Some(w),
            IndexValue::PosInf => Some(f64::INFINITY),
            IndexValue::NegInf => Some(f64::NEG_INFINITY),
            IndexValue::Undefined => None,
        }
    }

    pub fn finite(&self) -> Option<f64> {
        match *self {
            IndexValue::Finite(w) => Some(w),
            _ => None,
        }
    }
}

impl PartialOrd for IndexValue {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        self.as_f64()?.partial_cmp(&other.as_f64()?)
    }
}

impl fmt::Display for IndexValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            IndexValue::Finite(w) => write!(f, "{w:?}"),
            IndexValue::PosInf => f.write_str("+inf"),
            IndexValue::NegInf => f.write_str("-inf"),
            IndexValue::Undefined => f.write_str("undefined"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "verdict")]
pub enum Verdict {
    Indexable,
    /// Two optimal passive sets, in order of increasing W, that are not nested.
    NotIndexable { witness: (Vec<usize>, Vec<usize>) },
    /// Every line has the same slope, so no subsidy ever changes the optimum.
    IndexNotFound,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum IndexPath {
    ClosedForm,
    ThresholdEnvelope,
    FullEnvelope,
}

impl fmt::Display for IndexPath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            IndexPath::ClosedForm => "closed-form",
            IndexPath::ThresholdEnvelope => "threshold",
            IndexPath::FullEnvelope => "algorithm1",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Breakpoint {
    pub w: IndexValue,
    /// Optimal passive set just above `w`.
    pub passive: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexResult {
    pub verdict: Verdict,
    pub index: Vec<IndexValue>,
    pub breakpoints: Vec<Breakpoint>,
    pub orientation: Option<Orientation>,
    pub path: IndexPath,
    pub detection: ThresholdDetection,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    #[default]
    Auto,
    Algorithm1,
    Threshold,
    ClosedForm,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IndexOptions {
    pub method: Method,
    pub max_states: usize,
    pub tolerances: Tolerances,
}

impl Default for IndexOptions {
    fn default() -> Self {
        Self { method: Method::Auto, max_states: 20, tolerances: Tolerances::default() }
    }
}

fn ensure_valid(model: &BanditModel, tol: &Tolerances) -> Result<()> {
    let report = validate_model_with(model, tol);
    if report.ok {
        return Ok(());
    }
    let msgs: Vec<String> = report.errors().map(|i| i.to_string()).collect();
    Err(Error::InvalidParams(msgs.join("; ")))
}

/// Evaluate policies in parallel, dropping those that are not unichain.
fn evaluate(model: &BanditModel, policies: Vec<PassiveSetPolicy>, tol: &Tolerances) -> Result<Vec<Candidate>> {
    let evaluated: Vec<Result<Option<Candidate>>> = policies
        .into_par_iter()
        .map(|policy| match steady_state_with(model, &policy, tol) {
            Ok(ss) => Ok(Some(Candidate { policy, ss })),
            Err(Error::NotUnichain(_)) => Ok(None),
            Err(e) => Err(e),
        })
        .collect();
    let mut out = Vec::with_capacity(evaluated.len());
    for c in evaluated {
        if let Some(c) = c? {
            out.push(c);
        }
    }
    if out.is_empty() {
        return Err(Error::AllPoliciesNonErgodic);
    }
    Ok(out)
}

fn from_envelope(
    model: &BanditModel,
    cands: &[Candidate],
    path: IndexPath,
    detection: ThresholdDetection,
    tol: &Tolerances,
) -> IndexResult {
    let env = build_envelope(cands, tol);
    let mut warnings = union_warnings(model, cands, &env, tol);
    let n = model.n_states();
    if env.segments.len() == 1 {
        warnings.push("all policies share one constraint value; no subsidy changes the optimum".into());
        let index = read_index(&env, Orientation::Increasing).unwrap_or_else(|_| vec![IndexValue::Undefined; n]);
        return IndexResult { verdict: Verdict::IndexNotFound, index, breakpoints: vec![], orientation: None, path, detection, warnings };
    }
    let first = read_index(&env, Orientation::Increasing);
    let (orientation, attempt) = match first {
        Ok(ix) => (Orientation::Increasing, Ok(ix)),
        Err(v) => match read_index(&env, Orientation::Decreasing) {
            Ok(ix) => (Orientation::Decreasing, Ok(ix)),
            Err(_) => (Orientation::Increasing, Err(v)),
        },
    };
    match attempt {
        Ok(index) => {
            let breakpoints = to_breakpoints(&index, orientation);
            IndexResult { verdict: Verdict::Indexable, index, breakpoints, orientation: Some(orientation), path, detection, warnings }
        }
        Err(v) => {
            let rep = |seg: usize| cands[env.segments[seg].members[0]].policy.passive_states();
            let witness = (rep(v.earlier), rep(v.later));
            warnings.push(format!("state {} breaks nesting between W-intervals {} and {}", v.state, v.earlier, v.later));
            IndexResult {
                verdict: Verdict::NotIndexable { witness },
                index: vec![IndexValue::Undefined; n],
                breakpoints: vec![],
                orientation: None,
                path,
                detection,
                warnings,
            }
        }
    }
}

/// Among tied minimisers the union of their passive sets should itself
/// minimise; report the intervals where it does not.
fn union_warnings(model: &BanditModel, cands: &[Candidate], env: &Envelope, tol: &Tolerances) -> Vec<String> {
    let n = model.n_states();
    let mut out = Vec::new();
    for (j, seg) in env.segments.iter().enumerate() {
        if seg.members.len() < 2 {
            continue;
        }
        let mask: Vec<bool> = (0..n).map(|x| seg.members.iter().any(|&m| cands[m].policy.is_passive(x))).collect();
        let union = PassiveSetPolicy::from_mask(mask);
        let ok = match steady_state_with(model, &union, tol) {
            Ok(ss) => tol.eq(ss.e_cost, seg.e_t) && tol.eq(ss.e_f, seg.e_f),
            Err(_) => false,
        };
        if !ok {
            out.push(format!("union {union} of tied minimisers on W-interval {j} is not a minimiser"));
        }
    }
    out
}

fn to_breakpoints(index: &[IndexValue], orientation: Orientation) -> Vec<Breakpoint> {
    envelope::breakpoints_from_index(index, orientation)
        .into_iter()
        .map(|(w, passive)| Breakpoint { w, passive })
        .collect()
}

/// Envelope over every passive set (2^N policies).
pub fn algorithm1(model: &BanditModel, max_states: usize) -> Result<IndexResult> {
    algorithm1_with(model, &IndexOptions { max_states, ..Default::default() })
}

pub fn algorithm1_with(model: &BanditModel, opts: &IndexOptions) -> Result<IndexResult> {
    let tol = &opts.tolerances;
    ensure_valid(model, tol)?;
    let n = model.n_states();
    if n > opts.max_states || n >= 63 {
        return Err(Error::TooManyStates { states: n, max: opts.max_states.min(62) });
    }
    let policies = (0..1u64 << n).map(|bits| PassiveSetPolicy::from_bits(n, bits)).collect();
    let cands = evaluate(model, policies, tol)?;
    Ok(from_envelope(model, &cands, IndexPath::FullEnvelope, detect_threshold_structure(model), tol))
}

/// Envelope over threshold policies of one kind only.
pub fn threshold_envelope(model: &BanditModel, kind: ThresholdKind, tol: &Tolerances) -> Result<IndexResult> {
    ensure_valid(model, tol)?;
    let n = model.n_states();
    let policies = threshold::threshold_range(model)
        .into_iter()
        .map(|t| ThresholdPolicy::new(t, kind).to_passive_set(n))
        .collect();
    let cands = evaluate(model, policies, tol)?;
    Ok(from_envelope(model, &cands, IndexPath::ThresholdEnvelope, detect_threshold_structure(model), tol))
}

/// Outcome of the difference-quotient table over consecutive thresholds.
struct ClosedForm {
    index: Vec<IndexValue>,
    certified: bool,
    monotone: bool,
}

fn closed_form_table(model: &BanditModel, kind: ThresholdKind, tol: &Tolerances) -> Result<ClosedForm> {
    let n = model.n_states();
    let range = threshold::threshold_range(model);
    let states = threshold::threshold_states(model, kind, &range, tol)?;
    let certified = states.windows(2).all(|w| w[1].e_f - w[0].e_f > tol.functional_eq);
    let mut index = vec![IndexValue::Undefined; n];
    let mut ever = vec![false; n];
    for ss in &states {
        for x in 0..n {
            ever[x] |= ss.relevant[x];
        }
    }
    let mut ws = Vec::new();
    for (k, pair) in states.windows(2).enumerate() {
        let state = (range[k + 1]) as usize;
        let w = threshold::difference_quotient(&pair[0], &pair[1], tol)?;
        index[state] = IndexValue::Finite(w);
        ws.push(w);
    }
    for x in 0..n {
        if !ever[x] {
            index[x] = IndexValue::Undefined;
        } else if (x as isize) <= model.threshold_floor {
            index[x] = IndexValue::NegInf;
        }
    }
    // The top quotient leans on the truncation boundary; leave it out of the check.
    let checked = if model.is_truncated() && !ws.is_empty() { &ws[..ws.len() - 1] } else { &ws[..] };
    let monotone = checked.windows(2).all(|w| w[1] >= w[0] - tol.monotone * (1.0 + w[0].abs()));
    Ok(ClosedForm { index, certified, monotone })
}

fn orientation_of(kind: ThresholdKind) -> Orientation {
    match kind {
        ThresholdKind::ZeroOne => Orientation::Increasing,
        ThresholdKind::OneZero => Orientation::Decreasing,
    }
}

pub fn whittle_index(model: &BanditModel, opts: &IndexOptions) -> Result<IndexResult> {
    let tol = &opts.tolerances;
    ensure_valid(model, tol)?;
    let detection = detect_threshold_structure(model);
    match opts.method {
        Method::Algorithm1 => return algorithm1_with(model, opts),
        Method::Threshold => {
            let kind = detection.kind().ok_or_else(|| Error::InvalidParams("no threshold structure detected".into()))?;
            return threshold_envelope(model, kind, tol);
        }
        Method::ClosedForm => {
            let kind = detection.kind().ok_or_else(|| Error::InvalidParams("no threshold structure detected".into()))?;
            let cf = closed_form_table(model, kind, tol)?;
            let mut warnings = Vec::new();
            if !cf.certified {
                warnings.push("E(f) is not strictly increasing over thresholds; indexability not certified".into());
            }
            if !cf.monotone {
                warnings.push("difference quotients are not monotone in the threshold".into());
            }
            let ok = cf.certified && cf.monotone;
            let orientation = orientation_of(kind);
            return Ok(IndexResult {
                verdict: if ok { Verdict::Indexable } else { Verdict::IndexNotFound },
                breakpoints: if ok { to_breakpoints(&cf.index, orientation) } else { vec![] },
                index: cf.index,
                orientation: ok.then_some(orientation),
                path: IndexPath::ClosedForm,
                detection,
                warnings,
            });
        }
        Method::Auto => {}
    }

    let Some(kind) = detection.kind() else {
        return algorithm1_with(model, opts);
    };
    let mut warnings = Vec::new();
    match closed_form_table(model, kind, tol) {
        Ok(cf) if cf.certified && cf.monotone => {
            let orientation = orientation_of(kind);
            return Ok(IndexResult {
                verdict: Verdict::Indexable,
                breakpoints: to_breakpoints(&cf.index, orientation),
                index: cf.index,
                orientation: Some(orientation),
                path: IndexPath::ClosedForm,
                detection,
                warnings,
            });
        }
        Ok(cf) => warnings.push(if cf.certified {
            "difference quotients are not monotone; falling back to the threshold envelope".into()
        } else {
            "E(f) is not strictly increasing; falling back to the threshold envelope".into()
        }),
        Err(e) => warnings.push(format!("closed form unavailable ({e}); falling back to the threshold envelope")),
    }
    let mut res = threshold_envelope(model, kind, tol)?;
    warnings.append(&mut res.warnings);
    res.warnings = warnings;
    Ok(res)
}
