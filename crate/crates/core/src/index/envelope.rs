//! Lower envelope of the relaxed-cost lines g^X(W) = E_T(X) − W·E_f(X) and
//! the per-state reading of an index from it.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::chain::SteadyState;
use crate::config::Tolerances;
use crate::policy::PassiveSetPolicy;

use super::IndexValue;

#[derive(Debug, Clone)]
pub struct Candidate {
    pub policy: PassiveSetPolicy,
    pub ss: SteadyState,
}

/// Direction in which the optimal passive set moves as W grows.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Orientation {
    Increasing,
    Decreasing,
}

/// One open interval of W on which a single line (possibly shared by several
/// policies) is the unique minimiser.
#[derive(Debug, Clone)]
pub struct Segment {
    pub lo: f64,
    pub hi: f64,
    pub e_t: f64,
    pub e_f: f64,
    /// Candidate indices sharing the minimising line.
    pub members: Vec<usize>,
    /// Passive is an optimal action in this state on this interval.
    pub passive_ok: Vec<bool>,
    /// Active is an optimal action in this state on this interval.
    pub active_ok: Vec<bool>,
}

impl Segment {
    pub fn strictly_passive(&self, x: usize) -> bool {
        self.passive_ok[x] && !self.active_ok[x]
    }

    pub fn strictly_active(&self, x: usize) -> bool {
        self.active_ok[x] && !self.passive_ok[x]
    }
}

#[derive(Debug, Clone)]
pub struct Envelope {
    pub segments: Vec<Segment>,
    /// States relevant under at least one candidate.
    pub ever_relevant: Vec<bool>,
}

impl Envelope {
    /// Envelope value at W.
    pub fn value(&self, w: f64) -> f64 {
        let seg = self.segments.iter().find(|s| w <= s.hi).unwrap_or_else(|| self.segments.last().unwrap());
        seg.e_t - w * seg.e_f
    }
}

fn cross(a: (f64, f64), b: (f64, f64)) -> f64 {
    (b.0 - a.0) / (b.1 - a.1)
}

/// Build the lower envelope of the candidates' lines over all real W.
pub fn build_envelope(cands: &[Candidate], tol: &Tolerances) -> Envelope {
    let n = cands.first().map_or(0, |c| c.policy.n_states());
    let mut order: Vec<usize> = (0..cands.len()).collect();
    order.sort_by(|&a, &b| {
        let (x, y) = (&cands[a].ss, &cands[b].ss);
        x.e_f.total_cmp(&y.e_f).then(x.e_cost.total_cmp(&y.e_cost)).then(a.cmp(&b))
    });

    // Group identical lines; among equal slopes keep only the lowest intercept.
    let mut groups: Vec<Vec<usize>> = Vec::new();
    for i in order {
        match groups.last_mut() {
            Some(g) if tol.eq(cands[g[0]].ss.e_f, cands[i].ss.e_f) => g.push(i),
            _ => groups.push(vec![i]),
        }
    }
    let mut lines: Vec<((f64, f64), Vec<usize>)> = Vec::with_capacity(groups.len());
    for g in groups {
        let best = *g.iter().min_by(|&&a, &&b| cands[a].ss.e_cost.total_cmp(&cands[b].ss.e_cost)).unwrap();
        let line = (cands[best].ss.e_cost, cands[best].ss.e_f);
        let members: Vec<usize> = g.into_iter().filter(|&i| tol.eq(cands[i].ss.e_cost, line.0)).collect();
        lines.push((line, members));
    }

    // Convex-hull sweep in order of increasing E_f (decreasing slope).
    let mut hull: Vec<usize> = Vec::new();
    for k in 0..lines.len() {
        while hull.len() >= 2 {
            let j = hull[hull.len() - 1];
            let i = hull[hull.len() - 2];
            let w_ij = cross(lines[i].0, lines[j].0);
            let w_jk = cross(lines[j].0, lines[k].0);
            // j is optimal only on [w_ij, w_jk]; drop it if that is at most a point.
            if w_jk <= w_ij + tol.functional_eq * (1.0 + w_ij.abs()) {
                hull.pop();
            } else {
                break;
            }
        }
        hull.push(k);
    }

    let mut segments = Vec::with_capacity(hull.len());
    for (pos, &h) in hull.iter().enumerate() {
        let lo = if pos == 0 { f64::NEG_INFINITY } else { cross(lines[hull[pos - 1]].0, lines[h].0) };
        let hi = if pos + 1 == hull.len() { f64::INFINITY } else { cross(lines[h].0, lines[hull[pos + 1]].0) };
        let members = lines[h].1.clone();
        let mut passive_ok = vec![false; n];
        let mut active_ok = vec![false; n];
        for &m in &members {
            let c = &cands[m];
            for x in (0..n).filter(|&x| c.ss.relevant[x]) {
                if c.policy.is_passive(x) {
                    passive_ok[x] = true;
                } else {
                    active_ok[x] = true;
                }
            }
        }
        let (e_t, e_f) = lines[h].0;
        segments.push(Segment { lo, hi, e_t, e_f, members, passive_ok, active_ok });
    }

    let mut ever_relevant = vec![false; n];
    for c in cands {
        for x in 0..n {
            ever_relevant[x] |= c.ss.relevant[x];
        }
    }
    Envelope { segments, ever_relevant }
}

/// A state and two segments `i < j` whose optimal actions break nesting.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NestingViolation {
    pub state: usize,
    pub earlier: usize,
    pub later: usize,
}

/// Read the index off the envelope assuming the passive set moves in the
/// given direction. Fails with a witness if some state leaves the passive set
/// (Increasing) or re-enters it (Decreasing) as W grows.
pub fn read_index(env: &Envelope, orientation: Orientation) -> Result<Vec<IndexValue>, NestingViolation> {
    let n = env.ever_relevant.len();
    let segs = &env.segments;
    let last = segs.len().saturating_sub(1);
    let mut index = vec![IndexValue::Undefined; n];
    for x in 0..n {
        // `early` = the action that may not be optimal before a strict `late` one.
        let (early, late_strict): (fn(&Segment, usize) -> bool, fn(&Segment, usize) -> bool) = match orientation {
            Orientation::Increasing => (|s, x| s.passive_ok[x], Segment::strictly_active),
            Orientation::Decreasing => (|s, x| s.active_ok[x], Segment::strictly_passive),
        };
        let mut first_early: Option<usize> = None;
        let mut last_late: Option<usize> = None;
        for (j, s) in segs.iter().enumerate() {
            if late_strict(s, x) {
                if let Some(i) = first_early {
                    return Err(NestingViolation { state: x, earlier: i, later: j });
                }
                last_late = Some(j);
            }
            if early(s, x) && first_early.is_none() {
                first_early = Some(j);
            }
        }
        if !env.ever_relevant[x] {
            continue;
        }
        index[x] = match last_late {
            None => IndexValue::NegInf,
            Some(j) if j == last => IndexValue::PosInf,
            Some(j) => IndexValue::Finite(segs[j].hi),
        };
    }
    Ok(index)
}

/// Cumulative passive sets implied by an index table: for every distinct
/// index value v (ascending), the set of defined states that are passive just
/// above v.
pub fn breakpoints_from_index(index: &[IndexValue], orientation: Orientation) -> Vec<(IndexValue, Vec<usize>)> {
    let mut values: Vec<IndexValue> = index.iter().copied().filter(|v| !v.is_undefined()).collect();
    values.sort_by(|a, b| a.partial_cmp(b).unwrap_or(Ordering::Equal));
    values.dedup();
    values
        .into_iter()
        .map(|v| {
            let set = (0..index.len())
                .filter(|&x| match orientation {
                    Orientation::Increasing => !index[x].is_undefined() && index[x] <= v,
                    Orientation::Decreasing => !index[x].is_undefined() && index[x] > v,
                })
                .collect();
            (v, set)
        })
        .collect()
}
