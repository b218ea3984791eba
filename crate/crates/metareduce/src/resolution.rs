//! Binary SLD-resolution, the bounded closure R^k, k-derivability and
//! k-bounded entailment via SLD-deduction.
//!
//! The closure draws the second parent of every inference from the base
//! theory, so derivations are linear with respect to it. One body literal is
//! unified with one head; there is no factorisation.

use crate::clause::Metarule;
use crate::engine::{self, Packed, Search};
use crate::subsumption::is_tautology;
use serde_json::json;

pub use crate::engine::{Guard, Limits};

/// Resolve body literal `body_index` of `c1` (canonical body order) against
/// the head of `c2` (standardized apart). Returns the canonicalized
/// resolvent, or None when the arities differ.
///
/// Panics when `body_index` is out of range.
pub fn resolve(c1: &Metarule, body_index: usize, c2: &Metarule) -> Option<Metarule> {
    assert!(body_index < c1.body_size(), "body literal index out of range");
    let l1 = c1.raw_lits();
    let l2 = c2.raw_lits();
    let out = engine::resolve_lits(&l1, body_index, &l2)?;
    Some(Metarule::canonical_from_raw(&out[0], &out[1..]))
}

/// The unifier of a resolution step, as variable pairs between the selected
/// body literal of `c1` and the head of `c2`.
fn step_unifier(c1: &Metarule, body_index: usize, c2: &Metarule) -> Vec<(String, String)> {
    let sel = &c1.body()[body_index];
    let head = c2.head();
    let mut pairs = vec![(sel.pred.name(), head.pred.name())];
    for (a, b) in sel.args.iter().zip(head.args.iter()) {
        pairs.push((a.name(), b.name()));
    }
    pairs
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DerivationStep {
    pub first: Metarule,
    pub body_index: usize,
    pub base: Metarule,
    pub unifier: Vec<(String, String)>,
    pub resolvent: Metarule,
}

/// A linear derivation: each step resolves the previous resolvent (or the
/// starting clause) against a clause of the base theory.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct DerivationTrace {
    pub steps: Vec<DerivationStep>,
}

impl DerivationTrace {
    pub fn depth(&self) -> usize {
        self.steps.len()
    }

    pub fn final_resolvent(&self) -> Option<&Metarule> {
        self.steps.last().map(|s| &s.resolvent)
    }

    /// Re-run every step through `resolve`; returns the final resolvent if
    /// each recorded step is reproducible.
    pub fn replay(&self) -> Option<Metarule> {
        let mut cur: Option<Metarule> = None;
        for step in &self.steps {
            if let Some(prev) = &cur {
                if *prev != step.first {
                    return None;
                }
            }
            let r = resolve(&step.first, step.body_index, &step.base)?;
            if r != step.resolvent {
                return None;
            }
            cur = Some(r);
        }
        cur
    }

    /// JSON array of steps: parents by canonical text, body index, unifier
    /// as variable pairs.
    pub fn to_json(&self) -> serde_json::Value {
        json!(self
            .steps
            .iter()
            .map(|s| {
                json!({
                    "first": s.first.text(),
                    "body_index": s.body_index,
                    "base": s.base.text(),
                    "unifier": s.unifier.iter().map(|(a, b)| json!([a, b])).collect::<Vec<_>>(),
                    "resolvent": s.resolvent.text(),
                })
            })
            .collect::<Vec<_>>())
    }
}

pub(crate) fn dedup_packed(theory: &[Metarule]) -> (Vec<Packed>, Vec<Metarule>) {
    let mut packed: Vec<Packed> = Vec::new();
    let mut rules: Vec<Metarule> = Vec::new();
    for m in theory {
        let p = m.to_packed();
        if !packed.contains(&p) {
            packed.push(p);
            rules.push(m.clone());
        }
    }
    (packed, rules)
}

/// ⋃_{n<=depth} R^n(theory) restricted to clauses with at most `max_body`
/// body literals, deduplicated up to variable renaming and sorted by
/// (body size, canonical text). Stops early at a fixpoint.
pub fn closure(theory: &[Metarule], depth: usize, max_body: usize, limits: &Limits) -> Result<Vec<Metarule>, Guard> {
    crate::init_threads();
    let (packed, _) = dedup_packed(theory);
    let mut search = Search::new(packed);
    search.run(depth, max_body, None, limits)?;
    let mut out: Vec<Metarule> = search.arena.clauses.iter().map(Metarule::from_packed).collect();
    out.sort();
    Ok(out)
}

/// Is `c` derivable from `theory` in at most `depth` resolution steps?
/// Clauses already in the theory are 0-derivable (empty trace). The search
/// prunes every resolvent with more body literals than `c`.
pub fn derives_k(theory: &[Metarule], c: &Metarule, depth: usize, limits: &Limits) -> Result<Option<DerivationTrace>, Guard> {
    crate::init_threads();
    let (packed, rules) = dedup_packed(theory);
    let target = c.to_packed();
    if packed.contains(&target) {
        return Ok(Some(DerivationTrace::default()));
    }
    let mut search = Search::new(packed);
    let found = search.run(depth, c.body_size(), Some(&target), limits)?;
    let Some(idx) = found else {
        return Ok(None);
    };
    let chain = search.chain(idx);
    let root = search.chain_root(idx);
    let mut cur = Metarule::from_packed(&search.arena.clauses[root as usize]);
    let mut steps = Vec::with_capacity(chain.len());
    for (_, lit, base_idx) in chain {
        let base = rules[base_idx as usize].clone();
        let resolvent = resolve(&cur, lit as usize, &base).expect("recorded step must replay");
        steps.push(DerivationStep {
            first: cur.clone(),
            body_index: lit as usize,
            base: base.clone(),
            unifier: step_unifier(&cur, lit as usize, &base),
            resolvent: resolvent.clone(),
        });
        cur = resolvent;
    }
    debug_assert_eq!(&cur, c, "trace must reproduce the target up to renaming");
    Ok(Some(DerivationTrace { steps }))
}

/// k-bounded entailment via SLD-deduction: true iff `c` is a tautology or
/// some derivable clause subsumes `c`. Theory members are always candidate
/// subsumers (a clause with a larger body can subsume a smaller one by
/// collapsing variables); the derived-clause search is cut at body size
/// |body(c)| + `slack`, and slack 0 is the default everywhere.
pub fn entails_k_slack(theory: &[Metarule], c: &Metarule, depth: usize, slack: usize, limits: &Limits) -> Result<bool, Guard> {
    if is_tautology(c) {
        return Ok(true);
    }
    crate::init_threads();
    let (packed, _) = dedup_packed(theory);
    let target = c.to_packed();
    if packed.iter().any(|d| engine::subsumes_packed(d, &target)) {
        return Ok(true);
    }
    let mut search = Search::new(packed);
    search.run(depth, c.body_size() + slack, None, limits)?;
    Ok(search.arena.clauses.iter().any(|d| engine::subsumes_packed(d, &target)))
}

pub fn entails_k(theory: &[Metarule], c: &Metarule, depth: usize, limits: &Limits) -> Result<bool, Guard> {
    entails_k_slack(theory, c, depth, 0, limits)
}
