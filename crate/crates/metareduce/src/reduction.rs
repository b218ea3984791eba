//! Reduction drivers: repeatedly remove a clause that is redundant with
//! respect to the rest of the theory, for one of three redundancy relations
//! (subsumption, k-bounded entailment, k-bounded derivability), plus the
//! fragment-targeted variant that first restricts the theory to a target
//! fragment and checks the remainder is reachable from it.
//!
//! Removal order: candidates are scanned by descending body size, then
//! ascending canonical text. For entailment, clauses redundant by plain
//! subsumption are removed first (subsumption is entailment at depth 0);
//! this reproduces the published worked examples, which drop subsumed
//! specialisations before considering derivation-based redundancy. Since all
//! three relations are monotone in the theory, a clause found irredundant
//! once can never become redundant after further removals, so a single
//! forward pass is equivalent to rescanning from the start after every
//! removal.

use crate::clause::Metarule;
use crate::engine::{self, Guard, Limits};
use crate::fragments::{in_fragment, FragmentSpec};
use crate::resolution::{closure, derives_k, entails_k_slack};
use crate::subsumption::subsumes;
use serde::{Deserialize, Serialize};
use std::time::Instant;

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum ReductionKind {
    Subsumption,
    Entailment,
    Derivation,
}

/// One of S, E(depth k), D(depth k); depth is ignored for S.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub struct ReductionRelation {
    pub kind: ReductionKind,
    pub depth: usize,
}

impl ReductionRelation {
    pub fn s() -> ReductionRelation {
        ReductionRelation { kind: ReductionKind::Subsumption, depth: 0 }
    }

    pub fn e(depth: usize) -> ReductionRelation {
        ReductionRelation { kind: ReductionKind::Entailment, depth }
    }

    pub fn d(depth: usize) -> ReductionRelation {
        ReductionRelation { kind: ReductionKind::Derivation, depth }
    }

    pub fn letter(&self) -> &'static str {
        match self.kind {
            ReductionKind::Subsumption => "s",
            ReductionKind::Entailment => "e",
            ReductionKind::Derivation => "d",
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct ReductionOptions {
    pub slack: usize,
    pub limits: Limits,
}

impl Default for ReductionOptions {
    fn default() -> ReductionOptions {
        ReductionOptions { slack: 0, limits: Limits::default() }
    }
}

/// Is `c` redundant with respect to `theory` under the relation? The caller
/// removes `c` from the theory first.
pub fn is_redundant(theory: &[Metarule], c: &Metarule, rel: ReductionRelation, opts: &ReductionOptions) -> Result<bool, Guard> {
    match rel.kind {
        ReductionKind::Subsumption => Ok(theory.iter().any(|t| subsumes(t, c).is_some())),
        ReductionKind::Entailment => entails_k_slack(theory, c, rel.depth, opts.slack, &opts.limits),
        ReductionKind::Derivation => Ok(derives_k(theory, c, rel.depth, &opts.limits)?.is_some()),
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ReductionReport {
    pub input: String,
    pub relation: String,
    pub depth: usize,
    pub input_count: usize,
    pub kept: Vec<String>,
    pub removed_count: usize,
    pub removal_order: Vec<String>,
    pub duration_ms: u64,
    pub tool_version: String,
    pub order_policy: String,
}

#[derive(Clone, Debug)]
pub struct ReductionOutcome {
    pub kept: Vec<Metarule>,
    pub removed: Vec<Metarule>,
    pub report: ReductionReport,
}

struct Scan {
    items: Vec<Metarule>,
    alive: Vec<bool>,
    removed: Vec<usize>,
}

impl Scan {
    fn new(theory: &[Metarule]) -> Scan {
        let mut items: Vec<Metarule> = Vec::new();
        for m in theory {
            if !items.contains(m) {
                items.push(m.clone());
            }
        }
        items.sort();
        let alive = vec![true; items.len()];
        Scan { items, alive, removed: Vec::new() }
    }

    /// Candidate order: descending body size, ascending canonical text.
    fn order(&self) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..self.items.len()).collect();
        idx.sort_by(|&a, &b| {
            let (sa, ta) = self.items[a].sort_key();
            let (sb, tb) = self.items[b].sort_key();
            sb.cmp(&sa).then_with(|| ta.cmp(tb))
        });
        idx
    }

    fn alive_except(&self, skip: usize) -> Vec<Metarule> {
        self.items
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != skip && self.alive[*i])
            .map(|(_, m)| m.clone())
            .collect()
    }

    fn remove(&mut self, i: usize) {
        self.alive[i] = false;
        self.removed.push(i);
    }

    fn kept(&self) -> Vec<Metarule> {
        self.items
            .iter()
            .enumerate()
            .filter(|(i, _)| self.alive[*i])
            .map(|(_, m)| m.clone())
            .collect()
    }
}

/// Remove every clause subsumed by another live clause. Subsumer candidates
/// are tried in ascending (body size, text) order, so equivalence classes
/// keep their smallest member.
fn subsumption_pass(scan: &mut Scan) {
    for ci in scan.order() {
        if !scan.alive[ci] {
            continue;
        }
        let found = (0..scan.items.len())
            .find(|&cj| cj != ci && scan.alive[cj] && subsumes(&scan.items[cj], &scan.items[ci]).is_some());
        if found.is_some() {
            scan.remove(ci);
        }
    }
}

fn entailment_pass(scan: &mut Scan, depth: usize, opts: &ReductionOptions) -> Result<(), Guard> {
    for ci in scan.order() {
        if !scan.alive[ci] {
            continue;
        }
        let rest = scan.alive_except(ci);
        if entails_k_slack(&rest, &scan.items[ci], depth, opts.slack, &opts.limits)? {
            scan.remove(ci);
        }
    }
    Ok(())
}

/// Theories this small are cheaper to scan directly than to index.
const DIRECT_DERIVATION_SCAN: usize = 48;

fn derivation_pass(scan: &mut Scan, depth: usize, opts: &ReductionOptions) -> Result<(), Guard> {
    let packed: Vec<engine::Packed> = scan.items.iter().map(|m| m.to_packed()).collect();
    let exact = packed.iter().all(|p| engine::distinct_preds(&p.lits()));
    if scan.items.len() <= DIRECT_DERIVATION_SCAN || !exact {
        for ci in scan.order() {
            if !scan.alive[ci] {
                continue;
            }
            let rest = scan.alive_except(ci);
            if derives_k(&rest, &scan.items[ci], depth, &opts.limits)?.is_some() {
                scan.remove(ci);
            }
        }
        return Ok(());
    }
    // Indexed scan: one traced closure of the theory records, for each
    // clause, a few derivations of it from other theory clauses. A clause
    // never re-derived is irredundant in every subset (the relation is
    // monotone in the theory), so it is settled for good. When removals
    // invalidate the recorded derivations faster than single-clause searches
    // can keep up, the index is rebuilt on the surviving theory.
    let mut supports: Vec<Vec<Vec<usize>>> = {
        let index = engine::build_rederivation_index(&packed, depth, &opts.limits)?;
        index.supports.into_iter().map(|v| v.into_iter().map(|s| s.into_iter().map(|j| j as usize).collect()).collect()).collect()
    };
    let mut settled_irredundant = vec![false; scan.items.len()];
    for (i, sups) in supports.iter().enumerate() {
        if sups.is_empty() {
            settled_irredundant[i] = true;
        }
    }
    let mut fallback_pressure = 0usize;
    for ci in scan.order() {
        if !scan.alive[ci] || settled_irredundant[ci] {
            continue;
        }
        if supports[ci].iter().any(|sup| sup.iter().all(|&j| scan.alive[j])) {
            scan.remove(ci);
            continue;
        }
        // recorded derivations were invalidated by removals
        fallback_pressure += 1;
        let alive_count = scan.alive.iter().filter(|a| **a).count();
        if fallback_pressure >= 4 && alive_count > DIRECT_DERIVATION_SCAN {
            // rebuild the index against the surviving clauses
            let alive_orig: Vec<usize> = (0..scan.items.len()).filter(|&i| scan.alive[i]).collect();
            let alive_packed: Vec<engine::Packed> = alive_orig.iter().map(|&i| packed[i].clone()).collect();
            let fresh = engine::build_rederivation_index(&alive_packed, depth, &opts.limits)?;
            for (pos, &orig) in alive_orig.iter().enumerate() {
                supports[orig] = fresh.supports[pos]
                    .iter()
                    .map(|s| s.iter().map(|&j| alive_orig[j as usize]).collect())
                    .collect();
                if supports[orig].is_empty() {
                    settled_irredundant[orig] = true;
                }
            }
            fallback_pressure = 0;
            if settled_irredundant[ci] {
                continue;
            }
            if supports[ci].iter().any(|sup| sup.iter().all(|&j| scan.alive[j])) {
                scan.remove(ci);
                continue;
            }
            // freshly rebuilt and still no valid support: irredundant
            settled_irredundant[ci] = true;
            continue;
        }
        let rest = scan.alive_except(ci);
        if derives_k(&rest, &scan.items[ci], depth, &opts.limits)?.is_some() {
            scan.remove(ci);
        } else {
            settled_irredundant[ci] = true;
        }
    }
    Ok(())
}

fn outcome(input: &str, rel: ReductionRelation, scan: Scan, start: Instant, policy: &str, input_count: usize) -> ReductionOutcome {
    let kept = scan.kept();
    let removed: Vec<Metarule> = scan.removed.iter().map(|&i| scan.items[i].clone()).collect();
    let report = ReductionReport {
        input: input.to_string(),
        relation: rel.letter().to_string(),
        depth: rel.depth,
        input_count,
        kept: kept.iter().map(|m| m.text().to_string()).collect(),
        removed_count: removed.len(),
        removal_order: removed.iter().map(|m| m.text().to_string()).collect(),
        duration_ms: start.elapsed().as_millis() as u64,
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        order_policy: policy.to_string(),
    };
    ReductionOutcome { kept, removed, report }
}

/// Repeatedly remove a clause redundant with respect to the remaining
/// theory. Every removal is justified against the clauses present at that
/// moment; the output contains no clause redundant in it at the configured
/// depth.
pub fn reduce(input: &str, theory: &[Metarule], rel: ReductionRelation, opts: &ReductionOptions) -> Result<ReductionOutcome, Guard> {
    crate::init_threads();
    let start = Instant::now();
    let mut scan = Scan::new(theory);
    let input_count = scan.items.len();
    let policy = match rel.kind {
        ReductionKind::Subsumption => "scan desc(body-size) asc(text)",
        ReductionKind::Entailment => "subsumption-redundant first, then entailment; scan desc(body-size) asc(text)",
        ReductionKind::Derivation => "scan desc(body-size) asc(text), indexed rederivations",
    };
    if input_count >= 2 {
        match rel.kind {
            ReductionKind::Subsumption => subsumption_pass(&mut scan),
            ReductionKind::Entailment => {
                subsumption_pass(&mut scan);
                entailment_pass(&mut scan, rel.depth, opts)?;
            }
            ReductionKind::Derivation => derivation_pass(&mut scan, rel.depth, opts)?,
        }
    }
    Ok(outcome(input, rel, scan, start, policy, input_count))
}

/// Fragment-targeted reduction: restrict to the clauses inside the target
/// fragment, check every input clause is reachable from that base under the
/// relation, then reduce the base. Returns None when some clause is not
/// reachable.
pub fn mreduce(
    input: &str,
    theory: &[Metarule],
    rel: ReductionRelation,
    target: &FragmentSpec,
    opts: &ReductionOptions,
) -> Result<Option<ReductionOutcome>, Guard> {
    crate::init_threads();
    let scan = Scan::new(theory);
    let base: Vec<Metarule> = scan.items.iter().filter(|m| in_fragment(target, m)).cloned().collect();
    for c in scan.items.iter().filter(|m| !in_fragment(target, m)) {
        let reachable = match rel.kind {
            ReductionKind::Subsumption => base.iter().any(|b| subsumes(b, c).is_some()),
            ReductionKind::Entailment => entails_k_slack(&base, c, rel.depth, opts.slack, &opts.limits)?,
            ReductionKind::Derivation => derives_k(&base, c, rel.depth, &opts.limits)?.is_some(),
        };
        if !reachable {
            return Ok(None);
        }
    }
    let desc = format!("{input} -> {}", target.label());
    Ok(Some(reduce(&desc, &base, rel, opts)?))
}

/// Validity suite for a finished reduction: every removed clause must be
/// redundant with respect to the kept set at the configured depth, and every
/// kept clause irredundant in the kept set.
#[derive(Clone, Debug, Default)]
pub struct ValidityReport {
    pub removed_failures: Vec<String>,
    pub kept_failures: Vec<String>,
}

impl ValidityReport {
    pub fn ok(&self) -> bool {
        self.removed_failures.is_empty() && self.kept_failures.is_empty()
    }
}

pub fn verify_reduction(
    kept: &[Metarule],
    removed: &[Metarule],
    rel: ReductionRelation,
    opts: &ReductionOptions,
) -> Result<ValidityReport, Guard> {
    let mut report = ValidityReport::default();
    match rel.kind {
        ReductionKind::Derivation if !removed.is_empty() => {
            let bound = removed.iter().map(|m| m.body_size()).max().unwrap();
            let derivable = closure(kept, rel.depth, bound, &opts.limits)?;
            for r in removed {
                if !derivable.contains(r) {
                    report.removed_failures.push(r.text().to_string());
                }
            }
        }
        _ => {
            for r in removed {
                if !is_redundant(kept, r, rel, opts)? {
                    report.removed_failures.push(r.text().to_string());
                }
            }
        }
    }
    for (i, c) in kept.iter().enumerate() {
        let rest: Vec<Metarule> = kept.iter().enumerate().filter(|(j, _)| *j != i).map(|(_, m)| m.clone()).collect();
        if is_redundant(&rest, c, rel, opts)? {
            report.kept_failures.push(c.text().to_string());
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::clause::parse;
    use crate::fragments::Constraint;

    fn mr(s: &str) -> Metarule {
        parse(s).unwrap()
    }

    fn worked_theory() -> Vec<Metarule> {
        vec![
            mr("P(A,B) :- Q(B,A)."),
            mr("P(A,B) :- Q(A,A),R(B,B)."),
            mr("P(A,B) :- Q(A,C),R(B,C)."),
            mr("P(A,B) :- Q(B,C),R(A,D),S(A,D),T(B,C)."),
        ]
    }

    #[test]
    fn redundancy_examples() {
        let opts = ReductionOptions::default();
        // entailment redundancy by subsumption at depth 0
        let m1 = mr("P(A,B) :- Q(A,B).");
        let m2 = mr("P(A,B) :- Q(A,B),R(A).");
        assert!(is_redundant(&[m1.clone()], &m2, ReductionRelation::e(7), &opts).unwrap());
        // derivation redundancy by self-resolution
        let theory = [mr("P(A,B) :- Q(A,B)."), mr("P(A,B) :- Q(A,B),R(A)."), mr("P(A,B) :- Q(A,B),R(A,B).")];
        let m4 = mr("P(A,B) :- Q(A,B),R(A,B),S(A,B).");
        assert!(is_redundant(&theory, &m4, ReductionRelation::d(7), &opts).unwrap());
        // nothing is redundant against an empty theory
        assert!(!is_redundant(&[], &m2, ReductionRelation::s(), &opts).unwrap());
        assert!(!is_redundant(&[], &m2, ReductionRelation::e(7), &opts).unwrap());
        assert!(!is_redundant(&[], &m2, ReductionRelation::d(7), &opts).unwrap());
    }

    #[test]
    fn worked_example_entailment_reduction() {
        let opts = ReductionOptions::default();
        let out = reduce("worked", &worked_theory(), ReductionRelation::e(7), &opts).unwrap();
        let kept: Vec<&str> = out.kept.iter().map(|m| m.text()).collect();
        // the worked theory's 4-literal clause, in canonical text
        assert_eq!(kept, vec!["P(A,B) :- Q(B,A).", "P(A,B) :- Q(A,C),R(A,C),S(B,D),T(B,D)."]);
        assert_eq!(out.report.input_count, out.kept.len() + out.report.removed_count);
    }

    #[test]
    fn singleton_theory_is_returned_unchanged() {
        let opts = ReductionOptions::default();
        let t = vec![mr("P(A,B) :- Q(A,B).")];
        for rel in [ReductionRelation::s(), ReductionRelation::e(7), ReductionRelation::d(7)] {
            let out = reduce("one", &t, rel, &opts).unwrap();
            assert_eq!(out.kept, t);
        }
    }

    #[test]
    fn worked_example_fragment_targeted_reduction() {
        let opts = ReductionOptions::default();
        let target = FragmentSpec::new(Constraint::None, [2], 2);
        let out = mreduce("worked", &worked_theory(), ReductionRelation::e(7), &target, &opts)
            .unwrap()
            .expect("reducible to the target fragment");
        let kept: Vec<&str> = out.kept.iter().map(|m| m.text()).collect();
        assert_eq!(
            kept,
            vec!["P(A,B) :- Q(B,A).", "P(A,B) :- Q(A,A),R(B,B).", "P(A,B) :- Q(A,C),R(B,C)."]
        );
    }

    #[test]
    fn mreduce_with_covering_target_equals_reduce() {
        let opts = ReductionOptions::default();
        let target = FragmentSpec::new(Constraint::None, [2], 5);
        let theory = worked_theory();
        let a = mreduce("worked", &theory, ReductionRelation::e(7), &target, &opts).unwrap().unwrap();
        let b = reduce("worked", &theory, ReductionRelation::e(7), &opts).unwrap();
        assert_eq!(a.kept, b.kept);
    }

    #[test]
    fn mreduce_fails_when_base_cannot_reach() {
        let opts = ReductionOptions::default();
        let target = FragmentSpec::new(Constraint::None, [1], 2);
        let chain = vec![mr("P(A,B) :- Q(A,C),R(C,B).")];
        assert!(mreduce("chain", &chain, ReductionRelation::d(7), &target, &opts).unwrap().is_none());
    }

    #[test]
    fn reduce_is_idempotent_and_valid() {
        let opts = ReductionOptions::default();
        for rel in [ReductionRelation::s(), ReductionRelation::e(5), ReductionRelation::d(5)] {
            let out = reduce("worked", &worked_theory(), rel, &opts).unwrap();
            let again = reduce("again", &out.kept, rel, &opts).unwrap();
            assert_eq!(again.kept, out.kept, "{rel:?}");
            assert!(again.removed.is_empty());
            let validity = verify_reduction(&out.kept, &out.removed, rel, &opts).unwrap();
            assert!(validity.ok(), "{rel:?}: {validity:?}");
        }
    }

    #[test]
    fn report_serializes_round_trip() {
        let opts = ReductionOptions::default();
        let out = reduce("worked", &worked_theory(), ReductionRelation::s(), &opts).unwrap();
        let json = serde_json::to_string(&out.report).unwrap();
        let back: ReductionReport = serde_json::from_str(&json).unwrap();
        assert_eq!(back.input_count, out.report.input_count);
        assert_eq!(back.kept, out.report.kept);
    }
}
