//! θ-subsumption between metarules: `c` subsumes `d` when some
//! sort-preserving substitution maps `c`'s head onto `d`'s head and every
//! body literal of `c` onto a body literal of `d`. Deciding this is
//! NP-complete in general; clauses here are tiny, so a complete backtracking
//! matcher with most-constrained-first literal ordering is enough.

use crate::clause::{Metarule, Substitution, Variable};
use crate::engine;

/// Complete search for a subsumption witness. The witness maps `c`'s
/// variables (canonical ids) to `d`'s; applying it to `c` yields `d`'s head
/// and a subset of `d`'s body, with duplicates collapsed.
pub fn subsumes(c: &Metarule, d: &Metarule) -> Option<Substitution> {
    let cl = c.raw_lits();
    let dl = d.raw_lits();
    let (so_pairs, fo_pairs) = engine::subsumes_lits(&cl, &dl)?;
    let mut s = Substitution::new();
    for (from, to) in so_pairs {
        s.bind(Variable::second_order(from), Variable::second_order(to)).expect("same sort");
    }
    for (from, to) in fo_pairs {
        s.bind(Variable::first_order(from), Variable::first_order(to)).expect("same sort");
    }
    Some(s)
}

/// A clause is a tautology here exactly when its head literal is an element
/// of its body.
pub fn is_tautology(m: &Metarule) -> bool {
    m.body().contains(m.head())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::clause::{apply_substitution, parse};

    fn mr(s: &str) -> Metarule {
        parse(s).unwrap()
    }

    fn assert_sound_witness(c: &Metarule, d: &Metarule, theta: &Substitution) {
        let image = apply_substitution(c, theta);
        assert_eq!(image.head(), d.head(), "witness must map head onto head");
        for lit in image.body() {
            assert!(d.body().contains(lit), "{lit:?} not in {d}");
        }
    }

    #[test]
    fn worked_example_m4_subsumes_m2_and_m3() {
        let m4 = mr("P(A,B) :- Q(B,C),R(A,D),S(A,D),T(B,C).");
        let m2 = mr("P(A,B) :- Q(A,A),R(B,B).");
        let m3 = mr("P(A,B) :- Q(A,C),R(B,C).");
        let t2 = subsumes(&m4, &m2).expect("M4 subsumes M2");
        assert_sound_witness(&m4, &m2, &t2);
        let t3 = subsumes(&m4, &m3).expect("M4 subsumes M3");
        assert_sound_witness(&m4, &m3, &t3);
        assert!(subsumes(&m2, &m4).is_none());
    }

    #[test]
    fn reflexive_with_identity_witness() {
        let c = mr("P(A,B) :- Q(A,C),R(C,B).");
        let theta = subsumes(&c, &c).unwrap();
        assert_sound_witness(&c, &c, &theta);
    }

    #[test]
    fn free_variable_specializes() {
        let c = mr("P(A,B) :- Q(A,C).");
        let d = mr("P(A,B) :- Q(A,B).");
        let theta = subsumes(&c, &d).unwrap();
        assert_sound_witness(&c, &d, &theta);
        assert!(subsumes(&d, &c).is_none());
    }

    #[test]
    fn heads_must_match_exactly() {
        // dyadic head cannot map onto a monadic one
        assert!(subsumes(&mr("P(A,B) :- Q(A)."), &mr("P(A) :- Q(A).")).is_none());
        // but a distinct-variable head can collapse onto a repeated one
        let c = mr("P(A,B) :- Q(A,C).");
        let d = mr("P(A,A) :- Q(A,B).");
        let theta = subsumes(&c, &d).unwrap();
        assert_sound_witness(&c, &d, &theta);
    }

    #[test]
    fn tautology_is_head_in_body() {
        assert!(is_tautology(&mr("P(A) :- P(A).")));
        assert!(is_tautology(&mr("P(A,B) :- P(A,B),Q(A).")));
        assert!(!is_tautology(&mr("P(A,B) :- Q(A,C),R(C,B).")));
        assert!(!is_tautology(&mr("P(A) :- P(B).")));
    }
}
