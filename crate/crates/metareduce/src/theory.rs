//! Constructive witness clauses for the irreducibility results, and the
//! hypothesis-space size formula.

use crate::clause::{Literal, Metarule, Variable};
use num_bigint::BigUint;

fn so(id: u32) -> Variable {
    Variable::second_order(id)
}

fn fo(id: u32) -> Variable {
    Variable::first_order(id)
}

fn lit(pred: u32, args: &[u32]) -> Literal {
    Literal::new(so(pred), args.iter().map(|&a| fo(a)).collect())
}

/// Guard for the parameterized witness builders; the clauses grow
/// quadratically.
pub const MAX_WITNESS_ARITY: u32 = 4;
pub const MAX_WITNESS_STEPS: u32 = 10;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParamOutOfRange {
    pub name: &'static str,
    pub value: u32,
    pub min: u32,
    pub max: u32,
}

impl std::fmt::Display for ParamOutOfRange {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{} = {} out of range {}..={}", self.name, self.value, self.min, self.max)
    }
}

impl std::error::Error for ParamOutOfRange {}

fn check(name: &'static str, value: u32, min: u32, max: u32) -> Result<(), ParamOutOfRange> {
    if value < min || value > max {
        return Err(ParamOutOfRange { name, value, min, max });
    }
    Ok(())
}

/// The five-literal dyadic clause that no bounded-body dyadic fragment can
/// derive: P(A,B) :- Q(A,C),R(A,D),S(B,C),T(B,D),U(C,D).
pub fn witness_ci() -> Metarule {
    let head = lit(0, &[0, 1]);
    let body = vec![lit(1, &[0, 2]), lit(2, &[0, 3]), lit(3, &[1, 2]), lit(4, &[1, 3]), lit(5, &[2, 3])];
    Metarule::new(head, body).unwrap()
}

/// The a-ary grid clause of body size a^2 + a - 1: each of the a head
/// variables heads a row of literals over shared column variables, and each
/// column is tied together by one collector literal.
pub fn witness_ca(a: u32) -> Result<Metarule, ParamOutOfRange> {
    check("a", a, 2, MAX_WITNESS_ARITY)?;
    let a = a as usize;
    // first-order ids: 0..a are head variables; column block j (1..a) holds
    // ids a + (j-1)*(a-1) .. for its a-1 variables
    let col = |j: usize, k: usize| (a + (j - 1) * (a - 1) + k) as u32;
    let head = lit(0, &(0..a as u32).collect::<Vec<_>>());
    let mut body = Vec::new();
    let mut pred = 1u32;
    for i in 0..a as u32 {
        for j in 1..=a {
            let mut args = vec![i];
            args.extend((0..a - 1).map(|k| col(j, k)));
            body.push(lit(pred, &args));
            pred += 1;
        }
    }
    for k in 0..a - 1 {
        let args: Vec<u32> = (1..=a).map(|j| col(j, k)).collect();
        body.push(lit(pred, &args));
        pred += 1;
    }
    Metarule::new(head, body).map_err(|_| unreachable!())
}

/// Iterative expansion of the five-literal witness: at each step the two
/// literals on the first head variable are pushed one link further out
/// through fresh variables. Body size is exactly 3m + 5.
pub fn witness_cim(m: u32) -> Result<Metarule, ParamOutOfRange> {
    check("m", m, 1, MAX_WITNESS_STEPS)?;
    // start from C_I with named roles:
    //   Q(A,C), R(A,D), S(B,C), T(B,D), U(C,D)
    let (a, b, c, d) = (0u32, 1u32, 2u32, 3u32);
    let mut next_fo = 4u32;
    let mut next_so = 6u32;
    let mut body = vec![lit(3, &[b, c]), lit(4, &[b, d]), lit(5, &[c, d])];
    let (mut q_tail, mut d_tail) = (c, d);
    // current literals containing Q and R are Q(A, q_tail), R(A, d_tail)
    for _ in 0..m {
        let ck = next_fo;
        let dk = next_fo + 1;
        next_fo += 2;
        // V_k(C_k, D_k), Q_k(C_k, prev C), R_k(D_k, prev D)
        body.push(lit(next_so, &[ck, dk]));
        body.push(lit(next_so + 1, &[ck, q_tail]));
        body.push(lit(next_so + 2, &[dk, d_tail]));
        next_so += 3;
        q_tail = ck;
        d_tail = dk;
    }
    body.push(lit(1, &[a, q_tail]));
    body.push(lit(2, &[a, d_tail]));
    Metarule::new(lit(0, &[a, b]), body).map_err(|_| unreachable!())
}

/// Head-per-variable Datalog clause P(X1..Xa) :- Q1(X1),..,Qa(Xa); no clause
/// with fewer than a body literals subsumes it inside the Datalog fragment.
pub fn witness_datalog_s(a: u32) -> Result<Metarule, ParamOutOfRange> {
    check("a", a, 1, MAX_WITNESS_ARITY)?;
    let head = lit(0, &(0..a).collect::<Vec<_>>());
    let body = (0..a).map(|i| lit(1 + i, &[i])).collect();
    Metarule::new(head, body).map_err(|_| unreachable!())
}

/// Paired-literal clause of body size 2a: each head variable appears in two
/// twin literals sharing a private partner variable. Removing any literal
/// leaves a singleton variable, so no smaller singleton-free clause subsumes
/// it.
pub fn witness_singleton_s(a: u32) -> Result<Metarule, ParamOutOfRange> {
    check("a", a, 2, MAX_WITNESS_ARITY)?;
    let head = lit(0, &(0..a).collect::<Vec<_>>());
    let mut body = Vec::new();
    for i in 0..a {
        let partner = a + i;
        body.push(lit(1 + 2 * i, &[i, partner]));
        body.push(lit(2 + 2 * i, &[i, partner]));
    }
    Metarule::new(head, body).map_err(|_| unreachable!())
}

/// Number of programs expressible with n clauses given p predicate symbols
/// and k metarules with at most m body literals: (p^(m+1) * k)^n, exactly.
pub fn hypothesis_space_size(p: u64, k: u64, m: u32, n: u32) -> BigUint {
    let per_clause = BigUint::from(p).pow(m + 1) * BigUint::from(k);
    per_clause.pow(n)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::clause::parse;
    use crate::fragments::{is_connected, is_datalog, is_duplicate_free, is_singleton_free};

    #[test]
    fn ci_is_the_expected_clause() {
        let ci = witness_ci();
        assert_eq!(ci.text(), "P(A,B) :- Q(A,C),R(A,D),S(B,C),T(B,D),U(C,D).");
        assert!(is_duplicate_free(&ci));
    }

    #[test]
    fn ca_generalizes_ci() {
        assert_eq!(witness_ca(2).unwrap(), witness_ci());
        let c3 = witness_ca(3).unwrap();
        assert_eq!(c3.body_size(), 11); // a^2 + a - 1
        assert!(is_connected(&c3));
        assert!(witness_ca(1).is_err());
        assert!(witness_ca(5).is_err());
    }

    #[test]
    fn cim_body_sizes_follow_the_formula() {
        for m in 1..=4u32 {
            let w = witness_cim(m).unwrap();
            assert_eq!(w.body_size(), (3 * m + 5) as usize, "m = {m}");
            assert!(is_duplicate_free(&w));
        }
    }

    #[test]
    fn datalog_witness_shape() {
        assert_eq!(witness_datalog_s(2).unwrap(), parse("P(A,B) :- Q(A),R(B).").unwrap());
        for a in 1..=3 {
            assert!(is_datalog(&witness_datalog_s(a).unwrap()));
        }
    }

    #[test]
    fn singleton_witness_shape() {
        let w = witness_singleton_s(2).unwrap();
        assert_eq!(w, parse("P(A,B) :- Q(A,D),R(A,D),S(B,C),T(B,C).").unwrap());
        assert!(is_singleton_free(&w));
        assert_eq!(witness_singleton_s(3).unwrap().body_size(), 6);
    }

    #[test]
    fn hypothesis_space_examples() {
        assert_eq!(hypothesis_space_size(1, 1, 1, 1), BigUint::from(1u32));
        assert_eq!(hypothesis_space_size(2, 3, 2, 2), BigUint::from(576u32));
    }

    #[test]
    fn hypothesis_space_multiplicative_in_n() {
        let f = |n| hypothesis_space_size(7, 5, 3, n);
        assert_eq!(f(5), f(2) * f(3));
    }
}
