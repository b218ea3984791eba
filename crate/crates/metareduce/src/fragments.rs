//! Fragment membership predicates and exhaustive enumeration of metarule
//! fragments: literal arities drawn from a fixed set, bounded body size, and
//! one of four syntactic constraints (connected / datalog / singleton-free /
//! duplicate-free). The constraints nest: every duplicate-free clause is
//! singleton-free, every singleton-free clause is a connected Datalog clause.

use crate::clause::Metarule;
use crate::engine::{self, Guard, Limits, RawConstraint};
use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub enum Constraint {
    None,
    Connected,
    Datalog,
    SingletonFree,
    DuplicateFree,
}

impl Constraint {
    fn raw(self) -> RawConstraint {
        match self {
            Constraint::None => RawConstraint::None,
            Constraint::Connected => RawConstraint::Connected,
            Constraint::Datalog => RawConstraint::Datalog,
            Constraint::SingletonFree => RawConstraint::SingletonFree,
            Constraint::DuplicateFree => RawConstraint::DuplicateFree,
        }
    }

    /// Single-letter fragment label: M (unconstrained), C, D, K, U.
    pub fn letter(self) -> char {
        match self {
            Constraint::None => 'M',
            Constraint::Connected => 'C',
            Constraint::Datalog => 'D',
            Constraint::SingletonFree => 'K',
            Constraint::DuplicateFree => 'U',
        }
    }
}

impl FromStr for Constraint {
    type Err = String;

    fn from_str(s: &str) -> Result<Constraint, String> {
        match s {
            "none" => Ok(Constraint::None),
            "connected" => Ok(Constraint::Connected),
            "datalog" => Ok(Constraint::Datalog),
            "singleton-free" => Ok(Constraint::SingletonFree),
            "duplicate-free" => Ok(Constraint::DuplicateFree),
            other => Err(format!("unknown constraint '{other}' (expected none|connected|datalog|singleton-free|duplicate-free)")),
        }
    }
}

impl fmt::Display for Constraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Constraint::None => "none",
            Constraint::Connected => "connected",
            Constraint::Datalog => "datalog",
            Constraint::SingletonFree => "singleton-free",
            Constraint::DuplicateFree => "duplicate-free",
        };
        f.write_str(s)
    }
}

/// An arity set, a body-size bound and a syntactic constraint.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct FragmentSpec {
    pub arities: BTreeSet<u8>,
    pub max_body: usize,
    pub constraint: Constraint,
}

impl FragmentSpec {
    pub fn new(constraint: Constraint, arities: impl IntoIterator<Item = u8>, max_body: usize) -> FragmentSpec {
        let arities: BTreeSet<u8> = arities.into_iter().collect();
        assert!(!arities.is_empty(), "a fragment needs at least one arity");
        assert!(max_body >= 1, "a fragment needs at least one body literal");
        FragmentSpec { arities, max_body, constraint }
    }

    /// Compact label like `C{1,2}5`.
    pub fn label(&self) -> String {
        let arities: Vec<String> = self.arities.iter().map(|a| a.to_string()).collect();
        format!("{}{{{}}}{}", self.constraint.letter(), arities.join(","), self.max_body)
    }
}

impl fmt::Display for FragmentSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

/// Every variable-bearing body literal can be chained back to the head
/// through shared first-order variables. Zero-arity literals never break
/// connectivity; a variable-free head admits only variable-free bodies.
pub fn is_connected(m: &Metarule) -> bool {
    engine::connected_lits(&m.raw_lits())
}

/// Every first-order variable of the head occurs in some body literal.
pub fn is_datalog(m: &Metarule) -> bool {
    engine::datalog_lits(&m.raw_lits())
}

/// Every first-order variable occurs at least twice across the whole clause,
/// head included, counting each literal-position occurrence.
pub fn is_singleton_free(m: &Metarule) -> bool {
    engine::singleton_free_lits(&m.raw_lits())
}

/// Singleton-free and no literal carries a repeated first-order variable.
pub fn is_duplicate_free(m: &Metarule) -> bool {
    engine::duplicate_free_lits(&m.raw_lits())
}

/// Arity set, body-size bound and the spec's constraint all hold. The
/// constraints nest: datalog implies connected, singleton-free implies
/// datalog, duplicate-free implies singleton-free.
pub fn in_fragment(spec: &FragmentSpec, m: &Metarule) -> bool {
    let lits = m.raw_lits();
    if m.body_size() > spec.max_body {
        return false;
    }
    if !lits.iter().all(|l| spec.arities.contains(&l.arity)) {
        return false;
    }
    engine::satisfies(&lits, spec.constraint.raw())
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum EnumerateError {
    UnsupportedSpec(String),
    Guard(Guard),
}

impl fmt::Display for EnumerateError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EnumerateError::UnsupportedSpec(s) => write!(f, "unsupported fragment: {s}"),
            EnumerateError::Guard(g) => write!(f, "resource guard: {g}"),
        }
    }
}

impl std::error::Error for EnumerateError {}

pub const MAX_ENUM_BODY: usize = 6;
pub const MAX_ENUM_ARITY: u8 = 3;

/// The set of all canonical metarules of the fragment, up to variable
/// renaming, with one fresh second-order variable per literal; sorted by
/// (body size, canonical text). Head arity ranges over the arity set.
pub fn enumerate(spec: &FragmentSpec, limits: &Limits) -> Result<Vec<Metarule>, EnumerateError> {
    crate::init_threads();
    if spec.max_body > MAX_ENUM_BODY {
        return Err(EnumerateError::UnsupportedSpec(format!(
            "max body size {} exceeds the enumeration guard ({MAX_ENUM_BODY})",
            spec.max_body
        )));
    }
    if let Some(&a) = spec.arities.iter().find(|&&a| a > MAX_ENUM_ARITY) {
        return Err(EnumerateError::UnsupportedSpec(format!(
            "arity {a} exceeds the enumeration guard ({MAX_ENUM_ARITY})"
        )));
    }
    let arities: Vec<u8> = spec.arities.iter().copied().collect();
    let packed = engine::enumerate_packed(&arities, spec.max_body, spec.constraint.raw(), limits).map_err(EnumerateError::Guard)?;
    let mut out: Vec<Metarule> = packed.iter().map(Metarule::from_packed).collect();
    out.sort();
    Ok(out)
}
