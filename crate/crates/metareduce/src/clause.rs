//! Metarule representation: second-order Horn clauses whose predicate
//! positions hold second-order variables and whose arguments are first-order
//! variables. Values are canonical on construction, so structural equality is
//! equality up to variable renaming and body order.

use crate::engine::{self, Canon, RawLit};
use std::collections::BTreeMap;
use std::fmt;

#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub enum Sort {
    /// occurs only in predicate position
    SecondOrder,
    /// occurs only in argument position
    FirstOrder,
}

#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub struct Variable {
    pub sort: Sort,
    pub id: u32,
}

impl Variable {
    pub fn second_order(id: u32) -> Variable {
        Variable { sort: Sort::SecondOrder, id }
    }

    pub fn first_order(id: u32) -> Variable {
        Variable { sort: Sort::FirstOrder, id }
    }

    /// Canonical display name. Predicate variables draw from P..W then P1..,
    /// argument variables from A..O then A1...
    pub fn name(&self) -> String {
        const SO: [char; 8] = ['P', 'Q', 'R', 'S', 'T', 'U', 'V', 'W'];
        const FO: [char; 15] = ['A', 'B', 'C', 'D', 'E', 'F', 'G', 'H', 'I', 'J', 'K', 'L', 'M', 'N', 'O'];
        let (pool, id): (&[char], u32) = match self.sort {
            Sort::SecondOrder => (&SO, self.id),
            Sort::FirstOrder => (&FO, self.id),
        };
        let letter = pool[(id as usize) % pool.len()];
        let round = id as usize / pool.len();
        if round == 0 {
            letter.to_string()
        } else {
            format!("{letter}{round}")
        }
    }
}

#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub struct Literal {
    pub pred: Variable,
    pub args: Vec<Variable>,
}

impl Literal {
    pub fn new(pred: Variable, args: Vec<Variable>) -> Literal {
        assert_eq!(pred.sort, Sort::SecondOrder, "predicate position takes a second-order variable");
        assert!(args.iter().all(|a| a.sort == Sort::FirstOrder), "argument positions take first-order variables");
        Literal { pred, args }
    }

    pub fn arity(&self) -> usize {
        self.args.len()
    }

    fn raw(&self) -> RawLit {
        let args: Vec<u32> = self.args.iter().map(|a| a.id).collect();
        RawLit::new(self.pred.id, &args)
    }

    fn write(&self, out: &mut String) {
        out.push_str(&self.pred.name());
        if !self.args.is_empty() {
            out.push('(');
            for (i, a) in self.args.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                out.push_str(&a.name());
            }
            out.push(')');
        }
    }
}

/// A second-order definite clause with a nonempty, duplicate-free body.
/// Always stored canonically: variables are renamed by first appearance
/// (head first) over the smallest body ordering.
#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub struct Metarule {
    head: Literal,
    body: Vec<Literal>,
    text: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ClauseError {
    EmptyBody,
    Syntax { pos: usize, msg: String },
}

impl fmt::Display for ClauseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ClauseError::EmptyBody => write!(f, "facts are disallowed: a metarule needs at least one body literal"),
            ClauseError::Syntax { pos, msg } => write!(f, "syntax error at byte {pos}: {msg}"),
        }
    }
}

impl std::error::Error for ClauseError {}

impl Metarule {
    pub fn new(head: Literal, body: Vec<Literal>) -> Result<Metarule, ClauseError> {
        if body.is_empty() {
            return Err(ClauseError::EmptyBody);
        }
        Ok(Self::canonical_from_raw(&head.raw(), &body.iter().map(|l| l.raw()).collect::<Vec<_>>()))
    }

    pub(crate) fn canonical_from_raw(head: &RawLit, body: &[RawLit]) -> Metarule {
        // collapse duplicate body literals (clause-as-set semantics)
        let mut set: Vec<RawLit> = Vec::with_capacity(body.len());
        for l in body {
            if !set.contains(l) {
                set.push(*l);
            }
        }
        let toks = Canon::default().tokens(head, &set);
        let mut lits: Vec<Literal> = Vec::with_capacity(1 + set.len());
        let mut i = 0;
        while i < toks.len() {
            let pred = toks[i];
            let arity = toks[i + 1] as usize;
            let args = toks[i + 2..i + 2 + arity].iter().map(|&a| Variable::first_order(a)).collect();
            lits.push(Literal { pred: Variable::second_order(pred), args });
            i += 2 + arity;
        }
        let head = lits.remove(0);
        let mut text = String::new();
        head.write(&mut text);
        text.push_str(" :- ");
        for (i, l) in lits.iter().enumerate() {
            if i > 0 {
                text.push(',');
            }
            l.write(&mut text);
        }
        text.push('.');
        Metarule { head, body: lits, text }
    }

    pub fn head(&self) -> &Literal {
        &self.head
    }

    pub fn body(&self) -> &[Literal] {
        &self.body
    }

    pub fn body_size(&self) -> usize {
        self.body.len()
    }

    /// Canonical text form, e.g. `P(A,B) :- Q(A,C),R(C,B).`
    pub fn text(&self) -> &str {
        &self.text
    }

    /// Sort key used for all persisted clause lists.
    pub fn sort_key(&self) -> (usize, &str) {
        (self.body.len(), self.text())
    }

    /// First-order rendering for external logic-programming tools:
    /// `enc(P,A,B) :- enc(Q,A,C),enc(R,C,B).`
    pub fn encapsulate(&self) -> String {
        let enc = |l: &Literal| {
            let mut s = String::from("enc(");
            s.push_str(&l.pred.name());
            for a in &l.args {
                s.push(',');
                s.push_str(&a.name());
            }
            s.push(')');
            s
        };
        let mut out = enc(&self.head);
        out.push_str(" :- ");
        for (i, l) in self.body.iter().enumerate() {
            if i > 0 {
                out.push(',');
            }
            out.push_str(&enc(l));
        }
        out.push('.');
        out
    }

    pub(crate) fn raw_lits(&self) -> Vec<RawLit> {
        let mut v = Vec::with_capacity(1 + self.body.len());
        v.push(self.head.raw());
        v.extend(self.body.iter().map(|l| l.raw()));
        v
    }

    pub(crate) fn to_packed(&self) -> engine::Packed {
        let lits = self.raw_lits();
        Canon::default().packed(&lits[0], &lits[1..])
    }

    pub(crate) fn from_packed(p: &engine::Packed) -> Metarule {
        let lits = p.lits();
        Self::canonical_from_raw(&lits[0], &lits[1..])
    }

    /// All variables of the clause, head first, in order of appearance.
    pub fn variables(&self) -> Vec<Variable> {
        let mut out = Vec::new();
        let push = |v: Variable, out: &mut Vec<Variable>| {
            if !out.contains(&v) {
                out.push(v);
            }
        };
        push(self.head.pred, &mut out);
        for a in &self.head.args {
            push(*a, &mut out);
        }
        for l in &self.body {
            push(l.pred, &mut out);
            for a in &l.args {
                push(*a, &mut out);
            }
        }
        out
    }
}

impl PartialOrd for Metarule {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Metarule {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.sort_key().cmp(&other.sort_key())
    }
}

impl fmt::Display for Metarule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.text)
    }
}

/// Re-canonicalize. Construction already canonicalizes, so this is the
/// identity on any `Metarule` value; it realizes equality up to renaming.
pub fn canonicalize(m: &Metarule) -> Metarule {
    let lits = m.raw_lits();
    Metarule::canonical_from_raw(&lits[0], &lits[1..])
}

pub fn alpha_equal(a: &Metarule, b: &Metarule) -> bool {
    a == b
}

// ---------------------------------------------------------------------------
// Substitution
// ---------------------------------------------------------------------------

/// Sort-preserving variable-to-variable mapping; identity off its domain.
/// Distinct variables may share a target.
#[derive(Clone, Default, PartialEq, Eq, Debug)]
pub struct Substitution {
    map: BTreeMap<Variable, Variable>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SortViolation {
    pub from: Variable,
    pub to: Variable,
}

impl fmt::Display for SortViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "substitution must preserve sorts: {:?} -> {:?}", self.from, self.to)
    }
}

impl std::error::Error for SortViolation {}

impl Substitution {
    pub fn new() -> Substitution {
        Substitution::default()
    }

    pub fn bind(&mut self, from: Variable, to: Variable) -> Result<(), SortViolation> {
        if from.sort != to.sort {
            return Err(SortViolation { from, to });
        }
        self.map.insert(from, to);
        Ok(())
    }

    pub fn get(&self, v: Variable) -> Variable {
        *self.map.get(&v).unwrap_or(&v)
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Variable, &Variable)> {
        self.map.iter()
    }

    /// Rendered pairs like ("P","Q"), first-order and second-order mixed,
    /// in deterministic order.
    pub fn name_pairs(&self) -> Vec<(String, String)> {
        self.map.iter().map(|(k, v)| (k.name(), v.name())).collect()
    }
}

/// Apply `s` to every variable of `m`; body literals that become identical
/// collapse to one. The substitution type is sort-preserving by construction.
pub fn apply_substitution(m: &Metarule, s: &Substitution) -> Metarule {
    let map_lit = |l: &Literal| Literal {
        pred: s.get(l.pred),
        args: l.args.iter().map(|&a| s.get(a)).collect(),
    };
    let head = map_lit(&m.head);
    let body: Vec<Literal> = m.body.iter().map(map_lit).collect();
    let raw_body: Vec<RawLit> = body.iter().map(|l| l.raw()).collect();
    Metarule::canonical_from_raw(&head.raw(), &raw_body)
}

// ---------------------------------------------------------------------------
// Parsing
// ---------------------------------------------------------------------------

/// Parse the metarule grammar. Output form is `head " :- " body "."` with
/// body literals joined by commas; the parser tolerates arbitrary whitespace
/// and accepts `<-` as a synonym for `:-`.
pub fn parse(text: &str) -> Result<Metarule, ClauseError> {
    let mut p = Parser { bytes: text.as_bytes(), pos: 0 };
    p.skip_ws();
    let head = p.literal()?;
    p.skip_ws();
    if !(p.eat(b":-") || p.eat(b"<-")) {
        if p.peek() == Some(b'.') {
            return Err(ClauseError::EmptyBody);
        }
        return Err(p.err("expected ':-' or '<-' after the head literal"));
    }
    let mut body = Vec::new();
    loop {
        p.skip_ws();
        body.push(p.literal()?);
        p.skip_ws();
        match p.peek() {
            Some(b',') => {
                p.pos += 1;
            }
            Some(b'.') => {
                p.pos += 1;
                break;
            }
            _ => return Err(p.err("expected ',' or '.' after a body literal")),
        }
    }
    p.skip_ws();
    if p.pos != p.bytes.len() {
        return Err(p.err("trailing input after final '.'"));
    }
    build_parsed(head, body)
}

struct ParsedLit {
    pred: String,
    args: Vec<String>,
}

fn build_parsed(head: ParsedLit, body: Vec<ParsedLit>) -> Result<Metarule, ClauseError> {
    let mut so: Vec<String> = Vec::new();
    let mut fo: Vec<String> = Vec::new();
    let intern = |pool: &mut Vec<String>, name: &str| -> u32 {
        match pool.iter().position(|n| n == name) {
            Some(i) => i as u32,
            None => {
                pool.push(name.to_string());
                (pool.len() - 1) as u32
            }
        }
    };
    let conv = |l: &ParsedLit, so: &mut Vec<String>, fo: &mut Vec<String>| -> Literal {
        Literal {
            pred: Variable::second_order(intern(so, &l.pred)),
            args: l.args.iter().map(|a| Variable::first_order(intern(fo, a))).collect(),
        }
    };
    let h = conv(&head, &mut so, &mut fo);
    let b: Vec<Literal> = body.iter().map(|l| conv(l, &mut so, &mut fo)).collect();
    Metarule::new(h, b)
}

struct Parser<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Parser<'a> {
    fn err(&self, msg: &str) -> ClauseError {
        ClauseError::Syntax { pos: self.pos, msg: msg.to_string() }
    }

    fn peek(&self) -> Option<u8> {
        self.bytes.get(self.pos).copied()
    }

    fn eat(&mut self, s: &[u8]) -> bool {
        if self.bytes[self.pos..].starts_with(s) {
            self.pos += s.len();
            true
        } else {
            false
        }
    }

    fn skip_ws(&mut self) {
        while matches!(self.peek(), Some(b' ') | Some(b'\t') | Some(b'\r') | Some(b'\n')) {
            self.pos += 1;
        }
    }

    fn name(&mut self) -> Result<String, ClauseError> {
        let start = self.pos;
        while matches!(self.peek(), Some(c) if c.is_ascii_alphanumeric() || c == b'_') {
            self.pos += 1;
        }
        if self.pos == start {
            return Err(self.err("expected a variable name"));
        }
        Ok(std::str::from_utf8(&self.bytes[start..self.pos]).unwrap().to_string())
    }

    fn literal(&mut self) -> Result<ParsedLit, ClauseError> {
        let pred = self.name()?;
        self.skip_ws();
        let mut args = Vec::new();
        if self.peek() == Some(b'(') {
            self.pos += 1;
            loop {
                self.skip_ws();
                args.push(self.name()?);
                self.skip_ws();
                match self.peek() {
                    Some(b',') => {
                        self.pos += 1;
                    }
                    Some(b')') => {
                        self.pos += 1;
                        break;
                    }
                    _ => return Err(self.err("expected ',' or ')' in an argument list")),
                }
            }
        }
        Ok(ParsedLit { pred, args })
    }
}

/// Render the canonical text; inverse of `parse` on canonical output.
pub fn render(m: &Metarule) -> String {
    m.text().to_string()
}
