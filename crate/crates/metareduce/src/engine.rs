//! Compact clause engine shared by enumeration, closure computation and the
//! reduction drivers.
//!
//! Clauses here are always canonical: variables renamed by first appearance
//! over the lexicographically smallest body ordering. The packed form is a
//! byte string `[nlits, pred, arity, args.., pred, arity, args.., ..]` with
//! the head literal first, which doubles as the dedup key everywhere.
//!
//! Second-order (predicate) and first-order (argument) variables live in
//! separate id spaces.

use std::collections::HashMap;
use std::time::Instant;

pub(crate) const MAX_ARITY: usize = 8;

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub(crate) struct RawLit {
    pub pred: u32,
    pub arity: u8,
    pub args: [u32; MAX_ARITY],
}

impl RawLit {
    pub fn new(pred: u32, args: &[u32]) -> RawLit {
        assert!(args.len() <= MAX_ARITY, "literal arity exceeds engine limit");
        let mut a = [0u32; MAX_ARITY];
        a[..args.len()].copy_from_slice(args);
        RawLit { pred, arity: args.len() as u8, args: a }
    }

    pub fn args(&self) -> &[u32] {
        &self.args[..self.arity as usize]
    }
}

/// Canonical packed clause, head literal first.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Debug)]
pub(crate) struct Packed(pub Box<[u8]>);

impl Packed {
    pub fn nlits(&self) -> usize {
        self.0[0] as usize
    }

    pub fn body_size(&self) -> usize {
        self.nlits() - 1
    }

    pub fn lits(&self) -> Vec<RawLit> {
        let mut out = Vec::with_capacity(self.nlits());
        let mut i = 1;
        for _ in 0..self.nlits() {
            let pred = self.0[i] as u32;
            let arity = self.0[i + 1] as usize;
            let mut args = [0u32; MAX_ARITY];
            for k in 0..arity {
                args[k] = self.0[i + 2 + k] as u32;
            }
            out.push(RawLit { pred, arity: arity as u8, args });
            i += 2 + arity;
        }
        out
    }
}

fn pack(tokens: &[u32], nlits: usize) -> Packed {
    let mut bytes = Vec::with_capacity(tokens.len() + 1);
    bytes.push(nlits as u8);
    for &t in tokens {
        debug_assert!(t < 256, "canonical variable id out of packed range");
        bytes.push(t as u8);
    }
    Packed(bytes.into_boxed_slice())
}

// ---------------------------------------------------------------------------
// Canonicalization
// ---------------------------------------------------------------------------

#[derive(Default)]
struct Rename {
    so: Vec<(u32, u32)>,
    fo: Vec<(u32, u32)>,
}

impl Rename {
    fn clear(&mut self) {
        self.so.clear();
        self.fo.clear();
    }

    fn so_get(&self, old: u32) -> Option<u32> {
        self.so.iter().find(|p| p.0 == old).map(|p| p.1)
    }

    fn fo_get(&self, old: u32) -> Option<u32> {
        self.fo.iter().find(|p| p.0 == old).map(|p| p.1)
    }
}

/// Reusable scratch for canonicalization. The search explores body orderings
/// greedily on the minimal next-literal key, branching on ties, and keeps the
/// lexicographically smallest token stream.
#[derive(Default)]
pub(crate) struct Canon {
    ren: Rename,
    cur: Vec<u32>,
    best: Vec<u32>,
    have_best: bool,
}

impl Canon {
    /// Emit `lit` under the current renaming, extending it with fresh ids for
    /// unseen variables. Returns (so_added, fo_added) for backtracking.
    fn emit(&mut self, lit: &RawLit) -> (usize, usize) {
        let so_len = self.ren.so.len();
        let fo_len = self.ren.fo.len();
        let pred = match self.ren.so_get(lit.pred) {
            Some(v) => v,
            None => {
                let v = self.ren.so.len() as u32;
                self.ren.so.push((lit.pred, v));
                v
            }
        };
        self.cur.push(pred);
        self.cur.push(lit.arity as u32);
        for &a in lit.args() {
            let v = match self.ren.fo_get(a) {
                Some(v) => v,
                None => {
                    let v = self.ren.fo.len() as u32;
                    self.ren.fo.push((a, v));
                    v
                }
            };
            self.cur.push(v);
        }
        (self.ren.so.len() - so_len, self.ren.fo.len() - fo_len)
    }

    fn retract(&mut self, lit: &RawLit, added: (usize, usize)) {
        self.ren.so.truncate(self.ren.so.len() - added.0);
        self.ren.fo.truncate(self.ren.fo.len() - added.1);
        self.cur.truncate(self.cur.len() - 2 - lit.arity as usize);
    }

    /// Key of `lit` if it were emitted next: same tokens `emit` would push.
    fn key(&self, lit: &RawLit, out: &mut Vec<u32>) {
        out.clear();
        let pred = self.ren.so_get(lit.pred).unwrap_or(self.ren.so.len() as u32);
        out.push(pred);
        out.push(lit.arity as u32);
        let mut fresh: Vec<(u32, u32)> = Vec::new();
        for &a in lit.args() {
            let v = self
                .ren
                .fo_get(a)
                .or_else(|| fresh.iter().find(|p| p.0 == a).map(|p| p.1))
                .unwrap_or_else(|| {
                    let v = self.ren.fo.len() as u32 + fresh.len() as u32;
                    fresh.push((a, v));
                    v
                });
            out.push(v);
        }
    }

    fn search(&mut self, body: &[RawLit], used: &mut [bool], left: usize) {
        if left == 0 {
            if !self.have_best || self.cur < self.best {
                self.best.clear();
                self.best.extend_from_slice(&self.cur);
                self.have_best = true;
            }
            return;
        }
        // minimal key among unused literals
        let mut min_key: Vec<u32> = Vec::new();
        let mut tmp: Vec<u32> = Vec::new();
        let mut ties: Vec<usize> = Vec::new();
        for (i, lit) in body.iter().enumerate() {
            if used[i] {
                continue;
            }
            self.key(lit, &mut tmp);
            if ties.is_empty() || tmp < min_key {
                min_key.clear();
                min_key.extend_from_slice(&tmp);
                ties.clear();
                ties.push(i);
            } else if tmp == min_key {
                ties.push(i);
            }
        }
        // Ties whose unseen variables occur in no other unused literal lead to
        // identical subtrees; explore only the first such literal.
        let mut isolated_done = false;
        for &i in &ties {
            let lit = &body[i];
            let isolated = self.is_isolated(lit, body, used, i);
            if isolated {
                if isolated_done {
                    continue;
                }
                isolated_done = true;
            }
            used[i] = true;
            let added = self.emit(lit);
            self.search(body, used, left - 1);
            self.retract(lit, added);
            used[i] = false;
        }
    }

    fn is_isolated(&self, lit: &RawLit, body: &[RawLit], used: &[bool], idx: usize) -> bool {
        let pred_unseen = self.ren.so_get(lit.pred).is_none();
        for (j, other) in body.iter().enumerate() {
            if j == idx || used[j] {
                continue;
            }
            if pred_unseen && other.pred == lit.pred {
                return false;
            }
            for &a in lit.args() {
                if self.ren.fo_get(a).is_none() && other.args().contains(&a) {
                    return false;
                }
            }
        }
        true
    }

    /// Canonical token stream of the clause `head :- body`.
    pub fn tokens(&mut self, head: &RawLit, body: &[RawLit]) -> Vec<u32> {
        self.ren.clear();
        self.cur.clear();
        self.have_best = false;
        self.emit(head);
        let mut used = vec![false; body.len()];
        self.search(body, &mut used, body.len());
        std::mem::take(&mut self.best)
    }

    pub fn packed(&mut self, head: &RawLit, body: &[RawLit]) -> Packed {
        let toks = self.tokens(head, body);
        pack(&toks, 1 + body.len())
    }
}

// ---------------------------------------------------------------------------
// Resolution
// ---------------------------------------------------------------------------

struct UnionFind {
    parent: Vec<u32>,
}

impl UnionFind {
    fn new(n: usize) -> UnionFind {
        UnionFind { parent: (0..n as u32).collect() }
    }

    fn find(&mut self, mut x: u32) -> u32 {
        while self.parent[x as usize] != x {
            let gp = self.parent[self.parent[x as usize] as usize];
            self.parent[x as usize] = gp;
            x = gp;
        }
        x
    }

    fn union(&mut self, a: u32, b: u32) {
        let ra = self.find(a);
        let rb = self.find(b);
        if ra != rb {
            self.parent[ra as usize] = rb;
        }
    }
}

/// Binary resolvent of `c1` (body literal `lit_idx`) against the head of
/// `c2`, both head-first literal slices. Returns the resolvent literals
/// (head first, duplicates collapsed) or None on arity mismatch.
pub(crate) fn resolve_lits(c1: &[RawLit], lit_idx: usize, c2: &[RawLit]) -> Option<Vec<RawLit>> {
    let sel = &c1[1 + lit_idx];
    let h2 = &c2[0];
    if sel.arity != h2.arity {
        return None;
    }
    let so_off = c1.iter().map(|l| l.pred).max().unwrap_or(0) + 1;
    let fo_off = c1.iter().flat_map(|l| l.args().iter().copied()).max().map_or(0, |m| m + 1);
    let so_n = so_off + c2.iter().map(|l| l.pred).max().unwrap_or(0) + 1;
    let fo_n = fo_off + c2.iter().flat_map(|l| l.args().iter().copied()).max().map_or(0, |m| m + 1);
    let mut so = UnionFind::new(so_n as usize);
    let mut fo = UnionFind::new(fo_n as usize);
    so.union(sel.pred, h2.pred + so_off);
    for (a, b) in sel.args().iter().zip(h2.args()) {
        fo.union(*a, *b + fo_off);
    }
    let mut out: Vec<RawLit> = Vec::with_capacity(c1.len() + c2.len() - 2);
    let push = |lit: RawLit, out: &mut Vec<RawLit>| {
        if !out[1..].contains(&lit) {
            out.push(lit);
        }
    };
    // head of c1
    let mk = |lit: &RawLit, off: (u32, u32), so: &mut UnionFind, fo: &mut UnionFind| {
        let mut args = [0u32; MAX_ARITY];
        for (k, &a) in lit.args().iter().enumerate() {
            args[k] = fo.find(a + off.1);
        }
        RawLit { pred: so.find(lit.pred + off.0), arity: lit.arity, args }
    };
    out.push(mk(&c1[0], (0, 0), &mut so, &mut fo));
    for (i, lit) in c1[1..].iter().enumerate() {
        if i == lit_idx {
            continue;
        }
        push(mk(lit, (0, 0), &mut so, &mut fo), &mut out);
    }
    for lit in &c2[1..] {
        push(mk(lit, (so_off, fo_off), &mut so, &mut fo), &mut out);
    }
    Some(out)
}

/// Number of connected components among the variable-bearing literals (head
/// included), where literals are adjacent when they share a first-order
/// variable. Unification in a resolution step only ever merges variables
/// that already co-occur in the resolved literal, so this count never
/// decreases along a derivation: clauses with more components than the
/// target can be pruned from derivation searches.
pub(crate) fn component_count(lits: &[RawLit]) -> usize {
    let nvars = lits.iter().flat_map(|l| l.args().iter().copied()).max().map_or(0, |m| m as usize + 1);
    if nvars == 0 {
        return 0;
    }
    let mut uf = UnionFind::new(nvars);
    for l in lits {
        for w in l.args().windows(2) {
            uf.union(w[0], w[1]);
        }
    }
    let mut roots: Vec<u32> = lits
        .iter()
        .filter(|l| l.arity > 0)
        .map(|l| uf.find(l.args()[0]))
        .collect();
    roots.sort_unstable();
    roots.dedup();
    roots.len()
}

/// True when no literal of the clause shares its predicate variable with
/// another literal. Resolvents of such clauses never collapse, so body sizes
/// follow exact arithmetic.
pub(crate) fn distinct_preds(lits: &[RawLit]) -> bool {
    for i in 0..lits.len() {
        for j in i + 1..lits.len() {
            if lits[i].pred == lits[j].pred {
                return false;
            }
        }
    }
    true
}

// ---------------------------------------------------------------------------
// Subsumption and partial embedding
// ---------------------------------------------------------------------------

const MAP_SLOTS: usize = 64;

struct VarMap {
    map: [i16; MAP_SLOTS],
    touched: Vec<u8>,
}

impl VarMap {
    fn new() -> VarMap {
        VarMap { map: [-1; MAP_SLOTS], touched: Vec::new() }
    }

    fn get(&self, v: u32) -> Option<u32> {
        let m = self.map[v as usize];
        if m < 0 {
            None
        } else {
            Some(m as u32)
        }
    }

    fn set(&mut self, v: u32, to: u32) {
        self.map[v as usize] = to as i16;
        self.touched.push(v as u8);
    }

    fn mark(&self) -> usize {
        self.touched.len()
    }

    fn rollback(&mut self, mark: usize) {
        while self.touched.len() > mark {
            let v = self.touched.pop().unwrap();
            self.map[v as usize] = -1;
        }
    }
}

/// Try to bind literal `c` onto literal `d` extending the maps; on failure the
/// caller rolls back. `so_injective` additionally forbids two predicate
/// variables sharing a target.
fn match_lit(c: &RawLit, d: &RawLit, so: &mut VarMap, fo: &mut VarMap, so_used: &mut [bool], so_injective: bool) -> bool {
    if c.arity != d.arity {
        return false;
    }
    match so.get(c.pred) {
        Some(t) if t != d.pred => return false,
        Some(_) => {}
        None => {
            if so_injective && so_used[d.pred as usize] {
                return false;
            }
            so.set(c.pred, d.pred);
            so_used[d.pred as usize] = true;
        }
    }
    for (&a, &b) in c.args().iter().zip(d.args()) {
        match fo.get(a) {
            Some(t) if t != b => return false,
            Some(_) => {}
            None => fo.set(a, b),
        }
    }
    true
}

/// θ-subsumption on canonical literal slices: does some sort-preserving
/// substitution map `c`'s head onto `d`'s head and `c`'s body into `d`'s body?
/// Returns the witness as (so pairs, fo pairs) over the input ids.
pub(crate) fn subsumes_lits(c: &[RawLit], d: &[RawLit]) -> Option<(Vec<(u32, u32)>, Vec<(u32, u32)>)> {
    let mut so = VarMap::new();
    let mut fo = VarMap::new();
    let mut so_used = [false; MAP_SLOTS];
    if !match_lit(&c[0], &d[0], &mut so, &mut fo, &mut so_used, false) {
        return None;
    }
    let mut used_order: Vec<usize> = (1..c.len()).collect();
    // most-constrained first: literals with more already-bound variables first
    used_order.sort_by_key(|&i| std::cmp::Reverse(c[i].args().iter().filter(|a| fo.get(**a).is_some()).count()));
    if match_body(c, d, &used_order, 0, &mut so, &mut fo, &mut so_used) {
        let so_pairs = so.touched.iter().map(|&v| (v as u32, so.get(v as u32).unwrap())).collect();
        let fo_pairs = fo.touched.iter().map(|&v| (v as u32, fo.get(v as u32).unwrap())).collect();
        Some((so_pairs, fo_pairs))
    } else {
        None
    }
}

fn match_body(c: &[RawLit], d: &[RawLit], order: &[usize], at: usize, so: &mut VarMap, fo: &mut VarMap, so_used: &mut [bool]) -> bool {
    if at == order.len() {
        return true;
    }
    let lit = &c[order[at]];
    for dl in &d[1..] {
        let ms = so.mark();
        let mf = fo.mark();
        if match_lit(lit, dl, so, fo, so_used, false) && match_body(c, d, order, at + 1, so, fo, so_used) {
            return true;
        }
        for &v in &so.touched[ms..] {
            so_used[so.get(v as u32).unwrap() as usize] = false;
        }
        so.rollback(ms);
        fo.rollback(mf);
    }
    false
}

pub(crate) fn subsumes_packed(c: &Packed, d: &Packed) -> bool {
    subsumes_lits(&c.lits(), &d.lits()).is_some()
}

/// Can `c`'s head specialize onto `d`'s head? Positions holding one variable
/// in `c` must hold one variable in `d`.
pub(crate) fn head_maps(c: &RawLit, d: &RawLit) -> bool {
    if c.arity != d.arity {
        return false;
    }
    let ca = c.args();
    let da = d.args();
    for i in 0..ca.len() {
        for j in i + 1..ca.len() {
            if ca[i] == ca[j] && da[i] != da[j] {
                return false;
            }
        }
    }
    true
}

/// Partial embedding used to prune derivation search: heads must map, the
/// predicate map is injective, and at most `skips` body literals of `c` may
/// stay unmatched (each distinct matched literal claims a distinct target
/// literal).
pub(crate) fn embeds_with_skips(c: &[RawLit], target: &[RawLit], skips: usize) -> bool {
    let mut so = VarMap::new();
    let mut fo = VarMap::new();
    let mut so_used = [false; MAP_SLOTS];
    if !match_lit(&c[0], &target[0], &mut so, &mut fo, &mut so_used, true) {
        return false;
    }
    let mut dused = [false; 32];
    embed_rec(c, target, 1, skips, &mut so, &mut fo, &mut so_used, &mut dused)
}

fn embed_rec(c: &[RawLit], target: &[RawLit], at: usize, skips: usize, so: &mut VarMap, fo: &mut VarMap, so_used: &mut [bool], dused: &mut [bool]) -> bool {
    if at == c.len() {
        return true;
    }
    let lit = &c[at];
    for (j, dl) in target.iter().enumerate().skip(1) {
        if dused[j] {
            continue;
        }
        let ms = so.mark();
        let mf = fo.mark();
        if match_lit(lit, dl, so, fo, so_used, true) {
            dused[j] = true;
            if embed_rec(c, target, at + 1, skips, so, fo, so_used, dused) {
                return true;
            }
            dused[j] = false;
        }
        for &v in &so.touched[ms..] {
            so_used[so.get(v as u32).unwrap() as usize] = false;
        }
        so.rollback(ms);
        fo.rollback(mf);
    }
    if skips > 0 {
        return embed_rec(c, target, at + 1, skips - 1, so, fo, so_used, dused);
    }
    false
}

// ---------------------------------------------------------------------------
// Guards
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Guard {
    ClauseCap,
    Timeout,
}

impl std::fmt::Display for Guard {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Guard::ClauseCap => write!(f, "clause cap exceeded"),
            Guard::Timeout => write!(f, "timeout exceeded"),
        }
    }
}

impl std::error::Error for Guard {}

#[derive(Debug, Clone, Copy)]
pub struct Limits {
    pub max_clauses: usize,
    pub deadline: Option<Instant>,
}

impl Default for Limits {
    fn default() -> Limits {
        Limits { max_clauses: 20_000_000, deadline: None }
    }
}

impl Limits {
    pub(crate) fn check(&self, count: usize) -> Result<(), Guard> {
        if count > self.max_clauses {
            return Err(Guard::ClauseCap);
        }
        if let Some(d) = self.deadline {
            if Instant::now() > d {
                return Err(Guard::Timeout);
            }
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Bounded closure and derivation search
// ---------------------------------------------------------------------------

#[derive(Clone, Copy, Debug)]
pub(crate) enum Parent {
    Root,
    Step { first: u32, lit: u8, base: u32 },
}

pub(crate) struct Arena {
    pub map: HashMap<Packed, u32>,
    pub clauses: Vec<Packed>,
    pub parents: Vec<Parent>,
}

impl Arena {
    fn new() -> Arena {
        Arena { map: HashMap::new(), clauses: Vec::new(), parents: Vec::new() }
    }

    fn insert(&mut self, c: Packed, p: Parent) -> (u32, bool) {
        if let Some(&i) = self.map.get(&c) {
            return (i, false);
        }
        let i = self.clauses.len() as u32;
        self.map.insert(c.clone(), i);
        self.clauses.push(c);
        self.parents.push(p);
        (i, true)
    }
}

pub(crate) struct Search {
    pub arena: Arena,
    pub theory: Vec<Packed>,
    /// exact size arithmetic: no clause shares a predicate variable between literals
    pub exact: bool,
    max_base_body: usize,
}

impl Search {
    pub fn new(theory: Vec<Packed>) -> Search {
        let exact = theory.iter().all(|c| distinct_preds(&c.lits()));
        let max_base_body = theory.iter().map(|c| c.body_size()).max().unwrap_or(0);
        Search { arena: Arena::new(), theory, exact, max_base_body }
    }

    /// BFS of R^0..R^depth restricted to body size <= max_body. When `target`
    /// is given, search stops on finding it and prunes with Lemma 1, the
    /// component-count bound, and the partial-embedding bound. Returns the
    /// target's arena index if found.
    pub fn run(&mut self, depth: usize, max_body: usize, target: Option<&Packed>, limits: &Limits) -> Result<Option<u32>, Guard> {
        let target_lits: Option<Vec<RawLit>> = target.map(|t| t.lits());
        let target_components = target_lits.as_ref().map(|tl| component_count(tl));
        let use_embed = self.exact && target.is_some();
        for t in self.theory.clone() {
            if t.body_size() <= max_body {
                if let (Some(tc), true) = (target_components, true) {
                    if component_count(&t.lits()) > tc {
                        continue;
                    }
                }
                let (i, _) = self.arena.insert(t, Parent::Root);
                if let Some(tg) = target {
                    if self.arena.clauses[i as usize] == *tg {
                        return Ok(Some(i));
                    }
                }
            }
        }
        let debug = std::env::var("METAREDUCE_DEBUG_LEVELS").is_ok();
        let mut frontier: Vec<u32> = (0..self.arena.clauses.len() as u32).collect();
        for level in 1..=depth {
            let remaining = depth - level;
            if debug {
                eprintln!("search level {level}: arena {} frontier {}", self.arena.clauses.len(), frontier.len());
            }
            let max_growth = remaining * self.max_base_body.saturating_sub(1);
            let filter = |lits: &[RawLit]| -> bool {
                let Some(tl) = &target_lits else { return true };
                if tl.len() > lits.len() + max_growth {
                    return false;
                }
                if component_count(lits) > target_components.unwrap() {
                    return false;
                }
                if use_embed {
                    let body = lits.len() - 1;
                    let skips = remaining.min(body);
                    if body <= skips {
                        // only the head needs to map
                        return head_maps(&lits[0], &tl[0]);
                    }
                    return embeds_with_skips(lits, tl, skips);
                }
                true
            };
            let mut next: Vec<u32> = Vec::new();
            let batch = self.expand(&frontier, max_body, limits, &|_| false, &filter)?;
            for (c, p) in batch {
                let (i, new) = self.arena.insert(c, p);
                if new {
                    if let Some(tg) = target {
                        if self.arena.clauses[i as usize] == *tg {
                            return Ok(Some(i));
                        }
                    }
                    next.push(i);
                }
            }
            limits.check(self.arena.clauses.len())?;
            if next.is_empty() {
                break;
            }
            frontier = next;
        }
        Ok(None)
    }

    /// Resolvents of every frontier clause against every base clause,
    /// deterministic order. Size-fit pruning applies in the exact regime,
    /// and `filter` rejects resolvents on their raw literals before the
    /// (comparatively expensive) canonicalization. Each parallel chunk
    /// deduplicates locally (most resolvents arise from many parent pairs);
    /// clauses matching `keep_dup` bypass the local dedup so that
    /// alternative derivations of them survive.
    fn expand(
        &self,
        frontier: &[u32],
        max_body: usize,
        limits: &Limits,
        keep_dup: &(dyn Fn(&Packed) -> bool + Sync),
        filter: &(dyn Fn(&[RawLit]) -> bool + Sync),
    ) -> Result<Vec<(Packed, Parent)>, Guard> {
        use rayon::prelude::*;
        limits.check(self.arena.clauses.len())?;
        let work = |chunk: &[u32]| {
            let mut canon = Canon::default();
            let mut local: HashMap<Packed, ()> = HashMap::new();
            let mut out: Vec<(Packed, Parent)> = Vec::new();
            for &fi in chunk {
                let c1 = &self.arena.clauses[fi as usize];
                let l1 = c1.lits();
                for (bi, base) in self.theory.iter().enumerate() {
                    if self.exact && c1.body_size() + base.body_size() - 1 > max_body {
                        continue;
                    }
                    let l2 = base.lits();
                    for li in 0..c1.body_size() {
                        if l1[1 + li].arity != l2[0].arity {
                            continue;
                        }
                        if let Some(lits) = resolve_lits(&l1, li, &l2) {
                            if lits.len() - 1 > max_body || !filter(&lits) {
                                continue;
                            }
                            let p = canon.packed(&lits[0], &lits[1..]);
                            if self.arena.map.contains_key(&p) && !keep_dup(&p) {
                                continue;
                            }
                            if keep_dup(&p) {
                                out.push((p, Parent::Step { first: fi, lit: li as u8, base: bi as u32 }));
                            } else if !local.contains_key(&p) {
                                local.insert(p.clone(), ());
                                out.push((p, Parent::Step { first: fi, lit: li as u8, base: bi as u32 }));
                            }
                        }
                    }
                }
            }
            out
        };
        // fixed chunk boundaries keep the merge order independent of thread
        // scheduling
        let chunks: Vec<&[u32]> = frontier.chunks(256).collect();
        let batch: Vec<(Packed, Parent)> = if frontier.len() >= 64 {
            chunks.par_iter().map(|c| work(c)).collect::<Vec<_>>().into_iter().flatten().collect()
        } else {
            let mut v = Vec::new();
            for c in chunks {
                v.append(&mut work(c));
            }
            v
        };
        Ok(batch)
    }

    /// Chain of (first, lit, base) steps ending at entry `idx`, root first.
    pub fn chain(&self, idx: u32) -> Vec<(u32, u8, u32)> {
        let mut steps = Vec::new();
        let mut cur = idx;
        loop {
            match self.arena.parents[cur as usize] {
                Parent::Root => break,
                Parent::Step { first, lit, base } => {
                    steps.push((first, lit, base));
                    cur = first;
                }
            }
        }
        steps.reverse();
        steps
    }

    /// Root entry index of the first-parent chain of `idx`.
    pub fn chain_root(&self, idx: u32) -> u32 {
        let mut cur = idx;
        loop {
            match self.arena.parents[cur as usize] {
                Parent::Root => return cur,
                Parent::Step { first, .. } => cur = first,
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Re-derivation index for derivation reduction
// ---------------------------------------------------------------------------

/// For each theory clause, a few derivations of it from other theory clauses,
/// each recorded as the sorted set of theory indices it uses. Supports whose
/// members are all strictly smaller than the clause survive any removal scan
/// that works in descending body-size order, so they are stored with
/// priority.
pub(crate) struct RederivationIndex {
    pub supports: Vec<Vec<Vec<u32>>>,
}

const MAX_ROBUST_SUPPORTS: usize = 4;
const MAX_FRAGILE_SUPPORTS: usize = 8;

pub(crate) fn build_rederivation_index(theory: &[Packed], depth: usize, limits: &Limits) -> Result<RederivationIndex, Guard> {
    let max_body = theory.iter().map(|c| c.body_size()).max().unwrap_or(0);
    let sizes: Vec<usize> = theory.iter().map(|c| c.body_size()).collect();
    let mut search = Search::new(theory.to_vec());
    let mut robust: Vec<Vec<Vec<u32>>> = vec![Vec::new(); theory.len()];
    let mut fragile: Vec<Vec<Vec<u32>>> = vec![Vec::new(); theory.len()];

    // seed roots
    let root_of: HashMap<Packed, u32> = theory.iter().enumerate().map(|(i, c)| (c.clone(), i as u32)).collect();
    for t in theory {
        search.arena.insert(t.clone(), Parent::Root);
    }
    // per-entry support sets (theory indices used by the recorded derivation)
    let mut entry_support: Vec<Vec<u32>> = (0..search.arena.clauses.len() as u32).map(|i| vec![i]).collect();

    let debug = std::env::var("METAREDUCE_DEBUG_LEVELS").is_ok();
    let mut frontier: Vec<u32> = (0..search.arena.clauses.len() as u32).collect();
    let is_root = |p: &Packed| root_of.contains_key(p);
    // theory clauses are the only derivation targets here, so anything with
    // more components than the most-fragmented theory clause is dead weight
    let max_components = theory.iter().map(|c| component_count(&c.lits())).max().unwrap_or(0);
    let filter = |lits: &[RawLit]| component_count(lits) <= max_components;
    for level in 1..=depth {
        if debug {
            eprintln!("index level {level}: arena {} frontier {}", search.arena.clauses.len(), frontier.len());
        }
        let batch = search.expand(&frontier, max_body, limits, &is_root, &filter)?;
        let mut next: Vec<u32> = Vec::new();
        for (c, p) in batch {
            let (first, base) = match p {
                Parent::Step { first, base, .. } => (first, base),
                Parent::Root => unreachable!(),
            };
            let mut sup = entry_support[first as usize].clone();
            if !sup.contains(&base) {
                sup.push(base);
                sup.sort_unstable();
            }
            if let Some(&t_idx) = root_of.get(&c) {
                if !sup.contains(&t_idx) {
                    let target_size = sizes[t_idx as usize];
                    let is_robust = sup.iter().all(|&j| sizes[j as usize] < target_size);
                    let list = if is_robust { &mut robust[t_idx as usize] } else { &mut fragile[t_idx as usize] };
                    let cap = if is_robust { MAX_ROBUST_SUPPORTS } else { MAX_FRAGILE_SUPPORTS };
                    if list.len() < cap && !list.contains(&sup) {
                        list.push(sup.clone());
                    }
                }
            }
            let (i, new) = search.arena.insert(c, p);
            if new {
                entry_support.push(sup);
                next.push(i);
            }
        }
        limits.check(search.arena.clauses.len())?;
        if next.is_empty() {
            break;
        }
        frontier = next;
    }
    let supports = robust
        .into_iter()
        .zip(fragile)
        .map(|(mut r, f)| {
            r.extend(f);
            r
        })
        .collect();
    Ok(RederivationIndex { supports })
}

// ---------------------------------------------------------------------------
// Fragment enumeration
// ---------------------------------------------------------------------------

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub(crate) enum RawConstraint {
    None,
    Connected,
    Datalog,
    SingletonFree,
    DuplicateFree,
}

/// Every variable-bearing body literal must be chained to the head through
/// shared first-order variables; zero-arity literals are exempt and never
/// break connectivity.
pub(crate) fn connected_lits(lits: &[RawLit]) -> bool {
    let nvars = lits.iter().flat_map(|l| l.args().iter().copied()).max().map_or(0, |m| m as usize + 1);
    if nvars == 0 {
        return true;
    }
    let mut uf = UnionFind::new(nvars);
    for l in lits {
        let a = l.args();
        for w in a.windows(2) {
            uf.union(w[0], w[1]);
        }
    }
    let head = &lits[0];
    if head.arity == 0 {
        // nothing links back to a variable-free head
        return lits[1..].iter().all(|l| l.arity == 0);
    }
    let root = uf.find(head.args()[0]);
    lits[1..].iter().all(|l| l.arity == 0 || uf.find(l.args()[0]) == root)
}

pub(crate) fn datalog_lits(lits: &[RawLit]) -> bool {
    lits[0].args().iter().all(|hv| lits[1..].iter().any(|l| l.args().contains(hv)))
}

pub(crate) fn singleton_free_lits(lits: &[RawLit]) -> bool {
    let mut counts = [0u8; 64];
    for l in lits {
        for &a in l.args() {
            counts[a as usize] = counts[a as usize].saturating_add(1);
        }
    }
    lits.iter().flat_map(|l| l.args()).all(|&a| counts[a as usize] >= 2)
}

pub(crate) fn duplicate_free_lits(lits: &[RawLit]) -> bool {
    if !singleton_free_lits(lits) {
        return false;
    }
    lits.iter().all(|l| {
        let a = l.args();
        (0..a.len()).all(|i| !a[i + 1..].contains(&a[i]))
    })
}

pub(crate) fn satisfies(lits: &[RawLit], c: RawConstraint) -> bool {
    match c {
        RawConstraint::None => true,
        RawConstraint::Connected => connected_lits(lits),
        RawConstraint::Datalog => connected_lits(lits) && datalog_lits(lits),
        RawConstraint::SingletonFree => connected_lits(lits) && datalog_lits(lits) && singleton_free_lits(lits),
        RawConstraint::DuplicateFree => connected_lits(lits) && datalog_lits(lits) && duplicate_free_lits(lits),
    }
}

/// All canonical clauses of the fragment: literal arities drawn from
/// `arities`, body size 1..=max_body, one fresh predicate variable per
/// literal, deduplicated up to variable renaming.
pub(crate) fn enumerate_packed(arities: &[u8], max_body: usize, constraint: RawConstraint, limits: &Limits) -> Result<Vec<Packed>, Guard> {
    use rayon::prelude::*;
    let mut combos: Vec<(u8, Vec<u8>)> = Vec::new();
    for &h in arities {
        let mut multiset: Vec<Vec<u8>> = vec![Vec::new()];
        for len in 1..=max_body {
            let mut next: Vec<Vec<u8>> = Vec::new();
            for m in &multiset {
                if m.len() != len - 1 {
                    continue;
                }
                for &a in arities {
                    if m.last().map_or(true, |&l| a >= l) {
                        let mut v = m.clone();
                        v.push(a);
                        next.push(v);
                    }
                }
            }
            for v in &next {
                combos.push((h, v.clone()));
            }
            multiset.extend(next);
        }
    }
    let sets: Vec<Result<Vec<Packed>, Guard>> = combos
        .par_iter()
        .map(|(h, body_arities)| {
            let mut canon = Canon::default();
            let mut local: Vec<Packed> = Vec::new();
            let mut seen: HashMap<Packed, ()> = HashMap::new();
            let nslots: usize = *h as usize + body_arities.iter().map(|&a| a as usize).sum::<usize>();
            let mut labels = vec![0u32; nslots];
            let mut leaves = 0u64;
            let mut guard: Option<Guard> = None;
            rgs(&mut labels, 0, 0, &mut |lab: &[u32]| {
                leaves += 1;
                if leaves % 65_536 == 0 {
                    if let Err(g) = limits.check(local.len()) {
                        guard = Some(g);
                        return false;
                    }
                }
                let mut lits: Vec<RawLit> = Vec::with_capacity(1 + body_arities.len());
                let mut at = 0usize;
                lits.push(RawLit::new(0, &lab[at..at + *h as usize]));
                at += *h as usize;
                for (i, &a) in body_arities.iter().enumerate() {
                    lits.push(RawLit::new(1 + i as u32, &lab[at..at + a as usize]));
                    at += a as usize;
                }
                if satisfies(&lits, constraint) {
                    let p = canon.packed(&lits[0], &lits[1..]);
                    seen.entry(p.clone()).or_insert_with(|| {
                        local.push(p);
                    });
                }
                true
            });
            if let Some(g) = guard {
                return Err(g);
            }
            limits.check(local.len())?;
            Ok(local)
        })
        .collect();
    let mut all: HashMap<Packed, ()> = HashMap::new();
    let mut out: Vec<Packed> = Vec::new();
    for set in sets {
        for p in set? {
            all.entry(p.clone()).or_insert_with(|| out.push(p));
        }
        limits.check(out.len())?;
    }
    out.sort_by(|a, b| a.body_size().cmp(&b.body_size()).then_with(|| a.cmp(b)));
    Ok(out)
}

/// Restricted growth strings: enumerate all set partitions of `labels.len()`
/// slots; calls `f` at each leaf, stop if it returns false.
fn rgs(labels: &mut [u32], at: usize, max_used: u32, f: &mut impl FnMut(&[u32]) -> bool) -> bool {
    if at == labels.len() {
        return f(labels);
    }
    for v in 0..=max_used {
        labels[at] = v;
        let nm = if v == max_used { max_used + 1 } else { max_used };
        if !rgs(labels, at + 1, nm, f) {
            return false;
        }
    }
    true
}
