//! Renaming-invariant views of states, answers and rules, and the
//! backtracking isomorphism search behind every "equal up to renaming"
//! comparison in the crate.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::Serialize;

use crate::builtins::{Builtin, BuiltinStore, Projection};
use crate::syntax::{AnnotatedRule, Atom, Token, TokenStore};
use crate::terms::{Term, Var};

/// Built-ins are grouped so that, say, a guard equation never pairs with a
/// body equation.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum EqGroup {
    Pending,
    Guard,
    Body,
}

/// A state, answer or rule with the built-in store folded in: atoms are
/// normalized through the solved form, and only the bindings of rigid
/// variables remain as explicit equations.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Shape {
    pub failed: bool,
    pub atoms: Vec<(Atom, Option<u64>)>,
    pub eqs: Vec<(EqGroup, Builtin)>,
    pub bindings: Vec<(Var, Term)>,
    pub tokens: Vec<Token>,
}

impl Shape {
    pub fn failed() -> Shape {
        Shape { failed: true, atoms: Vec::new(), eqs: Vec::new(), bindings: Vec::new(), tokens: Vec::new() }
    }

    /// Shape of a configuration. Pending built-ins are normalized through
    /// the store and compared as a set: a conjunction is idempotent.
    pub fn of_state<'a>(
        builtin: &BuiltinStore,
        atoms: impl IntoIterator<Item = (&'a Atom, Option<u64>)>,
        pending: impl IntoIterator<Item = &'a Builtin>,
        tokens: &TokenStore,
        rigid: &BTreeSet<Var>,
        clean: bool,
    ) -> Shape {
        let Some(sigma) = builtin.solved() else {
            return Shape::failed();
        };
        let proj = Projection::new(sigma, rigid);
        let atoms: Vec<(Atom, Option<u64>)> =
            atoms.into_iter().map(|(a, id)| (a.map_terms(&mut |t| proj.term(t)), id)).collect();
        let mut eqs: Vec<(EqGroup, Builtin)> = Vec::new();
        for b in pending {
            let n = proj.builtin(b);
            let keep = match &n {
                Builtin::True => false,
                Builtin::Eq(l, r) => {
                    l != r && !eqs.iter().any(|(_, e)| *e == n || *e == Builtin::Eq(r.clone(), l.clone()))
                }
                Builtin::False => !eqs.iter().any(|(_, e)| *e == Builtin::False),
            };
            if keep {
                eqs.push((EqGroup::Pending, n));
            }
        }
        let ids: BTreeSet<u64> = atoms.iter().filter_map(|(_, id)| *id).collect();
        let tokens = tokens.iter().filter(|t| !clean || t.ids.iter().all(|i| ids.contains(i))).cloned().collect();
        Shape { failed: false, atoms, eqs, bindings: proj.bindings(), tokens }
    }

    /// Shape of a rule: head positions are significant, every variable is
    /// renameable.
    pub fn of_rule(rule: &AnnotatedRule) -> Shape {
        let mut atoms = Vec::new();
        for (k, h) in rule.kept.iter().enumerate() {
            atoms.push((Atom { pred: format!("^k{k}:{}", h.pred).into(), args: h.args.clone() }, None));
        }
        for (k, h) in rule.removed.iter().enumerate() {
            atoms.push((Atom { pred: format!("^r{k}:{}", h.pred).into(), args: h.args.clone() }, None));
        }
        atoms.extend(rule.body_atoms().map(|a| (a.atom.clone(), Some(a.id))));
        let mut eqs: Vec<(EqGroup, Builtin)> = rule.guard.iter().map(|b| (EqGroup::Guard, b.clone())).collect();
        eqs.extend(rule.body_builtins().map(|b| (EqGroup::Body, b.clone())));
        Shape { failed: false, atoms, eqs, bindings: Vec::new(), tokens: rule.tokens.iter().cloned().collect() }
    }

    /// Renaming-invariant hash key: variables outside `rigid` and all
    /// identifiers are blanked.
    pub fn fingerprint(&self, rigid: &BTreeSet<Var>) -> String {
        if self.failed {
            return "FAILED".into();
        }
        let anon = |t: &Term| anonymize(t, rigid);
        let mut atoms: Vec<String> = self
            .atoms
            .iter()
            .map(|(a, id)| format!("{}({}){}", a.pred, a.args.iter().map(anon).collect::<Vec<_>>().join(","), if id.is_some() { "#" } else { "" }))
            .collect();
        atoms.sort();
        let mut eqs: Vec<String> = self
            .eqs
            .iter()
            .map(|(g, b)| match b {
                Builtin::Eq(l, r) => {
                    let (mut x, mut y) = (anon(l), anon(r));
                    if x > y {
                        std::mem::swap(&mut x, &mut y);
                    }
                    format!("{g:?}:{x}={y}")
                }
                other => format!("{g:?}:{other}"),
            })
            .collect();
        eqs.sort();
        let bindings: Vec<String> = self.bindings.iter().map(|(x, t)| format!("{x}={}", anon(t))).collect();
        let mut tokens: Vec<String> = self.tokens.iter().map(|t| format!("{}/{}", t.rule, t.ids.len())).collect();
        tokens.sort();
        format!("{}|{}|{}|{}", atoms.join(";"), eqs.join(";"), bindings.join(";"), tokens.join(";"))
    }
}

pub(crate) fn anonymize(t: &Term, rigid: &BTreeSet<Var>) -> String {
    match t {
        Term::Var(v) if rigid.contains(v) => v.to_string(),
        Term::Var(_) => "_".into(),
        Term::App(f, args) if args.is_empty() => f.to_string(),
        Term::App(f, args) => format!("{f}({})", args.iter().map(|a| anonymize(a, rigid)).collect::<Vec<_>>().join(",")),
    }
}

/// How atoms without identifiers may be paired.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum IdMode {
    /// Identified atoms pair with identified atoms through a bijection on
    /// identifiers; unidentified atoms pair with unidentified ones.
    Plain,
    /// Left is a reference-semantics configuration, right an annotated one:
    /// a pending goal atom on the left pairs with a right atom whose
    /// identifier does not occur in the right token store.
    Inter,
}

/// Variable renaming, identifier renaming and token alignment mapping one
/// side onto the other.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct EquivalenceWitness {
    pub vars: BTreeMap<String, String>,
    pub ids: BTreeMap<u64, u64>,
    pub tokens: Vec<(String, String)>,
}

#[derive(Clone, Default)]
struct Maps {
    vf: BTreeMap<Var, Var>,
    vb: BTreeMap<Var, Var>,
    idf: BTreeMap<u64, u64>,
    idb: BTreeMap<u64, u64>,
    tokens: Vec<(Token, Token)>,
}

impl Maps {
    fn witness(self) -> EquivalenceWitness {
        EquivalenceWitness {
            vars: self.vf.into_iter().map(|(a, b)| (a.to_string(), b.to_string())).collect(),
            ids: self.idf,
            tokens: self.tokens.into_iter().map(|(a, b)| (a.to_string(), b.to_string())).collect(),
        }
    }
}

struct Search<'a> {
    a: &'a Shape,
    b: &'a Shape,
    rigid: &'a BTreeSet<Var>,
    mode: IdMode,
    b_token_ids: BTreeSet<u64>,
    order: Vec<usize>,
    cands: Vec<Vec<usize>>,
}

impl Search<'_> {
    fn var(&self, x: &Var, y: &Var, m: &mut Maps) -> bool {
        if self.rigid.contains(x) || self.rigid.contains(y) {
            return x == y;
        }
        match (m.vf.get(x), m.vb.get(y)) {
            (Some(y2), _) if y2 != y => false,
            (_, Some(x2)) if x2 != x => false,
            (Some(_), Some(_)) => true,
            _ => {
                m.vf.insert(x.clone(), y.clone());
                m.vb.insert(y.clone(), x.clone());
                true
            }
        }
    }

    fn term(&self, s: &Term, t: &Term, m: &mut Maps) -> bool {
        match (s, t) {
            (Term::Var(x), Term::Var(y)) => self.var(x, y, m),
            (Term::App(f, xs), Term::App(g, ys)) => {
                f == g && xs.len() == ys.len() && xs.iter().zip(ys).all(|(x, y)| self.term(x, y, m))
            }
            _ => false,
        }
    }

    fn id(&self, i: u64, j: u64, m: &mut Maps) -> bool {
        match (m.idf.get(&i), m.idb.get(&j)) {
            (Some(j2), _) if *j2 != j => false,
            (_, Some(i2)) if *i2 != i => false,
            (Some(_), Some(_)) => true,
            _ => {
                m.idf.insert(i, j);
                m.idb.insert(j, i);
                true
            }
        }
    }

    fn ids_compatible(&self, i: Option<u64>, j: Option<u64>) -> bool {
        match (self.mode, i, j) {
            (_, Some(_), Some(_)) => true,
            (IdMode::Plain, None, None) => true,
            (IdMode::Inter, None, Some(j)) => !self.b_token_ids.contains(&j),
            _ => false,
        }
    }

    fn atoms(&self, k: usize, used: &mut Vec<bool>, m: &Maps) -> Option<Maps> {
        if k == self.order.len() {
            return self.eqs(0, &mut vec![false; self.b.eqs.len()], m);
        }
        let i = self.order[k];
        let (atom, id) = &self.a.atoms[i];
        for &j in &self.cands[i] {
            if used[j] {
                continue;
            }
            let (other, oid) = &self.b.atoms[j];
            let mut m2 = m.clone();
            if let (Some(x), Some(y)) = (id, oid) {
                if !self.id(*x, *y, &mut m2) {
                    continue;
                }
            }
            if !atom.args.iter().zip(&other.args).all(|(s, t)| self.term(s, t, &mut m2)) {
                continue;
            }
            used[j] = true;
            if let Some(done) = self.atoms(k + 1, used, &m2) {
                return Some(done);
            }
            used[j] = false;
        }
        None
    }

    fn eqs(&self, i: usize, used: &mut Vec<bool>, m: &Maps) -> Option<Maps> {
        if i == self.a.eqs.len() {
            return self.tokens(0, &mut vec![false; self.b.tokens.len()], m);
        }
        let (group, eq) = &self.a.eqs[i];
        for (j, (g2, other)) in self.b.eqs.iter().enumerate() {
            if used[j] || g2 != group {
                continue;
            }
            let attempts: Vec<Maps> = match (eq, other) {
                (Builtin::Eq(l, r), Builtin::Eq(l2, r2)) => {
                    let mut out = Vec::new();
                    let mut m2 = m.clone();
                    if self.term(l, l2, &mut m2) && self.term(r, r2, &mut m2) {
                        out.push(m2);
                    }
                    let mut m3 = m.clone();
                    if self.term(l, r2, &mut m3) && self.term(r, l2, &mut m3) {
                        out.push(m3);
                    }
                    out
                }
                (x, y) if x == y => vec![m.clone()],
                _ => Vec::new(),
            };
            for m2 in attempts {
                used[j] = true;
                if let Some(done) = self.eqs(i + 1, used, &m2) {
                    return Some(done);
                }
                used[j] = false;
            }
        }
        None
    }

    fn tokens(&self, i: usize, used: &mut Vec<bool>, m: &Maps) -> Option<Maps> {
        if i == self.a.tokens.len() {
            return Some(m.clone());
        }
        let t = &self.a.tokens[i];
        for (j, u) in self.b.tokens.iter().enumerate() {
            if used[j] || t.rule != u.rule || t.ids.len() != u.ids.len() {
                continue;
            }
            let mut m2 = m.clone();
            if !t.ids.iter().zip(&u.ids).all(|(x, y)| self.id(*x, *y, &mut m2)) {
                continue;
            }
            m2.tokens.push((t.clone(), u.clone()));
            used[j] = true;
            if let Some(done) = self.tokens(i + 1, used, &m2) {
                return Some(done);
            }
            used[j] = false;
        }
        None
    }
}

/// Searches for a witness mapping `a` onto `b` that fixes `rigid`.
pub fn isomorphism(a: &Shape, b: &Shape, rigid: &BTreeSet<Var>, mode: IdMode) -> Option<EquivalenceWitness> {
    if a.failed || b.failed {
        return (a.failed && b.failed).then(EquivalenceWitness::default);
    }
    if a.atoms.len() != b.atoms.len()
        || a.eqs.len() != b.eqs.len()
        || a.bindings.len() != b.bindings.len()
        || a.tokens.len() != b.tokens.len()
    {
        return None;
    }
    let mut search = Search {
        a,
        b,
        rigid,
        mode,
        b_token_ids: b.tokens.iter().flat_map(|t| t.ids.iter().copied()).collect(),
        order: Vec::new(),
        cands: Vec::new(),
    };
    let mut m = Maps::default();
    let theirs: BTreeMap<&Var, &Term> = b.bindings.iter().map(|(x, t)| (x, t)).collect();
    for (x, t) in &a.bindings {
        match theirs.get(x) {
            Some(u) if search.term(t, u, &mut m) => {}
            _ => return None,
        }
    }
    search.cands = a
        .atoms
        .iter()
        .map(|(atom, id)| {
            b.atoms
                .iter()
                .enumerate()
                .filter(|(_, (o, oid))| o.same_signature(atom) && search.ids_compatible(*id, *oid))
                .map(|(j, _)| j)
                .collect()
        })
        .collect();
    let mut order: Vec<usize> = (0..a.atoms.len()).collect();
    order.sort_by_key(|&i| search.cands[i].len());
    search.order = order;
    search.atoms(0, &mut vec![false; b.atoms.len()], &m).map(Maps::witness)
}

/// Set of shapes modulo isomorphism, bucketed by fingerprint.
#[derive(Default)]
pub struct ShapeSet {
    rigid: BTreeSet<Var>,
    buckets: HashMap<String, Vec<(Shape, usize)>>,
    len: usize,
}

impl ShapeSet {
    pub fn new(rigid: BTreeSet<Var>) -> ShapeSet {
        ShapeSet { rigid, buckets: HashMap::new(), len: 0 }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Index of an equivalent member, if any.
    pub fn find(&self, s: &Shape) -> Option<usize> {
        let bucket = self.buckets.get(&s.fingerprint(&self.rigid))?;
        bucket.iter().find(|(t, _)| isomorphism(s, t, &self.rigid, IdMode::Plain).is_some()).map(|(_, i)| *i)
    }

    /// Inserts unless an equivalent member exists; returns the member index
    /// and whether it was new.
    pub fn insert(&mut self, s: Shape) -> (usize, bool) {
        let key = s.fingerprint(&self.rigid);
        let bucket = self.buckets.entry(key).or_default();
        if let Some((_, i)) = bucket.iter().find(|(t, _)| isomorphism(&s, t, &self.rigid, IdMode::Plain).is_some()) {
            return (*i, false);
        }
        let i = self.len;
        bucket.push((s, i));
        self.len += 1;
        (i, true)
    }
}

/// Equality of annotated rules up to variable and identifier renaming.
pub fn rules_equivalent(a: &AnnotatedRule, b: &AnnotatedRule) -> bool {
    a.name == b.name
        && a.kept.len() == b.kept.len()
        && a.removed.len() == b.removed.len()
        && isomorphism(&Shape::of_rule(a), &Shape::of_rule(b), &BTreeSet::new(), IdMode::Plain).is_some()
}
