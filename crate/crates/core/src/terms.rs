//! First-order terms, idempotent substitutions, unification with occurs
//! check, and one-way matching.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

/// Interned-ish name shared by functors, predicates and rule names.
pub type Symbol = Arc<str>;

/// A logic variable. Names follow `[A-Z_][A-Za-z0-9_]*`.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Var(Symbol);

impl Var {
    pub fn new(name: &str) -> Var {
        Var(Arc::from(name))
    }

    pub fn name(&self) -> &str {
        &self.0
    }
}

impl fmt::Debug for Var {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl fmt::Display for Var {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub enum Term {
    Var(Var),
    /// Functor applied to arguments; constants have no arguments.
    App(Symbol, Vec<Term>),
}

impl Term {
    pub fn var(name: &str) -> Term {
        Term::Var(Var::new(name))
    }

    pub fn constant(name: &str) -> Term {
        Term::App(Arc::from(name), Vec::new())
    }

    pub fn app(functor: &str, args: Vec<Term>) -> Term {
        Term::App(Arc::from(functor), args)
    }

    pub fn as_var(&self) -> Option<&Var> {
        match self {
            Term::Var(v) => Some(v),
            Term::App(..) => None,
        }
    }

    pub fn collect_vars(&self, out: &mut BTreeSet<Var>) {
        match self {
            Term::Var(v) => {
                out.insert(v.clone());
            }
            Term::App(_, args) => args.iter().for_each(|a| a.collect_vars(out)),
        }
    }

    pub fn vars(&self) -> BTreeSet<Var> {
        let mut out = BTreeSet::new();
        self.collect_vars(&mut out);
        out
    }

    /// Variables in order of first occurrence (left to right, depth first).
    pub fn collect_vars_ordered(&self, out: &mut Vec<Var>) {
        match self {
            Term::Var(v) => {
                if !out.contains(v) {
                    out.push(v.clone());
                }
            }
            Term::App(_, args) => args.iter().for_each(|a| a.collect_vars_ordered(out)),
        }
    }

    pub fn occurs(&self, v: &Var) -> bool {
        match self {
            Term::Var(w) => w == v,
            Term::App(_, args) => args.iter().any(|a| a.occurs(v)),
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            Term::Var(_) => 0,
            Term::App(_, args) => 1 + args.iter().map(Term::depth).max().unwrap_or(0),
        }
    }

    pub fn is_ground(&self) -> bool {
        match self {
            Term::Var(_) => false,
            Term::App(_, args) => args.iter().all(Term::is_ground),
        }
    }

    /// Replaces variables through an arbitrary (not necessarily idempotent)
    /// renaming, one level deep.
    pub fn rename(&self, map: &BTreeMap<Var, Var>) -> Term {
        match self {
            Term::Var(v) => Term::Var(map.get(v).cloned().unwrap_or_else(|| v.clone())),
            Term::App(f, args) => Term::App(f.clone(), args.iter().map(|a| a.rename(map)).collect()),
        }
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Var(v) => write!(f, "{v}"),
            Term::App(name, args) => {
                f.write_str(name)?;
                if !args.is_empty() {
                    f.write_str("(")?;
                    for (i, a) in args.iter().enumerate() {
                        if i > 0 {
                            f.write_str(",")?;
                        }
                        write!(f, "{a}")?;
                    }
                    f.write_str(")")?;
                }
                Ok(())
            }
        }
    }
}

/// Idempotent substitution: no domain variable occurs in any range term.
#[derive(Clone, Default, PartialEq, Eq, Debug)]
pub struct Substitution {
    map: BTreeMap<Var, Term>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
#[error("terms are not unifiable")]
pub struct NoUnifier;

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
#[error("pattern does not match target")]
pub struct NoMatch;

impl Substitution {
    pub fn new() -> Substitution {
        Substitution::default()
    }

    /// Solves an arbitrary binding list into idempotent form. Fails when the
    /// bindings are cyclic or contradictory.
    pub fn normalized(bindings: impl IntoIterator<Item = (Var, Term)>) -> Result<Substitution, NoUnifier> {
        let mut s = Substitution::new();
        let pairs = bindings.into_iter().map(|(v, t)| (Term::Var(v), t)).collect();
        if s.unify_pairs(pairs, &|_| 1) {
            Ok(s)
        } else {
            Err(NoUnifier)
        }
    }

    pub fn get(&self, v: &Var) -> Option<&Term> {
        self.map.get(v)
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn domain(&self) -> impl Iterator<Item = &Var> {
        self.map.keys()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Var, &Term)> {
        self.map.iter()
    }

    pub fn contains(&self, v: &Var) -> bool {
        self.map.contains_key(v)
    }

    pub fn apply(&self, t: &Term) -> Term {
        match t {
            Term::Var(v) => match self.map.get(v) {
                // Ranges are already fixpoints; resolving again keeps
                // triangular inputs working too.
                Some(bound) if bound != t => self.apply(bound),
                _ => t.clone(),
            },
            Term::App(f, args) => Term::App(f.clone(), args.iter().map(|a| self.apply(a)).collect()),
        }
    }

    /// Restriction to the given variables.
    pub fn restrict(&self, keep: &BTreeSet<Var>) -> Substitution {
        Substitution {
            map: self.map.iter().filter(|(v, _)| keep.contains(*v)).map(|(v, t)| (v.clone(), t.clone())).collect(),
        }
    }

    /// Adds `v ↦ t`, keeping the map idempotent. The caller guarantees that
    /// `v` is unbound, `t` is already resolved and `v` does not occur in `t`.
    fn bind(&mut self, v: Var, t: Term) {
        let single = Substitution { map: BTreeMap::from([(v.clone(), t.clone())]) };
        for range in self.map.values_mut() {
            if range.occurs(&v) {
                *range = single.apply(range);
            }
        }
        self.map.insert(v, t);
    }

    /// Core unification loop. `rank` decides which variables may be bound:
    /// rank 0 never, otherwise the higher rank is bound first in a
    /// variable/variable pair (left wins ties).
    pub(crate) fn unify_pairs(&mut self, mut pairs: Vec<(Term, Term)>, rank: &dyn Fn(&Var) -> u8) -> bool {
        pairs.reverse();
        while let Some((a, b)) = pairs.pop() {
            let a = self.apply(&a);
            let b = self.apply(&b);
            match (a, b) {
                (Term::Var(x), Term::Var(y)) if x == y => {}
                (Term::Var(x), Term::Var(y)) => {
                    let (rx, ry) = (rank(&x), rank(&y));
                    if rx == 0 && ry == 0 {
                        return false;
                    }
                    if rx >= ry {
                        self.bind(x, Term::Var(y));
                    } else {
                        self.bind(y, Term::Var(x));
                    }
                }
                (Term::Var(x), t) | (t, Term::Var(x)) => {
                    if rank(&x) == 0 || t.occurs(&x) {
                        return false;
                    }
                    self.bind(x, t);
                }
                (Term::App(f, fa), Term::App(g, ga)) => {
                    if f != g || fa.len() != ga.len() {
                        return false;
                    }
                    for pair in fa.into_iter().zip(ga).rev() {
                        pairs.push(pair);
                    }
                }
            }
        }
        true
    }
}

impl fmt::Display for Substitution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("{")?;
        for (i, (v, t)) in self.map.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{v}↦{t}")?;
        }
        f.write_str("}")
    }
}

/// Most general unifier with occurs check.
pub fn unify(t1: &Term, t2: &Term) -> Result<Substitution, NoUnifier> {
    unify_all(&[(t1.clone(), t2.clone())])
}

pub fn unify_all(pairs: &[(Term, Term)]) -> Result<Substitution, NoUnifier> {
    let mut s = Substitution::new();
    if s.unify_pairs(pairs.to_vec(), &|_| 1) {
        Ok(s)
    } else {
        Err(NoUnifier)
    }
}

/// One-sided matching: only pattern variables outside `frozen` may be bound.
pub fn match_oneway(pattern: &Term, target: &Term, frozen: &BTreeSet<Var>) -> Result<Substitution, NoMatch> {
    let mut s = Substitution::new();
    let rank = |v: &Var| u8::from(!frozen.contains(v));
    if s.unify_pairs(vec![(pattern.clone(), target.clone())], &rank) {
        Ok(s)
    } else {
        Err(NoMatch)
    }
}

/// Source of fresh `_V<k>` variables.
#[derive(Debug, Default)]
pub struct FreshSupply {
    issued: AtomicU64,
}

static GLOBAL_SUPPLY: FreshSupply = FreshSupply::new();

impl FreshSupply {
    pub const fn new() -> FreshSupply {
        FreshSupply { issued: AtomicU64::new(0) }
    }

    /// The process-wide supply used by the semantics and the unfolder.
    pub fn global() -> &'static FreshSupply {
        &GLOBAL_SUPPLY
    }

    pub fn fresh(&self) -> Var {
        let k = self.issued.fetch_add(1, Ordering::Relaxed) + 1;
        Var::new(&format!("_V{k}"))
    }

    /// Makes sure a user-written `_V<k>` can never be issued again.
    pub fn reserve(&self, k: u64) {
        self.issued.fetch_max(k, Ordering::Relaxed);
    }

    /// Reserves the index of `v` if it is spelled like a fresh variable.
    pub fn reserve_name(&self, v: &Var) {
        if let Some(k) = v.name().strip_prefix("_V").and_then(|d| d.parse::<u64>().ok()) {
            self.reserve(k);
        }
    }
}

/// Bijective renaming of `vars` to fresh variables, in variable order.
pub fn rename_apart(vars: &BTreeSet<Var>, supply: &FreshSupply) -> BTreeMap<Var, Var> {
    vars.iter().map(|v| (v.clone(), supply.fresh())).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(n: &str) -> Term {
        Term::var(n)
    }
    fn c(n: &str) -> Term {
        Term::constant(n)
    }
    fn f(n: &str, args: Vec<Term>) -> Term {
        Term::app(n, args)
    }

    #[test]
    fn apply_replaces_bound_variables() {
        let s = Substitution::normalized([(Var::new("X"), c("a"))]).unwrap();
        assert_eq!(s.apply(&f("f", vec![v("X"), v("Y")])), f("f", vec![c("a"), v("Y")]));
        assert_eq!(Substitution::new().apply(&f("g", vec![v("X")])), f("g", vec![v("X")]));
    }

    #[test]
    fn normalized_triangular_input_matches_naive_fixpoint() {
        let raw = [(Var::new("X"), f("g", vec![v("Y")])), (Var::new("Y"), c("b"))];
        let s = Substitution::normalized(raw.clone()).unwrap();
        // naive oracle: apply the raw map until nothing changes
        let m: BTreeMap<Var, Term> = raw.iter().cloned().collect();
        let mut t = v("X");
        loop {
            let next = subst_once(&m, &t);
            if next == t {
                break;
            }
            t = next;
        }
        assert_eq!(s.apply(&v("X")), t);
        assert_eq!(t, f("g", vec![c("b")]));
    }

    fn subst_once(m: &BTreeMap<Var, Term>, t: &Term) -> Term {
        match t {
            Term::Var(x) => m.get(x).cloned().unwrap_or_else(|| t.clone()),
            Term::App(g, args) => Term::App(g.clone(), args.iter().map(|a| subst_once(m, a)).collect()),
        }
    }

    #[test]
    fn unify_examples() {
        let s = unify(&f("f", vec![v("X"), c("a")]), &f("f", vec![c("b"), v("Y")])).unwrap();
        assert_eq!(s.get(&Var::new("X")), Some(&c("b")));
        assert_eq!(s.get(&Var::new("Y")), Some(&c("a")));
        assert!(unify(&f("f", vec![v("X")]), &f("g", vec![v("X")])).is_err());
        assert!(unify(&v("X"), &f("f", vec![v("X")])).is_err());
    }

    #[test]
    fn match_oneway_examples() {
        let none = BTreeSet::new();
        let s = match_oneway(&f("q", vec![v("Z")]), &f("q", vec![c("b")]), &none).unwrap();
        assert_eq!(s.get(&Var::new("Z")), Some(&c("b")));
        let frozen_z = BTreeSet::from([Var::new("Z")]);
        assert!(match_oneway(&f("q", vec![c("b")]), &f("q", vec![v("Z")]), &frozen_z).is_err());
        let frozen = BTreeSet::from([Var::new("X"), Var::new("Z")]);
        let pat = f("f", vec![c("a"), v("W")]);
        let tgt = f("f", vec![v("X"), v("Z")]);
        assert!(match_oneway(&pat, &tgt, &frozen).is_err());
        let u = unify(&pat, &tgt).unwrap();
        assert_eq!(u.get(&Var::new("X")), Some(&c("a")));
        assert_eq!(u.get(&Var::new("W")), Some(&v("Z")));
    }

    #[test]
    fn rename_apart_from_zero_and_disjoint() {
        let supply = FreshSupply::new();
        let r = rename_apart(&BTreeSet::from([Var::new("X"), Var::new("Y")]), &supply);
        assert_eq!(r[&Var::new("X")], Var::new("_V1"));
        assert_eq!(r[&Var::new("Y")], Var::new("_V2"));
        assert!(rename_apart(&BTreeSet::new(), &supply).is_empty());
        let a = rename_apart(&BTreeSet::from([Var::new("X")]), &supply);
        let b = rename_apart(&BTreeSet::from([Var::new("X")]), &supply);
        assert_ne!(a[&Var::new("X")], b[&Var::new("X")]);
    }

    #[test]
    fn reserve_skips_user_written_names() {
        let supply = FreshSupply::new();
        supply.reserve_name(&Var::new("_V7"));
        assert_eq!(supply.fresh(), Var::new("_V8"));
    }
}
