//! Built-in constraints (syntactic equality under the Clark equality
//! theory) and the store operations used by every transition system.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use crate::terms::{FreshSupply, Substitution, Term, Var};

#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub enum Builtin {
    True,
    False,
    Eq(Term, Term),
}

impl Builtin {
    pub fn eq(lhs: Term, rhs: Term) -> Builtin {
        Builtin::Eq(lhs, rhs)
    }

    pub fn collect_vars(&self, out: &mut BTreeSet<Var>) {
        if let Builtin::Eq(l, r) = self {
            l.collect_vars(out);
            r.collect_vars(out);
        }
    }

    pub fn map_terms(&self, f: &mut impl FnMut(&Term) -> Term) -> Builtin {
        match self {
            Builtin::Eq(l, r) => Builtin::Eq(f(l), f(r)),
            other => other.clone(),
        }
    }

    pub fn apply(&self, s: &Substitution) -> Builtin {
        self.map_terms(&mut |t| s.apply(t))
    }
}

impl fmt::Display for Builtin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Builtin::True => f.write_str("true"),
            Builtin::False => f.write_str("false"),
            Builtin::Eq(l, r) => write!(f, "{l} = {r}"),
        }
    }
}

/// A conjunction of built-ins kept in solved form.
#[derive(Clone, PartialEq, Eq, Debug)]
pub enum BuiltinStore {
    False,
    Solved {
        subst: Substitution,
        /// Every equation ever conjoined, in order.
        eqs: Vec<Builtin>,
    },
}

impl Default for BuiltinStore {
    fn default() -> Self {
        BuiltinStore::top()
    }
}

impl BuiltinStore {
    /// The empty conjunction, `true`.
    pub fn top() -> BuiltinStore {
        BuiltinStore::Solved { subst: Substitution::new(), eqs: Vec::new() }
    }

    pub fn from_builtins(eqs: &[Builtin]) -> BuiltinStore {
        BuiltinStore::top().conjoin(eqs)
    }

    pub fn is_false(&self) -> bool {
        matches!(self, BuiltinStore::False)
    }

    pub fn solved(&self) -> Option<&Substitution> {
        match self {
            BuiltinStore::False => None,
            BuiltinStore::Solved { subst, .. } => Some(subst),
        }
    }

    pub fn equations(&self) -> &[Builtin] {
        match self {
            BuiltinStore::False => &[],
            BuiltinStore::Solved { eqs, .. } => eqs,
        }
    }

    pub fn conjoin(&self, new: &[Builtin]) -> BuiltinStore {
        let BuiltinStore::Solved { subst, eqs } = self else {
            return BuiltinStore::False;
        };
        let mut subst = subst.clone();
        let mut pairs = Vec::new();
        for b in new {
            match b {
                Builtin::True => {}
                Builtin::False => return BuiltinStore::False,
                Builtin::Eq(l, r) => pairs.push((l.clone(), r.clone())),
            }
        }
        if !subst.unify_pairs(pairs, &|_| 1) {
            return BuiltinStore::False;
        }
        let mut eqs = eqs.clone();
        eqs.extend(new.iter().cloned());
        BuiltinStore::Solved { subst, eqs }
    }

    pub fn satisfiable(&self, eqs: &[Builtin]) -> bool {
        !self.conjoin(eqs).is_false()
    }

    /// Decides `CT ⊨ store → ∃exvars (⋀ eqs)`.
    pub fn entails_exists(&self, exvars: &BTreeSet<Var>, eqs: &[Builtin]) -> bool {
        self.entailment_witness(exvars, eqs).is_some()
    }

    /// When the entailment holds on a satisfiable store, returns the values
    /// the existential variables are forced to, expressed over the store's
    /// free variables. A FALSE store yields an empty witness.
    pub fn entailment_witness(&self, exvars: &BTreeSet<Var>, eqs: &[Builtin]) -> Option<Substitution> {
        let BuiltinStore::Solved { subst: sigma, .. } = self else {
            return Some(Substitution::new());
        };
        // The existential variables may shadow store variables of the same
        // name, so they are renamed away before the store is applied.
        let supply = FreshSupply::global();
        let renaming: BTreeMap<Var, Var> = exvars.iter().map(|x| (x.clone(), supply.fresh())).collect();
        let fresh: BTreeSet<Var> = renaming.values().cloned().collect();
        let mut pairs = Vec::new();
        for b in eqs {
            match b {
                Builtin::True => {}
                Builtin::False => return None,
                Builtin::Eq(l, r) => pairs.push((sigma.apply(&l.rename(&renaming)), sigma.apply(&r.rename(&renaming)))),
            }
        }
        let mut tau = Substitution::new();
        let rank = |v: &Var| if fresh.contains(v) { 2 } else { 0 };
        if !tau.unify_pairs(pairs, &rank) {
            return None;
        }
        let inverse: BTreeMap<Var, Var> = renaming.iter().map(|(a, b)| (b.clone(), a.clone())).collect();
        let back = renaming.iter().filter_map(|(x, y)| tau.get(y).map(|t| (x.clone(), t.rename(&inverse))));
        Some(Substitution::normalized(back).unwrap_or_default())
    }

    /// Equations over `keep` equivalent to `∃_{-keep} store`.
    pub fn project(&self, keep: &BTreeSet<Var>) -> Vec<Builtin> {
        match self {
            BuiltinStore::False => vec![Builtin::False],
            BuiltinStore::Solved { subst, .. } => Projection::new(subst, keep)
                .bindings()
                .into_iter()
                .map(|(x, t)| Builtin::Eq(Term::Var(x), t))
                .collect(),
        }
    }
}

impl fmt::Display for BuiltinStore {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BuiltinStore::False => f.write_str("false"),
            BuiltinStore::Solved { subst, .. } if subst.is_empty() => f.write_str("true"),
            BuiltinStore::Solved { subst, .. } => {
                for (i, (v, t)) in subst.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "{v} = {t}")?;
                }
                Ok(())
            }
        }
    }
}

/// Normal form of a solved store relative to a set of rigid variables.
///
/// Every variable class `{y} ∪ {x | σ(x) = y}` is represented by its least
/// rigid member when it has one, else by the free variable `y` itself.
/// Normalized terms are `ρ(σ(t))`; the remaining information about rigid
/// variables is returned by [`Projection::bindings`].
pub struct Projection<'a> {
    subst: &'a Substitution,
    keep: &'a BTreeSet<Var>,
    rep: BTreeMap<Var, Var>,
}

impl<'a> Projection<'a> {
    pub fn new(subst: &'a Substitution, keep: &'a BTreeSet<Var>) -> Projection<'a> {
        let mut rep: BTreeMap<Var, Var> = BTreeMap::new();
        let mut offer = |root: &Var, candidate: &Var| {
            if keep.contains(candidate) {
                let slot = rep.entry(root.clone()).or_insert_with(|| candidate.clone());
                if candidate < slot {
                    *slot = candidate.clone();
                }
            }
        };
        for (x, t) in subst.iter() {
            if let Term::Var(y) = t {
                offer(y, x);
            }
        }
        for k in keep {
            if !subst.contains(k) {
                offer(k, k);
            }
        }
        Projection { subst, keep, rep }
    }

    pub fn term(&self, t: &Term) -> Term {
        self.subst.apply(t).rename(&self.rep)
    }

    pub fn builtin(&self, b: &Builtin) -> Builtin {
        b.map_terms(&mut |t| self.term(t))
    }

    pub fn bindings(&self) -> Vec<(Var, Term)> {
        self.keep
            .iter()
            .filter_map(|x| {
                let t = self.term(&Term::Var(x.clone()));
                (t != Term::Var(x.clone())).then(|| (x.clone(), t))
            })
            .collect()
    }
}
