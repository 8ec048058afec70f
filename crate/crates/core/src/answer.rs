//! Qualified answers and sets of them, compared up to renaming of local
//! variables.

use std::collections::BTreeSet;
use std::fmt;

use crate::builtins::{Builtin, BuiltinStore, Projection};
use crate::canon::{anonymize, isomorphism, IdMode, Shape, ShapeSet};
use crate::syntax::Atom;
use crate::terms::{Term, Var};

/// Observable result of a final state, projected onto the goal variables.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum QualifiedAnswer {
    False,
    Answer { chr: Vec<Atom>, bindings: Vec<(Var, Term)> },
}

impl QualifiedAnswer {
    pub fn from_state<'a>(
        builtin: &BuiltinStore,
        atoms: impl IntoIterator<Item = &'a Atom>,
        keep: &BTreeSet<Var>,
    ) -> QualifiedAnswer {
        let Some(sigma) = builtin.solved() else {
            return QualifiedAnswer::False;
        };
        let proj = Projection::new(sigma, keep);
        QualifiedAnswer::Answer {
            chr: atoms.into_iter().map(|a| a.map_terms(&mut |t| proj.term(t))).collect(),
            bindings: proj.bindings(),
        }
    }

    pub fn is_false(&self) -> bool {
        matches!(self, QualifiedAnswer::False)
    }

    pub fn shape(&self) -> Shape {
        match self {
            QualifiedAnswer::False => Shape::failed(),
            QualifiedAnswer::Answer { chr, bindings } => Shape {
                failed: false,
                atoms: chr.iter().map(|a| (a.clone(), None)).collect(),
                eqs: Vec::new(),
                bindings: bindings.clone(),
                tokens: Vec::new(),
            },
        }
    }

    pub fn equivalent(&self, other: &QualifiedAnswer, keep: &BTreeSet<Var>) -> bool {
        isomorphism(&self.shape(), &other.shape(), keep, IdMode::Plain).is_some()
    }

    /// Canonical text: local variables become `_G1`, `_G2`, ... in order of
    /// first occurrence after sorting the atoms by their anonymized form.
    pub fn render(&self, keep: &BTreeSet<Var>) -> String {
        let QualifiedAnswer::Answer { chr, bindings } = self else {
            return "false".into();
        };
        let mut atoms: Vec<&Atom> = chr.iter().collect();
        atoms.sort_by_cached_key(|a| (anonymize(&a.to_term(), keep), a.to_string()));
        let mut order: Vec<Var> = Vec::new();
        for a in &atoms {
            for t in &a.args {
                t.collect_vars_ordered(&mut order);
            }
        }
        for (_, t) in bindings {
            t.collect_vars_ordered(&mut order);
        }
        let mut map = std::collections::BTreeMap::new();
        let mut k = 0;
        for v in order {
            if keep.contains(&v) || map.contains_key(&v) {
                continue;
            }
            let fresh = loop {
                k += 1;
                let cand = Var::new(&format!("_G{k}"));
                if !keep.contains(&cand) {
                    break cand;
                }
            };
            map.insert(v, fresh);
        }
        let chr_text: Vec<String> = atoms.iter().map(|a| a.rename(&map).to_string()).collect();
        let eq_text: Vec<String> =
            bindings.iter().map(|(x, t)| Builtin::eq(Term::Var(x.clone()), t.rename(&map)).to_string()).collect();
        match (chr_text.is_empty(), eq_text.is_empty()) {
            (true, true) => "true".into(),
            (false, true) => chr_text.join(", "),
            (true, false) => eq_text.join(", "),
            (false, false) => format!("{} ; {}", chr_text.join(", "), eq_text.join(", ")),
        }
    }
}

/// Set of qualified answers modulo renaming of non-goal variables.
pub struct AnswerSet {
    keep: BTreeSet<Var>,
    index: ShapeSet,
    answers: Vec<QualifiedAnswer>,
}

impl AnswerSet {
    pub fn new(keep: BTreeSet<Var>) -> AnswerSet {
        AnswerSet { index: ShapeSet::new(keep.clone()), keep, answers: Vec::new() }
    }

    pub fn keep(&self) -> &BTreeSet<Var> {
        &self.keep
    }

    /// Adds `a` unless an equivalent answer is present.
    pub fn insert(&mut self, a: QualifiedAnswer) -> bool {
        let (_, new) = self.index.insert(a.shape());
        if new {
            self.answers.push(a);
        }
        new
    }

    pub fn contains(&self, a: &QualifiedAnswer) -> bool {
        self.index.find(&a.shape()).is_some()
    }

    pub fn len(&self) -> usize {
        self.answers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.answers.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &QualifiedAnswer> {
        self.answers.iter()
    }

    /// Members of `self` with no equivalent in `other`.
    pub fn difference<'a>(&'a self, other: &AnswerSet) -> Vec<&'a QualifiedAnswer> {
        self.answers.iter().filter(|a| !other.contains(a)).collect()
    }

    pub fn same_as(&self, other: &AnswerSet) -> bool {
        self.len() == other.len() && self.difference(other).is_empty()
    }

    /// Sorted canonical lines.
    pub fn lines(&self) -> Vec<String> {
        let mut out: Vec<String> = self.answers.iter().map(|a| a.render(&self.keep)).collect();
        out.sort();
        out
    }
}

impl fmt::Display for AnswerSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{{}}}", self.lines().join(" | "))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn answers_equal_up_to_local_renaming() {
        let keep = BTreeSet::from([Var::new("X")]);
        let q = |x: &str, y: &str| Atom::new("q", vec![Term::var(x), Term::var(y)]);
        let a = QualifiedAnswer::Answer { chr: vec![q("X", "_V3")], bindings: vec![] };
        let b = QualifiedAnswer::Answer { chr: vec![q("X", "_V9")], bindings: vec![] };
        let c = QualifiedAnswer::Answer { chr: vec![q("_V9", "X")], bindings: vec![] };
        let mut set = AnswerSet::new(keep.clone());
        assert!(set.insert(a.clone()));
        assert!(!set.insert(b.clone()));
        assert!(set.insert(c));
        assert_eq!(set.len(), 2);
        assert_eq!(a.render(&keep), b.render(&keep));
        assert_eq!(a.render(&keep), "q(X,_G1)");
    }

    #[test]
    fn rendering_of_special_answers() {
        let keep = BTreeSet::from([Var::new("X")]);
        assert_eq!(QualifiedAnswer::False.render(&keep), "false");
        let t = QualifiedAnswer::Answer { chr: vec![], bindings: vec![] };
        assert_eq!(t.render(&keep), "true");
        let b = QualifiedAnswer::Answer { chr: vec![], bindings: vec![(Var::new("X"), Term::constant("a"))] };
        assert_eq!(b.render(&keep), "X = a");
    }
}
