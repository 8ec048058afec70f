//! The transition system for annotated programs: one fused store, and
//! rule-local token stores instantiated at every firing.

use std::collections::BTreeSet;

use crate::answer::QualifiedAnswer;
use crate::builtins::{Builtin, BuiltinStore};
use crate::canon::Shape;
use crate::explore::{
    applicable, explore, qualified_answers_with, Exploration, Firing, Limits, Machine, QaResult, State, StepCounts,
    StepKind, TraceStep,
};
use crate::syntax::{identify, AnnotatedProgram, Atom, BodyItem, GoalItem, IdentifiedAtom, Token, TokenStore};
use crate::terms::{rename_apart, FreshSupply, Var};

/// `⟨S̃, c, T⟩_n`: `counter` is the last identifier used.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AConfig {
    pub store: Vec<BodyItem>,
    pub builtin: BuiltinStore,
    pub tokens: TokenStore,
    pub counter: u64,
}

/// Shifts every identifier of an annotated body and its token store by `n`;
/// the third component is the greatest shifted identifier, or `n`.
pub fn inst(body: &[BodyItem], tokens: &TokenStore, n: u64) -> (Vec<BodyItem>, TokenStore, u64) {
    let mut m = n;
    let body = body
        .iter()
        .map(|b| match b {
            BodyItem::Atom(a) => {
                m = m.max(a.id + n);
                BodyItem::Atom(IdentifiedAtom { atom: a.atom.clone(), id: a.id + n })
            }
            other => other.clone(),
        })
        .collect();
    let tokens = tokens
        .iter()
        .map(|t| {
            let s = t.shifted(n);
            m = s.ids.iter().copied().fold(m, u64::max);
            s
        })
        .collect();
    (body, tokens, m)
}

impl AConfig {
    pub fn initial(goal: &[GoalItem]) -> AConfig {
        let (store, m) = identify(goal, 0);
        AConfig { store, builtin: BuiltinStore::top(), tokens: TokenStore::new(), counter: m }
    }

    /// Solve′ on the first equation of the store.
    pub fn step_solve(&self) -> Option<AConfig> {
        let i = self.store.iter().position(|b| matches!(b, BodyItem::Builtin(_)))?;
        Some(self.solve_at(i))
    }

    fn solve_at(&self, i: usize) -> AConfig {
        let mut next = self.clone();
        let BodyItem::Builtin(b) = next.store.remove(i) else { unreachable!("solve on an atom") };
        next.builtin = next.builtin.conjoin(&[b]);
        next
    }

    pub fn chr_atoms(&self) -> impl Iterator<Item = &IdentifiedAtom> {
        self.store.iter().filter_map(BodyItem::as_atom)
    }

    pub fn pending(&self) -> impl Iterator<Item = &Builtin> {
        self.store.iter().filter_map(BodyItem::as_builtin)
    }

    pub fn enum_apply(&self, program: &AnnotatedProgram) -> Vec<Firing<AConfig>> {
        let mut out = Vec::new();
        if self.is_failed() {
            return out;
        }
        let stored: Vec<&IdentifiedAtom> = self.chr_atoms().collect();
        let atoms: Vec<&Atom> = stored.iter().map(|a| &a.atom).collect();
        let ids: Vec<u64> = stored.iter().map(|a| a.id).collect();
        for (ri, rule) in program.rules.iter().enumerate() {
            let r = rule.rename(&rename_apart(&rule.vars(), FreshSupply::global()));
            let heads: Vec<&Atom> = r.heads().collect();
            for (assignment, eqs) in applicable(&atoms, &ids, &self.builtin, &self.tokens, &r.name, &heads, &r.guard) {
                let chosen: Vec<u64> = assignment.iter().map(|&i| ids[i]).collect();
                let (kept_ids, removed_ids) = chosen.split_at(r.kept.len());
                let (body, local, m) = inst(&r.body, &r.tokens, self.counter);
                let mut next = self.clone();
                next.store.retain(|b| !matches!(b, BodyItem::Atom(a) if removed_ids.contains(&a.id)));
                next.store.extend(body);
                next.builtin = next.builtin.conjoin(&eqs);
                next.tokens.extend(local);
                if removed_ids.is_empty() {
                    next.tokens.insert(Token { rule: r.name.clone(), ids: chosen.clone() });
                }
                next.counter = m;
                out.push(Firing {
                    rule_index: ri,
                    rule: r.name.clone(),
                    kept_ids: kept_ids.to_vec(),
                    removed_ids: removed_ids.to_vec(),
                    successor: next,
                });
            }
        }
        out
    }

    pub fn is_failed(&self) -> bool {
        self.builtin.is_false()
    }

    pub fn is_built_in_free(&self) -> bool {
        self.is_failed() || self.pending().next().is_none()
    }

    pub fn is_final(&self, program: &AnnotatedProgram) -> bool {
        self.is_failed() || (self.is_built_in_free() && self.enum_apply(program).is_empty())
    }
}

impl State for AConfig {
    fn is_failed(&self) -> bool {
        AConfig::is_failed(self)
    }

    fn is_built_in_free(&self) -> bool {
        AConfig::is_built_in_free(self)
    }

    fn shape(&self, rigid: &BTreeSet<Var>, clean: bool) -> Shape {
        Shape::of_state(&self.builtin, self.atoms(), self.pending(), &self.tokens, rigid, clean)
    }

    fn answer(&self, keep: &BTreeSet<Var>) -> QualifiedAnswer {
        QualifiedAnswer::from_state(&self.builtin, self.chr_atoms().map(|a| &a.atom), keep)
    }

    fn atoms(&self) -> Vec<(&Atom, Option<u64>)> {
        self.chr_atoms().map(|a| (&a.atom, Some(a.id))).collect()
    }

    fn builtin(&self) -> &BuiltinStore {
        &self.builtin
    }

    fn tokens(&self) -> &TokenStore {
        &self.tokens
    }
}

/// The annotated semantics of an annotated program.
pub struct WtPrime<'p>(pub &'p AnnotatedProgram);

impl Machine for WtPrime<'_> {
    type State = AConfig;

    fn initial(&self, goal: &[GoalItem]) -> AConfig {
        AConfig::initial(goal)
    }

    fn saturate(&self, s: &mut AConfig, counts: &mut StepCounts) {
        while !s.is_failed() {
            match s.step_solve() {
                Some(next) => {
                    *s = next;
                    counts.solve += 1;
                }
                None => break,
            }
        }
    }

    fn firings(&self, s: &AConfig) -> Vec<Firing<AConfig>> {
        s.enum_apply(self.0)
    }

    fn single_steps(&self, s: &AConfig) -> Vec<(TraceStep, AConfig)> {
        if s.is_failed() {
            return Vec::new();
        }
        (0..s.store.len())
            .filter(|&i| matches!(s.store[i], BodyItem::Builtin(_)))
            .map(|i| (TraceStep { kind: StepKind::Solve, rule: None, ids: vec![] }, s.solve_at(i)))
            .collect()
    }
}

pub fn explore_wt_prime(program: &AnnotatedProgram, goal: &[GoalItem], limits: Limits) -> Exploration<AConfig> {
    explore(&WtPrime(program), goal, limits)
}

/// `QA′_P(G)` over normal derivations.
pub fn qualified_answers(program: &AnnotatedProgram, goal: &[GoalItem], limits: Limits) -> QaResult {
    qualified_answers_with(&WtPrime(program), goal, limits)
}
