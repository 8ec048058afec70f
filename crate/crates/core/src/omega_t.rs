//! The reference transition system over plain programs.

use std::collections::BTreeSet;

use crate::answer::QualifiedAnswer;
use crate::builtins::BuiltinStore;
use crate::canon::Shape;
use crate::explore::{
    applicable, explore, qualified_answers_with, Exploration, Firing, Limits, Machine, QaResult, State, StepCounts,
    StepKind, TraceStep,
};
use crate::syntax::{Atom, GoalItem, IdentifiedAtom, Program, Token, TokenStore};
use crate::terms::{rename_apart, FreshSupply, Var};

/// `⟨G, S̃, c, T⟩_n`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Config {
    pub goal: Vec<GoalItem>,
    pub store: Vec<IdentifiedAtom>,
    pub builtin: BuiltinStore,
    pub tokens: TokenStore,
    pub next_id: u64,
}

impl Config {
    pub fn initial(goal: &[GoalItem]) -> Config {
        Config {
            goal: goal.to_vec(),
            store: Vec::new(),
            builtin: BuiltinStore::top(),
            tokens: TokenStore::new(),
            next_id: 1,
        }
    }

    /// Solve on the first equation of the goal.
    pub fn step_solve(&self) -> Option<Config> {
        let i = self.goal.iter().position(|g| matches!(g, GoalItem::Builtin(_)))?;
        Some(self.solve_at(i))
    }

    fn solve_at(&self, i: usize) -> Config {
        let mut next = self.clone();
        let GoalItem::Builtin(b) = next.goal.remove(i) else { unreachable!("solve on an atom") };
        next.builtin = next.builtin.conjoin(&[b]);
        next
    }

    /// Introduce on the first CHR atom of the goal.
    pub fn step_introduce(&self) -> Option<Config> {
        let i = self.goal.iter().position(|g| matches!(g, GoalItem::Atom(_)))?;
        Some(self.introduce_at(i))
    }

    fn introduce_at(&self, i: usize) -> Config {
        let mut next = self.clone();
        let GoalItem::Atom(a) = next.goal.remove(i) else { unreachable!("introduce on an equation") };
        next.store.push(IdentifiedAtom { atom: a, id: next.next_id });
        next.next_id += 1;
        next
    }

    pub fn enum_apply(&self, program: &Program) -> Vec<Firing<Config>> {
        let mut out = Vec::new();
        if self.is_failed() {
            return out;
        }
        let atoms: Vec<&Atom> = self.store.iter().map(|a| &a.atom).collect();
        let ids: Vec<u64> = self.store.iter().map(|a| a.id).collect();
        for (ri, rule) in program.rules.iter().enumerate() {
            let r = rule.rename(&rename_apart(&rule.vars(), FreshSupply::global()));
            let heads: Vec<&Atom> = r.heads().collect();
            for (assignment, eqs) in applicable(&atoms, &ids, &self.builtin, &self.tokens, &r.name, &heads, &r.guard) {
                let chosen: Vec<u64> = assignment.iter().map(|&i| ids[i]).collect();
                let (kept_ids, removed_ids) = chosen.split_at(r.kept.len());
                let mut next = self.clone();
                next.store.retain(|a| !removed_ids.contains(&a.id));
                let mut goal = r.body.clone();
                goal.append(&mut next.goal);
                next.goal = goal;
                next.builtin = next.builtin.conjoin(&eqs);
                if removed_ids.is_empty() {
                    next.tokens.insert(Token { rule: r.name.clone(), ids: chosen.clone() });
                }
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
        self.is_failed() || self.goal.iter().all(|g| matches!(g, GoalItem::Atom(_)))
    }

    pub fn is_final(&self, program: &Program) -> bool {
        self.is_failed() || (self.goal.is_empty() && self.enum_apply(program).is_empty())
    }
}

impl State for Config {
    fn is_failed(&self) -> bool {
        Config::is_failed(self)
    }

    fn is_built_in_free(&self) -> bool {
        Config::is_built_in_free(self)
    }

    fn shape(&self, rigid: &BTreeSet<Var>, clean: bool) -> Shape {
        let pending = self.goal.iter().filter_map(|g| match g {
            GoalItem::Builtin(b) => Some(b),
            GoalItem::Atom(_) => None,
        });
        Shape::of_state(&self.builtin, self.atoms(), pending, &self.tokens, rigid, clean)
    }

    fn answer(&self, keep: &BTreeSet<Var>) -> QualifiedAnswer {
        QualifiedAnswer::from_state(&self.builtin, self.atoms().into_iter().map(|(a, _)| a), keep)
    }

    fn atoms(&self) -> Vec<(&Atom, Option<u64>)> {
        let stored = self.store.iter().map(|a| (&a.atom, Some(a.id)));
        let pending = self.goal.iter().filter_map(|g| match g {
            GoalItem::Atom(a) => Some((a, None)),
            GoalItem::Builtin(_) => None,
        });
        stored.chain(pending).collect()
    }

    fn builtin(&self) -> &BuiltinStore {
        &self.builtin
    }

    fn tokens(&self) -> &TokenStore {
        &self.tokens
    }
}

/// The reference semantics of a plain program.
pub struct Wt<'p>(pub &'p Program);

impl Machine for Wt<'_> {
    type State = Config;

    fn initial(&self, goal: &[GoalItem]) -> Config {
        Config::initial(goal)
    }

    /// Processes the goal left to right.
    fn saturate(&self, s: &mut Config, counts: &mut StepCounts) {
        while !s.is_failed() && !s.goal.is_empty() {
            if matches!(s.goal[0], GoalItem::Builtin(_)) {
                *s = s.solve_at(0);
                counts.solve += 1;
            } else {
                *s = s.introduce_at(0);
                counts.introduce += 1;
            }
        }
    }

    fn firings(&self, s: &Config) -> Vec<Firing<Config>> {
        s.enum_apply(self.0)
    }

    fn single_steps(&self, s: &Config) -> Vec<(TraceStep, Config)> {
        if s.is_failed() {
            return Vec::new();
        }
        (0..s.goal.len())
            .map(|i| match s.goal[i] {
                GoalItem::Builtin(_) => (TraceStep { kind: StepKind::Solve, rule: None, ids: vec![] }, s.solve_at(i)),
                GoalItem::Atom(_) => {
                    (TraceStep { kind: StepKind::Introduce, rule: None, ids: vec![s.next_id] }, s.introduce_at(i))
                }
            })
            .collect()
    }
}

pub fn explore_wt(program: &Program, goal: &[GoalItem], limits: Limits) -> Exploration<Config> {
    explore(&Wt(program), goal, limits)
}

/// `QA_P(G)` over normal derivations.
pub fn qualified_answers(program: &Program, goal: &[GoalItem], limits: Limits) -> QaResult {
    qualified_answers_with(&Wt(program), goal, limits)
}
