//! Exploration of normal derivations shared by both transition systems.

use std::collections::{BTreeSet, VecDeque};

use serde::Serialize;

use crate::answer::{AnswerSet, QualifiedAnswer};
use crate::builtins::{Builtin, BuiltinStore};
use crate::canon::{Shape, ShapeSet};
use crate::syntax::{goal_vars, Atom, GoalItem, Token, TokenStore};
use crate::terms::{Symbol, Var};

/// One applicable rule instance and the state it leads to.
#[derive(Clone, Debug)]
pub struct Firing<S> {
    pub rule_index: usize,
    pub rule: Symbol,
    pub kept_ids: Vec<u64>,
    pub removed_ids: Vec<u64>,
    pub successor: S,
}

impl<S> Firing<S> {
    pub fn ids(&self) -> Vec<u64> {
        self.kept_ids.iter().chain(&self.removed_ids).copied().collect()
    }

    pub fn token(&self) -> Token {
        Token { rule: self.rule.clone(), ids: self.ids() }
    }

    pub fn step(&self) -> TraceStep {
        TraceStep { kind: StepKind::Apply, rule: Some(self.rule.to_string()), ids: self.ids() }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum StepKind {
    Solve,
    Introduce,
    Apply,
}

/// Transition label in a derivation trace. Normal traces list only Apply
/// steps; the unrestricted scheduler records every step.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct TraceStep {
    pub kind: StepKind,
    pub rule: Option<String>,
    pub ids: Vec<u64>,
}

impl std::fmt::Display for TraceStep {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match (&self.kind, &self.rule) {
            (StepKind::Apply, Some(r)) => {
                let ids: Vec<String> = self.ids.iter().map(u64::to_string).collect();
                write!(f, "{r}@{}", ids.join(","))
            }
            (k, _) => write!(f, "{k:?}"),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct StepCounts {
    pub solve: usize,
    pub introduce: usize,
    pub apply: usize,
}

/// Exploration budget. Depth counts Apply steps.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct Limits {
    pub max_depth: usize,
    pub max_states: usize,
}

impl Default for Limits {
    fn default() -> Limits {
        Limits { max_depth: 64, max_states: 20_000 }
    }
}

/// What both configuration types expose to the generic machinery.
pub trait State: Clone {
    fn is_failed(&self) -> bool;
    fn is_built_in_free(&self) -> bool;
    fn shape(&self, rigid: &BTreeSet<Var>, clean: bool) -> Shape;
    fn answer(&self, keep: &BTreeSet<Var>) -> QualifiedAnswer;
    /// CHR atoms with identifiers, pending goal atoms having none.
    fn atoms(&self) -> Vec<(&Atom, Option<u64>)>;
    fn builtin(&self) -> &BuiltinStore;
    fn tokens(&self) -> &TokenStore;
}

/// A transition system with its normal scheduler.
pub trait Machine {
    type State: State;
    fn initial(&self, goal: &[GoalItem]) -> Self::State;
    /// Runs Solve (and Introduce) to exhaustion or failure.
    fn saturate(&self, s: &mut Self::State, counts: &mut StepCounts);
    fn firings(&self, s: &Self::State) -> Vec<Firing<Self::State>>;
    /// Every single non-Apply step available, in any order.
    fn single_steps(&self, s: &Self::State) -> Vec<(TraceStep, Self::State)>;
}

/// A final or truncated leaf of the exploration.
#[derive(Clone, Debug)]
pub struct Leaf<S> {
    pub state: S,
    pub trace: Vec<TraceStep>,
    pub counts: StepCounts,
}

pub struct Exploration<S> {
    pub keep: BTreeSet<Var>,
    pub finals: Vec<Leaf<S>>,
    pub answers: AnswerSet,
    pub truncated: bool,
    pub states: usize,
}

/// Breadth-first search over normal derivations, deduplicating states up to
/// renaming outside the goal variables and identifier renaming.
pub fn explore<M: Machine>(m: &M, goal: &[GoalItem], limits: Limits) -> Exploration<M::State> {
    let keep = goal_vars(goal);
    let mut counts = StepCounts::default();
    let mut init = m.initial(goal);
    m.saturate(&mut init, &mut counts);
    let mut seen = ShapeSet::new(keep.clone());
    seen.insert(init.shape(&keep, true));
    let mut queue = VecDeque::from([Leaf { state: init, trace: Vec::new(), counts }]);
    let mut finals = Vec::new();
    let mut truncated = false;
    'outer: while let Some(node) = queue.pop_front() {
        if node.state.is_failed() {
            finals.push(node);
            continue;
        }
        let fs = m.firings(&node.state);
        if fs.is_empty() {
            finals.push(node);
            continue;
        }
        if node.trace.len() >= limits.max_depth {
            truncated = true;
            continue;
        }
        for f in fs {
            let mut trace = node.trace.clone();
            trace.push(f.step());
            let mut counts = node.counts;
            counts.apply += 1;
            let mut s = f.successor;
            m.saturate(&mut s, &mut counts);
            if !seen.insert(s.shape(&keep, true)).1 {
                continue;
            }
            if seen.len() > limits.max_states {
                truncated = true;
                break 'outer;
            }
            queue.push_back(Leaf { state: s, trace, counts });
        }
    }
    let mut answers = AnswerSet::new(keep.clone());
    for f in &finals {
        answers.insert(f.state.answer(&keep));
    }
    Exploration { keep, finals, answers, truncated, states: seen.len() }
}

/// Answer set with its completeness flag.
pub struct QaResult {
    pub answers: AnswerSet,
    pub truncated: bool,
    pub states: usize,
}

pub fn qualified_answers_with<M: Machine>(m: &M, goal: &[GoalItem], limits: Limits) -> QaResult {
    let e = explore(m, goal, limits);
    QaResult { answers: e.answers, truncated: e.truncated, states: e.states }
}

/// Injective assignments of store atoms to head positions, in
/// lexicographic order of store indices.
pub(crate) fn head_assignments(store: &[&Atom], heads: &[&Atom]) -> Vec<Vec<usize>> {
    fn go(store: &[&Atom], heads: &[&Atom], cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        let k = cur.len();
        if k == heads.len() {
            out.push(cur.clone());
            return;
        }
        for (i, a) in store.iter().enumerate() {
            if a.same_signature(heads[k]) && !cur.contains(&i) {
                cur.push(i);
                go(store, heads, cur, out);
                cur.pop();
            }
        }
    }
    let mut out = Vec::new();
    go(store, heads, &mut Vec::new(), &mut out);
    out
}

/// `store_arg = head_arg` for every argument position of the assignment.
pub(crate) fn head_equations(store: &[&Atom], heads: &[&Atom], assignment: &[usize]) -> Vec<Builtin> {
    assignment
        .iter()
        .zip(heads)
        .flat_map(|(&i, h)| store[i].args.iter().zip(&h.args).map(|(s, t)| Builtin::eq(s.clone(), t.clone())))
        .collect()
}

/// Head instances of a (renamed) rule that may fire: store atoms assigned
/// injectively to the head, token not yet recorded, and
/// `builtin ⊨ ∃heads (head equations ∧ guard)`. Returns the assignment and
/// its head equations.
pub(crate) fn applicable(
    store: &[&Atom],
    ids: &[u64],
    builtin: &BuiltinStore,
    tokens: &TokenStore,
    name: &Symbol,
    heads: &[&Atom],
    guard: &[Builtin],
) -> Vec<(Vec<usize>, Vec<Builtin>)> {
    if builtin.is_false() {
        return Vec::new();
    }
    let mut exvars = BTreeSet::new();
    heads.iter().for_each(|h| h.collect_vars(&mut exvars));
    let mut out = Vec::new();
    for assignment in head_assignments(store, heads) {
        let token = Token { rule: name.clone(), ids: assignment.iter().map(|&i| ids[i]).collect() };
        if tokens.contains(&token) {
            continue;
        }
        let eqs = head_equations(store, heads, &assignment);
        let mut check = eqs.clone();
        check.extend(guard.iter().cloned());
        if builtin.entails_exists(&exvars, &check) {
            out.push((assignment, eqs));
        }
    }
    out
}
