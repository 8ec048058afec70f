//! State equivalences, differential answer comparison, lock-step replay of
//! the two semantics, and bounded checks of normal termination and normal
//! confluence. The checks cover the supplied goals up to the given limits;
//! they do not prove the universal properties.

use std::collections::{BTreeSet, VecDeque};

use serde::Serialize;

pub use crate::canon::EquivalenceWitness;
use crate::canon::{isomorphism, IdMode, ShapeSet};
use crate::explore::{Limits, Machine, State, StepCounts, StepKind, TraceStep};
use crate::omega_t::{Config, Wt};
use crate::omega_t_prime::{AConfig, WtPrime};
use crate::syntax::{goal_vars, print_goal, AnnotatedProgram, BodyItem, GoalItem, Program};
use crate::terms::Var;
use crate::unfold::clean;
use crate::{omega_t, omega_t_prime};

/// `σ ≡ σ′` between a reference configuration and an annotated one.
/// Goal atoms of `s` pair with annotated atoms whose identifiers are absent
/// from the annotated token store; stored atoms pair through an identifier
/// renaming that also maps one token store onto the other.
pub fn equiv_inter(s: &Config, t: &AConfig, keep: &BTreeSet<Var>) -> Option<EquivalenceWitness> {
    isomorphism(&s.shape(keep, false), &t.shape(keep, false), keep, IdMode::Inter)
}

/// `σ ≃ σ′`: both failed, or the same store, equivalent built-ins and the
/// same cleaned token store.
pub fn equiv_states(s: &AConfig, t: &AConfig) -> bool {
    if s.is_failed() || t.is_failed() {
        return s.is_failed() && t.is_failed();
    }
    let mut a = s.store.clone();
    let mut b = t.store.clone();
    a.sort();
    b.sort();
    if a != b {
        return false;
    }
    let none = BTreeSet::new();
    let entails = |x: &AConfig, y: &AConfig| x.builtin.entails_exists(&none, y.builtin.equations());
    let atoms = |x: &[BodyItem]| x.iter().filter_map(BodyItem::as_atom).cloned().collect::<Vec<_>>();
    entails(s, t) && entails(t, s) && clean(&atoms(&a), &s.tokens) == clean(&atoms(&b), &t.tokens)
}

/// `σ ≃′_V σ′`: equal up to renaming of variables outside `v`, renaming of
/// identifiers and cleaning of token stores.
pub fn equiv_mod_v<S: State>(s: &S, t: &S, v: &BTreeSet<Var>) -> bool {
    isomorphism(&s.shape(v, true), &t.shape(v, true), v, IdMode::Plain).is_some()
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Counterexample {
    pub goal: String,
    pub first: Vec<TraceStep>,
    pub second: Vec<TraceStep>,
    pub note: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub enum CheckOutcome {
    Holds,
    FailsWith(Counterexample),
    Unknown(String),
}

impl CheckOutcome {
    pub fn holds(&self) -> bool {
        matches!(self, CheckOutcome::Holds)
    }
}

/// Which derivations a termination check considers.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Scheduler {
    /// Solve as soon as possible, Apply only on built-in free states.
    Normal,
    /// Any single Solve or Apply at any time.
    Unrestricted,
}

struct Frame<S> {
    index: usize,
    succs: Vec<(TraceStep, S)>,
    next: usize,
    applies: usize,
}

fn successors<M: Machine>(m: &M, s: &M::State, scheduler: Scheduler) -> Vec<(TraceStep, M::State)> {
    if s.is_failed() {
        return Vec::new();
    }
    let mut out: Vec<(TraceStep, M::State)> = m
        .firings(s)
        .into_iter()
        .map(|f| {
            let step = f.step();
            let mut next = f.successor;
            if scheduler == Scheduler::Normal {
                m.saturate(&mut next, &mut StepCounts::default());
            }
            (step, next)
        })
        .collect();
    if scheduler == Scheduler::Unrestricted {
        out.extend(m.single_steps(s));
    }
    out
}

/// Depth-first search for a derivation that revisits a state up to
/// `≃′_{Fv(G)}`. A revisit on the current path is an infinite derivation.
pub fn check_termination<M: Machine>(m: &M, goals: &[Vec<GoalItem>], limits: Limits, scheduler: Scheduler) -> CheckOutcome {
    let mut unknown = Vec::new();
    for goal in goals {
        let keep = goal_vars(goal);
        let mut init = m.initial(goal);
        if scheduler == Scheduler::Normal {
            m.saturate(&mut init, &mut StepCounts::default());
        }
        let mut seen = ShapeSet::new(keep.clone());
        let mut on_path: Vec<bool> = Vec::new();
        let (index, _) = seen.insert(init.shape(&keep, true));
        on_path.push(true);
        let mut stack = vec![Frame { index, succs: successors(m, &init, scheduler), next: 0, applies: 0 }];
        let mut path: Vec<TraceStep> = Vec::new();
        let mut cut = false;
        while let Some(top) = stack.last_mut() {
            if top.next == top.succs.len() {
                on_path[top.index] = false;
                stack.pop();
                path.pop();
                continue;
            }
            let (step, next) = top.succs[top.next].clone();
            top.next += 1;
            let applies = top.applies + usize::from(step.kind == StepKind::Apply);
            let (index, new) = seen.insert(next.shape(&keep, true));
            if !new {
                if on_path[index] {
                    let at = stack.iter().position(|f| f.index == index).expect("state on path");
                    let mut cycle: Vec<TraceStep> = path[at..].to_vec();
                    cycle.push(step);
                    let loop_applies = cycle.iter().filter(|s| s.kind == StepKind::Apply).count();
                    return CheckOutcome::FailsWith(Counterexample {
                        goal: print_goal(goal),
                        first: path[..at].to_vec(),
                        second: cycle,
                        note: format!("state repeats after {loop_applies} Apply steps"),
                    });
                }
                continue;
            }
            on_path.push(false);
            if seen.len() > limits.max_states {
                unknown.push(format!("{}: more than {} states", print_goal(goal), limits.max_states));
                cut = true;
                break;
            }
            if applies > limits.max_depth {
                cut = true;
                continue;
            }
            on_path[index] = true;
            let succs = successors(m, &next, scheduler);
            path.push(step);
            stack.push(Frame { index, succs, next: 0, applies });
        }
        if cut && unknown.last().is_none_or(|u| !u.starts_with(&print_goal(goal))) {
            unknown.push(format!("{}: depth {} reached", print_goal(goal), limits.max_depth));
        }
    }
    if unknown.is_empty() {
        CheckOutcome::Holds
    } else {
        CheckOutcome::Unknown(unknown.join("; "))
    }
}

pub fn check_normal_termination<M: Machine>(m: &M, goals: &[Vec<GoalItem>], limits: Limits) -> CheckOutcome {
    check_termination(m, goals, limits, Scheduler::Normal)
}

/// All final states of normal derivations must agree up to `≃′_{Fv(G)}`.
/// Meaningful for goals on which normal termination holds.
pub fn check_normal_confluence<M: Machine>(m: &M, goals: &[Vec<GoalItem>], limits: Limits) -> CheckOutcome {
    let mut unknown = Vec::new();
    for goal in goals {
        let e = crate::explore::explore(m, goal, limits);
        if e.truncated {
            unknown.push(format!("{}: exploration truncated", print_goal(goal)));
            continue;
        }
        let Some(first) = e.finals.first() else { continue };
        let reference = first.state.shape(&e.keep, true);
        for other in &e.finals[1..] {
            let shape = other.state.shape(&e.keep, true);
            if isomorphism(&reference, &shape, &e.keep, IdMode::Plain).is_none() {
                let a = first.state.answer(&e.keep).render(&e.keep);
                let b = other.state.answer(&e.keep).render(&e.keep);
                return CheckOutcome::FailsWith(Counterexample {
                    goal: print_goal(goal),
                    first: first.trace.clone(),
                    second: other.trace.clone(),
                    note: format!("final states differ: {a} vs {b}"),
                });
            }
        }
    }
    if unknown.is_empty() {
        CheckOutcome::Holds
    } else {
        CheckOutcome::Unknown(unknown.join("; "))
    }
}

/// A program under one of the two semantics.
#[derive(Clone, Copy)]
pub enum Target<'a> {
    Wt(&'a Program),
    WtPrime(&'a AnnotatedProgram),
}

impl Target<'_> {
    pub fn qualified_answers(&self, goal: &[GoalItem], limits: Limits) -> crate::explore::QaResult {
        match self {
            Target::Wt(p) => omega_t::qualified_answers(p, goal, limits),
            Target::WtPrime(p) => omega_t_prime::qualified_answers(p, goal, limits),
        }
    }

    pub fn normal_termination(&self, goals: &[Vec<GoalItem>], limits: Limits) -> CheckOutcome {
        match self {
            Target::Wt(p) => check_normal_termination(&Wt(p), goals, limits),
            Target::WtPrime(p) => check_normal_termination(&WtPrime(p), goals, limits),
        }
    }

    pub fn normal_confluence(&self, goals: &[Vec<GoalItem>], limits: Limits) -> CheckOutcome {
        match self {
            Target::Wt(p) => check_normal_confluence(&Wt(p), goals, limits),
            Target::WtPrime(p) => check_normal_confluence(&WtPrime(p), goals, limits),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum DiffVerdict {
    Equal,
    Differ,
    Unknown,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct GoalDiff {
    pub goal: String,
    pub verdict: DiffVerdict,
    pub left: Vec<String>,
    pub right: Vec<String>,
    pub only_left: Vec<String>,
    pub only_right: Vec<String>,
}

/// Compares the answer sets of two programs goal by goal.
pub fn diff_qa(left: Target, right: Target, goals: &[Vec<GoalItem>], limits: Limits) -> Vec<GoalDiff> {
    goals
        .iter()
        .map(|goal| {
            let a = left.qualified_answers(goal, limits);
            let b = right.qualified_answers(goal, limits);
            let keep = goal_vars(goal);
            let render = |xs: Vec<&crate::answer::QualifiedAnswer>| {
                let mut v: Vec<String> = xs.into_iter().map(|q| q.render(&keep)).collect();
                v.sort();
                v
            };
            let only_left = render(a.answers.difference(&b.answers));
            let only_right = render(b.answers.difference(&a.answers));
            let verdict = if a.truncated || b.truncated {
                DiffVerdict::Unknown
            } else if only_left.is_empty() && only_right.is_empty() {
                DiffVerdict::Equal
            } else {
                DiffVerdict::Differ
            };
            GoalDiff { goal: print_goal(goal), verdict, left: a.answers.lines(), right: b.answers.lines(), only_left, only_right }
        })
        .collect()
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct LockstepReport {
    pub pairs: usize,
    pub finals: usize,
    pub truncated: bool,
    pub mismatches: Vec<String>,
}

impl LockstepReport {
    pub fn agrees(&self) -> bool {
        self.mismatches.is_empty() && !self.truncated
    }
}

struct Pair {
    s: Config,
    t: AConfig,
    cs: StepCounts,
    ct: StepCounts,
    trace: Vec<TraceStep>,
}

/// Runs every normal derivation of `P` next to the matching derivation of
/// `Ann(P)`, checking `≡` and equal Solve and Apply counts after every
/// macro step.
pub fn lockstep(program: &Program, goal: &[GoalItem], limits: Limits) -> LockstepReport {
    let annotated = crate::syntax::annotate(program);
    let (wt, wtp) = (Wt(program), WtPrime(&annotated));
    let keep = goal_vars(goal);
    let mut report = LockstepReport::default();
    let mut first = Pair {
        s: wt.initial(goal),
        t: wtp.initial(goal),
        cs: StepCounts::default(),
        ct: StepCounts::default(),
        trace: Vec::new(),
    };
    if equiv_inter(&first.s, &first.t, &keep).is_none() {
        report.mismatches.push("initial states are not equivalent".into());
    }
    wt.saturate(&mut first.s, &mut first.cs);
    wtp.saturate(&mut first.t, &mut first.ct);
    let mut seen = ShapeSet::new(keep.clone());
    seen.insert(first.s.shape(&keep, true));
    let mut queue = VecDeque::from([first]);
    while let Some(p) = queue.pop_front() {
        report.pairs += 1;
        let at = || p.trace.iter().map(|s| s.to_string()).collect::<Vec<_>>().join(" ");
        let Some(w) = equiv_inter(&p.s, &p.t, &keep) else {
            report.mismatches.push(format!("after [{}]: states are not equivalent", at()));
            continue;
        };
        if p.cs.solve != p.ct.solve || p.cs.apply != p.ct.apply {
            report.mismatches.push(format!("after [{}]: counts {:?} vs {:?}", at(), p.cs, p.ct));
        }
        let fs = wt.firings(&p.s);
        let mut ft = wtp.firings(&p.t);
        if fs.is_empty() && ft.is_empty() {
            report.finals += 1;
            continue;
        }
        if fs.len() != ft.len() {
            report.mismatches.push(format!("after [{}]: {} vs {} applicable rules", at(), fs.len(), ft.len()));
            continue;
        }
        if p.trace.len() >= limits.max_depth {
            report.truncated = true;
            continue;
        }
        for f in fs {
            let mapped: Vec<u64> = f.ids().iter().map(|i| w.ids.get(i).copied().unwrap_or(0)).collect();
            let Some(k) = ft.iter().position(|g| g.rule_index == f.rule_index && g.ids() == mapped) else {
                report.mismatches.push(format!("after [{}]: no partner for {}", at(), f.step()));
                continue;
            };
            let g = ft.swap_remove(k);
            let mut next = Pair { trace: p.trace.clone(), s: f.successor.clone(), t: g.successor, cs: p.cs, ct: p.ct };
            next.trace.push(f.step());
            next.cs.apply += 1;
            next.ct.apply += 1;
            wt.saturate(&mut next.s, &mut next.cs);
            wtp.saturate(&mut next.t, &mut next.ct);
            if !seen.insert(next.s.shape(&keep, true)).1 {
                continue;
            }
            if seen.len() > limits.max_states {
                report.truncated = true;
                return report;
            }
            queue.push_back(next);
        }
    }
    report
}
