//! When may a rule be replaced by its unfolded versions: the `U⁺` and `U#`
//! sets, the safe and weak-safe conditions, and the transformation driver.

use std::collections::BTreeSet;

use serde::Serialize;
use thiserror::Error;

use crate::builtins::{Builtin, BuiltinStore};
use crate::canon::rules_equivalent;
use crate::explore::{head_assignments, head_equations};
use crate::syntax::{AnnotatedProgram, AnnotatedRule, Atom, IdentifiedAtom, Token};
use crate::unfold::{enum_unfold_sites, rename_away, unf_all};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Verdict {
    Safe,
    WeakSafe,
    Unsafe,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Mode {
    Safe,
    Weak,
}

/// A rule that unfolds `r` together with the body identifiers it uses.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct UPlusEntry {
    pub rule: String,
    pub rule_index: usize,
    pub ids: Vec<u64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum SharpClause {
    /// Fires on body atoms only under a stronger run-time store.
    A,
    /// Fires on part of the body plus atoms from elsewhere.
    B,
}

/// A rule that may fire on `r`'s body at run time without being covered by
/// an unfolding.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct USharpEntry {
    pub rule: String,
    pub rule_index: usize,
    pub clause: SharpClause,
    pub ids: Vec<u64>,
    /// Head positions of the flagged rule that the ids occupy.
    pub head_positions: Vec<usize>,
    /// Solved form of `D ∧ head equations ∧ D′` showing satisfiability.
    pub witness: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct GuardCheck {
    pub unfolded: String,
    pub equivalent: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ReplacementReport {
    pub rule: String,
    pub rule_index: usize,
    pub mode: Mode,
    pub verdict: Verdict,
    pub u_plus: Vec<UPlusEntry>,
    pub u_sharp: Vec<USharpEntry>,
    pub guard_checks: Vec<GuardCheck>,
    pub reasons: Vec<String>,
}

pub fn u_plus(program: &AnnotatedProgram, r: &AnnotatedRule) -> Vec<UPlusEntry> {
    enum_unfold_sites(program, r)
        .into_iter()
        .map(|s| UPlusEntry { rule: s.unfolder.name.to_string(), rule_index: s.unfolder_index, ids: s.ids() })
        .collect()
}

/// Clause (a) and (b) of the partial-unfolding set. The existential over
/// run-time stores `C′` reduces to satisfiability of
/// `D ∧ head equations ∧ D′`, since `C′` may constrain every variable
/// outside the flagged rule.
pub fn u_sharp(program: &AnnotatedProgram, r: &AnnotatedRule) -> Vec<USharpEntry> {
    let plus = u_plus(program, r);
    let d = BuiltinStore::from_builtins(&r.guard);
    let body: Vec<&IdentifiedAtom> = r.body_atoms().collect();
    let atoms: Vec<&Atom> = body.iter().map(|a| &a.atom).collect();
    let mut out = Vec::new();
    let witness = |heads: &[&Atom], assignment: &[usize], guard: &[Builtin]| {
        let mut eqs = head_equations(&atoms, heads, assignment);
        eqs.extend(guard.iter().cloned());
        let s = d.conjoin(&eqs);
        (!s.is_false()).then(|| s.solved().map(|x| x.to_string()).unwrap_or_default())
    };
    for (vi, v) in program.rules.iter().enumerate() {
        let v = rename_away(v, &r.vars());
        let heads: Vec<&Atom> = v.heads().collect();
        for assignment in head_assignments(&atoms, &heads) {
            let ids: Vec<u64> = assignment.iter().map(|&i| body[i].id).collect();
            if r.tokens.contains(&Token { rule: v.name.clone(), ids: ids.clone() }) {
                continue;
            }
            if plus.iter().any(|e| e.rule_index == vi && e.ids == ids) {
                continue;
            }
            if let Some(w) = witness(&heads, &assignment, &v.guard) {
                out.push(USharpEntry {
                    rule: v.name.to_string(),
                    rule_index: vi,
                    clause: SharpClause::A,
                    ids,
                    head_positions: (0..heads.len()).collect(),
                    witness: w,
                });
                break;
            }
        }
        let n = heads.len();
        'b: for mask in 1..(1u32 << n).saturating_sub(1) {
            let positions: Vec<usize> = (0..n).filter(|k| mask & (1 << k) != 0).collect();
            let sub: Vec<&Atom> = positions.iter().map(|&k| heads[k]).collect();
            for assignment in head_assignments(&atoms, &sub) {
                if let Some(w) = witness(&sub, &assignment, &v.guard) {
                    out.push(USharpEntry {
                        rule: v.name.to_string(),
                        rule_index: vi,
                        clause: SharpClause::B,
                        ids: assignment.iter().map(|&i| body[i].id).collect(),
                        head_positions: positions,
                        witness: w,
                    });
                    break 'b;
                }
            }
        }
    }
    out
}

/// `CT ⊨ D ↔ D′` for conjunctions of equations.
pub fn guards_equivalent(d: &[Builtin], d2: &[Builtin]) -> bool {
    let a = BuiltinStore::from_builtins(d);
    let b = BuiltinStore::from_builtins(d2);
    a.entails_exists(&BTreeSet::new(), d2) && b.entails_exists(&BTreeSet::new(), d)
}

fn report(program: &AnnotatedProgram, index: usize, mode: Mode) -> ReplacementReport {
    let r = &program.rules[index];
    let u_plus = u_plus(program, r);
    let u_sharp = u_sharp(program, r);
    let guard_checks: Vec<GuardCheck> = unf_all(program, r)
        .iter()
        .map(|u| GuardCheck { unfolded: u.to_string(), equivalent: guards_equivalent(&r.guard, &u.guard) })
        .collect();
    let mut reasons = Vec::new();
    for e in &u_sharp {
        reasons.push(format!("{} may fire on part of the body (clause {:?}, ids {:?})", e.rule, e.clause, e.ids));
    }
    if u_plus.is_empty() {
        reasons.push("no rule unfolds the body".into());
    }
    for g in guard_checks.iter().filter(|g| !g.equivalent) {
        reasons.push(format!("guard changes in {}", g.unfolded));
    }
    let safe = u_sharp.is_empty() && !u_plus.is_empty() && guard_checks.iter().all(|g| g.equivalent);
    let weak = guard_checks.iter().any(|g| g.equivalent);
    let verdict = match mode {
        Mode::Safe if safe => Verdict::Safe,
        Mode::Weak if weak => Verdict::WeakSafe,
        _ => Verdict::Unsafe,
    };
    if mode == Mode::Weak && weak {
        reasons.retain(|r| !r.starts_with("guard changes"));
    }
    ReplacementReport { rule: r.name.to_string(), rule_index: index, mode, verdict, u_plus, u_sharp, guard_checks, reasons }
}

/// Checks conditions i–iii of safe replacement for the rule at `index`.
pub fn can_safely_replace(program: &AnnotatedProgram, index: usize) -> ReplacementReport {
    report(program, index, Mode::Safe)
}

/// Checks whether some unfolded version keeps the guard. Every safe rule is
/// also weakly replaceable.
pub fn can_weakly_replace(program: &AnnotatedProgram, index: usize) -> ReplacementReport {
    report(program, index, Mode::Weak)
}

impl ReplacementReport {
    pub fn permits(&self, mode: Mode) -> bool {
        match mode {
            Mode::Safe => self.verdict == Verdict::Safe,
            Mode::Weak => self.verdict != Verdict::Unsafe,
        }
    }
}

#[derive(Debug, Error)]
pub enum ReplaceError {
    #[error("no rule at position {0}")]
    NoSuchRule(usize),
    #[error("rule {rule} cannot be replaced in {mode:?} mode: {reasons}")]
    Refused { rule: String, mode: Mode, reasons: String },
}

pub struct ReplaceOutcome {
    pub program: AnnotatedProgram,
    pub report: ReplacementReport,
    pub warnings: Vec<String>,
}

/// `(P \ {r}) ∪ Unf_P(r)`, with the unfolded rules placed where `r` was.
///
/// `certified` says whether the program has been checked normal terminating
/// and normal confluent, which weak replacement relies on.
pub fn replace_step(
    program: &AnnotatedProgram,
    index: usize,
    mode: Mode,
    force: bool,
    certified: bool,
) -> Result<ReplaceOutcome, ReplaceError> {
    let r = program.rules.get(index).ok_or(ReplaceError::NoSuchRule(index))?;
    let report = report(program, index, mode);
    let mut warnings = Vec::new();
    if !report.permits(mode) {
        if !force {
            return Err(ReplaceError::Refused { rule: report.rule.clone(), mode, reasons: report.reasons.join("; ") });
        }
        warnings.push(format!("forced replacement of {} ({:?})", report.rule, report.verdict));
    }
    if mode == Mode::Weak && !certified {
        warnings.push("weak replacement without a termination and confluence certificate".into());
    }
    let mut rules = program.rules[..index].to_vec();
    rules.extend(unf_all(program, r));
    rules.extend_from_slice(&program.rules[index + 1..]);
    Ok(ReplaceOutcome { program: AnnotatedProgram { rules }, report, warnings })
}

/// The trail `P₀, ..., Pₙ` of a transformation sequence.
pub struct Sequence {
    pub programs: Vec<AnnotatedProgram>,
    pub reports: Vec<ReplacementReport>,
    pub warnings: Vec<String>,
}

fn same_program(a: &AnnotatedProgram, b: &AnnotatedProgram) -> bool {
    a.rules.len() == b.rules.len() && a.rules.iter().zip(&b.rules).all(|(x, y)| rules_equivalent(x, y))
}

/// Replaces the first permitted rule until none is left, the program stops
/// changing, or `max_steps` is reached. In weak mode `certify` is asked
/// about every intermediate program.
pub fn replace_sequence(
    program: &AnnotatedProgram,
    mode: Mode,
    max_steps: usize,
    mut certify: impl FnMut(&AnnotatedProgram) -> bool,
) -> Sequence {
    let mut programs = vec![program.clone()];
    let mut reports = Vec::new();
    let mut warnings = Vec::new();
    for _ in 0..max_steps {
        let current = programs.last().expect("non-empty trail");
        let Some(index) = (0..current.rules.len()).find(|&i| report(current, i, mode).permits(mode)) else {
            break;
        };
        let certified = mode == Mode::Safe || certify(current);
        let Ok(step) = replace_step(current, index, mode, false, certified) else { break };
        if same_program(current, &step.program) {
            break;
        }
        warnings.extend(step.warnings);
        reports.push(step.report);
        programs.push(step.program);
    }
    Sequence { programs, reports, warnings }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::syntax::parse_program;

    fn ann(text: &str) -> AnnotatedProgram {
        parse_program(text).unwrap().into_annotated()
    }

    const MATCHING: &str = "r1 @ g(X,Y) <=> f(X,Z).\nr2 @ f(a,W) <=> W = b.\nr3 @ f(T,J) <=> J = d.";
    const UNICATESTA: &str = "r @ p(Y) <=> q(Y), h(b).\nrp @ q(Z), h(V) <=> Z = V.";
    const MAU: &str = "r @ p(Y) <=> q(Y).\nrp @ q(Z) <=> Z = a | true.";
    const CHAIN: &str = "r @ p(X) <=> q(X).\nv @ q(Y) <=> s(Y).";

    #[test]
    fn u_plus_examples() {
        let p = ann(MAU);
        assert_eq!(u_plus(&p, &p.rules[0]), vec![UPlusEntry { rule: "rp".into(), rule_index: 1, ids: vec![1] }]);
        let p = ann(UNICATESTA);
        assert_eq!(u_plus(&p, &p.rules[0]), vec![UPlusEntry { rule: "rp".into(), rule_index: 1, ids: vec![1, 2] }]);
        let p = ann(MATCHING);
        assert_eq!(u_plus(&p, &p.rules[0]), vec![UPlusEntry { rule: "r3".into(), rule_index: 2, ids: vec![1] }]);
    }

    #[test]
    fn u_sharp_examples() {
        let p = ann(MATCHING);
        let s = u_sharp(&p, &p.rules[0]);
        assert_eq!(s.len(), 1);
        assert_eq!((s[0].rule.as_str(), s[0].clause), ("r2", SharpClause::A));
        let p = ann(UNICATESTA);
        let s = u_sharp(&p, &p.rules[0]);
        assert_eq!(s.len(), 1);
        assert_eq!((s[0].rule.as_str(), s[0].clause), ("rp", SharpClause::B));
        let p = ann(MAU);
        assert!(u_sharp(&p, &p.rules[0]).is_empty());
    }

    #[test]
    fn verdicts() {
        let p = ann(CHAIN);
        assert_eq!(can_safely_replace(&p, 0).verdict, Verdict::Safe);
        assert_eq!(can_weakly_replace(&p, 0).verdict, Verdict::WeakSafe);
        let p = ann(MAU);
        let rep = can_safely_replace(&p, 0);
        assert_eq!(rep.verdict, Verdict::Unsafe);
        assert!(rep.reasons.iter().any(|r| r.starts_with("guard changes")));
        assert!(!can_weakly_replace(&p, 0).permits(Mode::Weak));
        let p = ann(UNICATESTA);
        assert_eq!(can_safely_replace(&p, 0).verdict, Verdict::Unsafe);
        assert_eq!(can_weakly_replace(&p, 0).verdict, Verdict::WeakSafe);
    }

    #[test]
    fn replacing_chain_and_refusing_mau() {
        let p = ann(CHAIN);
        let out = replace_step(&p, 0, Mode::Safe, false, false).unwrap();
        let expected = ann("r @ p(X) <=> s(Y)#2, X = Y.\nv @ q(Y) <=> s(Y)#1.");
        assert!(same_program(&out.program, &expected));
        let p = ann(MAU);
        assert!(matches!(replace_step(&p, 0, Mode::Safe, false, false), Err(ReplaceError::Refused { .. })));
        let forced = replace_step(&p, 0, Mode::Safe, true, false).unwrap();
        assert_eq!(forced.warnings.len(), 1);
        assert_eq!(forced.program.rules[0].guard.len(), 1);
    }

    #[test]
    fn sequence_stops_at_fixpoint() {
        let p = ann(CHAIN);
        let seq = replace_sequence(&p, Mode::Safe, 10, |_| true);
        assert_eq!(seq.programs.len(), 2);
        let loopy = ann("r @ p <=> p.");
        let seq = replace_sequence(&loopy, Mode::Safe, 10, |_| true);
        assert_eq!(seq.programs.len(), 1);
    }
}
