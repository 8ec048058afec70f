mod common;

use std::collections::{BTreeMap, BTreeSet};

use chr_unfold::analysis::{check_normal_confluence, equiv_mod_v, CheckOutcome};
use chr_unfold::builtins::{Builtin, BuiltinStore};
use chr_unfold::explore::{Limits, Machine, StepCounts};
use chr_unfold::omega_t_prime::{qualified_answers, AConfig, WtPrime};
use chr_unfold::replace::{u_plus, u_sharp, SharpClause};
use chr_unfold::syntax::{parse_program, BodyItem, IdentifiedAtom, ParsedProgram};
use chr_unfold::terms::{unify, Substitution, Term, Var};
use common::*;
use proptest::prelude::*;

fn pick(options: &'static [&'static str]) -> impl Strategy<Value = String> {
    prop::sample::select(options).prop_map(str::to_string)
}

fn goal_text() -> impl Strategy<Value = String> {
    let term = || pick(&["X", "Y", "Z", "a", "b", "f(X)", "f(a)"]);
    let item = prop_oneof![
        3 => (pick(&["p", "q", "h", "r", "s"]), term()).prop_map(|(p, t)| format!("{p}({t})")),
        1 => (term(), term()).prop_map(|(l, r)| format!("{l} = {r}")),
    ];
    prop::collection::vec(item, 1..4).prop_map(|v| v.join(", "))
}

fn saturated(text: &str) -> AConfig {
    let mut s = AConfig::initial(&goal(text));
    let empty = Default::default();
    WtPrime(&empty).saturate(&mut s, &mut StepCounts::default());
    s
}

/// Renames every variable outside `keep` and shifts every identifier.
fn disguise(s: &AConfig, keep: &BTreeSet<Var>, tag: &str, shift: u64) -> AConfig {
    let rename = |t: &Term| rename_term(t, keep, tag);
    let store = s
        .store
        .iter()
        .map(|b| match b.map_terms(&mut |t| rename(t)) {
            BodyItem::Atom(a) => BodyItem::Atom(IdentifiedAtom { atom: a.atom, id: a.id + shift }),
            other => other,
        })
        .collect();
    let eqs: Vec<Builtin> = s.builtin.equations().iter().map(|b| b.map_terms(&mut |t| rename(t))).collect();
    let builtin = if s.builtin.is_false() { BuiltinStore::False } else { BuiltinStore::from_builtins(&eqs) };
    let tokens = s.tokens.iter().map(|t| t.shifted(shift)).collect();
    AConfig { store, builtin, tokens, counter: s.counter + shift }
}

fn rename_term(t: &Term, keep: &BTreeSet<Var>, tag: &str) -> Term {
    let mut map = BTreeMap::new();
    for v in t.vars().into_iter().filter(|v| !keep.contains(v)) {
        let renamed = Var::new(&format!("{}{tag}", v.name()));
        map.insert(v, renamed);
    }
    t.rename(&map)
}

fn universe() -> Vec<Term> {
    let (a, b) = (Term::constant("a"), Term::constant("b"));
    let fa = Term::app("f", vec![a.clone()]);
    let fb = Term::app("f", vec![b.clone()]);
    vec![a.clone(), b.clone(), Term::app("f", vec![fa.clone()]), Term::app("f", vec![fb.clone()]), fa, fb]
}

fn groundings(vars: &BTreeSet<Var>, universe: &[Term]) -> Vec<Substitution> {
    let mut out: Vec<Vec<(Var, Term)>> = vec![Vec::new()];
    for v in vars {
        out = out
            .into_iter()
            .flat_map(|g| {
                universe.iter().map(move |t| {
                    let mut g = g.clone();
                    g.push((v.clone(), t.clone()));
                    g
                })
            })
            .collect();
    }
    out.into_iter().map(|g| Substitution::normalized(g).expect("ground")).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(96))]

    #[test]
    fn equiv_mod_v_is_an_equivalence(text in goal_text()) {
        let s = saturated(&text);
        let keep: BTreeSet<Var> = [Var::new("X")].into();
        let t = disguise(&s, &keep, "a", 5);
        let u = disguise(&t, &keep, "b", 11);
        prop_assert!(equiv_mod_v(&s, &s, &keep));
        prop_assert!(equiv_mod_v(&s, &t, &keep));
        prop_assert!(equiv_mod_v(&t, &s, &keep));
        prop_assert!(equiv_mod_v(&t, &u, &keep) && equiv_mod_v(&s, &u, &keep));
        let mut bigger = s.clone();
        bigger.store.push(BodyItem::Atom(IdentifiedAtom { atom: goal("extra").remove(0).into_atom(), id: 99 }));
        prop_assert_eq!(equiv_mod_v(&s, &bigger, &keep), s.is_failed());
    }

    #[test]
    fn confluence_implies_one_answer(text in goal_text(), which in 0usize..5) {
        let name = ["mau", "chain", "unicatesta", "guarded_cycle", "fail"][which];
        let (p, _) = load_annotated(name);
        let g = goal(&text);
        let limits = Limits { max_depth: 10, max_states: 3000 };
        let qa = qualified_answers(&p, &g, limits);
        if check_normal_confluence(&WtPrime(&p), &[g], limits) == CheckOutcome::Holds && !qa.truncated {
            prop_assert_eq!(qa.answers.len(), 1, "{}: {:?}", name, qa.answers.lines());
        }
    }

    #[test]
    fn clause_a_agrees_with_ground_instances(
        s1 in pick(&["X", "Z", "a", "b", "f(X)", "f(Z)"]),
        s2 in pick(&["X", "Z", "a", "b", "f(a)"]),
        t1 in pick(&["W", "a", "f(W)", "f(U)"]),
        t2 in pick(&["W", "U", "b", "f(a)"]),
        guard in pick(&["", "W = a |", "U = b |", "W = U |", "W = f(U) |"]),
    ) {
        let text = format!("r @ g(X) <=> f({s1},{s2}).\nv @ f({t1},{t2}) <=> {guard} true.");
        let p = ann(&text);
        let r = &p.rules[0];
        let covered = u_plus(&p, r).iter().any(|e| e.rule == "v");
        let flagged = u_sharp(&p, r).iter().any(|e| e.rule == "v" && e.clause == SharpClause::A);
        prop_assert!(!(covered && flagged));

        let body = &r.body_atoms().next().unwrap().atom;
        let v = &p.rules[1];
        let head = v.heads().next().unwrap();
        let mut vars = r.vars();
        vars.extend(v.vars());
        let fires = groundings(&vars, &universe()).iter().any(|g| {
            body.apply(g) == head.apply(g)
                && v.guard.iter().all(|b| match b.apply(g) {
                    Builtin::Eq(l, r) => l == r,
                    _ => true,
                })
        });
        prop_assert_eq!(fires, covered || flagged, "{}", text);
    }

    #[test]
    fn printing_then_parsing_is_stable(
        heads in prop::collection::vec(pick(&["p(X)", "q(X,Y)", "h", "s(f(Y))"]), 1..3),
        kept in prop::collection::vec(pick(&["k(X)", "h"]), 0..2),
        guard in pick(&["", "X = a |", "X = Y, Y = f(Z) |"]),
        body in prop::collection::vec(pick(&["q(Y)", "X = b", "s(Z)", "true"]), 1..3),
        arrow in pick(&["<=>", "==>"]),
    ) {
        let head = if kept.is_empty() || arrow == "==>" {
            heads.join(", ")
        } else {
            format!("{} \\ {}", kept.join(", "), heads.join(", "))
        };
        let text = format!("r @ {head} {arrow} {guard} {}.", body.join(", "));
        let first = parse_program(&text).expect("generated rule parses");
        let printed = first.to_string();
        let second = parse_program(&printed).expect("printed rule parses");
        prop_assert_eq!(&first, &second);
        prop_assert_eq!(printed, second.to_string());
        let ParsedProgram::Plain(p) = first else { panic!("plain rule expected") };
        let annotated = chr_unfold::syntax::annotate(&p).to_string();
        prop_assert_eq!(parse_program(&annotated).unwrap().to_string(), annotated);
    }

    #[test]
    fn unifiers_are_most_general(
        l in pick(&["X", "f(X)", "g(X,Y)", "g(a,Z)", "f(f(Y))", "a"]),
        r in pick(&["Y", "f(a)", "g(Z,X)", "g(Y,f(Y))", "f(Z)", "b"]),
    ) {
        let l = goal(&format!("t({l})")).remove(0).into_atom().args.remove(0);
        let r = goal(&format!("t({r})")).remove(0).into_atom().args.remove(0);
        let mut vars = l.vars();
        vars.extend(r.vars());
        let ground: Vec<Substitution> =
            groundings(&vars, &universe()).into_iter().filter(|g| g.apply(&l) == g.apply(&r)).collect();
        match unify(&l, &r) {
            Ok(sigma) => {
                prop_assert_eq!(sigma.apply(&l), sigma.apply(&r));
                prop_assert_eq!(sigma.apply(&sigma.apply(&l)), sigma.apply(&l));
                for g in &ground {
                    for x in &vars {
                        let direct = g.apply(&Term::Var(x.clone()));
                        prop_assert_eq!(g.apply(&sigma.apply(&Term::Var(x.clone()))), direct);
                    }
                }
            }
            Err(_) => prop_assert!(ground.is_empty()),
        }
    }
}

trait OwnedAtom {
    fn into_atom(self) -> chr_unfold::syntax::Atom;
}

impl OwnedAtom for chr_unfold::syntax::GoalItem {
    fn into_atom(self) -> chr_unfold::syntax::Atom {
        match self {
            chr_unfold::syntax::GoalItem::Atom(a) => a,
            chr_unfold::syntax::GoalItem::Builtin(b) => panic!("atom expected, got {b}"),
        }
    }
}
