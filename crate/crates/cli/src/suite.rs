//! Goal suites: given on the command line, read from a file, or drawn from
//! the program's constraint signature with a seeded generator.

use std::collections::BTreeSet;
use std::path::Path;

use anyhow::{Context, Result};
use chr_unfold::syntax::{parse_goal, parse_goals, AnnotatedProgram, Atom, Goal, GoalItem};
use chr_unfold::terms::Term;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn explicit(inline: &[String], file: Option<&Path>) -> Result<Vec<Goal>> {
    let mut out = Vec::new();
    for g in inline {
        out.push(parse_goal(g).with_context(|| format!("goal {g:?}"))?);
    }
    if let Some(path) = file {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        out.extend(parse_goals(&text).with_context(|| format!("goals in {}", path.display()))?);
    }
    Ok(out)
}

fn constants(t: &Term, out: &mut BTreeSet<String>) {
    if let Term::App(f, args) = t {
        if args.is_empty() {
            out.insert(f.to_string());
        }
        args.iter().for_each(|a| constants(a, out));
    }
}

/// `count` goals of one to three atoms over the predicates and constants
/// that occur in `program`. The same seed always yields the same suite.
pub fn random(program: &AnnotatedProgram, seed: u64, count: usize) -> Vec<Goal> {
    let mut preds = BTreeSet::new();
    let mut consts = BTreeSet::new();
    for r in &program.rules {
        for a in r.heads().chain(r.body_atoms().map(|a| &a.atom)) {
            preds.insert((a.pred.to_string(), a.arity()));
            a.args.iter().for_each(|t| constants(t, &mut consts));
        }
    }
    if preds.is_empty() {
        return Vec::new();
    }
    if consts.is_empty() {
        consts.insert("a".to_string());
    }
    let preds: Vec<_> = preds.into_iter().collect();
    let consts: Vec<_> = consts.into_iter().collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            (0..rng.gen_range(1..=3))
                .map(|_| {
                    let (pred, arity) = &preds[rng.gen_range(0..preds.len())];
                    let args = (0..*arity)
                        .map(|_| {
                            if rng.gen_bool(0.5) {
                                Term::var(["X", "Y", "Z"][rng.gen_range(0..3)])
                            } else {
                                Term::constant(&consts[rng.gen_range(0..consts.len())])
                            }
                        })
                        .collect();
                    GoalItem::Atom(Atom::new(pred, args))
                })
                .collect()
        })
        .collect()
}
