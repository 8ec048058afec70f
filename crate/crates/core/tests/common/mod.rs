#![allow(dead_code)]

use std::path::PathBuf;

use chr_unfold::explore::Limits;
use chr_unfold::syntax::{annotate, parse_goal, parse_goals, parse_program, AnnotatedProgram, Goal, ParsedProgram, Program};

/// Desk-scale budget shared by the corpus checks.
pub const LIMITS: Limits = Limits { max_depth: 12, max_states: 10_000 };

pub const CORPUS: &[&str] =
    &["gen_adam", "gen_adam_refined", "mau", "unicatesta", "matching", "matching_linked", "token", "guarded_cycle", "chain", "fail"];

pub fn corpus_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../corpus")
}

pub fn plain(text: &str) -> Program {
    match parse_program(text).expect("program parses") {
        ParsedProgram::Plain(p) => p,
        ParsedProgram::Annotated(_) => panic!("plain program expected"),
    }
}

pub fn ann(text: &str) -> AnnotatedProgram {
    parse_program(text).expect("program parses").into_annotated()
}

pub fn goal(text: &str) -> Goal {
    parse_goal(text).expect("goal parses")
}

pub fn load(name: &str) -> (Program, Vec<Goal>) {
    let dir = corpus_dir();
    let prog = std::fs::read_to_string(dir.join(format!("{name}.chr"))).expect("corpus program");
    let goals = std::fs::read_to_string(dir.join(format!("{name}.goals"))).expect("corpus goals");
    (plain(&prog), parse_goals(&goals).expect("goals parse"))
}

pub fn load_annotated(name: &str) -> (AnnotatedProgram, Vec<Goal>) {
    let (p, g) = load(name);
    (annotate(&p), g)
}
