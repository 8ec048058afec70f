//! Abstract syntax of plain and annotated programs, printing, and the
//! identifier assignment used by `Ann(P)` and the annotated semantics.

mod parser;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::Arc;

pub use parser::{parse_goal, parse_goals, parse_program, ParseError, ParseErrorKind};

use crate::builtins::Builtin;
use crate::terms::{Substitution, Symbol, Term, Var};

/// A user-defined (CHR) constraint.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub struct Atom {
    pub pred: Symbol,
    pub args: Vec<Term>,
}

impl Atom {
    pub fn new(pred: &str, args: Vec<Term>) -> Atom {
        Atom { pred: Arc::from(pred), args }
    }

    pub fn arity(&self) -> usize {
        self.args.len()
    }

    pub fn same_signature(&self, other: &Atom) -> bool {
        self.pred == other.pred && self.args.len() == other.args.len()
    }

    pub fn collect_vars(&self, out: &mut BTreeSet<Var>) {
        self.args.iter().for_each(|a| a.collect_vars(out));
    }

    pub fn map_terms(&self, f: &mut impl FnMut(&Term) -> Term) -> Atom {
        Atom { pred: self.pred.clone(), args: self.args.iter().map(f).collect() }
    }

    pub fn apply(&self, s: &Substitution) -> Atom {
        self.map_terms(&mut |t| s.apply(t))
    }

    pub fn rename(&self, map: &BTreeMap<Var, Var>) -> Atom {
        self.map_terms(&mut |t| t.rename(map))
    }

    pub fn to_term(&self) -> Term {
        Term::App(self.pred.clone(), self.args.clone())
    }
}

impl fmt::Display for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_term())
    }
}

/// `h#i`.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub struct IdentifiedAtom {
    pub atom: Atom,
    pub id: u64,
}

impl fmt::Display for IdentifiedAtom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}#{}", self.atom, self.id)
    }
}

/// Propagation-history record `r@i1,...,il`.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub struct Token {
    pub rule: Symbol,
    pub ids: Vec<u64>,
}

impl Token {
    pub fn new(rule: &str, ids: Vec<u64>) -> Token {
        Token { rule: Arc::from(rule), ids }
    }

    pub fn shifted(&self, n: u64) -> Token {
        Token { rule: self.rule.clone(), ids: self.ids.iter().map(|i| i + n).collect() }
    }
}

impl fmt::Display for Token {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}@", self.rule)?;
        for (k, i) in self.ids.iter().enumerate() {
            if k > 0 {
                f.write_str(",")?;
            }
            write!(f, "{i}")?;
        }
        Ok(())
    }
}

pub type TokenStore = BTreeSet<Token>;

/// Item of a plain goal or plain rule body.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub enum GoalItem {
    Atom(Atom),
    Builtin(Builtin),
}

/// Item of an identified goal, an annotated body, or the fused store of the
/// annotated semantics.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub enum BodyItem {
    Atom(IdentifiedAtom),
    Builtin(Builtin),
}

pub type Goal = Vec<GoalItem>;

impl fmt::Display for GoalItem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GoalItem::Atom(a) => write!(f, "{a}"),
            GoalItem::Builtin(b) => write!(f, "{b}"),
        }
    }
}

impl fmt::Display for BodyItem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BodyItem::Atom(a) => write!(f, "{a}"),
            BodyItem::Builtin(b) => write!(f, "{b}"),
        }
    }
}

impl GoalItem {
    pub fn collect_vars(&self, out: &mut BTreeSet<Var>) {
        match self {
            GoalItem::Atom(a) => a.collect_vars(out),
            GoalItem::Builtin(b) => b.collect_vars(out),
        }
    }

    pub fn map_terms(&self, f: &mut impl FnMut(&Term) -> Term) -> GoalItem {
        match self {
            GoalItem::Atom(a) => GoalItem::Atom(a.map_terms(f)),
            GoalItem::Builtin(b) => GoalItem::Builtin(b.map_terms(f)),
        }
    }
}

impl BodyItem {
    pub fn collect_vars(&self, out: &mut BTreeSet<Var>) {
        match self {
            BodyItem::Atom(a) => a.atom.collect_vars(out),
            BodyItem::Builtin(b) => b.collect_vars(out),
        }
    }

    pub fn map_terms(&self, f: &mut impl FnMut(&Term) -> Term) -> BodyItem {
        match self {
            BodyItem::Atom(a) => BodyItem::Atom(IdentifiedAtom { atom: a.atom.map_terms(f), id: a.id }),
            BodyItem::Builtin(b) => BodyItem::Builtin(b.map_terms(f)),
        }
    }

    pub fn as_atom(&self) -> Option<&IdentifiedAtom> {
        match self {
            BodyItem::Atom(a) => Some(a),
            BodyItem::Builtin(_) => None,
        }
    }

    pub fn as_builtin(&self) -> Option<&Builtin> {
        match self {
            BodyItem::Builtin(b) => Some(b),
            BodyItem::Atom(_) => None,
        }
    }
}

pub fn goal_vars(goal: &[GoalItem]) -> BTreeSet<Var> {
    let mut out = BTreeSet::new();
    goal.iter().for_each(|g| g.collect_vars(&mut out));
    out
}

/// Rule in simpagation normal form `name @ kept \ removed <=> guard | body`.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct Rule {
    pub name: Symbol,
    pub kept: Vec<Atom>,
    pub removed: Vec<Atom>,
    pub guard: Vec<Builtin>,
    pub body: Vec<GoalItem>,
}

#[derive(Clone, PartialEq, Eq, Debug)]
pub struct AnnotatedRule {
    pub name: Symbol,
    pub kept: Vec<Atom>,
    pub removed: Vec<Atom>,
    pub guard: Vec<Builtin>,
    pub body: Vec<BodyItem>,
    pub tokens: TokenStore,
}

impl Rule {
    pub fn heads(&self) -> impl Iterator<Item = &Atom> {
        self.kept.iter().chain(&self.removed)
    }

    pub fn vars(&self) -> BTreeSet<Var> {
        let mut out = BTreeSet::new();
        self.heads().for_each(|a| a.collect_vars(&mut out));
        self.guard.iter().for_each(|b| b.collect_vars(&mut out));
        self.body.iter().for_each(|b| b.collect_vars(&mut out));
        out
    }

    pub fn rename(&self, map: &BTreeMap<Var, Var>) -> Rule {
        let mut f = |t: &Term| t.rename(map);
        Rule {
            name: self.name.clone(),
            kept: self.kept.iter().map(|a| a.map_terms(&mut f)).collect(),
            removed: self.removed.iter().map(|a| a.map_terms(&mut f)).collect(),
            guard: self.guard.iter().map(|b| b.map_terms(&mut f)).collect(),
            body: self.body.iter().map(|b| b.map_terms(&mut f)).collect(),
        }
    }
}

impl AnnotatedRule {
    pub fn heads(&self) -> impl Iterator<Item = &Atom> {
        self.kept.iter().chain(&self.removed)
    }

    pub fn head_len(&self) -> usize {
        self.kept.len() + self.removed.len()
    }

    pub fn vars(&self) -> BTreeSet<Var> {
        let mut out = BTreeSet::new();
        self.heads().for_each(|a| a.collect_vars(&mut out));
        self.guard.iter().for_each(|b| b.collect_vars(&mut out));
        self.body.iter().for_each(|b| b.collect_vars(&mut out));
        out
    }

    pub fn head_vars(&self) -> BTreeSet<Var> {
        let mut out = BTreeSet::new();
        self.heads().for_each(|a| a.collect_vars(&mut out));
        out
    }

    pub fn body_atoms(&self) -> impl Iterator<Item = &IdentifiedAtom> {
        self.body.iter().filter_map(BodyItem::as_atom)
    }

    pub fn body_builtins(&self) -> impl Iterator<Item = &Builtin> {
        self.body.iter().filter_map(BodyItem::as_builtin)
    }

    /// Greatest identifier mentioned by the body or the local token store.
    pub fn max_id(&self) -> u64 {
        let body = self.body_atoms().map(|a| a.id);
        let tokens = self.tokens.iter().flat_map(|t| t.ids.iter().copied());
        body.chain(tokens).max().unwrap_or(0)
    }

    pub fn rename(&self, map: &BTreeMap<Var, Var>) -> AnnotatedRule {
        let mut f = |t: &Term| t.rename(map);
        AnnotatedRule {
            name: self.name.clone(),
            kept: self.kept.iter().map(|a| a.map_terms(&mut f)).collect(),
            removed: self.removed.iter().map(|a| a.map_terms(&mut f)).collect(),
            guard: self.guard.iter().map(|b| b.map_terms(&mut f)).collect(),
            body: self.body.iter().map(|b| b.map_terms(&mut f)).collect(),
            tokens: self.tokens.clone(),
        }
    }
}

#[derive(Clone, PartialEq, Eq, Debug, Default)]
pub struct Program {
    pub rules: Vec<Rule>,
}

#[derive(Clone, PartialEq, Eq, Debug, Default)]
pub struct AnnotatedProgram {
    pub rules: Vec<AnnotatedRule>,
}

#[derive(Clone, PartialEq, Eq, Debug)]
pub enum ParsedProgram {
    Plain(Program),
    Annotated(AnnotatedProgram),
}

impl ParsedProgram {
    /// The annotated view: `Ann(P)` for plain input, the program itself
    /// otherwise.
    pub fn into_annotated(self) -> AnnotatedProgram {
        match self {
            ParsedProgram::Plain(p) => annotate(&p),
            ParsedProgram::Annotated(p) => p,
        }
    }
}

impl Program {
    /// Checks the plain-program invariants (non-empty heads, unique names).
    pub fn new(rules: Vec<Rule>) -> Result<Program, ParseErrorKind> {
        let mut seen = BTreeSet::new();
        for r in &rules {
            if r.kept.is_empty() && r.removed.is_empty() {
                return Err(ParseErrorKind::EmptyHead);
            }
            if !seen.insert(r.name.clone()) {
                return Err(ParseErrorKind::DuplicateRuleName(r.name.to_string()));
            }
        }
        Ok(Program { rules })
    }

    pub fn rule(&self, name: &str) -> Option<&Rule> {
        self.rules.iter().find(|r| &*r.name == name)
    }
}

impl AnnotatedProgram {
    pub fn position(&self, name: &str) -> Option<usize> {
        self.rules.iter().position(|r| &*r.name == name)
    }
}

/// `I_n^{n+m}`: numbers the CHR atoms of `goal` with `n+1, ..., n+m` from
/// left to right and returns `m + n` alongside.
pub fn identify(goal: &[GoalItem], n: u64) -> (Vec<BodyItem>, u64) {
    let mut next = n;
    let items = goal
        .iter()
        .map(|g| match g {
            GoalItem::Atom(a) => {
                next += 1;
                BodyItem::Atom(IdentifiedAtom { atom: a.clone(), id: next })
            }
            GoalItem::Builtin(b) => BodyItem::Builtin(b.clone()),
        })
        .collect();
    (items, next)
}

pub fn annotate_rule(rule: &Rule) -> AnnotatedRule {
    AnnotatedRule {
        name: rule.name.clone(),
        kept: rule.kept.clone(),
        removed: rule.removed.clone(),
        guard: rule.guard.clone(),
        body: identify(&rule.body, 0).0,
        tokens: TokenStore::new(),
    }
}

/// `Ann(P)`.
pub fn annotate(program: &Program) -> AnnotatedProgram {
    AnnotatedProgram { rules: program.rules.iter().map(annotate_rule).collect() }
}

/// `Ann` over parser output; annotated input is refused.
pub fn annotate_parsed(parsed: ParsedProgram) -> Result<AnnotatedProgram, ParseErrorKind> {
    match parsed {
        ParsedProgram::Plain(p) => Ok(annotate(&p)),
        ParsedProgram::Annotated(_) => Err(ParseErrorKind::AlreadyAnnotated),
    }
}

fn write_list<T: fmt::Display>(f: &mut fmt::Formatter<'_>, items: &[T]) -> fmt::Result {
    for (i, it) in items.iter().enumerate() {
        if i > 0 {
            f.write_str(", ")?;
        }
        write!(f, "{it}")?;
    }
    Ok(())
}

fn write_head(f: &mut fmt::Formatter<'_>, name: &str, kept: &[Atom], removed: &[Atom]) -> fmt::Result {
    write!(f, "{name} @ ")?;
    match (kept.is_empty(), removed.is_empty()) {
        (_, true) => {
            write_list(f, kept)?;
            f.write_str(" ==> ")
        }
        (true, false) => {
            write_list(f, removed)?;
            f.write_str(" <=> ")
        }
        (false, false) => {
            write_list(f, kept)?;
            f.write_str(" \\ ")?;
            write_list(f, removed)?;
            f.write_str(" <=> ")
        }
    }
}

fn write_guard(f: &mut fmt::Formatter<'_>, guard: &[Builtin]) -> fmt::Result {
    let shown: Vec<&Builtin> = guard.iter().filter(|b| **b != Builtin::True).collect();
    if !shown.is_empty() {
        write_list(f, &shown)?;
        f.write_str(" | ")?;
    }
    Ok(())
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_head(f, &self.name, &self.kept, &self.removed)?;
        write_guard(f, &self.guard)?;
        if self.body.is_empty() {
            f.write_str("true")?;
        } else {
            write_list(f, &self.body)?;
        }
        f.write_str(".")
    }
}

impl fmt::Display for AnnotatedRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_head(f, &self.name, &self.kept, &self.removed)?;
        write_guard(f, &self.guard)?;
        if self.body.is_empty() {
            f.write_str("true")?;
        } else {
            write_list(f, &self.body)?;
        }
        if !self.tokens.is_empty() {
            f.write_str(" ; {")?;
            let tokens: Vec<&Token> = self.tokens.iter().collect();
            write_list(f, &tokens)?;
            f.write_str("}")?;
        }
        f.write_str(".")
    }
}

impl fmt::Display for Program {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.rules.iter().try_for_each(|r| writeln!(f, "{r}"))
    }
}

impl fmt::Display for AnnotatedProgram {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.rules.iter().try_for_each(|r| writeln!(f, "{r}"))
    }
}

impl fmt::Display for ParsedProgram {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ParsedProgram::Plain(p) => write!(f, "{p}"),
            ParsedProgram::Annotated(p) => write!(f, "{p}"),
        }
    }
}

pub fn print_goal(goal: &[GoalItem]) -> String {
    goal.iter().map(ToString::to_string).collect::<Vec<_>>().join(", ")
}
