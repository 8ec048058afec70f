//! Hand-written lexer and recursive-descent parser for `.chr` files and goals.

use std::collections::BTreeSet;
use std::sync::Arc;

use super::{AnnotatedProgram, AnnotatedRule, Atom, BodyItem, Goal, GoalItem, IdentifiedAtom, ParsedProgram, Program, Rule, Token, TokenStore};
use crate::builtins::Builtin;
use crate::terms::{FreshSupply, Term, Var};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ParseErrorKind {
    #[error("unexpected character {0:?}")]
    BadChar(char),
    #[error("expected {expected}, found {found}")]
    Unexpected { expected: String, found: String },
    #[error("rule head is empty")]
    EmptyHead,
    #[error("propagation rules cannot have a removed head")]
    PropagationWithRemoved,
    #[error("guard may only contain built-in constraints")]
    NonBuiltinGuard,
    #[error("a variable cannot stand alone as a constraint")]
    BareVariable,
    #[error("identifier #{0} used twice in one body")]
    DuplicateIdentifier(u64),
    #[error("token {0} refers to an identifier absent from the body")]
    DanglingToken(String),
    #[error("duplicate rule name {0} in a plain program")]
    DuplicateRuleName(String),
    #[error("body atom {0} has no identifier in an annotated program")]
    MissingIdentifier(String),
    #[error("identifiers are not allowed here")]
    IdentifierNotAllowed,
    #[error("program is already annotated")]
    AlreadyAnnotated,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("{line}:{column}: {kind}")]
pub struct ParseError {
    pub line: usize,
    pub column: usize,
    pub kind: ParseErrorKind,
}

/// Line and column of a token.
type Pos = (usize, usize);

#[derive(Debug, Clone, PartialEq, Eq)]
enum Tok {
    Name(String),
    Var(String),
    Int(u64),
    LParen,
    RParen,
    LBrace,
    RBrace,
    Comma,
    At,
    Backslash,
    Simp,
    Prop,
    Bar,
    Eq,
    Hash,
    Semi,
    Dot,
    Eof,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Name(n) => format!("name `{n}`"),
            Tok::Var(v) => format!("variable `{v}`"),
            Tok::Int(i) => format!("integer `{i}`"),
            Tok::LParen => "`(`".into(),
            Tok::RParen => "`)`".into(),
            Tok::LBrace => "`{`".into(),
            Tok::RBrace => "`}`".into(),
            Tok::Comma => "`,`".into(),
            Tok::At => "`@`".into(),
            Tok::Backslash => "`\\`".into(),
            Tok::Simp => "`<=>`".into(),
            Tok::Prop => "`==>`".into(),
            Tok::Bar => "`|`".into(),
            Tok::Eq => "`=`".into(),
            Tok::Hash => "`#`".into(),
            Tok::Semi => "`;`".into(),
            Tok::Dot => "`.`".into(),
            Tok::Eof => "end of input".into(),
        }
    }
}

#[derive(Debug, Clone)]
struct Spanned {
    tok: Tok,
    line: usize,
    column: usize,
}

fn lex(text: &str) -> Result<Vec<Spanned>, ParseError> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let (mut i, mut line, mut col) = (0usize, 1usize, 1usize);
    while i < chars.len() {
        let c = chars[i];
        let (start_line, start_col) = (line, col);
        let mut advance = |n: usize, i: &mut usize| {
            *i += n;
            col += n;
        };
        if c == '\n' {
            i += 1;
            line += 1;
            col = 1;
            continue;
        }
        if c.is_whitespace() {
            advance(1, &mut i);
            continue;
        }
        if c == '%' {
            while i < chars.len() && chars[i] != '\n' {
                i += 1;
            }
            continue;
        }
        let rest: String = chars[i..chars.len().min(i + 3)].iter().collect();
        let tok = if rest == "<=>" {
            advance(3, &mut i);
            Tok::Simp
        } else if rest == "==>" {
            advance(3, &mut i);
            Tok::Prop
        } else if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            col += i - start;
            let word: String = chars[start..i].iter().collect();
            if c.is_ascii_uppercase() || c == '_' {
                Tok::Var(word)
            } else {
                Tok::Name(word)
            }
        } else if c.is_ascii_digit() {
            let start = i;
            while i < chars.len() && chars[i].is_ascii_digit() {
                i += 1;
            }
            col += i - start;
            let digits: String = chars[start..i].iter().collect();
            let value = digits.parse().map_err(|_| ParseError {
                line: start_line,
                column: start_col,
                kind: ParseErrorKind::BadChar(c),
            })?;
            Tok::Int(value)
        } else {
            let t = match c {
                '(' => Tok::LParen,
                ')' => Tok::RParen,
                '{' => Tok::LBrace,
                '}' => Tok::RBrace,
                ',' => Tok::Comma,
                '@' => Tok::At,
                '\\' => Tok::Backslash,
                '|' => Tok::Bar,
                '=' => Tok::Eq,
                '#' => Tok::Hash,
                ';' => Tok::Semi,
                '.' => Tok::Dot,
                other => {
                    return Err(ParseError { line: start_line, column: start_col, kind: ParseErrorKind::BadChar(other) });
                }
            };
            advance(1, &mut i);
            t
        };
        out.push(Spanned { tok, line: start_line, column: start_col });
    }
    out.push(Spanned { tok: Tok::Eof, line, column: col });
    Ok(out)
}

/// Body item before the program-level decision plain/annotated is made.
enum RawItem {
    Atom(Atom, Option<u64>, (usize, usize)),
    Builtin(Builtin),
}

struct RawRule {
    name: String,
    kept: Vec<Atom>,
    removed: Vec<Atom>,
    guard: Vec<Builtin>,
    body: Vec<RawItem>,
    tokens: Option<Vec<(Token, (usize, usize))>>,
    at: (usize, usize),
}

struct Parser {
    toks: Vec<Spanned>,
    pos: usize,
}

impl Parser {
    fn new(text: &str) -> Result<Parser, ParseError> {
        Ok(Parser { toks: lex(text)?, pos: 0 })
    }

    // The token list always ends with Eof; reads past the end see Eof.
    fn at(&self, pos: usize) -> &Spanned {
        &self.toks[pos.min(self.toks.len() - 1)]
    }

    fn peek(&self) -> &Tok {
        &self.at(self.pos).tok
    }

    fn peek2(&self) -> &Tok {
        &self.at(self.pos + 1).tok
    }

    fn here(&self) -> (usize, usize) {
        let s = self.at(self.pos);
        (s.line, s.column)
    }

    fn bump(&mut self) -> Tok {
        let t = self.peek().clone();
        self.pos += 1;
        t
    }

    fn error_at(&self, at: (usize, usize), kind: ParseErrorKind) -> ParseError {
        ParseError { line: at.0, column: at.1, kind }
    }

    fn error(&self, kind: ParseErrorKind) -> ParseError {
        self.error_at(self.here(), kind)
    }

    fn unexpected(&self, expected: &str) -> ParseError {
        self.error(ParseErrorKind::Unexpected { expected: expected.into(), found: self.peek().describe() })
    }

    fn expect(&mut self, tok: Tok, expected: &str) -> Result<(), ParseError> {
        if *self.peek() == tok {
            self.bump();
            Ok(())
        } else {
            Err(self.unexpected(expected))
        }
    }

    fn term(&mut self) -> Result<Term, ParseError> {
        match self.bump() {
            Tok::Var(v) => {
                let var = Var::new(&v);
                FreshSupply::global().reserve_name(&var);
                Ok(Term::Var(var))
            }
            Tok::Name(f) => Ok(Term::App(Arc::from(f.as_str()), self.args()?)),
            _ => {
                self.pos -= 1;
                Err(self.unexpected("a term"))
            }
        }
    }

    fn args(&mut self) -> Result<Vec<Term>, ParseError> {
        let mut args = Vec::new();
        if *self.peek() == Tok::LParen {
            self.bump();
            loop {
                args.push(self.term()?);
                match self.bump() {
                    Tok::Comma => continue,
                    Tok::RParen => break,
                    _ => {
                        self.pos -= 1;
                        return Err(self.unexpected("`,` or `)`"));
                    }
                }
            }
        }
        Ok(args)
    }

    fn atom(&mut self) -> Result<Atom, ParseError> {
        match self.peek().clone() {
            Tok::Name(p) => {
                self.bump();
                Ok(Atom { pred: Arc::from(p.as_str()), args: self.args()? })
            }
            _ => Err(self.unexpected("a constraint")),
        }
    }

    fn atoms(&mut self) -> Result<Vec<Atom>, ParseError> {
        let mut out = vec![self.atom()?];
        while *self.peek() == Tok::Comma {
            self.bump();
            out.push(self.atom()?);
        }
        Ok(out)
    }

    fn item(&mut self) -> Result<RawItem, ParseError> {
        let at = self.here();
        match self.peek() {
            Tok::Name(n) if (n == "true" || n == "false") && *self.peek2() != Tok::Eq && *self.peek2() != Tok::LParen => {
                let b = if n == "true" { Builtin::True } else { Builtin::False };
                self.bump();
                return Ok(RawItem::Builtin(b));
            }
            _ => {}
        }
        let lhs = self.term()?;
        if *self.peek() == Tok::Eq {
            self.bump();
            let rhs = self.term()?;
            return Ok(RawItem::Builtin(Builtin::Eq(lhs, rhs)));
        }
        let Term::App(pred, args) = lhs else {
            return Err(self.error_at(at, ParseErrorKind::BareVariable));
        };
        let id = if *self.peek() == Tok::Hash {
            self.bump();
            match self.bump() {
                Tok::Int(i) => Some(i),
                _ => {
                    self.pos -= 1;
                    return Err(self.unexpected("an identifier after `#`"));
                }
            }
        } else {
            None
        };
        Ok(RawItem::Atom(Atom { pred, args }, id, at))
    }

    /// A possibly empty comma-separated item list, ended by one of the
    /// terminators (not consumed).
    fn items(&mut self, terminators: &[Tok]) -> Result<Vec<RawItem>, ParseError> {
        let mut out = Vec::new();
        if terminators.contains(self.peek()) {
            return Ok(out);
        }
        loop {
            out.push(self.item()?);
            if *self.peek() == Tok::Comma {
                self.bump();
            } else {
                break;
            }
        }
        Ok(out)
    }

    fn tokens(&mut self) -> Result<Vec<(Token, Pos)>, ParseError> {
        self.expect(Tok::LBrace, "`{`")?;
        let mut out = Vec::new();
        if *self.peek() == Tok::RBrace {
            self.bump();
            return Ok(out);
        }
        loop {
            let at = self.here();
            let Tok::Name(rule) = self.bump() else {
                self.pos -= 1;
                return Err(self.unexpected("a rule name"));
            };
            self.expect(Tok::At, "`@`")?;
            let mut ids = Vec::new();
            loop {
                match self.bump() {
                    Tok::Int(i) => ids.push(i),
                    _ => {
                        self.pos -= 1;
                        return Err(self.unexpected("an identifier"));
                    }
                }
                if *self.peek() == Tok::Comma && matches!(self.peek2(), Tok::Int(_)) {
                    self.bump();
                } else {
                    break;
                }
            }
            out.push((Token::new(&rule, ids), at));
            match self.bump() {
                Tok::Comma => continue,
                Tok::RBrace => break,
                _ => {
                    self.pos -= 1;
                    return Err(self.unexpected("`,` or `}`"));
                }
            }
        }
        Ok(out)
    }

    fn rule(&mut self) -> Result<RawRule, ParseError> {
        let at = self.here();
        let Tok::Name(name) = self.bump() else {
            self.pos -= 1;
            return Err(self.unexpected("a rule name"));
        };
        self.expect(Tok::At, "`@` after the rule name")?;
        if matches!(self.peek(), Tok::Simp | Tok::Prop | Tok::Backslash) {
            return Err(self.error(ParseErrorKind::EmptyHead));
        }
        let first = self.atoms()?;
        let (kept, removed) = match self.bump() {
            Tok::Backslash => {
                let removed = self.atoms()?;
                match self.bump() {
                    Tok::Simp => (first, removed),
                    Tok::Prop => {
                        self.pos -= 1;
                        return Err(self.error(ParseErrorKind::PropagationWithRemoved));
                    }
                    _ => {
                        self.pos -= 1;
                        return Err(self.unexpected("`<=>`"));
                    }
                }
            }
            Tok::Simp => (Vec::new(), first),
            Tok::Prop => (first, Vec::new()),
            _ => {
                self.pos -= 1;
                return Err(self.unexpected("`\\`, `<=>` or `==>`"));
            }
        };
        let ends = [Tok::Bar, Tok::Dot, Tok::Semi];
        let mut body = self.items(&ends)?;
        let mut guard = Vec::new();
        if *self.peek() == Tok::Bar {
            self.bump();
            for item in body.drain(..) {
                match item {
                    RawItem::Builtin(Builtin::True) => {}
                    RawItem::Builtin(b) => guard.push(b),
                    RawItem::Atom(_, _, at) => return Err(self.error_at(at, ParseErrorKind::NonBuiltinGuard)),
                }
            }
            body = self.items(&[Tok::Dot, Tok::Semi])?;
        }
        body.retain(|i| !matches!(i, RawItem::Builtin(Builtin::True)));
        let tokens = if *self.peek() == Tok::Semi {
            self.bump();
            Some(self.tokens()?)
        } else {
            None
        };
        self.expect(Tok::Dot, "`.` at the end of the rule")?;
        Ok(RawRule { name, kept, removed, guard, body, tokens, at })
    }
}

fn is_annotated(rule: &RawRule) -> bool {
    rule.tokens.is_some() || rule.body.iter().any(|i| matches!(i, RawItem::Atom(_, Some(_), _)))
}

pub fn parse_program(text: &str) -> Result<ParsedProgram, ParseError> {
    let mut p = Parser::new(text)?;
    let mut raws = Vec::new();
    while *p.peek() != Tok::Eof {
        raws.push(p.rule()?);
    }
    let err = |at: (usize, usize), kind| ParseError { line: at.0, column: at.1, kind };
    if raws.iter().any(is_annotated) {
        let mut rules = Vec::new();
        for raw in raws {
            let mut body = Vec::new();
            let mut seen = BTreeSet::new();
            for item in raw.body {
                match item {
                    RawItem::Builtin(b) => body.push(BodyItem::Builtin(b)),
                    RawItem::Atom(atom, Some(id), at) => {
                        if !seen.insert(id) {
                            return Err(err(at, ParseErrorKind::DuplicateIdentifier(id)));
                        }
                        body.push(BodyItem::Atom(IdentifiedAtom { atom, id }));
                    }
                    RawItem::Atom(atom, None, at) => {
                        return Err(err(at, ParseErrorKind::MissingIdentifier(atom.to_string())));
                    }
                }
            }
            let mut tokens = TokenStore::new();
            for (t, at) in raw.tokens.unwrap_or_default() {
                if t.ids.iter().any(|i| !seen.contains(i)) {
                    return Err(err(at, ParseErrorKind::DanglingToken(t.to_string())));
                }
                tokens.insert(t);
            }
            rules.push(AnnotatedRule {
                name: Arc::from(raw.name.as_str()),
                kept: raw.kept,
                removed: raw.removed,
                guard: raw.guard,
                body,
                tokens,
            });
        }
        Ok(ParsedProgram::Annotated(AnnotatedProgram { rules }))
    } else {
        let mut rules = Vec::new();
        let mut names = BTreeSet::new();
        for raw in raws {
            if !names.insert(raw.name.clone()) {
                return Err(err(raw.at, ParseErrorKind::DuplicateRuleName(raw.name)));
            }
            let body = raw
                .body
                .into_iter()
                .map(|i| match i {
                    RawItem::Atom(a, _, _) => GoalItem::Atom(a),
                    RawItem::Builtin(b) => GoalItem::Builtin(b),
                })
                .collect();
            rules.push(Rule { name: Arc::from(raw.name.as_str()), kept: raw.kept, removed: raw.removed, guard: raw.guard, body });
        }
        Ok(ParsedProgram::Plain(Program { rules }))
    }
}

/// Parses one goal; a trailing `.` is optional. `true` stands for the empty
/// goal.
pub fn parse_goal(text: &str) -> Result<Goal, ParseError> {
    let mut p = Parser::new(text)?;
    let items = p.items(&[Tok::Dot, Tok::Eof])?;
    if *p.peek() == Tok::Dot {
        p.bump();
    }
    if *p.peek() != Tok::Eof {
        return Err(p.unexpected("end of goal"));
    }
    let mut goal = Vec::new();
    for item in items {
        match item {
            RawItem::Builtin(Builtin::True) => {}
            RawItem::Builtin(b) => goal.push(GoalItem::Builtin(b)),
            RawItem::Atom(a, None, _) => goal.push(GoalItem::Atom(a)),
            RawItem::Atom(_, Some(_), at) => return Err(p.error_at(at, ParseErrorKind::IdentifierNotAllowed)),
        }
    }
    Ok(goal)
}

/// One goal per non-empty line; `%` starts a comment.
pub fn parse_goals(text: &str) -> Result<Vec<Goal>, ParseError> {
    let mut out = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let content = line.split('%').next().unwrap_or("");
        if content.trim().is_empty() {
            continue;
        }
        let goal = parse_goal(content).map_err(|e| ParseError { line: n + 1, ..e })?;
        out.push(goal);
    }
    Ok(out)
}
