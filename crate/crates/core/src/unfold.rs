//! Unfolding of annotated rules: a group of body atoms of `r` matched by the
//! head of `v` is rewritten with `v`'s body, `v`'s guard is moved forward
//! into `r`'s guard where it is not already implied, and the local token
//! store is kept consistent.

use std::collections::{BTreeMap, BTreeSet};

use crate::builtins::{Builtin, BuiltinStore};
use crate::canon::rules_equivalent;
use crate::explore::{head_assignments, head_equations};
use crate::omega_t_prime::inst;
use crate::syntax::{AnnotatedProgram, AnnotatedRule, Atom, BodyItem, IdentifiedAtom, Token, TokenStore};
use crate::terms::{Substitution, Term, Var};

/// Tokens of `tokens` all of whose identifiers occur among `atoms`.
pub fn clean<'a>(atoms: impl IntoIterator<Item = &'a IdentifiedAtom>, tokens: &TokenStore) -> TokenStore {
    let ids: BTreeSet<u64> = atoms.into_iter().map(|a| a.id).collect();
    tokens.iter().filter(|t| t.ids.iter().all(|i| ids.contains(i))).cloned().collect()
}

/// A place where `unfolder` can rewrite atoms of `unfoldee`'s body.
#[derive(Clone, Debug)]
pub struct UnfoldSite {
    pub unfoldee: AnnotatedRule,
    pub unfolder_index: usize,
    /// The unfolder with its variables renamed away from the unfoldee.
    pub unfolder: AnnotatedRule,
    /// Body identifiers matched by the kept head, in head order.
    pub kept: Vec<u64>,
    /// Body identifiers matched by the removed head, in head order.
    pub removed: Vec<u64>,
    pub theta: Substitution,
    /// Instances of the unfolder's guard not implied by the unfoldee.
    pub residual: Vec<Builtin>,
}

impl UnfoldSite {
    pub fn ids(&self) -> Vec<u64> {
        self.kept.iter().chain(&self.removed).copied().collect()
    }

    pub fn token(&self) -> Token {
        Token { rule: self.unfolder.name.clone(), ids: self.ids() }
    }
}

#[doc(hidden)]
#[derive(Clone, Copy, Debug)]
pub struct UnfoldOptions {
    /// Disabling this reproduces the unsound unfolding used as a
    /// counterexample in the tests.
    pub respect_tokens: bool,
}

impl Default for UnfoldOptions {
    fn default() -> Self {
        UnfoldOptions { respect_tokens: true }
    }
}

/// Renames the variables of `v` to `X1`, `Y1`, ... avoiding `taken`.
pub(crate) fn rename_away(v: &AnnotatedRule, taken: &BTreeSet<Var>) -> AnnotatedRule {
    let mut used = taken.clone();
    let mut map = BTreeMap::new();
    for x in v.vars() {
        let base = x.name().trim_end_matches(|c: char| c.is_ascii_digit());
        let base = if base.is_empty() || base == "_" { "V" } else { base };
        let name = (1..).map(|k| Var::new(&format!("{base}{k}"))).find(|c| !used.contains(c)).expect("unbounded");
        used.insert(name.clone());
        map.insert(x, name);
    }
    v.rename(&map)
}

/// The conjunction `C ∧ D` of a rule's guard and body built-ins.
pub fn rule_constraints(r: &AnnotatedRule) -> BuiltinStore {
    let mut all = r.guard.clone();
    all.extend(r.body_builtins().cloned());
    BuiltinStore::from_builtins(&all)
}

/// θ as a one-sided match of the unfolder's head onto the body atoms.
fn syntactic_theta(heads: &[&Atom], body: &[&Atom], assignment: &[usize], bindable: &BTreeSet<Var>) -> Option<Substitution> {
    let pairs: Vec<(Term, Term)> = assignment
        .iter()
        .zip(heads)
        .flat_map(|(&i, h)| h.args.iter().cloned().zip(body[i].args.iter().cloned()))
        .collect();
    let mut s = Substitution::new();
    s.unify_pairs(pairs, &|v| u8::from(bindable.contains(v))).then_some(s)
}

pub fn enum_unfold_sites(program: &AnnotatedProgram, r: &AnnotatedRule) -> Vec<UnfoldSite> {
    enum_unfold_sites_with(program, r, UnfoldOptions::default())
}

#[doc(hidden)]
pub fn enum_unfold_sites_with(program: &AnnotatedProgram, r: &AnnotatedRule, opts: UnfoldOptions) -> Vec<UnfoldSite> {
    let store_cd = rule_constraints(r);
    if store_cd.is_false() {
        return Vec::new();
    }
    let guard_d = BuiltinStore::from_builtins(&r.guard);
    let body: Vec<&IdentifiedAtom> = r.body_atoms().collect();
    let body_atoms: Vec<&Atom> = body.iter().map(|a| &a.atom).collect();
    let mut out = Vec::new();
    for (vi, v) in program.rules.iter().enumerate() {
        let v = rename_away(v, &r.vars());
        let heads: Vec<&Atom> = v.heads().collect();
        let head_vars = v.head_vars();
        let v_vars = v.vars();
        let mut here = Vec::new();
        for assignment in head_assignments(&body_atoms, &heads) {
            let ids: Vec<u64> = assignment.iter().map(|&i| body[i].id).collect();
            let token = Token { rule: v.name.clone(), ids: ids.clone() };
            if opts.respect_tokens && r.tokens.contains(&token) {
                continue;
            }
            let eqs = head_equations(&body_atoms, &heads, &assignment);
            let Some(witness) = store_cd.entailment_witness(&head_vars, &eqs) else {
                continue;
            };
            let theta = syntactic_theta(&heads, &body_atoms, &assignment, &head_vars).unwrap_or(witness);
            let residual: Vec<Builtin> = v
                .guard
                .iter()
                .map(|c| c.apply(&theta))
                .filter(|c| *c != Builtin::True && !store_cd.entails_exists(&v_vars, std::slice::from_ref(c)))
                .collect();
            if !guard_d.satisfiable(&residual) {
                continue;
            }
            let (kept, removed) = ids.split_at(v.kept.len());
            here.push(UnfoldSite {
                unfoldee: r.clone(),
                unfolder_index: vi,
                unfolder: v.clone(),
                kept: kept.to_vec(),
                removed: removed.to_vec(),
                theta,
                residual,
            });
        }
        here.sort_by_key(UnfoldSite::ids);
        out.extend(here);
    }
    out
}

/// The unfolded rule of a site. It keeps the unfoldee's name and heads.
pub fn unfold(site: &UnfoldSite) -> AnnotatedRule {
    let r = &site.unfoldee;
    let v = &site.unfolder;
    let remaining: Vec<&IdentifiedAtom> = r.body_atoms().filter(|a| !site.removed.contains(&a.id)).collect();
    let (b1, t1, _) = inst(&v.body, &v.tokens, r.max_id());
    let mut body: Vec<BodyItem> = remaining.iter().map(|a| BodyItem::Atom((*a).clone())).collect();
    body.extend(b1);
    body.extend(r.body_builtins().cloned().map(BodyItem::Builtin));
    let by_id: BTreeMap<u64, &Atom> = r.body_atoms().map(|a| (a.id, &a.atom)).collect();
    let mut seen = Vec::new();
    for (id, h) in site.ids().iter().zip(v.heads()) {
        for (s, t) in by_id[id].args.iter().zip(&h.args) {
            let eq = Builtin::eq(s.clone(), t.clone());
            if !seen.contains(&eq) {
                seen.push(eq.clone());
                body.push(BodyItem::Builtin(eq));
            }
        }
    }
    let mut tokens = clean(remaining.iter().copied(), &r.tokens);
    tokens.extend(t1);
    if v.removed.is_empty() {
        tokens.insert(Token { rule: v.name.clone(), ids: site.kept.clone() });
    }
    let mut guard = r.guard.clone();
    guard.extend(site.residual.iter().cloned());
    AnnotatedRule { name: r.name.clone(), kept: r.kept.clone(), removed: r.removed.clone(), guard, body, tokens }
}

/// `Unf_P(r)`, without duplicates up to renaming.
pub fn unf_all(program: &AnnotatedProgram, r: &AnnotatedRule) -> Vec<AnnotatedRule> {
    let mut out: Vec<AnnotatedRule> = Vec::new();
    for site in enum_unfold_sites(program, r) {
        let u = unfold(&site);
        if !out.iter().any(|o| rules_equivalent(o, &u)) {
            out.push(u);
        }
    }
    out
}
