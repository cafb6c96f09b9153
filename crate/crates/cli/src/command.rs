//! Surface commands and their execution. A `Session` processes commands in
//! file order against a growing environment: declarations elaborate and
//! install, `check`/`eval` print, attributes adjust resolution behaviour,
//! and namespaces prefix declared names and qualify references.

use crate::diagnostics::Diagnostic;
use elab_core::elaborate::{
    elaborate_axiom, elaborate_definition, elaborate_term, ElabError, ElabOptions,
};
use elab_core::env::{DeclKind, Declaration, Environment, ReducibilityHint, Transparency};
use elab_core::inductive::{elaborate_inductive, InductiveSpec};
use elab_core::level::Level;
use elab_core::name::Name;
use elab_core::preterm::{
    mk_explicit_ident, mk_hole, mk_ident, mk_papp_spine, mk_plambda, mk_ppi, mk_psort, Preterm,
    PretermData,
};
use elab_core::reduce::normalize;
use elab_core::span::Span;
use elab_core::term::{open_pi_telescope, BinderInfo, Term, TermData};
use elab_core::typing::TypeChecker;
use std::fmt;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Attr {
    Reducible,
    Semireducible,
    Irreducible,
    Class,
    Instance,
    Coercion,
}

impl Attr {
    pub fn name(self) -> &'static str {
        match self {
            Attr::Reducible => "reducible",
            Attr::Semireducible => "semireducible",
            Attr::Irreducible => "irreducible",
            Attr::Class => "class",
            Attr::Instance => "instance",
            Attr::Coercion => "coercion",
        }
    }

    pub fn from_name(s: &str) -> Option<Attr> {
        Some(match s {
            "reducible" => Attr::Reducible,
            "semireducible" => Attr::Semireducible,
            "irreducible" => Attr::Irreducible,
            "class" => Attr::Class,
            "instance" => Attr::Instance,
            "coercion" => Attr::Coercion,
            _ => return None,
        })
    }
}

impl fmt::Display for Attr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// One parsed binder: `(x : T)`, `{x : T}`, `[x : T]`, or a bare `x` in a
/// `fun`.
#[derive(Clone, Debug)]
pub struct PBinder {
    pub name: Name,
    pub info: BinderInfo,
    pub ty: Option<Preterm>,
    pub span: Span,
}

#[derive(Clone, Debug)]
pub enum SurfaceCommand {
    Definition {
        name: Name,
        ty: Option<Preterm>,
        value: Preterm,
        span: Span,
    },
    Axiom {
        name: Name,
        ty: Preterm,
        span: Span,
    },
    Inductive {
        name: Name,
        params: Vec<PBinder>,
        ty: Option<Preterm>,
        ctors: Vec<(Name, Span, Preterm)>,
        span: Span,
    },
    Structure {
        name: Name,
        class: bool,
        params: Vec<PBinder>,
        ty: Option<Preterm>,
        fields: Vec<(Name, Span, Preterm)>,
        span: Span,
    },
    Attribute {
        name: Name,
        attr: Attr,
        span: Span,
    },
    Namespace {
        name: Name,
        span: Span,
    },
    End {
        name: Name,
        span: Span,
    },
    Open {
        name: Name,
        span: Span,
    },
    Check {
        term: Preterm,
        span: Span,
    },
    Eval {
        term: Preterm,
        span: Span,
    },
    Example {
        ty: Preterm,
        value: Preterm,
        span: Span,
    },
}

impl SurfaceCommand {
    pub fn span(&self) -> Span {
        match self {
            SurfaceCommand::Definition { span, .. }
            | SurfaceCommand::Axiom { span, .. }
            | SurfaceCommand::Inductive { span, .. }
            | SurfaceCommand::Structure { span, .. }
            | SurfaceCommand::Attribute { span, .. }
            | SurfaceCommand::Namespace { span, .. }
            | SurfaceCommand::End { span, .. }
            | SurfaceCommand::Open { span, .. }
            | SurfaceCommand::Check { span, .. }
            | SurfaceCommand::Eval { span, .. }
            | SurfaceCommand::Example { span, .. } => *span,
        }
    }
}

fn write_binder(f: &mut fmt::Formatter<'_>, b: &PBinder) -> fmt::Result {
    match &b.ty {
        Some(ty) => write!(
            f,
            "{}{} : {}{}",
            b.info.open_delim(),
            b.name,
            ty,
            b.info.close_delim()
        ),
        None => write!(f, "{}{}{}", b.info.open_delim(), b.name, b.info.close_delim()),
    }
}

impl fmt::Display for SurfaceCommand {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SurfaceCommand::Definition { name, ty, value, .. } => match ty {
                Some(ty) => write!(f, "definition {name} : {ty} := {value}"),
                None => write!(f, "definition {name} := {value}"),
            },
            SurfaceCommand::Axiom { name, ty, .. } => write!(f, "axiom {name} : {ty}"),
            SurfaceCommand::Inductive { name, params, ty, ctors, .. } => {
                write!(f, "inductive {name}")?;
                for b in params {
                    write!(f, " ")?;
                    write_binder(f, b)?;
                }
                if let Some(ty) = ty {
                    write!(f, " : {ty}")?;
                }
                write!(f, " :=")?;
                for (cname, _, cty) in ctors {
                    write!(f, " | {cname} : {cty}")?;
                }
                Ok(())
            }
            SurfaceCommand::Structure { name, class, params, ty, fields, .. } => {
                write!(f, "structure {name}")?;
                if *class {
                    write!(f, " [class]")?;
                }
                for b in params {
                    write!(f, " ")?;
                    write_binder(f, b)?;
                }
                if let Some(ty) = ty {
                    write!(f, " : {ty}")?;
                }
                write!(f, " :=")?;
                for (fname, _, fty) in fields {
                    write!(f, " ({fname} : {fty})")?;
                }
                Ok(())
            }
            SurfaceCommand::Attribute { name, attr, .. } => {
                write!(f, "attribute {name} [{attr}]")
            }
            SurfaceCommand::Namespace { name, .. } => write!(f, "namespace {name}"),
            SurfaceCommand::End { name, .. } => write!(f, "end {name}"),
            SurfaceCommand::Open { name, .. } => write!(f, "open {name}"),
            SurfaceCommand::Check { term, .. } => write!(f, "check {term}"),
            SurfaceCommand::Eval { term, .. } => write!(f, "eval {term}"),
            SurfaceCommand::Example { ty, value, .. } => {
                write!(f, "example : {ty} := {value}")
            }
        }
    }
}

/// Structural equality on preterms that ignores source spans, so a parsed
/// term and its reparsed printout compare equal.
pub fn preterm_eq(a: &Preterm, b: &Preterm) -> bool {
    match (a.data(), b.data()) {
        (
            PretermData::Ident { name: n1, explicit: e1 },
            PretermData::Ident { name: n2, explicit: e2 },
        ) => n1 == n2 && e1 == e2,
        (PretermData::App(f1, a1), PretermData::App(f2, a2)) => {
            preterm_eq(f1, f2) && preterm_eq(a1, a2)
        }
        (
            PretermData::Lambda { binder: b1, info: i1, dom: d1, body: t1 },
            PretermData::Lambda { binder: b2, info: i2, dom: d2, body: t2 },
        ) => b1 == b2 && i1 == i2 && opt_preterm_eq(d1, d2) && preterm_eq(t1, t2),
        (
            PretermData::Pi { binder: b1, info: i1, dom: d1, body: t1 },
            PretermData::Pi { binder: b2, info: i2, dom: d2, body: t2 },
        ) => b1 == b2 && i1 == i2 && preterm_eq(d1, d2) && preterm_eq(t1, t2),
        (PretermData::Placeholder, PretermData::Placeholder) => true,
        (PretermData::Sort { level: l1 }, PretermData::Sort { level: l2 }) => l1 == l2,
        (
            PretermData::Annotated { term: t1, ty: y1 },
            PretermData::Annotated { term: t2, ty: y2 },
        ) => preterm_eq(t1, t2) && preterm_eq(y1, y2),
        (PretermData::Numeral(n1), PretermData::Numeral(n2)) => n1 == n2,
        _ => false,
    }
}

fn opt_preterm_eq(a: &Option<Preterm>, b: &Option<Preterm>) -> bool {
    match (a, b) {
        (Some(a), Some(b)) => preterm_eq(a, b),
        (None, None) => true,
        _ => false,
    }
}

fn binder_eq(a: &PBinder, b: &PBinder) -> bool {
    a.name == b.name && a.info == b.info && opt_preterm_eq(&a.ty, &b.ty)
}

fn binders_eq(a: &[PBinder], b: &[PBinder]) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| binder_eq(x, y))
}

fn named_terms_eq(a: &[(Name, Span, Preterm)], b: &[(Name, Span, Preterm)]) -> bool {
    a.len() == b.len()
        && a.iter()
            .zip(b)
            .all(|((n1, _, t1), (n2, _, t2))| n1 == n2 && preterm_eq(t1, t2))
}

/// Structural equality on commands that ignores source spans.
pub fn command_eq(a: &SurfaceCommand, b: &SurfaceCommand) -> bool {
    use SurfaceCommand::*;
    match (a, b) {
        (
            Definition { name: n1, ty: t1, value: v1, .. },
            Definition { name: n2, ty: t2, value: v2, .. },
        ) => n1 == n2 && opt_preterm_eq(t1, t2) && preterm_eq(v1, v2),
        (Axiom { name: n1, ty: t1, .. }, Axiom { name: n2, ty: t2, .. }) => {
            n1 == n2 && preterm_eq(t1, t2)
        }
        (
            Inductive { name: n1, params: p1, ty: t1, ctors: c1, .. },
            Inductive { name: n2, params: p2, ty: t2, ctors: c2, .. },
        ) => n1 == n2 && binders_eq(p1, p2) && opt_preterm_eq(t1, t2) && named_terms_eq(c1, c2),
        (
            Structure { name: n1, class: k1, params: p1, ty: t1, fields: f1, .. },
            Structure { name: n2, class: k2, params: p2, ty: t2, fields: f2, .. },
        ) => {
            n1 == n2
                && k1 == k2
                && binders_eq(p1, p2)
                && opt_preterm_eq(t1, t2)
                && named_terms_eq(f1, f2)
        }
        (Attribute { name: n1, attr: a1, .. }, Attribute { name: n2, attr: a2, .. }) => {
            n1 == n2 && a1 == a2
        }
        (Namespace { name: n1, .. }, Namespace { name: n2, .. })
        | (End { name: n1, .. }, End { name: n2, .. })
        | (Open { name: n1, .. }, Open { name: n2, .. }) => n1 == n2,
        (Check { term: t1, .. }, Check { term: t2, .. })
        | (Eval { term: t1, .. }, Eval { term: t2, .. }) => preterm_eq(t1, t2),
        (
            Example { ty: t1, value: v1, .. },
            Example { ty: t2, value: v2, .. },
        ) => preterm_eq(t1, t2) && preterm_eq(v1, v2),
        _ => false,
    }
}

/// Rewrites free identifiers in a preterm to their namespace-qualified forms.
/// Each identifier is tried against the open namespace prefixes from
/// innermost to outermost; the first prefix under which the qualified name
/// exists wins, and a name that resolves under no prefix is left alone (it
/// may be a global, an alias, or genuinely unknown). Names bound by
/// enclosing lambda or pi binders shadow everything and are never rewritten.
pub fn qualify_in(env: &Environment, prefixes: &[Name], p: &Preterm) -> Preterm {
    if prefixes.is_empty() {
        return p.clone();
    }
    let mut bound: Vec<Name> = Vec::new();
    qualify_rec(env, prefixes, p, &mut bound)
}

fn qualify_rec(env: &Environment, prefixes: &[Name], p: &Preterm, bound: &mut Vec<Name>) -> Preterm {
    let span = p.span();
    match p.data() {
        PretermData::Ident { name, explicit } => {
            if bound.contains(name) {
                return p.clone();
            }
            for pre in prefixes.iter().rev() {
                let full = pre.join(name);
                if env.contains(&full) {
                    return Preterm::new(
                        PretermData::Ident { name: full, explicit: *explicit },
                        span,
                    );
                }
            }
            p.clone()
        }
        PretermData::App(g, a) => {
            let g2 = qualify_rec(env, prefixes, g, bound);
            let a2 = qualify_rec(env, prefixes, a, bound);
            Preterm::new(PretermData::App(g2, a2), span)
        }
        PretermData::Lambda { binder, info, dom, body } => {
            let dom2 = dom.as_ref().map(|d| qualify_rec(env, prefixes, d, bound));
            bound.push(binder.clone());
            let body2 = qualify_rec(env, prefixes, body, bound);
            bound.pop();
            Preterm::new(
                PretermData::Lambda { binder: binder.clone(), info: *info, dom: dom2, body: body2 },
                span,
            )
        }
        PretermData::Pi { binder, info, dom, body } => {
            let dom2 = qualify_rec(env, prefixes, dom, bound);
            bound.push(binder.clone());
            let body2 = qualify_rec(env, prefixes, body, bound);
            bound.pop();
            Preterm::new(
                PretermData::Pi { binder: binder.clone(), info: *info, dom: dom2, body: body2 },
                span,
            )
        }
        PretermData::Annotated { term, ty } => {
            let term2 = qualify_rec(env, prefixes, term, bound);
            let ty2 = qualify_rec(env, prefixes, ty, bound);
            Preterm::new(PretermData::Annotated { term: term2, ty: ty2 }, span)
        }
        PretermData::Placeholder | PretermData::Sort { .. } | PretermData::Numeral(_) => p.clone(),
    }
}

/// Wraps `body` in one pi per binder, innermost last. With `force_implicit`
/// every binder becomes implicit regardless of how it was written.
pub(crate) fn wrap_pi(binders: &[PBinder], body: Preterm, force_implicit: bool) -> Preterm {
    let mut t = body;
    for b in binders.iter().rev() {
        let info = if force_implicit { BinderInfo::Implicit } else { b.info };
        let dom = b.ty.clone().unwrap_or_else(|| mk_hole(b.span));
        let span = b.span.join(t.span());
        t = mk_ppi(b.name.clone(), info, dom, t, span);
    }
    t
}

/// Wraps `body` in one lambda per binder, innermost last.
pub(crate) fn wrap_lambda(binders: &[PBinder], body: Preterm, force_implicit: bool) -> Preterm {
    let mut t = body;
    for b in binders.iter().rev() {
        let info = if force_implicit { BinderInfo::Implicit } else { b.info };
        let span = b.span.join(t.span());
        t = mk_plambda(b.name.clone(), info, b.ty.clone(), t, span);
    }
    t
}

fn fresh_binder_name(base: &str, taken: &[&Name]) -> Name {
    let mut s = base.to_string();
    loop {
        let cand = Name::atom(s.clone());
        if !taken.iter().any(|n| **n == cand) {
            return cand;
        }
        s.push('\'');
    }
}

fn elab_diag(err: &ElabError, fallback: Span) -> Diagnostic {
    let mut d = Diagnostic::from_elab(err);
    if d.span.is_none() {
        d.span = Some(fallback);
    }
    d
}

/// Output produced by one successfully executed command.
#[derive(Debug, Default)]
pub struct CommandEffect {
    pub output: Vec<String>,
    pub trace: Vec<String>,
}

/// Executes surface commands against an environment, tracking the open
/// namespace stack. A failing command reports a diagnostic and leaves the
/// environment unchanged; processing continues with the next command.
pub struct Session {
    env: Environment,
    ns: Vec<Name>,
    opts: ElabOptions,
}

impl Session {
    pub fn new(env: Environment, opts: ElabOptions) -> Session {
        Session { env, ns: Vec::new(), opts }
    }

    pub fn env(&self) -> &Environment {
        &self.env
    }

    pub fn into_env(self) -> Environment {
        self.env
    }

    /// Cumulative namespace prefixes, outermost first: inside
    /// `namespace a` then `namespace b` this is `[a, a.b]`.
    fn prefixes(&self) -> Vec<Name> {
        let mut out = Vec::new();
        let mut cur: Option<Name> = None;
        for n in &self.ns {
            let next = match &cur {
                Some(c) => c.join(n),
                None => n.clone(),
            };
            out.push(next.clone());
            cur = Some(next);
        }
        out
    }

    fn full_name(&self, name: &Name) -> Name {
        match self.prefixes().last() {
            Some(p) => p.join(name),
            None => name.clone(),
        }
    }

    fn qualify(&self, p: &Preterm) -> Preterm {
        qualify_in(&self.env, &self.prefixes(), p)
    }

    /// Resolves the name of an already-installed declaration, innermost
    /// namespace first, then bare.
    fn resolve_declared(&self, name: &Name) -> Option<Name> {
        for pre in self.prefixes().iter().rev() {
            let full = pre.join(name);
            if self.env.contains(&full) {
                return Some(full);
            }
        }
        if self.env.contains(name) {
            return Some(name.clone());
        }
        None
    }

    pub fn run(&mut self, cmd: &SurfaceCommand) -> Result<CommandEffect, Diagnostic> {
        match cmd {
            SurfaceCommand::Definition { name, ty, value, span } => {
                let full = self.full_name(name);
                let ty_q = ty.as_ref().map(|t| self.qualify(t));
                let value_q = self.qualify(value);
                let (decl, trace) = elaborate_definition(
                    &self.env,
                    full,
                    ty_q.as_ref(),
                    &value_q,
                    ReducibilityHint::Semireducible,
                    &self.opts,
                )
                .map_err(|e| elab_diag(&e, *span))?;
                self.env.insert(decl);
                Ok(CommandEffect { output: vec![], trace })
            }
            SurfaceCommand::Axiom { name, ty, span } => {
                let full = self.full_name(name);
                let ty_q = self.qualify(ty);
                let (decl, trace) = elaborate_axiom(&self.env, full, &ty_q, &self.opts)
                    .map_err(|e| elab_diag(&e, *span))?;
                self.env.insert(decl);
                Ok(CommandEffect { output: vec![], trace })
            }
            SurfaceCommand::Inductive { name, params, ty, ctors, span } => {
                let (_, trace) = self.declare_inductive(name, params, ty, ctors, *span)?;
                Ok(CommandEffect { output: vec![], trace })
            }
            SurfaceCommand::Structure { name, class, params, ty, fields, span } => {
                self.declare_structure(name, *class, params, ty, fields, *span)
            }
            SurfaceCommand::Attribute { name, attr, span } => {
                self.set_attribute(name, *attr, *span)?;
                Ok(CommandEffect::default())
            }
            SurfaceCommand::Namespace { name, .. } => {
                self.ns.push(name.clone());
                Ok(CommandEffect::default())
            }
            SurfaceCommand::End { name, span } => {
                match self.ns.last() {
                    Some(top) if top == name => {
                        self.ns.pop();
                    }
                    Some(top) => {
                        return Err(Diagnostic::error(
                            Some(*span),
                            format!("expected `end {top}`, found `end {name}`"),
                        ));
                    }
                    None => {
                        return Err(Diagnostic::error(
                            Some(*span),
                            "no open namespace to end".to_string(),
                        ));
                    }
                }
                Ok(CommandEffect::default())
            }
            SurfaceCommand::Open { name, span } => {
                let mut pairs: Vec<(Name, Name)> = self
                    .env
                    .decl_names()
                    .filter_map(|d| d.strip_prefix(name).map(|short| (short, d.clone())))
                    .collect();
                if pairs.is_empty() {
                    return Err(Diagnostic::error(
                        Some(*span),
                        format!("no declarations live in namespace `{name}`"),
                    ));
                }
                pairs.sort();
                for (short, full) in pairs {
                    self.env.add_alias(short, full);
                }
                Ok(CommandEffect::default())
            }
            SurfaceCommand::Check { term, span } => {
                let q = self.qualify(term);
                let el = elaborate_term(&self.env, &q, None, &self.opts)
                    .map_err(|e| elab_diag(&e, *span))?;
                Ok(CommandEffect {
                    output: vec![format!("{} : {}", el.term, el.ty)],
                    trace: el.trace,
                })
            }
            SurfaceCommand::Eval { term, span } => {
                let q = self.qualify(term);
                let el = elaborate_term(&self.env, &q, None, &self.opts)
                    .map_err(|e| elab_diag(&e, *span))?;
                let v = normalize(&self.env, &el.term);
                Ok(CommandEffect { output: vec![format!("{v}")], trace: el.trace })
            }
            SurfaceCommand::Example { ty, value, span } => {
                let ty_q = self.qualify(ty);
                let value_q = self.qualify(value);
                let el = elaborate_term(&self.env, &value_q, Some(&ty_q), &self.opts)
                    .map_err(|e| elab_diag(&e, *span))?;
                Ok(CommandEffect { output: vec![], trace: el.trace })
            }
        }
    }

    fn declare_inductive(
        &mut self,
        name: &Name,
        params: &[PBinder],
        ty: &Option<Preterm>,
        ctors: &[(Name, Span, Preterm)],
        span: Span,
    ) -> Result<(Name, Vec<String>), Diagnostic> {
        let full = self.full_name(name);
        let mut trace = Vec::new();

        let header_core = match ty {
            Some(t) => t.clone(),
            None => mk_psort(None, span),
        };
        let header = wrap_pi(params, header_core, false);
        let header_q = self.qualify(&header);
        let el = elaborate_term(&self.env, &header_q, None, &self.opts)
            .map_err(|e| elab_diag(&e, span))?;
        trace.extend(el.trace);
        let header_term = el.term;

        // Constructor types mention the inductive being declared, so they
        // elaborate against a scratch environment holding it as an axiom.
        let mut scratch = self.env.clone();
        scratch.insert(Declaration {
            name: full.clone(),
            univ_params: vec![],
            ty: header_term.clone(),
            kind: DeclKind::Axiom,
        });
        let scratch_prefixes = self.prefixes();

        let mut constructors = Vec::new();
        for (cname, cspan, cty) in ctors {
            // The parameters are bound implicitly around each written
            // constructor type; the written type refers to them by name.
            let wrapped = wrap_pi(params, cty.clone(), true);
            let wrapped_q = qualify_in(&scratch, &scratch_prefixes, &wrapped);
            let cel = elaborate_term(&scratch, &wrapped_q, None, &self.opts)
                .map_err(|e| elab_diag(&e, *cspan))?;
            trace.extend(cel.trace);
            constructors.push((full.join(cname), cel.term));
        }

        let spec = InductiveSpec {
            name: full.clone(),
            univ_params: vec![],
            ty: header_term,
            num_params: params.len() as u32,
            constructors,
        };
        let tc = TypeChecker::new(&scratch, Transparency::All);
        let mut sort_of = |t: &Term| -> Option<Level> {
            let ty = tc.infer(t).ok()?;
            match tc.whnf(&ty).data() {
                TermData::Sort(l) => Some(l.clone()),
                _ => None,
            }
        };
        let decls = elaborate_inductive(&self.env, &spec, &mut sort_of)
            .map_err(|e| Diagnostic::error(Some(span), e.to_string()))?;
        for d in decls {
            self.env.insert(d);
        }
        Ok((full, trace))
    }

    fn declare_structure(
        &mut self,
        name: &Name,
        class: bool,
        params: &[PBinder],
        ty: &Option<Preterm>,
        fields: &[(Name, Span, Preterm)],
        span: Span,
    ) -> Result<CommandEffect, Diagnostic> {
        // A structure is a single-constructor inductive plus one projection
        // per field. The constructor takes every field explicitly.
        let param_args: Vec<Preterm> =
            params.iter().map(|b| mk_ident(b.name.clone(), b.span)).collect();
        let struct_ref = mk_papp_spine(mk_ident(name.clone(), span), param_args.clone());

        let mut cty = struct_ref.clone();
        for (fname, fspan, fty) in fields.iter().rev() {
            cty = mk_ppi(fname.clone(), BinderInfo::Explicit, fty.clone(), cty, *fspan);
        }
        let ctors = vec![(Name::atom("mk"), span, cty)];
        let (full, mut trace) = self.declare_inductive(name, params, ty, &ctors, span)?;
        if class {
            self.env.mark_class(full.clone());
        }

        let taken: Vec<&Name> = params
            .iter()
            .map(|b| &b.name)
            .chain(fields.iter().map(|(n, _, _)| n))
            .collect();
        let s_name = fresh_binder_name("s", &taken);
        let w_name = fresh_binder_name("w", &taken);
        let s_info = if class { BinderInfo::InstImplicit } else { BinderInfo::Explicit };
        let rec_ref = mk_explicit_ident(name.child("rec"), span);

        for (i, (fname, fspan, fty)) in fields.iter().enumerate() {
            let proj = full.join(fname);

            let proj_ty = wrap_pi(
                params,
                mk_ppi(s_name.clone(), s_info, struct_ref.clone(), fty.clone(), *fspan),
                true,
            );

            let motive = mk_plambda(
                w_name.clone(),
                BinderInfo::Explicit,
                Some(struct_ref.clone()),
                fty.clone(),
                *fspan,
            );
            let mut minor = mk_ident(fname.clone(), *fspan);
            for (gname, gspan, gty) in fields.iter().rev() {
                minor = mk_plambda(
                    gname.clone(),
                    BinderInfo::Explicit,
                    Some(gty.clone()),
                    minor,
                    *gspan,
                );
            }
            let mut rec_args = param_args.clone();
            rec_args.push(motive);
            rec_args.push(minor);
            rec_args.push(mk_ident(s_name.clone(), *fspan));
            let rec_app = mk_papp_spine(rec_ref.clone(), rec_args);
            let proj_val = wrap_lambda(
                params,
                mk_plambda(s_name.clone(), s_info, Some(struct_ref.clone()), rec_app, *fspan),
                true,
            );

            let proj_ty_q = self.qualify(&proj_ty);
            let proj_val_q = self.qualify(&proj_val);
            let (decl, tr) = elaborate_definition(
                &self.env,
                proj.clone(),
                Some(&proj_ty_q),
                &proj_val_q,
                ReducibilityHint::Reducible,
                &self.opts,
            )
            .map_err(|e| elab_diag(&e, *fspan))?;
            self.env.insert(decl);
            self.env.mark_projection(proj);
            trace.extend(tr);
            let _ = i;
        }
        Ok(CommandEffect { output: vec![], trace })
    }

    fn set_attribute(&mut self, name: &Name, attr: Attr, span: Span) -> Result<(), Diagnostic> {
        let full = self.resolve_declared(name).ok_or_else(|| {
            Diagnostic::error(Some(span), format!("unknown declaration `{name}`"))
        })?;
        match attr {
            Attr::Reducible | Attr::Semireducible | Attr::Irreducible => {
                let hint = match attr {
                    Attr::Reducible => ReducibilityHint::Reducible,
                    Attr::Irreducible => ReducibilityHint::Irreducible,
                    _ => ReducibilityHint::Semireducible,
                };
                if !self.env.set_hint(&full, hint) {
                    return Err(Diagnostic::error(
                        Some(span),
                        format!("`{full}` is not a definition, so it has no reducibility"),
                    ));
                }
            }
            Attr::Class => {
                self.env.mark_class(full);
            }
            Attr::Instance => {
                let decl = self.env.get(&full).cloned().expect("declaration resolved above");
                let (_, result) = open_pi_telescope(&decl.ty);
                let head = result.head();
                match head.data() {
                    TermData::Const(cls, _) if self.env.is_class(cls) => {
                        let cls = cls.clone();
                        self.env.add_instance(cls, full);
                    }
                    TermData::Const(cls, _) => {
                        return Err(Diagnostic::error(
                            Some(span),
                            format!(
                                "the type of `{full}` ends in `{cls}`, which is not a class"
                            ),
                        ));
                    }
                    _ => {
                        return Err(Diagnostic::error(
                            Some(span),
                            format!("the type of `{full}` does not end in a class"),
                        ));
                    }
                }
            }
            Attr::Coercion => {
                let decl = self.env.get(&full).cloned().expect("declaration resolved above");
                let (tele, result) = open_pi_telescope(&decl.ty);
                let Some((last, _)) = tele.last() else {
                    return Err(Diagnostic::error(
                        Some(span),
                        format!("`{full}` takes no arguments, so it cannot coerce"),
                    ));
                };
                let src_ty = last.fvar_type().expect("telescope entries are locals");
                let src_head = src_ty.head();
                let tgt_head = result.head();
                let (TermData::Const(src, _), TermData::Const(tgt, _)) =
                    (src_head.data(), tgt_head.data())
                else {
                    return Err(Diagnostic::error(
                        Some(span),
                        format!(
                            "`{full}` must map one named type to another to coerce"
                        ),
                    ));
                };
                let src = src.clone();
                let tgt = tgt.clone();
                self.env.add_coercion(src, tgt, full);
            }
        }
        Ok(())
    }
}
