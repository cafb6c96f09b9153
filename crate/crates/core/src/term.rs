use crate::level::{Level, LevelMetaId};
use crate::name::Name;
use std::cell::Cell;
use std::fmt;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

/// One global generator backs every kind of fresh id (free variables,
/// metavariables, level metavariables). Atomic: term values are shared
/// across threads freely.
static NEXT_ID: AtomicU64 = AtomicU64::new(1);

fn fresh_id() -> u64 {
    NEXT_ID.fetch_add(1, Ordering::Relaxed)
}

#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Debug)]
pub struct FreeVarId(pub u64);

#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Debug)]
pub struct MetaId(pub u64);

impl fmt::Display for FreeVarId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "l{}", self.0)
    }
}

impl fmt::Display for MetaId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "?m{}", self.0)
    }
}

pub fn fresh_fvar_id() -> FreeVarId {
    FreeVarId(fresh_id())
}

pub fn fresh_meta_id() -> MetaId {
    MetaId(fresh_id())
}

pub fn fresh_level_meta_id() -> LevelMetaId {
    LevelMetaId(fresh_id())
}

#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug)]
pub enum BinderInfo {
    /// `(x : A)`
    Explicit,
    /// `{x : A}` — solved by unification.
    Implicit,
    /// `[x : A]` — solved by class-instance resolution.
    InstImplicit,
}

impl BinderInfo {
    pub fn open_delim(self) -> &'static str {
        match self {
            BinderInfo::Explicit => "(",
            BinderInfo::Implicit => "{",
            BinderInfo::InstImplicit => "[",
        }
    }

    pub fn close_delim(self) -> &'static str {
        match self {
            BinderInfo::Explicit => ")",
            BinderInfo::Implicit => "}",
            BinderInfo::InstImplicit => "]",
        }
    }
}

/// Term syntax, locally nameless: bound occurrences are de Bruijn indices,
/// every open position is a `FreeVar` carrying its own type, and
/// metavariables are constants carrying their (closed) type.
#[derive(Debug)]
pub enum TermData {
    BoundVar(u32),
    /// Free variable (a "local"): unique id plus its type. The type is
    /// locally closed and may reference earlier locals of a telescope.
    FreeVar(FreeVarId, Term),
    /// Metavariable: unique id plus its closed type. A hole in context
    /// `(x : A)` is represented applied, `?m x`, with `?m : Π (x : A), …`.
    Meta(MetaId, Term),
    Const(Name, Vec<Level>),
    Sort(Level),
    App(Term, Term),
    Lambda(BinderInfo, Term, Term),
    Pi(BinderInfo, Term, Term),
}

struct TermNode {
    data: TermData,
    /// Strict upper bound on dangling de Bruijn indices: every dangling
    /// index in the term is `< bound`. `bound == 0` means locally closed.
    bound: u32,
    /// A free variable occurs in a substitutable (non-type-annotation)
    /// position somewhere below.
    has_fvar: bool,
    /// A metavariable occurs somewhere below, including inside the stored
    /// types of free variables and metavariables.
    has_meta: bool,
    /// A level metavariable occurs in some sort or constant below.
    has_level_meta: bool,
}

/// Immutable, `Arc`-shared term. Cloning is O(1); rebuilding traversals
/// share every untouched subtree with the input.
#[derive(Clone)]
pub struct Term(Arc<TermNode>);

thread_local! {
    static TRAVERSAL_VISITS: Cell<u64> = const { Cell::new(0) };
}

/// Nodes visited by instantiate/abstract/substitution traversals on this
/// thread since the last reset. Test instrumentation.
pub fn traversal_visits() -> u64 {
    TRAVERSAL_VISITS.with(|c| c.get())
}

pub fn reset_traversal_visits() {
    TRAVERSAL_VISITS.with(|c| c.set(0));
}

#[inline]
fn visit_node() {
    TRAVERSAL_VISITS.with(|c| c.set(c.get() + 1));
}

impl Term {
    fn new(data: TermData) -> Term {
        let (bound, has_fvar, has_meta, has_level_meta) = match &data {
            TermData::BoundVar(n) => (n + 1, false, false, false),
            TermData::FreeVar(_, ty) => {
                debug_assert!(ty.is_locally_closed(), "free-variable types must be closed");
                (0, true, ty.has_meta(), ty.has_level_meta())
            }
            TermData::Meta(_, ty) => {
                debug_assert!(ty.is_locally_closed(), "metavariable types must be closed");
                (0, false, true, ty.has_level_meta())
            }
            TermData::Const(_, ls) => (0, false, false, ls.iter().any(|l| l.has_meta())),
            TermData::Sort(l) => (0, false, false, l.has_meta()),
            TermData::App(t, s) => (
                t.bound().max(s.bound()),
                t.has_fvar() || s.has_fvar(),
                t.has_meta() || s.has_meta(),
                t.has_level_meta() || s.has_level_meta(),
            ),
            TermData::Lambda(_, d, b) | TermData::Pi(_, d, b) => (
                d.bound().max(b.bound().saturating_sub(1)),
                d.has_fvar() || b.has_fvar(),
                d.has_meta() || b.has_meta(),
                d.has_level_meta() || b.has_level_meta(),
            ),
        };
        Term(Arc::new(TermNode {
            data,
            bound,
            has_fvar,
            has_meta,
            has_level_meta,
        }))
    }

    pub fn data(&self) -> &TermData {
        &self.0.data
    }

    pub fn bound(&self) -> u32 {
        self.0.bound
    }

    pub fn is_locally_closed(&self) -> bool {
        self.0.bound == 0
    }

    pub fn has_fvar(&self) -> bool {
        self.0.has_fvar
    }

    pub fn has_meta(&self) -> bool {
        self.0.has_meta
    }

    pub fn has_level_meta(&self) -> bool {
        self.0.has_level_meta
    }

    pub fn ptr_eq(a: &Term, b: &Term) -> bool {
        Arc::ptr_eq(&a.0, &b.0)
    }
}

pub fn mk_bvar(i: u32) -> Term {
    Term::new(TermData::BoundVar(i))
}

pub fn mk_fvar(id: FreeVarId, ty: Term) -> Term {
    Term::new(TermData::FreeVar(id, ty))
}

pub fn mk_meta_const(id: MetaId, ty: Term) -> Term {
    Term::new(TermData::Meta(id, ty))
}

pub fn mk_const(name: impl Into<Name>, levels: Vec<Level>) -> Term {
    Term::new(TermData::Const(name.into(), levels))
}

pub fn mk_sort(l: Level) -> Term {
    Term::new(TermData::Sort(l))
}

pub fn mk_prop() -> Term {
    mk_sort(Level::Zero)
}

pub fn mk_app(f: Term, a: Term) -> Term {
    Term::new(TermData::App(f, a))
}

pub fn mk_app_spine(f: Term, args: impl IntoIterator<Item = Term>) -> Term {
    args.into_iter().fold(f, mk_app)
}

pub fn mk_lambda(info: BinderInfo, dom: Term, body: Term) -> Term {
    Term::new(TermData::Lambda(info, dom, body))
}

pub fn mk_pi(info: BinderInfo, dom: Term, body: Term) -> Term {
    Term::new(TermData::Pi(info, dom, body))
}

/// Non-dependent function type `a -> b`.
pub fn mk_arrow(a: Term, b: Term) -> Term {
    mk_pi(BinderInfo::Explicit, a, b)
}

/// Fresh free variable of the given type.
pub fn mk_local(ty: Term) -> Term {
    mk_fvar(fresh_fvar_id(), ty)
}

impl Term {
    /// Head and argument list of an application spine: `f a b` gives
    /// `(f, [a, b])`.
    pub fn spine(&self) -> (Term, Vec<Term>) {
        let mut args = Vec::new();
        let mut cur = self.clone();
        while let TermData::App(f, a) = cur.data() {
            args.push(a.clone());
            let f = f.clone();
            cur = f;
        }
        args.reverse();
        (cur, args)
    }

    pub fn head(&self) -> Term {
        let mut cur = self.clone();
        while let TermData::App(f, _) = cur.data() {
            let f = f.clone();
            cur = f;
        }
        cur
    }

    pub fn head_const(&self) -> Option<(Name, Vec<Level>)> {
        match self.head().data() {
            TermData::Const(n, ls) => Some((n.clone(), ls.clone())),
            _ => None,
        }
    }

    pub fn fvar_id(&self) -> Option<FreeVarId> {
        match self.data() {
            TermData::FreeVar(id, _) => Some(*id),
            _ => None,
        }
    }

    pub fn fvar_type(&self) -> Option<&Term> {
        match self.data() {
            TermData::FreeVar(_, ty) => Some(ty),
            _ => None,
        }
    }

    pub fn meta_id(&self) -> Option<MetaId> {
        match self.data() {
            TermData::Meta(id, _) => Some(*id),
            _ => None,
        }
    }

    /// Substitute the outermost dangling index (0 at this depth) by `s`,
    /// lowering every deeper dangling index by one. `s` must be locally
    /// closed, so no lifting is ever needed. Subtrees with no reachable
    /// dangling index are returned as-is, pointer-identical.
    pub fn instantiate(&self, s: &Term) -> Term {
        debug_assert!(s.is_locally_closed(), "instantiate: replacement must be closed");
        self.instantiate_at(0, s)
    }

    fn instantiate_at(&self, depth: u32, s: &Term) -> Term {
        visit_node();
        if self.bound() <= depth {
            return self.clone();
        }
        match self.data() {
            TermData::BoundVar(i) => {
                if *i == depth {
                    s.clone()
                } else if *i > depth {
                    mk_bvar(i - 1)
                } else {
                    self.clone()
                }
            }
            TermData::App(f, a) => {
                let f2 = f.instantiate_at(depth, s);
                let a2 = a.instantiate_at(depth, s);
                if Term::ptr_eq(&f2, f) && Term::ptr_eq(&a2, a) {
                    self.clone()
                } else {
                    mk_app(f2, a2)
                }
            }
            TermData::Lambda(info, d, b) => {
                let d2 = d.instantiate_at(depth, s);
                let b2 = b.instantiate_at(depth + 1, s);
                if Term::ptr_eq(&d2, d) && Term::ptr_eq(&b2, b) {
                    self.clone()
                } else {
                    mk_lambda(*info, d2, b2)
                }
            }
            TermData::Pi(info, d, b) => {
                let d2 = d.instantiate_at(depth, s);
                let b2 = b.instantiate_at(depth + 1, s);
                if Term::ptr_eq(&d2, d) && Term::ptr_eq(&b2, b) {
                    self.clone()
                } else {
                    mk_pi(*info, d2, b2)
                }
            }
            // bound == 0 for all of these; unreachable past the guard.
            TermData::FreeVar(..)
            | TermData::Meta(..)
            | TermData::Const(..)
            | TermData::Sort(_) => unreachable!("closed node below instantiate guard"),
        }
    }

    /// Replace free variable `l` by a fresh dangling index, shifting every
    /// already-dangling index up by one. Does not look inside the stored
    /// types of other free variables: callers abstract telescopes
    /// innermost-first (see `abstract_lambda`).
    pub fn abstract_fvar(&self, l: FreeVarId) -> Term {
        self.abstract_at(0, l)
    }

    fn abstract_at(&self, depth: u32, l: FreeVarId) -> Term {
        visit_node();
        if !self.has_fvar() && self.bound() <= depth {
            return self.clone();
        }
        match self.data() {
            TermData::FreeVar(id, _) => {
                if *id == l {
                    mk_bvar(depth)
                } else {
                    self.clone()
                }
            }
            TermData::BoundVar(i) => {
                if *i >= depth {
                    mk_bvar(i + 1)
                } else {
                    self.clone()
                }
            }
            TermData::App(f, a) => {
                let f2 = f.abstract_at(depth, l);
                let a2 = a.abstract_at(depth, l);
                if Term::ptr_eq(&f2, f) && Term::ptr_eq(&a2, a) {
                    self.clone()
                } else {
                    mk_app(f2, a2)
                }
            }
            TermData::Lambda(info, d, b) => {
                let d2 = d.abstract_at(depth, l);
                let b2 = b.abstract_at(depth + 1, l);
                if Term::ptr_eq(&d2, d) && Term::ptr_eq(&b2, b) {
                    self.clone()
                } else {
                    mk_lambda(*info, d2, b2)
                }
            }
            TermData::Pi(info, d, b) => {
                let d2 = d.abstract_at(depth, l);
                let b2 = b.abstract_at(depth + 1, l);
                if Term::ptr_eq(&d2, d) && Term::ptr_eq(&b2, b) {
                    self.clone()
                } else {
                    mk_pi(*info, d2, b2)
                }
            }
            TermData::Meta(..) | TermData::Const(..) | TermData::Sort(_) => self.clone(),
        }
    }

    /// Replace free variable `l` by the locally closed term `v` (no index
    /// shifting). Like `abstract_fvar`, type annotations of other free
    /// variables are not rewritten.
    pub fn subst_fvar(&self, l: FreeVarId, v: &Term) -> Term {
        debug_assert!(v.is_locally_closed(), "subst_fvar: replacement must be closed");
        visit_node();
        if !self.has_fvar() {
            return self.clone();
        }
        match self.data() {
            TermData::FreeVar(id, _) => {
                if *id == l {
                    v.clone()
                } else {
                    self.clone()
                }
            }
            TermData::App(f, a) => {
                let f2 = f.subst_fvar(l, v);
                let a2 = a.subst_fvar(l, v);
                if Term::ptr_eq(&f2, f) && Term::ptr_eq(&a2, a) {
                    self.clone()
                } else {
                    mk_app(f2, a2)
                }
            }
            TermData::Lambda(info, d, b) => {
                let d2 = d.subst_fvar(l, v);
                let b2 = b.subst_fvar(l, v);
                if Term::ptr_eq(&d2, d) && Term::ptr_eq(&b2, b) {
                    self.clone()
                } else {
                    mk_lambda(*info, d2, b2)
                }
            }
            TermData::Pi(info, d, b) => {
                let d2 = d.subst_fvar(l, v);
                let b2 = b.subst_fvar(l, v);
                if Term::ptr_eq(&d2, d) && Term::ptr_eq(&b2, b) {
                    self.clone()
                } else {
                    mk_pi(*info, d2, b2)
                }
            }
            _ => self.clone(),
        }
    }

    /// Replace every occurrence of metavariable `m` — including occurrences
    /// inside the stored types of free variables and other metavariables —
    /// by the closed term `v`.
    pub fn subst_meta(&self, m: MetaId, v: &Term) -> Term {
        let mut used = false;
        self.subst_metas(&mut |id| if id == m { Some(v.clone()) } else { None }, &mut used)
    }

    /// Simultaneous metavariable substitution driven by a lookup function.
    /// Sets `*used` when at least one replacement fired. Replacements must
    /// be closed; they are themselves traversed (transitive resolution is
    /// the caller's concern — the solver pre-resolves its stored values).
    pub fn subst_metas(
        &self,
        lookup: &mut impl FnMut(MetaId) -> Option<Term>,
        used: &mut bool,
    ) -> Term {
        visit_node();
        if !self.has_meta() {
            return self.clone();
        }
        match self.data() {
            TermData::Meta(id, ty) => {
                if let Some(v) = lookup(*id) {
                    debug_assert!(v.is_locally_closed());
                    *used = true;
                    return v;
                }
                let ty2 = ty.subst_metas(lookup, used);
                if Term::ptr_eq(&ty2, ty) {
                    self.clone()
                } else {
                    mk_meta_const(*id, ty2)
                }
            }
            TermData::FreeVar(id, ty) => {
                let ty2 = ty.subst_metas(lookup, used);
                if Term::ptr_eq(&ty2, ty) {
                    self.clone()
                } else {
                    mk_fvar(*id, ty2)
                }
            }
            TermData::App(f, a) => {
                let f2 = f.subst_metas(lookup, used);
                let a2 = a.subst_metas(lookup, used);
                if Term::ptr_eq(&f2, f) && Term::ptr_eq(&a2, a) {
                    self.clone()
                } else {
                    mk_app(f2, a2)
                }
            }
            TermData::Lambda(info, d, b) => {
                let d2 = d.subst_metas(lookup, used);
                let b2 = b.subst_metas(lookup, used);
                if Term::ptr_eq(&d2, d) && Term::ptr_eq(&b2, b) {
                    self.clone()
                } else {
                    mk_lambda(*info, d2, b2)
                }
            }
            TermData::Pi(info, d, b) => {
                let d2 = d.subst_metas(lookup, used);
                let b2 = b.subst_metas(lookup, used);
                if Term::ptr_eq(&d2, d) && Term::ptr_eq(&b2, b) {
                    self.clone()
                } else {
                    mk_pi(*info, d2, b2)
                }
            }
            _ => self.clone(),
        }
    }

    /// Substitute assigned level metavariables throughout (sorts, constant
    /// level lists, and the stored types of fvars/metas).
    pub fn subst_level_metas(
        &self,
        lookup: &mut impl FnMut(LevelMetaId) -> Option<Level>,
        used: &mut bool,
    ) -> Term {
        if !self.has_level_meta() {
            return self.clone();
        }
        let subst_level = |l: &Level, lookup: &mut dyn FnMut(LevelMetaId) -> Option<Level>, used: &mut bool| -> Level {
            let mut metas = Vec::new();
            l.collect_metas(&mut metas);
            let mut out = l.clone();
            for m in metas {
                if let Some(v) = lookup(m) {
                    *used = true;
                    out = out.subst_meta(m, &v);
                }
            }
            out
        };
        match self.data() {
            TermData::Sort(l) => mk_sort(subst_level(l, lookup, used)),
            TermData::Const(n, ls) => mk_const(
                n.clone(),
                ls.iter().map(|l| subst_level(l, lookup, used)).collect(),
            ),
            TermData::Meta(id, ty) => mk_meta_const(*id, ty.subst_level_metas(lookup, used)),
            TermData::FreeVar(id, ty) => mk_fvar(*id, ty.subst_level_metas(lookup, used)),
            TermData::App(f, a) => mk_app(
                f.subst_level_metas(lookup, used),
                a.subst_level_metas(lookup, used),
            ),
            TermData::Lambda(info, d, b) => mk_lambda(
                *info,
                d.subst_level_metas(lookup, used),
                b.subst_level_metas(lookup, used),
            ),
            TermData::Pi(info, d, b) => mk_pi(
                *info,
                d.subst_level_metas(lookup, used),
                b.subst_level_metas(lookup, used),
            ),
            TermData::BoundVar(_) => self.clone(),
        }
    }

    /// Instantiate universe parameters of a declaration's term.
    pub fn instantiate_level_params(&self, map: &[(Name, Level)]) -> Term {
        if map.is_empty() {
            return self.clone();
        }
        match self.data() {
            TermData::Sort(l) => mk_sort(l.subst_params(map)),
            TermData::Const(n, ls) => {
                mk_const(n.clone(), ls.iter().map(|l| l.subst_params(map)).collect())
            }
            TermData::Meta(id, ty) => mk_meta_const(*id, ty.instantiate_level_params(map)),
            TermData::FreeVar(id, ty) => mk_fvar(*id, ty.instantiate_level_params(map)),
            TermData::App(f, a) => mk_app(
                f.instantiate_level_params(map),
                a.instantiate_level_params(map),
            ),
            TermData::Lambda(info, d, b) => mk_lambda(
                *info,
                d.instantiate_level_params(map),
                b.instantiate_level_params(map),
            ),
            TermData::Pi(info, d, b) => mk_pi(
                *info,
                d.instantiate_level_params(map),
                b.instantiate_level_params(map),
            ),
            TermData::BoundVar(_) => self.clone(),
        }
    }

    /// Metavariables occurring anywhere, types included, without duplicates.
    pub fn collect_metas(&self, out: &mut Vec<MetaId>) {
        if !self.has_meta() {
            return;
        }
        match self.data() {
            TermData::Meta(id, ty) => {
                if !out.contains(id) {
                    out.push(*id);
                }
                ty.collect_metas(out);
            }
            TermData::FreeVar(_, ty) => ty.collect_metas(out),
            TermData::App(f, a) => {
                f.collect_metas(out);
                a.collect_metas(out);
            }
            TermData::Lambda(_, d, b) | TermData::Pi(_, d, b) => {
                d.collect_metas(out);
                b.collect_metas(out);
            }
            _ => {}
        }
    }

    pub fn occurs_meta(&self, m: MetaId) -> bool {
        if !self.has_meta() {
            return false;
        }
        match self.data() {
            TermData::Meta(id, ty) => *id == m || ty.occurs_meta(m),
            TermData::FreeVar(_, ty) => ty.occurs_meta(m),
            TermData::App(f, a) => f.occurs_meta(m) || a.occurs_meta(m),
            TermData::Lambda(_, d, b) | TermData::Pi(_, d, b) => {
                d.occurs_meta(m) || b.occurs_meta(m)
            }
            _ => false,
        }
    }

    /// Free variables in substitutable positions, without duplicates.
    /// The stored type of a surviving free variable travels with it, so
    /// type annotations are deliberately not scanned.
    pub fn collect_fvars(&self, out: &mut Vec<FreeVarId>) {
        if !self.has_fvar() {
            return;
        }
        match self.data() {
            TermData::FreeVar(id, _) => {
                if !out.contains(id) {
                    out.push(*id);
                }
            }
            TermData::App(f, a) => {
                f.collect_fvars(out);
                a.collect_fvars(out);
            }
            TermData::Lambda(_, d, b) | TermData::Pi(_, d, b) => {
                d.collect_fvars(out);
                b.collect_fvars(out);
            }
            _ => {}
        }
    }

    pub fn occurs_fvar(&self, l: FreeVarId) -> bool {
        if !self.has_fvar() {
            return false;
        }
        match self.data() {
            TermData::FreeVar(id, _) => *id == l,
            TermData::App(f, a) => f.occurs_fvar(l) || a.occurs_fvar(l),
            TermData::Lambda(_, d, b) | TermData::Pi(_, d, b) => {
                d.occurs_fvar(l) || b.occurs_fvar(l)
            }
            _ => false,
        }
    }

    pub fn collect_level_metas(&self, out: &mut Vec<LevelMetaId>) {
        if !self.has_level_meta() {
            return;
        }
        match self.data() {
            TermData::Sort(l) => l.collect_metas(out),
            TermData::Const(_, ls) => ls.iter().for_each(|l| l.collect_metas(out)),
            TermData::Meta(_, ty) | TermData::FreeVar(_, ty) => ty.collect_level_metas(out),
            TermData::App(f, a) => {
                f.collect_level_metas(out);
                a.collect_level_metas(out);
            }
            TermData::Lambda(_, d, b) | TermData::Pi(_, d, b) => {
                d.collect_level_metas(out);
                b.collect_level_metas(out);
            }
            TermData::BoundVar(_) => {}
        }
    }

    pub fn node_count(&self) -> u64 {
        match self.data() {
            TermData::App(f, a) => 1 + f.node_count() + a.node_count(),
            TermData::Lambda(_, d, b) | TermData::Pi(_, d, b) => {
                1 + d.node_count() + b.node_count()
            }
            _ => 1,
        }
    }

    /// Structural equality with constant/sort levels compared up to
    /// normalization. Free variables and metavariables compare by id.
    pub fn eq_mod_levels(&self, other: &Term) -> bool {
        if Term::ptr_eq(self, other) {
            return true;
        }
        match (self.data(), other.data()) {
            (TermData::BoundVar(i), TermData::BoundVar(j)) => i == j,
            (TermData::FreeVar(a, _), TermData::FreeVar(b, _)) => a == b,
            (TermData::Meta(a, _), TermData::Meta(b, _)) => a == b,
            (TermData::Const(n1, l1), TermData::Const(n2, l2)) => {
                n1 == n2 && l1.len() == l2.len() && l1.iter().zip(l2).all(|(a, b)| a.defeq(b))
            }
            (TermData::Sort(a), TermData::Sort(b)) => a.defeq(b),
            (TermData::App(f1, a1), TermData::App(f2, a2)) => {
                f1.eq_mod_levels(f2) && a1.eq_mod_levels(a2)
            }
            (TermData::Lambda(i1, d1, b1), TermData::Lambda(i2, d2, b2))
            | (TermData::Pi(i1, d1, b1), TermData::Pi(i2, d2, b2)) => {
                i1 == i2 && d1.eq_mod_levels(d2) && b1.eq_mod_levels(b2)
            }
            _ => false,
        }
    }
}

/// Structural equality. Free variables and metavariables compare by id
/// alone — their cached types are determined by the id.
impl PartialEq for Term {
    fn eq(&self, other: &Term) -> bool {
        if Term::ptr_eq(self, other) {
            return true;
        }
        match (self.data(), other.data()) {
            (TermData::BoundVar(i), TermData::BoundVar(j)) => i == j,
            (TermData::FreeVar(a, _), TermData::FreeVar(b, _)) => a == b,
            (TermData::Meta(a, _), TermData::Meta(b, _)) => a == b,
            (TermData::Const(n1, l1), TermData::Const(n2, l2)) => n1 == n2 && l1 == l2,
            (TermData::Sort(a), TermData::Sort(b)) => a == b,
            (TermData::App(f1, a1), TermData::App(f2, a2)) => f1 == f2 && a1 == a2,
            (TermData::Lambda(i1, d1, b1), TermData::Lambda(i2, d2, b2))
            | (TermData::Pi(i1, d1, b1), TermData::Pi(i2, d2, b2)) => {
                i1 == i2 && d1 == d2 && b1 == b2
            }
            _ => false,
        }
    }
}

impl Eq for Term {}

impl std::hash::Hash for Term {
    fn hash<H: std::hash::Hasher>(&self, state: &mut H) {
        std::mem::discriminant(self.data()).hash(state);
        match self.data() {
            TermData::BoundVar(i) => i.hash(state),
            TermData::FreeVar(id, _) => id.hash(state),
            TermData::Meta(id, _) => id.hash(state),
            TermData::Const(n, ls) => {
                n.hash(state);
                ls.hash(state);
            }
            TermData::Sort(l) => l.hash(state),
            TermData::App(f, a) => {
                f.hash(state);
                a.hash(state);
            }
            TermData::Lambda(i, d, b) | TermData::Pi(i, d, b) => {
                i.hash(state);
                d.hash(state);
                b.hash(state);
            }
        }
    }
}

impl fmt::Debug for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.data() {
            TermData::BoundVar(i) => write!(f, "#{i}"),
            TermData::FreeVar(id, _) => write!(f, "{id}"),
            TermData::Meta(id, _) => write!(f, "{id}"),
            TermData::Const(n, ls) => {
                if ls.is_empty() {
                    write!(f, "{n}")
                } else {
                    write!(f, "{n}.{{")?;
                    for (i, l) in ls.iter().enumerate() {
                        if i > 0 {
                            write!(f, ", ")?;
                        }
                        write!(f, "{l}")?;
                    }
                    write!(f, "}}")
                }
            }
            TermData::Sort(l) => write!(f, "Sort {l}"),
            TermData::App(g, a) => write!(f, "({:?} {:?})", g, a),
            TermData::Lambda(_, d, b) => write!(f, "(fun : {:?}, {:?})", d, b),
            TermData::Pi(_, d, b) => write!(f, "(Pi : {:?}, {:?})", d, b),
        }
    }
}

/// Close `body` over the given locals as nested lambdas:
/// `abstract_lambda([l1 : A1, l2 : A2 l1], t)` is
/// `λ (x1 : A1) (x2 : A2 x1), t[l1:=x1, l2:=x2]`.
///
/// The locals must form a telescope (each type referencing only earlier
/// locals); folding from the innermost local outward rewrites references in
/// the already-wrapped domains at the correct depth.
pub fn abstract_lambda(locals: &[(Term, BinderInfo)], body: &Term) -> Term {
    abstract_binder(locals, body, true)
}

/// Like `abstract_lambda`, producing a Π-telescope.
pub fn abstract_pi(locals: &[(Term, BinderInfo)], body: &Term) -> Term {
    abstract_binder(locals, body, false)
}

fn abstract_binder(locals: &[(Term, BinderInfo)], body: &Term, lambda: bool) -> Term {
    let mut r = body.clone();
    for (l, info) in locals.iter().rev() {
        let id = l.fvar_id().expect("abstract_lambda: locals must be free variables");
        let dom = l.fvar_type().unwrap().clone();
        r = r.abstract_fvar(id);
        r = if lambda {
            mk_lambda(*info, dom, r)
        } else {
            mk_pi(*info, dom, r)
        };
    }
    r
}

/// Telescope of locals, outermost first.
#[derive(Clone, Default)]
pub struct LocalContext {
    entries: Vec<(Term, BinderInfo)>,
}

impl LocalContext {
    pub fn new() -> LocalContext {
        LocalContext::default()
    }

    /// Create a fresh local of type `ty`, push it, and return it.
    pub fn push_local(&mut self, ty: Term, info: BinderInfo) -> Term {
        let l = mk_local(ty);
        self.entries.push((l.clone(), info));
        l
    }

    pub fn entries(&self) -> &[(Term, BinderInfo)] {
        &self.entries
    }

    /// Drop locals pushed after the context had `len` entries.
    pub fn truncate(&mut self, len: usize) {
        self.entries.truncate(len);
    }

    pub fn fvars(&self) -> Vec<Term> {
        self.entries.iter().map(|(l, _)| l.clone()).collect()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Fresh metavariable for a hole of type `ty` in context `lctx`: returns the
/// applied form `?m l1 … ln` where the bare `?m` has type `Π lctx, ty`.
pub fn mk_meta(lctx: &LocalContext, ty: &Term) -> Term {
    let pi_ty = abstract_pi(lctx.entries(), ty);
    let m = mk_meta_const(fresh_meta_id(), pi_ty);
    mk_app_spine(m, lctx.fvars())
}

/// Fresh metavariable whose type is itself unknown: builds `?t : Π lctx,
/// Sort ?u`, then `?m : Π lctx, ?t l̄`, and returns (`?m l̄`, `?t l̄`).
pub fn mk_meta_unknown_type(lctx: &LocalContext) -> (Term, Term) {
    let sort = mk_sort(Level::Meta(fresh_level_meta_id()));
    let ty_meta_applied = mk_meta(lctx, &sort);
    let m = mk_meta(lctx, &ty_meta_applied);
    (m, ty_meta_applied)
}

/// Like [`mk_meta`], but over a raw telescope instead of a `LocalContext`.
pub fn mk_meta_over(locals: &[(Term, BinderInfo)], ty: &Term) -> Term {
    let pi = abstract_pi(locals, ty);
    let m = mk_meta_const(fresh_meta_id(), pi);
    mk_app_spine(m, locals.iter().map(|(l, _)| l.clone()))
}

/// A fresh hole over the telescope whose type is itself a fresh hole.
pub fn mk_meta_unknown_over(locals: &[(Term, BinderInfo)]) -> Term {
    let sort = mk_sort(Level::Meta(fresh_level_meta_id()));
    let ty = mk_meta_over(locals, &sort);
    mk_meta_over(locals, &ty)
}


/// Open every outermost Π binder with a fresh local, returning the telescope
/// (local fvar terms paired with binder info) and the fully instantiated body.
pub fn open_pi_telescope(t: &Term) -> (Vec<(Term, BinderInfo)>, Term) {
    let mut tele = Vec::new();
    let mut cur = t.clone();
    loop {
        let (info, dom, body) = match cur.data() {
            TermData::Pi(info, dom, body) => (*info, dom.clone(), body.clone()),
            _ => break,
        };
        let l = mk_local(dom);
        cur = body.instantiate(&l);
        tele.push((l, info));
    }
    (tele, cur)
}

/// Does `t` contain a constant with this name anywhere, including inside the
/// type annotations of free variables and metavariables?
pub fn mentions_const(t: &Term, name: &Name) -> bool {
    match t.data() {
        TermData::Const(n, _) => n == name,
        TermData::App(f, a) => mentions_const(f, name) || mentions_const(a, name),
        TermData::Lambda(_, d, b) | TermData::Pi(_, d, b) => {
            mentions_const(d, name) || mentions_const(b, name)
        }
        TermData::FreeVar(_, ty) | TermData::Meta(_, ty) => mentions_const(ty, name),
        TermData::BoundVar(_) | TermData::Sort(_) => false,
    }
}
