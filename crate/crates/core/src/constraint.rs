use crate::env::{Environment, Transparency};
use crate::justify::Justification;
use crate::reduce::{is_stuck, whnf, Stuck};
use crate::term::{FreeVarId, MetaId, Term, TermData};
use std::fmt;
use std::sync::Arc;

/// An equation `lhs ≐ rhs` whose solvability is tracked by `just`.
#[derive(Clone)]
pub struct UnifConstraint {
    pub lhs: Term,
    pub rhs: Term,
    pub just: Justification,
}

impl UnifConstraint {
    pub fn new(lhs: Term, rhs: Term, just: Justification) -> Self {
        UnifConstraint { lhs, rhs, just }
    }
}

impl fmt::Display for UnifConstraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} ≐ {}", self.lhs, self.rhs)
    }
}

impl fmt::Debug for UnifConstraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

/// Everything a chooser may consult when producing its alternatives.
pub struct ChoiceCtx<'a> {
    pub env: &'a Environment,
    /// The applied metavariable the choice will ultimately solve.
    pub meta: Term,
    /// Its type with the current substitution applied.
    pub ty: Term,
    pub just: Justification,
}

/// One alternative: either a batch of constraints to try under a fresh
/// assumption, or a deferred failure that is reported if it is reached.
pub type Alternative = Result<Vec<Constraint>, String>;

/// Lazily produced alternatives; pulled one at a time, never re-pulled.
pub type Alternatives = Box<dyn Iterator<Item = Alternative>>;

pub type Chooser = Arc<dyn Fn(&ChoiceCtx) -> Alternatives>;

/// A suspended enumeration of candidate solutions for a metavariable
/// (overloads, type-class instances, coercions).
#[derive(Clone)]
pub struct ChoiceConstraint {
    /// Applied metavariable `?m l̄` being solved.
    pub meta: Term,
    /// Type that guides the choice; on-demand choices stay asleep until its
    /// head is no longer blocked on a metavariable.
    pub ty: Term,
    pub chooser: Chooser,
    pub ondemand: bool,
    /// Human-readable tag for traces and error messages.
    pub desc: String,
    pub just: Justification,
}

impl fmt::Debug for ChoiceConstraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "choice[{}] {} : {}{}",
            self.desc,
            self.meta,
            self.ty,
            if self.ondemand { " (on demand)" } else { "" }
        )
    }
}

#[derive(Clone, Debug)]
pub enum Constraint {
    Unify(UnifConstraint),
    Choice(ChoiceConstraint),
}

impl Constraint {
    pub fn just(&self) -> &Justification {
        match self {
            Constraint::Unify(c) => &c.just,
            Constraint::Choice(c) => &c.just,
        }
    }

    pub fn with_just(&self, just: Justification) -> Constraint {
        match self {
            Constraint::Unify(c) => Constraint::Unify(UnifConstraint {
                lhs: c.lhs.clone(),
                rhs: c.rhs.clone(),
                just,
            }),
            Constraint::Choice(c) => {
                let mut c = c.clone();
                c.just = just;
                Constraint::Choice(c)
            }
        }
    }
}

impl fmt::Display for Constraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Constraint::Unify(c) => write!(f, "{c}"),
            Constraint::Choice(c) => write!(f, "{c:?}"),
        }
    }
}

/// Processing priority, most eager first. Within a category the queue is
/// first-in-first-out.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Category {
    /// `?m x̄ ≐ t` in the pattern fragment: solved by direct assignment.
    Pattern,
    /// On-demand choice whose guiding type has become rigid.
    Ready,
    /// Ordinary choice (overloads).
    Regular,
    /// `c s̄ ≐ c t̄` for an unfoldable definition `c`.
    Delta,
    /// Flex side applied to free variables that fail distinctness/scope.
    QuasiPattern,
    /// Flex side applied to at least one non-variable argument.
    FlexRigid,
    /// A side is a recursor application blocked on a metavariable.
    Recursor,
    /// Waiting for more information (on-demand choices, level equations).
    Postponed,
    /// Both heads are metavariables.
    FlexFlex,
}

impl Category {
    pub fn rank(self) -> u8 {
        match self {
            Category::Pattern => 0,
            Category::Ready => 1,
            Category::Regular => 2,
            Category::Delta => 3,
            Category::QuasiPattern => 4,
            Category::FlexRigid => 5,
            Category::Recursor => 6,
            Category::Postponed => 7,
            Category::FlexFlex => 8,
        }
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Category::Pattern => "pattern",
            Category::Ready => "ready",
            Category::Regular => "regular",
            Category::Delta => "delta",
            Category::QuasiPattern => "quasi-pattern",
            Category::FlexRigid => "flex-rigid",
            Category::Recursor => "recursor",
            Category::Postponed => "postponed",
            Category::FlexFlex => "flex-flex",
        };
        f.write_str(s)
    }
}

fn stuck_metas(env: &Environment, lhs: &Term, rhs: &Term) -> Vec<MetaId> {
    let mut out = Vec::new();
    for side in [lhs, rhs] {
        if let Some(st) = is_stuck(env, Transparency::Default, side) {
            let m = st.meta();
            if !out.contains(&m) {
                out.push(m);
            }
        }
    }
    out
}

/// Is `?m ā ≐ t` a Miller pattern: arguments are distinct free variables,
/// every free variable of `t` is among them, and `?m` does not occur in `t`?
pub fn is_pattern(s: &Term, t: &Term) -> bool {
    let (h, args) = s.spine();
    let m = match h.data() {
        TermData::Meta(m, _) => *m,
        _ => return false,
    };
    let mut ids: Vec<FreeVarId> = Vec::with_capacity(args.len());
    for a in &args {
        match a.fvar_id() {
            Some(id) if !ids.contains(&id) => ids.push(id),
            _ => return false,
        }
    }
    if t.occurs_meta(m) {
        return false;
    }
    let mut tfvars = Vec::new();
    t.collect_fvars(&mut tfvars);
    tfvars.iter().all(|id| ids.contains(id))
}

/// Classify a simplified (irreducible by `simp`) equation, returning the
/// category and the metavariables whose assignment should wake it.
pub fn classify_unify(env: &Environment, c: &UnifConstraint) -> (Category, Vec<MetaId>) {
    let lhs = &c.lhs;
    let rhs = &c.rhs;
    // Same unfoldable definition on both sides.
    if let (Some((n1, _)), Some((n2, _))) = (lhs.head_const(), rhs.head_const()) {
        if n1 == n2 {
            if let Some(d) = env.get(&n1) {
                if d.is_definition() && Transparency::Default.permits(d.hint()) {
                    return (Category::Delta, stuck_metas(env, lhs, rhs));
                }
            }
        }
    }
    let lflex = matches!(lhs.head().data(), TermData::Meta(..));
    let rflex = matches!(rhs.head().data(), TermData::Meta(..));
    if lflex || rflex {
        let (s, t) = if lflex { (lhs, rhs) } else { (rhs, lhs) };
        if is_pattern(s, t) {
            return (Category::Pattern, stuck_metas(env, lhs, rhs));
        }
        if lflex && rflex {
            return (Category::FlexFlex, stuck_metas(env, lhs, rhs));
        }
        let umetas = stuck_metas(env, lhs, rhs);
        if matches!(
            is_stuck(env, Transparency::Default, t),
            Some(Stuck::Recursor { .. })
        ) {
            return (Category::Recursor, umetas);
        }
        let (_, args) = s.spine();
        if args.iter().all(|a| a.fvar_id().is_some()) {
            return (Category::QuasiPattern, umetas);
        }
        return (Category::FlexRigid, umetas);
    }
    // Neither side is meta-headed: a level equation between sorts, or a
    // recursor blocked on a metavariable somewhere below the head.
    if matches!(lhs.data(), TermData::Sort(_)) && matches!(rhs.data(), TermData::Sort(_)) {
        return (Category::Postponed, Vec::new());
    }
    (Category::Recursor, stuck_metas(env, lhs, rhs))
}

/// Classify a choice constraint.
pub fn classify_choice(env: &Environment, c: &ChoiceConstraint) -> (Category, Vec<MetaId>) {
    if !c.ondemand {
        return (Category::Regular, Vec::new());
    }
    let ty = whnf(env, Transparency::Default, &c.ty);
    match is_stuck(env, Transparency::Default, &ty) {
        Some(st) => (Category::Postponed, vec![st.meta()]),
        None => (Category::Ready, Vec::new()),
    }
}

pub fn classify(env: &Environment, c: &Constraint) -> (Category, Vec<MetaId>) {
    match c {
        Constraint::Unify(u) => classify_unify(env, u),
        Constraint::Choice(ch) => classify_choice(env, ch),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::justify::Justification;
    use crate::term::{mk_app, mk_const, mk_local, mk_meta_const, fresh_meta_id};

    fn just() -> Justification {
        Justification::asserted(None, "test")
    }

    fn c(n: &str) -> Term {
        mk_const(n, vec![])
    }

    #[test]
    fn pattern_detection() {
        let nat = c("nat");
        let x = mk_local(nat.clone());
        let y = mk_local(nat.clone());
        let m = mk_meta_const(fresh_meta_id(), nat.clone());
        // ?m x y ≐ f x  — pattern
        let s = mk_app(mk_app(m.clone(), x.clone()), y.clone());
        assert!(is_pattern(&s, &mk_app(c("f"), x.clone())));
        // repeated variable  ?m x x — not a pattern
        let rep = mk_app(mk_app(m.clone(), x.clone()), x.clone());
        assert!(!is_pattern(&rep, &c("a")));
        // escaping variable — not a pattern
        assert!(!is_pattern(&mk_app(m.clone(), x.clone()), &mk_app(c("f"), y.clone())));
        // occurs check
        assert!(!is_pattern(&mk_app(m.clone(), x), &mk_app(c("f"), m)));
    }

    #[test]
    fn classification_order() {
        let env = Environment::new();
        let nat = c("nat");
        let x = mk_local(nat.clone());
        let m1 = mk_meta_const(fresh_meta_id(), nat.clone());
        let m2 = mk_meta_const(fresh_meta_id(), nat.clone());
        // flex-flex that is also a pattern classifies as pattern
        let u = UnifConstraint::new(mk_app(m1.clone(), x.clone()), m2.clone(), just());
        assert_eq!(classify_unify(&env, &u).0, Category::Pattern);
        // repeated fvar: quasi-pattern
        let u = UnifConstraint::new(
            mk_app(mk_app(m1.clone(), x.clone()), x.clone()),
            mk_app(c("f"), x.clone()),
            just(),
        );
        assert_eq!(classify_unify(&env, &u).0, Category::QuasiPattern);
        // non-variable argument: flex-rigid
        let u = UnifConstraint::new(
            mk_app(m1.clone(), c("a")),
            mk_app(c("f"), x.clone()),
            just(),
        );
        assert_eq!(classify_unify(&env, &u).0, Category::FlexRigid);
        // both flex, lhs non-pattern: flex-flex
        let u = UnifConstraint::new(
            mk_app(m1.clone(), c("a")),
            mk_app(m2.clone(), c("b")),
            just(),
        );
        assert_eq!(classify_unify(&env, &u).0, Category::FlexFlex);
    }
}
