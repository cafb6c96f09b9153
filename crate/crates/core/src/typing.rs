use crate::env::{DeclKind, Declaration, Environment, Transparency};
use crate::level::Level;
use crate::name::Name;
use crate::reduce::{unfold, whnf, whnf_core};
use crate::term::{abstract_pi, mk_app, mk_local, mk_sort, BinderInfo, Term, TermData};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum TypeError {
    #[error("unbound variable index #{0}")]
    UnboundVar(u32),
    #[error("unknown constant `{0}`")]
    UnknownConst(Name),
    #[error("constant `{0}` expects {1} universe arguments, got {2}")]
    LevelArity(Name, usize, usize),
    #[error("type expected, got `{0}` of type `{1}`")]
    NotASort(Term, Term),
    #[error("function expected, but `{0}` has type `{1}`")]
    FunctionExpected(Term, Term),
    #[error("argument `{arg}` has type `{got}` but `{want}` was expected")]
    AppMismatch { arg: Term, got: Term, want: Term },
    #[error("`{value}` has type `{got}` but is declared with type `{want}`")]
    DeclMismatch { value: Term, got: Term, want: Term },
    #[error("declaration `{0}` already exists")]
    AlreadyDeclared(Name),
    #[error("declaration `{0}` must not contain metavariables")]
    HasMeta(Name),
    #[error("declaration `{0}` must be closed")]
    NotClosed(Name),
    #[error("duplicate universe parameter in `{0}`")]
    DupUnivParam(Name),
}

/// Kernel-style bidirectional checker. `mode` controls which definitions
/// definitional equality may unfold; the final arbiter runs at
/// `Transparency::All`.
pub struct TypeChecker<'e> {
    pub env: &'e Environment,
    pub mode: Transparency,
}

impl<'e> TypeChecker<'e> {
    pub fn new(env: &'e Environment, mode: Transparency) -> Self {
        TypeChecker { env, mode }
    }

    pub fn whnf(&self, t: &Term) -> Term {
        whnf(self.env, self.mode, t)
    }

    /// Infer the type of a locally closed term. Free variables and
    /// metavariables carry their own types, so no context argument is
    /// needed; applications are checked, not merely inferred.
    pub fn infer(&self, t: &Term) -> Result<Term, TypeError> {
        match t.data() {
            TermData::BoundVar(i) => Err(TypeError::UnboundVar(*i)),
            TermData::FreeVar(_, ty) | TermData::Meta(_, ty) => Ok(ty.clone()),
            TermData::Sort(l) => Ok(mk_sort(Level::Succ(l.clone().into()).normalize())),
            TermData::Const(n, levels) => {
                let decl = self
                    .env
                    .get(n)
                    .ok_or_else(|| TypeError::UnknownConst(n.clone()))?;
                if decl.univ_params.len() != levels.len() {
                    return Err(TypeError::LevelArity(
                        n.clone(),
                        decl.univ_params.len(),
                        levels.len(),
                    ));
                }
                Ok(decl.ty_at(levels))
            }
            TermData::App(f, a) => {
                let fty = self.infer(f)?;
                let fty = self.whnf(&fty);
                match fty.data() {
                    TermData::Pi(_, dom, body) => {
                        let aty = self.infer(a)?;
                        if !self.is_def_eq(&aty, dom) {
                            return Err(TypeError::AppMismatch {
                                arg: a.clone(),
                                got: aty,
                                want: dom.clone(),
                            });
                        }
                        Ok(body.instantiate(a))
                    }
                    _ => Err(TypeError::FunctionExpected(f.clone(), fty)),
                }
            }
            TermData::Lambda(info, dom, body) => {
                self.sort_of(dom)?;
                let l = mk_local(dom.clone());
                let body_ty = self.infer(&body.instantiate(&l))?;
                Ok(abstract_pi(&[(l, *info)], &body_ty))
            }
            TermData::Pi(_, dom, body) => {
                let s1 = self.sort_of(dom)?;
                let l = mk_local(dom.clone());
                let s2 = self.sort_of(&body.instantiate(&l))?;
                // Propositions absorb: a function type into Prop is a Prop
                // regardless of its domain; otherwise take the max.
                if s2.is_zero() {
                    Ok(mk_sort(Level::Zero))
                } else {
                    Ok(mk_sort(Level::max(s1, s2).normalize()))
                }
            }
        }
    }

    /// `t` must itself be a type: returns `ℓ` with `t : Sort ℓ`.
    pub fn sort_of(&self, t: &Term) -> Result<Level, TypeError> {
        let ty = self.infer(t)?;
        let ty = self.whnf(&ty);
        match ty.data() {
            TermData::Sort(l) => Ok(l.clone()),
            _ => Err(TypeError::NotASort(t.clone(), ty)),
        }
    }

    /// The type of `t` as a Π, or an error.
    pub fn ensure_pi(&self, t: &Term) -> Result<(BinderInfo, Term, Term), TypeError> {
        let ty = self.infer(t)?;
        let ty = self.whnf(&ty);
        match ty.data() {
            TermData::Pi(info, dom, body) => Ok((*info, dom.clone(), body.clone())),
            _ => Err(TypeError::FunctionExpected(t.clone(), ty)),
        }
    }

    pub fn check(&self, t: &Term, expected: &Term) -> Result<(), TypeError> {
        let got = self.infer(t)?;
        if self.is_def_eq(&got, expected) {
            Ok(())
        } else {
            Err(TypeError::DeclMismatch {
                value: t.clone(),
                got,
                want: expected.clone(),
            })
        }
    }

    fn unfoldable(&self, t: &Term) -> Option<u32> {
        match t.head().data() {
            TermData::Const(n, _) => {
                let d = self.env.get(n)?;
                if d.is_definition() && self.mode.permits(d.hint()) {
                    Some(self.env.depth_of(n))
                } else {
                    None
                }
            }
            _ => None,
        }
    }

    fn args_def_eq(&self, xs: &[Term], ys: &[Term]) -> bool {
        xs.len() == ys.len() && xs.iter().zip(ys).all(|(x, y)| self.is_def_eq(x, y))
    }

    /// Definitional equality with lazy, depth-directed δ-unfolding, η, and
    /// β/ι evaluation at the head.
    pub fn is_def_eq(&self, a0: &Term, b0: &Term) -> bool {
        if a0 == b0 {
            return true;
        }
        let mut a = whnf_core(self.env, self.mode, a0);
        let mut b = whnf_core(self.env, self.mode, b0);
        loop {
            if a == b {
                return true;
            }
            match (a.data(), b.data()) {
                (TermData::Sort(x), TermData::Sort(y)) => return x.defeq(y),
                (TermData::Lambda(_, d1, b1), TermData::Lambda(_, d2, b2))
                | (TermData::Pi(_, d1, b1), TermData::Pi(_, d2, b2)) => {
                    if !self.is_def_eq(d1, d2) {
                        return false;
                    }
                    let l = mk_local(d1.clone());
                    return self.is_def_eq(&b1.instantiate(&l), &b2.instantiate(&l));
                }
                (TermData::Lambda(_, d, body), _) => {
                    // η: compare pointwise against the non-λ side.
                    let l = mk_local(d.clone());
                    return self
                        .is_def_eq(&body.instantiate(&l), &mk_app(b.clone(), l));
                }
                (_, TermData::Lambda(_, d, body)) => {
                    let l = mk_local(d.clone());
                    return self
                        .is_def_eq(&mk_app(a.clone(), l.clone()), &body.instantiate(&l));
                }
                _ => {}
            }
            let (ha, aargs) = a.spine();
            let (hb, bargs) = b.spine();
            match (ha.data(), hb.data()) {
                (TermData::Const(n1, l1), TermData::Const(n2, l2)) if n1 == n2 => {
                    let same_levels =
                        l1.len() == l2.len() && l1.iter().zip(l2).all(|(x, y)| x.defeq(y));
                    if same_levels && self.args_def_eq(&aargs, &bargs) {
                        return true;
                    }
                    // Same head but different arguments: for definitions the
                    // comparison may still close after unfolding both.
                    if self.unfoldable(&ha).is_some() {
                        a = whnf_core(self.env, self.mode, &unfold(self.env, &a).unwrap());
                        b = whnf_core(self.env, self.mode, &unfold(self.env, &b).unwrap());
                        continue;
                    }
                    return false;
                }
                _ => {}
            }
            match (self.unfoldable(&a), self.unfoldable(&b)) {
                (Some(_), None) => {
                    a = whnf_core(self.env, self.mode, &unfold(self.env, &a).unwrap());
                }
                (None, Some(_)) => {
                    b = whnf_core(self.env, self.mode, &unfold(self.env, &b).unwrap());
                }
                (Some(da), Some(db)) => {
                    // Unfold the deeper definition first so both sides meet.
                    if da >= db {
                        a = whnf_core(self.env, self.mode, &unfold(self.env, &a).unwrap());
                    }
                    if db >= da {
                        b = whnf_core(self.env, self.mode, &unfold(self.env, &b).unwrap());
                    }
                }
                (None, None) => {
                    return match (ha.data(), hb.data()) {
                        (TermData::FreeVar(x, _), TermData::FreeVar(y, _)) if x == y => {
                            self.args_def_eq(&aargs, &bargs)
                        }
                        (TermData::Meta(x, _), TermData::Meta(y, _)) if x == y => {
                            self.args_def_eq(&aargs, &bargs)
                        }
                        _ => false,
                    };
                }
            }
        }
    }
}

/// Validate a declaration against an environment that does not yet contain
/// it. On success the caller inserts it unchanged.
pub fn check_declaration(env: &Environment, decl: &Declaration) -> Result<(), TypeError> {
    if env.contains(&decl.name) {
        return Err(TypeError::AlreadyDeclared(decl.name.clone()));
    }
    for (i, p) in decl.univ_params.iter().enumerate() {
        if decl.univ_params[..i].contains(p) {
            return Err(TypeError::DupUnivParam(decl.name.clone()));
        }
    }
    if !decl.ty.is_locally_closed() || decl.ty.has_fvar() {
        return Err(TypeError::NotClosed(decl.name.clone()));
    }
    if decl.ty.has_meta() {
        return Err(TypeError::HasMeta(decl.name.clone()));
    }
    let tc = TypeChecker::new(env, Transparency::All);
    tc.sort_of(&decl.ty)?;
    if let DeclKind::Definition { value, .. } = &decl.kind {
        if !value.is_locally_closed() || value.has_fvar() {
            return Err(TypeError::NotClosed(decl.name.clone()));
        }
        if value.has_meta() {
            return Err(TypeError::HasMeta(decl.name.clone()));
        }
        tc.check(value, &decl.ty)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::ReducibilityHint;
    use crate::inductive::{elaborate_inductive, InductiveSpec};
    use crate::term::{mk_bvar, mk_const, mk_lambda, mk_pi};

    fn nat_env() -> Environment {
        let mut env = Environment::new();
        let nat = mk_const("nat", vec![]);
        let spec = InductiveSpec {
            name: Name::from("nat"),
            univ_params: vec![],
            ty: mk_sort(Level::of_nat(1)),
            num_params: 0,
            constructors: vec![
                (Name::from("nat.zero"), nat.clone()),
                (
                    Name::from("nat.succ"),
                    mk_pi(BinderInfo::Explicit, nat.clone(), nat.clone()),
                ),
            ],
        };
        for d in elaborate_inductive(&env, &spec, &mut |_| None).unwrap() {
            env.insert(d);
        }
        env
    }

    fn num(n: u32) -> Term {
        let mut t = mk_const("nat.zero", vec![]);
        for _ in 0..n {
            t = mk_app(mk_const("nat.succ", vec![]), t);
        }
        t
    }

    #[test]
    fn infer_basics() {
        let env = nat_env();
        let tc = TypeChecker::new(&env, Transparency::All);
        let nat = mk_const("nat", vec![]);
        assert!(tc.is_def_eq(&tc.infer(&num(3)).unwrap(), &nat));
        // λ (A : Type) (a : A), a  :  Π (A : Type) (a : A), A
        let id = mk_lambda(
            BinderInfo::Explicit,
            mk_sort(Level::of_nat(1)),
            mk_lambda(BinderInfo::Explicit, mk_bvar(0), mk_bvar(0)),
        );
        let want = mk_pi(
            BinderInfo::Explicit,
            mk_sort(Level::of_nat(1)),
            mk_pi(BinderInfo::Explicit, mk_bvar(0), mk_bvar(1)),
        );
        assert!(tc.is_def_eq(&tc.infer(&id).unwrap(), &want));
        // Application type and mismatch.
        let app = mk_app(mk_app(id.clone(), nat.clone()), num(0));
        assert!(tc.is_def_eq(&tc.infer(&app).unwrap(), &nat));
        let bad = mk_app(mk_app(id, nat.clone()), nat.clone());
        assert!(matches!(tc.infer(&bad), Err(TypeError::AppMismatch { .. })));
    }

    #[test]
    fn pi_sorts_are_impredicative_in_prop() {
        let env = nat_env();
        let tc = TypeChecker::new(&env, Transparency::All);
        let nat = mk_const("nat", vec![]);
        // nat → Prop lives in Type, while Π (p : Prop), p lives in Prop.
        let into_prop = mk_pi(BinderInfo::Explicit, nat, mk_prop_t());
        assert!(tc.sort_of(&into_prop).unwrap().defeq(&Level::of_nat(1)));
        let all_props = mk_pi(BinderInfo::Explicit, mk_prop_t(), mk_bvar(0));
        assert!(tc.sort_of(&all_props).unwrap().is_zero());
    }

    fn mk_prop_t() -> Term {
        mk_sort(Level::Zero)
    }

    #[test]
    fn def_eq_delta_and_eta() {
        let mut env = nat_env();
        let nat = mk_const("nat", vec![]);
        env.insert(Declaration {
            name: Name::from("two"),
            univ_params: vec![],
            ty: nat.clone(),
            kind: DeclKind::Definition {
                value: num(2),
                hint: ReducibilityHint::Reducible,
                depth: 1,
            },
        });
        let tc = TypeChecker::new(&env, Transparency::Default);
        assert!(tc.is_def_eq(&mk_const("two", vec![]), &num(2)));
        assert!(!tc.is_def_eq(&mk_const("two", vec![]), &num(3)));
        // η: λ x, succ x ≡ succ
        let succ = mk_const("nat.succ", vec![]);
        let eta = mk_lambda(BinderInfo::Explicit, nat.clone(), mk_app(succ.clone(), mk_bvar(0)));
        assert!(tc.is_def_eq(&eta, &succ));
        // Irreducible definitions do not unfold below kernel transparency.
        env.insert(Declaration {
            name: Name::from("three"),
            univ_params: vec![],
            ty: nat.clone(),
            kind: DeclKind::Definition {
                value: num(3),
                hint: ReducibilityHint::Irreducible,
                depth: 1,
            },
        });
        let tc = TypeChecker::new(&env, Transparency::Default);
        assert!(!tc.is_def_eq(&mk_const("three", vec![]), &num(3)));
        let tc_all = TypeChecker::new(&env, Transparency::All);
        assert!(tc_all.is_def_eq(&mk_const("three", vec![]), &num(3)));
    }

    #[test]
    fn check_declaration_validates() {
        let env = nat_env();
        let nat = mk_const("nat", vec![]);
        let good = Declaration {
            name: Name::from("one"),
            univ_params: vec![],
            ty: nat.clone(),
            kind: DeclKind::Definition {
                value: num(1),
                hint: ReducibilityHint::Semireducible,
                depth: 1,
            },
        };
        assert!(check_declaration(&env, &good).is_ok());
        let bad = Declaration {
            name: Name::from("oops"),
            univ_params: vec![],
            ty: mk_prop_t(),
            kind: DeclKind::Definition {
                value: num(1),
                hint: ReducibilityHint::Semireducible,
                depth: 1,
            },
        };
        assert!(matches!(
            check_declaration(&env, &bad),
            Err(TypeError::DeclMismatch { .. })
        ));
    }
}
