use crate::constraint::UnifConstraint;
use crate::env::{Environment, Transparency};
use crate::justify::Justification;
use crate::level::{solve_level_eq, Level, LevelEq, LevelMetaId};
use crate::reduce::{is_stuck, unfold, whnf_core};
use crate::term::{mk_app, mk_local, Term, TermData};
use crate::typing::TypeChecker;

/// The outcome of simplifying one equation: equations that could not be
/// decomposed further (each blocked on a metavariable, a same-definition
/// head, or an undetermined level), plus any level assignments discovered
/// along the way. The solver must record the assignments *before* visiting
/// the residual constraints.
#[derive(Debug, Default)]
pub struct SimpResult {
    pub residuals: Vec<UnifConstraint>,
    pub level_assignments: Vec<(LevelMetaId, Level)>,
}

/// A definitive incompatibility, with the offending sides rendered.
#[derive(Debug, Clone)]
pub struct SimpFail {
    pub msg: String,
}

fn fail<T>(s: &Term, t: &Term) -> Result<T, SimpFail> {
    Err(SimpFail {
        msg: format!("failed to unify\n  {s}\nwith\n  {t}"),
    })
}

/// Simplify `c` as far as possible: β/ι-normalize heads, delete identical
/// sides, solve sort equations, decompose binders and rigid applications,
/// η-expand across a λ, and unfold mismatched definitions depth-directed.
pub fn simp(env: &Environment, c: &UnifConstraint) -> Result<SimpResult, SimpFail> {
    let mut out = SimpResult::default();
    simp_rec(env, &c.lhs, &c.rhs, &c.just, &mut out)?;
    Ok(out)
}

fn defn_depth(env: &Environment, t: &Term) -> Option<u32> {
    match t.head().data() {
        TermData::Const(n, _) => {
            let d = env.get(n)?;
            if d.is_definition() && Transparency::Default.permits(d.hint()) {
                Some(env.depth_of(n))
            } else {
                None
            }
        }
        _ => None,
    }
}

fn meta_free(t: &Term) -> bool {
    !t.has_meta() && !t.has_level_meta()
}

fn simp_rec(
    env: &Environment,
    s0: &Term,
    t0: &Term,
    j: &Justification,
    out: &mut SimpResult,
) -> Result<(), SimpFail> {
    let mut s = whnf_core(env, Transparency::Default, s0);
    let mut t = whnf_core(env, Transparency::Default, t0);
    loop {
        if s == t {
            return Ok(());
        }
        // Fully concrete sides: definitional equality decides now.
        if meta_free(&s) && meta_free(&t) {
            let tc = TypeChecker::new(env, Transparency::Default);
            if tc.is_def_eq(&s, &t) {
                return Ok(());
            }
            return fail(&s, &t);
        }
        match (s.data(), t.data()) {
            (TermData::Sort(a), TermData::Sort(b)) => {
                return match solve_level_eq(a, b) {
                    LevelEq::True => Ok(()),
                    LevelEq::False => fail(&s, &t),
                    LevelEq::Assign(m, l) => {
                        out.level_assignments.push((m, l));
                        Ok(())
                    }
                    LevelEq::Stuck => {
                        out.residuals
                            .push(UnifConstraint::new(s.clone(), t.clone(), j.clone()));
                        Ok(())
                    }
                };
            }
            (TermData::Lambda(_, d1, b1), TermData::Lambda(_, d2, b2))
            | (TermData::Pi(_, d1, b1), TermData::Pi(_, d2, b2)) => {
                let l = mk_local(d1.clone());
                let (b1, b2) = (b1.instantiate(&l), b2.instantiate(&l));
                simp_rec(env, d1, d2, j, out)?;
                return simp_rec(env, &b1, &b2, j, out);
            }
            // η: match a λ against a non-λ by applying both to a fresh local.
            (TermData::Lambda(_, d, b), _) => {
                let l = mk_local(d.clone());
                let (b, tl) = (b.instantiate(&l), mk_app(t.clone(), l));
                return simp_rec(env, &b, &tl, j, out);
            }
            (_, TermData::Lambda(_, d, b)) => {
                let l = mk_local(d.clone());
                let (b, sl) = (b.instantiate(&l), mk_app(s.clone(), l));
                return simp_rec(env, &sl, &b, j, out);
            }
            _ => {}
        }
        // Blocked on a metavariable (possibly below a recursor): residual.
        if is_stuck(env, Transparency::Default, &s).is_some()
            || is_stuck(env, Transparency::Default, &t).is_some()
        {
            out.residuals
                .push(UnifConstraint::new(s.clone(), t.clone(), j.clone()));
            return Ok(());
        }
        let (sh, sargs) = s.spine();
        let (th, targs) = t.spine();
        match (sh.data(), th.data()) {
            (TermData::FreeVar(x, _), TermData::FreeVar(y, _)) if x == y => {
                if sargs.len() != targs.len() {
                    return fail(&s, &t);
                }
                for (a, b) in sargs.iter().zip(&targs) {
                    simp_rec(env, a, b, j, out)?;
                }
                return Ok(());
            }
            (TermData::Const(n1, l1), TermData::Const(n2, l2)) if n1 == n2 => {
                let decl = env.get(n1);
                let unfoldable = decl
                    .map(|d| d.is_definition() && Transparency::Default.permits(d.hint()))
                    .unwrap_or(false);
                if unfoldable {
                    // Leave as one constraint for the delta processor,
                    // which weighs argwise decomposition against unfolding.
                    out.residuals
                        .push(UnifConstraint::new(s.clone(), t.clone(), j.clone()));
                    return Ok(());
                }
                // Rigid head (constructor, inductive, axiom, recursor with no
                // stuck argument, irreducible definition): injective on its
                // levels and arguments.
                if l1.len() != l2.len() || sargs.len() != targs.len() {
                    return fail(&s, &t);
                }
                for (a, b) in l1.iter().zip(l2) {
                    match solve_level_eq(a, b) {
                        LevelEq::True => {}
                        LevelEq::False => return fail(&s, &t),
                        LevelEq::Assign(m, l) => out.level_assignments.push((m, l)),
                        // Keep the undecided level equation as a sort
                        // equation so it lands in the postponed category.
                        LevelEq::Stuck => out.residuals.push(UnifConstraint::new(
                            crate::term::mk_sort(a.clone()),
                            crate::term::mk_sort(b.clone()),
                            j.clone(),
                        )),
                    }
                }
                for (a, b) in sargs.iter().zip(&targs) {
                    simp_rec(env, a, b, j, out)?;
                }
                return Ok(());
            }
            _ => {}
        }
        // Distinct heads. Unfold definitions, deeper side first, and retry.
        match (defn_depth(env, &s), defn_depth(env, &t)) {
            (None, None) => return fail(&s, &t),
            (Some(_), None) => {
                s = whnf_core(env, Transparency::Default, &unfold(env, &s).unwrap());
            }
            (None, Some(_)) => {
                t = whnf_core(env, Transparency::Default, &unfold(env, &t).unwrap());
            }
            (Some(ds), Some(dt)) => {
                if ds >= dt {
                    s = whnf_core(env, Transparency::Default, &unfold(env, &s).unwrap());
                }
                if dt >= ds {
                    t = whnf_core(env, Transparency::Default, &unfold(env, &t).unwrap());
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::{DeclKind, Declaration, ReducibilityHint};
    use crate::inductive::{elaborate_inductive, InductiveSpec};
    use crate::level::LevelMetaId;
    use crate::name::Name;
    use crate::term::{
        fresh_level_meta_id, fresh_meta_id, mk_app_spine, mk_const, mk_local, mk_meta_const,
        mk_pi, mk_sort, BinderInfo,
    };

    fn just() -> Justification {
        Justification::asserted(None, "test")
    }

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
    fn constructor_heads_decompose() {
        let env = nat_env();
        let nat = mk_const("nat", vec![]);
        let m = mk_meta_const(fresh_meta_id(), nat.clone());
        // succ ?m ≐ succ (succ zero)  ⇒  residual-free assignment candidate ?m ≐ succ zero
        let c = UnifConstraint::new(
            mk_app(mk_const("nat.succ", vec![]), m.clone()),
            num(2),
            just(),
        );
        let r = simp(&env, &c).unwrap();
        assert_eq!(r.residuals.len(), 1);
        assert_eq!(r.residuals[0].lhs, m);
        assert_eq!(r.residuals[0].rhs, num(1));
        // succ ?m ≐ zero fails outright.
        let c = UnifConstraint::new(
            mk_app(mk_const("nat.succ", vec![]), m.clone()),
            num(0),
            just(),
        );
        assert!(simp(&env, &c).is_err());
    }

    #[test]
    fn meta_free_defeq_discharges() {
        let mut env = nat_env();
        env.insert(Declaration {
            name: Name::from("two"),
            univ_params: vec![],
            ty: mk_const("nat", vec![]),
            kind: DeclKind::Definition {
                value: num(2),
                hint: ReducibilityHint::Semireducible,
                depth: 1,
            },
        });
        let c = UnifConstraint::new(mk_const("two", vec![]), num(2), just());
        let r = simp(&env, &c).unwrap();
        assert!(r.residuals.is_empty());
        let c = UnifConstraint::new(mk_const("two", vec![]), num(3), just());
        assert!(simp(&env, &c).is_err());
    }

    #[test]
    fn sort_equations_assign_or_stick() {
        let env = Environment::new();
        let u = fresh_level_meta_id();
        let c = UnifConstraint::new(
            mk_sort(Level::Meta(u)),
            mk_sort(Level::of_nat(2)),
            just(),
        );
        let r = simp(&env, &c).unwrap();
        assert_eq!(r.level_assignments, vec![(u, Level::of_nat(2))]);
        // max(?u, ?v) ≐ 1 cannot commit: residual.
        let v = fresh_level_meta_id();
        let c = UnifConstraint::new(
            mk_sort(Level::max(Level::Meta(u), Level::Meta(v))),
            mk_sort(Level::of_nat(1)),
            just(),
        );
        let r = simp(&env, &c).unwrap();
        assert_eq!(r.residuals.len(), 1);
        let _ = LevelMetaId(0);
    }

    #[test]
    fn eta_and_binders() {
        let env = nat_env();
        let nat = mk_const("nat", vec![]);
        let succ = mk_const("nat.succ", vec![]);
        // (λ x, succ x) ≐ succ — discharged by η.
        let eta = crate::term::mk_lambda(
            BinderInfo::Explicit,
            nat.clone(),
            mk_app(succ.clone(), crate::term::mk_bvar(0)),
        );
        let r = simp(&env, &UnifConstraint::new(eta, succ.clone(), just())).unwrap();
        assert!(r.residuals.is_empty());
        // Π decomposition reaches the domains.
        let m = mk_meta_const(fresh_meta_id(), mk_sort(Level::of_nat(1)));
        let p1 = mk_pi(BinderInfo::Explicit, m.clone(), nat.clone());
        let p2 = mk_pi(BinderInfo::Explicit, nat.clone(), nat.clone());
        let r = simp(&env, &UnifConstraint::new(p1, p2, just())).unwrap();
        assert_eq!(r.residuals.len(), 1);
        assert_eq!(r.residuals[0].lhs, m);
        assert_eq!(r.residuals[0].rhs, nat);
    }

    #[test]
    fn same_definition_heads_become_delta_residual() {
        let mut env = nat_env();
        let nat = mk_const("nat", vec![]);
        // add x y := x (a stand-in definition; only the head matters here)
        env.insert(Declaration {
            name: Name::from("add"),
            univ_params: vec![],
            ty: mk_pi(
                BinderInfo::Explicit,
                nat.clone(),
                mk_pi(BinderInfo::Explicit, nat.clone(), nat.clone()),
            ),
            kind: DeclKind::Definition {
                value: crate::term::mk_lambda(
                    BinderInfo::Explicit,
                    nat.clone(),
                    crate::term::mk_lambda(
                        BinderInfo::Explicit,
                        nat.clone(),
                        crate::term::mk_bvar(1),
                    ),
                ),
                hint: ReducibilityHint::Semireducible,
                depth: 1,
            },
        });
        let m = mk_meta_const(fresh_meta_id(), nat.clone());
        let x = mk_local(nat.clone());
        let lhs = mk_app_spine(mk_const("add", vec![]), [m.clone(), x.clone()]);
        let rhs = mk_app_spine(mk_const("add", vec![]), [x.clone(), m.clone()]);
        let r = simp(&env, &UnifConstraint::new(lhs.clone(), rhs.clone(), just())).unwrap();
        assert_eq!(r.residuals.len(), 1, "kept whole for the delta processor");
        assert_eq!(r.residuals[0].lhs, lhs);
    }
}
