//! Test-support code, compiled only with the `testing` feature: plain
//! reference implementations of the de Bruijn traversals (no cached-bits
//! shortcuts, no sharing), a seeded random term generator, and a direct
//! solver for pattern unification problems. Test targets cross-check the
//! optimized code paths against these.

use crate::env::Environment;
use crate::inductive::{elaborate_inductive, InductiveSpec};
use crate::level::Level;
use crate::name::Name;
use crate::term::{
    mk_app, mk_bvar, mk_const, mk_lambda, mk_local, mk_meta_over, mk_pi, mk_sort, BinderInfo,
    FreeVarId, Term, TermData,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Reference `instantiate`: replace dangling index 0 by the locally closed
/// `s`, lowering deeper dangling indices. Recurses into every node.
pub fn naive_instantiate(t: &Term, s: &Term) -> Term {
    naive_instantiate_at(t, 0, s)
}

fn naive_instantiate_at(t: &Term, depth: u32, s: &Term) -> Term {
    match t.data() {
        TermData::BoundVar(i) => {
            if *i == depth {
                s.clone()
            } else if *i > depth {
                mk_bvar(i - 1)
            } else {
                t.clone()
            }
        }
        TermData::App(f, a) => mk_app(
            naive_instantiate_at(f, depth, s),
            naive_instantiate_at(a, depth, s),
        ),
        TermData::Lambda(info, d, b) => mk_lambda(
            *info,
            naive_instantiate_at(d, depth, s),
            naive_instantiate_at(b, depth + 1, s),
        ),
        TermData::Pi(info, d, b) => mk_pi(
            *info,
            naive_instantiate_at(d, depth, s),
            naive_instantiate_at(b, depth + 1, s),
        ),
        TermData::FreeVar(..) | TermData::Meta(..) | TermData::Const(..) | TermData::Sort(_) => {
            t.clone()
        }
    }
}

/// Reference `abstract_fvar`: replace free variable `l` by a fresh dangling
/// index, shifting already-dangling indices up. Like the optimized version,
/// other free variables' stored types are left untouched.
pub fn naive_abstract(t: &Term, l: FreeVarId) -> Term {
    naive_abstract_at(t, 0, l)
}

fn naive_abstract_at(t: &Term, depth: u32, l: FreeVarId) -> Term {
    match t.data() {
        TermData::FreeVar(id, _) => {
            if *id == l {
                mk_bvar(depth)
            } else {
                t.clone()
            }
        }
        TermData::BoundVar(i) => {
            if *i >= depth {
                mk_bvar(i + 1)
            } else {
                t.clone()
            }
        }
        TermData::App(f, a) => mk_app(
            naive_abstract_at(f, depth, l),
            naive_abstract_at(a, depth, l),
        ),
        TermData::Lambda(info, d, b) => mk_lambda(
            *info,
            naive_abstract_at(d, depth, l),
            naive_abstract_at(b, depth + 1, l),
        ),
        TermData::Pi(info, d, b) => mk_pi(
            *info,
            naive_abstract_at(d, depth, l),
            naive_abstract_at(b, depth + 1, l),
        ),
        TermData::Meta(..) | TermData::Const(..) | TermData::Sort(_) => t.clone(),
    }
}

/// Seeded generator of well-scoped random terms.
pub struct TermGen {
    rng: ChaCha8Rng,
    consts: Vec<Name>,
}

impl TermGen {
    pub fn new(seed: u64) -> TermGen {
        TermGen {
            rng: ChaCha8Rng::seed_from_u64(seed),
            consts: ["A", "B", "f", "g", "k"].iter().map(|s| Name::from(*s)).collect(),
        }
    }

    pub fn rng(&mut self) -> &mut ChaCha8Rng {
        &mut self.rng
    }

    fn leaf(&mut self, binders: u32, scope: &[Term]) -> Term {
        let mut roll = self.rng.gen_range(0..10);
        if binders == 0 && roll < 3 {
            roll = 3;
        }
        if scope.is_empty() && (3..5).contains(&roll) {
            roll = 5;
        }
        match roll {
            0..=2 => mk_bvar(self.rng.gen_range(0..binders)),
            3..=4 => scope[self.rng.gen_range(0..scope.len())].clone(),
            5..=7 => {
                let i = self.rng.gen_range(0..self.consts.len());
                mk_const(self.consts[i].clone(), vec![])
            }
            _ => mk_sort(Level::of_nat(self.rng.gen_range(0..2))),
        }
    }

    /// A random term whose dangling indices are all below `binders` and
    /// whose free variables are drawn from `scope`.
    pub fn term_over(&mut self, budget: u32, binders: u32, scope: &[Term]) -> Term {
        if budget == 0 {
            return self.leaf(binders, scope);
        }
        match self.rng.gen_range(0..10) {
            0..=4 => mk_app(
                self.term_over(budget - 1, binders, scope),
                self.term_over(budget - 1, binders, scope),
            ),
            5..=6 => mk_lambda(
                BinderInfo::Explicit,
                self.term_over(budget / 2, binders, scope),
                self.term_over(budget - 1, binders + 1, scope),
            ),
            7 => mk_pi(
                BinderInfo::Explicit,
                self.term_over(budget / 2, binders, scope),
                self.term_over(budget - 1, binders + 1, scope),
            ),
            _ => self.leaf(binders, scope),
        }
    }

    /// A random term with up to `binders` dangling indices and no free
    /// variables.
    pub fn open_term(&mut self, budget: u32, binders: u32) -> Term {
        self.term_over(budget, binders, &[])
    }

    /// A random locally closed, variable-free term.
    pub fn closed_term(&mut self, budget: u32) -> Term {
        self.term_over(budget, 0, &[])
    }
}

/// A right-leaning spine of applications `f (f (… a))`, fully closed, for
/// exercising the closed-subtree short-circuit of the traversals.
pub fn deep_closed_chain(depth: u32) -> Term {
    let f = mk_const("f", vec![]);
    let mut t = mk_const("A", vec![]);
    for _ in 0..depth {
        t = mk_app(f.clone(), t);
    }
    t
}

/// A pattern (Miller) unification problem `?m x1 … xk ≐ rhs` together with
/// the telescope the holes were opened under.
pub struct PatternProblem {
    pub lhs: Term,
    pub rhs: Term,
    pub locals: Vec<(Term, BinderInfo)>,
}

/// Generates a solvable pattern problem: the arguments are distinct locals
/// and the right-hand side uses only those locals and constants.
pub fn gen_pattern_problem(g: &mut TermGen) -> PatternProblem {
    let k = g.rng().gen_range(0..4u32);
    let locals: Vec<(Term, BinderInfo)> = (0..k)
        .map(|i| {
            let ty = mk_const(if i % 2 == 0 { "A" } else { "B" }, vec![]);
            (mk_local(ty), BinderInfo::Explicit)
        })
        .collect();
    let scope: Vec<Term> = locals.iter().map(|(l, _)| l.clone()).collect();
    let rhs = g.term_over(3, 0, &scope);
    let lhs = mk_meta_over(&locals, &mk_const("A", vec![]));
    PatternProblem { lhs, rhs, locals }
}

/// Direct pattern unification: if `lhs` is a metavariable applied to
/// distinct free variables and every free variable of `rhs` is among them,
/// the unique solution for the bare metavariable is `λ x̄, rhs`. Built on the
/// reference traversals.
pub fn pattern_oracle(lhs: &Term, rhs: &Term) -> Option<Term> {
    let (h, args) = lhs.spine();
    if !matches!(h.data(), TermData::Meta(..)) {
        return None;
    }
    let mut ids = Vec::new();
    for a in &args {
        match a.data() {
            TermData::FreeVar(id, _) if !ids.contains(id) => ids.push(*id),
            _ => return None,
        }
    }
    let mut rhs_fvars = Vec::new();
    rhs.collect_fvars(&mut rhs_fvars);
    if rhs_fvars.iter().any(|v| !ids.contains(v)) {
        return None;
    }
    let mut body = rhs.clone();
    for a in args.iter().rev() {
        let TermData::FreeVar(id, ty) = a.data() else {
            unreachable!();
        };
        body = mk_lambda(BinderInfo::Explicit, ty.clone(), naive_abstract(&body, *id));
    }
    Some(body)
}

/// A small shared environment: `nat` with its recursor, plus opaque
/// constants and function symbols matching the generator's pool.
pub fn mini_env() -> Environment {
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
    let ty1 = mk_sort(Level::of_nat(1));
    let a = mk_const("A", vec![]);
    let axioms: Vec<(&str, Term)> = vec![
        ("A", ty1.clone()),
        ("B", ty1),
        ("a0", a.clone()),
        ("b0", mk_const("B", vec![])),
        ("f", mk_pi(BinderInfo::Explicit, a.clone(), a.clone())),
        (
            "g",
            mk_pi(
                BinderInfo::Explicit,
                a.clone(),
                mk_pi(BinderInfo::Explicit, a.clone(), a.clone()),
            ),
        ),
        ("k", mk_pi(BinderInfo::Explicit, mk_const("B", vec![]), a)),
    ];
    for (name, ty) in axioms {
        env.insert(crate::env::Declaration {
            name: Name::from(name),
            univ_params: vec![],
            ty,
            kind: crate::env::DeclKind::Axiom,
        });
    }
    // One unfoldable definition, so delta-categorized equations can arise.
    let a = mk_const("A", vec![]);
    let x = mk_local(a.clone());
    let value = mk_lambda(
        BinderInfo::Explicit,
        a.clone(),
        naive_abstract(&mk_app(mk_const("f", vec![]), x.clone()), x.fvar_id().unwrap()),
    );
    let depth = env.depth_for_value(&value);
    env.insert(crate::env::Declaration {
        name: Name::from("d"),
        univ_params: vec![],
        ty: mk_pi(BinderInfo::Explicit, a.clone(), a),
        kind: crate::env::DeclKind::Definition {
            value,
            hint: crate::env::ReducibilityHint::Semireducible,
            depth,
        },
    });
    env
}
