//! Property and oracle suites: the optimized de Bruijn traversals against
//! plain reference implementations, pattern unification against a direct
//! oracle, queue ordering invariants reconstructed from solver traces, and
//! the non-chronological treatment of independent case splits.

use elab_core::constraint::{
    Alternative, Alternatives, ChoiceConstraint, ChoiceCtx, Chooser, Constraint, UnifConstraint,
};
use elab_core::env::Transparency;
use elab_core::justify::Justification;
use elab_core::level::Level;
use elab_core::solver::Solver;
use elab_core::term::{
    abstract_pi, fresh_level_meta_id, fresh_meta_id, mk_app, mk_app_spine, mk_bvar, mk_const,
    mk_local, mk_meta_const, mk_meta_over, mk_sort, reset_traversal_visits, traversal_visits,
    BinderInfo, Term, TermData,
};
use elab_core::testing::{
    deep_closed_chain, gen_pattern_problem, mini_env, naive_abstract, naive_instantiate,
    pattern_oracle, TermGen,
};
use elab_core::typing::TypeChecker;
use proptest::prelude::*;
use rand::Rng;
use std::cell::{Cell, RefCell};
use std::rc::Rc;
use std::sync::Arc;

fn just() -> Justification {
    Justification::asserted(None, "property case")
}

fn unify(lhs: Term, rhs: Term) -> Constraint {
    Constraint::Unify(UnifConstraint::new(lhs, rhs, just()))
}

// ---------------------------------------------------------------- traversals

#[test]
fn traversals_match_the_reference_on_random_terms() {
    let mut g = TermGen::new(0xE1AB);
    let scope: Vec<Term> = (0..3)
        .map(|i| mk_local(mk_const(if i == 0 { "A" } else { "B" }, vec![])))
        .collect();
    for i in 0..10_000u32 {
        // One dangling index for instantiate to hit.
        let t = g.term_over(4, 1, &scope);
        let s = g.closed_term(2);
        assert_eq!(t.instantiate(&s), naive_instantiate(&t, &s), "case {i}");

        let u = g.term_over(4, 0, &scope);
        let id = scope[(i % 3) as usize].fvar_id().unwrap();
        assert_eq!(u.abstract_fvar(id), naive_abstract(&u, id), "case {i}");
    }
}

fn node_count(t: &Term) -> u64 {
    match t.data() {
        TermData::App(f, a) => 1 + node_count(f) + node_count(a),
        TermData::Lambda(_, d, b) | TermData::Pi(_, d, b) => 1 + node_count(d) + node_count(b),
        _ => 1,
    }
}

#[test]
fn instantiate_skips_closed_subtrees() {
    // g #0 (f (f … A)) — a ~2,000 node term whose bulk is locally closed.
    let chain = deep_closed_chain(1_995);
    let body = mk_app(
        mk_app(mk_const("g", vec![]), mk_bvar(0)),
        chain,
    );
    let total = node_count(&body);
    assert!(total >= 2_000, "term has {total} nodes");

    reset_traversal_visits();
    let _ = body.instantiate(&mk_const("a0", vec![]));
    let optimized = traversal_visits();

    // The reference traversal touches every node; the cached-bound guard
    // must cut the closed spine off at its root.
    assert!(
        (optimized as f64) < 0.2 * (total as f64),
        "visited {optimized} of {total} nodes"
    );
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    /// Abstracting a free variable and instantiating it back is the identity.
    #[test]
    fn abstract_then_instantiate_round_trips(seed in any::<u64>(), budget in 1..5u32) {
        let mut g = TermGen::new(seed);
        let l = mk_local(mk_const("A", vec![]));
        let id = l.fvar_id().unwrap();
        let t = g.term_over(budget, 0, std::slice::from_ref(&l));
        prop_assert_eq!(t.abstract_fvar(id).instantiate(&l), t);
    }

    /// The optimized traversals agree with the reference under proptest
    /// shrinking as well as the bulk seeded sweep.
    #[test]
    fn traversal_agreement_shrinks(seed in any::<u64>()) {
        let mut g = TermGen::new(seed);
        let t = g.open_term(4, 1);
        let s = g.closed_term(2);
        prop_assert_eq!(t.instantiate(&s), naive_instantiate(&t, &s));
    }
}

// ------------------------------------------------------- pattern unification

#[test]
fn solver_agrees_with_the_pattern_oracle() {
    let env = mini_env();
    let tc = TypeChecker::new(&env, Transparency::All);
    let mut g = TermGen::new(0x517E);
    let mut solvable = 0;
    let mut unsolvable = 0;
    for i in 0..100u32 {
        let mut p = gen_pattern_problem(&mut g);
        if i % 4 == 3 {
            // Smuggle an out-of-scope variable into the right-hand side:
            // no assignment to the hole can ever produce it.
            let rogue = mk_local(mk_const("A", vec![]));
            p.rhs = mk_app(mk_app(mk_const("g", vec![]), p.rhs), rogue);
        }
        let want = pattern_oracle(&p.lhs, &p.rhs);
        let mut solver = Solver::new(&env);
        let outcome = solver
            .add(unify(p.lhs.clone(), p.rhs.clone()))
            .and_then(|_| solver.solve());
        match (&want, outcome) {
            (Some(expected), Ok(res)) => {
                let mid = match p.lhs.head().data() {
                    TermData::Meta(m, _) => *m,
                    _ => unreachable!("generator produces meta-headed problems"),
                };
                let got = res.subst.term(mid).cloned().expect("hole assigned");
                assert!(
                    tc.is_def_eq(&got, expected),
                    "case {i}: {got} vs {expected}"
                );
                solvable += 1;
            }
            (None, Err(_)) => unsolvable += 1,
            (want, got) => panic!(
                "case {i}: oracle says solvable={}, solver says solvable={}",
                want.is_some(),
                got.is_ok()
            ),
        }
    }
    assert_eq!(solvable, 75);
    assert_eq!(unsolvable, 25);
}

// ------------------------------------------------------------ queue ordering

fn rank_of(cat: &str) -> u8 {
    match cat {
        "pattern" => 0,
        "ready" => 1,
        "regular" => 2,
        "delta" => 3,
        "quasi-pattern" => 4,
        "flex-rigid" => 5,
        "recursor" => 6,
        "postponed" => 7,
        "flex-flex" => 8,
        other => panic!("unknown category `{other}`"),
    }
}

fn field<'a>(line: &'a str, key: &str) -> &'a str {
    line.split_whitespace()
        .find_map(|w| w.strip_prefix(key))
        .unwrap_or_else(|| panic!("no `{key}` in `{line}`"))
}

/// Replays a trace, keeping the multiset of live queue entries: every pop
/// must take the entry with the smallest rank, and the oldest within that
/// rank.
fn check_queue_discipline(trace: &[String]) {
    let mut live: Vec<(u8, u64, String)> = Vec::new();
    let mut next_ticket = 0u64;
    for line in trace {
        let kind = field(line, "kind=");
        match kind {
            "enqueue" => {
                let cat = field(line, "cat=").to_string();
                live.push((rank_of(&cat), next_ticket, cat));
                next_ticket += 1;
            }
            "pop" => {
                let cat = field(line, "cat=");
                let min = live
                    .iter()
                    .enumerate()
                    .min_by_key(|(_, (r, t, _))| (*r, *t))
                    .map(|(i, _)| i)
                    .unwrap_or_else(|| panic!("pop from an empty queue: {line}"));
                let (r, _, c) = live.remove(min);
                assert_eq!(
                    rank_of(cat),
                    r,
                    "popped `{cat}` but the front of the queue is `{c}`"
                );
                assert_eq!(cat, c, "FIFO violated within rank {r}");
            }
            _ => {}
        }
    }
}

fn trivial_chooser() -> Chooser {
    Arc::new(|_: &ChoiceCtx| -> Alternatives { Box::new(std::iter::once(Ok(Vec::new()))) })
}

/// A fresh hole of type `A → … → A` with `arity` arrows, as a bare constant.
fn hole(arity: usize) -> Term {
    let a = mk_const("A", vec![]);
    let binders: Vec<(Term, BinderInfo)> = (0..arity)
        .map(|_| (mk_local(a.clone()), BinderInfo::Explicit))
        .collect();
    mk_meta_const(fresh_meta_id(), abstract_pi(&binders, &a))
}

/// One random constraint that the solver can process without ever failing
/// (so no snapshot is restored and the trace is a pure enqueue/pop stream).
fn benign_constraint(g: &mut TermGen) -> Constraint {
    let a = || mk_const("A", vec![]);
    let a0 = || mk_const("a0", vec![]);
    let l = mk_local(a());
    match g.rng().gen_range(0..8u32) {
        // flex-flex, parked in the residue
        0 => unify(
            mk_app_spine(hole(2), [l.clone(), l.clone()]),
            mk_app(hole(1), l),
        ),
        // level equation that stays stuck
        1 => {
            let u = Level::Meta(fresh_level_meta_id());
            let v = Level::Meta(fresh_level_meta_id());
            let w = Level::Meta(fresh_level_meta_id());
            unify(mk_sort(Level::max(u, v)), mk_sort(w))
        }
        // choice with one empty alternative
        2 => Constraint::Choice(ChoiceConstraint {
            meta: hole(0),
            ty: a(),
            chooser: trivial_chooser(),
            ondemand: false,
            desc: "benign".into(),
            just: just(),
        }),
        // on-demand choice whose goal type is already rigid
        3 => Constraint::Choice(ChoiceConstraint {
            meta: hole(0),
            ty: a(),
            chooser: trivial_chooser(),
            ondemand: true,
            desc: "benign".into(),
            just: just(),
        }),
        // flex-rigid solved by imitating the head on the first try
        4 => {
            let arg = mk_app(mk_const("f", vec![]), a0());
            unify(mk_app(hole(1), arg), a0())
        }
        // recursor applications equal argument-by-argument
        5 => {
            let rec = |major: Term| {
                mk_app_spine(
                    mk_const("nat.rec", vec![Level::Zero]),
                    [a0(), a0(), a0(), major],
                )
            };
            unify(rec(hole(0)), rec(hole(0)))
        }
        // same unfoldable definition on both heads, arguments agree
        6 => unify(
            mk_app(mk_const("d", vec![]), hole(0)),
            mk_app(mk_const("d", vec![]), a0()),
        ),
        // quasi-pattern discharged by projection
        _ => unify(mk_app_spine(hole(2), [l.clone(), l.clone()]), l),
    }
}

#[test]
fn queue_respects_priority_and_fifo_across_random_traces() {
    let env = mini_env();
    let mut g = TermGen::new(0x0F1F0);
    for round in 0..1_000u32 {
        let n = g.rng().gen_range(3..8u32);
        let mut solver = Solver::new(&env);
        solver.set_tracing(true);
        for _ in 0..n {
            let c = benign_constraint(&mut g);
            solver
                .add(c)
                .unwrap_or_else(|e| panic!("round {round}: add failed: {e}"));
        }
        solver
            .solve()
            .unwrap_or_else(|e| panic!("round {round}: solve failed: {e}"));
        let trace = solver.trace().to_vec();
        assert!(
            !trace.iter().any(|l| l.contains("kind=backtrack")),
            "round {round}: benign constraints must not backtrack"
        );
        check_queue_discipline(&trace);
    }
}

// -------------------------------------------------- non-chronological skips

struct CountingStream {
    inner: std::vec::IntoIter<Alternative>,
    pulls: Rc<Cell<u32>>,
}

impl Iterator for CountingStream {
    type Item = Alternative;
    fn next(&mut self) -> Option<Alternative> {
        self.pulls.set(self.pulls.get() + 1);
        self.inner.next()
    }
}

type PullLog = Rc<RefCell<Vec<Rc<Cell<u32>>>>>;

/// A chooser that records, per invocation, how many times the returned
/// stream is pulled.
fn counting_chooser(
    log: PullLog,
    alts: impl Fn(&ChoiceCtx) -> Vec<Alternative> + 'static,
) -> Chooser {
    Arc::new(move |ctx: &ChoiceCtx| -> Alternatives {
        let pulls = Rc::new(Cell::new(0));
        log.borrow_mut().push(pulls.clone());
        Box::new(CountingStream {
            inner: alts(ctx).into_iter(),
            pulls,
        })
    })
}

#[test]
fn failure_resolution_never_pulls_independent_splits() {
    let env = mini_env();
    let a = || mk_const("A", vec![]);
    let a0 = || mk_const("a0", vec![]);

    let m1 = mk_meta_over(&[], &a());
    let m2 = mk_meta_over(&[], &a());
    let m3 = mk_meta_over(&[], &a());
    let mf = mk_meta_over(&[], &a());

    let log1: PullLog = Rc::new(RefCell::new(Vec::new()));
    let log2: PullLog = Rc::new(RefCell::new(Vec::new()));
    let log3: PullLog = Rc::new(RefCell::new(Vec::new()));
    let logf: PullLog = Rc::new(RefCell::new(Vec::new()));

    // A choice whose stream is a single deferred failure: reaching it dooms
    // whatever assumptions its justification carries — here, split 1 only.
    let bomb = ChoiceConstraint {
        meta: mf,
        ty: a(),
        chooser: counting_chooser(logf.clone(), |_| vec![Err("scripted dead end".into())]),
        ondemand: false,
        desc: "bomb".into(),
        just: just(),
    };

    let choice = |meta: Term, log: PullLog, alts: Vec<Vec<Constraint>>, desc: &str| {
        let alts: Vec<Alternative> = alts.into_iter().map(Ok).collect();
        Constraint::Choice(ChoiceConstraint {
            meta,
            ty: a(),
            chooser: counting_chooser(log, move |_| alts.clone()),
            ondemand: false,
            desc: desc.into(),
            just: just(),
        })
    };

    // Split 1: the first alternative plants the bomb; the second is clean.
    let c1 = choice(
        m1.clone(),
        log1.clone(),
        vec![
            vec![
                unify(m1.clone(), mk_app(mk_const("f", vec![]), a0())),
                Constraint::Choice(bomb),
            ],
            vec![unify(m1.clone(), a0())],
        ],
        "split one",
    );
    // Splits 2 and 3 are independent of the failure.
    let c2 = choice(m2.clone(), log2.clone(), vec![vec![unify(m2.clone(), a0())]], "split two");
    let c3 = choice(m3.clone(), log3.clone(), vec![vec![unify(m3.clone(), a0())]], "split three");

    let mut solver = Solver::new(&env);
    solver.set_tracing(true);
    solver.add(c1).unwrap();
    solver.add(c2).unwrap();
    solver.add(c3).unwrap();
    let res = solver.solve().expect("second alternative of split 1 succeeds");

    // Split 1's single stream was pulled twice (first alternative, retry).
    let l1 = log1.borrow();
    assert_eq!(l1.len(), 1);
    assert_eq!(l1[0].get(), 2);

    // Splits 2 and 3 were each opened twice (before and after the restore),
    // but no stream instance was ever pulled past its first alternative: the
    // resolution jumped straight over them to split 1.
    for (name, log) in [("split two", &log2), ("split three", &log3)] {
        let streams = log.borrow();
        assert_eq!(streams.len(), 2, "{name}: opened before and after restore");
        for (i, pulls) in streams.iter().enumerate() {
            assert_eq!(pulls.get(), 1, "{name}: stream {i} pulled past its head");
        }
    }

    // The trace shows the two skips and the eventual backtrack of split 1.
    let trace = solver.trace().join("\n");
    assert_eq!(
        trace.matches("kind=resolve-skip").count(),
        2,
        "trace:\n{trace}"
    );
    assert!(trace.contains("kind=backtrack"));

    // All three holes end up solved by the clean alternatives.
    for m in [&m1, &m2, &m3] {
        let head = m.head();
        let TermData::Meta(id, _) = head.data() else {
            unreachable!()
        };
        let got = res.subst.term(*id).cloned().unwrap();
        assert_eq!(got, a0());
    }
}
