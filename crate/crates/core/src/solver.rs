//! Backtracking constraint solver.
//!
//! Constraints enter through [`Solver::add`], get simplified, and either
//! solve a metavariable outright (Miller patterns, decided level equations)
//! or wait in a priority queue ordered by [`Category`] rank. Popping a
//! non-deterministic constraint opens a case split: a lazy stream of
//! alternatives tried under fresh assumptions. Every assignment and residual
//! carries a [`Justification`]; when a branch fails, resolution walks the
//! split stack and retries the most recent split the failure actually
//! depends on, discarding unrelated splits in between. Queue, reverse index,
//! and substitution are persistent maps, so a snapshot is a cheap clone.

use crate::constraint::{
    classify_choice, classify_unify, is_pattern, Alternative, Alternatives, Category,
    ChoiceConstraint, ChoiceCtx, Constraint, UnifConstraint,
};
use crate::env::{Environment, Transparency};
use crate::justify::{AssumptionId, Justification};
use crate::level::{solve_level_eq, Level, LevelEq, LevelMetaId};
use crate::name::Name;
use crate::reduce::whnf;
use crate::simp::simp;
use crate::term::{
    abstract_lambda, abstract_pi, fresh_level_meta_id, mk_app_spine, mk_local, mk_meta_over,
    mk_meta_unknown_over, mk_sort, open_pi_telescope, BinderInfo, MetaId, Term, TermData,
};
use crate::typing::TypeChecker;
use std::sync::Arc;
use thiserror::Error;

pub const DEFAULT_MAX_STEPS: u64 = 10_000;

/// A definitive dead end: what went wrong and which assumptions/origins the
/// failure rests on.
#[derive(Debug, Clone)]
pub struct SolveFailure {
    pub msg: String,
    pub just: Justification,
}

#[derive(Debug, Error)]
pub enum SolveError {
    /// Every relevant case split is exhausted.
    #[error("{}", .0.msg)]
    Unsolvable(SolveFailure),
    /// The step budget ran out; the search is aborted, not resolved.
    #[error("solver step limit exceeded ({limit} steps)")]
    OutOfSteps { limit: u64 },
}

/// Control flow inside the solver: a failure unwinds all in-flight work up
/// to the main loop, where resolution picks the split to retry. Running out
/// of steps unwinds the whole search.
enum Interrupt {
    Failure(SolveFailure),
    OutOfSteps,
}

type Step<T> = Result<T, Interrupt>;

/// Metavariable assignments (terms and levels) with the justification each
/// one rests on. Values are resolved against the substitution at assignment
/// time, so the dependency graph is acyclic; `apply` still iterates because
/// later assignments can reach into earlier stored values.
#[derive(Clone, Default)]
pub struct Substitution {
    terms: im::HashMap<MetaId, (Term, Justification)>,
    levels: im::HashMap<LevelMetaId, (Level, Justification)>,
}

impl Substitution {
    pub fn new() -> Substitution {
        Substitution::default()
    }

    pub fn term(&self, m: MetaId) -> Option<&Term> {
        self.terms.get(&m).map(|(t, _)| t)
    }

    pub fn level(&self, m: LevelMetaId) -> Option<(Level, Justification)> {
        self.levels.get(&m).cloned()
    }

    pub fn assign_term(&mut self, m: MetaId, value: Term, just: Justification) {
        debug_assert!(self.terms.get(&m).is_none());
        debug_assert!(value.is_locally_closed());
        debug_assert!(!value.occurs_meta(m));
        self.terms.insert(m, (value, just));
    }

    pub fn assign_level(&mut self, m: LevelMetaId, value: Level, just: Justification) {
        debug_assert!(self.levels.get(&m).is_none());
        debug_assert!(!value.occurs_meta(m));
        self.levels.insert(m, (value, just));
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty() && self.levels.is_empty()
    }

    /// Substitute every assigned metavariable (terms and levels) until none
    /// remains, returning the join of the justifications of the assignments
    /// that fired, if any did.
    pub fn apply(&self, t: &Term) -> (Term, Option<Justification>) {
        let mut cur = t.clone();
        let mut just: Option<Justification> = None;
        loop {
            if !cur.has_meta() && !cur.has_level_meta() {
                return (cur, just);
            }
            let mut justs: Vec<Justification> = Vec::new();
            let mut fired = false;
            cur = cur.subst_metas(
                &mut |m| {
                    self.terms.get(&m).map(|(v, j)| {
                        justs.push(j.clone());
                        v.clone()
                    })
                },
                &mut fired,
            );
            let mut lfired = false;
            cur = cur.subst_level_metas(
                &mut |m| {
                    self.levels.get(&m).map(|(v, j)| {
                        justs.push(j.clone());
                        v.clone()
                    })
                },
                &mut lfired,
            );
            for j in justs {
                just = Some(match just {
                    None => j,
                    Some(k) => Justification::join(&k, &j),
                });
            }
            if !fired && !lfired {
                return (cur, just);
            }
        }
    }

    pub fn apply_level(&self, l: &Level) -> (Level, Option<Justification>) {
        let mut cur = l.clone();
        let mut just: Option<Justification> = None;
        loop {
            let mut metas = Vec::new();
            cur.collect_metas(&mut metas);
            let mut fired = false;
            for m in metas {
                if let Some((v, j)) = self.levels.get(&m) {
                    cur = cur.subst_meta(m, v);
                    just = Some(match just {
                        None => j.clone(),
                        Some(k) => Justification::join(&k, j),
                    });
                    fired = true;
                }
            }
            if !fired {
                return (cur, just);
            }
        }
    }
}

/// Successful outcome: the substitution plus constraints that never became
/// solvable but are not refutable either (flex-flex pairs, undetermined
/// level equations). The caller decides what leftovers are acceptable.
#[derive(Clone)]
pub struct SolveResult {
    pub subst: Substitution,
    pub residue: Vec<UnifConstraint>,
}

type QKey = (u8, u64);

struct QEntry {
    constraint: Constraint,
    cat: Category,
    umetas: Vec<MetaId>,
}

/// One open case split: the alternatives not yet tried, the state to rewind
/// to before trying the next one, and the assumption tagging the alternative
/// currently being explored.
struct CaseSplit {
    alts: Alternatives,
    assumption: AssumptionId,
    j_c: Justification,
    desc: String,
    /// Join of the failure justifications of alternatives tried so far.
    accum: Option<Justification>,
    last_err: Option<String>,
    snap_q: im::OrdMap<QKey, Arc<QEntry>>,
    snap_u: im::HashMap<MetaId, im::OrdSet<QKey>>,
    snap_s: Substitution,
    snap_residue: Vec<UnifConstraint>,
}

pub struct Solver<'e> {
    env: &'e Environment,
    q: im::OrdMap<QKey, Arc<QEntry>>,
    /// Reverse index: which queued constraints to wake when a metavariable
    /// gets assigned.
    u: im::HashMap<MetaId, im::OrdSet<QKey>>,
    subst: Substitution,
    residue: Vec<UnifConstraint>,
    splits: Vec<CaseSplit>,
    next_ticket: u64,
    next_assumption: u64,
    steps: u64,
    max_steps: u64,
    tracing: bool,
    trace: Vec<String>,
}

impl<'e> Solver<'e> {
    pub fn new(env: &'e Environment) -> Solver<'e> {
        Solver {
            env,
            q: im::OrdMap::new(),
            u: im::HashMap::new(),
            subst: Substitution::new(),
            residue: Vec::new(),
            splits: Vec::new(),
            next_ticket: 0,
            next_assumption: 0,
            steps: 0,
            max_steps: DEFAULT_MAX_STEPS,
            tracing: false,
            trace: Vec::new(),
        }
    }

    pub fn set_max_steps(&mut self, n: u64) {
        self.max_steps = n;
    }

    pub fn set_tracing(&mut self, on: bool) {
        self.tracing = on;
    }

    pub fn trace(&self) -> &[String] {
        &self.trace
    }

    pub fn substitution(&self) -> &Substitution {
        &self.subst
    }

    /// Feed one constraint in. Failures are resolved against the case splits
    /// opened so far; `Err` means the problem is already unsatisfiable.
    pub fn add(&mut self, c: Constraint) -> Result<(), SolveError> {
        match self.visit(c) {
            Ok(()) => Ok(()),
            Err(Interrupt::OutOfSteps) => Err(self.out_of_steps()),
            Err(Interrupt::Failure(f)) => self.resolve(f),
        }
    }

    /// Run the queue to quiescence.
    pub fn solve(&mut self) -> Result<SolveResult, SolveError> {
        self.run()
    }

    /// After a successful `solve`, reject the current solution and search for
    /// a different one by failing the most recent case split.
    pub fn resume_next(&mut self) -> Result<SolveResult, SolveError> {
        let Some(top) = self.splits.last() else {
            return Err(SolveError::Unsolvable(SolveFailure {
                msg: "no alternatives left to explore".into(),
                just: Justification::asserted(None, "solution enumeration"),
            }));
        };
        let f = SolveFailure {
            msg: "another solution was requested".into(),
            just: Justification::assumption(top.assumption),
        };
        self.resolve(f)?;
        self.run()
    }

    fn run(&mut self) -> Result<SolveResult, SolveError> {
        loop {
            match self.step() {
                Ok(true) => {}
                Ok(false) => {
                    return Ok(SolveResult {
                        subst: self.subst.clone(),
                        residue: self.residue.clone(),
                    })
                }
                Err(Interrupt::OutOfSteps) => return Err(self.out_of_steps()),
                Err(Interrupt::Failure(f)) => self.resolve(f)?,
            }
        }
    }

    fn out_of_steps(&self) -> SolveError {
        SolveError::OutOfSteps {
            limit: self.max_steps,
        }
    }

    fn spend(&mut self) -> Step<()> {
        self.steps += 1;
        if self.steps > self.max_steps {
            Err(Interrupt::OutOfSteps)
        } else {
            Ok(())
        }
    }

    fn fresh_assumption(&mut self) -> AssumptionId {
        self.next_assumption += 1;
        AssumptionId(self.next_assumption)
    }

    fn trace_ev(&mut self, kind: &str, meta: &str, cat: &str, just: &Justification) {
        if !self.tracing {
            return;
        }
        let ids: Vec<String> = just.assumptions().iter().map(|a| a.to_string()).collect();
        self.trace.push(format!(
            "EVENT kind={kind} meta={meta} cat={cat} jdeps=[{}]",
            ids.join(",")
        ));
    }

    // ----- queue -----------------------------------------------------------

    fn enqueue(&mut self, c: Constraint, cat: Category, umetas: Vec<MetaId>) {
        let key = (cat.rank(), self.next_ticket);
        self.next_ticket += 1;
        self.trace_ev("enqueue", &meta_label(&c), &cat.to_string(), c.just());
        for m in &umetas {
            let mut set = self.u.get(m).cloned().unwrap_or_default();
            set.insert(key);
            self.u.insert(*m, set);
        }
        self.q.insert(
            key,
            Arc::new(QEntry {
                constraint: c,
                cat,
                umetas,
            }),
        );
    }

    fn remove_entry(&mut self, key: QKey) -> Option<Arc<QEntry>> {
        let e = self.q.remove(&key)?;
        for m in &e.umetas {
            if let Some(set) = self.u.get(m) {
                let mut set = set.clone();
                set.remove(&key);
                if set.is_empty() {
                    self.u.remove(m);
                } else {
                    self.u.insert(*m, set);
                }
            }
        }
        Some(e)
    }

    // ----- visiting --------------------------------------------------------

    fn visit(&mut self, c: Constraint) -> Step<()> {
        self.spend()?;
        match c {
            Constraint::Unify(u) => self.visit_unify(u),
            Constraint::Choice(ch) => self.visit_choice(ch),
        }
    }

    fn visit_unify(&mut self, c: UnifConstraint) -> Step<()> {
        let (lhs, j1) = self.subst.apply(&c.lhs);
        let (rhs, j2) = self.subst.apply(&c.rhs);
        let mut just = c.just;
        for j in [j1, j2].into_iter().flatten() {
            just = Justification::join(&just, &j);
        }
        let c = UnifConstraint::new(lhs, rhs, just);
        let r = match simp(self.env, &c) {
            Ok(r) => r,
            Err(f) => {
                return Err(Interrupt::Failure(SolveFailure {
                    msg: f.msg,
                    just: c.just,
                }))
            }
        };
        // Level solutions must land before the residuals are looked at: a
        // residual may only be a pattern (or discharge) under them.
        for (m, l) in r.level_assignments {
            self.record_level(m, l, &c.just)?;
        }
        for rc in r.residuals {
            self.place(rc)?;
        }
        Ok(())
    }

    fn visit_choice(&mut self, ch: ChoiceConstraint) -> Step<()> {
        let (ty, jt) = self.subst.apply(&ch.ty);
        let mut ch = ch;
        if let Some(j) = jt {
            ch.just = Justification::join(&ch.just, &j);
            ch.ty = ty;
        }
        let (cat, umetas) = classify_choice(self.env, &ch);
        self.enqueue(Constraint::Choice(ch), cat, umetas);
        Ok(())
    }

    /// House a simplified equation: assign it if it is a pattern, re-visit it
    /// if it is blocked on a metavariable that meanwhile got assigned, and
    /// queue it otherwise.
    fn place(&mut self, c: UnifConstraint) -> Step<()> {
        let (cat, umetas) = classify_unify(self.env, &c);
        if cat == Category::Pattern {
            return self.assign_pattern(c);
        }
        if umetas.iter().any(|m| self.subst.term(*m).is_some()) {
            return self.visit_unify(c);
        }
        self.enqueue(Constraint::Unify(c), cat, umetas);
        Ok(())
    }

    fn assign_pattern(&mut self, c: UnifConstraint) -> Step<()> {
        let lflex = matches!(c.lhs.head().data(), TermData::Meta(..)) && is_pattern(&c.lhs, &c.rhs);
        let (s, t) = if lflex {
            (&c.lhs, &c.rhs)
        } else {
            (&c.rhs, &c.lhs)
        };
        let (mh, args) = s.spine();
        let m = match mh.data() {
            TermData::Meta(m, _) => *m,
            _ => {
                return Err(Interrupt::Failure(SolveFailure {
                    msg: format!("expected a metavariable pattern, found {} ≐ {}", c.lhs, c.rhs),
                    just: c.just,
                }))
            }
        };
        let locals: Vec<(Term, BinderInfo)> = args
            .into_iter()
            .map(|a| (a, BinderInfo::Explicit))
            .collect();
        let value = abstract_lambda(&locals, t);
        debug_assert!(value.is_locally_closed());
        self.subst.assign_term(m, value, c.just.clone());
        self.trace_ev("assign", &format!("?m{}", m.0), "pattern", &c.just);
        self.wake(m)
    }

    /// Re-visit every queued constraint that was waiting on `m`.
    fn wake(&mut self, m: MetaId) -> Step<()> {
        let keys: Vec<QKey> = match self.u.get(&m) {
            Some(set) => set.iter().cloned().collect(),
            None => return Ok(()),
        };
        let mut woken = Vec::new();
        for k in keys {
            if let Some(e) = self.remove_entry(k) {
                woken.push(e.constraint.clone());
            }
        }
        for c in woken {
            self.visit(c)?;
        }
        Ok(())
    }

    /// Record a level assignment, reconciling it with an existing one if the
    /// meta is already solved.
    fn record_level(&mut self, m: LevelMetaId, l: Level, just: &Justification) -> Step<()> {
        let (l, jv) = self.subst.apply_level(&l);
        let mut just = just.clone();
        if let Some(j) = jv {
            just = Justification::join(&just, &j);
        }
        if let Some((prev, pj)) = self.subst.level(m) {
            let (prev, pj2) = self.subst.apply_level(&prev);
            just = Justification::join(&just, &pj);
            if let Some(j) = pj2 {
                just = Justification::join(&just, &j);
            }
            return match solve_level_eq(&prev, &l) {
                LevelEq::True => Ok(()),
                LevelEq::False => Err(Interrupt::Failure(SolveFailure {
                    msg: format!("conflicting universe levels {prev} and {l}"),
                    just,
                })),
                LevelEq::Assign(m2, v) => self.record_level(m2, v, &just),
                LevelEq::Stuck => self.place(UnifConstraint::new(
                    mk_sort(prev),
                    mk_sort(l),
                    just,
                )),
            };
        }
        if l.occurs_meta(m) {
            return Err(Interrupt::Failure(SolveFailure {
                msg: format!("universe level ?u{} occurs in its own solution {l}", m.0),
                just,
            }));
        }
        self.subst.assign_level(m, l, just.clone());
        self.trace_ev("assign", &format!("?u{}", m.0), "level", &just);
        Ok(())
    }

    // ----- main loop -------------------------------------------------------

    /// Pop and handle one queue entry. `Ok(false)` means the queue is empty.
    fn step(&mut self) -> Step<bool> {
        let Some((key, entry)) = self.q.get_min().map(|(k, v)| (*k, v.clone())) else {
            return Ok(false);
        };
        self.remove_entry(key);
        self.spend()?;
        self.trace_ev(
            "pop",
            &meta_label(&entry.constraint),
            &entry.cat.to_string(),
            entry.constraint.just(),
        );
        match &entry.constraint {
            Constraint::Unify(c) => {
                // If the substitution grew since this was queued, everything
                // about it may have changed: go around again.
                let (lhs, j1) = self.subst.apply(&c.lhs);
                let (rhs, j2) = self.subst.apply(&c.rhs);
                if j1.is_some() || j2.is_some() {
                    let mut just = c.just.clone();
                    for j in [j1, j2].into_iter().flatten() {
                        just = Justification::join(&just, &j);
                    }
                    self.visit_unify(UnifConstraint::new(lhs, rhs, just))?;
                    return Ok(true);
                }
                match entry.cat {
                    Category::Delta => self.process_delta(c)?,
                    Category::QuasiPattern => self.process_flex_rigid(c, true)?,
                    Category::FlexRigid => self.process_flex_rigid(c, false)?,
                    Category::Recursor => self.process_recursor(c)?,
                    Category::Postponed => self.process_postponed(c)?,
                    Category::FlexFlex => self.residue.push(c.clone()),
                    Category::Pattern | Category::Ready | Category::Regular => {
                        self.visit_unify(c.clone())?
                    }
                }
            }
            Constraint::Choice(ch) => self.process_choice(ch.clone())?,
        }
        Ok(true)
    }

    // ----- case splits -----------------------------------------------------

    /// Open a case split over `alts` and try its first workable alternative.
    fn branch(
        &mut self,
        alts: Alternatives,
        j_c: Justification,
        desc: String,
        cat: Category,
        meta: String,
    ) -> Step<()> {
        let a = self.fresh_assumption();
        if self.tracing {
            let ids: Vec<String> = j_c.assumptions().iter().map(|a| a.to_string()).collect();
            self.trace.push(format!(
                "EVENT kind=split-push meta={meta} cat={cat} desc=\"{desc}\" jdeps=[{}]",
                ids.join(",")
            ));
        }
        self.splits.push(CaseSplit {
            alts,
            assumption: a,
            j_c,
            desc,
            accum: None,
            last_err: None,
            snap_q: self.q.clone(),
            snap_u: self.u.clone(),
            snap_s: self.subst.clone(),
            snap_residue: self.residue.clone(),
        });
        self.advance_split()
    }

    fn restore_top(&mut self) {
        let (q, u, s, r) = {
            let top = self.splits.last().expect("restore with no case split");
            (
                top.snap_q.clone(),
                top.snap_u.clone(),
                top.snap_s.clone(),
                top.snap_residue.clone(),
            )
        };
        self.q = q;
        self.u = u;
        self.subst = s;
        self.residue = r;
    }

    /// Pull alternatives off the top split until one visits cleanly. Rewinds
    /// to the split's snapshot before each try. When the stream dries up the
    /// split is popped and the accumulated failure is raised for the next
    /// split down to resolve.
    fn advance_split(&mut self) -> Step<()> {
        loop {
            self.restore_top();
            let idx = self.splits.len() - 1;
            match self.splits[idx].alts.next() {
                None => {
                    let top = self.splits.pop().expect("split vanished");
                    let just = match &top.accum {
                        Some(a) => Justification::join(&top.j_c, a),
                        None => top.j_c.clone(),
                    };
                    let detail = match (&top.last_err, &top.accum) {
                        (Some(e), _) => format!(": last error: {e}"),
                        (None, Some(_)) => ": every alternative failed".to_string(),
                        (None, None) => ": no alternatives produced".to_string(),
                    };
                    return Err(Interrupt::Failure(SolveFailure {
                        msg: format!("{} has no remaining alternatives{detail}", top.desc),
                        just,
                    }));
                }
                Some(Err(msg)) => {
                    // A deferred error: reaching it just means this
                    // alternative is a dead end.
                    self.splits[idx].last_err = Some(msg);
                    continue;
                }
                Some(Ok(cs)) => {
                    let a = self.fresh_assumption();
                    self.splits[idx].assumption = a;
                    let ja = Justification::assumption(a);
                    let jc = self.splits[idx].j_c.clone();
                    match self.visit_all(cs, &ja, &jc) {
                        Ok(()) => return Ok(()),
                        Err(Interrupt::OutOfSteps) => return Err(Interrupt::OutOfSteps),
                        Err(Interrupt::Failure(f)) => {
                            if f.just.depends_on(a) {
                                self.trace_ev("backtrack", "-", "-", &f.just);
                                let idx = self.splits.len() - 1;
                                self.splits[idx].last_err = Some(f.msg.clone());
                                self.splits[idx].accum = Some(match &self.splits[idx].accum {
                                    Some(acc) => Justification::join(acc, &f.just),
                                    None => f.just.clone(),
                                });
                                continue;
                            }
                            // Not this alternative's fault; let an outer
                            // split deal with it.
                            return Err(Interrupt::Failure(f));
                        }
                    }
                }
            }
        }
    }

    fn visit_all(
        &mut self,
        cs: Vec<Constraint>,
        ja: &Justification,
        jc: &Justification,
    ) -> Step<()> {
        for c in cs {
            let j = Justification::join(c.just(), ja);
            let j = Justification::join(&j, jc);
            self.visit(c.with_just(j))?;
        }
        Ok(())
    }

    /// Backtracking: retry the most recent split the failure depends on,
    /// discarding splits above it that it does not mention.
    fn resolve(&mut self, f: SolveFailure) -> Result<(), SolveError> {
        let mut f = f;
        loop {
            while let Some(top) = self.splits.last() {
                if f.just.depends_on(top.assumption) {
                    break;
                }
                self.trace_ev("resolve-skip", "-", "-", &f.just);
                self.splits.pop();
            }
            if self.splits.is_empty() {
                return Err(SolveError::Unsolvable(f));
            }
            self.trace_ev("backtrack", "-", "-", &f.just);
            let idx = self.splits.len() - 1;
            self.splits[idx].last_err = Some(f.msg.clone());
            self.splits[idx].accum = Some(match &self.splits[idx].accum {
                Some(acc) => Justification::join(acc, &f.just),
                None => f.just.clone(),
            });
            match self.advance_split() {
                Ok(()) => return Ok(()),
                Err(Interrupt::OutOfSteps) => return Err(self.out_of_steps()),
                Err(Interrupt::Failure(f2)) => {
                    f = f2;
                }
            }
        }
    }

    // ----- processors ------------------------------------------------------

    /// Same unfoldable definition on both heads: either the arguments agree,
    /// or both sides unfold.
    fn process_delta(&mut self, c: &UnifConstraint) -> Step<()> {
        let (lh, largs) = c.lhs.spine();
        let (rh, rargs) = c.rhs.spine();
        let (name, ls1) = match lh.data() {
            TermData::Const(n, ls) => (n.clone(), ls.clone()),
            _ => return self.visit_unify(c.clone()),
        };
        let ls2 = match rh.data() {
            TermData::Const(_, ls) => ls.clone(),
            _ => return self.visit_unify(c.clone()),
        };
        let argwise: Alternative = if largs.len() == rargs.len() && ls1.len() == ls2.len() {
            let mut cs: Vec<Constraint> = Vec::new();
            for (a, b) in ls1.iter().zip(ls2.iter()) {
                cs.push(Constraint::Unify(UnifConstraint::new(
                    mk_sort(a.clone()),
                    mk_sort(b.clone()),
                    c.just.clone(),
                )));
            }
            for (a, b) in largs.iter().zip(rargs.iter()) {
                cs.push(Constraint::Unify(UnifConstraint::new(
                    a.clone(),
                    b.clone(),
                    c.just.clone(),
                )));
            }
            Ok(cs)
        } else {
            Err(format!("{name} is applied to different numbers of arguments"))
        };
        let unfold_both: Alternative = match (
            crate::reduce::unfold(self.env, &c.lhs),
            crate::reduce::unfold(self.env, &c.rhs),
        ) {
            (Some(l2), Some(r2)) => Ok(vec![Constraint::Unify(UnifConstraint::new(
                l2,
                r2,
                c.just.clone(),
            ))]),
            _ => Err(format!("{name} cannot be unfolded")),
        };
        let alts: Alternatives = Box::new(vec![argwise, unfold_both].into_iter());
        self.branch(
            alts,
            c.just.clone(),
            format!("unifier for {name}"),
            Category::Delta,
            meta_label(&Constraint::Unify(c.clone())),
        )
    }

    /// A metavariable applied to arguments against a rigid term: enumerate
    /// projections onto the arguments, then imitations of the rigid head.
    fn process_flex_rigid(&mut self, c: &UnifConstraint, quasi: bool) -> Step<()> {
        let lflex = matches!(c.lhs.head().data(), TermData::Meta(..));
        let (s, t) = if lflex {
            (&c.lhs, &c.rhs)
        } else {
            (&c.rhs, &c.lhs)
        };
        let (mh, margs) = s.spine();
        let m_ty = match mh.data() {
            TermData::Meta(_, ty) => ty.clone(),
            _ => return self.visit_unify(c.clone()),
        };
        let (tele, _) = open_pi_telescope(&m_ty);
        if tele.len() < margs.len() {
            return Err(Interrupt::Failure(SolveFailure {
                msg: format!(
                    "cannot unify {} with {}: metavariable applied beyond its arity",
                    c.lhs, c.rhs
                ),
                just: c.just.clone(),
            }));
        }
        let locals: Vec<(Term, BinderInfo)> = tele[..margs.len()].to_vec();
        let th = t.head();
        let tc = TypeChecker::new(self.env, Transparency::Default);
        let mut alts: Vec<Alternative> = Vec::new();

        // Projections: ?m := λ x̄, xᵢ, provided the actual argument at i can
        // still become (or already is) the right-hand side.
        let positions: Vec<usize> = match th.data() {
            TermData::Const(n, _) if quasi && !self.unfoldable_definition(n) => Vec::new(),
            TermData::FreeVar(id, _) if quasi => (0..margs.len())
                .filter(|i| margs[*i].fvar_id() == Some(*id))
                .collect(),
            _ => (0..margs.len()).collect(),
        };
        for i in positions {
            let si = &margs[i];
            let viable = si.fvar_id().is_some() || tc.is_def_eq(si, t);
            if !viable {
                continue;
            }
            let binding = abstract_lambda(&locals, &locals[i].0);
            alts.push(Ok(vec![
                Constraint::Unify(UnifConstraint::new(mh.clone(), binding, c.just.clone())),
                Constraint::Unify(c.clone()),
            ]));
        }

        // Imitations of the rigid head. When the head is an unfoldable
        // definition, imitating its weak head normal form comes first; bare
        // imitation of an irreducible definition or a recursor is useless
        // (nothing would ever reduce) and is suppressed.
        match th.data() {
            TermData::Const(n, _) => {
                if self.unfoldable_definition(n) {
                    let t2 = whnf(self.env, Transparency::Default, t);
                    if t2.head() != th {
                        if let Some(alt) = self.imitation(&mh, &locals, &t2, c) {
                            alts.push(alt);
                        }
                    }
                }
                let suppressed = self.irreducible_definition(n) || self.env.is_recursor(n);
                if !suppressed {
                    if let Some(alt) = self.imitation(&mh, &locals, t, c) {
                        alts.push(alt);
                    }
                }
            }
            TermData::Sort(_) | TermData::Pi(..) => {
                if let Some(alt) = self.imitation(&mh, &locals, t, c) {
                    alts.push(alt);
                }
            }
            _ => {}
        }

        if alts.is_empty() {
            return Err(Interrupt::Failure(SolveFailure {
                msg: format!("no unifier candidates for {} ≐ {}", c.lhs, c.rhs),
                just: c.just.clone(),
            }));
        }
        let cat = if quasi {
            Category::QuasiPattern
        } else {
            Category::FlexRigid
        };
        let desc = format!("unifier for {}", meta_label(&Constraint::Unify(c.clone())));
        let meta = meta_label(&Constraint::Unify(c.clone()));
        self.branch(Box::new(alts.into_iter()), c.just.clone(), desc, cat, meta)
    }

    /// One alternative `?m := λ x̄, h (?m₁ x̄) … (?mₖ x̄)` copying the shape of
    /// `target`, whose own pieces are fresh holes over the same telescope.
    fn imitation(
        &self,
        mh: &Term,
        locals: &[(Term, BinderInfo)],
        target: &Term,
        c: &UnifConstraint,
    ) -> Option<Alternative> {
        let (th, targs) = target.spine();
        let body = match th.data() {
            TermData::Const(..) => {
                let args: Vec<Term> = targs.iter().map(|_| mk_meta_unknown_over(locals)).collect();
                mk_app_spine(th.clone(), args)
            }
            TermData::Sort(_) => mk_sort(Level::Meta(fresh_level_meta_id())),
            TermData::Pi(..) => {
                let dom = mk_meta_over(locals, &mk_sort(Level::Meta(fresh_level_meta_id())));
                let y = mk_local(dom);
                let mut inner = locals.to_vec();
                inner.push((y.clone(), BinderInfo::Explicit));
                let cod = mk_meta_over(&inner, &mk_sort(Level::Meta(fresh_level_meta_id())));
                abstract_pi(&[(y, BinderInfo::Explicit)], &cod)
            }
            _ => return None,
        };
        let binding = abstract_lambda(locals, &body);
        Some(Ok(vec![
            Constraint::Unify(UnifConstraint::new(mh.clone(), binding, c.just.clone())),
            Constraint::Unify(c.clone()),
        ]))
    }

    /// Both sides blocked on recursors. Identical recursors can only agree
    /// argument by argument; a flexible side falls back to the flex-rigid
    /// machinery (imitation of the stuck application is already suppressed
    /// there); anything else is a dead end until its metas are solved, and
    /// they will not be — nothing ranked below can assign them.
    fn process_recursor(&mut self, c: &UnifConstraint) -> Step<()> {
        let lh = c.lhs.head();
        let rh = c.rhs.head();
        if let (TermData::Const(n1, ls1), TermData::Const(n2, ls2)) = (lh.data(), rh.data()) {
            if n1 == n2 && self.env.is_recursor(n1) {
                let (_, largs) = c.lhs.spine();
                let (_, rargs) = c.rhs.spine();
                if largs.len() != rargs.len() || ls1.len() != ls2.len() {
                    return Err(Interrupt::Failure(SolveFailure {
                        msg: format!("{n1} is applied to different numbers of arguments"),
                        just: c.just.clone(),
                    }));
                }
                let mut cs: Vec<Constraint> = Vec::new();
                for (a, b) in ls1.iter().zip(ls2.iter()) {
                    cs.push(Constraint::Unify(UnifConstraint::new(
                        mk_sort(a.clone()),
                        mk_sort(b.clone()),
                        c.just.clone(),
                    )));
                }
                for (a, b) in largs.iter().zip(rargs.iter()) {
                    cs.push(Constraint::Unify(UnifConstraint::new(
                        a.clone(),
                        b.clone(),
                        c.just.clone(),
                    )));
                }
                let alts: Alternatives = Box::new(vec![Ok(cs)].into_iter());
                return self.branch(
                    alts,
                    c.just.clone(),
                    format!("argument agreement for {n1}"),
                    Category::Recursor,
                    meta_label(&Constraint::Unify(c.clone())),
                );
            }
        }
        let lflex = matches!(lh.data(), TermData::Meta(..));
        let rflex = matches!(rh.data(), TermData::Meta(..));
        if lflex ^ rflex {
            let flex = if lflex { &c.lhs } else { &c.rhs };
            let (_, args) = flex.spine();
            let quasi = args.iter().all(|a| a.fvar_id().is_some());
            return self.process_flex_rigid(c, quasi);
        }
        Err(Interrupt::Failure(SolveFailure {
            msg: format!(
                "cannot unify {} with {}: blocked on a recursor whose value depends on an unsolved metavariable",
                c.lhs, c.rhs
            ),
            just: c.just.clone(),
        }))
    }

    /// A postponed sort equation: decide it if the levels now allow, park it
    /// in the residue if they still do not.
    fn process_postponed(&mut self, c: &UnifConstraint) -> Step<()> {
        match (c.lhs.data(), c.rhs.data()) {
            (TermData::Sort(a), TermData::Sort(b)) => match solve_level_eq(a, b) {
                LevelEq::True => Ok(()),
                LevelEq::False => Err(Interrupt::Failure(SolveFailure {
                    msg: format!("universe levels {a} and {b} differ"),
                    just: c.just.clone(),
                })),
                LevelEq::Assign(m, l) => self.record_level(m, l, &c.just),
                LevelEq::Stuck => {
                    self.residue.push(c.clone());
                    Ok(())
                }
            },
            _ => self.visit_unify(c.clone()),
        }
    }

    fn process_choice(&mut self, ch: ChoiceConstraint) -> Step<()> {
        let (ty, jt) = self.subst.apply(&ch.ty);
        let mut just = ch.just.clone();
        if let Some(j) = jt {
            just = Justification::join(&just, &j);
        }
        let ctx = ChoiceCtx {
            env: self.env,
            meta: ch.meta.clone(),
            ty,
            just: just.clone(),
        };
        let alts = (ch.chooser)(&ctx);
        let meta = meta_label(&Constraint::Choice(ch.clone()));
        self.branch(alts, just, ch.desc.clone(), Category::Regular, meta)
    }

    fn unfoldable_definition(&self, n: &Name) -> bool {
        self.env
            .get(n)
            .map(|d| d.is_definition() && Transparency::Default.permits(d.hint()))
            .unwrap_or(false)
    }

    fn irreducible_definition(&self, n: &Name) -> bool {
        self.env
            .get(n)
            .map(|d| d.is_definition() && !Transparency::Default.permits(d.hint()))
            .unwrap_or(false)
    }
}

fn meta_label(c: &Constraint) -> String {
    let head_meta = |t: &Term| match t.head().data() {
        TermData::Meta(m, _) => Some(*m),
        _ => None,
    };
    let m = match c {
        Constraint::Unify(u) => head_meta(&u.lhs).or_else(|| head_meta(&u.rhs)),
        Constraint::Choice(ch) => head_meta(&ch.meta),
    };
    match m {
        Some(m) => format!("?m{}", m.0),
        None => "-".into(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::{DeclKind, Declaration, ReducibilityHint};
    use crate::reduce::normalize;
    use crate::term::{mk_app, mk_bvar, mk_const, mk_fvar, mk_lambda, mk_meta, mk_pi, LocalContext};

    fn axiom(env: &mut Environment, name: &str, ty: Term) {
        env.insert(Declaration {
            name: Name::from(name),
            univ_params: vec![],
            ty,
            kind: DeclKind::Axiom,
        });
    }

    fn definition(env: &mut Environment, name: &str, ty: Term, value: Term) {
        let depth = env.depth_for_value(&value);
        env.insert(Declaration {
            name: Name::from(name),
            univ_params: vec![],
            ty,
            kind: DeclKind::Definition {
                value,
                hint: ReducibilityHint::Semireducible,
                depth,
            },
        });
    }

    /// A : Type;  a b k : A;  g : A → A;  f := λ x, g x;  konst := λ x, k.
    fn test_env() -> Environment {
        let mut env = Environment::new();
        let a = mk_const("A", vec![]);
        let arrow = mk_pi(BinderInfo::Explicit, a.clone(), a.clone());
        axiom(&mut env, "A", mk_sort(Level::of_nat(1)));
        axiom(&mut env, "a", a.clone());
        axiom(&mut env, "b", a.clone());
        axiom(&mut env, "k", a.clone());
        axiom(&mut env, "g", arrow.clone());
        definition(
            &mut env,
            "f",
            arrow.clone(),
            mk_lambda(
                BinderInfo::Explicit,
                a.clone(),
                mk_app(mk_const("g", vec![]), mk_bvar(0)),
            ),
        );
        definition(
            &mut env,
            "konst",
            arrow,
            mk_lambda(BinderInfo::Explicit, a.clone(), mk_const("k", vec![])),
        );
        env
    }

    fn just() -> Justification {
        Justification::asserted(None, "test")
    }

    fn uc(lhs: Term, rhs: Term) -> Constraint {
        Constraint::Unify(UnifConstraint::new(lhs, rhs, just()))
    }

    #[test]
    fn pattern_assignment_discharges_later_uses() {
        let env = test_env();
        let a = mk_const("A", vec![]);
        let mut lctx = LocalContext::new();
        let x = lctx.push_local(a.clone(), BinderInfo::Explicit);
        let m = mk_meta(&lctx, &a);
        let mut solver = Solver::new(&env);
        // ?m x ≐ g x assigns ?m := λ x, g x …
        solver
            .add(uc(m.clone(), mk_app(mk_const("g", vec![]), x.clone())))
            .unwrap();
        // … and the same equation over a different local is then discharged
        // by substitution alone.
        let y = mk_fvar(crate::term::fresh_fvar_id(), a.clone());
        let (mh, _) = m.spine();
        solver
            .add(uc(
                mk_app(mh, y.clone()),
                mk_app(mk_const("g", vec![]), y),
            ))
            .unwrap();
        let r = solver.solve().unwrap();
        assert!(r.residue.is_empty());
        let (solved, _) = r.subst.apply(&m);
        let want = mk_app(mk_const("g", vec![]), x);
        assert_eq!(normalize(&env, &solved), normalize(&env, &want));
    }

    #[test]
    fn choice_backtracks_to_consistent_alternative() {
        let env = test_env();
        let a = mk_const("A", vec![]);
        let lctx = LocalContext::new();
        let m = mk_meta(&lctx, &a);
        let candidates = [mk_const("a", vec![]), mk_const("b", vec![])];
        let meta = m.clone();
        let chooser: crate::constraint::Chooser = Arc::new(move |ctx: &ChoiceCtx| {
            let meta = meta.clone();
            let alts: Vec<Alternative> = candidates
                .iter()
                .map(|cand| {
                    Ok(vec![Constraint::Unify(UnifConstraint::new(
                        meta.clone(),
                        cand.clone(),
                        ctx.just.clone(),
                    ))])
                })
                .collect();
            Box::new(alts.into_iter())
        });
        let mut solver = Solver::new(&env);
        solver.set_tracing(true);
        solver
            .add(Constraint::Choice(ChoiceConstraint {
                meta: m.clone(),
                ty: a.clone(),
                chooser,
                ondemand: false,
                desc: "candidates for ?m".into(),
                just: just(),
            }))
            .unwrap();
        // g ?m ≐ g b forces the second candidate.
        solver
            .add(uc(
                mk_app(mk_const("g", vec![]), m.clone()),
                mk_app(mk_const("g", vec![]), mk_const("b", vec![])),
            ))
            .unwrap();
        let r = solver.solve().unwrap();
        let (solved, _) = r.subst.apply(&m);
        assert_eq!(solved, mk_const("b", vec![]));
        let trace = solver.trace().join("\n");
        assert!(trace.contains("kind=split-push"));
        assert!(trace.contains("kind=backtrack"));
        assert!(trace.contains("kind=assign"));
    }

    #[test]
    fn choice_enumerates_solutions_and_exhausts() {
        let env = test_env();
        let a = mk_const("A", vec![]);
        let m = mk_meta(&LocalContext::new(), &a);
        let meta = m.clone();
        let chooser: crate::constraint::Chooser = Arc::new(move |ctx: &ChoiceCtx| {
            let meta = meta.clone();
            let alts: Vec<Alternative> = vec![
                Ok(vec![Constraint::Unify(UnifConstraint::new(
                    meta.clone(),
                    mk_const("a", vec![]),
                    ctx.just.clone(),
                ))]),
                Ok(vec![Constraint::Unify(UnifConstraint::new(
                    meta.clone(),
                    mk_const("b", vec![]),
                    ctx.just.clone(),
                ))]),
                Err("out of candidates".into()),
            ];
            Box::new(alts.into_iter())
        });
        let mut solver = Solver::new(&env);
        solver
            .add(Constraint::Choice(ChoiceConstraint {
                meta: m.clone(),
                ty: a,
                chooser,
                ondemand: false,
                desc: "overload ?m".into(),
                just: just(),
            }))
            .unwrap();
        let r1 = solver.solve().unwrap();
        assert_eq!(r1.subst.apply(&m).0, mk_const("a", vec![]));
        let r2 = solver.resume_next().unwrap();
        assert_eq!(r2.subst.apply(&m).0, mk_const("b", vec![]));
        // The remaining alternative is a deferred error; enumeration ends.
        assert!(matches!(
            solver.resume_next(),
            Err(SolveError::Unsolvable(_))
        ));
    }

    #[test]
    fn flex_rigid_imitates_constructor_like_heads() {
        let env = test_env();
        let a = mk_const("A", vec![]);
        let mut lctx = LocalContext::new();
        let x = lctx.push_local(a.clone(), BinderInfo::Explicit);
        let m = mk_meta(&lctx, &a);
        // ?m x ≐ g (g x): the projection fails (x against a g-application),
        // imitation then peels one g and recursion solves the rest.
        let gx = mk_app(mk_const("g", vec![]), x.clone());
        let ggx = mk_app(mk_const("g", vec![]), gx);
        let mut solver = Solver::new(&env);
        solver.add(uc(m.clone(), ggx.clone())).unwrap();
        let r = solver.solve().unwrap();
        assert!(r.residue.is_empty());
        let (solved, _) = r.subst.apply(&m);
        assert_eq!(normalize(&env, &solved), normalize(&env, &ggx));
    }

    #[test]
    fn delta_falls_back_to_unfolding() {
        let env = test_env();
        let a = mk_const("A", vec![]);
        let m = mk_meta(&LocalContext::new(), &a);
        // konst (g ?m) ≐ konst a: argument agreement fails (g ?m against a,
        // both rigid), but both sides unfold to k. The metavariable keeps
        // the equation away from the concrete-sides shortcut.
        let gm = mk_app(mk_const("g", vec![]), m.clone());
        let lhs = mk_app(mk_const("konst", vec![]), gm.clone());
        let rhs = mk_app(mk_const("konst", vec![]), mk_const("a", vec![]));
        let mut solver = Solver::new(&env);
        solver.set_tracing(true);
        solver.add(uc(lhs, rhs)).unwrap();
        let r = solver.solve().unwrap();
        assert!(r.residue.is_empty());
        assert!(solver.trace().join("\n").contains("kind=backtrack"));

        // f (g ?m) ≐ f a is unsatisfiable: argwise g ?m ≐ a fails, and the
        // unfolded sides g (g ?m) ≐ g a reduce to the same dead end.
        let lhs = mk_app(mk_const("f", vec![]), gm);
        let rhs = mk_app(mk_const("f", vec![]), mk_const("a", vec![]));
        let mut solver = Solver::new(&env);
        solver.add(uc(lhs, rhs)).unwrap();
        assert!(matches!(solver.solve(), Err(SolveError::Unsolvable(_))));
    }

    #[test]
    fn flex_flex_pairs_end_up_in_the_residue() {
        let env = test_env();
        let a = mk_const("A", vec![]);
        let mut lctx = LocalContext::new();
        let _x = lctx.push_local(a.clone(), BinderInfo::Explicit);
        let m1 = mk_meta(&lctx, &a);
        let m2 = mk_meta(&lctx, &a);
        // ?m1 x x ≐ ?m2 x x: both flexible, not a pattern on either side.
        let x2 = lctx.fvars()[0].clone();
        let (h1, _) = m1.spine();
        let (h2, _) = m2.spine();
        let lhs = mk_app(mk_app(h1, x2.clone()), x2.clone());
        let rhs = mk_app(mk_app(h2, x2.clone()), x2);
        let mut solver = Solver::new(&env);
        solver.add(uc(lhs, rhs)).unwrap();
        let r = solver.solve().unwrap();
        assert_eq!(r.residue.len(), 1);
        assert!(r.subst.is_empty());
    }

    #[test]
    fn step_budget_aborts_instead_of_backtracking() {
        let env = test_env();
        let a = mk_const("A", vec![]);
        let m = mk_meta(&LocalContext::new(), &a);
        let gm = mk_app(mk_const("g", vec![]), m);
        let lhs = mk_app(mk_const("f", vec![]), gm);
        let rhs = mk_app(mk_const("f", vec![]), mk_const("a", vec![]));
        let mut solver = Solver::new(&env);
        solver.set_max_steps(2);
        let outcome = solver
            .add(uc(lhs, rhs))
            .and_then(|_| solver.solve().map(|_| ()));
        assert!(matches!(outcome, Err(SolveError::OutOfSteps { .. })));
    }
}
