use crate::env::{Environment, Transparency};
use crate::name::Name;
use crate::term::{
    abstract_lambda, abstract_pi, mk_app_spine, mk_local, Term, TermData, MetaId,
};

/// Why evaluation of a term cannot proceed.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Stuck {
    /// `?m s̄` — an application headed by a metavariable.
    Application { meta: MetaId },
    /// A recursor whose major premise is stuck.
    Recursor { rec: Name, meta: MetaId },
}

impl Stuck {
    /// The metavariable blocking progress.
    pub fn meta(&self) -> MetaId {
        match self {
            Stuck::Application { meta } => *meta,
            Stuck::Recursor { meta, .. } => *meta,
        }
    }
}

/// Is `t` blocked on a metavariable? The major premise of a recursor is
/// brought to whnf first, so `nat.rec C z s ((λx, ?m x) a)` counts as stuck.
pub fn is_stuck(env: &Environment, mode: Transparency, t: &Term) -> Option<Stuck> {
    let (h, args) = t.spine();
    match h.data() {
        TermData::Meta(id, _) => Some(Stuck::Application { meta: *id }),
        TermData::Const(n, _) => {
            let info = env.recursor_info(n)?;
            let pos = info.major_pos();
            if args.len() <= pos {
                return None;
            }
            let major = whnf(env, mode, &args[pos]);
            is_stuck(env, mode, &major).map(|inner| Stuck::Recursor {
                rec: n.clone(),
                meta: inner.meta(),
            })
        }
        _ => None,
    }
}

/// Repeated head β: `(λ x, b) a s̄  ⇝  b[x := a] s̄`, iterated while the head
/// remains a redex.
pub fn head_beta(t: &Term) -> Term {
    let mut cur = t.clone();
    loop {
        let (h, args) = cur.spine();
        if args.is_empty() || !matches!(h.data(), TermData::Lambda(..)) {
            return cur;
        }
        let mut f = h;
        let mut consumed = 0;
        while consumed < args.len() {
            match f.data() {
                TermData::Lambda(_, _, body) => {
                    f = body.instantiate(&args[consumed]);
                    consumed += 1;
                }
                _ => break,
            }
        }
        cur = mk_app_spine(f, args[consumed..].iter().cloned());
    }
}

/// One head ι-step, if the term is a fully applied recursor whose major
/// premise (evaluated by `eval_major`) is constructor-headed.
fn try_iota(
    env: &Environment,
    t: &Term,
    eval_major: &mut impl FnMut(&Term) -> Term,
) -> Option<Term> {
    let (h, args) = t.spine();
    let (rec_name, levels) = match h.data() {
        TermData::Const(n, ls) => (n.clone(), ls.clone()),
        _ => return None,
    };
    let info = env.recursor_info(&rec_name)?;
    let pos = info.major_pos();
    if args.len() <= pos {
        return None;
    }
    let major = eval_major(&args[pos]);
    let (mh, margs) = major.spine();
    let ctor_name = match mh.data() {
        TermData::Const(n, _) => n.clone(),
        _ => return None,
    };
    let rule = info.rules.iter().find(|r| r.ctor == ctor_name)?;
    let (c_ind, c_np, c_nf) = env.constructor_info(&ctor_name)?;
    if c_ind != info.inductive || margs.len() != (c_np + c_nf) as usize {
        return None;
    }
    let rec_decl = env.get(&rec_name)?;
    let map: Vec<(Name, crate::level::Level)> = rec_decl
        .univ_params
        .iter()
        .cloned()
        .zip(levels.iter().cloned())
        .collect();
    let rhs = rule.rhs.instantiate_level_params(&map);
    let np = info.num_params as usize;
    let nm = info.num_minors as usize;
    let mut spine: Vec<Term> = Vec::with_capacity(np + 1 + nm + c_nf as usize);
    spine.extend_from_slice(&args[..np]); // params
    spine.push(args[np].clone()); // motive
    spine.extend_from_slice(&args[np + 1..np + 1 + nm]); // minors
    spine.extend_from_slice(&margs[c_np as usize..]); // constructor fields
    spine.extend_from_slice(&args[pos + 1..]); // extra arguments
    Some(head_beta(&mk_app_spine(rhs, spine)))
}

/// Head β and ι only; major premises are evaluated by β/ι as well (no δ
/// anywhere).
pub fn reduce_beta_iota(env: &Environment, t: &Term) -> Term {
    let mut cur = head_beta(t);
    while let Some(r) = try_iota(env, &cur, &mut |m| reduce_beta_iota(env, m)) {
        cur = head_beta(&r);
    }
    cur
}

/// Deep β-normalization: every redex anywhere in the term is reduced, and
/// nothing else (no δ, no ι). Binders are opened with fresh locals so
/// substitution never meets a dangling index. Solved metavariables are
/// functions of the binders in scope at their creation site, so
/// substituting them back leaves redexes at every occurrence; this pass
/// restores plain spines.
pub fn beta_reduce(t: &Term) -> Term {
    let cur = head_beta(t);
    match cur.data() {
        TermData::App(..) => {
            let (h, args) = cur.spine();
            let h2 = beta_reduce(&h);
            mk_app_spine(h2, args.iter().map(beta_reduce))
        }
        TermData::Lambda(info, dom, body) => {
            let local = mk_local(beta_reduce(dom));
            let body2 = beta_reduce(&body.instantiate(&local));
            abstract_lambda(&[(local, *info)], &body2)
        }
        TermData::Pi(info, dom, body) => {
            let local = mk_local(beta_reduce(dom));
            let body2 = beta_reduce(&body.instantiate(&local));
            abstract_pi(&[(local, *info)], &body2)
        }
        _ => cur,
    }
}

/// Head β and ι with major premises brought to whnf under `mode` (so an
/// ι-step can fire through defined majors), but no δ at the head itself.
pub fn whnf_core(env: &Environment, mode: Transparency, t: &Term) -> Term {
    let mut cur = head_beta(t);
    while let Some(r) = try_iota(env, &cur, &mut |m| whnf(env, mode, m)) {
        cur = head_beta(&r);
    }
    cur
}

/// δ: replace a constant head by its definition (hint-blind — callers gate
/// by transparency). The result still carries the β-redex.
pub fn unfold(env: &Environment, t: &Term) -> Option<Term> {
    let (h, args) = t.spine();
    match h.data() {
        TermData::Const(n, levels) => {
            let decl = env.get(n)?;
            let v = decl.value_at(levels)?;
            Some(mk_app_spine(v, args))
        }
        _ => None,
    }
}

fn head_definition_permitted(env: &Environment, mode: Transparency, t: &Term) -> bool {
    match t.head().data() {
        TermData::Const(n, _) => env
            .get(n)
            .map(|d| d.is_definition() && mode.permits(d.hint()))
            .unwrap_or(false),
        _ => false,
    }
}

/// Weak head normal form: head β, ι (through reducible majors) and δ for
/// definitions the transparency mode permits.
pub fn whnf(env: &Environment, mode: Transparency, t: &Term) -> Term {
    let mut cur = whnf_core(env, mode, t);
    while head_definition_permitted(env, mode, &cur) {
        match unfold(env, &cur) {
            Some(next) => cur = whnf_core(env, mode, &next),
            None => break,
        }
    }
    cur
}

/// Full normalization at kernel transparency: whnf at every subterm.
/// Used by `eval`; assumes the term is well-typed (hence normalizing).
pub fn normalize(env: &Environment, t: &Term) -> Term {
    let t = whnf(env, Transparency::All, t);
    match t.data() {
        TermData::App(..) => {
            let (h, args) = t.spine();
            mk_app_spine(h, args.iter().map(|a| normalize(env, a)))
        }
        TermData::Lambda(info, dom, body) => {
            let dom = normalize(env, dom);
            let l = mk_local(dom);
            let body = normalize(env, &body.instantiate(&l));
            abstract_lambda(&[(l, *info)], &body)
        }
        TermData::Pi(info, dom, body) => {
            let dom = normalize(env, dom);
            let l = mk_local(dom);
            let body = normalize(env, &body.instantiate(&l));
            abstract_pi(&[(l, *info)], &body)
        }
        _ => t,
    }
}
