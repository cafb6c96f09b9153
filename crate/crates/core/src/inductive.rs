use crate::env::{DeclKind, Declaration, Environment, IotaRule, RecursorInfo};
use crate::level::Level;
use crate::name::Name;
use crate::term::{
    abstract_lambda, abstract_pi, mentions_const, mk_app_spine, mk_const, mk_local, mk_sort,
    open_pi_telescope, BinderInfo, Term, TermData,
};
use thiserror::Error;

/// A surface-level inductive declaration, already elaborated to closed terms:
/// `ty` is `Π params indices, Sort ℓ` and each constructor type is
/// `Π params fields, I params idxs`.
#[derive(Clone, Debug)]
pub struct InductiveSpec {
    pub name: Name,
    pub univ_params: Vec<Name>,
    pub ty: Term,
    pub num_params: u32,
    pub constructors: Vec<(Name, Term)>,
}

#[derive(Debug, Error)]
pub enum InductiveError {
    #[error("type of `{0}` must end in a sort")]
    ResultNotSort(Name),
    #[error("type of `{0}` has fewer binders than declared parameters")]
    TooFewParams(Name),
    #[error("constructor `{0}` must repeat the inductive's parameters verbatim")]
    CtorParamMismatch(Name),
    #[error("constructor `{0}` must produce the inductive type applied to its parameters")]
    CtorBadResult(Name),
    #[error("constructor `{0}` violates strict positivity in field `{1}`")]
    NotPositive(Name, String),
    #[error("constructor `{0}`: recursive occurrence may not appear in an index of field `{1}`")]
    RecursiveIndex(Name, String),
    #[error("constructor `{0}`: field `{1}` lives in a universe larger than the inductive type")]
    FieldTooLarge(Name, String),
}

struct CtorInfo {
    name: Name,
    /// Field locals in declaration order.
    fields: Vec<(Term, BinderInfo)>,
    /// Index terms of the constructor's result type (open in params/fields).
    result_indices: Vec<Term>,
    /// For each field: `Some((z̄, w̄))` when the field is a recursive
    /// occurrence `Π z̄, I p̄ w̄`.
    recursive: Vec<Option<(Vec<(Term, BinderInfo)>, Vec<Term>)>>,
}

/// Check an inductive declaration (shape and strict positivity) and generate
/// the environment entries it gives rise to: the type former, its
/// constructors, and a recursor with one ι-rule per constructor.
///
/// `sort_of` is consulted only to decide whether a proposition with one
/// constructor supports large elimination (every field must itself be a
/// proof); returning `None` conservatively denies it.
pub fn elaborate_inductive(
    _env: &Environment,
    spec: &InductiveSpec,
    sort_of: &mut dyn FnMut(&Term) -> Option<Level>,
) -> Result<Vec<Declaration>, InductiveError> {
    let ind = &spec.name;
    let np = spec.num_params as usize;
    let (tele, result_sort) = open_pi_telescope(&spec.ty);
    let result_level = match result_sort.data() {
        TermData::Sort(l) => l.normalize(),
        _ => return Err(InductiveError::ResultNotSort(ind.clone())),
    };
    if tele.len() < np {
        return Err(InductiveError::TooFewParams(ind.clone()));
    }
    for (l, _) in &tele {
        if mentions_const(l.fvar_type().unwrap(), ind) {
            return Err(InductiveError::NotPositive(ind.clone(), "<signature>".into()));
        }
    }
    let params: Vec<(Term, BinderInfo)> = tele[..np].to_vec();
    let indices: Vec<(Term, BinderInfo)> = tele[np..].to_vec();
    let ind_levels: Vec<Level> = spec
        .univ_params
        .iter()
        .map(|n| Level::Param(n.clone()))
        .collect();

    let mut ctors = Vec::with_capacity(spec.constructors.len());
    for (cname, cty) in &spec.constructors {
        ctors.push(check_constructor(ind, np, &params, cname, cty)?);
    }

    // Universe admissibility: outside Prop, no field may live in a universe
    // above the inductive's own sort (parameters are exempt).
    if !result_level.is_zero() {
        for c in &ctors {
            for (i, (f, _)) in c.fields.iter().enumerate() {
                if let Some(lf) = sort_of(f.fvar_type().unwrap()) {
                    if !lf.le(&result_level) {
                        return Err(InductiveError::FieldTooLarge(
                            c.name.clone(),
                            format!("#{}", i + 1),
                        ));
                    }
                }
            }
        }
    }

    // Elimination universe. A proposition eliminates only into Prop, except
    // when it cannot distinguish proofs: no constructors at all, or a single
    // constructor each of whose fields is a proof or an index of the result.
    let large_elim = if !result_level.is_zero() {
        true
    } else if ctors.is_empty() {
        true
    } else if ctors.len() == 1 {
        let c = &ctors[0];
        c.fields.iter().all(|(f, _)| {
            c.result_indices.iter().any(|ix| ix == f)
                || sort_of(f.fvar_type().unwrap())
                    .map(|l| l.is_zero())
                    .unwrap_or(false)
        })
    } else {
        false
    };

    let mut rec_univ_params = spec.univ_params.clone();
    let motive_level = if large_elim {
        let mut base = String::from("u");
        while spec.univ_params.iter().any(|n| n.to_string() == base) {
            base.push('\'');
        }
        let u = Name::atom(&base);
        rec_univ_params.insert(0, u.clone());
        Level::Param(u)
    } else {
        Level::Zero
    };
    let rec_levels: Vec<Level> = rec_univ_params
        .iter()
        .map(|n| Level::Param(n.clone()))
        .collect();

    let param_terms: Vec<Term> = params.iter().map(|(l, _)| l.clone()).collect();
    let ind_applied = |idx_terms: &[Term]| {
        mk_app_spine(
            mk_const(ind.clone(), ind_levels.clone()),
            param_terms.iter().cloned().chain(idx_terms.iter().cloned()),
        )
    };

    // motive  C : Π indices, I p̄ ī → Sort motive_level
    let index_terms: Vec<Term> = indices.iter().map(|(l, _)| l.clone()).collect();
    let major_for_motive = mk_local(ind_applied(&index_terms));
    let mut motive_tele = indices.clone();
    motive_tele.push((major_for_motive, BinderInfo::Explicit));
    let motive_ty = abstract_pi(&motive_tele, &mk_sort(motive_level));
    let motive = mk_local(motive_ty);

    let rec_name = ind.child("rec");
    let rec_const = mk_const(rec_name.clone(), rec_levels.clone());

    // Minor premise per constructor: Π fields ihs, C idxs (ctor p̄ f̄),
    // with one induction hypothesis per recursive field, after all fields.
    let mut minors = Vec::with_capacity(ctors.len());
    for c in &ctors {
        let field_terms: Vec<Term> = c.fields.iter().map(|(l, _)| l.clone()).collect();
        let ctor_applied = mk_app_spine(
            mk_const(c.name.clone(), ind_levels.clone()),
            param_terms.iter().cloned().chain(field_terms.iter().cloned()),
        );
        let mut minor_tele = c.fields.clone();
        for (i, rec_occ) in c.recursive.iter().enumerate() {
            if let Some((zs, ws)) = rec_occ {
                let applied_field =
                    mk_app_spine(field_terms[i].clone(), zs.iter().map(|(z, _)| z.clone()));
                let ih_body = mk_app_spine(
                    motive.clone(),
                    ws.iter().cloned().chain(std::iter::once(applied_field)),
                );
                let ih_ty = abstract_pi(zs, &ih_body);
                minor_tele.push((mk_local(ih_ty), BinderInfo::Explicit));
            }
        }
        let minor_body = mk_app_spine(
            motive.clone(),
            c.result_indices.iter().cloned().chain(std::iter::once(ctor_applied)),
        );
        let minor_ty = abstract_pi(&minor_tele, &minor_body);
        minors.push((mk_local(minor_ty), BinderInfo::Explicit));
    }

    // rec : Π params motive minors indices major, C indices major
    let major = mk_local(ind_applied(&index_terms));
    let rec_body = mk_app_spine(
        motive.clone(),
        index_terms.iter().cloned().chain(std::iter::once(major.clone())),
    );
    let mut rec_tele: Vec<(Term, BinderInfo)> = Vec::new();
    rec_tele.extend(params.iter().cloned());
    rec_tele.push((motive.clone(), BinderInfo::Explicit));
    rec_tele.extend(minors.iter().cloned());
    rec_tele.extend(indices.iter().cloned());
    rec_tele.push((major, BinderInfo::Explicit));
    let rec_ty = abstract_pi(&rec_tele, &rec_body);

    // ι-rule per constructor:
    //   rec p̄ C m̄ idxs (ctor p̄ f̄)  ⇝  mⱼ f̄ ih̄
    // stored as a closed right-hand side λ p̄ C m̄ f̄, mⱼ f̄ ih̄ where
    //   ih for a field f : Π z̄, I p̄ w̄   is   λ z̄, rec p̄ C m̄ w̄ (f z̄).
    let minor_terms: Vec<Term> = minors.iter().map(|(l, _)| l.clone()).collect();
    let mut rules = Vec::with_capacity(ctors.len());
    for (j, c) in ctors.iter().enumerate() {
        let field_terms: Vec<Term> = c.fields.iter().map(|(l, _)| l.clone()).collect();
        let mut minor_args: Vec<Term> = field_terms.clone();
        for (i, rec_occ) in c.recursive.iter().enumerate() {
            if let Some((zs, ws)) = rec_occ {
                let applied_field =
                    mk_app_spine(field_terms[i].clone(), zs.iter().map(|(z, _)| z.clone()));
                let rec_call = mk_app_spine(
                    rec_const.clone(),
                    param_terms
                        .iter()
                        .cloned()
                        .chain(std::iter::once(motive.clone()))
                        .chain(minor_terms.iter().cloned())
                        .chain(ws.iter().cloned())
                        .chain(std::iter::once(applied_field)),
                );
                minor_args.push(abstract_lambda(zs, &rec_call));
            }
        }
        let rhs_body = mk_app_spine(minor_terms[j].clone(), minor_args);
        let mut rhs_tele: Vec<(Term, BinderInfo)> = Vec::new();
        rhs_tele.extend(params.iter().cloned());
        rhs_tele.push((motive.clone(), BinderInfo::Explicit));
        rhs_tele.extend(minors.iter().cloned());
        rhs_tele.extend(c.fields.iter().cloned());
        let rhs = abstract_lambda(&rhs_tele, &rhs_body);
        debug_assert!(rhs.is_locally_closed() && !rhs.has_fvar());
        rules.push(IotaRule {
            ctor: c.name.clone(),
            num_fields: c.fields.len() as u32,
            rhs,
        });
    }

    let mut decls = Vec::with_capacity(2 + ctors.len());
    decls.push(Declaration {
        name: ind.clone(),
        univ_params: spec.univ_params.clone(),
        ty: spec.ty.clone(),
        kind: DeclKind::Inductive {
            num_params: spec.num_params,
            num_indices: indices.len() as u32,
            constructors: ctors.iter().map(|c| c.name.clone()).collect(),
        },
    });
    for (c, (_, cty)) in ctors.iter().zip(&spec.constructors) {
        decls.push(Declaration {
            name: c.name.clone(),
            univ_params: spec.univ_params.clone(),
            ty: cty.clone(),
            kind: DeclKind::Constructor {
                inductive: ind.clone(),
                num_params: spec.num_params,
                num_fields: c.fields.len() as u32,
            },
        });
    }
    decls.push(Declaration {
        name: rec_name,
        univ_params: rec_univ_params,
        ty: rec_ty,
        kind: DeclKind::Recursor(RecursorInfo {
            inductive: ind.clone(),
            num_params: spec.num_params,
            num_minors: ctors.len() as u32,
            num_indices: indices.len() as u32,
            rules,
        }),
    });
    Ok(decls)
}

fn check_constructor(
    ind: &Name,
    np: usize,
    params: &[(Term, BinderInfo)],
    cname: &Name,
    cty: &Term,
) -> Result<CtorInfo, InductiveError> {
    // Re-open the constructor's parameter binders with the *inductive's* own
    // param locals so everything downstream shares one telescope.
    let mut cur = cty.clone();
    for (p, _) in params.iter().take(np) {
        match cur.data() {
            TermData::Pi(_, dom, body) => {
                let pty = p.fvar_type().unwrap();
                if dom != pty {
                    return Err(InductiveError::CtorParamMismatch(cname.clone()));
                }
                cur = body.instantiate(p);
            }
            _ => return Err(InductiveError::CtorParamMismatch(cname.clone())),
        }
    }
    let (fields, result) = open_pi_telescope(&cur);
    let (rhead, rargs) = result.spine();
    let result_ok = matches!(rhead.data(), TermData::Const(n, _) if n == ind)
        && rargs.len() >= np
        && rargs[..np]
            .iter()
            .zip(params)
            .all(|(a, (p, _))| a == p);
    if !result_ok {
        return Err(InductiveError::CtorBadResult(cname.clone()));
    }
    let result_indices = rargs[np..].to_vec();
    for ix in &result_indices {
        if mentions_const(ix, ind) {
            return Err(InductiveError::CtorBadResult(cname.clone()));
        }
    }

    let mut recursive = Vec::with_capacity(fields.len());
    for (i, (f, _)) in fields.iter().enumerate() {
        let fty = f.fvar_type().unwrap();
        let label = || format!("#{}", i + 1);
        if !mentions_const(fty, ind) {
            recursive.push(None);
            continue;
        }
        // Recursive field: must be Π z̄, I p̄ w̄ with I nowhere else.
        let (zs, fbody) = open_pi_telescope(fty);
        for (z, _) in &zs {
            if mentions_const(z.fvar_type().unwrap(), ind) {
                return Err(InductiveError::NotPositive(cname.clone(), label()));
            }
        }
        let (fh, fargs) = fbody.spine();
        let head_ok = matches!(fh.data(), TermData::Const(n, _) if n == ind)
            && fargs.len() >= np
            && fargs[..np].iter().zip(params).all(|(a, (p, _))| a == p);
        if !head_ok {
            return Err(InductiveError::NotPositive(cname.clone(), label()));
        }
        let ws = fargs[np..].to_vec();
        for w in &ws {
            if mentions_const(w, ind) {
                return Err(InductiveError::RecursiveIndex(cname.clone(), label()));
            }
        }
        recursive.push(Some((zs, ws)));
    }
    Ok(CtorInfo {
        name: cname.clone(),
        fields,
        result_indices,
        recursive,
    })
}
