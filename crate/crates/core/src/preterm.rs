//! The surface syntax handed to the elaborator: terms as written, before
//! implicit arguments, overloads, coercions, and universe levels are pinned
//! down. Every node carries the source span it was parsed from so failures
//! can point back at the offending text.

use crate::name::Name;
use crate::span::Span;
use crate::term::BinderInfo;
use std::fmt;

#[derive(Clone, Debug)]
pub enum PretermData {
    /// A name to resolve. `explicit` is set by the `@name` form and disables
    /// implicit-argument insertion for the application spine it heads.
    Ident { name: Name, explicit: bool },
    App(Preterm, Preterm),
    /// `fun (x : A), e` — the domain may be omitted and left to inference.
    Lambda {
        binder: Name,
        info: BinderInfo,
        dom: Option<Preterm>,
        body: Preterm,
    },
    /// `Π (x : A), B`; also the desugaring of `A -> B`.
    Pi {
        binder: Name,
        info: BinderInfo,
        dom: Preterm,
        body: Preterm,
    },
    /// `_`
    Placeholder,
    /// `Prop` is level 0, `Type.{n}` is level `n + 1`, bare `Type` leaves the
    /// level to be inferred (`None`).
    Sort { level: Option<u32> },
    /// `(e : T)`
    Annotated { term: Preterm, ty: Preterm },
    /// Desugars to iterated `nat.succ` around `nat.zero`.
    Numeral(u32),
}

#[derive(Clone, Debug)]
pub struct Preterm {
    data: Box<PretermData>,
    span: Span,
}

impl Preterm {
    pub fn new(data: PretermData, span: Span) -> Preterm {
        Preterm {
            data: Box::new(data),
            span,
        }
    }

    pub fn data(&self) -> &PretermData {
        &self.data
    }

    pub fn span(&self) -> Span {
        self.span
    }

    /// Flattens nested applications: `((f a) b)` becomes `(f, [a, b])`.
    pub fn spine(&self) -> (&Preterm, Vec<&Preterm>) {
        let mut head = self;
        let mut args = Vec::new();
        while let PretermData::App(f, a) = head.data() {
            args.push(a);
            head = f;
        }
        args.reverse();
        (head, args)
    }
}

pub fn mk_ident(name: impl Into<Name>, span: Span) -> Preterm {
    Preterm::new(
        PretermData::Ident {
            name: name.into(),
            explicit: false,
        },
        span,
    )
}

/// `@name`: all arguments, implicit ones included, are given positionally.
pub fn mk_explicit_ident(name: impl Into<Name>, span: Span) -> Preterm {
    Preterm::new(
        PretermData::Ident {
            name: name.into(),
            explicit: true,
        },
        span,
    )
}

pub fn mk_papp(f: Preterm, a: Preterm) -> Preterm {
    let span = f.span().join(a.span());
    Preterm::new(PretermData::App(f, a), span)
}

pub fn mk_papp_spine(f: Preterm, args: impl IntoIterator<Item = Preterm>) -> Preterm {
    args.into_iter().fold(f, mk_papp)
}

pub fn mk_plambda(
    binder: impl Into<Name>,
    info: BinderInfo,
    dom: Option<Preterm>,
    body: Preterm,
    span: Span,
) -> Preterm {
    Preterm::new(
        PretermData::Lambda {
            binder: binder.into(),
            info,
            dom,
            body,
        },
        span,
    )
}

pub fn mk_ppi(
    binder: impl Into<Name>,
    info: BinderInfo,
    dom: Preterm,
    body: Preterm,
    span: Span,
) -> Preterm {
    Preterm::new(
        PretermData::Pi {
            binder: binder.into(),
            info,
            dom,
            body,
        },
        span,
    )
}

/// `A -> B` as a non-dependent `Π`. The binder gets the empty name, which
/// no written identifier can collide with, so the codomain can never
/// accidentally refer to it.
pub fn mk_parrow(dom: Preterm, body: Preterm) -> Preterm {
    let span = dom.span().join(body.span());
    mk_ppi("", BinderInfo::Explicit, dom, body, span)
}

pub fn mk_hole(span: Span) -> Preterm {
    Preterm::new(PretermData::Placeholder, span)
}

pub fn mk_psort(level: Option<u32>, span: Span) -> Preterm {
    Preterm::new(PretermData::Sort { level }, span)
}

pub fn mk_annotated(term: Preterm, ty: Preterm, span: Span) -> Preterm {
    Preterm::new(PretermData::Annotated { term, ty }, span)
}

pub fn mk_numeral(n: u32, span: Span) -> Preterm {
    Preterm::new(PretermData::Numeral(n), span)
}

/// Binder-headed forms swallow everything up to the end of the term, so as
/// children of an application they need their own parentheses to reparse.
fn write_app_child(f: &mut fmt::Formatter<'_>, t: &Preterm) -> fmt::Result {
    if matches!(
        t.data(),
        PretermData::Lambda { .. } | PretermData::Pi { .. }
    ) {
        write!(f, "({t})")
    } else {
        write!(f, "{t}")
    }
}

impl fmt::Display for Preterm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.data() {
            PretermData::Ident { name, explicit } => {
                if *explicit {
                    write!(f, "@{name}")
                } else {
                    write!(f, "{name}")
                }
            }
            PretermData::App(g, a) => {
                write!(f, "(")?;
                write_app_child(f, g)?;
                write!(f, " ")?;
                write_app_child(f, a)?;
                write!(f, ")")
            }
            PretermData::Lambda {
                binder,
                info,
                dom,
                body,
            } => match dom {
                Some(d) => write!(
                    f,
                    "fun {}{binder} : {d}{}, {body}",
                    info.open_delim(),
                    info.close_delim()
                ),
                None if *info == BinderInfo::Explicit => write!(f, "fun {binder}, {body}"),
                None => write!(
                    f,
                    "fun {}{binder}{}, {body}",
                    info.open_delim(),
                    info.close_delim()
                ),
            },
            PretermData::Pi {
                binder,
                info,
                dom,
                body,
            } => {
                if binder.to_string().is_empty() && *info == BinderInfo::Explicit {
                    write!(f, "({dom} -> {body})")
                } else {
                    write!(
                        f,
                        "Π {}{binder} : {dom}{}, {body}",
                        info.open_delim(),
                        info.close_delim()
                    )
                }
            }
            PretermData::Placeholder => write!(f, "_"),
            PretermData::Sort { level: None } => write!(f, "Type"),
            PretermData::Sort { level: Some(0) } => write!(f, "Prop"),
            PretermData::Sort { level: Some(n) } => write!(f, "Type.{{{}}}", n - 1),
            PretermData::Annotated { term, ty } => write!(f, "({term} : {ty})"),
            PretermData::Numeral(n) => write!(f, "{n}"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sp() -> Span {
        Span::new(0, 1)
    }

    #[test]
    fn spine_flattens_left_nested_apps() {
        let t = mk_papp_spine(
            mk_ident("f", sp()),
            [mk_ident("a", sp()), mk_ident("b", sp()), mk_hole(sp())],
        );
        let (head, args) = t.spine();
        assert!(matches!(head.data(), PretermData::Ident { name, .. } if name.to_string() == "f"));
        assert_eq!(args.len(), 3);
        assert!(matches!(args[2].data(), PretermData::Placeholder));
    }

    #[test]
    fn spans_join_across_applications() {
        let f = mk_ident("f", Span::new(0, 1));
        let a = mk_ident("a", Span::new(2, 3));
        assert_eq!(mk_papp(f, a).span(), Span::new(0, 3));
    }

    #[test]
    fn display_round_trips_shapes() {
        let t = mk_papp(
            mk_explicit_ident("eq.subst", sp()),
            mk_annotated(mk_numeral(2, sp()), mk_ident("nat", sp()), sp()),
        );
        assert_eq!(t.to_string(), "(@eq.subst (2 : nat))");
    }

    #[test]
    fn display_parenthesizes_binders_inside_applications() {
        let lam = mk_plambda("x", BinderInfo::Explicit, None, mk_ident("y", sp()), sp());
        let t = mk_papp(lam.clone(), mk_ident("z", sp()));
        assert_eq!(t.to_string(), "((fun x, y) z)");
        let t = mk_papp(mk_ident("f", sp()), lam);
        assert_eq!(t.to_string(), "(f (fun x, y))");
    }

    #[test]
    fn display_keeps_braces_on_untyped_implicit_binders() {
        let t = mk_plambda("x", BinderInfo::Implicit, None, mk_ident("x", sp()), sp());
        assert_eq!(t.to_string(), "fun {x}, x");
    }
}
