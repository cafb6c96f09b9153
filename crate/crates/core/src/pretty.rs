//! Deterministic term printer. Binder variables are named positionally
//! (`x0`, `x1`, … by depth), free variables print as `l<id>`, metavariables
//! as `?m<id>`; constants print without their level instantiations.

use crate::level::Level;
use crate::term::{BinderInfo, Term, TermData};
use std::fmt;

const PREC_LOW: u8 = 0; // binders, right-hand side of arrows
const PREC_ARROW: u8 = 1;
const PREC_APP: u8 = 2;
const PREC_ATOM: u8 = 3;

pub fn pp(t: &Term) -> String {
    let mut out = String::new();
    go(t, 0, PREC_LOW, &mut out);
    out
}

fn uses_bvar(t: &Term, i: u32) -> bool {
    if t.bound() <= i {
        return false;
    }
    match t.data() {
        TermData::BoundVar(j) => *j == i,
        TermData::App(f, a) => uses_bvar(f, i) || uses_bvar(a, i),
        TermData::Lambda(_, d, b) | TermData::Pi(_, d, b) => {
            uses_bvar(d, i) || uses_bvar(b, i + 1)
        }
        _ => false,
    }
}

fn paren(cond: bool, out: &mut String, body: impl FnOnce(&mut String)) {
    if cond {
        out.push('(');
        body(out);
        out.push(')');
    } else {
        body(out);
    }
}

fn sort_str(l: &Level) -> String {
    let n = l.normalize();
    if n.is_zero() {
        return "Prop".into();
    }
    if n == Level::of_nat(1) {
        return "Type".into();
    }
    let s = n.to_string();
    if s.chars().all(|c| c.is_ascii_alphanumeric() || c == '?' || c == '.' || c == '_') {
        format!("Sort {s}")
    } else {
        format!("Sort ({s})")
    }
}

fn binder_open(info: BinderInfo) -> (&'static str, &'static str) {
    match info {
        BinderInfo::Explicit => ("(", ")"),
        BinderInfo::Implicit => ("{", "}"),
        BinderInfo::InstImplicit => ("[", "]"),
    }
}

fn go(t: &Term, depth: u32, prec: u8, out: &mut String) {
    match t.data() {
        TermData::BoundVar(i) => {
            if *i < depth {
                out.push_str(&format!("x{}", depth - 1 - i));
            } else {
                out.push_str(&format!("#{i}"));
            }
        }
        TermData::FreeVar(id, _) => out.push_str(&format!("l{}", id.0)),
        TermData::Meta(id, _) => out.push_str(&format!("?m{}", id.0)),
        TermData::Const(n, _) => out.push_str(&n.to_string()),
        TermData::Sort(l) => {
            let s = sort_str(l);
            paren(prec > PREC_APP && s.contains(' '), out, |o| o.push_str(&s));
        }
        TermData::App(..) => {
            let (h, args) = t.spine();
            paren(prec > PREC_APP, out, |o| {
                go(&h, depth, PREC_APP, o);
                for a in &args {
                    o.push(' ');
                    go(a, depth, PREC_ATOM, o);
                }
            });
        }
        TermData::Lambda(..) => {
            paren(prec > PREC_LOW, out, |o| {
                o.push('λ');
                let mut cur = t.clone();
                let mut d = depth;
                while let TermData::Lambda(info, dom, body) = cur.data() {
                    let (open, close) = binder_open(*info);
                    o.push_str(&format!(" {open}x{d} : "));
                    go(dom, d, PREC_LOW, o);
                    o.push_str(close);
                    d += 1;
                    cur = body.clone();
                }
                o.push_str(", ");
                go(&cur, d, PREC_LOW, o);
            });
        }
        TermData::Pi(info, dom, body) => {
            if *info == BinderInfo::Explicit && !uses_bvar(body, 0) {
                paren(prec > PREC_ARROW, out, |o| {
                    go(dom, depth, PREC_APP, o);
                    o.push_str(" → ");
                    go(body, depth + 1, PREC_ARROW, o);
                });
            } else {
                paren(prec > PREC_LOW, out, |o| {
                    o.push('Π');
                    let mut cur = t.clone();
                    let mut d = depth;
                    loop {
                        match cur.data() {
                            TermData::Pi(info, dom, body)
                                if !(*info == BinderInfo::Explicit && !uses_bvar(body, 0)) =>
                            {
                                let (open, close) = binder_open(*info);
                                o.push_str(&format!(" {open}x{d} : "));
                                go(dom, d, PREC_LOW, o);
                                o.push_str(close);
                                d += 1;
                                cur = body.clone();
                            }
                            _ => break,
                        }
                    }
                    o.push_str(", ");
                    go(&cur, d, PREC_LOW, o);
                });
            }
        }
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&pp(self))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::term::{mk_app, mk_arrow, mk_bvar, mk_const, mk_lambda, mk_pi, mk_prop, mk_sort};

    fn c(n: &str) -> Term {
        mk_const(n, vec![])
    }

    #[test]
    fn binders_and_arrows() {
        let id = mk_lambda(
            BinderInfo::Explicit,
            mk_sort(Level::of_nat(1)),
            mk_lambda(BinderInfo::Explicit, mk_bvar(0), mk_bvar(0)),
        );
        assert_eq!(pp(&id), "λ (x0 : Type) (x1 : x0), x1");
        let dep = mk_pi(
            BinderInfo::Implicit,
            mk_sort(Level::of_nat(1)),
            mk_arrow(mk_bvar(0), mk_prop()),
        );
        assert_eq!(pp(&dep), "Π {x0 : Type}, x0 → Prop");
        let nested = mk_arrow(mk_arrow(c("A"), c("B")), c("C"));
        assert_eq!(pp(&nested), "(A → B) → C");
    }

    #[test]
    fn application_parens() {
        let t = mk_app(c("f"), mk_app(c("g"), c("a")));
        assert_eq!(pp(&t), "f (g a)");
        let t2 = mk_app(mk_app(c("f"), c("a")), c("b"));
        assert_eq!(pp(&t2), "f a b");
    }
}
