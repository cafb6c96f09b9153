//! Recursive-descent parser from tokens to surface commands. A failed
//! command produces one error and parsing resumes at the next command
//! keyword, so a single mistake does not hide the rest of the file.
//!
//! Term grammar, loosest to tightest: `fun`/`forall` with binders, then
//! `->` (right-associative, its right-hand side is a full term), then `=`
//! (sugar for an `eq` application, non-associative), then application,
//! then atoms. `Type`, `Type.{n}`, and `Prop` are sort literals; `@name`
//! turns off implicit insertion; `(t : T)` annotates.

use crate::command::{wrap_lambda, wrap_pi, Attr, PBinder, SurfaceCommand};
use crate::lex::{tokenize, Token, TokenKind};
use elab_core::name::Name;
use elab_core::preterm::{
    mk_annotated, mk_explicit_ident, mk_hole, mk_ident, mk_numeral, mk_papp, mk_papp_spine,
    mk_parrow, mk_psort, Preterm,
};
use elab_core::span::Span;
use elab_core::term::BinderInfo;
use thiserror::Error;

#[derive(Clone, Debug, Error)]
#[error("{msg}")]
pub struct ParseError {
    pub msg: String,
    pub span: Span,
}

/// Parses a whole file. Commands that parse cleanly are returned even when
/// others fail.
pub fn parse_file(text: &str) -> (Vec<SurfaceCommand>, Vec<ParseError>) {
    let toks = match tokenize(text) {
        Ok(t) => t,
        Err(e) => return (vec![], vec![ParseError { msg: e.msg, span: e.span }]),
    };
    let mut p = Parser::new(toks, text.len() as u32);
    let mut cmds = Vec::new();
    let mut errs = Vec::new();
    while p.peek().is_some() {
        match p.command() {
            Ok(c) => cmds.push(c),
            Err(e) => {
                errs.push(e);
                while let Some(t) = p.peek() {
                    if t.kind.is_command_keyword() {
                        break;
                    }
                    p.bump();
                }
            }
        }
    }
    (cmds, errs)
}

/// Parses one standalone term, requiring all input to be consumed.
pub fn parse_term(text: &str) -> Result<Preterm, ParseError> {
    let toks = tokenize(text).map_err(|e| ParseError { msg: e.msg, span: e.span })?;
    let mut p = Parser::new(toks, text.len() as u32);
    let t = p.term()?;
    if let Some(tok) = p.peek() {
        return Err(ParseError {
            msg: format!("unexpected `{}` after term", tok.kind),
            span: tok.span,
        });
    }
    Ok(t)
}

struct Parser {
    toks: Vec<Token>,
    pos: usize,
    eof: Span,
}

impl Parser {
    fn new(toks: Vec<Token>, len: u32) -> Parser {
        Parser { toks, pos: 0, eof: Span::new(len, len) }
    }

    fn peek(&self) -> Option<&Token> {
        self.toks.get(self.pos)
    }

    fn peek_kind(&self) -> Option<&TokenKind> {
        self.peek().map(|t| &t.kind)
    }

    fn peek_at(&self, k: usize) -> Option<&TokenKind> {
        self.toks.get(self.pos + k).map(|t| &t.kind)
    }

    fn here(&self) -> Span {
        self.peek().map(|t| t.span).unwrap_or(self.eof)
    }

    fn bump(&mut self) -> Token {
        let t = self.toks[self.pos].clone();
        self.pos += 1;
        t
    }

    fn err<T>(&self, msg: impl Into<String>) -> Result<T, ParseError> {
        Err(ParseError { msg: msg.into(), span: self.here() })
    }

    fn eat(&mut self, kind: &TokenKind) -> bool {
        if self.peek_kind() == Some(kind) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn eat_tok(&mut self, kind: &TokenKind) -> Option<Token> {
        if self.peek_kind() == Some(kind) {
            Some(self.bump())
        } else {
            None
        }
    }

    fn expect(&mut self, kind: &TokenKind, what: &str) -> Result<Token, ParseError> {
        if self.peek_kind() == Some(kind) {
            Ok(self.bump())
        } else {
            match self.peek() {
                Some(t) => self.err(format!("expected {what}, found `{}`", t.kind)),
                None => self.err(format!("expected {what}, found end of input")),
            }
        }
    }

    fn expect_ident(&mut self, what: &str) -> Result<(Name, Span), ParseError> {
        match self.peek() {
            Some(Token { kind: TokenKind::Ident(s), span }) => {
                let out = (Name::from_dotted(s), *span);
                self.pos += 1;
                Ok(out)
            }
            Some(t) => self.err(format!("expected {what}, found `{}`", t.kind)),
            None => self.err(format!("expected {what}, found end of input")),
        }
    }

    fn expect_numeral(&mut self) -> Result<(u32, Span), ParseError> {
        match self.peek() {
            Some(Token { kind: TokenKind::Numeral(n), span }) => {
                let out = (*n, *span);
                self.pos += 1;
                Ok(out)
            }
            Some(t) => self.err(format!("expected a numeral, found `{}`", t.kind)),
            None => self.err("expected a numeral, found end of input"),
        }
    }

    fn command(&mut self) -> Result<SurfaceCommand, ParseError> {
        let Some(tok) = self.peek().cloned() else {
            return self.err("expected a command");
        };
        let start = tok.span;
        match tok.kind {
            TokenKind::KwDefinition => self.definition(start),
            TokenKind::KwAxiom => self.axiom(start),
            TokenKind::KwInductive => self.inductive(start),
            TokenKind::KwStructure => self.structure(start),
            TokenKind::KwAttribute => self.attribute(start),
            TokenKind::KwNamespace => {
                self.bump();
                let (name, sp) = self.expect_ident("a namespace name")?;
                Ok(SurfaceCommand::Namespace { name, span: start.join(sp) })
            }
            TokenKind::KwEnd => {
                self.bump();
                let (name, sp) = self.expect_ident("a namespace name")?;
                Ok(SurfaceCommand::End { name, span: start.join(sp) })
            }
            TokenKind::KwOpen => {
                self.bump();
                let (name, sp) = self.expect_ident("a namespace name")?;
                Ok(SurfaceCommand::Open { name, span: start.join(sp) })
            }
            TokenKind::KwCheck => {
                self.bump();
                let term = self.term()?;
                let span = start.join(term.span());
                Ok(SurfaceCommand::Check { term, span })
            }
            TokenKind::KwEval => {
                self.bump();
                let term = self.term()?;
                let span = start.join(term.span());
                Ok(SurfaceCommand::Eval { term, span })
            }
            TokenKind::KwExample => {
                self.bump();
                self.expect(&TokenKind::Colon, "`:`")?;
                let ty = self.term()?;
                self.expect(&TokenKind::Assign, "`:=`")?;
                let value = self.term()?;
                let span = start.join(value.span());
                Ok(SurfaceCommand::Example { ty, value, span })
            }
            _ => self.err("expected a command"),
        }
    }

    fn definition(&mut self, start: Span) -> Result<SurfaceCommand, ParseError> {
        self.bump();
        let (name, _) = self.expect_ident("a definition name")?;
        let binders = self.binder_groups()?;
        let ty = if self.eat(&TokenKind::Colon) {
            Some(self.term()?)
        } else {
            None
        };
        self.expect(&TokenKind::Assign, "`:=`")?;
        let value = self.term()?;
        let span = start.join(value.span());
        let ty = ty.map(|t| wrap_pi(&binders, t, false));
        let value = wrap_lambda(&binders, value, false);
        Ok(SurfaceCommand::Definition { name, ty, value, span })
    }

    fn axiom(&mut self, start: Span) -> Result<SurfaceCommand, ParseError> {
        self.bump();
        let (name, _) = self.expect_ident("an axiom name")?;
        let binders = self.binder_groups()?;
        self.expect(&TokenKind::Colon, "`:`")?;
        let ty = self.term()?;
        let span = start.join(ty.span());
        Ok(SurfaceCommand::Axiom { name, ty: wrap_pi(&binders, ty, false), span })
    }

    fn inductive(&mut self, start: Span) -> Result<SurfaceCommand, ParseError> {
        self.bump();
        let (name, _) = self.expect_ident("an inductive type name")?;
        let params = self.binder_groups()?;
        let ty = if self.eat(&TokenKind::Colon) {
            Some(self.term()?)
        } else {
            None
        };
        let assign = self.expect(&TokenKind::Assign, "`:=`")?;
        let mut end = assign.span;
        let mut ctors = Vec::new();
        while self.eat(&TokenKind::Bar) {
            let (cname, cspan) = self.expect_ident("a constructor name")?;
            self.expect(&TokenKind::Colon, "`:`")?;
            let cty = self.term()?;
            end = cty.span();
            ctors.push((cname, cspan, cty));
        }
        let span = start.join(end);
        Ok(SurfaceCommand::Inductive { name, params, ty, ctors, span })
    }

    fn structure(&mut self, start: Span) -> Result<SurfaceCommand, ParseError> {
        self.bump();
        let (name, _) = self.expect_ident("a structure name")?;
        let class = self.peek_kind() == Some(&TokenKind::LBracket)
            && self.peek_at(1) == Some(&TokenKind::Ident("class".to_string()))
            && self.peek_at(2) == Some(&TokenKind::RBracket);
        if class {
            self.pos += 3;
        }
        let params = self.binder_groups()?;
        let ty = if self.eat(&TokenKind::Colon) {
            Some(self.term()?)
        } else {
            None
        };
        let assign = self.expect(&TokenKind::Assign, "`:=`")?;
        let mut end = assign.span;
        let mut fields = Vec::new();
        while self.peek_kind() == Some(&TokenKind::LParen) {
            self.bump();
            let (fname, fspan) = self.expect_ident("a field name")?;
            self.expect(&TokenKind::Colon, "`:`")?;
            let fty = self.term()?;
            let rp = self.expect(&TokenKind::RParen, "`)`")?;
            end = rp.span;
            fields.push((fname, fspan, fty));
        }
        let span = start.join(end);
        Ok(SurfaceCommand::Structure { name, class, params, ty, fields, span })
    }

    fn attribute(&mut self, start: Span) -> Result<SurfaceCommand, ParseError> {
        self.bump();
        let (name, _) = self.expect_ident("a declaration name")?;
        self.expect(&TokenKind::LBracket, "`[`")?;
        let (attr_name, aspan) = self.expect_ident("an attribute name")?;
        let attr = Attr::from_name(&attr_name.to_string()).ok_or_else(|| ParseError {
            msg: format!("unknown attribute `{attr_name}`"),
            span: aspan,
        })?;
        let rb = self.expect(&TokenKind::RBracket, "`]`")?;
        Ok(SurfaceCommand::Attribute { name, attr, span: start.join(rb.span) })
    }

    pub(crate) fn term(&mut self) -> Result<Preterm, ParseError> {
        match self.peek_kind() {
            Some(TokenKind::KwFun) => {
                self.bump();
                let binders = self.binder_list()?;
                self.expect(&TokenKind::Comma, "`,`")?;
                let body = self.term()?;
                Ok(wrap_lambda(&binders, body, false))
            }
            Some(TokenKind::KwForall) => {
                self.bump();
                let binders = self.binder_list()?;
                self.expect(&TokenKind::Comma, "`,`")?;
                let body = self.term()?;
                Ok(wrap_pi(&binders, body, false))
            }
            _ => self.arrow_term(),
        }
    }

    fn arrow_term(&mut self) -> Result<Preterm, ParseError> {
        let lhs = self.eq_term()?;
        if self.eat(&TokenKind::Arrow) {
            let rhs = self.term()?;
            Ok(mk_parrow(lhs, rhs))
        } else {
            Ok(lhs)
        }
    }

    fn eq_term(&mut self) -> Result<Preterm, ParseError> {
        let lhs = self.app_term()?;
        if let Some(tok) = self.eat_tok(&TokenKind::Eq) {
            let rhs = self.app_term()?;
            Ok(mk_papp_spine(mk_ident("eq", tok.span), [lhs, rhs]))
        } else {
            Ok(lhs)
        }
    }

    fn app_term(&mut self) -> Result<Preterm, ParseError> {
        let mut t = self.atom()?;
        while self.at_atom_start() {
            let a = self.atom()?;
            t = mk_papp(t, a);
        }
        Ok(t)
    }

    fn at_atom_start(&self) -> bool {
        matches!(
            self.peek_kind(),
            Some(
                TokenKind::Ident(_)
                    | TokenKind::Numeral(_)
                    | TokenKind::Underscore
                    | TokenKind::At
                    | TokenKind::LParen
            )
        )
    }

    fn atom(&mut self) -> Result<Preterm, ParseError> {
        let Some(tok) = self.peek().cloned() else {
            return self.err("expected a term");
        };
        match tok.kind {
            TokenKind::Ident(s) => {
                self.bump();
                if s == "Prop" {
                    return Ok(mk_psort(Some(0), tok.span));
                }
                if s == "Type" {
                    if self.eat(&TokenKind::Dot) {
                        self.expect(&TokenKind::LBrace, "`{`")?;
                        let (n, nspan) = self.expect_numeral()?;
                        let rb = self.expect(&TokenKind::RBrace, "`}`")?;
                        let level = n.checked_add(1).ok_or_else(|| ParseError {
                            msg: "universe level too large".to_string(),
                            span: nspan,
                        })?;
                        return Ok(mk_psort(Some(level), tok.span.join(rb.span)));
                    }
                    return Ok(mk_psort(None, tok.span));
                }
                Ok(mk_ident(Name::from_dotted(&s), tok.span))
            }
            TokenKind::Numeral(n) => {
                self.bump();
                Ok(mk_numeral(n, tok.span))
            }
            TokenKind::Underscore => {
                self.bump();
                Ok(mk_hole(tok.span))
            }
            TokenKind::At => {
                self.bump();
                let (name, nspan) = self.expect_ident("a name after `@`")?;
                Ok(mk_explicit_ident(name, tok.span.join(nspan)))
            }
            TokenKind::LParen => {
                self.bump();
                let t = self.term()?;
                if self.eat(&TokenKind::Colon) {
                    let ty = self.term()?;
                    let rp = self.expect(&TokenKind::RParen, "`)`")?;
                    Ok(mk_annotated(t, ty, tok.span.join(rp.span)))
                } else {
                    self.expect(&TokenKind::RParen, "`)`")?;
                    Ok(t)
                }
            }
            _ => self.err("expected a term"),
        }
    }

    /// Binders after `fun` or `forall`: any mix of bare names and
    /// delimited groups. A trailing `: T` types every binder when all of
    /// them were bare.
    fn binder_list(&mut self) -> Result<Vec<PBinder>, ParseError> {
        let mut out = Vec::new();
        let mut all_bare = true;
        loop {
            match self.peek_kind() {
                Some(TokenKind::Ident(_)) => {
                    let (name, span) = self.expect_ident("a binder name")?;
                    out.push(PBinder { name, info: BinderInfo::Explicit, ty: None, span });
                }
                Some(TokenKind::LParen | TokenKind::LBrace | TokenKind::LBracket) => {
                    all_bare = false;
                    self.binder_group(&mut out)?;
                }
                _ => break,
            }
        }
        if out.is_empty() {
            return self.err("expected at least one binder");
        }
        if all_bare && self.eat(&TokenKind::Colon) {
            let ty = self.term()?;
            for b in &mut out {
                b.ty = Some(ty.clone());
            }
        }
        Ok(out)
    }

    /// One delimited binder group: `(x y : T)`, `{x : T}`, `[inst : C]`.
    /// The type annotation may be omitted.
    fn binder_group(&mut self, out: &mut Vec<PBinder>) -> Result<(), ParseError> {
        let (info, close, close_what) = match self.peek_kind() {
            Some(TokenKind::LParen) => (BinderInfo::Explicit, TokenKind::RParen, "`)`"),
            Some(TokenKind::LBrace) => (BinderInfo::Implicit, TokenKind::RBrace, "`}`"),
            Some(TokenKind::LBracket) => (BinderInfo::InstImplicit, TokenKind::RBracket, "`]`"),
            _ => return self.err("expected a binder group"),
        };
        self.bump();
        let mut names = vec![self.expect_ident("a binder name")?];
        while let Some(TokenKind::Ident(_)) = self.peek_kind() {
            names.push(self.expect_ident("a binder name")?);
        }
        let ty = if self.eat(&TokenKind::Colon) {
            Some(self.term()?)
        } else {
            None
        };
        self.expect(&close, close_what)?;
        for (name, span) in names {
            out.push(PBinder { name, info, ty: ty.clone(), span });
        }
        Ok(())
    }

    /// Zero or more delimited binder groups, as written after a command
    /// name.
    fn binder_groups(&mut self) -> Result<Vec<PBinder>, ParseError> {
        let mut out = Vec::new();
        while matches!(
            self.peek_kind(),
            Some(TokenKind::LParen | TokenKind::LBrace | TokenKind::LBracket)
        ) {
            self.binder_group(&mut out)?;
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::command::{command_eq, preterm_eq};
    use elab_core::preterm::PretermData;

    fn parse_one(text: &str) -> SurfaceCommand {
        let (cmds, errs) = parse_file(text);
        assert!(errs.is_empty(), "parse errors: {errs:?}");
        assert_eq!(cmds.len(), 1, "expected one command in {text:?}");
        cmds.into_iter().next().unwrap()
    }

    #[test]
    fn sorts_parse_to_levels() {
        assert!(matches!(
            parse_term("Prop").unwrap().data(),
            PretermData::Sort { level: Some(0) }
        ));
        assert!(matches!(
            parse_term("Type").unwrap().data(),
            PretermData::Sort { level: None }
        ));
        assert!(matches!(
            parse_term("Type.{2}").unwrap().data(),
            PretermData::Sort { level: Some(3) }
        ));
    }

    #[test]
    fn arrows_are_right_associative() {
        let t = parse_term("nat -> nat -> nat").unwrap();
        let PretermData::Pi { dom, body, .. } = t.data() else {
            panic!("expected a pi");
        };
        assert!(matches!(dom.data(), PretermData::Ident { .. }));
        assert!(matches!(body.data(), PretermData::Pi { .. }));
    }

    #[test]
    fn equality_desugars_to_eq_application() {
        let t = parse_term("a = b").unwrap();
        let (head, args) = t.spine();
        assert!(
            matches!(head.data(), PretermData::Ident { name, .. } if name.to_string() == "eq")
        );
        assert_eq!(args.len(), 2);
    }

    #[test]
    fn shared_bare_binder_type_applies_to_all() {
        let t = parse_term("fun x y : nat, x").unwrap();
        let PretermData::Lambda { dom, body, .. } = t.data() else {
            panic!("expected a lambda");
        };
        assert!(dom.is_some());
        let PretermData::Lambda { dom: dom2, .. } = body.data() else {
            panic!("expected a nested lambda");
        };
        assert!(dom2.is_some());
    }

    #[test]
    fn lambda_arguments_need_parentheses_and_get_them() {
        let t = parse_term("f (fun x, x) y").unwrap();
        let (head, args) = t.spine();
        assert!(matches!(head.data(), PretermData::Ident { .. }));
        assert_eq!(args.len(), 2);
        assert!(matches!(args[0].data(), PretermData::Lambda { .. }));
    }

    #[test]
    fn definition_binders_fold_into_lambda_and_pi() {
        let cmd = parse_one("definition f (x : nat) : nat := x");
        let SurfaceCommand::Definition { ty, value, .. } = &cmd else {
            panic!("expected a definition");
        };
        assert!(matches!(ty.as_ref().unwrap().data(), PretermData::Pi { .. }));
        assert!(matches!(value.data(), PretermData::Lambda { .. }));
    }

    #[test]
    fn structure_class_marker_is_not_a_binder() {
        let cmd = parse_one("structure s [class] (A : Type) : Type := (out : A)");
        let SurfaceCommand::Structure { class, params, fields, .. } = &cmd else {
            panic!("expected a structure");
        };
        assert!(*class);
        assert_eq!(params.len(), 1);
        assert_eq!(fields.len(), 1);
    }

    #[test]
    fn instance_binder_groups_are_inst_implicit() {
        let cmd = parse_one("definition f {A : Type} [s : c A] : nat := 0");
        let SurfaceCommand::Definition { ty, .. } = &cmd else {
            panic!("expected a definition");
        };
        let PretermData::Pi { info, body, .. } = ty.as_ref().unwrap().data() else {
            panic!("expected a pi");
        };
        assert_eq!(*info, BinderInfo::Implicit);
        let PretermData::Pi { info, .. } = body.data() else {
            panic!("expected a nested pi");
        };
        assert_eq!(*info, BinderInfo::InstImplicit);
    }

    #[test]
    fn error_recovery_resumes_at_next_command() {
        let (cmds, errs) = parse_file("definition f := \n check nat");
        assert_eq!(errs.len(), 1);
        assert_eq!(cmds.len(), 1);
        assert!(matches!(cmds[0], SurfaceCommand::Check { .. }));
    }

    #[test]
    fn commands_print_and_reparse_equal() {
        let texts = [
            "definition f : nat -> nat := fun (x : nat), x",
            "axiom zero_ne_one : eq 0 1 -> false",
            "inductive tree (A : Type) : Type := | leaf : tree A | node : A -> tree A -> tree A",
            "structure pair [class] (A : Type) (B : Type) : Type := (fst : A) (snd : B)",
            "attribute f [reducible]",
            "namespace outer",
            "end outer",
            "open outer",
            "check fun {A : Type}, fun (a : A), a",
            "eval add 2 2",
            "example : eq 4 4 := rfl",
        ];
        for text in texts {
            let cmd = parse_one(text);
            let printed = cmd.to_string();
            let reparsed = parse_one(&printed);
            assert!(
                command_eq(&cmd, &reparsed),
                "round trip failed:\n  source:  {text}\n  printed: {printed}\n  reparsed: {reparsed}"
            );
        }
    }

    #[test]
    fn annotated_terms_round_trip() {
        let t = parse_term("(2 : nat)").unwrap();
        assert!(matches!(t.data(), PretermData::Annotated { .. }));
        let again = parse_term(&t.to_string()).unwrap();
        assert!(preterm_eq(&t, &again));
    }
}
