//! Tokenizer for `.elab` source text. Produces a flat token list with byte
//! spans; `--` starts a comment running to the end of the line.

use elab_core::span::Span;
use std::fmt;
use thiserror::Error;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum TokenKind {
    /// Possibly-dotted identifier: `nat.rec`.
    Ident(String),
    Numeral(u32),
    KwDefinition,
    KwAxiom,
    KwInductive,
    KwStructure,
    KwAttribute,
    KwNamespace,
    KwEnd,
    KwOpen,
    KwCheck,
    KwEval,
    KwExample,
    KwFun,
    KwForall,
    LParen,
    RParen,
    LBrace,
    RBrace,
    LBracket,
    RBracket,
    Colon,
    Comma,
    /// `:=`
    Assign,
    /// `->` or `→`
    Arrow,
    Eq,
    Underscore,
    At,
    Bar,
    Dot,
}

impl TokenKind {
    pub fn is_command_keyword(&self) -> bool {
        use TokenKind::*;
        matches!(
            self,
            KwDefinition
                | KwAxiom
                | KwInductive
                | KwStructure
                | KwAttribute
                | KwNamespace
                | KwEnd
                | KwOpen
                | KwCheck
                | KwEval
                | KwExample
        )
    }
}

impl fmt::Display for TokenKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        use TokenKind::*;
        match self {
            Ident(s) => write!(f, "`{s}`"),
            Numeral(n) => write!(f, "`{n}`"),
            KwDefinition => write!(f, "`definition`"),
            KwAxiom => write!(f, "`axiom`"),
            KwInductive => write!(f, "`inductive`"),
            KwStructure => write!(f, "`structure`"),
            KwAttribute => write!(f, "`attribute`"),
            KwNamespace => write!(f, "`namespace`"),
            KwEnd => write!(f, "`end`"),
            KwOpen => write!(f, "`open`"),
            KwCheck => write!(f, "`check`"),
            KwEval => write!(f, "`eval`"),
            KwExample => write!(f, "`example`"),
            KwFun => write!(f, "`fun`"),
            KwForall => write!(f, "`forall`"),
            LParen => write!(f, "`(`"),
            RParen => write!(f, "`)`"),
            LBrace => write!(f, "`{{`"),
            RBrace => write!(f, "`}}`"),
            LBracket => write!(f, "`[`"),
            RBracket => write!(f, "`]`"),
            Colon => write!(f, "`:`"),
            Comma => write!(f, "`,`"),
            Assign => write!(f, "`:=`"),
            Arrow => write!(f, "`->`"),
            Eq => write!(f, "`=`"),
            Underscore => write!(f, "`_`"),
            At => write!(f, "`@`"),
            Bar => write!(f, "`|`"),
            Dot => write!(f, "`.`"),
        }
    }
}

#[derive(Clone, Debug)]
pub struct Token {
    pub kind: TokenKind,
    pub span: Span,
}

#[derive(Debug, Error)]
#[error("{msg}")]
pub struct LexError {
    pub msg: String,
    pub span: Span,
}

fn keyword(s: &str) -> Option<TokenKind> {
    use TokenKind::*;
    Some(match s {
        "definition" => KwDefinition,
        "axiom" => KwAxiom,
        "inductive" => KwInductive,
        "structure" => KwStructure,
        "attribute" => KwAttribute,
        "namespace" => KwNamespace,
        "end" => KwEnd,
        "open" => KwOpen,
        "check" => KwCheck,
        "eval" => KwEval,
        "example" => KwExample,
        "fun" => KwFun,
        "forall" => KwForall,
        _ => return None,
    })
}

fn is_ident_start(c: char) -> bool {
    c == '_' || (c.is_alphabetic() && !matches!(c, 'λ' | 'Π' | '∀'))
}

fn is_ident_continue(c: char) -> bool {
    c == '_' || c == '\'' || (c.is_alphanumeric() && !matches!(c, 'λ' | 'Π' | '∀'))
}

pub fn tokenize(text: &str) -> Result<Vec<Token>, LexError> {
    let mut out = Vec::new();
    let mut it = text.char_indices().peekable();
    while let Some(&(pos, c)) = it.peek() {
        let lo = pos as u32;
        if c.is_whitespace() {
            it.next();
            continue;
        }
        // Comments: `--` to end of line.
        if c == '-' && text[pos..].starts_with("--") {
            for (_, d) in it.by_ref() {
                if d == '\n' {
                    break;
                }
            }
            continue;
        }
        let single = |kind: TokenKind| Token {
            kind,
            span: Span::new(lo, lo + c.len_utf8() as u32),
        };
        match c {
            '(' => {
                it.next();
                out.push(single(TokenKind::LParen));
            }
            ')' => {
                it.next();
                out.push(single(TokenKind::RParen));
            }
            '{' => {
                it.next();
                out.push(single(TokenKind::LBrace));
            }
            '}' => {
                it.next();
                out.push(single(TokenKind::RBrace));
            }
            '[' => {
                it.next();
                out.push(single(TokenKind::LBracket));
            }
            ']' => {
                it.next();
                out.push(single(TokenKind::RBracket));
            }
            ',' => {
                it.next();
                out.push(single(TokenKind::Comma));
            }
            '@' => {
                it.next();
                out.push(single(TokenKind::At));
            }
            '|' => {
                it.next();
                out.push(single(TokenKind::Bar));
            }
            '=' => {
                it.next();
                out.push(single(TokenKind::Eq));
            }
            '.' => {
                it.next();
                out.push(single(TokenKind::Dot));
            }
            '→' => {
                it.next();
                out.push(single(TokenKind::Arrow));
            }
            'λ' => {
                it.next();
                out.push(single(TokenKind::KwFun));
            }
            'Π' | '∀' => {
                it.next();
                out.push(single(TokenKind::KwForall));
            }
            ':' => {
                it.next();
                if let Some(&(_, '=')) = it.peek() {
                    it.next();
                    out.push(Token {
                        kind: TokenKind::Assign,
                        span: Span::new(lo, lo + 2),
                    });
                } else {
                    out.push(single(TokenKind::Colon));
                }
            }
            '-' => {
                it.next();
                match it.peek() {
                    Some(&(_, '>')) => {
                        it.next();
                        out.push(Token {
                            kind: TokenKind::Arrow,
                            span: Span::new(lo, lo + 2),
                        });
                    }
                    _ => {
                        return Err(LexError {
                            msg: "stray `-` (expected `->` or `--`)".into(),
                            span: Span::new(lo, lo + 1),
                        })
                    }
                }
            }
            '0'..='9' => {
                let mut n: u32 = 0;
                let mut hi = lo;
                while let Some(&(p, d)) = it.peek() {
                    let Some(v) = d.to_digit(10) else { break };
                    n = n
                        .checked_mul(10)
                        .and_then(|n| n.checked_add(v))
                        .ok_or_else(|| LexError {
                            msg: "numeral does not fit in 32 bits".into(),
                            span: Span::new(lo, p as u32 + 1),
                        })?;
                    hi = p as u32 + 1;
                    it.next();
                }
                out.push(Token {
                    kind: TokenKind::Numeral(n),
                    span: Span::new(lo, hi),
                });
            }
            c if is_ident_start(c) => {
                let mut hi = lo;
                let mut s = String::new();
                loop {
                    while let Some(&(p, d)) = it.peek() {
                        if is_ident_continue(d) {
                            s.push(d);
                            hi = p as u32 + d.len_utf8() as u32;
                            it.next();
                        } else {
                            break;
                        }
                    }
                    // Consume a dot only when it continues a dotted name;
                    // `Type.{2}` must stop before `.{`.
                    let mut two = it.clone();
                    match (two.next(), two.peek()) {
                        (Some((_, '.')), Some(&(_, d))) if is_ident_start(d) => {
                            s.push('.');
                            hi += 1;
                            it.next();
                        }
                        _ => break,
                    }
                }
                // A bare `_` is a placeholder, not a name.
                if s == "_" {
                    out.push(Token {
                        kind: TokenKind::Underscore,
                        span: Span::new(lo, hi),
                    });
                } else {
                    let kind = keyword(&s).unwrap_or(TokenKind::Ident(s));
                    out.push(Token {
                        kind,
                        span: Span::new(lo, hi),
                    });
                }
            }
            other => {
                return Err(LexError {
                    msg: format!("unexpected character `{other}`"),
                    span: Span::new(lo, lo + other.len_utf8() as u32),
                })
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn kinds(src: &str) -> Vec<TokenKind> {
        tokenize(src).unwrap().into_iter().map(|t| t.kind).collect()
    }

    #[test]
    fn dotted_names_stay_whole() {
        use TokenKind::*;
        assert_eq!(
            kinds("check nat.rec x"),
            vec![KwCheck, Ident("nat.rec".into()), Ident("x".into())]
        );
    }

    #[test]
    fn type_level_syntax_splits_before_the_brace() {
        use TokenKind::*;
        assert_eq!(
            kinds("Type.{2}"),
            vec![Ident("Type".into()), Dot, LBrace, Numeral(2), RBrace]
        );
    }

    #[test]
    fn compound_symbols() {
        use TokenKind::*;
        assert_eq!(kinds(":= -> : ="), vec![Assign, Arrow, Colon, Eq]);
        assert_eq!(kinds("a→b"), vec![Ident("a".into()), Arrow, Ident("b".into())]);
    }

    #[test]
    fn comments_vanish() {
        use TokenKind::*;
        assert_eq!(
            kinds("eval x -- trailing words :=\ncheck y"),
            vec![KwEval, Ident("x".into()), KwCheck, Ident("y".into())]
        );
    }

    #[test]
    fn unicode_binder_keywords() {
        use TokenKind::*;
        assert_eq!(
            kinds("λ x, ∀ y, Π z"),
            vec![
                KwFun,
                Ident("x".into()),
                Comma,
                KwForall,
                Ident("y".into()),
                Comma,
                KwForall,
                Ident("z".into())
            ]
        );
    }

    #[test]
    fn underscore_alone_is_a_hole() {
        use TokenKind::*;
        assert_eq!(
            kinds("_ _x x_"),
            vec![Underscore, Ident("_x".into()), Ident("x_".into())]
        );
    }

    #[test]
    fn spans_are_byte_offsets() {
        let ts = tokenize("ab :=").unwrap();
        assert_eq!(ts[0].span, Span::new(0, 2));
        assert_eq!(ts[1].span, Span::new(3, 5));
    }

    #[test]
    fn stray_dash_is_an_error() {
        let e = tokenize("a - b").unwrap_err();
        assert_eq!(e.span, Span::new(2, 3));
    }
}
