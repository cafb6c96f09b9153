//! Failure reporting: a `Diagnostic` carries what went wrong and where, plus
//! the asserted origins its justification reaches; rendering maps spans to
//! line/column positions and renumbers metavariables by first appearance so
//! output is stable across runs.

use elab_core::elaborate::ElabError;
use elab_core::span::Span;
use std::collections::HashMap;
use std::fmt::Write as _;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Severity {
    Error,
    Warning,
}

impl Severity {
    fn label(self) -> &'static str {
        match self {
            Severity::Error => "error",
            Severity::Warning => "warning",
        }
    }
}

#[derive(Clone, Debug)]
pub struct Diagnostic {
    pub severity: Severity,
    pub span: Option<Span>,
    pub message: String,
    /// Supporting origin notes, already deduplicated and in source order.
    pub notes: Vec<(Option<Span>, String)>,
}

impl Diagnostic {
    pub fn error(span: Option<Span>, message: impl Into<String>) -> Diagnostic {
        Diagnostic {
            severity: Severity::Error,
            span,
            message: message.into(),
            notes: Vec::new(),
        }
    }

    pub fn with_note(mut self, span: Option<Span>, note: impl Into<String>) -> Diagnostic {
        self.notes.push((span, note.into()));
        self
    }

    /// An elaboration failure as a diagnostic: the error's own message, the
    /// asserted origins reachable from its justification (deduplicated, in
    /// source order), and the number of case splits the failure rests on.
    pub fn from_elab(err: &ElabError) -> Diagnostic {
        let mut d = Diagnostic::error(err.span(), err.to_string());
        match err {
            ElabError::Unsolvable(f) => {
                d.notes = origin_notes(f.just.origins());
                let splits = f.just.assumptions().len();
                if splits > 0 {
                    d.notes.push((
                        None,
                        format!(
                            "the failure depends on {splits} case split{}",
                            if splits == 1 { "" } else { "s" }
                        ),
                    ));
                }
            }
            ElabError::Unsolved(metas) => {
                for m in metas {
                    d.notes
                        .push((m.span, format!("?m{} stands for {}", m.meta.0, m.what)));
                }
            }
            _ => {}
        }
        d
    }
}

/// Deduplicate and order origin pairs: spanned entries first, by position,
/// then unspanned ones in discovery order.
fn origin_notes(origins: Vec<(Option<Span>, String)>) -> Vec<(Option<Span>, String)> {
    let mut seen: Vec<(Option<Span>, String)> = Vec::new();
    for o in origins {
        if !seen.contains(&o) {
            seen.push(o);
        }
    }
    seen.sort_by_key(|(sp, _)| match sp {
        Some(s) => (0u8, s.lo, s.hi),
        None => (1u8, 0, 0),
    });
    seen
}

/// A named source buffer with precomputed line starts.
pub struct SourceFile {
    pub name: String,
    pub text: String,
    line_starts: Vec<u32>,
}

impl SourceFile {
    pub fn new(name: impl Into<String>, text: impl Into<String>) -> SourceFile {
        let text = text.into();
        let mut line_starts = vec![0u32];
        for (i, b) in text.bytes().enumerate() {
            if b == b'\n' {
                line_starts.push(i as u32 + 1);
            }
        }
        SourceFile {
            name: name.into(),
            text,
            line_starts,
        }
    }

    /// 1-based line and column of a byte offset.
    pub fn line_col(&self, offset: u32) -> (u32, u32) {
        let line = match self.line_starts.binary_search(&offset) {
            Ok(i) => i,
            Err(i) => i - 1,
        };
        (line as u32 + 1, offset - self.line_starts[line] + 1)
    }

    fn position(&self, span: Option<Span>) -> String {
        match span {
            Some(s) => {
                let (l, c) = self.line_col(s.lo);
                format!("{}:{l}:{c}", self.name)
            }
            None => self.name.clone(),
        }
    }
}

/// Render a diagnostic as text. Metavariable numbers are rewritten in order
/// of first appearance so identical failures print identically across runs.
pub fn render(d: &Diagnostic, src: &SourceFile, color: bool) -> String {
    let label = if color {
        let code = match d.severity {
            Severity::Error => "31",
            Severity::Warning => "33",
        };
        format!("\x1b[{code};1m{}\x1b[0m", d.severity.label())
    } else {
        d.severity.label().to_string()
    };
    let mut out = String::new();
    let _ = writeln!(out, "{}: {label}: {}", src.position(d.span), d.message);
    for (sp, note) in &d.notes {
        match sp {
            Some(_) => {
                let _ = writeln!(out, "  note: {note} ({})", src.position(*sp));
            }
            None => {
                let _ = writeln!(out, "  note: {note}");
            }
        }
    }
    renumber_metas(&out)
}

/// Rewrite every `?m<digits>` / `?u<digits>` so numbering starts at 1 in
/// order of first appearance, independently for the two kinds.
pub fn renumber_metas(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    let mut map: HashMap<(char, u64), u64> = HashMap::new();
    let mut next_m = 1u64;
    let mut next_u = 1u64;
    let chars: Vec<char> = text.chars().collect();
    let mut i = 0;
    while i < chars.len() {
        if chars[i] == '?'
            && i + 1 < chars.len()
            && matches!(chars[i + 1], 'm' | 'u')
            && i + 2 < chars.len()
            && chars[i + 2].is_ascii_digit()
        {
            let kind = chars[i + 1];
            let mut j = i + 2;
            let mut n: u64 = 0;
            while j < chars.len() && chars[j].is_ascii_digit() {
                n = n * 10 + chars[j].to_digit(10).unwrap() as u64;
                j += 1;
            }
            let counter = if kind == 'm' { &mut next_m } else { &mut next_u };
            let renamed = *map.entry((kind, n)).or_insert_with(|| {
                let v = *counter;
                *counter += 1;
                v
            });
            let _ = write!(out, "?{kind}{renamed}");
            i = j;
        } else {
            out.push(chars[i]);
            i += 1;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn line_col_is_one_based() {
        let src = SourceFile::new("t.elab", "ab\ncd\n");
        assert_eq!(src.line_col(0), (1, 1));
        assert_eq!(src.line_col(1), (1, 2));
        assert_eq!(src.line_col(3), (2, 1));
        assert_eq!(src.line_col(4), (2, 2));
    }

    #[test]
    fn renumbering_follows_first_appearance() {
        let s = "cannot solve ?m41 against ?m7; ?m41 blocks ?u19 and ?u3";
        assert_eq!(
            renumber_metas(s),
            "cannot solve ?m1 against ?m2; ?m1 blocks ?u1 and ?u2"
        );
    }

    #[test]
    fn notes_sort_by_position_and_dedupe() {
        let notes = origin_notes(vec![
            (Some(Span::new(9, 10)), "late".into()),
            (None, "free".into()),
            (Some(Span::new(2, 3)), "early".into()),
            (Some(Span::new(9, 10)), "late".into()),
        ]);
        let texts: Vec<&str> = notes.iter().map(|(_, t)| t.as_str()).collect();
        assert_eq!(texts, ["early", "late", "free"]);
    }

    #[test]
    fn rendering_positions_point_into_the_file() {
        let src = SourceFile::new("demo.elab", "check foo\n");
        let d = Diagnostic::error(Some(Span::new(6, 9)), "unknown identifier `foo`");
        let text = render(&d, &src, false);
        assert_eq!(text, "demo.elab:1:7: error: unknown identifier `foo`\n");
    }
}
