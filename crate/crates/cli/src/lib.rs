//! Batch front end for the elaborator: lexer, parser, command execution,
//! diagnostic rendering, and the built-in prelude.

pub mod command;
pub mod diagnostics;
pub mod lex;
pub mod parse;

use command::Session;
use elab_core::elaborate::ElabOptions;
use elab_core::env::Environment;

/// Source of the built-in prelude, elaborated before any user file.
pub const PRELUDE: &str = include_str!("prelude.elab");

/// The environment produced by running the prelude. Panics if the prelude
/// fails to parse or elaborate, which would be a bug in this crate.
pub fn prelude_env() -> Environment {
    let (cmds, errs) = parse::parse_file(PRELUDE);
    assert!(errs.is_empty(), "prelude parse errors: {errs:?}");
    let mut session = Session::new(Environment::new(), ElabOptions::default());
    for c in &cmds {
        if let Err(d) = session.run(c) {
            panic!("prelude failed at `{c}`: {}", d.message);
        }
    }
    session.into_env()
}
