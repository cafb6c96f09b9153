use clap::Parser;
use elab::command::Session;
use elab::diagnostics::{render, Diagnostic, SourceFile};
use elab::parse::{parse_file, ParseError};
use elab::prelude_env;
use elab_core::elaborate::ElabOptions;
use elab_core::solver::DEFAULT_MAX_STEPS;
use std::io::IsTerminal;
use std::path::PathBuf;
use std::process::ExitCode;

/// Batch elaborator for a small dependent type theory.
#[derive(Parser)]
#[command(name = "elab", version)]
struct Args {
    /// Source file to elaborate.
    file: PathBuf,
    /// Print the constraint-solver trace to stderr.
    #[arg(long)]
    trace_elab: bool,
    /// Solver step budget per command.
    #[arg(long, default_value_t = DEFAULT_MAX_STEPS)]
    max_steps: u64,
    /// Disable ANSI colors in diagnostics.
    #[arg(long)]
    no_color: bool,
}

enum Item<'a> {
    Cmd(&'a elab::command::SurfaceCommand),
    Err(&'a ParseError),
}

fn main() -> ExitCode {
    let args = Args::parse();
    let text = match std::fs::read_to_string(&args.file) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: cannot read {}: {e}", args.file.display());
            return ExitCode::from(2);
        }
    };
    let src = SourceFile::new(args.file.display().to_string(), text.as_str());
    let color = std::io::stdout().is_terminal() && !args.no_color;
    let opts = ElabOptions { max_steps: args.max_steps, trace: args.trace_elab };

    let (cmds, parse_errors) = parse_file(&text);

    // Commands and parse errors are each already in source order; interleave
    // them so diagnostics appear where the failed command was written.
    let mut items: Vec<Item> = cmds.iter().map(Item::Cmd).collect();
    items.extend(parse_errors.iter().map(Item::Err));
    items.sort_by_key(|it| match it {
        Item::Cmd(c) => c.span().lo,
        Item::Err(e) => e.span.lo,
    });

    let mut session = Session::new(prelude_env(), opts);
    let mut failed = false;
    for item in items {
        match item {
            Item::Cmd(cmd) => match session.run(cmd) {
                Ok(eff) => {
                    for line in eff.trace {
                        eprintln!("{line}");
                    }
                    for line in eff.output {
                        println!("{line}");
                    }
                }
                Err(d) => {
                    failed = true;
                    print!("{}", render(&d, &src, color));
                }
            },
            Item::Err(e) => {
                failed = true;
                let d = Diagnostic::error(Some(e.span), e.msg.clone());
                print!("{}", render(&d, &src, color));
            }
        }
    }
    if failed {
        ExitCode::from(1)
    } else {
        ExitCode::SUCCESS
    }
}
