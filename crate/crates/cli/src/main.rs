mod args;
mod commands;
mod error;
mod output;
mod session;

use std::process::ExitCode;

use clap::Parser;

use crate::args::{result_flags, Cli, Command};
use crate::error::{CliError, CliResult};
use crate::output::write_json;
use crate::session::{RunRecord, Session, Timings};

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

fn run(cli: Cli) -> CliResult<()> {
    let threads = match cli.global.threads {
        Some(0) => return Err(CliError::Input("--threads must be at least 1".into())),
        Some(n) => n,
        None => std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1),
    };
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| CliError::Internal(format!("starting worker pool: {e}")))?;

    let mut session = Session {
        record: RunRecord {
            tool: env!("CARGO_PKG_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            manifest_hash: None,
            seed: None,
            subcommand: cli.command.name().to_string(),
            flags: result_flags(&cli.global, &cli.command),
        },
        global: cli.global,
        timings: Timings::new(),
    };
    match &cli.command {
        Command::Fit {
            conditions,
            subjects,
            force,
        } => commands::fit::run(&mut session, conditions, subjects, *force)?,
        Command::Residual { source, target, name } => commands::residual::run(&mut session, source, target, name)?,
        Command::Ceiling => commands::ceiling::run(&mut session)?,
        Command::Contrast {
            mode,
            condition_a,
            condition_b,
            normalize,
            sequential,
            refit,
        } => commands::contrast::run(
            &mut session,
            commands::contrast::ContrastArgs {
                mode: *mode,
                condition_a: condition_a.as_deref(),
                condition_b,
                normalize: *normalize,
                sequential: *sequential,
                refit: *refit,
            },
        )?,
        Command::Synth { spec } => commands::synth::run(&mut session, spec.as_deref())?,
        Command::Report { conditions } => commands::report::run(&mut session, conditions)?,
    }
    let timings = session.timings.to_value(&session.record, threads);
    write_json(
        &session
            .out()
            .join("timings")
            .join(format!("{}.json", session.record.subcommand)),
        &timings,
    )
}
