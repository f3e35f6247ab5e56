mod args;
mod commands;
mod svg;

use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::Parser;

use args::{Cli, Command, Problem};

const EXIT_USAGE: u8 = 1;
const EXIT_DOMAIN: u8 = 2;
const EXIT_NUMERICAL: u8 = 3;

fn exit_code(err: &anyhow::Error) -> u8 {
    if let Some(core) = err.downcast_ref::<supercrit::Error>() {
        return if core.is_domain() { EXIT_DOMAIN } else { EXIT_NUMERICAL };
    }
    let input = err.downcast_ref::<commands::InputError>().is_some()
        || err.downcast_ref::<std::io::Error>().is_some()
        || err.downcast_ref::<csv::Error>().is_some();
    if input {
        EXIT_DOMAIN
    } else {
        EXIT_NUMERICAL
    }
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Pc { n } => commands::pc(n),
        Command::Spectrum(problem) => commands::spectrum(problem),
        Command::Shoot {
            problem,
            gamma,
            numerics,
            r_max,
            output,
        } => commands::shoot_cmd(problem, gamma, numerics, r_max, &output.out),
        Command::Branch {
            problem,
            offsets,
            numerics,
            output,
        } => commands::branch(problem, &offsets, numerics, &output.out),
        Command::Oscillate {
            problem,
            numerics,
            output,
        } => commands::oscillate(problem, numerics, &output.out),
        Command::Verdict(problem) => commands::verdict(problem),
        Command::Plot { kind, input, out, n, p } => {
            let problem = n.zip(p).map(|(n, p)| Problem { n, p });
            commands::plot(kind, &input, &out, problem)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(EXIT_USAGE),
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
