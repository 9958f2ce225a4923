mod commands;
mod manifest;
mod output;

use std::process::ExitCode;
use std::time::Instant;

use clap::Parser;

use commands::{Cli, Outcome};
use manifest::RunManifest;

fn main() -> ExitCode {
    let argv: Vec<String> = std::env::args().collect();
    let cli = match Cli::try_parse_from(&argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };

    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
        {
            eprintln!("error: cannot configure {n} worker threads: {e}");
            return ExitCode::from(1);
        }
    }

    let start = Instant::now();
    let mut outcome = Outcome::default();
    let result = commands::run(&cli, &mut outcome);
    let mut manifest = RunManifest::new(argv, &outcome, start.elapsed());

    let code = match result {
        Ok(()) => outcome.exit_code,
        Err(e) => {
            eprintln!("error: {e}");
            manifest.error = Some(e.to_string());
            exit_code(&e)
        }
    };
    manifest.exit_code = code;
    if let Err(e) = manifest.emit(cli.manifest.as_deref(), outcome.primary_output.as_deref()) {
        eprintln!("error: {e}");
        return ExitCode::from(3);
    }
    ExitCode::from(code)
}

fn exit_code(e: &pomdp_lab::Error) -> u8 {
    match e {
        pomdp_lab::Error::Io { .. } => 3,
        e if e.is_numerical() => 2,
        _ => 1,
    }
}
