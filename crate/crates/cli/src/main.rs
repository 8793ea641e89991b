use std::process::ExitCode;

use clap::Parser;
use kkglue_cli::{normalize_args, run, RunConfig};

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("KKGLUE_LOG", "warn")).init();
    let cfg = match RunConfig::try_parse_from(normalize_args(std::env::args_os())) {
        Ok(cfg) => cfg,
        Err(e) => e.exit(),
    };
    let outcome = run(&cfg);
    for line in &outcome.diagnostics {
        eprintln!("{line}");
    }
    match &cfg.out {
        Some(path) => {
            if let Err(e) = std::fs::write(path, &outcome.rendered) {
                eprintln!("cannot write {}: {e}", path.display());
                return ExitCode::from(1);
            }
        }
        None => print!("{}", outcome.rendered),
    }
    eprintln!(
        "{}: {} ({} scenario{})",
        outcome.report.subcommand,
        outcome.report.verdict.as_str(),
        outcome.report.scenarios.len(),
        if outcome.report.scenarios.len() == 1 {
            ""
        } else {
            "s"
        }
    );
    ExitCode::from(outcome.exit_code)
}
