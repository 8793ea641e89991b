//! Batch driver: loads scenario files, runs a verification suite on each and
//! renders a deterministic report.

pub mod report;
pub mod suites;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Parser, ValueEnum};
use rayon::prelude::*;

use kkglue::homotopy::DEFAULT_SAMPLES;
use kkglue::models::Budgets;
use kkglue::scenario::ScenarioFile;

use report::{ErrorKind, Report, ScenarioReport, Status};
use suites::{Context, SuiteError};

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Suite {
    /// Partition of unity and submodule identities.
    Lemma1,
    /// Validity of both inputs and their agreement on the overlap.
    Agree,
    /// Quotient construction and checks of `x ⋄ x̃`.
    Glue,
    /// `glue` for both orders, plus agreement of the inputs.
    Theorem1,
    /// Unitary, conjugation defect, homotopy path and pairing additivity.
    Eq9,
    /// `N ∈ {32, 64, 128}` trend report for circle models.
    Sweep,
}

impl Suite {
    pub fn name(self) -> &'static str {
        match self {
            Suite::Lemma1 => "lemma1",
            Suite::Agree => "agree",
            Suite::Glue => "glue",
            Suite::Theorem1 => "theorem1",
            Suite::Eq9 => "eq9",
            Suite::Sweep => "sweep",
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, ValueEnum)]
pub enum Format {
    #[default]
    Json,
    Csv,
}

/// Run configuration.
///
/// Budget overrides are written `--budget.KEY=V` (or `--budget KEY=V`) with
/// keys `eq2`, `eq2.comm`, `eq2.sq`, `eq2.sa`, `eq4`, `eq10`, `path` and
/// `independence`; they replace the scenario's budgets after loading.
#[derive(Clone, Debug, Parser)]
#[command(
    name = "kkglue",
    version,
    about = "Verify cut-and-paste constructions of Kasparov modules"
)]
pub struct RunConfig {
    #[arg(value_enum)]
    pub suite: Suite,
    /// Scenario JSON files; reports keep this order.
    #[arg(long = "scenario", required = true, num_args = 1..)]
    pub scenarios: Vec<PathBuf>,
    /// Report path; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub format: Format,
    #[arg(long = "budget", value_name = "KEY=V", value_parser = parse_budget)]
    pub budgets: Vec<(String, f64)>,
    /// Homotopy grid size, endpoints included.
    #[arg(long, default_value_t = DEFAULT_SAMPLES)]
    pub samples: usize,
    /// Scenarios processed in parallel; 0 uses every core.
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
    /// Replaces the seed of every scenario.
    #[arg(long)]
    pub seed: Option<u64>,
}

fn parse_budget(s: &str) -> Result<(String, f64), String> {
    let (k, v) = s
        .split_once('=')
        .ok_or_else(|| format!("expected KEY=V, got `{s}`"))?;
    let v: f64 = v
        .trim()
        .parse()
        .map_err(|_| format!("budget {k}: `{v}` is not a number"))?;
    Budgets::exact().set(k.trim(), v)?;
    Ok((k.trim().to_string(), v))
}

/// Rewrites `--budget.KEY=V` and `--budget.KEY V` into `--budget KEY=V`.
pub fn normalize_args<I: IntoIterator<Item = OsString>>(args: I) -> Vec<OsString> {
    let mut out = Vec::new();
    let mut iter = args.into_iter().peekable();
    while let Some(arg) = iter.next() {
        let Some(rest) = arg.to_str().and_then(|s| s.strip_prefix("--budget.")) else {
            out.push(arg);
            continue;
        };
        out.push("--budget".into());
        if rest.contains('=') {
            out.push(rest.into());
        } else {
            let value = iter
                .next()
                .map(|v| v.to_string_lossy().into_owned())
                .unwrap_or_default();
            out.push(format!("{rest}={value}").into());
        }
    }
    out
}

/// Result of a run: the rendered report and the process exit code.
#[derive(Clone, Debug)]
pub struct Outcome {
    pub report: Report,
    pub rendered: String,
    pub exit_code: u8,
    pub diagnostics: Vec<String>,
}

fn run_one(id: usize, path: &PathBuf, suite: Suite, ctx: &Context) -> ScenarioReport {
    let display = path.display().to_string();
    let fallback = path
        .file_stem()
        .map_or_else(|| display.clone(), |s| s.to_string_lossy().into_owned());
    let mut out = ScenarioReport::new(id, display, fallback);
    log::info!("{}: scenario {id} ({})", suite.name(), out.path);
    let result = (|| -> suites::Result<()> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| SuiteError::Schema(format!("cannot read {}: {e}", path.display())))?;
        let file = ScenarioFile::from_json(&text)?;
        if let Some(name) = &file.name {
            out.name = name.clone();
        }
        if suite == Suite::Sweep {
            return suites::sweep(&file, ctx, &mut out);
        }
        let s = ctx.build(&file)?;
        out.name = s.name.clone();
        match suite {
            Suite::Lemma1 => suites::lemma1(&s, &mut out),
            Suite::Agree => suites::agree(&s, &mut out),
            Suite::Glue => suites::glue(&s, &mut out),
            Suite::Theorem1 => suites::theorem1(&s, &mut out),
            Suite::Eq9 => suites::eq9(&s, ctx.samples, &mut out),
            Suite::Sweep => unreachable!(),
        }
    })();
    match result {
        Ok(()) => {}
        Err(SuiteError::Schema(m)) => out.fail_with(ErrorKind::Schema, m),
        Err(SuiteError::Domain(m)) => out.fail_with(ErrorKind::Domain, m),
    }
    let out = out.close();
    log::info!("{}: scenario {id} {}", suite.name(), out.verdict.as_str());
    out
}

/// Runs the configured suite. Exit code 2 when any scenario has a schema
/// error, 1 when any check fails or a domain error occurs, 0 otherwise.
pub fn run(cfg: &RunConfig) -> Outcome {
    let ctx = Context {
        samples: cfg.samples,
        seed: cfg.seed,
        overrides: cfg.budgets.clone(),
    };
    let work = || {
        cfg.scenarios
            .par_iter()
            .enumerate()
            .map(|(i, p)| run_one(i, p, cfg.suite, &ctx))
            .collect::<Vec<_>>()
    };
    let scenarios = match rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.jobs)
        .build()
    {
        Ok(pool) => pool.install(work),
        Err(e) => {
            log::warn!("falling back to the global thread pool: {e}");
            work()
        }
    };

    let schema = scenarios.iter().any(|s| {
        s.error
            .as_ref()
            .is_some_and(|e| e.kind == ErrorKind::Schema)
    });
    let failed = scenarios.iter().any(|s| s.verdict == Status::Fail);
    let exit_code = if schema {
        2
    } else if failed {
        1
    } else {
        0
    };
    let diagnostics = scenarios.iter().flat_map(|s| s.diagnostics()).collect();
    let report = Report {
        tool: "kkglue",
        version: env!("CARGO_PKG_VERSION"),
        subcommand: cfg.suite.name().to_string(),
        samples: cfg.samples,
        seed: cfg.seed,
        budget_overrides: cfg.budgets.clone(),
        verdict: Status::from_bool(exit_code == 0),
        scenarios,
    };
    let rendered = match (cfg.format, cfg.suite) {
        (Format::Json, _) => report::to_json(&report),
        (Format::Csv, Suite::Sweep) => report::sweep_csv(&report),
        (Format::Csv, _) => report::rows_csv(&report),
    };
    Outcome {
        report,
        rendered,
        exit_code,
        diagnostics,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn os(v: &[&str]) -> Vec<OsString> {
        v.iter().map(OsString::from).collect()
    }

    #[test]
    fn budget_flags_are_normalized() {
        let a = normalize_args(os(&[
            "kkglue",
            "eq9",
            "--budget.eq10=0.5",
            "--budget.eq2.comm",
            "0.3",
        ]));
        assert_eq!(
            a,
            os(&[
                "kkglue",
                "eq9",
                "--budget",
                "eq10=0.5",
                "--budget",
                "eq2.comm=0.3"
            ])
        );
    }

    #[test]
    fn config_parses_and_rejects_unknown_budgets() {
        let cfg = RunConfig::try_parse_from(normalize_args(os(&[
            "kkglue",
            "glue",
            "--scenario",
            "a.json",
            "b.json",
            "--budget.eq4=0.2",
            "--format",
            "csv",
        ])))
        .unwrap();
        assert_eq!(cfg.suite, Suite::Glue);
        assert_eq!(cfg.scenarios.len(), 2);
        assert_eq!(cfg.budgets, vec![("eq4".to_string(), 0.2)]);
        assert_eq!(cfg.samples, DEFAULT_SAMPLES);
        assert!(RunConfig::try_parse_from(normalize_args(os(&[
            "kkglue",
            "glue",
            "--scenario",
            "a",
            "--budget.eq5=1"
        ])))
        .is_err());
        assert!(
            RunConfig::try_parse_from(os(&["kkglue", "glue", "--scenario", "a", "--bogus"]))
                .is_err()
        );
        assert!(
            RunConfig::try_parse_from(os(&["kkglue", "frobnicate", "--scenario", "a"])).is_err()
        );
    }
}
