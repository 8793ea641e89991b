//! Report rows, rounding and output formats.

use std::fmt::Write as _;

use serde::Serialize;
use serde_json::Value;

/// Outcome of one check. `Info` rows are reported without a threshold.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Status {
    Pass,
    Fail,
    Info,
}

impl Status {
    pub fn from_bool(ok: bool) -> Self {
        if ok {
            Status::Pass
        } else {
            Status::Fail
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Status::Pass => "PASS",
            Status::Fail => "FAIL",
            Status::Info => "INFO",
        }
    }
}

/// How `value` is compared with `limit`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Relation {
    Le,
    Ge,
    Eq,
}

#[derive(Clone, Debug, Serialize)]
pub struct Row {
    pub anchor: String,
    pub check: String,
    pub value: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub relation: Option<Relation>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub limit: Option<f64>,
    pub status: Status,
}

impl Row {
    fn new(
        anchor: &str,
        check: impl Into<String>,
        value: f64,
        relation: Option<Relation>,
        limit: Option<f64>,
        status: Status,
    ) -> Self {
        Self {
            anchor: anchor.into(),
            check: check.into(),
            value,
            relation,
            limit,
            status,
        }
    }

    pub fn le(anchor: &str, check: impl Into<String>, value: f64, limit: f64) -> Self {
        Self::new(
            anchor,
            check,
            value,
            Some(Relation::Le),
            Some(limit),
            Status::from_bool(value <= limit),
        )
    }

    pub fn ge(anchor: &str, check: impl Into<String>, value: f64, limit: f64) -> Self {
        Self::new(
            anchor,
            check,
            value,
            Some(Relation::Ge),
            Some(limit),
            Status::from_bool(value >= limit),
        )
    }

    pub fn eq(anchor: &str, check: impl Into<String>, value: f64, expected: f64) -> Self {
        Self::new(
            anchor,
            check,
            value,
            Some(Relation::Eq),
            Some(expected),
            Status::from_bool(value == expected),
        )
    }

    /// A boolean property, recorded as 1 (holds) or 0.
    pub fn holds(anchor: &str, check: impl Into<String>, ok: bool) -> Self {
        Self::eq(anchor, check, if ok { 1.0 } else { 0.0 }, 1.0)
    }

    pub fn info(anchor: &str, check: impl Into<String>, value: f64) -> Self {
        Self::new(anchor, check, value, None, None, Status::Info)
    }

    /// `le` when a limit is configured, `info` otherwise.
    pub fn le_opt(anchor: &str, check: impl Into<String>, value: f64, limit: Option<f64>) -> Self {
        match limit {
            Some(l) => Self::le(anchor, check, value, l),
            None => Self::info(anchor, check, value),
        }
    }

    /// Keeps the value but stops judging it.
    pub fn unjudged(mut self) -> Self {
        self.status = Status::Info;
        self
    }

    pub fn describe(&self) -> String {
        let rel = match self.relation {
            Some(Relation::Le) => " <=",
            Some(Relation::Ge) => " >=",
            Some(Relation::Eq) => " ==",
            None => "",
        };
        match self.limit {
            Some(l) => format!(
                "{}/{}: {:e} not{rel} {:e}",
                self.anchor, self.check, self.value, l
            ),
            None => format!("{}/{}: {:e}", self.anchor, self.check, self.value),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorKind {
    Schema,
    Domain,
}

#[derive(Clone, Debug, Serialize)]
pub struct ErrorInfo {
    pub kind: ErrorKind,
    pub message: String,
}

/// One line of the sweep table.
#[derive(Clone, Debug, Serialize)]
pub struct SweepRow {
    #[serde(rename = "N")]
    pub n: usize,
    pub eq2_comm: f64,
    pub eq4_max: f64,
    pub eq10_norm: f64,
    pub eq10_rank: usize,
    pub path_max: f64,
    pub pairing_lhs: f64,
    pub pairing_rhs: f64,
    pub verdict: Status,
    pub winding: Option<i32>,
}

#[derive(Clone, Debug, Serialize)]
pub struct ScenarioReport {
    pub id: usize,
    pub path: String,
    pub name: String,
    pub verdict: Status,
    pub rows: Vec<Row>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub sweep: Vec<SweepRow>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<ErrorInfo>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub detail: Option<Value>,
}

impl ScenarioReport {
    pub fn new(id: usize, path: String, name: String) -> Self {
        Self {
            id,
            path,
            name,
            verdict: Status::Pass,
            rows: Vec::new(),
            sweep: Vec::new(),
            error: None,
            detail: None,
        }
    }

    pub fn push(&mut self, row: Row) {
        self.rows.push(row);
    }

    pub fn extend(&mut self, rows: impl IntoIterator<Item = Row>) {
        self.rows.extend(rows);
    }

    pub fn fail_with(&mut self, kind: ErrorKind, message: String) {
        self.error = Some(ErrorInfo { kind, message });
    }

    /// Sets the verdict from the rows and the error.
    pub fn close(mut self) -> Self {
        let failed = self.error.is_some()
            || self.rows.iter().any(|r| r.status == Status::Fail)
            || self.sweep.iter().any(|r| r.verdict == Status::Fail);
        self.verdict = Status::from_bool(!failed);
        self
    }

    /// Lines for stderr naming each violated invariant.
    pub fn diagnostics(&self) -> Vec<String> {
        let head = format!("scenario {} ({})", self.id, self.name);
        let mut out = Vec::new();
        if let Some(e) = &self.error {
            let kind = match e.kind {
                ErrorKind::Schema => "schema error",
                ErrorKind::Domain => "error",
            };
            out.push(format!("{head}: {kind}: {}", e.message));
        }
        for r in self.rows.iter().filter(|r| r.status == Status::Fail) {
            out.push(format!("{head}: FAIL {}", r.describe()));
        }
        out
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Report {
    pub tool: &'static str,
    pub version: &'static str,
    pub subcommand: String,
    pub samples: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub budget_overrides: Vec<(String, f64)>,
    pub verdict: Status,
    pub scenarios: Vec<ScenarioReport>,
}

/// Decimal places kept in reports.
pub const DIGITS: usize = 12;

/// Rounds `v` to [`DIGITS`] decimals; non-finite values become `null`.
pub fn round_value(v: f64) -> Value {
    if !v.is_finite() {
        return Value::Null;
    }
    let r: f64 = format!("{v:.DIGITS$}")
        .parse()
        .expect("formatted float parses");
    // Avoid `-0.0` in output.
    let r = if r == 0.0 { 0.0 } else { r };
    serde_json::Number::from_f64(r).map_or(Value::Null, Value::Number)
}

fn round_tree(v: &mut Value) {
    match v {
        Value::Number(n) if n.is_f64() => *v = round_value(n.as_f64().unwrap_or(f64::NAN)),
        Value::Array(items) => items.iter_mut().for_each(round_tree),
        Value::Object(map) => map.values_mut().for_each(round_tree),
        _ => {}
    }
}

/// Serializes with every float rounded to [`DIGITS`] decimals.
pub fn to_rounded_value<S: Serialize>(s: &S) -> Value {
    let mut v = serde_json::to_value(s).expect("reports serialize");
    round_tree(&mut v);
    v
}

pub fn to_json(report: &Report) -> String {
    let mut s = serde_json::to_string_pretty(&to_rounded_value(report)).expect("reports serialize");
    s.push('\n');
    s
}

fn csv_number(v: f64) -> String {
    match round_value(v) {
        Value::Number(n) => n.to_string(),
        _ => String::new(),
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// Sweep table, one line per `(scenario, N, probe)`.
pub fn sweep_csv(report: &Report) -> String {
    let mut out =
        String::from("N,eq2_comm,eq4_max,eq10_norm,eq10_rank,path_max,pairing_lhs,pairing_rhs,verdict,scenario,winding\n");
    for s in &report.scenarios {
        for r in &s.sweep {
            let winding = r.winding.map(|k| k.to_string()).unwrap_or_default();
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{},{}",
                r.n,
                csv_number(r.eq2_comm),
                csv_number(r.eq4_max),
                csv_number(r.eq10_norm),
                r.eq10_rank,
                csv_number(r.path_max),
                csv_number(r.pairing_lhs),
                csv_number(r.pairing_rhs),
                r.verdict.as_str(),
                csv_field(&s.name),
                winding
            );
        }
    }
    out
}

/// Check rows of every scenario.
pub fn rows_csv(report: &Report) -> String {
    let mut out = String::from("scenario_id,scenario,anchor,check,value,relation,limit,status\n");
    for s in &report.scenarios {
        if let Some(e) = &s.error {
            let _ = writeln!(
                out,
                "{},{},error,{},,,,FAIL",
                s.id,
                csv_field(&s.name),
                csv_field(&e.message)
            );
        }
        for r in &s.rows {
            let rel = match r.relation {
                Some(Relation::Le) => "le",
                Some(Relation::Ge) => "ge",
                Some(Relation::Eq) => "eq",
                None => "",
            };
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{}",
                s.id,
                csv_field(&s.name),
                csv_field(&r.anchor),
                csv_field(&r.check),
                csv_number(r.value),
                rel,
                r.limit.map(csv_number).unwrap_or_default(),
                r.status.as_str()
            );
        }
    }
    out
}
