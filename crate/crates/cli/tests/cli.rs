use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use kkglue::models::{random_exact_scenario, ExactParams};
use kkglue::scenario::ScenarioFile;
use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_kkglue"))
}

fn sample(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../scenarios")
        .join(name)
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn json(o: &Output) -> Value {
    serde_json::from_slice(&o.stdout).expect("stdout is JSON")
}

fn rows(report: &Value) -> Vec<&Value> {
    report["scenarios"]
        .as_array()
        .unwrap()
        .iter()
        .flat_map(|s| s["rows"].as_array().unwrap())
        .collect()
}

/// Explicit scenario file whose `T` matrices are transformed by `f`.
fn corrupted_t(dir: &Path, f: impl Fn(&mut Value)) -> PathBuf {
    let (seed, mut v) = (0..)
        .map(|seed| {
            let s = random_exact_scenario::<f64>(seed, &ExactParams::default()).unwrap();
            (
                seed,
                serde_json::from_str::<Value>(&ScenarioFile::from_scenario(&s).to_json()).unwrap(),
            )
        })
        .find(|(_, v)| {
            v["T"]
                .as_array()
                .is_some_and(|t| t.iter().any(|m| m.as_array().unwrap().len() > 1))
        })
        .unwrap();
    f(&mut v["T"]);
    let path = dir.join(format!("corrupt_{seed}.json"));
    std::fs::write(&path, serde_json::to_string(&v).unwrap()).unwrap();
    path
}

fn scale_all(v: &mut Value, factor: f64) {
    match v {
        Value::Number(n) => *v = serde_json::json!(n.as_f64().unwrap() * factor),
        Value::Array(items) => items.iter_mut().for_each(|x| scale_all(x, factor)),
        _ => {}
    }
}

#[test]
fn eq9_on_random_exact_passes_with_vanishing_defects() {
    let o = run(&[
        "eq9",
        "--scenario",
        sample("random_exact.json").to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let r = json(&o);
    assert_eq!(r["verdict"], "PASS");
    for row in rows(&r) {
        let anchor = row["anchor"].as_str().unwrap();
        if ["eq9-unitary", "eq10", "eqB-path", "modJ"].contains(&anchor)
            && row["check"] != "rank"
            && row["check"] != "lipschitz_ratio"
        {
            assert!(row["value"].as_f64().unwrap() <= 1e-10, "{row}");
        }
    }
}

#[test]
fn eq9_on_toeplitz_passes_with_equal_pairing_sums() {
    let o = run(&[
        "eq9",
        "--scenario",
        sample("toeplitz_128_2_1.json").to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let r = json(&o);
    let pairings = r["scenarios"][0]["detail"]["pairings"].as_array().unwrap();
    assert_eq!(pairings.len(), 5);
    for p in pairings {
        assert_eq!(p["lhs_rounded"], p["rhs_rounded"]);
        // Toeplitz index: x and x̃ each pair to minus the winding.
        assert_eq!(
            p["lhs_rounded"].as_i64().unwrap(),
            -2 * p["winding"].as_i64().unwrap()
        );
    }
    assert!(rows(&r).iter().all(|row| row["status"] != "FAIL"));
}

#[test]
fn glue_with_non_unitary_t_fails_with_named_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = corrupted_t(dir.path(), |t| scale_all(t, 0.5));
    let o = run(&["glue", "--scenario", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("TNotUnitary"), "{}", stderr(&o));
    let r = json(&o);
    assert_eq!(r["verdict"], "FAIL");
    assert_eq!(r["scenarios"][0]["error"]["kind"], "domain");
}

#[test]
fn glue_with_non_intertwining_t_fails_with_named_error() {
    let dir = tempfile::tempdir().unwrap();
    // Swapping the columns of a block keeps it unitary.
    let path = corrupted_t(dir.path(), |t| {
        for m in t.as_array_mut().unwrap() {
            for row in m.as_array_mut().unwrap() {
                row.as_array_mut().unwrap().reverse();
            }
        }
    });
    let o = run(&["glue", "--scenario", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("TNotBimodule"), "{}", stderr(&o));
}

#[test]
fn schema_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, r#"{"model": {"kind": "random_exact"}, "sed": 3}"#).unwrap();
    let o = run(&["lemma1", "--scenario", bad.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("schema error"), "{}", stderr(&o));

    let missing = dir.path().join("missing.json");
    assert_eq!(
        run(&["lemma1", "--scenario", missing.to_str().unwrap()])
            .status
            .code(),
        Some(2)
    );

    let good = sample("random_exact.json");
    assert_eq!(
        run(&[
            "lemma1",
            "--scenario",
            good.to_str().unwrap(),
            "--budget.eq11=1"
        ])
        .status
        .code(),
        Some(2)
    );
    assert_eq!(
        run(&["frobnicate", "--scenario", good.to_str().unwrap()])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(
        run(&["sweep", "--scenario", good.to_str().unwrap()])
            .status
            .code(),
        Some(2)
    );

    // A schema error wins over a passing scenario in the same run.
    let o = run(&[
        "lemma1",
        "--scenario",
        good.to_str().unwrap(),
        bad.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(json(&o)["scenarios"][0]["verdict"], "PASS");
}

#[test]
fn uncovering_ideals_are_domain_failures() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("gap.json");
    let text = std::fs::read_to_string(sample("explicit_small.json"))
        .unwrap()
        .replace("\"S2\": [1, 2]", "\"S2\": [1]");
    std::fs::write(&path, text).unwrap();
    let o = run(&["lemma1", "--scenario", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("SumNotWholeAlgebra"), "{}", stderr(&o));
}

#[test]
fn tightened_budget_names_the_violated_check() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("t32.json");
    std::fs::write(
        &path,
        r#"{"model": {"kind": "circle_toeplitz", "m": 1, "m_tilde": 0}, "N": 32}"#,
    )
    .unwrap();
    let out = dir.path().join("report.csv");
    let o = run(&[
        "glue",
        "--scenario",
        path.to_str().unwrap(),
        "--budget.eq2.comm=0.1",
        "--format",
        "csv",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("FAIL thm1/xy.comm"), "{}", stderr(&o));
    let csv = std::fs::read_to_string(out).unwrap();
    assert!(csv.starts_with("scenario_id,scenario,anchor,check,value,relation,limit,status\n"));
    assert!(
        csv.lines()
            .any(|l| l.contains(",thm1,xy.comm,") && l.ends_with(",le,0.1,FAIL")),
        "{csv}"
    );
}

#[test]
fn reports_are_deterministic_across_job_counts() {
    let files = [
        "random_exact.json",
        "explicit_small.json",
        "explicit_exact_seed3.json",
    ]
    .map(sample);
    let mut args = vec!["theorem1".to_string(), "--scenario".into()];
    args.extend(files.iter().map(|p| p.to_str().unwrap().to_string()));
    let with_jobs = |j: &str| {
        let mut a = args.clone();
        a.extend([
            "--jobs".to_string(),
            j.to_string(),
            "--seed".into(),
            "11".into(),
        ]);
        bin().args(&a).output().unwrap()
    };
    let a = with_jobs("1");
    let b = with_jobs("3");
    assert_eq!(a.status.code(), Some(0), "{}", stderr(&a));
    assert_eq!(a.stdout, b.stdout);
    let r = json(&a);
    let ids: Vec<i64> = r["scenarios"]
        .as_array()
        .unwrap()
        .iter()
        .map(|s| s["id"].as_i64().unwrap())
        .collect();
    assert_eq!(ids, [0, 1, 2]);
    assert!(rows(&r)
        .iter()
        .all(|row| row["anchor"].as_str().is_some_and(|s| !s.is_empty())));
}

#[test]
fn seed_override_changes_random_scenarios() {
    let path = sample("random_exact.json");
    let a = run(&[
        "lemma1",
        "--scenario",
        path.to_str().unwrap(),
        "--seed",
        "1",
    ]);
    let b = run(&[
        "lemma1",
        "--scenario",
        path.to_str().unwrap(),
        "--seed",
        "2",
    ]);
    assert_eq!(a.status.code(), Some(0));
    assert_ne!(a.stdout, b.stdout);
}
