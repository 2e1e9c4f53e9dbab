use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use ppgof::cli::run_cli;
use ppgof::io::{apply_policy, events_to_csv, parse_event_times, FitOutput, TestOutput, WindowPolicy};
use ppgof::experiments::ExperimentReport;
use proptest::prelude::*;
use serde_json::Value;

fn run(args: &[&str]) -> (i32, String, String) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let code = run_cli(std::iter::once("ppgof").chain(args.iter().copied()), &mut out, &mut err);
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}

fn ok(args: &[&str]) -> String {
    let (code, out, err) = run(args);
    assert_eq!(code, 0, "{args:?}: {err}");
    out
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

/// Documented key set of every object in the schema document.
fn documented_schemas() -> BTreeMap<String, BTreeSet<String>> {
    let doc = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../docs/schemas.md");
    let text = fs::read_to_string(doc).unwrap();
    let mut out = BTreeMap::new();
    for section in text.split("\n## ").skip(1) {
        let name = section.lines().next().unwrap().trim().to_string();
        let keys: BTreeSet<String> = section
            .lines()
            .filter_map(|l| l.strip_prefix("- `"))
            .map(|l| l.split('`').next().unwrap().to_string())
            .collect();
        if !keys.is_empty() && !name.contains(' ') {
            out.insert(name, keys);
        }
    }
    out
}

fn assert_keys(schemas: &BTreeMap<String, BTreeSet<String>>, name: &str, v: &Value) {
    let actual: BTreeSet<String> = v.as_object().unwrap_or_else(|| panic!("{name} is not an object")).keys().cloned().collect();
    assert_eq!(&actual, &schemas[name], "schema {name}");
}

fn simulate_to(dir: &Path, name: &str, args: &[&str]) -> PathBuf {
    let path = dir.join(name);
    let mut full = vec!["simulate"];
    full.extend_from_slice(args);
    full.extend_from_slice(&["--out", p(&path)]);
    ok(&full);
    path
}

#[test]
fn simulate_then_fit_recovers_the_rate() {
    let dir = tempfile::tempdir().unwrap();
    let ev = simulate_to(dir.path(), "ev.csv", &["--model", "poisson", "--mu", "100", "--seed", "8"]);
    let out = ok(&["fit", "--events", p(&ev), "--model", "poisson", "--t-start", "0", "--t-end", "1"]);
    let doc: FitOutput = serde_json::from_str(&out).unwrap();
    let rate = doc.fit.theta_hat[0];
    assert!((rate - 100.0).abs() <= 30.0, "{rate}");
    assert_eq!(rate, doc.n_events as f64);
}

#[test]
fn json_outputs_match_the_documented_schemas() {
    let schemas = documented_schemas();
    let dir = tempfile::tempdir().unwrap();
    let ev = simulate_to(dir.path(), "ev.csv", &["--model", "hawkes", "--mu", "40", "--alpha", "30", "--beta", "60", "--seed", "2"]);

    let fit: Value = serde_json::from_str(&ok(&["fit", "--events", p(&ev), "--model", "hawkes", "--t-end", "1"])).unwrap();
    assert_keys(&schemas, "fit_output", &fit);
    assert_keys(&schemas, "fit_result", &fit["fit"]);
    assert_keys(&schemas, "window", &fit["window"]);
    assert_keys(&schemas, "affine_map", &fit["affine_map"]);
    serde_json::from_value::<FitOutput>(fit).unwrap();

    let test_out = dir.path().join("test.json");
    ok(&["test", "--events", p(&ev), "--null", "poisson", "-B", "19", "--t-end", "1", "--reference", "--out", p(&test_out)]);
    let test: Value = serde_json::from_str(&fs::read_to_string(&test_out).unwrap()).unwrap();
    assert_keys(&schemas, "test_output", &test);
    assert_keys(&schemas, "gof_test_result", &test["result"]);
    assert_keys(&schemas, "ks_result", &test["reference"]);
    let p_value = test["result"]["p_value"].as_f64().unwrap();
    assert!(p_value > 0.0 && p_value <= 1.0);
    serde_json::from_value::<TestOutput>(test).unwrap();

    let no_ref: Value = serde_json::from_str(&ok(&["test", "--events", p(&ev), "--null", "poisson", "-B", "9", "--t-end", "1"])).unwrap();
    assert_keys(&schemas, "test_output", &no_ref);
    assert!(no_ref["reference"].is_null());

    let cfg = dir.path().join("run.toml");
    fs::write(&cfg, "null_model = \"poisson\"\nM = 3\nB = 9\nlevel = 0.05\nseed = 1\n[generator]\nkind = \"poisson\"\nmu = 30\n").unwrap();
    let out_dir = dir.path().join("exp");
    ok(&["experiment", "--config", p(&cfg), "--out-dir", p(&out_dir), "--quiet"]);
    let report: Value = serde_json::from_str(&fs::read_to_string(out_dir.join("report.json")).unwrap()).unwrap();
    assert_keys(&schemas, "experiment_report", &report);
    assert_keys(&schemas, "experiment_config", &report["config"]);
    assert_keys(&schemas, "window", &report["config"]["window"]);
    for rec in report["per_replicate"].as_array().unwrap() {
        assert_keys(&schemas, "replicate_record", rec);
    }
    let csv = fs::read_to_string(out_dir.join("replicates.csv")).unwrap();
    let header: BTreeSet<String> = csv.lines().next().unwrap().split(',').map(String::from).collect();
    assert_eq!(header, schemas["replicate_record"]);
    assert_eq!(csv.lines().count(), 4);
    serde_json::from_value::<ExperimentReport>(report).unwrap();

    let grid_dir = dir.path().join("grid");
    fs::write(&cfg, "null_model = \"poisson\"\nM = 2\nB = 9\nlevel = 0.05\nseed = 1\nreference = false\n[generator]\nkind = \"poisson\"\nmu = 30\n").unwrap();
    ok(&["experiment", "--config", p(&cfg), "--out-dir", p(&grid_dir), "--grid", "type1-poisson"]);
    let rows: Value = serde_json::from_str(&fs::read_to_string(grid_dir.join("grid.json")).unwrap()).unwrap();
    assert_eq!(rows.as_array().unwrap().len(), 6);
    for row in rows.as_array().unwrap() {
        assert_keys(&schemas, "grid_row", row);
        assert!(row["rejection_rate_reference"].is_null());
    }
    assert_eq!(fs::read_to_string(grid_dir.join("grid.csv")).unwrap().lines().count(), 7);
}

#[test]
fn hawkes_null_with_reference_reports_both_p_values() {
    let dir = tempfile::tempdir().unwrap();
    let ev = simulate_to(dir.path(), "ev.csv", &["--model", "hawkes", "--mu", "20", "--alpha", "60", "--beta", "80", "--seed", "5"]);
    let out: TestOutput = serde_json::from_str(&ok(&[
        "test", "--events", p(&ev), "--null", "hawkes", "-B", "19", "--t-end", "1", "--reference", "--seed", "3", "--workers", "2",
    ]))
    .unwrap();
    assert_eq!(out.result.theta_hat.len(), 3);
    assert!(out.result.p_value > 0.0 && out.result.p_value <= 1.0);
    let reference = out.reference.unwrap();
    assert!(reference.p_value >= 0.0 && reference.p_value <= 1.0);
}

#[test]
fn randomized_commands_are_reproducible_under_seed() {
    let sim = |seed: &str| ok(&["simulate", "--model", "exp-affine", "--theta0", "4", "--theta1", "-1", "--seed", seed]);
    assert_eq!(sim("1"), sim("1"));
    assert_ne!(sim("1"), sim("2"));
    let dir = tempfile::tempdir().unwrap();
    let ev = dir.path().join("ev.csv");
    fs::write(&ev, sim("1")).unwrap();
    let fit = |seed: &str| ok(&["fit", "--events", p(&ev), "--model", "exp-affine", "--t-end", "1", "--seed", seed]);
    assert_eq!(fit("4"), fit("4"));
    let test = |seed: &str| ok(&["test", "--events", p(&ev), "--null", "exp-affine", "-B", "19", "--t-end", "1", "--seed", seed]);
    assert_eq!(test("4"), test("4"));
}

#[test]
fn smooth_writes_a_rate_curve() {
    let dir = tempfile::tempdir().unwrap();
    let ev = dir.path().join("ev.csv");
    fs::write(&ev, "time\n5000\n10000\n30000\n").unwrap();
    let out = ok(&["smooth", "--events", p(&ev), "--sigma", "3000", "--grid", "11", "--t-end", "40000", "--no-rescale"]);
    let mut lines = out.lines();
    assert_eq!(lines.next(), Some("t,rate"));
    let rows: Vec<(f64, f64)> = lines
        .map(|l| {
            let (t, r) = l.split_once(',').unwrap();
            (t.parse().unwrap(), r.parse().unwrap())
        })
        .collect();
    assert_eq!(rows.len(), 11);
    assert_eq!(rows[0].0, 0.0);
    assert_eq!(rows[10].0, 40000.0);
    assert!(rows.iter().all(|&(_, r)| r >= 0.0));
}

#[test]
fn exclusion_is_reported_in_the_affine_map() {
    let dir = tempfile::tempdir().unwrap();
    let ev = dir.path().join("ev.csv");
    let times: Vec<f64> = (1..=120).map(|i| i as f64 * 8000.0).collect();
    fs::write(&ev, events_to_csv(&times)).unwrap();
    let out: FitOutput = serde_json::from_str(&ok(&[
        "fit", "--events", p(&ev), "--model", "poisson", "--exclude-before", "50000", "--t-end", "1000000",
    ]))
    .unwrap();
    assert_eq!(out.affine_map.offset, 50000.0);
    assert_eq!(out.affine_map.scale, 950000.0);
    assert_eq!(out.n_events, 120 - 6);
}

#[test]
fn binary_exit_codes() {
    let bin = env!("CARGO_BIN_EXE_ppgof");
    let dir = tempfile::tempdir().unwrap();
    let dup = dir.path().join("dup.csv");
    fs::write(&dup, "time\n0.2\n0.5\n0.2\n").unwrap();

    let status = |args: &[&str], env: Option<(&str, &str)>| {
        let mut cmd = Command::new(bin);
        cmd.args(args).env_remove("PPGOF_WORKERS");
        if let Some((k, v)) = env {
            cmd.env(k, v);
        }
        let out = cmd.output().unwrap();
        (out.status.code().unwrap(), String::from_utf8(out.stderr).unwrap())
    };
    assert_eq!(status(&["frobnicate"], None).0, 1);
    let (code, err) = status(&["fit", "--events", p(&dup), "--model", "poisson"], None);
    assert_eq!(code, 2);
    assert!(err.contains("rows 2 and 4"), "{err}");
    let good = dir.path().join("good.csv");
    fs::write(&good, "time\n0.2\n0.5\n").unwrap();
    let args = ["test", "--events", p(&good), "--null", "poisson", "-B", "9"];
    assert_eq!(status(&args, Some(("PPGOF_WORKERS", "many"))).0, 1);
    assert_eq!(status(&args, Some(("PPGOF_WORKERS", "2"))).0, 0);
    let cfg = dir.path().join("bad.toml");
    fs::write(&cfg, "null_model = \"poisson\"\nM = 3\nB = 9\nlevel = 0.05\nseed = 1\ncolour = 2\n[generator]\nkind = \"poisson\"\nmu = 30\n").unwrap();
    assert_eq!(status(&["experiment", "--config", p(&cfg)], None).0, 1);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn ingest_export_ingest_is_idempotent(
        raw in prop::collection::btree_set(0u64..1_000_000_000, 1..60),
        scale_exp in -3i32..9,
        cut_frac in prop::option::of(0.0f64..0.5),
    ) {
        let unit = 10f64.powi(scale_exp) / 1e9;
        let times: Vec<f64> = raw.iter().map(|&k| k as f64 * unit).collect();
        let end = 1e9 * unit;
        let policy = WindowPolicy {
            start: Some(0.0),
            end: Some(end),
            exclude_before: cut_frac.map(|f| f * end),
            rescale: true,
        };
        let Ok(first) = apply_policy(times, &policy) else { return Ok(()) };
        let text = events_to_csv(first.events.times());
        let unit_policy = WindowPolicy { start: Some(0.0), end: Some(1.0), exclude_before: None, rescale: true };
        let second = apply_policy(parse_event_times(&text).unwrap(), &unit_policy).unwrap();
        prop_assert_eq!(first.events.times(), second.events.times());
        prop_assert_eq!(events_to_csv(second.events.times()), text);
    }
}
