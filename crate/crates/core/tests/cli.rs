mod common;

use std::path::{Path, PathBuf};
use std::process::Command;

use robust_did::cli::run;
use serde_json::Value;

const BIN: &str = env!("CARGO_BIN_EXE_robust-did");

fn call(args: &[&str]) -> (i32, String, String) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let mut argv = vec!["robust-did"];
    argv.extend_from_slice(args);
    let code = run(argv, &mut out, &mut err);
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}

fn json(args: &[&str]) -> Value {
    let (code, out, err) = call(args);
    assert_eq!(code, 0, "{args:?}: {err}");
    serde_json::from_str(&out).unwrap()
}

fn simulated(dir: &Path, family: &str, n: &str, seed: &str) -> PathBuf {
    let p = dir.join(format!("{family}-{seed}.csv"));
    let (code, _, err) = call(&["simulate", "--family", family, "-n", n, "--seed", seed, "-o", p.to_str().unwrap()]);
    assert_eq!(code, 0, "{err}");
    p
}

fn num(v: &Value, path: &[&str]) -> f64 {
    path.iter().fold(v, |v, k| &v[*k]).as_f64().unwrap_or_else(|| panic!("{path:?} missing"))
}

#[test]
fn simulate_is_deterministic() {
    let a = Command::new(BIN).args(["simulate", "--family", "ashenfelter", "--n", "1000", "--seed", "7"]).output().unwrap();
    let b = Command::new(BIN).args(["simulate", "--family", "ashenfelter", "--n", "1000", "--seed", "7"]).output().unwrap();
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    assert!(a.stdout.starts_with(b"unit,period,outcome,treatment\n"));
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let st = |args: &[&str]| Command::new(BIN).args(args).output().unwrap();
    let usage = st(&["bounds"]);
    assert_eq!(usage.status.code(), Some(2));
    assert_eq!(st(&["frobnicate"]).status.code(), Some(2));
    let missing = st(&["bounds", "-i", dir.path().join("none.csv").to_str().unwrap()]);
    assert_eq!(missing.status.code(), Some(1));
    let msg = String::from_utf8(missing.stderr).unwrap();
    assert!(msg.starts_with("error[Io]"), "{msg}");
    assert!(!msg.contains("panicked"));
    let p = simulated(dir.path(), "ashenfelter", "300", "1");
    let no_seed = st(&["bounds", "-i", p.to_str().unwrap(), "--bootstrap", "20"]);
    assert_eq!(no_seed.status.code(), Some(2));
    assert_eq!(st(&["mc", "--family", "ashenfelter", "--reps", "2"]).status.code(), Some(2));
    assert_eq!(st(&["simulate", "--family", "ashenfelter"]).status.code(), Some(2));
    let bad_info = st(&["bounds", "-i", p.to_str().unwrap(), "--info-periods", "0,1"]);
    assert_eq!(bad_info.status.code(), Some(1));
    assert!(String::from_utf8(bad_info.stderr).unwrap().starts_with("error[InvalidInformationSet]"));
    assert_eq!(st(&["--version"]).status.code(), Some(0));
}

#[test]
fn bad_csv_reports_error_name() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("bad.csv");
    std::fs::write(&p, "unit,period,outcome,treatment\nu,0,x,1\n").unwrap();
    let (code, _, err) = call(&["validate", "-i", p.to_str().unwrap()]);
    assert_eq!(code, 1);
    assert!(err.starts_with("error[NonNumericOutcome]"), "{err}");
}

#[test]
fn validate_accepts_every_simulated_family() {
    let dir = tempfile::tempdir().unwrap();
    for family in robust_did::dgp::DgpFamily::ALL {
        let p = simulated(dir.path(), family.name(), "400", "3");
        let v = json(&["validate", "-i", p.to_str().unwrap()]);
        assert_eq!(v["result"]["valid"], Value::Bool(true), "{family}");
    }
}

#[test]
fn envelope_and_bounds_example() {
    let dir = tempfile::tempdir().unwrap();
    let p = simulated(dir.path(), "ashenfelter", "100000", "11");
    let v = json(&["bounds", "-i", p.to_str().unwrap(), "--info-periods", "-2,-1,0"]);
    let keys: Vec<&str> = v.as_object().unwrap().keys().map(String::as_str).collect();
    assert_eq!(keys, ["schema_version", "command", "input", "seed", "result"]);
    assert_eq!(v["schema_version"], "1");
    assert!((num(&v, &["result", "bounds", "lower"]) - 1.749).abs() < 0.1);
    assert!((num(&v, &["result", "bounds", "upper"]) - 12.625).abs() < 0.1);
}

#[test]
fn json_numbers_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let p = simulated(dir.path(), "bias_variation_cosine", "3000", "4");
    let v = json(&["bounds", "-i", p.to_str().unwrap(), "--variation"]);
    let ds = robust_did::panel::PanelDataset::load_csv(&p, &Default::default()).unwrap();
    let lib = robust_did::analysis::run_bounds(
        &ds,
        &robust_did::analysis::BoundsOptions { variation: true, ..Default::default() },
    )
    .unwrap();
    assert_eq!(num(&v, &["result", "bounds", "lower"]), lib.bounds.lower);
    assert_eq!(num(&v, &["result", "bounds", "upper"]), lib.bounds.upper);
    assert_eq!(num(&v, &["result", "theta_ols"]), lib.theta_ols);
    let var = lib.variation_bounds.unwrap();
    assert_eq!(num(&v, &["result", "variation_bounds", "lower"]), var.lower);
    let per = v["result"]["bounds"]["bias"]["per_element"].as_array().unwrap();
    for (e, l) in per.iter().zip(&lib.bounds.bias.as_ref().unwrap().per_element) {
        assert_eq!(e["value"].as_f64().unwrap(), l.value);
    }
}

#[test]
fn compare_rr_flags_discordance() {
    let v = json(&["compare-rr", "--M", "1", "--sb-minus1", "1.813", "--sb0", "5.438"]);
    assert_eq!(v["result"]["smoothness"]["report"]["overlap"], Value::Bool(false));
    assert!(v["result"]["smoothness"]["report"]["warning"].is_string());
    assert_eq!(v["result"]["discordant"], Value::Bool(true));
    let (code, _, _) = call(&["compare-rr", "--M", "-1", "--sb-minus1", "0", "--sb0", "1"]);
    assert_eq!(code, 1);
    let (code, _, _) = call(&["compare-rr", "--sb-minus1", "0", "--sb0", "1"]);
    assert_eq!(code, 2);
}

/// Stand-in for an empirical application: the bounds table needs the point
/// estimate, its CI, τ^DR and the baseline-bias hull.
#[test]
fn bounds_table_columns_on_stand_in() {
    let dir = tempfile::tempdir().unwrap();
    let ds = common::dr_panel(5, 1500, 2.0);
    // add a pre-period so the bias set has two elements
    let mut obs = ds.to_observations();
    for o in ds.to_observations().into_iter().filter(|o| o.period == 0) {
        obs.push(robust_did::panel::Observation { period: -1, outcome: o.outcome * 0.9, ..o });
    }
    let ds = robust_did::panel::PanelDataset::from_observations(obs, vec!["x".into()], None).unwrap();
    let p = dir.path().join("stand_in.csv");
    ds.save_csv(&p).unwrap();
    let plot = dir.path().join("plot.csv");
    let v = json(&[
        "--seed", "3", "bounds", "-i", p.to_str().unwrap(), "--covariates", "x", "--dr", "--or", "quadratic",
        "--bootstrap", "50", "--plot-csv", plot.to_str().unwrap(),
    ]);
    let r = &v["result"];
    for key in ["theta_ols", "standard_did"] {
        assert!(r[key].is_f64(), "{key}");
    }
    for path in [
        &["bounds", "lower"][..],
        &["bounds", "upper"],
        &["bounds", "bias", "lower"],
        &["bounds", "bias", "upper"],
        &["confidence", "lower"],
        &["confidence", "upper"],
        &["tau_dr", "estimate"],
        &["dr_bounds", "lower"],
        &["dr_bounds", "upper"],
        &["dr_confidence", "lower"],
        &["bootstrap", "replicates"],
        &["bootstrap", "seed"],
        &["bootstrap", "failed"],
    ] {
        num(r, path);
    }
    let rows = std::fs::read_to_string(plot).unwrap();
    assert!(rows.starts_with("series,period,lower,upper,ci_lower,ci_upper\n"));
    assert_eq!(rows.lines().count(), 3);
}

#[test]
fn po_and_forecast_tables_on_stand_in() {
    let dir = tempfile::tempdir().unwrap();
    let p = simulated(dir.path(), "bias_variation_cosine", "2000", "8");
    let v = json(&["--seed", "1", "po", "-i", p.to_str().unwrap(), "--bootstrap", "40"]);
    let r = &v["result"];
    assert_eq!(r["non_causal"], Value::Bool(true));
    let est = r["estimates"].as_array().unwrap();
    assert_eq!(est.len(), 3);
    for e in est {
        assert!(e["estimate"].is_f64() && e["sb1_choice"].is_f64());
    }
    assert_eq!(r["confidence"].as_array().unwrap().len(), 3);
    num(r, &["robust_hull", "lower"]);

    let only = json(&["po", "-i", p.to_str().unwrap(), "--loss", "linf"]);
    assert_eq!(only["result"]["estimates"].as_array().unwrap().len(), 1);

    let f = json(&["--seed", "2", "forecast", "-i", p.to_str().unwrap(), "--degree", "2", "--bootstrap", "40"]);
    let r = &f["result"];
    assert_eq!(r["non_causal"], Value::Bool(true));
    for k in ["sb1_forecast", "theta", "estimate"] {
        assert!(r[k].is_f64(), "{k}");
    }
    assert_eq!(r["series"].as_array().unwrap().len(), 5);
    num(r, &["confidence", "lower"]);
}

#[test]
fn event_study_and_mc_run() {
    let dir = tempfile::tempdir().unwrap();
    let p = simulated(dir.path(), "staggered_mc", "3000", "2");
    let v = json(&["event-study", "-i", p.to_str().unwrap(), "--twfe"]);
    assert_eq!(v["result"]["staggered"], Value::Bool(true));
    assert_eq!(v["result"]["cells"].as_array().unwrap().len(), 9);
    let mc = json(&["--seed", "5", "mc", "--family", "staggered_mc", "-n", "500", "--reps", "4", "--estimator", "twfe"]);
    assert_eq!(mc["result"]["report"]["succeeded"], 4);
    let sc = json(&["sc-bounds", "-i", simulated(dir.path(), "ashenfelter", "40", "2").to_str().unwrap()]);
    num(&sc["result"], &["bounds", "lower"]);
}

#[test]
fn simulate_writes_truth_and_schema() {
    let dir = tempfile::tempdir().unwrap();
    let (csv, truth, schema) = (dir.path().join("d.csv"), dir.path().join("t.json"), dir.path().join("s.json"));
    let (code, _, err) = call(&[
        "simulate", "--family", "factor_structure", "-n", "200", "--seed", "4", "--param", "sigma_eps=0.2",
        "-o", csv.to_str().unwrap(), "--truth", truth.to_str().unwrap(), "--schema-out", schema.to_str().unwrap(),
    ]);
    assert_eq!(code, 0, "{err}");
    let t: Value = serde_json::from_str(&std::fs::read_to_string(&truth).unwrap()).unwrap();
    assert_eq!(t["result"]["spec"]["family"], "factor_structure");
    assert!(t["result"]["truth"]["sb"]["-2"].is_f64());
    let v = json(&["validate", "-i", csv.to_str().unwrap(), "--schema", schema.to_str().unwrap()]);
    assert_eq!(v["result"]["valid"], Value::Bool(true));
}
