use std::process::{Command, Output};

use serde_json::Value;

const CANONICAL: [&str; 6] = ["--lambda", "1", "--rho", "1", "--eta", "0"];

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mginf"))
        .args(args)
        .env_remove("MGINF_SEED")
        .output()
        .expect("binary runs")
}

fn with(base: &[&str], extra: &[&str]) -> Vec<String> {
    base.iter().chain(extra).map(|s| s.to_string()).collect()
}

fn run_owned(args: &[String]) -> Output {
    run(&args.iter().map(String::as_str).collect::<Vec<_>>())
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

/// Value in `column` of the CSV row whose first field is `key`.
fn csv_lookup(text: &str, key: &str, column: usize) -> f64 {
    text.lines()
        .map(|l| l.split(',').collect::<Vec<_>>())
        .find(|f| f[0] == key)
        .unwrap_or_else(|| panic!("no row {key} in\n{text}"))[column]
        .parse()
        .unwrap()
}

#[test]
fn eval_busy_period_at_one() {
    let o = run_owned(&with(&["eval"], &[&CANONICAL[..], &["--target", "B", "--t-max", "2", "--steps", "3"]].concat()));
    assert!(o.status.success());
    let b1 = csv_lookup(&stdout(&o), "1.0", 1);
    assert!((b1 - 0.562_445_752_488_236).abs() < 1e-12, "{b1}");
}

#[test]
fn eval_renewal_starts_at_one() {
    let o = run_owned(&with(&["eval"], &[&CANONICAL[..], &["--target", "R", "--steps", "11"]].concat()));
    assert!(o.status.success());
    assert_eq!(csv_lookup(&stdout(&o), "0.0", 1), 1.0);
}

#[test]
fn eval_bounds_at_ln2() {
    let o = run(&[
        "eval", "--lambda", "1", "--rho", "0.6931471805599453", "--eta", "0", "--target", "bounds",
        "--t-max", "1", "--steps", "2",
    ]);
    assert!(o.status.success());
    let lower = csv_lookup(&stdout(&o), "1.0", 2);
    assert!((lower - (1.0 - 2.0 * (-1.0f64).exp())).abs() < 1e-6, "{lower}");
}

#[test]
fn eval_both_reports_sup_difference() {
    let o = run_owned(&with(&["eval"], &[&CANONICAL[..], &["--target", "B", "--method", "both"]].concat()));
    assert!(o.status.success());
    let text = stdout(&o);
    assert!(text.starts_with("t,closed,general\n"));
    let sup = csv_lookup(&text, "sup_abs_diff", 1);
    assert!(sup > 0.0 && sup < 1e-3, "{sup}");
}

#[test]
fn closed_method_needs_constant_beta() {
    let dir = tempfile::tempdir().unwrap();
    let table = dir.path().join("beta.csv");
    std::fs::write(&table, "t,beta\n0,0.1\n2,-0.3\n5,0.2\n").unwrap();
    let t = table.to_str().unwrap();
    let base = ["--lambda", "1", "--rho", "1", "--beta-table", t, "--target", "B"];
    let o = run_owned(&with(&["eval"], &[&base[..], &["--method", "closed"]].concat()));
    assert_eq!(o.status.code(), Some(2));
    let o = run_owned(&with(&["eval"], &[&base[..], &["--steps", "3"]].concat()));
    assert!(o.status.success());
}

#[test]
fn moments_examples() {
    let o = run_owned(&with(&["moments"], &[&CANONICAL[..], &["--which", "B", "--n-max", "1"]].concat()));
    assert!((csv_lookup(&stdout(&o), "1", 1) - 1.718_281_828_459_045).abs() < 1e-8);
    let o = run_owned(&with(&["moments"], &[&CANONICAL[..], &["--which", "Z", "--n-max", "1"]].concat()));
    assert!((csv_lookup(&stdout(&o), "1", 1) - std::f64::consts::E).abs() < 1e-8);
    let o = run(&["moments", "--lambda", "2", "--rho", "0.8", "--eta", "-0.5", "--n-max", "1"]);
    assert!((csv_lookup(&stdout(&o), "1", 1) - 0.4).abs() < 1e-8);
}

#[test]
fn series_moments_refuse_large_rho() {
    let o = run_owned(&with(&["moments"], &[&CANONICAL[..], &["--method", "series"]].concat()));
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("ln 2"));
}

#[test]
fn conflicting_parameters_are_usage_errors() {
    let o = run(&["eval", "--lambda", "1", "--rho", "1", "--eta", "0", "--p", "0.3", "--target", "B"]);
    assert_eq!(o.status.code(), Some(2));
    let o = run(&["eval", "--lambda", "1", "--rho", "1", "--target", "B"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn csv_and_json_carry_identical_values() {
    let csv = stdout(&run_owned(&with(&["peaks"], &CANONICAL)));
    let json = run_owned(&with(&["peaks"], &[&CANONICAL[..], &["--format", "json"]].concat()));
    let json: Value = serde_json::from_slice(&json.stdout).unwrap();
    for row in json["rows"].as_array().unwrap() {
        let name = row[0].as_str().unwrap();
        if let Some(v) = row[1].as_f64() {
            assert_eq!(csv_lookup(&csv, name, 1), v, "{name}");
        }
    }
}

#[test]
fn simulate_is_deterministic_and_accurate() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    let first = run_owned(&with(&["simulate"], &[&CANONICAL[..], &["--out", a.to_str().unwrap()]].concat()));
    let second = run_owned(&with(&["simulate"], &[&CANONICAL[..], &["--out", b.to_str().unwrap()]].concat()));
    assert!(first.status.success());
    assert_eq!(first.stdout, second.stdout);
    for f in ["busy_periods.txt", "busy_cycles.txt", "renewal_counts.csv", "summary.json"] {
        assert_eq!(std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap(), "{f}");
    }
    let s: Value = serde_json::from_slice(&first.stdout).unwrap();
    assert_eq!(s["seed"], 42);
    let mean = s["empirical_mean_B"].as_f64().unwrap();
    let se = s["se_mean_B"].as_f64().unwrap();
    assert!((mean - (std::f64::consts::E - 1.0)).abs() < 3.0 * se);
    assert!(s["ks_B"].as_f64().unwrap() < s["dkw_bound_99"].as_f64().unwrap());
}

#[test]
fn simulate_degenerate_law_has_only_zero_busy_periods() {
    let o = run(&["simulate", "--lambda", "1", "--rho", "1", "--eta", "-1", "--n-cycles", "2000"]);
    let s: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(s["atom_fraction_B"].as_f64(), Some(1.0));
}

#[test]
fn seed_comes_from_environment() {
    let o = Command::new(env!("CARGO_BIN_EXE_mginf"))
        .args(["simulate", "--lambda", "1", "--rho", "1", "--eta", "0", "--n-cycles", "100"])
        .env("MGINF_SEED", "7")
        .output()
        .unwrap();
    let s: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(s["seed"], 7);
}

#[test]
fn validate_refuses_out_of_band() {
    let o = run(&["validate", "--lambda", "1", "--rho", "1", "--eta", "3"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn validate_writes_report_and_sets_exit_status() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("report.json");
    let o = run_owned(&with(
        &["validate"],
        &[&CANONICAL[..], &["--budget", "full", "--format", "json", "--out", path.to_str().unwrap()]].concat(),
    ));
    let report: Value = serde_json::from_slice(&std::fs::read(&path).unwrap()).unwrap();
    let checks = report["checks"].as_array().unwrap();
    let failed: Vec<&str> = checks
        .iter()
        .filter(|c| c["pass"] == false)
        .map(|c| c["name"].as_str().unwrap())
        .collect();
    // the printed lower bounds do not hold for interior drifts
    assert_eq!(failed, ["bounds.busy_cycle_lower", "bounds.busy_period_lower"]);
    assert_eq!(o.status.code(), Some(3));
    assert_eq!(report["pass"], false);
    assert_eq!(report["seed_echo"], 42);
    assert!(checks.iter().any(|c| c["kind"] == "monte-carlo"));
    let names: Vec<&str> = checks.iter().map(|c| c["name"].as_str().unwrap()).collect();
    assert!(names.windows(2).all(|w| w[0] <= w[1]));
    let flags = report["paper_flags"].as_array().unwrap();
    assert!(flags
        .iter()
        .any(|f| f["equation"].as_str().unwrap().starts_with("renewal") && f["printed_value"] != f["computed_value"]));
}

#[test]
fn validate_passes_at_upper_band() {
    let eta = format!("{:?}", 1.0 / 1f64.exp_m1());
    let o = run(&["validate", "--lambda", "1", "--rho", "1", "--eta", &eta]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn sweep_emits_long_format() {
    let o = run(&["sweep", "--lambda", "1,2", "--rho", "0.5", "--eta", "-0.5,0", "--target", "B", "--steps", "3"]);
    assert!(o.status.success());
    let text = stdout(&o);
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("lambda,rho,p,beta,eta,quantity,method,t,value"));
    assert_eq!(lines.count(), 2 * 2 * 3);
    let again = run(&["sweep", "--lambda", "1,2", "--rho", "0.5", "--eta", "-0.5,0", "--target", "B", "--steps", "3"]);
    assert_eq!(o.stdout, again.stdout);
}
