use std::collections::HashMap;
use std::path::PathBuf;
use std::process::{Command, Output};

fn config(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(format!("{name}.json"))
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_levydam")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

fn key_values(text: &str) -> HashMap<String, f64> {
    let mut rdr = csv::Reader::from_reader(text.as_bytes());
    rdr.records()
        .map(|r| {
            let r = r.unwrap();
            (r[0].to_string(), r[1].parse::<f64>().unwrap())
        })
        .collect()
}

fn with_edit(name: &str, edit: impl FnOnce(&mut serde_json::Value)) -> tempfile::NamedTempFile {
    let mut v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(config(name)).unwrap()).unwrap();
    edit(&mut v);
    let file = tempfile::NamedTempFile::new().unwrap();
    std::fs::write(file.path(), v.to_string()).unwrap();
    file
}

#[test]
fn evaluate_reports_costs_as_csv() {
    let cfg = config("brownian_ref");
    let o = run(&["evaluate", "--config", cfg.to_str().unwrap(), "--csv"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    assert!(text.starts_with("quantity,value\n"));
    let kv = key_values(&text);
    for key in ["cycle_cost", "total_discounted_cost", "mean_cycle", "longrun_average_cost"] {
        assert!(kv[key].is_finite(), "{key}");
    }
}

#[test]
fn csv_values_round_trip_exactly() {
    let cfg = config("cp_ref");
    let o = run(&["evaluate", "--config", cfg.to_str().unwrap(), "--csv"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    let kv = key_values(&text);
    for line in text.lines().skip(1) {
        let (k, v) = line.split_once(',').unwrap();
        assert_eq!(kv[k].to_string(), v);
    }
}

#[test]
fn text_and_csv_carry_the_same_numbers() {
    let cfg = config("brownian_free_ref");
    let csv = stdout(&run(&["exit", "--config", cfg.to_str().unwrap(), "--csv"]));
    let text = stdout(&run(&["exit", "--config", cfg.to_str().unwrap()]));
    for (k, v) in key_values(&csv) {
        let row = text.lines().find(|l| l.split_whitespace().next() == Some(k.as_str())).unwrap();
        assert_eq!(row.split_whitespace().nth(1).unwrap().parse::<f64>().unwrap(), v);
    }
}

#[test]
fn tau_not_below_lambda_is_a_config_error() {
    let bad = with_edit("brownian_ref", |v| v["policy"]["tau"] = serde_json::json!(1.5));
    let o = run(&["evaluate", "--config", bad.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("tau < lambda"), "{}", stderr(&o));
}

#[test]
fn unknown_keys_are_rejected() {
    let bad = with_edit("cp_ref", |v| v["cost"]["k3"] = serde_json::json!(1.0));
    let o = run(&["evaluate", "--config", bad.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("k3"), "{}", stderr(&o));
}

#[test]
fn missing_config_and_bad_flags_exit_one() {
    assert_eq!(run(&["evaluate", "--config", "/nonexistent/run.json"]).status.code(), Some(1));
    assert_eq!(run(&["evaluate"]).status.code(), Some(1));
    assert_eq!(run(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(run(&["--help"]).status.code(), Some(0));
}

#[test]
fn optimize_needs_a_search_block() {
    let bad = with_edit("cp_ref", |v| {
        v.as_object_mut().unwrap().remove("search");
    });
    let o = run(&["optimize", "--config", bad.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn optimize_writes_its_surface() {
    let cfg = config("brownian_ref");
    let surface = tempfile::NamedTempFile::new().unwrap();
    let o = run(&["optimize", "--config", cfg.to_str().unwrap(), "--csv", "--surface", surface.path().to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let kv = key_values(&stdout(&o));
    assert!(kv["tau"] < kv["lambda"]);
    let trace = std::fs::read_to_string(surface.path()).unwrap();
    assert!(trace.starts_with("lambda,tau,cost,stage\n"));
    assert_eq!(trace.lines().count() - 1, kv["evaluations"] as usize);
    assert!(trace.lines().filter(|l| l.ends_with(",grid")).count() >= 36);
}

#[test]
fn scale_table_has_a_fixed_header() {
    let cfg = config("cp_ref");
    let o = run(&["scale-table", "--config", cfg.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    assert!(text.starts_with("x,W,Wbar,Wprime,Z\n"));
    assert!(text.lines().count() > 100);
}

#[test]
fn simulation_is_reproducible_across_threads_and_runs() {
    let cfg = config("cp_ref");
    let args = |t: &'static str| vec!["simulate", "--config", cfg.to_str().unwrap(), "--csv", "--paths", "5000", "--threads", t];
    let a = run(&args("1"));
    let b = run(&args("4"));
    let c = run(&args("4"));
    assert!(a.status.success(), "{}", stderr(&a));
    assert_eq!(a.stdout, b.stdout);
    assert_eq!(b.stdout, c.stdout);
    let other_seed = run(&["simulate", "--config", cfg.to_str().unwrap(), "--csv", "--paths", "5000", "--seed", "7"]);
    assert_ne!(a.stdout, other_seed.stdout);
}

#[test]
fn validation_passes_on_a_clean_build() {
    let cfg = config("cp_ref");
    let o = run(&["validate", "--config", cfg.to_str().unwrap(), "--paths", "40000", "--skip-discounted"]);
    assert_eq!(o.status.code(), Some(0), "{}{}", stdout(&o), stderr(&o));
}

#[test]
fn validation_catches_a_corrupted_scale_function() {
    let cfg = config("brownian_ref");
    let o = run(&[
        "validate",
        "--config",
        cfg.to_str().unwrap(),
        "--paths",
        "20000",
        "--skip-discounted",
        "--perturb-scale",
        "0.2",
    ]);
    assert_eq!(o.status.code(), Some(3), "{}", stdout(&o));
    assert!(stdout(&o).contains("FAIL"));
}

#[test]
fn inconsistent_overshoot_kernel_is_a_numerical_error() {
    let cfg = config("cp_ref");
    let o = run(&["evaluate", "--config", cfg.to_str().unwrap(), "--perturb-scale", "0.2"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("overshoot"), "{}", stderr(&o));
}
