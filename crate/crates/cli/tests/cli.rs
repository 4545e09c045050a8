use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_dynup"));
    cmd.env_remove("DYNUP_OUT_DIR")
        .env_remove("DYNUP_JOBS")
        .env_remove("DYNUP_ABORT_BEFORE_RENAME");
    cmd
}

fn config(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name)
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn files(dir: &Path) -> Vec<String> {
    let mut names: Vec<String> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    names.sort();
    names
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn simulate_writes_one_trace_per_seed() {
    let out = tempfile::tempdir().unwrap();
    let inst = config("scarcity.toml");
    let o = run(&[
        "simulate",
        "--instance",
        inst.to_str().unwrap(),
        "--policy",
        "dynup2",
        "--reps",
        "10",
        "--seed",
        "7",
        "--out",
        out.path().to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let names = files(out.path());
    assert_eq!(names.iter().filter(|n| n.ends_with(".csv")).count(), 10);
    assert_eq!(names.iter().filter(|n| n.ends_with(".json")).count(), 10);
    let csv = fs::read_to_string(out.path().join(&names[0])).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("# dynup-trace v1"));
    assert_eq!(lines.next(), Some(dynup::sim::TRACE_CSV_HEADER));
    assert_eq!(lines.count(), 100);
}

#[test]
fn missing_instance_exits_with_config_error() {
    let out = tempfile::tempdir().unwrap();
    let o = run(&[
        "simulate",
        "--instance",
        "/nonexistent/instance.toml",
        "--out",
        out.path().to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("cannot read instance"));
}

#[test]
fn bad_arguments_exit_with_config_error() {
    let inst = config("scarcity.toml");
    let out = tempfile::tempdir().unwrap();
    let o = run(&["simulate", "--instance", inst.to_str().unwrap(), "--policy", "static:1.5"]);
    assert_eq!(o.status.code(), Some(2));
    let o = run(&[
        "--jobs",
        "0",
        "simulate",
        "--instance",
        inst.to_str().unwrap(),
        "--out",
        out.path().to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(2));
    let o = run(&[
        "regret",
        "--instance",
        inst.to_str().unwrap(),
        "--horizons",
        "100,200,400",
        "--reps",
        "10",
        "--out",
        out.path().to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn reruns_are_byte_identical() {
    let inst = config("scarcity.toml");
    let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
    for (j, d) in dirs.iter().enumerate() {
        let jobs = if j == 0 { "1" } else { "2" };
        let o = run(&[
            "--jobs",
            jobs,
            "simulate",
            "--instance",
            inst.to_str().unwrap(),
            "--reps",
            "5",
            "--seed",
            "11",
            "--out",
            d.path().to_str().unwrap(),
        ]);
        assert!(o.status.success());
        let o = run(&[
            "--jobs",
            jobs,
            "regret",
            "--instance",
            inst.to_str().unwrap(),
            "--reps",
            "50",
            "--horizons",
            "50,100,200,400",
            "--plot-data",
            "--out",
            d.path().to_str().unwrap(),
        ]);
        assert!(o.status.success());
    }
    let (a, b) = (files(dirs[0].path()), files(dirs[1].path()));
    assert_eq!(a, b);
    for name in &a {
        let x = fs::read(dirs[0].path().join(name)).unwrap();
        let y = fs::read(dirs[1].path().join(name)).unwrap();
        assert_eq!(x, y, "{name} differs between runs");
    }
}

#[test]
fn output_dir_defaults_from_environment() {
    let out = tempfile::tempdir().unwrap();
    let o = bin()
        .args(["oracle-check"])
        .env("DYNUP_OUT_DIR", out.path())
        .output()
        .unwrap();
    assert!(o.status.success());
    assert!(out.path().join("oracle_check.json").exists());
}

#[test]
fn interrupted_run_leaves_no_final_report() {
    let out = tempfile::tempdir().unwrap();
    let inst = config("scarcity.toml");
    let o = bin()
        .args([
            "regret",
            "--instance",
            inst.to_str().unwrap(),
            "--reps",
            "20",
            "--horizons",
            "50,100,200,400",
            "--out",
            out.path().to_str().unwrap(),
        ])
        .env("DYNUP_ABORT_BEFORE_RENAME", "1")
        .output()
        .unwrap();
    assert!(!o.status.success());
    let names = files(out.path());
    assert!(
        names.iter().all(|n| n.starts_with('.') && n.ends_with(".tmp")),
        "final files present after abort: {names:?}"
    );
}

#[test]
fn static_negative_control_runs() {
    let out = tempfile::tempdir().unwrap();
    let inst = config("scarcity.toml");
    let o = run(&[
        "regret",
        "--instance",
        inst.to_str().unwrap(),
        "--policy",
        "static:0.3",
        "--reps",
        "200",
        "--horizons",
        "100,200,400,800",
        "--out",
        out.path().to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let report = read_json(&out.path().join("regret_static_0.3.json"));
    assert_eq!(report["policy"], "static:0.3");
    assert_eq!(report["entries"].as_array().unwrap().len(), 4);
    // A fixed price loses a constant share of revenue per period.
    assert!(report["per_period_ratio"].as_f64().unwrap() > 0.7);
    let csv = fs::read_to_string(out.path().join("regret_static_0.3.csv")).unwrap();
    assert!(csv.starts_with("# dynup-report v1\nexperiment,T,metric,value\n"));
}

#[test]
fn oracle_check_default_instance_passes() {
    let out = tempfile::tempdir().unwrap();
    let o = run(&["oracle-check", "--dp-table", "--out", out.path().to_str().unwrap()]);
    assert!(o.status.success());
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert_eq!(stdout.matches("PASS").count(), 2, "{stdout}");
    let r = read_json(&out.path().join("oracle_check.json"));
    let bound = r["hindsight_bound"].as_f64().unwrap();
    let opt = r["dp_optimal_value"].as_f64().unwrap();
    let pol = r["dynup2_value"].as_f64().unwrap();
    assert!(bound >= opt && opt >= pol);
    let table = fs::read_to_string(out.path().join("dp_table.csv")).unwrap();
    assert!(table.starts_with("# dynup-dp-table v1\nt,c1,c2,value,basic_action,premium_action\n"));
}

#[test]
fn oracle_check_warns_on_degenerate_premium_branch() {
    let out = tempfile::tempdir().unwrap();
    let inst = config("degenerate.toml");
    let o = run(&[
        "oracle-check",
        "--instance",
        inst.to_str().unwrap(),
        "--out",
        out.path().to_str().unwrap(),
    ]);
    assert!(o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("warning: c_2 = 3"));
    let r = read_json(&out.path().join("oracle_check.json"));
    assert_eq!(r["warnings"].as_array().unwrap().len(), 1);
}

#[test]
fn oracle_grid_refinement_stays_within_slack() {
    let value = |step: &str| {
        let out = tempfile::tempdir().unwrap();
        let o = run(&["oracle-check", "--grid-step", step, "--out", out.path().to_str().unwrap()]);
        assert!(o.status.success());
        read_json(&out.path().join("oracle_check.json"))
    };
    let coarse = value("0.01");
    let fine = value("0.001");
    let (vc, vf) = (
        coarse["dp_optimal_value"].as_f64().unwrap(),
        fine["dp_optimal_value"].as_f64().unwrap(),
    );
    let slack = coarse["grid_slack"].as_f64().unwrap();
    // The coarse grid is not a subset of the fine one, so compare both ways.
    assert!((vf - vc).abs() <= slack, "coarse {vc}, fine {vf}, slack {slack}");
}

#[test]
fn diagnostics_skip_inapplicable_parts_by_default() {
    let out = tempfile::tempdir().unwrap();
    // Capacity exceeds expected demand, so the depletion-time diagnostic
    // does not apply.
    let inst = out.path().join("abundant.toml");
    let text = fs::read_to_string(config("small.toml")).unwrap().replace("c = [6, 8]", "c = [10, 10]");
    fs::write(&inst, text).unwrap();
    let o = run(&[
        "diagnostics",
        "--instance",
        inst.to_str().unwrap(),
        "--reps",
        "50",
        "--out",
        out.path().to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let r = read_json(&out.path().join("diagnostics.json"));
    assert_eq!(r["martingale"].as_array().unwrap().len(), 3);
    assert!(r["stopping_time"].is_null());
    assert_eq!(r["skipped"].as_array().unwrap().len(), 1);

    // Asked for explicitly, the same diagnostic is an error.
    let o = run(&[
        "diagnostics",
        "--instance",
        inst.to_str().unwrap(),
        "--stopping-time",
        "--out",
        out.path().to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn calibrate_reads_sample_file() {
    let dir = tempfile::tempdir().unwrap();
    let curve = dynup::domain::AcceptanceCurve::exponential_power(2.33, 1.0).unwrap();
    let samples = dynup::experiments::calibration::synthetic_samples(&curve, 20_000, 5);
    let mut text = String::from("x,accepted\n");
    for (x, a) in &samples {
        text.push_str(&format!("{x},{}\n", u8::from(*a)));
    }
    let path = dir.path().join("samples.csv");
    fs::write(&path, text).unwrap();
    let o = run(&[
        "calibrate",
        "--samples",
        path.to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let r = read_json(&dir.path().join("calibration.json"));
    let a = r["fit"]["a"].as_f64().unwrap();
    let b = r["fit"]["b"].as_f64().unwrap();
    assert!((a - 2.33).abs() / 2.33 < 0.1 && (b - 1.0).abs() < 0.1, "a={a} b={b}");

    fs::write(&path, "x,accepted\n0.1,maybe\n").unwrap();
    let o = run(&["calibrate", "--samples", path.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn hotel_study_accepts_partial_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("hotel.toml");
    fs::write(
        &cfg,
        "permutations = 5\nhigh_demand_threshold = 50\n\n[[days]]\nday = 1\nrequests = [40, 20, 4]\n\n[[days]]\nday = 2\nrequests = [10, 5, 1]\n",
    )
    .unwrap();
    let o = run(&[
        "hotel-study",
        "--config",
        cfg.to_str().unwrap(),
        "--plot-data",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let r = read_json(&dir.path().join("hotel.json"));
    let days = r["days"].as_array().unwrap();
    assert_eq!(days.len(), 2);
    assert_eq!(days[0]["high_demand"], true);
    assert_eq!(days[1]["high_demand"], false);
    assert!(dir.path().join("hotel.dat").exists());
}
