use std::fs;
use std::path::{Path, PathBuf};

use super::cli_main;

struct Output {
    code: u8,
    stdout: String,
    stderr: String,
}

fn mrbot(args: &[&str]) -> Output {
    let (mut out, mut err) = (Vec::new(), Vec::new());
    let code = cli_main(std::iter::once("mrbot").chain(args.iter().copied()), &mut out, &mut err);
    Output {
        code,
        stdout: String::from_utf8(out).unwrap(),
        stderr: String::from_utf8(err).unwrap(),
    }
}

fn scenario(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios").join(name)
}

fn write_config(dir: &Path, extra: &str) -> PathBuf {
    fs::write(dir.join("line.csv"), "t,x,y,z\n0,0,0,0\n0.5,0.025,0,0\n1,0.05,0,0\n").unwrap();
    let cfg = dir.join("case.cfg");
    fs::write(&cfg, format!("waypoints: line.csv\nduration_s: 2\ncontroller_mode: dimensional\n{extra}")).unwrap();
    cfg
}

fn stderr(o: &Output) -> &str {
    &o.stderr
}

#[test]
fn help_and_version_exit_zero() {
    assert_eq!(mrbot(&["--help"]).code, 0);
    assert_eq!(mrbot(&["--version"]).code, 0);
    assert_eq!(mrbot(&["run", "--help"]).code, 0);
}

#[test]
fn usage_errors_exit_one() {
    assert_eq!(mrbot(&[]).code, 1);
    assert_eq!(mrbot(&["frobnicate"]).code, 1);
    assert_eq!(mrbot(&["bench", "x.cfg", "--n", "many"]).code, 1);
    assert_eq!(mrbot(&["plot"]).code, 1);
}

#[test]
fn seedless_is_a_bare_flag() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "");
    let out = dir.path().join("out");
    let ok = mrbot(&["--seedless", "run", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(ok.code, 0, "{}", stderr(&ok));
    let bad = mrbot(&["--seedless=1", "run", cfg.to_str().unwrap()]);
    assert_eq!(bad.code, 1);
}

#[test]
fn config_errors_exit_one_with_line() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "kp: 2\nbogus_key: 1\n");
    let o = mrbot(&["run", cfg.to_str().unwrap(), "--out", dir.path().join("o").to_str().unwrap()]);
    assert_eq!(o.code, 1);
    assert!(stderr(&o).contains("line 5"), "{}", stderr(&o));

    let cfg = write_config(dir.path(), "dt_ms: 300\ntp_ms: 200\n");
    assert_eq!(mrbot(&["run", cfg.to_str().unwrap()]).code, 1);

    let missing = dir.path().join("absent.cfg");
    let o = mrbot(&["run", missing.to_str().unwrap()]);
    assert_eq!(o.code, 1);
    assert!(stderr(&o).contains("absent.cfg"));
}

#[test]
fn run_writes_all_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "compare_tp_ms: 200\n");
    let out = dir.path().join("out");
    let o = mrbot(&["run", cfg.to_str().unwrap(), "--out", out.to_str().unwrap(), "--strict"]);
    assert_eq!(o.code, 0, "{}", stderr(&o));
    for f in [
        "case_tp100.csv",
        "case_tp200.csv",
        "case_tp100_safety.txt",
        "case_tp100_safety.csv",
        "case_tp200_safety.txt",
        "case.svg",
        "case.log",
    ] {
        assert!(out.join(f).is_file(), "missing {f}");
    }
    let csv = fs::read_to_string(out.join("case_tp100.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 2000);
    assert!(csv.starts_with(mrbot::telemetry::TELEMETRY_HEADER));
    let report = fs::read_to_string(out.join("case_tp100_safety.txt")).unwrap();
    assert!(report.ends_with("overall: pass\n"));
    let log = fs::read_to_string(out.join("case.log")).unwrap();
    assert!(log.contains("kp: 2") && log.contains("tp_ms: 100") && log.contains("controller_mode: dimensional"));
    let svg = fs::read_to_string(out.join("case.svg")).unwrap();
    assert!(svg.contains("Tp = 100 ms") && svg.contains("Tp = 200 ms"));
}

#[test]
fn safety_violation_is_exit_two_only_when_strict() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "rise_time_ms: 0.0001\n");
    let out = dir.path().join("out");
    let o = mrbot(&["run", cfg.to_str().unwrap(), "--out", out.to_str().unwrap(), "--strict"]);
    assert_eq!(o.code, 2, "{}", stderr(&o));
    let report = fs::read_to_string(out.join("case_tp100_safety.txt")).unwrap();
    assert!(report.ends_with("overall: fail\n"));
    let rows = fs::read_to_string(out.join("case_tp100_safety.csv")).unwrap();
    assert!(rows.lines().any(|l| l.starts_with("dbdt_violation,")));
    let lenient = mrbot(&["run", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(lenient.code, 0);

    // A recorded trace re-checked at a short rise time.
    let trace = out.join("case_tp100.csv");
    let strict = mrbot(&["safety", trace.to_str().unwrap(), "--strict", "--rise-time-ms", "0.001"]);
    assert_eq!(strict.code, 2);
    let relaxed = mrbot(&["safety", trace.to_str().unwrap(), "--strict"]);
    assert_eq!(relaxed.code, 0);
    let bad = mrbot(&["safety", trace.to_str().unwrap(), "--rise-time-ms", "0"]);
    assert_eq!(bad.code, 1);
}

#[test]
fn divergence_exits_three_with_partial_telemetry() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "material_density_kg_per_m3: 1e-300\n");
    let out = dir.path().join("out");
    let o = mrbot(&["run", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(o.code, 3, "{}", stderr(&o));
    assert!(stderr(&o).contains("diverge"));
    assert!(out.join("case_tp100.csv").is_file());
}

#[test]
fn bench_prints_timing_line() {
    let o = mrbot(&["bench", scenario("straight.cfg").to_str().unwrap(), "--n", "3"]);
    assert_eq!(o.code, 0, "{}", stderr(&o));
    let text = o.stdout.clone();
    let line = text.lines().find(|l| l.starts_with("min/mean/max ms: ")).unwrap();
    let parts: Vec<f64> = line["min/mean/max ms: ".len()..].split('/').map(|v| v.parse().unwrap()).collect();
    assert_eq!(parts.len(), 3);
    assert!(parts[0] <= parts[1] && parts[1] <= parts[2]);
    assert!(text.contains("identical_outputs: true"));
    assert_eq!(mrbot(&["bench", scenario("straight.cfg").to_str().unwrap(), "--n", "0"]).code, 1);
}

#[test]
fn plot_rerenders_csvs_with_stem_labels() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "compare_tp_ms: 200\n");
    let out = dir.path().join("out");
    assert_eq!(mrbot(&["run", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]).code, 0);
    let svg = dir.path().join("again.svg");
    let a = out.join("case_tp100.csv");
    let b = out.join("case_tp200.csv");
    let o = mrbot(&["plot", a.to_str().unwrap(), b.to_str().unwrap(), "--out", svg.to_str().unwrap()]);
    assert_eq!(o.code, 0, "{}", stderr(&o));
    let text = fs::read_to_string(&svg).unwrap();
    assert!(text.contains(">case_tp100<") && text.contains(">case_tp200<"));
    assert!(text.contains("#1f77b4") && text.contains("#d62728"));

    let foreign = dir.path().join("foreign.csv");
    fs::write(&foreign, "a,b\n1,2\n").unwrap();
    assert_eq!(mrbot(&["plot", foreign.to_str().unwrap()]).code, 1);
}

#[test]
fn shipped_scenarios_parse() {
    for name in ["steady.cfg", "normal.cfg", "fast.cfg", "straight.cfg"] {
        let cfg = mrbot::parse_config(&scenario(name)).unwrap();
        assert_eq!(cfg.controller.mode, mrbot::ControllerMode::Dimensional, "{name}");
    }
}
