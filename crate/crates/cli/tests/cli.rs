use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/fixtures").join(name)
}

fn microgrid(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_microgrid"))
        .args(args)
        .output()
        .unwrap()
}

fn text(bytes: &[u8]) -> String {
    String::from_utf8_lossy(bytes).into_owned()
}

const HEADER: &str =
    "hour,pv_kw,load_kw,ev_connected,ev_power_kw,tariff,fit,forecast_pv_kw,forecast_load_kw\n";

fn write_scenario(dir: &Path, rows: &[String]) -> PathBuf {
    let path = dir.join("scenario.csv");
    std::fs::write(&path, format!("{HEADER}{}", rows.join(""))).unwrap();
    path
}

fn day(hours: usize) -> Vec<String> {
    (0..hours)
        .map(|h| format!("{h},0,1,0,0,0.1,0.1,0,1\n"))
        .collect()
}

#[test]
fn simulate_writes_trace_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let scenario = fixture("ev_all_day.csv");
    let config = fixture("ev_all_day.conf");
    let o = microgrid(&[
        "simulate",
        "--scenario",
        scenario.to_str().unwrap(),
        "--config",
        config.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", text(&o.stderr));
    let stdout = text(&o.stdout);
    assert!(stdout.contains("total bill:"));
    assert!(stdout.contains("baseline bill:"));
    assert!(stdout.contains("M6: 2"));
    let trace = std::fs::read_to_string(out.join("trace.csv")).unwrap();
    assert_eq!(trace.lines().count(), 25);
    assert!(trace.starts_with("t,case,mode,"));
    let summary = std::fs::read_to_string(out.join("summary.txt")).unwrap();
    assert!(summary.contains("steps = 24"));
    assert!(summary.contains("mode_count.M2 = 2"));
}

#[test]
fn report_selects_the_files() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = fixture("measured_day.csv");
    for (report, trace, summary) in [("trace", true, false), ("summary", false, true)] {
        let out = dir.path().join(report);
        let o = microgrid(&[
            "simulate",
            "--scenario",
            scenario.to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
            "--report",
            report,
        ]);
        assert_eq!(o.status.code(), Some(0));
        assert_eq!(out.join("trace.csv").exists(), trace);
        assert_eq!(out.join("summary.txt").exists(), summary);
    }
}

#[test]
fn malformed_scenario_exits_1_with_location() {
    let dir = tempfile::tempdir().unwrap();
    let mut rows = day(24);
    rows[2] = "2,0,1,0,0,abc,0.1,0,1\n".into();
    let path = write_scenario(dir.path(), &rows);
    let o = microgrid(&[
        "simulate",
        "--scenario",
        path.to_str().unwrap(),
        "--out",
        dir.path().join("out").to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(1));
    let err = text(&o.stderr);
    assert!(err.contains("scenario.csv: line 4, column tariff"), "{err}");
    assert!(!dir.path().join("out").exists());
}

#[test]
fn unwritable_output_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let blocker = dir.path().join("file");
    std::fs::write(&blocker, "").unwrap();
    let scenario = fixture("measured_day.csv");
    let o = microgrid(&[
        "simulate",
        "--scenario",
        scenario.to_str().unwrap(),
        "--out",
        blocker.join("out").to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(2), "{}", text(&o.stderr));
}

#[test]
fn missing_scenario_file_exits_2() {
    let o = microgrid(&["simulate", "--scenario", "/nonexistent/s.csv", "--out", "/tmp/x"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn bad_config_exits_1() {
    let dir = tempfile::tempdir().unwrap();
    let conf = dir.path().join("bad.conf");
    std::fs::write(&conf, "battery.capacity_kwh = 10\nbattery.colour = red\n").unwrap();
    let scenario = fixture("measured_day.csv");
    let o = microgrid(&[
        "simulate",
        "--scenario",
        scenario.to_str().unwrap(),
        "--config",
        conf.to_str().unwrap(),
        "--out",
        dir.path().join("out").to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(1));
    let err = text(&o.stderr);
    assert!(err.contains("bad.conf: line 2"), "{err}");
}

#[test]
fn validate_accepts_every_fixture() {
    for name in ["ev_all_day", "ev_away", "battery_full", "bad_weather", "measured_day"] {
        let path = fixture(&format!("{name}.csv"));
        let o = microgrid(&["validate", path.to_str().unwrap()]);
        assert_eq!(o.status.code(), Some(0), "{name}");
        assert_eq!(text(&o.stdout), "OK\n");
    }
}

#[test]
fn validate_lists_every_violation() {
    let dir = tempfile::tempdir().unwrap();
    let mut rows = day(24);
    rows[2] = "2,0,1,0,0,-0.2,0.1,0,1\n".into();
    rows[5] = "5,-3,1,0,0,0.1,0.1,0,1\n".into();
    let path = write_scenario(dir.path(), &rows);
    let o = microgrid(&["validate", "--scenario", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    let err = text(&o.stderr);
    assert!(err.contains("line 4, column tariff: negative price -0.2"), "{err}");
    assert!(err.contains("line 7, column pv_kw"), "{err}");
}

#[test]
fn validate_reports_a_missing_hour() {
    let dir = tempfile::tempdir().unwrap();
    let mut rows = day(24);
    rows.remove(10);
    let path = write_scenario(dir.path(), &rows);
    let o = microgrid(&["validate", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(text(&o.stderr).contains("horizon"), "{}", text(&o.stderr));
}

fn controller(args: &[&str]) -> (Option<i32>, String, String, tempfile::TempDir) {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap().to_owned();
    let mut all = vec!["controller-check", "--out", &out];
    all.extend_from_slice(args);
    let o = microgrid(&all);
    (o.status.code(), text(&o.stdout), text(&o.stderr), dir)
}

fn reported(stdout: &str, key: &str) -> f64 {
    stdout
        .lines()
        .find_map(|l| l.strip_prefix(&format!("{key} = ")))
        .and_then(|v| v.split_whitespace().next())
        .unwrap()
        .parse()
        .unwrap()
}

#[test]
fn controller_check_defaults_pass() {
    let (code, stdout, stderr, dir) = controller(&[]);
    assert_eq!(code, Some(0), "{stderr}");
    assert!((reported(&stdout, "kp") - 18.657).abs() < 1e-3);
    assert!(reported(&stdout, "overshoot") <= 10.0);
    assert!(reported(&stdout, "settling") <= 6.0);
    assert!(reported(&stdout, "pll_lock") <= 0.2);
    let wave = std::fs::read_to_string(dir.path().join("waveform.csv")).unwrap();
    assert!(wave.starts_with("t_s,id_ref,iq_ref,id,iq,vd,vq,p_w,q_var\n"));
}

#[test]
fn controller_check_scales_kp_with_bandwidth() {
    let wn = (4.0 * std::f64::consts::PI * 300.0).to_string();
    let (code, stdout, _, _dir) = controller(&["--omega-n", &wn]);
    assert_eq!(code, Some(0));
    assert!((reported(&stdout, "kp") - 37.31).abs() < 0.01);
}

#[test]
fn low_damping_fails_unless_relaxed() {
    let (code, stdout, stderr, _dir) = controller(&["--xi", "0.2"]);
    assert_eq!(code, Some(1));
    assert!(stderr.contains("overshoot"), "{stderr}");
    let os = reported(&stdout, "overshoot (second order)");
    assert!((os - 52.7).abs() < 0.1, "{os}");
    let simulated = reported(&stdout, "overshoot");
    assert!((simulated - 52.7).abs() < 0.2 * 52.7, "{simulated}");

    let (code, _, stderr, _dir) = controller(&["--xi", "0.2", "--relaxed"]);
    assert_eq!(code, Some(0));
    assert!(stderr.contains("relaxed"));
}

#[test]
fn unstable_step_size_exits_1() {
    let (code, _, stderr, _dir) = controller(&["--dt", "1e-3"]);
    assert_eq!(code, Some(1));
    assert!(stderr.contains("diverged") || stderr.contains("threshold"), "{stderr}");
}
