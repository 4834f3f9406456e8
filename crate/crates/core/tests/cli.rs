use std::path::Path;
use std::process::{Command, Output};

use bellpv::cli::{read_records, RunArgs, EXIT_CAP, EXIT_CONFIG};
use bellpv::estimator::RunOutcome;

fn bellpv(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bellpv")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

/// Drops the trailing wall-time column.
fn without_wall_time(csv: &str) -> Vec<String> {
    csv.lines().map(|l| l.rsplit_once(',').unwrap().0.to_string()).collect()
}

#[test]
fn identical_runs_give_identical_rows() {
    let args = ["estimate", "--state", "ghz(3)", "--trials", "300", "--seed", "5"];
    let a = bellpv(&args);
    let b = bellpv(&[&args[..], &["--workers", "2"]].concat());
    assert!(a.status.success() && b.status.success());
    assert_eq!(without_wall_time(&stdout(&a)), without_wall_time(&stdout(&b)));
    let lines = without_wall_time(&stdout(&a));
    assert_eq!(lines.len(), 2);
    assert!(lines[1].starts_with("ghz(3),2x2x2,2,independent,300,"));
}

#[test]
fn exit_codes() {
    assert_eq!(bellpv(&["estimate", "--state", "nosuch"]).status.code(), Some(EXIT_CONFIG));
    assert_eq!(bellpv(&["estimate", "--state", "ghz(3)", "--settings", "2x2"]).status.code(), Some(EXIT_CONFIG));
    assert_eq!(bellpv(&["estimate", "--bogus-flag"]).status.code(), Some(EXIT_CONFIG));
    assert_eq!(bellpv(&["estimate", "--state", "ghz(2)", "--settings", "16x16"]).status.code(), Some(EXIT_CAP));
    assert_eq!(bellpv(&["estimate", "--state-file", "/nonexistent"]).status.code(), Some(EXIT_CONFIG));
}

#[test]
fn config_file_with_flag_override_and_jsonl() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.json");
    let out = dir.path().join("out.jsonl");
    std::fs::write(
        &cfg,
        format!(r#"{{"state":"ghz","settings":"3x2","trials":200,"seed":1,"format":"jsonl","out":"{}"}}"#, out.display()),
    )
    .unwrap();
    let o = bellpv(&["estimate", "--config", cfg.to_str().unwrap(), "--seed", "2"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let rows = read_records(&out).unwrap();
    assert_eq!(rows.len(), 1);
    assert_eq!((rows[0].seed, rows[0].trials, rows[0].settings.as_str()), (2, 200, "3x2"));
}

#[test]
fn state_file_input() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("rho.txt");
    let rho = bellpv::state::make_ghz(2, 2, std::f64::consts::FRAC_PI_4).unwrap().to_density_matrix();
    std::fs::write(&path, bellpv::state::write_density_matrix(&rho)).unwrap();
    let a = bellpv(&["estimate", "--state-file", path.to_str().unwrap(), "--trials", "200", "--seed", "3"]);
    let b = bellpv(&["estimate", "--state", "ghz(2)", "--trials", "200", "--seed", "3"]);
    assert!(a.status.success());
    let field = |o: &Output| stdout(o).lines().nth(1).unwrap().split(',').nth(5).unwrap().to_string();
    assert_eq!(field(&a), field(&b));
}

#[test]
fn scan_then_fit_and_witness() {
    let dir = tempfile::tempdir().unwrap();
    let rows = dir.path().join("rows.csv");
    let mut text = String::new();
    for m in 2..=5 {
        let o = bellpv(&["estimate", "--state", "ghz(2)", "--settings", &format!("{m}x2"), "--trials", "400"]);
        assert!(o.status.success());
        let s = stdout(&o);
        if text.is_empty() {
            text.push_str(s.lines().next().unwrap());
            text.push('\n');
        }
        text.push_str(s.lines().nth(1).unwrap());
        text.push('\n');
    }
    std::fs::write(&rows, text).unwrap();
    let fit = bellpv(&["fit", "--input", rows.to_str().unwrap()]);
    assert!(fit.status.success(), "{}", String::from_utf8_lossy(&fit.stderr));
    let out = stdout(&fit);
    assert_eq!(out.lines().next().unwrap(), "x_definition,a,b,residual_rms,points");
    assert!(out.contains("settings_of_one_party") && out.contains("product_of_settings"));

    let scan = bellpv(&["scan-alpha", "--family", "qubit_ghz", "--grid", "10:40:15", "--settings", "2x2", "--trials", "300"]);
    assert!(scan.status.success(), "{}", String::from_utf8_lossy(&scan.stderr));
    assert_eq!(stdout(&scan).lines().count(), 4);

    let w = bellpv(&["witness", "--state", "ghz(3)", "--trials", "2000"]);
    assert!(w.status.success(), "{}", String::from_utf8_lossy(&w.stderr));
    assert!(stdout(&w).contains("WITNESSED"));
    let w = bellpv(&["witness", "--state", "ghz(2)", "--trials", "10"]);
    assert_eq!(w.status.code(), Some(EXIT_CONFIG));
}

#[test]
fn multiplicativity_from_rows() {
    let dir = tempfile::tempdir().unwrap();
    let rows = dir.path().join("rows.csv");
    let zero = |n: &str| {
        let o = bellpv(&["estimate", "--state", &format!("zero({n})"), "--trials", "100"]);
        stdout(&o)
    };
    let a = zero("2");
    let ab = zero("4");
    std::fs::write(&rows, format!("{a}{}\n{}\n", a.lines().nth(1).unwrap(), ab.lines().nth(1).unwrap())).unwrap();
    let o = bellpv(&["multiplicativity", "--input", rows.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains("\"pass\": true"));
}

#[test]
fn checks_report_pass() {
    let o = bellpv(&["verify-appendix", "--samples", "2000"]);
    assert!(o.status.success());
    assert!(stdout(&o).contains("\"deficits\": 0"));
    let o = bellpv(&["oracle-check", "--trials", "100"]);
    assert!(o.status.success());
    assert!(stdout(&o).contains("\"disagreements\": []"));
}

#[test]
fn resume_completes_a_partial_run() {
    let dir = tempfile::tempdir().unwrap();
    let ck = dir.path().join("run.ckpt");
    let args = RunArgs {
        state: Some("w(3)".into()),
        trials: Some(600),
        seed: Some(8),
        checkpoint: Some(ck.clone()),
        ..Default::default()
    };
    let cfg = args.resolve().unwrap();
    let partial = cfg.estimator(None).unwrap().chunk(100).stop_after(200).run(&cfg.state).unwrap();
    assert!(matches!(partial, RunOutcome::Interrupted(ref c) if c.next_index == 200));
    let resumed = bellpv(&["resume", "--checkpoint", ck.to_str().unwrap()]);
    assert!(resumed.status.success(), "{}", String::from_utf8_lossy(&resumed.stderr));
    let fresh = bellpv(&["estimate", "--state", "w(3)", "--trials", "600", "--seed", "8"]);
    assert_eq!(without_wall_time(&stdout(&resumed)), without_wall_time(&stdout(&fresh)));
    // a different run must not reuse the file
    let clash = bellpv(&["estimate", "--state", "w(3)", "--trials", "600", "--seed", "9", "--checkpoint", ck.to_str().unwrap()]);
    assert_eq!(clash.status.code(), Some(EXIT_CONFIG));
}

#[test]
fn dump_lp_writes_program() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("lp.txt");
    let o = bellpv(&["dump-lp", "--state", "ghz(2)", "--index", "3", "--out", path.to_str().unwrap()]);
    assert!(o.status.success());
    let text = std::fs::read_to_string(Path::new(&path)).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("# bellpv local program v1"));
    assert_eq!(lines.next(), Some("# d=2 settings=2x2"));
    assert_eq!(lines.next(), Some("# rows 17 cols 16"));
    assert_eq!(lines.count(), 17);
}
