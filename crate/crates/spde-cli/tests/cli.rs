//! End-to-end checks of the `spde` binary: exit codes, artifacts,
//! reproducibility and environment overrides.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn spde() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_spde"));
    c.env_remove("SPDE_SEED").env_remove("SPDE_WORKERS");
    c
}

fn scenario(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios").join(name)
}

fn text(o: &Output) -> String {
    format!("{}{}", String::from_utf8_lossy(&o.stdout), String::from_utf8_lossy(&o.stderr))
}

fn report(dir: &Path, name: &str) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(dir.join(format!("{name}.json"))).unwrap()).unwrap()
}

#[test]
fn ou_baseline_carries_the_oracle_check() {
    let out = tempfile::tempdir().unwrap();
    let o = spde()
        .arg("simulate")
        .arg(scenario("ou-baseline.json"))
        .arg("--out")
        .arg(out.path())
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0), "{}", text(&o));
    let r = report(out.path(), "ou-baseline");
    let checks = r["checks"].as_array().unwrap();
    let ou = checks.iter().find(|c| c["name"] == "OU second moment at T").unwrap();
    assert!((ou["theoretical"].as_f64().unwrap() - 0.432332).abs() < 1e-6);
    assert_eq!(r["status"], "pass");
    assert_eq!(r["config"]["name"], "ou-baseline");
    assert!(r["version"].is_string());
}

#[test]
fn reruns_and_config_echo_are_byte_identical() {
    let (a, b, c) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let src = scenario("semilinear-sine.json");
    for d in [&a, &b] {
        let o = spde().arg("simulate").arg(&src).arg("--out").arg(d.path()).output().unwrap();
        assert_eq!(o.status.code(), Some(0), "{}", text(&o));
    }
    let echo = c.path().join("echo.json");
    std::fs::write(&echo, serde_json::to_string(&report(a.path(), "semilinear-sine")["config"]).unwrap()).unwrap();
    let o = spde().arg("simulate").arg(&echo).arg("--out").arg(c.path()).output().unwrap();
    assert_eq!(o.status.code(), Some(0), "{}", text(&o));
    for ext in ["csv", "plot.dat"] {
        let read = |d: &Path| std::fs::read(d.join(format!("semilinear-sine.{ext}"))).unwrap();
        assert_eq!(read(a.path()), read(b.path()), "{ext} differs between reruns");
        assert_eq!(read(a.path()), read(c.path()), "{ext} differs after the config echo");
    }
}

#[test]
fn worker_count_does_not_change_outputs() {
    let runs: Vec<Vec<u8>> = ["1", "3"]
        .iter()
        .map(|w| {
            let d = tempfile::tempdir().unwrap();
            let o = spde()
                .env("SPDE_WORKERS", w)
                .arg("simulate")
                .arg(scenario("multiplicative-sine.json"))
                .arg("--out")
                .arg(d.path())
                .output()
                .unwrap();
            assert_eq!(o.status.code(), Some(0), "{}", text(&o));
            std::fs::read(d.path().join("multiplicative-sine.csv")).unwrap()
        })
        .collect();
    assert_eq!(runs[0], runs[1]);
}

#[test]
fn seed_env_overrides_the_config() {
    let d = tempfile::tempdir().unwrap();
    let o = spde()
        .env("SPDE_SEED", "123456789")
        .arg("simulate")
        .arg(scenario("volterra.json"))
        .arg("--out")
        .arg(d.path())
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0), "{}", text(&o));
    assert_eq!(report(d.path(), "volterra")["config"]["seed"], 123456789);
    let bad = spde()
        .env("SPDE_SEED", "-4")
        .args(["volterra", "--mu1", "1", "--mu2", "1"])
        .output()
        .unwrap();
    assert_eq!(bad.status.code(), Some(2));
    assert!(text(&bad).contains("SPDE_SEED"));
    let workers = spde()
        .env("SPDE_WORKERS", "0")
        .args(["volterra", "--mu1", "1", "--mu2", "1"])
        .output()
        .unwrap();
    assert_eq!(workers.status.code(), Some(2));
}

#[test]
fn empty_directory_has_nothing_to_run() {
    let d = tempfile::tempdir().unwrap();
    let o = spde().arg("simulate").arg(d.path()).output().unwrap();
    assert_eq!(o.status.code(), Some(0));
    assert!(text(&o).contains("nothing to run"));
}

#[test]
fn unknown_keys_are_listed_and_exit_two() {
    let d = tempfile::tempdir().unwrap();
    let cfg = d.path().join("bad.json");
    std::fs::write(
        &cfg,
        r#"{"name": "bad", "t_end": 1, "steps": 4, "colour": 1,
            "problem": {"target": "volterra", "mu1": 1, "mu2": 1, "mu3": 2}}"#,
    )
    .unwrap();
    let o = spde().arg("simulate").arg(&cfg).output().unwrap();
    assert_eq!(o.status.code(), Some(2));
    let msg = text(&o);
    assert!(msg.contains("colour") && msg.contains("problem.mu3"), "{msg}");
}

#[test]
fn exponent_violation_names_the_chain() {
    let o = spde()
        .args(["semilinear", "--eta", "0.3", "--beta", "0.35", "--sigma", "0.1"])
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
    assert!(text(&o).contains("max(0, 2η − 1/2) < β < η"), "{}", text(&o));
}

#[test]
fn failed_check_exits_one() {
    let d = tempfile::tempdir().unwrap();
    let o = spde()
        .args(["holder", "--f", "power:coef=1,exponent=-0.9", "--beta", "0.5", "--sigma", "0.25", "--out"])
        .arg(d.path())
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(1), "{}", text(&o));
    let member = spde()
        .args(["holder", "--f", "power:coef=1,exponent=-0.5", "--beta", "0.5", "--sigma", "0.25", "--out"])
        .arg(d.path())
        .output()
        .unwrap();
    assert_eq!(member.status.code(), Some(0), "{}", text(&member));
}

#[test]
fn linear_and_semilinear_flags_produce_reports() {
    let d = tempfile::tempdir().unwrap();
    let o = spde()
        .args([
            "linear",
            "--beta",
            "0.25",
            "--sigma",
            "0.1",
            "--condition",
            "F2",
            "--paths",
            "1000",
            "--steps",
            "128",
            "--out",
        ])
        .arg(d.path())
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0), "{}", text(&o));
    let header = std::fs::read_to_string(d.path().join("linear.csv")).unwrap();
    assert!(header.starts_with("t,m2,m2_se,beta_moment,beta_moment_se,bound\n"));
    let o = spde()
        .args([
            "semilinear",
            "--eta",
            "0.4",
            "--beta",
            "0.35",
            "--sigma",
            "0.1",
            "--gamma",
            "0.45",
            "--paths",
            "200",
            "--out",
        ])
        .arg(d.path())
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0), "{}", text(&o));
    let r = report(d.path(), "semilinear");
    assert!(r["details"]["certificate"]["t_local"].as_f64().unwrap() > 0.0);
}

#[test]
fn verify_runs_a_criterion_and_rejects_unknown_suites() {
    let d = tempfile::tempdir().unwrap();
    let o = spde().args(["verify", "--criterion", "7", "--out"]).arg(d.path()).output().unwrap();
    assert_eq!(o.status.code(), Some(0), "{}", text(&o));
    let csv = std::fs::read_to_string(d.path().join("verify-criterion7.csv")).unwrap();
    assert!(csv.starts_with("criterion,title,seed,check,theoretical,empirical,standard_error,pass\n"));
    let o = spde().args(["verify", "section9"]).output().unwrap();
    assert_eq!(o.status.code(), Some(2));
    assert!(text(&o).contains("section2, section3, section4, section5, all"));
}

#[test]
fn sample_paths_stream_as_csv() {
    let d = tempfile::tempdir().unwrap();
    let file = d.path().join("paths.csv");
    let o = spde()
        .arg("simulate")
        .arg(scenario("multiplicative-sine.json"))
        .args(["--stream-paths", "3", "--paths-csv"])
        .arg(&file)
        .arg("--out")
        .arg(d.path())
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0), "{}", text(&o));
    let body = std::fs::read_to_string(&file).unwrap();
    let mut lines = body.lines();
    assert_eq!(lines.next(), Some("path_index,t,x1,x2,x3,x4"));
    assert_eq!(lines.count(), 3 * 129);
}
