use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn kirchhoff(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_kirchhoff"))
        .args(args)
        .env_remove("KIRCHHOFF_OUT_DIR")
        .output()
        .unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

fn json(out: &Output) -> Value {
    assert_eq!(code(out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn classify_reports_regimes_and_rejects_subcritical_exponents() {
    let v = json(&kirchhoff(&["classify", "-N", "3", "-p", "14/3"]));
    assert_eq!(v["regime"], "KirchhoffCritical");
    let v = json(&kirchhoff(&["classify", "-N", "4", "-p", "3.6"]));
    assert_eq!(v["regime"], "TwoBranch");
    let v = json(&kirchhoff(&["classify", "-N", "3", "-p", "5", "-b", "0.5"]));
    assert_eq!(v["regime"], "KirchhoffSupercritical");
    assert_eq!(v["cStar"].as_f64(), Some(0.0));
    assert_eq!(code(&kirchhoff(&["classify", "-N", "3", "-p", "3"])), 2);
    assert_eq!(code(&kirchhoff(&["classify", "-N", "4", "-p", "5"])), 2);
}

#[test]
fn parse_errors_exit_with_bad_input() {
    assert_eq!(code(&kirchhoff(&["classify", "-N", "three", "-p", "5"])), 2);
    assert_eq!(code(&kirchhoff(&["classify", "-N", "3"])), 2);
    assert_eq!(code(&kirchhoff(&["classify", "-N", "3", "-p", "5", "--format", "xml"])), 2);
    assert_eq!(code(&kirchhoff(&["nonsense"])), 2);
}

#[test]
fn solve_below_the_threshold_exits_with_nonexistence() {
    let out = kirchhoff(&["solve", "-N", "3", "-p", "4", "-b", "0.01", "-c", "0.1"]);
    assert_eq!(code(&out), 3);
    assert!(out.stdout.is_empty());
    let v = json(&kirchhoff(&["solve", "-N", "3", "-p", "4", "-b", "0.01", "-c", "10"]));
    let branches = v["branches"].as_array().unwrap();
    assert_eq!(branches.len(), 2);
    assert_eq!(branches[0]["branch"], "Lower");
    assert_eq!(branches[1]["branch"], "Upper");
}

#[test]
fn numbers_carry_seventeen_significant_digits() {
    let out = kirchhoff(&["solve", "-N", "3", "-p", "5", "-c", "5", "--format", "csv"]);
    assert_eq!(code(&out), 0);
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with("# schema_version=1\n"));
    let row = text.lines().find(|l| l.starts_with("Unique,")).unwrap();
    let dsq = row.split(',').nth(1).unwrap();
    let mantissa = dsq.split('e').next().unwrap();
    assert_eq!(mantissa.chars().filter(char::is_ascii_digit).count(), 17, "{dsq}");
}

#[test]
fn flags_override_config_values() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "k.conf", "# instance\nN = 3\np = 5\nc = 5\nb = 0.5\n");
    let v = json(&kirchhoff(&["solve", "--config", &cfg]));
    assert_eq!(v["params"]["c"].as_f64(), Some(5.0));
    assert_eq!(v["params"]["b"].as_f64(), Some(0.5));
    let v = json(&kirchhoff(&["solve", "--config", &cfg, "-c", "7"]));
    assert_eq!(v["params"]["c"].as_f64(), Some(7.0));
    let bad = write(dir.path(), "bad.conf", "N = 3\ncolour = red\n");
    assert_eq!(code(&kirchhoff(&["classify", "--config", &bad, "-p", "5"])), 2);
}

#[test]
fn output_directory_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_kirchhoff"))
        .args(["sweep", "-N", "3", "-p", "5", "--c-grid", "1:10:4"])
        .env("KIRCHHOFF_OUT_DIR", dir.path())
        .output()
        .unwrap();
    assert_eq!(code(&out), 0);
    assert!(out.stdout.is_empty());
    let text = std::fs::read_to_string(dir.path().join("sweep.csv")).unwrap();
    assert!(text.contains("c,branch,Dsq,lambda,energy"));
    assert_eq!(text.lines().filter(|l| l.contains(",Unique,")).count(), 4);
}

#[test]
fn log_sidecar_records_each_run() {
    let dir = tempfile::tempdir().unwrap();
    let log = dir.path().join("runs.log");
    let log_arg = log.to_str().unwrap();
    kirchhoff(&["classify", "-N", "3", "-p", "5", "--log", log_arg]);
    kirchhoff(&["classify", "-N", "3", "-p", "3", "--log", log_arg]);
    let text = std::fs::read_to_string(&log).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 2);
    assert!(lines[0].split(' ').next().unwrap().parse::<u64>().is_ok());
    assert!(lines[0].contains("exit=0"));
    assert!(lines[1].contains("exit=2"));
}

#[test]
fn verify_passes_and_dumps_profiles() {
    let dir = tempfile::tempdir().unwrap();
    let dump = dir.path().join("u.csv");
    let v = json(&kirchhoff(&[
        "verify", "-N", "3", "-p", "4", "-b", "0.5", "-c", "60", "--dump-profile", dump.to_str().unwrap(),
    ]));
    assert_eq!(v["passed"], true);
    let text = std::fs::read_to_string(&dump).unwrap();
    assert!(text.contains("branch,r,u"));
    assert!(text.lines().any(|l| l.starts_with("Lower,")));
    assert!(text.lines().any(|l| l.starts_with("Upper,")));
}

#[test]
fn hypothesis_checks() {
    let base = ["hypo", "-N", "3", "-p", "5", "-c", "40"];
    let v = json(&kirchhoff(&[&base[..], &["--hypothesis", "v1", "--potential", "gaussian:v0=0.01"]].concat()));
    assert_eq!(v["hypothesis"], "V1");
    assert_eq!(v["satisfied"], true);
    let v = json(&kirchhoff(
        &[&base[..], &["--hypothesis", "v2", "--potential", "pole:v0=1e3,sigma=1,cutoff=1"]].concat(),
    ));
    assert_eq!(v["satisfied"], false);
    assert_eq!(code(&kirchhoff(&[&base[..], &["--hypothesis", "v9"]].concat())), 2);
    assert_eq!(code(&kirchhoff(&[&base[..], &["--hypothesis", "v1", "--potential", "bump:v0=1"]].concat())), 2);
    // (V5) belongs to the two-branch regime
    assert_eq!(code(&kirchhoff(&[&base[..], &["--hypothesis", "v5"]].concat())), 2);
}

#[test]
fn bounds_report_positive_slack() {
    let v = json(&kirchhoff(&["bounds", "-N", "3", "-p", "5", "-c", "40", "--potential", "gaussian:v0=0.01"]));
    assert!(v["bound"]["slackSup"].as_f64().unwrap() > 0.0);
    assert_eq!(v["hypotheses"].as_array().unwrap().len(), 2);
    let two = kirchhoff(&["bounds", "-N", "3", "-p", "4", "-b", "0.01", "-c", "10"]);
    assert_eq!(code(&two), 2);
}

#[test]
fn flow_converges_on_a_coarse_grid() {
    let v = json(&kirchhoff(&[
        "flow", "-N", "3", "-p", "4", "-b", "0.01", "-c", "10", "--intervals", "2000", "--format", "json",
    ]));
    assert_eq!(v["converged"], true);
    assert!(v["multiplierEstimate"].as_f64().unwrap() > 0.0);
    let csv = kirchhoff(&["flow", "-N", "3", "-p", "4", "-b", "0.01", "-c", "10", "--intervals", "2000"]);
    assert_eq!(code(&csv), 0);
    assert!(String::from_utf8(csv.stdout).unwrap().contains("step,energy,gradientNorm,multiplierEstimate"));
    // not coercive above the Kirchhoff-critical exponent
    assert_eq!(code(&kirchhoff(&["flow", "-N", "3", "-p", "5", "-c", "10"])), 2);
}

#[test]
fn fold_ratio_and_b_limit() {
    let v = json(&kirchhoff(&["fold", "-N", "3", "-p", "4", "-b", "0.01"]));
    assert!(v["relativeDifference"].as_f64().unwrap() < 1e-8);
    let v = json(&kirchhoff(&["ratio", "-N", "3", "-p", "5", "--alpha", "2", "--beta", "1"]));
    assert_eq!(v["holds"], true);
    let v = json(&kirchhoff(&["blimit", "-N", "3", "-p", "5", "-c", "2", "--format", "json"]));
    assert_eq!(v["rows"].as_array().unwrap().len(), 4);
    assert_eq!(code(&kirchhoff(&["fold", "-N", "3", "-p", "5"])), 2);
}

#[test]
fn profile_csv_and_json() {
    let out = kirchhoff(&["profile", "-N", "3", "-p", "4"]);
    assert_eq!(code(&out), 0);
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with("# schema_version=1"));
    let v = json(&kirchhoff(&["profile", "-N", "3", "-p", "4", "--format", "json"]));
    assert!(v["identityDefect"].as_f64().unwrap() < 1e-6);
}
