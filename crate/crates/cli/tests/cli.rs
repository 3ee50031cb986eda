//! End-to-end runs of the `hfmm` binary.

use std::process::{Command, Output};

fn hfmm(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hfmm")).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

#[test]
fn lists_checks() {
    let o = hfmm(&["validate", "--list"]);
    assert!(o.status.success());
    let names = stdout(&o);
    for n in ["sommerfeld-identity", "boundary-residual", "mirror-limit", "toeplitz"] {
        assert!(names.lines().any(|l| l == n), "{names}");
    }
}

#[test]
fn usage_errors_exit_with_two() {
    for args in [
        &["bench", "--media", "bogus"][..],
        &["accuracy", "--alpha", "-1"],
        &["validate", "--check", "no-such-check"],
        &["accuracy", "--format", "xml"],
        &["accuracy", "--config", "/nonexistent/hfmm.toml"],
    ] {
        let o = hfmm(args);
        assert_eq!(o.status.code(), Some(2), "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
    }
}

#[test]
fn unknown_config_key_is_rejected() {
    let path = std::env::temp_dir().join(format!("hfmm-cli-{}.toml", std::process::id()));
    std::fs::write(&path, "[run]\nleaf_sise = 4\n").unwrap();
    let o = hfmm(&["accuracy", "--config", path.to_str().unwrap()]);
    std::fs::remove_file(&path).ok();
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn injected_fault_fails_validation() {
    let ok = hfmm(&["validate", "--check", "boundary-residual"]);
    assert!(ok.status.success());
    let bad = hfmm(&["validate", "--check", "boundary-residual", "--inject-fault", "wrong-sign-alpha"]);
    assert_eq!(bad.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&bad.stderr).contains("FAIL boundary-residual"));
}

#[test]
fn reference_order_gives_zero_error() {
    let o = hfmm(&["accuracy", "--p", "8", "--p-ref", "8", "--n", "100", "--format", "json"]);
    assert!(o.status.success());
    let rows: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    let e = rows.as_array().unwrap().iter().find(|r| r["metric"] == "E").unwrap();
    assert_eq!(e["value"], 0.0);
    assert_eq!(e["P"], 8);
}

#[test]
fn untimed_output_is_reproducible_across_thread_counts() {
    let run = |threads: &str| {
        let o = hfmm(&[
            "accuracy", "--p", "5,10", "--p-ref", "20", "--n", "400", "--k", "1", "--no-timings", "--threads", threads,
        ]);
        assert!(o.status.success());
        o.stdout
    };
    let one = run("1");
    assert!(String::from_utf8_lossy(&one).starts_with("# hfmm-csv v1\nscenario,media,k,alpha,P,N,metric,value,seconds\n"));
    assert_eq!(one, run("1"));
    assert_eq!(one, run("3"));
}

#[test]
fn output_file_is_written() {
    let path = std::env::temp_dir().join(format!("hfmm-cli-{}.csv", std::process::id()));
    let o = hfmm(&["bench", "--n", "400", "--p", "5", "--out", path.to_str().unwrap()]);
    assert!(o.status.success());
    let text = std::fs::read_to_string(&path).unwrap();
    std::fs::remove_file(&path).ok();
    assert!(text.contains(",time_total,"), "{text}");
}
