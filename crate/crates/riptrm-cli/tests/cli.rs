//! End-to-end tests of the `riptrm` binary: exit codes, trace emission,
//! verification, and fault injection.

use std::path::{Path, PathBuf};
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_riptrm"))
}

fn scratch(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("riptrm-cli-{tag}-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn run_ok(args: &[&str]) {
    let out = bin().args(args).output().unwrap();
    assert!(
        out.status.success(),
        "expected success for {args:?}: {}",
        String::from_utf8_lossy(&out.stderr)
    );
}

#[test]
fn run_emits_trace_with_data_rows() {
    let dir = scratch("smoke");
    let csv = dir.join("trace.csv");
    run_ok(&[
        "run",
        "--problem",
        "analytic-1d",
        "--subsolver",
        "exact",
        "--seed",
        "7",
        "--out",
        csv.to_str().unwrap(),
        "--plot-script",
        dir.join("plot.gp").to_str().unwrap(),
    ]);
    let text = std::fs::read_to_string(&csv).unwrap();
    let mut lines = text.lines();
    assert!(lines.next().unwrap().starts_with("outer_iter,inner_iter,"));
    assert!(lines.count() >= 1, "expected at least one data row");
    let plot = std::fs::read_to_string(dir.join("plot.gp")).unwrap();
    assert!(plot.contains(csv.to_str().unwrap()));
    assert!(dir.join("trace.csv.aux").exists());
    assert!(dir.join("trace.csv.state").exists());
    let _ = std::fs::remove_dir_all(&dir);
}

#[test]
fn repeated_runs_are_bytewise_identical() {
    let dir = scratch("det");
    let a = dir.join("a.csv");
    let b = dir.join("b.csv");
    for out in [&a, &b] {
        run_ok(&[
            "run",
            "--problem",
            "stable-linsys",
            "--subsolver",
            "tcg",
            "--seed",
            "1",
            "--max-outer",
            "4",
            "--out",
            out.to_str().unwrap(),
        ]);
    }
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    let _ = std::fs::remove_dir_all(&dir);
}

#[test]
fn verify_accepts_clean_trace_and_rejects_corruption() {
    let dir = scratch("verify");
    let csv = dir.join("trace.csv");
    run_ok(&[
        "run",
        "--problem",
        "analytic-1d",
        "--out",
        csv.to_str().unwrap(),
    ]);
    let verify = |trace: &Path| {
        bin()
            .args([
                "verify",
                "--trace",
                trace.to_str().unwrap(),
                "--problem",
                "analytic-1d",
            ])
            .output()
            .unwrap()
    };
    let out = verify(&csv);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));

    // corrupt an accepted aux row so that ared <= eta * pred
    let aux_path = dir.join("trace.csv.aux");
    let aux = std::fs::read_to_string(&aux_path).unwrap();
    let mut lines: Vec<String> = aux.lines().map(str::to_string).collect();
    let target = lines
        .iter()
        .position(|l| l.ends_with("true") && l.contains(",true,"))
        .or_else(|| (1..lines.len()).find(|&i| lines[i].split(',').nth(9) == Some("true")))
        .expect("an accepted row exists");
    let mut fields: Vec<String> = lines[target].split(',').map(str::to_string).collect();
    fields[3] = "-1e0".to_string(); // ared
    lines[target] = fields.join(",");
    std::fs::write(&aux_path, lines.join("\n") + "\n").unwrap();

    let out = verify(&csv);
    assert_eq!(out.status.code(), Some(1));
    let msg = String::from_utf8_lossy(&out.stderr);
    assert!(
        msg.contains("accepted without ared > eta * pred"),
        "diagnostic names the violation: {msg}"
    );
    let _ = std::fs::remove_dir_all(&dir);
}

#[test]
fn verify_final_residual_matches_recomputation() {
    let dir = scratch("resid");
    let csv = dir.join("trace.csv");
    run_ok(&[
        "run",
        "--problem",
        "rosenbrock-grassmann",
        "--subsolver",
        "exact",
        "--target-residual",
        "1e-6",
        "--out",
        csv.to_str().unwrap(),
    ]);
    // tamper with the recorded residual so recomputation must disagree
    let text = std::fs::read_to_string(&csv).unwrap();
    let mut lines: Vec<String> = text.lines().map(str::to_string).collect();
    let last = lines.len() - 1;
    let mut fields: Vec<String> = lines[last].split(',').map(str::to_string).collect();
    fields[7] = "1e-1".to_string();
    lines[last] = fields.join(",");
    std::fs::write(&csv, lines.join("\n") + "\n").unwrap();
    let out = bin()
        .args([
            "verify",
            "--trace",
            csv.to_str().unwrap(),
            "--problem",
            "rosenbrock-grassmann",
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("final residual mismatch"));
    let _ = std::fs::remove_dir_all(&dir);
}

#[test]
fn usage_and_io_errors_exit_2() {
    let out = bin().args(["run", "--problem", "no-such-problem"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));

    let out = bin()
        .args(["verify", "--trace", "/nonexistent/trace.csv", "--problem", "analytic-1d"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));

    let out = bin().args(["run", "--no-such-flag"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn gradcheck_passes_for_builtin_problems() {
    for problem in ["analytic-1d", "rosenbrock-grassmann", "stable-linsys"] {
        let out = bin().args(["gradcheck", "--problem", problem]).output().unwrap();
        assert!(
            out.status.success(),
            "{problem}: {}",
            String::from_utf8_lossy(&out.stdout)
        );
    }
}

#[test]
fn trs_bench_verifies_random_instances() {
    let out = bin()
        .args(["trs-bench", "--count", "120", "--seed", "5"])
        .output()
        .unwrap();
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stdout).contains("verified at 1e-8"));
}

#[test]
fn config_file_sets_defaults_and_flags_override() {
    let dir = scratch("config");
    let cfg = dir.join("run.conf");
    std::fs::write(
        &cfg,
        "problem = analytic-1d\nsubsolver = cauchy\nmax_outer = 3\n# comment\n",
    )
    .unwrap();
    let csv = dir.join("t.csv");
    // flag overrides the config's subsolver; config supplies the problem
    run_ok(&[
        "run",
        "--config",
        cfg.to_str().unwrap(),
        "--subsolver",
        "exact",
        "--out",
        csv.to_str().unwrap(),
    ]);
    assert!(csv.exists());

    let bad = dir.join("bad.conf");
    std::fs::write(&bad, "unknown_key = 1\n").unwrap();
    let out = bin()
        .args(["run", "--config", bad.to_str().unwrap()])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    let _ = std::fs::remove_dir_all(&dir);
}
