use std::fs;
use std::process::Command;

use tddyn_cli::{parse_cli, run, CliError};
use tddyn_core::harness::{parse_csv, read_csv};
use tddyn_core::replicator::RmSweepConfig;

fn invoke(args: &[&str]) -> (i32, String, String) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let argv = std::iter::once("tddyn").chain(args.iter().copied());
    let code = run(argv, &mut out, &mut err);
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}

fn parse(args: &[&str]) -> Result<tddyn_cli::Cli, CliError> {
    parse_cli(std::iter::once("tddyn").chain(args.iter().copied()))
}

#[test]
fn sweep_arguments_parse() {
    assert!(parse(&["rm", "sweep", "--q-list", "0,0.5", "--R-list", "2", "--L", "2", "--U", "100"]).is_ok());
}

#[test]
fn q_above_its_bound_is_a_usage_error() {
    let err = parse(&["rm", "sweep", "--q-list", "1.5", "--R-list", "2"]).unwrap_err();
    assert_eq!(err.exit_code(), 2);
    let msg = err.to_string();
    assert!(msg.contains("q") && msg.contains("0.98989"), "{msg}");
}

#[test]
fn empty_claim_range_is_a_usage_error() {
    let (code, _, err) = invoke(&["game", "matrix", "--L", "5", "--U", "5"]);
    assert_eq!(code, 2);
    assert!(err.contains("--L 5 --U 5"), "{err}");
}

#[test]
fn unknown_flags_are_rejected() {
    let (code, _, err) = invoke(&["wf", "run", "--mu", "0.1", "--delta", "1", "--rho", "1", "--bogus"]);
    assert_eq!(code, 2);
    assert!(err.contains("--bogus"), "{err}");
    assert_eq!(invoke(&[]).0, 2);
}

#[test]
fn range_checks_name_their_flag() {
    for (args, flag) in [
        (vec!["wf", "run", "--mu", "1.5", "--delta", "1", "--rho", "1"], "--mu"),
        (vec!["wf", "run", "--mu", "0.1", "--delta", "0", "--rho", "1"], "--delta"),
        (vec!["intro", "exact", "--beta", "inf"], "--beta"),
        (vec!["intro", "sim", "--beta", "1", "--steps", "10", "--burn-in", "10"], "--burn-in"),
        (vec!["intro", "sweep", "--R-list", "1", "--beta-list", "1"], "--R-list"),
        (vec!["game", "eliminate", "--svg", "x.svg"], "--svg"),
        (vec!["--threads", "0", "verify"], "--threads"),
    ] {
        let (code, _, err) = invoke(&args);
        assert_eq!(code, 2, "{args:?}");
        assert!(err.contains(flag), "{args:?}: {err}");
    }
}

#[test]
fn help_exits_cleanly() {
    let (code, out, _) = invoke(&["--help"]);
    assert_eq!(code, 0);
    assert!(out.contains("intro"));
}

#[test]
fn unwritable_output_is_a_runtime_error() {
    let (code, _, err) = invoke(&["game", "matrix", "--out", "/nonexistent-dir/m.csv"]);
    assert_eq!(code, 1);
    assert!(err.contains("/nonexistent-dir/m.csv"), "{err}");
}

#[test]
fn payoff_matrix_csv() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.csv");
    let (code, _, _) = invoke(&["game", "matrix", "--L", "2", "--U", "4", "--R", "2", "--out", path.to_str().unwrap()]);
    assert_eq!(code, 0);
    let table = read_csv(&path).unwrap();
    assert_eq!(table.columns, vec!["claim", "2", "3", "4"]);
    assert_eq!(table.rows[0], vec!["2", "2", "4", "4"]);
    assert_eq!(table.rows[2], vec!["4", "0", "1", "4"]);
}

#[test]
fn elimination_prints_the_floor() {
    let (code, out, _) = invoke(&["game", "eliminate", "--L", "3", "--U", "12", "--R", "3"]);
    assert_eq!(code, 0);
    assert_eq!(out.trim(), "3");
}

#[test]
fn rm_sweep_output_is_identical_across_thread_counts() {
    let dir = tempfile::tempdir().unwrap();
    let run_with = |threads: &str| {
        let csv = dir.path().join(format!("rm-{threads}.csv"));
        let svg = dir.path().join(format!("rm-{threads}.svg"));
        let (code, _, err) = invoke(&[
            "rm", "sweep", "--L", "2", "--U", "20", "--R-list", "2,5,10", "--q-list", "0:0.3:0.9",
            "--threads", threads, "--out", csv.to_str().unwrap(), "--svg", svg.to_str().unwrap(),
        ]);
        assert_eq!(code, 0, "{err}");
        (fs::read(csv).unwrap(), fs::read_to_string(svg).unwrap())
    };
    let (csv1, svg1) = run_with("1");
    let (csv4, svg4) = run_with("4");
    assert_eq!(csv1, csv4);
    assert_eq!(svg1, svg4);
    assert_eq!(svg1.matches("class=\"cell\"").count(), 12);
    let table = parse_csv(std::str::from_utf8(&csv1).unwrap()).unwrap();
    let cfg: RmSweepConfig = table.metadata.config_as().unwrap();
    assert_eq!(cfg.strengths.len(), 4);
    assert_eq!(table.columns, vec!["R", "q", "highest_claim", "converged"]);
}

#[test]
fn wf_sweep_writes_one_heatmap_per_rho() {
    let dir = tempfile::tempdir().unwrap();
    let svg = dir.path().join("fig3.svg");
    let csv = dir.path().join("fig3.csv");
    let (code, _, err) = invoke(&[
        "wf", "sweep", "--mu-list", "0.01,0.9", "--delta-list", "1,30", "--rho-list", "0.5,1",
        "--reps", "2", "--t", "50", "--N", "30", "--seed", "9",
        "--out", csv.to_str().unwrap(), "--svg", svg.to_str().unwrap(),
    ]);
    assert_eq!(code, 0, "{err}");
    assert!(dir.path().join("fig3_rho-0.5.svg").exists());
    assert!(dir.path().join("fig3_rho-1.svg").exists());
    let table = read_csv(&csv).unwrap();
    assert_eq!(table.columns, vec!["rho", "mu", "delta", "replicate", "seed", "mean_claim"]);
    assert_eq!(table.rows.len(), 16);
    assert_eq!(table.metadata.seed, Some(9));
}

#[test]
fn intro_exact_reports_average_and_residual() {
    let (code, out, err) = invoke(&["intro", "exact", "--L", "2", "--U", "3", "--R", "2", "--beta", "0"]);
    assert_eq!(code, 0);
    let table = parse_csv(&out).unwrap();
    assert_eq!(table.columns, vec!["claim_a", "claim_b", "probability"]);
    assert_eq!(table.rows.len(), 4);
    assert!(err.contains("average claim: 2.5"), "{err}");
    assert!(err.contains("residual"));
}

#[test]
fn intro_sim_trace_is_seeded() {
    let args = ["intro", "sim", "--L", "2", "--U", "10", "--beta", "1", "--steps", "500", "--seed", "4", "--trace-every", "10"];
    let (code, first, _) = invoke(&args);
    assert_eq!(code, 0);
    assert_eq!(first, invoke(&args).1);
    let table = parse_csv(&first).unwrap();
    assert_eq!(table.columns, vec!["step", "claim_a", "claim_b"]);
    assert_eq!(table.rows.len(), 51);
}

#[test]
fn verify_battery_passes() {
    let (code, out, _) = invoke(&["verify"]);
    assert_eq!(code, 0, "{out}");
    assert!(out.lines().all(|l| !l.starts_with("FAIL")));
}

#[test]
fn binary_exit_codes() {
    let bin = env!("CARGO_BIN_EXE_tddyn");
    let status = |args: &[&str]| Command::new(bin).args(args).output().unwrap().status.code();
    assert_eq!(status(&["game", "eliminate", "--L", "2", "--U", "6"]), Some(0));
    assert_eq!(status(&["game", "eliminate", "--L", "6", "--U", "2"]), Some(2));
    assert_eq!(status(&["game", "matrix", "--out", "/nonexistent-dir/m.csv"]), Some(1));
}
