use std::path::PathBuf;
use std::process::{Command, Output};

fn dapq(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dapq")).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("dapq-cli-{}-{name}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

#[test]
fn help_documents_environment_and_headers() {
    let out = stdout(&dapq(&["--help"]));
    for key in [
        "DAPQ_EPS_SERIES",
        "DAPQ_EPS_ROOT",
        "DAPQ_EPS_INVERT",
        "DAPQ_MAX_STATES",
        "kind,t,F",
    ] {
        assert!(out.contains(key), "{key}");
    }
}

#[test]
fn exit_codes() {
    assert_eq!(dapq(&["mean", "--lam1", "0.5", "--lam2", "0.3"]).status.code(), Some(0));
    let det = dapq(&[
        "mean",
        "--lam1",
        "0.5",
        "--lam2",
        "0.3",
        "--service",
        "det",
        "--d",
        "1.5",
    ]);
    assert_eq!(det.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&det.stderr).contains("invalid delay"));
    assert_eq!(dapq(&["mean", "--lam1", "0.7", "--lam2", "0.3"]).status.code(), Some(2));
    assert_eq!(dapq(&["mean", "--lam1", "0.5"]).status.code(), Some(2));
    let infeasible = dapq(&[
        "kpi", "--class", "2", "--w", "4", "--p", "0.85", "--lam1", "0.5", "--lam2", "0.45",
    ]);
    assert_eq!(infeasible.status.code(), Some(3));
    assert!(stdout(&infeasible).contains(",false,"));
    let npq = dapq(&[
        "kpi", "--class", "2", "--w", "4", "--p", "0.85", "--lam1", "0.05", "--lam2", "0.1",
    ]);
    assert_eq!(npq.status.code(), Some(0));
    let strict = Command::new(env!("CARGO_BIN_EXE_dapq"))
        .args([
            "cdf", "--lam1", "0.5", "--lam2", "0.3", "--kind", "dapq2", "--b", "0.5", "--d", "2",
        ])
        .env("DAPQ_EPS_INVERT", "1e-30")
        .output()
        .unwrap();
    assert_eq!(strict.status.code(), Some(4));
    let bad_env = Command::new(env!("CARGO_BIN_EXE_dapq"))
        .args(["mean", "--lam1", "0.5", "--lam2", "0.3"])
        .env("DAPQ_EPS_ROOT", "abc")
        .output()
        .unwrap();
    assert_eq!(bad_env.status.code(), Some(2));
}

#[test]
fn mean_sweep_rows() {
    let out = stdout(&dapq(&[
        "mean", "--lam1", "0.5", "--lam2", "0.3", "--b", "0:1:0.05", "--d", "2",
    ]));
    let lines: Vec<&str> = out.lines().collect();
    assert_eq!(
        lines[0],
        "lambda1,lambda2,mu,service,b,d,mean_w1,mean_w2,conservation_residual"
    );
    assert_eq!(lines.len(), 22);
    let w1: Vec<f64> = lines[1..]
        .iter()
        .map(|l| l.split(',').nth(6).unwrap().parse().unwrap())
        .collect();
    assert!(w1.windows(2).all(|w| w[1] > w[0]));
}

#[test]
fn simulate_is_byte_identical_and_fcfs_mean_matches() {
    let a = dapq(&[
        "simulate", "--lam1", "0.5", "--lam2", "0.3", "--reps", "1", "--seed", "7",
    ]);
    let b = dapq(&[
        "simulate", "--lam1", "0.5", "--lam2", "0.3", "--reps", "1", "--seed", "7",
    ]);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
    let fcfs = stdout(&dapq(&[
        "simulate", "--lam1", "0.5", "--lam2", "0.3", "--b", "1", "--d", "0", "--seed", "3", "--n", "20000", "--reps",
        "20",
    ]));
    let first: Vec<f64> = fcfs
        .lines()
        .nth(1)
        .unwrap()
        .split(',')
        .skip(3)
        .map(|x| x.parse().unwrap())
        .collect();
    let (mean, se) = (first[0], first[1]);
    assert!((mean - 4.0).abs() < 3.0 * se, "{mean} +- {se}");
    assert_eq!(
        dapq(&["simulate", "--lam1", "0.5", "--lam2", "0.3"]).status.code(),
        Some(2)
    );
    assert_eq!(
        dapq(&[
            "simulate",
            "--lam1",
            "0.5",
            "--lam2",
            "0.3",
            "--seed",
            "1",
            "--n",
            "10",
            "--burn-in",
            "20"
        ])
        .status
        .code(),
        Some(2)
    );
}

#[test]
fn outputs_carry_manifests_and_raw_dump() {
    let dir = scratch("manifest");
    let out = dir.join("sim.csv");
    let raw = dir.join("raw.csv");
    let status = dapq(&[
        "simulate",
        "--lam1",
        "0.5",
        "--lam2",
        "0.3",
        "--seed",
        "11",
        "--reps",
        "2",
        "--out",
        out.to_str().unwrap(),
        "--raw",
        raw.to_str().unwrap(),
    ]);
    assert_eq!(status.status.code(), Some(0));
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.join("sim.csv.manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["subcommand"], "simulate");
    assert_eq!(manifest["parameters"]["args"]["sim"]["seed"], 11);
    assert!(manifest["tolerances"]["eps_invert"].is_number());
    assert!(manifest["version"].is_string());
    let raw_text = std::fs::read_to_string(&raw).unwrap();
    assert!(raw_text.starts_with("rep,class,arrival,wait\n"));
    assert_eq!(raw_text.lines().count(), 1 + 2 * 4000);
    std::fs::remove_dir_all(dir).unwrap();
}

#[test]
fn cdf_and_kpi_outputs() {
    let cdf = stdout(&dapq(&[
        "cdf", "--lam1", "0.5", "--lam2", "0.3", "--kind", "fcfs", "--t-max", "1",
    ]));
    let row: Vec<&str> = cdf.lines().nth(1).unwrap().split(',').collect();
    assert_eq!(row, ["fcfs", "0", "0.2"]);
    let region = dapq(&[
        "kpi",
        "--class",
        "1",
        "--w",
        "2",
        "--p",
        "0.9",
        "--region",
        "--resolution",
        "0.05",
    ]);
    assert_eq!(region.status.code(), Some(0));
    let text = stdout(&region);
    assert!(text.starts_with("boundary,lambda1,lambda2\n"));
    assert!(text.contains("\nlower,") && text.contains("\nupper,"));
    let sweep = stdout(&dapq(&[
        "kpi",
        "--class",
        "2",
        "--w",
        "4",
        "--p",
        "0.85",
        "--lam1",
        "0.1",
        "--lam2",
        "0.52",
        "--sweep-d",
        "0:8",
    ]));
    let b: Vec<f64> = sweep
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(1).unwrap().parse().unwrap())
        .collect();
    assert_eq!(b.len(), 9);
    assert!(b.windows(2).all(|w| w[1] >= w[0]));
}
