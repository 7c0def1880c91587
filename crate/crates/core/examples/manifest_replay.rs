//! Runs a CLI job in-process, serializes its manifest and replays it.
//!
//! `cargo run --example manifest_replay`

use clap::Parser;
use dapq::cli::{run_job, Cli, Command, Job, RunManifest};
use dapq::ToleranceConfig;

fn main() {
    let cli = Cli::parse_from([
        "dapq", "mean", "--lam1", "0.5", "--lam2", "0.3", "--b", "0:1:0.25", "--d", "2",
    ]);
    let Command::Mean { args, .. } = cli.command else {
        unreachable!()
    };
    let tol = ToleranceConfig::default();
    let job = Job::Mean(args);
    let first = run_job(&job, &tol).expect("valid job");
    let manifest = RunManifest {
        subcommand: job.name().into(),
        parameters: job,
        tolerances: tol,
        version: env!("CARGO_PKG_VERSION").into(),
        wall_clock_seconds: 0.0,
    };
    let text = serde_json::to_string_pretty(&manifest).expect("serializable");
    println!("{text}\n");
    let back: RunManifest = serde_json::from_str(&text).expect("round trip");
    let again = run_job(&back.parameters, &back.tolerances).expect("valid job");
    print!("{}", first.csv);
    println!("replay identical: {}", first == again);
}
