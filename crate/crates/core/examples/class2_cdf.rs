//! Class-2 waiting-time distribution of the delayed queue next to its FCFS
//! and non-preemptive endpoints.
//!
//! `cargo run --example class2_cdf`

use dapq::approx::fcfs_zexp;
use dapq::transforms::{class2_cdf_dapq, invert_to_cdf, npq_class2_lst};
use dapq::{QueueConfig, ToleranceConfig};

fn main() -> dapq::Result<()> {
    let tol = ToleranceConfig::default();
    let cfg = QueueConfig::mm1(0.5, 0.3, 0.5, 2.0);
    let grid: Vec<f64> = (0..=12).map(|i| i as f64 * 2.0).collect();
    let delayed = class2_cdf_dapq(&cfg, &grid, &tol)?;
    let npq = invert_to_cdf(&npq_class2_lst(&cfg, &tol)?, &grid, &tol)?;
    let fcfs = fcfs_zexp(&cfg).curve(&grid);
    println!("lambda = (0.5, 0.3), b = 0.5, d = 2");
    println!("{:>5} {:>10} {:>10} {:>10}", "t", "NPQ", "delayed", "FCFS");
    for i in 0..grid.len() {
        println!(
            "{:>5} {:>10.6} {:>10.6} {:>10.6}",
            grid[i], npq.f[i], delayed.f[i], fcfs.f[i]
        );
    }
    println!("largest inversion error estimate: {:.1e}", delayed.max_error_estimate);
    Ok(())
}
