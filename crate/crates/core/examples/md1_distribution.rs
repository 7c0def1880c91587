//! M/D/1 queue length seen by arrivals: exact terms, geometric tail and the
//! resulting delayed-queue means at integer delays.
//!
//! `cargo run --example md1_distribution`

use dapq::markov::md1_stationary;
use dapq::mean_wait::dapq_means;
use dapq::{QueueConfig, ToleranceConfig};

fn main() -> dapq::Result<()> {
    let tol = ToleranceConfig::default();
    for rho in [0.5, 0.8, 0.9] {
        let pi = md1_stationary(rho, &tol)?;
        println!(
            "rho = {rho}: exact terms up to {}, tail ratio {:.10}, total mass - 1 = {:.1e}",
            pi.truncation_k,
            pi.tail_ratio,
            pi.total_mass() - 1.0
        );
        println!(
            "  pi_0..pi_5 = {:?}",
            pi.to_vec(5).iter().map(|p| format!("{p:.6}")).collect::<Vec<_>>()
        );
    }
    println!("\nM/D/1, lambda = (0.5, 0.3), b = 0.5");
    for d in 0..=6 {
        let m = dapq_means(&QueueConfig::md1(0.5, 0.3, 0.5, d as f64), &tol)?;
        println!("  d = {d}: E[W1] = {:.6}, E[W2] = {:.6}", m.mean_w1, m.mean_w2);
    }
    Ok(())
}
