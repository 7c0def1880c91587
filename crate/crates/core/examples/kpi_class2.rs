//! Smallest accumulation rate meeting `P(W2 <= 4) >= 0.85` as the delay grows,
//! and the class-1 cost of each choice.
//!
//! `cargo run --release --example kpi_class2`

use dapq::kpi::{feasible_region, policy_sweep};
use dapq::{Kpi, KpiClass, QueueConfig, ToleranceConfig};

fn main() -> dapq::Result<()> {
    let tol = ToleranceConfig::default();
    let kpi = Kpi::new(4.0, 0.85, KpiClass::Two)?;
    let region = feasible_region(&kpi, 1.0, 0.05, &tol)?;
    println!("feasible region (lambda1: lower, upper lambda2)");
    for (lo, hi) in region.lower_boundary.iter().zip(&region.upper_boundary) {
        println!("  {:.2}: {:.4} {:.4}", lo.0, lo.1, hi.1);
    }
    let ds: Vec<f64> = (0..=8).map(f64::from).collect();
    for (l1, l2) in [(0.1, 0.52), (0.2, 0.41), (0.3, 0.3)] {
        println!("\nlambda = ({l1}, {l2})");
        for p in policy_sweep(&QueueConfig::mm1(l1, l2, 0.0, 0.0), &kpi, &ds, &tol)? {
            let status = if p.feasible { "" } else { "  (infeasible)" };
            println!(
                "  d = {}: b* = {:.4}, E[W1] = {:.4}, E[W2] = {:.4}{status}",
                p.d, p.b_star, p.mean_w1, p.mean_w2
            );
        }
    }
    Ok(())
}
