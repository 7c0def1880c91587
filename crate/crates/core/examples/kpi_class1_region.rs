//! Largest accumulation rate meeting `P(W1 <= 2) >= 0.9` under the ZExp
//! approximation, and the overlap with the class-2 tuning region.
//!
//! `cargo run --release --example kpi_class1_region`

use dapq::kpi::{in_region, policy_sweep};
use dapq::{Kpi, KpiClass, QueueConfig, ToleranceConfig};

fn main() -> dapq::Result<()> {
    let tol = ToleranceConfig::default();
    let k1 = Kpi::new(2.0, 0.9, KpiClass::One)?;
    let k2 = Kpi::new(4.0, 0.85, KpiClass::Two)?;
    let ds: Vec<f64> = (0..=8).map(f64::from).collect();
    println!("lambda = (0.05, 0.55)");
    for p in policy_sweep(&QueueConfig::mm1(0.05, 0.55, 0.0, 0.0), &k1, &ds, &tol)? {
        println!(
            "  d = {}: b* = {:.4}, E[W1] = {:.6}, E[W2] = {:.6}",
            p.d, p.b_star, p.mean_w1, p.mean_w2
        );
    }
    let step = 0.005;
    let mut both = Vec::new();
    for i in 0..200 {
        for j in 0..200 {
            let (l1, l2) = (i as f64 * step, j as f64 * step);
            if l1 + l2 < 0.99 && in_region(&k1, l1, l2, 1.0, &tol)? && in_region(&k2, l1, l2, 1.0, &tol)? {
                both.push((l1, l2));
            }
        }
    }
    let span = |f: fn(&(f64, f64)) -> f64| {
        let v: Vec<f64> = both.iter().map(f).collect();
        (
            v.iter().copied().fold(f64::MAX, f64::min),
            v.iter().copied().fold(f64::MIN, f64::max),
        )
    };
    println!("\nboth KPIs need tuning at {} grid points", both.len());
    if !both.is_empty() {
        println!("  lambda1 in {:?}, lambda2 in {:?}", span(|p| p.0), span(|p| p.1));
    }
    Ok(())
}
