//! Exact class means as the accumulation rate varies, for several delays and
//! both service kinds.
//!
//! `cargo run --example mean_sweep`

use dapq::mean_wait::dapq_means;
use dapq::{QueueConfig, ServiceKind, ToleranceConfig};

fn main() -> dapq::Result<()> {
    let tol = ToleranceConfig::default();
    for service in [ServiceKind::Exponential, ServiceKind::Deterministic] {
        println!("service = {}, lambda1 = 0.5, lambda2 = 0.3", service.as_str());
        println!("{:>5} {:>22} {:>22}", "b", "E[W1] for d = 0,2,8", "E[W2] for d = 0,2,8");
        for i in 0..=10 {
            let b = i as f64 / 10.0;
            let mut w1 = Vec::new();
            let mut w2 = Vec::new();
            for d in [0.0, 2.0, 8.0] {
                let m = dapq_means(&QueueConfig::new(0.5, 0.3, 1.0, b, d, service), &tol)?;
                w1.push(format!("{:.3}", m.mean_w1));
                w2.push(format!("{:.3}", m.mean_w2));
            }
            println!("{b:>5.1} {:>22} {:>22}", w1.join(" "), w2.join(" "));
        }
        println!();
    }
    Ok(())
}
