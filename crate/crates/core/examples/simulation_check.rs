//! Replicated simulation against the exact means and class-2 CDF.
//!
//! `cargo run --release --example simulation_check [seed]`

use dapq::approx::cdf_sup_diff;
use dapq::mean_wait::dapq_means;
use dapq::simulate::{run_replicated, SimConfig};
use dapq::transforms::class2_cdf_dapq;
use dapq::{GridSpec, QueueConfig, ServiceKind, ToleranceConfig};

fn main() -> dapq::Result<()> {
    let seed = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(20240501);
    let tol = ToleranceConfig::default();
    for (l1, l2) in [(0.5, 0.3), (0.2, 0.7)] {
        for service in [ServiceKind::Exponential, ServiceKind::Deterministic] {
            let cfg = QueueConfig::new(l1, l2, 1.0, 0.5, 2.0, service);
            let grid = GridSpec {
                step: 0.05,
                t_max: None,
            }
            .abscissae(&cfg);
            let sim = run_replicated(&SimConfig::new(cfg, seed), &grid)?;
            let exact = dapq_means(&cfg, &tol)?;
            println!(
                "{} lambda = ({l1}, {l2}), b = 0.5, d = 2, seed {seed}",
                service.as_str()
            );
            for (class, mean) in [(1, exact.mean_w1), (2, exact.mean_w2)] {
                let s = sim.class(class).expect("both classes arrive");
                println!(
                    "  E[W{class}] exact {mean:.4}, simulated {:.4} +- {:.4} ({:.2} SE)",
                    s.mean,
                    s.std_error,
                    (mean - s.mean).abs() / s.std_error
                );
            }
            if service == ServiceKind::Exponential {
                let curve = class2_cdf_dapq(&cfg, &grid, &tol)?;
                let (dist, at) = cdf_sup_diff(&curve, &sim.class(2).expect("class 2").curve)?;
                println!("  class-2 CDF sup distance {dist:.4} at t = {at:.2}");
            }
        }
    }
    Ok(())
}
