//! Zero-inflated exponential approximation of the class-1 wait, built from
//! the exact mean, compared with simulation.
//!
//! `cargo run --release --example zexp_approximation`

use dapq::approx::{cdf_sup_diff, zexp_from_mean};
use dapq::mean_wait::dapq_means;
use dapq::simulate::{run_replicated, SimConfig};
use dapq::{GridSpec, QueueConfig, ToleranceConfig};

fn main() -> dapq::Result<()> {
    let tol = ToleranceConfig::default();
    for d in [0.0, 2.0, 6.0] {
        let cfg = QueueConfig::mm1(0.5, 0.3, 0.5, d);
        let grid = GridSpec {
            step: 0.05,
            t_max: None,
        }
        .abscissae(&cfg);
        let w1 = dapq_means(&cfg, &tol)?.mean_w1;
        let z = zexp_from_mean(cfg.rho(), w1)?;
        let sim = run_replicated(&SimConfig::new(cfg, 20240501), &grid)?;
        let (dist, at) = cdf_sup_diff(&z.curve(&grid), &sim.class(1).expect("class 1").curve)?;
        println!(
            "d = {d}: E[W1] = {w1:.4}, ZExp(mass {:.2}, rate {:.4}), sup distance {dist:.4} at t = {at:.2}",
            z.rho_mass, z.alpha
        );
    }
    Ok(())
}
