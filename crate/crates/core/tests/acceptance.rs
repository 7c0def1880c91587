//! Acceptance criteria 1-11. Prints one PASS/FAIL line per criterion and
//! exits non-zero if any criterion fails.

use std::path::Path;
use std::process::Command;
use std::time::Instant;

use dapq::approx::{cdf_sup_diff, kpi_mean_threshold, zexp_from_mean, MeanThreshold};
use dapq::kpi::{feasible_region, in_region, policy_sweep};
use dapq::markov::{md1_exact_term, md1_stationary, md1_tail_ratio};
use dapq::mean_wait::{dapq_means, fcfs_mean, npq_class1_mean, npq_class2_mean, x_table};
use dapq::model::conservation_rhs;
use dapq::simulate::{run_replicated, SimConfig};
use dapq::transforms::{class2_cdf_dapq, fcfs_mm1_lst, invert_to_cdf};
use dapq::{GridSpec, Kpi, KpiClass, QueueConfig, ServiceKind, ToleranceConfig};

const SEED: u64 = 20240501;

type Criterion = (&'static str, fn() -> Outcome);

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn tol() -> ToleranceConfig {
    ToleranceConfig::default()
}

fn both(l1: f64, l2: f64, b: f64, d: f64) -> [QueueConfig; 2] {
    [QueueConfig::mm1(l1, l2, b, d), QueueConfig::md1(l1, l2, b, d)]
}

fn conservation() -> Outcome {
    let pairs = [
        (0.05, 0.05),
        (0.05, 0.85),
        (0.2, 0.7),
        (0.3, 0.3),
        (0.5, 0.3),
        (0.45, 0.45),
        (0.7, 0.2),
        (0.85, 0.05),
    ];
    let started = Instant::now();
    let mut worst = 0.0f64;
    let mut count = 0;
    for &(l1, l2) in &pairs {
        for b in [0.0, 0.25, 0.5, 0.75, 1.0] {
            for d in [0.0, 1.0, 2.0, 4.0, 8.0] {
                for cfg in both(l1, l2, b, d) {
                    let m = match dapq_means(&cfg, &tol()) {
                        Ok(m) => m,
                        Err(e) => return outcome(false, format!("{cfg:?}: {e}")),
                    };
                    let lhs = cfg.rho1() * m.mean_w1 + cfg.rho2() * m.mean_w2;
                    worst = worst.max((lhs - conservation_rhs(&cfg).unwrap()).abs());
                    count += 1;
                }
            }
        }
    }
    let secs = started.elapsed().as_secs_f64();
    outcome(
        worst < 1e-8 && secs < 300.0,
        format!("{count} configs, max residual {worst:.2e} (< 1e-8), {secs:.1}s (< 300s)"),
    )
}

fn boundaries() -> Outcome {
    let mut worst = 0.0f64;
    for (l1, l2) in [(0.5, 0.3), (0.2, 0.7), (0.1, 0.1), (0.6, 0.3)] {
        for d in [0.0, 1.0, 2.0, 4.0] {
            for cfg in both(l1, l2, 0.0, d) {
                let m = dapq_means(&cfg, &tol()).unwrap();
                worst = worst
                    .max((m.mean_w1 - npq_class1_mean(&cfg).unwrap()).abs())
                    .max((m.mean_w2 - npq_class2_mean(&cfg).unwrap()).abs());
            }
        }
        for cfg in both(l1, l2, 1.0, 0.0) {
            let m = dapq_means(&cfg, &tol()).unwrap();
            let f = fcfs_mean(&cfg).unwrap();
            worst = worst.max((m.mean_w1 - f).abs()).max((m.mean_w2 - f).abs());
        }
    }
    outcome(
        worst < 1e-10,
        format!("max deviation from NPQ/FCFS closed forms {worst:.2e} (< 1e-10)"),
    )
}

fn long_delay_limit() -> Outcome {
    let mut worst = 0.0f64;
    let mut parts = Vec::new();
    for b in [0.5, 1.0] {
        for cfg in both(0.5, 0.3, b, 50.0) {
            let w2 = dapq_means(&cfg, &tol()).unwrap().mean_w2;
            let gap = (w2 - npq_class2_mean(&cfg).unwrap()).abs();
            worst = worst.max(gap);
            parts.push(format!("{} b={b}: {gap:.2e}", cfg.service.as_str()));
        }
    }
    outcome(
        worst < 1e-4,
        format!(
            "rho=0.8 (0.5, 0.3), d=50, |W2(d) - W2(NPQ)|: {} (< 1e-4)",
            parts.join(", ")
        ),
    )
}

fn x_table_oracle() -> Outcome {
    let mut worst = 0.0f64;
    for (l1, l2) in [(0.5, 0.3), (0.2, 0.7)] {
        let rates = QueueConfig::mm1(l1, l2, 0.5, 1.0).validate().unwrap();
        let table = x_table(&rates, 25);
        // dense truncated sub-generator on states 1..=n
        let n = 400;
        let mut p = vec![vec![0.0; n + 1]; n + 1];
        for i in 1..=n {
            if i < n {
                p[i][i + 1] = rates.p_up;
            }
            if i > 1 {
                p[i][i - 1] = rates.q_down;
            }
        }
        let mut v: Vec<f64> = (0..=n)
            .map(|l| if l == 0 { 0.0 } else { rates.rho.powi(l as i32) })
            .collect();
        for k in 1..=25 {
            let next: Vec<f64> = (0..=n).map(|j| (1..=n).map(|i| v[i] * p[i][j]).sum()).collect();
            v = next;
            for (l, vl) in v.iter().enumerate().take(k + 1).skip(1) {
                worst = worst.max((table.get(k, l, rates.rho) - vl).abs());
            }
        }
    }
    outcome(
        worst < 1e-12,
        format!("max entrywise gap {worst:.2e} for k <= 25 (< 1e-12)"),
    )
}

fn md1_distribution() -> Outcome {
    let mut mass_err = 0.0f64;
    let mut ratio_err = 0.0f64;
    for rho in [0.5, 0.8, 0.9] {
        let pi = md1_stationary(rho, &tol()).unwrap();
        mass_err = mass_err.max((pi.total_mass() - 1.0).abs());
        let ratio = md1_tail_ratio(rho, &tol()).unwrap();
        for i in 15..=25 {
            let r = md1_exact_term(rho, i + 1).0 / md1_exact_term(rho, i).0;
            ratio_err = ratio_err.max((r - ratio).abs());
        }
    }
    outcome(
        mass_err < 1e-8 && ratio_err < 1e-4,
        format!("|sum pi - 1| {mass_err:.2e} (< 1e-8), ratio gap i=15..25 {ratio_err:.2e} (< 1e-4)"),
    )
}

fn inversion_oracle() -> Outcome {
    let cfg = QueueConfig::mm1(0.5, 0.3, 1.0, 0.0);
    let grid: Vec<f64> = (0..=400).map(|i| i as f64 * 0.05).collect();
    let curve = match invert_to_cdf(&fcfs_mm1_lst(&cfg), &grid, &tol()) {
        Ok(c) => c,
        Err(e) => return outcome(false, e.to_string()),
    };
    let worst = grid
        .iter()
        .zip(&curve.f)
        .map(|(&t, f)| (f - (1.0 - 0.8 * (-0.2 * t).exp())).abs())
        .fold(0.0, f64::max);
    outcome(worst < 1e-6, format!("sup error on [0, 20] {worst:.2e} (< 1e-6)"))
}

fn simulation_cross_check() -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for (l1, l2) in [(0.5, 0.3), (0.2, 0.7)] {
        for service in [ServiceKind::Exponential, ServiceKind::Deterministic] {
            let cfg = QueueConfig::new(l1, l2, 1.0, 0.5, 2.0, service);
            let started = Instant::now();
            let grid = GridSpec {
                step: 0.05,
                t_max: None,
            }
            .abscissae(&cfg);
            let sim = run_replicated(&SimConfig::new(cfg, SEED), &grid).unwrap();
            let means = dapq_means(&cfg, &tol()).unwrap();
            for (class, analytic) in [(1u8, means.mean_w1), (2, means.mean_w2)] {
                let s = sim.class(class).unwrap();
                let z = (analytic - s.mean).abs() / s.std_error;
                pass &= z <= 3.0;
                parts.push(format!("{} ({l1},{l2}) W{class} {z:.2} SE", service.as_str()));
            }
            if service == ServiceKind::Exponential {
                let exact = class2_cdf_dapq(&cfg, &grid, &tol()).unwrap();
                let (dist, at) = cdf_sup_diff(&exact, &sim.class(2).unwrap().curve).unwrap();
                pass &= dist < 0.01;
                parts.push(format!("exp ({l1},{l2}) class-2 sup {dist:.4} at t={at:.2} (< 0.01)"));
            }
            let secs = started.elapsed().as_secs_f64();
            pass &= secs < 120.0;
        }
    }
    outcome(pass, format!("seed {SEED}: {}", parts.join("; ")))
}

fn approximation_quality() -> Outcome {
    let mut worst = 0.0f64;
    let mut parts = Vec::new();
    for d in [0.0, 2.0, 6.0] {
        let cfg = QueueConfig::mm1(0.5, 0.3, 0.5, d);
        let grid = GridSpec {
            step: 0.05,
            t_max: None,
        }
        .abscissae(&cfg);
        let sim = run_replicated(&SimConfig::new(cfg, SEED), &grid).unwrap();
        let w1 = dapq_means(&cfg, &tol()).unwrap().mean_w1;
        let z = zexp_from_mean(cfg.rho(), w1).unwrap().curve(&grid);
        let (dist, _) = cdf_sup_diff(&z, &sim.class(1).unwrap().curve).unwrap();
        worst = worst.max(dist);
        parts.push(format!("d={d}: {dist:.4}"));
    }
    outcome(
        worst <= 0.07,
        format!("ZExp vs simulated class-1 sup: {} (<= 0.07)", parts.join(", ")),
    )
}

fn kpi_conclusions() -> Outcome {
    let ds: Vec<f64> = (0..=8).map(|d| d as f64).collect();
    let mut pass = true;
    let mut parts = Vec::new();

    let k2 = Kpi::new(4.0, 0.85, KpiClass::Two).unwrap();
    let region2 = feasible_region(&k2, 1.0, 0.01, &tol()).unwrap();
    for (l1, l2) in [(0.1, 0.52), (0.2, 0.41), (0.3, 0.3)] {
        let inside = region2.contains(l1, l2);
        let points = policy_sweep(&QueueConfig::mm1(l1, l2, 0.0, 0.0), &k2, &ds, &tol()).unwrap();
        let nondecreasing = points.windows(2).all(|w| w[1].b_star >= w[0].b_star);
        let feasible: Vec<_> = points.iter().filter(|p| p.feasible).collect();
        let argmin = feasible
            .iter()
            .min_by(|a, b| a.mean_w1.total_cmp(&b.mean_w1))
            .map(|p| p.d);
        pass &= inside && nondecreasing && argmin == Some(0.0);
        parts.push(format!(
            "class 2 ({l1},{l2}): inside={inside} b* nondecreasing={nondecreasing} argmin W1 d={argmin:?} over {} feasible d",
            feasible.len()
        ));
    }

    let k1 = Kpi::new(2.0, 0.9, KpiClass::One).unwrap();
    let region1 = feasible_region(&k1, 1.0, 0.01, &tol()).unwrap();
    for (l1, l2) in [(0.02, 0.6), (0.05, 0.55), (0.1, 0.47)] {
        let inside = region1.contains(l1, l2);
        let cfg = QueueConfig::mm1(l1, l2, 0.0, 0.0);
        let MeanThreshold::Bound(m) = kpi_mean_threshold(cfg.rho(), &k1).unwrap() else {
            return outcome(false, "threshold unexpectedly trivial");
        };
        let points = policy_sweep(&cfg, &k1, &ds, &tol()).unwrap();
        let interior = points.iter().all(|p| p.feasible && p.b_star > 0.0 && p.b_star < 1.0);
        let w1_gap = points.iter().map(|p| (p.mean_w1 - m).abs()).fold(0.0, f64::max);
        let w2_spread = points
            .iter()
            .map(|p| (p.mean_w2 - points[0].mean_w2).abs())
            .fold(0.0, f64::max);
        // class-2 CDFs along the sweep: recorded, not asserted
        let grid = GridSpec {
            step: 0.05,
            t_max: None,
        }
        .abscissae(&cfg);
        let base = class2_cdf_dapq(&cfg.with_b(points[0].b_star).with_d(0.0), &grid, &tol()).unwrap();
        let cdf_spread = points
            .iter()
            .map(|p| {
                let c = class2_cdf_dapq(&cfg.with_b(p.b_star).with_d(p.d), &grid, &tol()).unwrap();
                cdf_sup_diff(&base, &c).unwrap().0
            })
            .fold(0.0, f64::max);
        pass &= inside && interior && w1_gap < 1e-6 && w2_spread < 1e-4;
        parts.push(format!(
            "class 1 ({l1},{l2}): inside={inside} interior={interior} |W1 - m*| {w1_gap:.1e} W2 spread {w2_spread:.1e} class-2 CDF spread {cdf_spread:.1e}"
        ));
    }
    outcome(pass, parts.join("; "))
}

fn region_sliver() -> Outcome {
    let k2 = Kpi::new(4.0, 0.85, KpiClass::Two).unwrap();
    let k1 = Kpi::new(2.0, 0.9, KpiClass::One).unwrap();
    let step = 0.0025;
    let mut hits = Vec::new();
    for i in 0..400 {
        for j in 0..400 {
            let (l1, l2) = (i as f64 * step, j as f64 * step);
            if l1 + l2 >= 0.99 {
                continue;
            }
            if in_region(&k1, l1, l2, 1.0, &tol()).unwrap() && in_region(&k2, l1, l2, 1.0, &tol()).unwrap() {
                hits.push((l1, l2));
            }
        }
    }
    if hits.is_empty() {
        return outcome(false, "intersection is empty");
    }
    let (mut a, mut b, mut c, mut d) = (f64::MAX, f64::MIN, f64::MAX, f64::MIN);
    for &(x, y) in &hits {
        a = a.min(x);
        b = b.max(x);
        c = c.min(y);
        d = d.max(y);
    }
    let inside = a > 0.0 && b < 0.12 && c > 0.5 && d < 0.7;
    outcome(
        inside,
        format!(
            "{} grid points, lambda1 in [{a:.4}, {b:.4}], lambda2 in [{c:.4}, {d:.4}] (box (0, 0.12) x (0.5, 0.7))",
            hits.len()
        ),
    )
}

fn dapq_bin(args: &[&str], dir: &Path) -> Result<(), String> {
    let status = Command::new(env!("CARGO_BIN_EXE_dapq"))
        .args(args)
        .current_dir(dir)
        .status()
        .map_err(|e| e.to_string())?;
    if status.success() {
        Ok(())
    } else {
        Err(format!("dapq {args:?} exited with {status}"))
    }
}

fn determinism() -> Outcome {
    let dir = std::env::temp_dir().join(format!("dapq-acceptance-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let jobs: [(&str, &[&str]); 4] = [
        (
            "mean",
            &[
                "mean",
                "--lam1",
                "0.5",
                "--lam2",
                "0.3",
                "--service",
                "det",
                "--b",
                "0:1:0.25",
                "--d",
                "0:4",
            ],
        ),
        (
            "cdf",
            &[
                "cdf",
                "--lam1",
                "0.5",
                "--lam2",
                "0.3",
                "--kind",
                "dapq2,npq2,zexp1",
                "--b",
                "0.5",
                "--d",
                "2",
            ],
        ),
        (
            "kpi",
            &[
                "kpi",
                "--class",
                "2",
                "--w",
                "4",
                "--p",
                "0.85",
                "--lam1",
                "0.2",
                "--lam2",
                "0.41",
                "--sweep-d",
                "0:4",
            ],
        ),
        (
            "sim",
            &[
                "simulate", "--lam1", "0.5", "--lam2", "0.3", "--b", "0.5", "--d", "2", "--seed", "7", "--reps", "5",
            ],
        ),
    ];
    let mut compared = 0;
    for (name, args) in jobs {
        let mut outputs = Vec::new();
        for run in ["a", "b"] {
            let out = format!("{name}_{run}.csv");
            let mut full: Vec<&str> = args.to_vec();
            full.extend(["--out", &out]);
            if let Err(e) = dapq_bin(&full, &dir) {
                return outcome(false, e);
            }
            outputs.push(std::fs::read(dir.join(&out)).unwrap());
        }
        let manifest = format!("{name}_a.csv.manifest.json");
        let replayed = format!("{name}_r.csv");
        if let Err(e) = dapq_bin(&["replay", &manifest, "--out", &replayed], &dir) {
            return outcome(false, e);
        }
        outputs.push(std::fs::read(dir.join(&replayed)).unwrap());
        if outputs[0] != outputs[1] || outputs[0] != outputs[2] {
            return outcome(false, format!("{name}: outputs differ between runs"));
        }
        compared += 1;
    }
    let _ = std::fs::remove_dir_all(&dir);
    outcome(
        true,
        format!("{compared} subcommands bit-identical across two runs and a manifest replay"),
    )
}

fn main() {
    let criteria: [Criterion; 11] = [
        ("conservation law", conservation),
        ("boundary reductions", boundaries),
        ("long-delay limit", long_delay_limit),
        ("x-table vs matrix products", x_table_oracle),
        ("M/D/1 stationary distribution", md1_distribution),
        ("transform inversion oracle", inversion_oracle),
        ("simulation cross-validation", simulation_cross_check),
        ("ZExp approximation quality", approximation_quality),
        ("KPI conclusions", kpi_conclusions),
        ("region intersection", region_sliver),
        ("determinism", determinism),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let started = Instant::now();
        let o = check();
        let verdict = if o.pass { "PASS" } else { "FAIL" };
        println!(
            "criterion {:>2} {verdict}: {name}: {} [{:.1}s]",
            i + 1,
            o.detail,
            started.elapsed().as_secs_f64()
        );
        failed += usize::from(!o.pass);
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
