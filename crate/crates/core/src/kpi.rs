//! KPI-driven choice of the accumulation rate and feasible regions.
//!
//! A class-2 KPI `P(W2 <= w) >= p` asks for the smallest `b` meeting it, a
//! class-1 KPI for the largest. Class-1 compliance is judged through the
//! zero-inflated exponential approximation, which turns it into a bound on
//! the exact class-1 mean.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::approx::{fcfs_zexp, kpi_mean_threshold, npq_class1_zexp, MeanThreshold};
use crate::error::{Error, Result};
use crate::mean_wait::dapq_means;
use crate::model::{Kpi, KpiClass, QueueConfig, ServiceKind, ToleranceConfig};
use crate::numeric::bisect;
use crate::transforms::{invert_at, npq_class2_lst, Class2Cdf};

/// Points of the pre-bisection monotonicity check in `b`.
const MONOTONE_CHECK_POINTS: usize = 6;
/// Resolution of boundary searches in `lambda2`.
pub const BOUNDARY_TOL: f64 = 1e-4;
/// Occupancy ceiling for boundary searches.
const MAX_RHO: f64 = 0.99;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PolicyPoint {
    pub d: f64,
    pub b_star: f64,
    pub mean_w1: f64,
    pub mean_w2: f64,
    pub feasible: bool,
    /// `P(W <= w)` for class 2, the class-1 mean for class 1, at `(d, b_star)`.
    pub constraint_value: f64,
}

fn require_exponential(config: &QueueConfig) -> Result<()> {
    if config.service != ServiceKind::Exponential {
        return Err(Error::Unsupported(
            "KPI search is available for exponential service only".into(),
        ));
    }
    Ok(())
}

fn point(
    config: &QueueConfig,
    b: f64,
    feasible: bool,
    constraint_value: f64,
    tol: &ToleranceConfig,
) -> Result<PolicyPoint> {
    let means = dapq_means(&config.with_b(b), tol)?;
    Ok(PolicyPoint {
        d: config.d,
        b_star: b,
        mean_w1: means.mean_w1,
        mean_w2: means.mean_w2,
        feasible,
        constraint_value,
    })
}

/// Smallest `b` with `P(W2 <= w) >= p` at the configured delay.
pub fn b_star_class2(config: &QueueConfig, kpi: &Kpi, tol: &ToleranceConfig) -> Result<PolicyPoint> {
    require_exponential(config)?;
    if kpi.class != KpiClass::Two {
        return Err(Error::Unsupported("b_star_class2 needs a class-2 KPI".into()));
    }
    let base = config.with_b(0.0);
    base.validate()?;
    let mut cdf = Class2Cdf::new(&base, tol)?;
    let mut value_at = |b: f64| -> Result<f64> {
        cdf.set_accumulation(base.lambda1, b);
        Ok(cdf.at(kpi.target_w, tol)?.0)
    };
    let at_zero = value_at(0.0)?;
    if at_zero >= kpi.compliance_p {
        return point(&base, 0.0, true, at_zero, tol);
    }
    let mut prev = at_zero;
    let slack = 10.0 * tol.eps_invert;
    for i in 1..MONOTONE_CHECK_POINTS {
        let b = i as f64 / (MONOTONE_CHECK_POINTS - 1) as f64;
        let v = value_at(b)?;
        if v < prev - slack {
            return Err(Error::NonMonotone(format!(
                "P(W2 <= {}) drops from {prev} to {v} at b = {b} (d = {})",
                kpi.target_w, base.d
            )));
        }
        prev = v;
    }
    let at_one = prev;
    if at_one < kpi.compliance_p {
        return point(&base, 1.0, false, at_one, tol);
    }
    let mut failure = None;
    let b = bisect(
        |b| match value_at(b) {
            Ok(v) => v - kpi.compliance_p,
            Err(e) => {
                failure.get_or_insert(e);
                0.0
            }
        },
        0.0,
        1.0,
        tol.eps_root,
    );
    if let Some(e) = failure {
        return Err(e);
    }
    let b = b.ok_or_else(|| Error::RootBracketFailure("class-2 KPI in b".into()))?;
    // move to the feasible side of the bracket
    let mut b_star = b;
    let mut v = value_at(b_star)?;
    while v < kpi.compliance_p && b_star < 1.0 {
        b_star = (b_star + tol.eps_root).min(1.0);
        v = value_at(b_star)?;
    }
    point(&base, b_star, true, v, tol)
}

/// Largest `b` whose exact class-1 mean stays within the ZExp threshold.
pub fn b_star_class1(config: &QueueConfig, kpi: &Kpi, tol: &ToleranceConfig) -> Result<PolicyPoint> {
    require_exponential(config)?;
    let base = config.with_b(0.0);
    let rates = base.validate()?;
    let mean_at = |b: f64| -> Result<f64> { Ok(dapq_means(&base.with_b(b), tol)?.mean_w1) };
    let threshold = match kpi_mean_threshold(rates.rho, kpi)? {
        MeanThreshold::AlwaysSatisfied => {
            let m = mean_at(1.0)?;
            return point(&base, 1.0, true, m, tol);
        }
        MeanThreshold::Bound(m) => m,
    };
    let at_zero = mean_at(0.0)?;
    if at_zero > threshold {
        return point(&base, 0.0, false, at_zero, tol);
    }
    let at_one = mean_at(1.0)?;
    if at_one <= threshold {
        return point(&base, 1.0, true, at_one, tol);
    }
    let mut failure = None;
    let b = bisect(
        |b| match mean_at(b) {
            Ok(m) => m - threshold,
            Err(e) => {
                failure.get_or_insert(e);
                0.0
            }
        },
        0.0,
        1.0,
        tol.eps_root,
    );
    if let Some(e) = failure {
        return Err(e);
    }
    let mut b_star = b.ok_or_else(|| Error::RootBracketFailure("class-1 KPI in b".into()))?;
    let mut m = mean_at(b_star)?;
    while m > threshold && b_star > 0.0 {
        b_star = (b_star - tol.eps_root).max(0.0);
        m = mean_at(b_star)?;
    }
    point(&base, b_star, true, m, tol)
}

pub fn b_star(config: &QueueConfig, kpi: &Kpi, tol: &ToleranceConfig) -> Result<PolicyPoint> {
    match kpi.class {
        KpiClass::One => b_star_class1(config, kpi, tol),
        KpiClass::Two => b_star_class2(config, kpi, tol),
    }
}

/// `b*(d)` for each delay, in input order. Interior points must show the
/// expected trend: class-1 mean nondecreasing in `d` for class-2 KPIs,
/// class-2 mean constant for class-1 KPIs.
pub fn policy_sweep(
    config: &QueueConfig,
    kpi: &Kpi,
    d_values: &[f64],
    tol: &ToleranceConfig,
) -> Result<Vec<PolicyPoint>> {
    let points: Vec<PolicyPoint> = d_values
        .par_iter()
        .map(|&d| b_star(&config.with_d(d), kpi, tol))
        .collect::<Result<_>>()?;
    check_sweep_trend(&points, kpi.class)?;
    Ok(points)
}

pub fn check_sweep_trend(points: &[PolicyPoint], class: KpiClass) -> Result<()> {
    let interior: Vec<&PolicyPoint> = points
        .iter()
        .filter(|p| p.feasible && p.b_star > 0.0 && p.b_star < 1.0)
        .collect();
    match class {
        KpiClass::Two => {
            let mut sorted = interior.clone();
            sorted.sort_by(|a, b| a.d.total_cmp(&b.d));
            for w in sorted.windows(2) {
                if w[1].mean_w1 < w[0].mean_w1 - 1e-6 {
                    return Err(Error::NonMonotone(format!(
                        "class-1 mean falls from {} at d = {} to {} at d = {}",
                        w[0].mean_w1, w[0].d, w[1].mean_w1, w[1].d
                    )));
                }
            }
        }
        KpiClass::One => {
            if let Some(first) = interior.first() {
                for p in &interior {
                    if (p.mean_w2 - first.mean_w2).abs() > 1e-4 {
                        return Err(Error::NonMonotone(format!(
                            "class-2 mean {} at d = {} differs from {} at d = {}",
                            p.mean_w2, p.d, first.mean_w2, first.d
                        )));
                    }
                }
            }
        }
    }
    Ok(())
}

/// Whether the endpoint discipline meets the KPI at `(lambda1, lambda2)`.
/// `favorable` selects FCFS for class 2 and NPQ for class 1.
pub fn endpoint_meets(
    kpi: &Kpi,
    lambda1: f64,
    lambda2: f64,
    mu: f64,
    favorable: bool,
    tol: &ToleranceConfig,
) -> Result<bool> {
    let cfg = QueueConfig::new(lambda1, lambda2, mu, 0.0, 0.0, ServiceKind::Exponential);
    cfg.validate()?;
    let value = match (kpi.class, favorable) {
        (KpiClass::Two, true) | (KpiClass::One, false) => fcfs_zexp(&cfg).cdf(kpi.target_w),
        (KpiClass::One, true) => npq_class1_zexp(&cfg).cdf(kpi.target_w),
        (KpiClass::Two, false) => invert_at(&npq_class2_lst(&cfg, tol)?, kpi.target_w, tol)?.0,
    };
    Ok(value >= kpi.compliance_p)
}

/// Nontrivial tuning region: the favorable endpoint meets the KPI and the
/// unfavorable one does not.
pub fn in_region(kpi: &Kpi, lambda1: f64, lambda2: f64, mu: f64, tol: &ToleranceConfig) -> Result<bool> {
    if (lambda1 + lambda2) / mu >= 1.0 {
        return Ok(false);
    }
    Ok(
        endpoint_meets(kpi, lambda1, lambda2, mu, true, tol)?
            && !endpoint_meets(kpi, lambda1, lambda2, mu, false, tol)?,
    )
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeasibleRegion {
    pub kpi: Kpi,
    pub mu: f64,
    /// Where the unfavorable endpoint stops meeting the KPI.
    pub lower_boundary: Vec<(f64, f64)>,
    /// Where the favorable endpoint stops meeting the KPI.
    pub upper_boundary: Vec<(f64, f64)>,
}

impl FeasibleRegion {
    fn interpolate(boundary: &[(f64, f64)], lambda1: f64) -> Option<f64> {
        let i = boundary.partition_point(|p| p.0 <= lambda1);
        if i == 0 {
            return None;
        }
        if i == boundary.len() {
            let last = boundary[i - 1];
            return ((lambda1 - last.0).abs() < 1e-12).then_some(last.1);
        }
        let (a, b) = (boundary[i - 1], boundary[i]);
        Some(a.1 + (b.1 - a.1) * (lambda1 - a.0) / (b.0 - a.0))
    }

    /// Membership from the interpolated boundaries.
    pub fn contains(&self, lambda1: f64, lambda2: f64) -> bool {
        match (
            Self::interpolate(&self.lower_boundary, lambda1),
            Self::interpolate(&self.upper_boundary, lambda1),
        ) {
            (Some(lo), Some(hi)) => lambda2 > lo && lambda2 < hi,
            _ => false,
        }
    }
}

/// Largest `lambda2` in `[0, MAX_RHO mu - lambda1]` where the endpoint still meets the KPI.
fn boundary_lambda2(kpi: &Kpi, lambda1: f64, mu: f64, favorable: bool, tol: &ToleranceConfig) -> Result<Option<f64>> {
    let hi = MAX_RHO * mu - lambda1;
    if hi <= 0.0 || !endpoint_meets(kpi, lambda1, 0.0, mu, favorable, tol)? {
        return Ok(None);
    }
    if endpoint_meets(kpi, lambda1, hi, mu, favorable, tol)? {
        return Ok(Some(hi));
    }
    let (mut lo, mut up) = (0.0, hi);
    while up - lo > BOUNDARY_TOL {
        let mid = 0.5 * (lo + up);
        if endpoint_meets(kpi, lambda1, mid, mu, favorable, tol)? {
            lo = mid;
        } else {
            up = mid;
        }
    }
    Ok(Some(0.5 * (lo + up)))
}

pub fn feasible_region(kpi: &Kpi, mu: f64, resolution: f64, tol: &ToleranceConfig) -> Result<FeasibleRegion> {
    if !(resolution > 0.0) {
        return Err(Error::OutOfRange {
            name: "resolution",
            value: resolution,
            expected: "> 0",
        });
    }
    let n = ((MAX_RHO * mu) / resolution).floor() as usize;
    let lambdas: Vec<f64> = (0..=n).map(|i| i as f64 * resolution).collect();
    let rows: Vec<(f64, Option<f64>, Option<f64>)> = lambdas
        .par_iter()
        .map(|&l1| -> Result<_> {
            Ok((
                l1,
                boundary_lambda2(kpi, l1, mu, false, tol)?,
                boundary_lambda2(kpi, l1, mu, true, tol)?,
            ))
        })
        .collect::<Result<_>>()?;
    let mut lower = Vec::new();
    let mut upper = Vec::new();
    for (l1, lo, up) in rows {
        let lo = lo.unwrap_or(0.0);
        if let Some(up) = up.filter(|&up| up > lo) {
            upper.push((l1, up));
            lower.push((l1, lo));
        }
    }
    Ok(FeasibleRegion {
        kpi: *kpi,
        mu,
        lower_boundary: lower,
        upper_boundary: upper,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tol() -> ToleranceConfig {
        ToleranceConfig::default()
    }

    fn kpi2() -> Kpi {
        Kpi::new(4.0, 0.85, KpiClass::Two).unwrap()
    }

    fn kpi1() -> Kpi {
        Kpi::new(2.0, 0.9, KpiClass::One).unwrap()
    }

    #[test]
    fn class2_clamps() {
        let easy = b_star_class2(&QueueConfig::mm1(0.05, 0.1, 0.5, 1.0), &kpi2(), &tol()).unwrap();
        assert_eq!(easy.b_star, 0.0);
        assert!(easy.feasible);
        let hard = b_star_class2(&QueueConfig::mm1(0.5, 0.45, 0.5, 1.0), &kpi2(), &tol()).unwrap();
        assert!(!hard.feasible);
    }

    #[test]
    fn class2_interior_hits_target() {
        let p = b_star_class2(&QueueConfig::mm1(0.3, 0.3, 0.5, 1.0), &kpi2(), &tol()).unwrap();
        assert!(p.feasible && p.b_star > 0.0 && p.b_star < 1.0, "{p:?}");
        assert!((p.constraint_value - 0.85).abs() < 1e-6);
        let grid = [0.0, 4.0];
        let curve =
            crate::transforms::class2_cdf_dapq(&QueueConfig::mm1(0.3, 0.3, p.b_star, 1.0), &grid, &tol()).unwrap();
        assert!((curve.f[1] - 0.85).abs() < 1e-6);
    }

    #[test]
    fn class1_threshold_hit_and_clamps() {
        let p = b_star_class1(&QueueConfig::mm1(0.05, 0.6, 0.0, 1.0), &kpi1(), &tol()).unwrap();
        let rho: f64 = 0.65;
        let m = 2.0 * rho / (rho / 0.1).ln();
        assert!(p.feasible && p.b_star > 0.0 && p.b_star < 1.0, "{p:?}");
        assert!((p.mean_w1 - m).abs() < 1e-6);
        let always = b_star_class1(&QueueConfig::mm1(0.02, 0.05, 0.0, 1.0), &kpi1(), &tol()).unwrap();
        assert_eq!(always.b_star, 1.0);
        assert!(always.feasible);
        let never = b_star_class1(&QueueConfig::mm1(0.6, 0.35, 0.0, 1.0), &kpi1(), &tol()).unwrap();
        assert!(!never.feasible && never.b_star == 0.0);
    }

    #[test]
    fn single_delay_sweep_matches_direct_call() {
        let cfg = QueueConfig::mm1(0.3, 0.3, 0.0, 0.0);
        let sweep = policy_sweep(&cfg, &kpi2(), &[2.0], &tol()).unwrap();
        let direct = b_star_class2(&cfg.with_d(2.0), &kpi2(), &tol()).unwrap();
        assert_eq!(sweep, vec![direct]);
    }

    #[test]
    fn fcfs_boundary_is_an_occupancy_line() {
        let kpi = kpi2();
        // 1 - rho exp(-(1 - rho) w) = p solved in rho
        let rho_star = bisect(|r| 1.0 - r * (-(1.0 - r) * 4.0).exp() - 0.85, 0.01, 0.99, 1e-12).unwrap();
        for l1 in [0.0, 0.2, 0.4] {
            let l2 = boundary_lambda2(&kpi, l1, 1.0, true, &tol()).unwrap().unwrap();
            assert!((l1 + l2 - rho_star).abs() < 2.0 * BOUNDARY_TOL);
        }
    }

    #[test]
    fn region_sanity_spot_checks() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for kpi in [kpi2(), kpi1()] {
            let region = feasible_region(&kpi, 1.0, 0.02, &tol()).unwrap();
            for w in region.lower_boundary.windows(2).chain(region.upper_boundary.windows(2)) {
                assert!(w[1].1 <= w[0].1 + BOUNDARY_TOL);
            }
            let (mut below, mut above) = (0, 0);
            while below < 50 || above < 50 {
                let i = rng.gen_range(0..region.upper_boundary.len());
                let (l1, lo) = region.lower_boundary[i];
                let hi = region.upper_boundary[i].1;
                assert!(lo < hi);
                let l2: f64 = rng.gen_range(0.0..0.99 - l1);
                if l2 < lo - BOUNDARY_TOL && below < 50 {
                    assert!(endpoint_meets(&kpi, l1, l2, 1.0, true, &tol()).unwrap());
                    assert!(endpoint_meets(&kpi, l1, l2, 1.0, false, &tol()).unwrap());
                    below += 1;
                } else if l2 > hi + BOUNDARY_TOL && above < 50 {
                    assert!(!endpoint_meets(&kpi, l1, l2, 1.0, true, &tol()).unwrap());
                    above += 1;
                } else if l2 > lo + BOUNDARY_TOL && l2 < hi - BOUNDARY_TOL {
                    assert!(in_region(&kpi, l1, l2, 1.0, &tol()).unwrap());
                    assert!(region.contains(l1, l2));
                }
            }
        }
    }

    #[test]
    fn region_collapses_for_tiny_compliance() {
        let kpi = Kpi::new(4.0, 0.01, KpiClass::Two).unwrap();
        assert!(!in_region(&kpi, 0.3, 0.3, 1.0, &tol()).unwrap());
        let region = feasible_region(&kpi, 1.0, 0.05, &tol()).unwrap();
        assert!(region.upper_boundary.is_empty());
    }

    #[test]
    fn rejects_deterministic_service() {
        let cfg = QueueConfig::md1(0.3, 0.3, 0.5, 1.0);
        assert!(matches!(
            b_star_class2(&cfg, &kpi2(), &tol()),
            Err(Error::Unsupported(_))
        ));
    }
}
