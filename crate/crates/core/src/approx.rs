//! Zero-inflated exponential approximation of class-1 waits and CDF distances.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Kpi, KpiClass, QueueConfig};
use crate::transforms::{CdfCurve, Provenance};

/// `P(Z <= t) = 1 - rho_mass * exp(-alpha t)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ZExp {
    pub rho_mass: f64,
    pub alpha: f64,
}

impl ZExp {
    pub fn mean(&self) -> f64 {
        self.rho_mass / self.alpha
    }

    pub fn cdf(&self, t: f64) -> f64 {
        zexp_cdf(self, t)
    }

    pub fn curve(&self, grid: &[f64]) -> CdfCurve {
        CdfCurve::from_fn(grid.to_vec(), Provenance::Approximate, |t| self.cdf(t))
    }
}

pub fn zexp_from_mean(rho: f64, mean_w: f64) -> Result<ZExp> {
    if !(rho > 0.0 && rho < 1.0) {
        return Err(Error::OutOfRange {
            name: "rho",
            value: rho,
            expected: "in (0, 1)",
        });
    }
    if !(mean_w > 0.0) || !mean_w.is_finite() {
        return Err(Error::DegenerateMean);
    }
    Ok(ZExp {
        rho_mass: rho,
        alpha: rho / mean_w,
    })
}

pub fn zexp_cdf(z: &ZExp, t: f64) -> f64 {
    if t < 0.0 {
        return 0.0;
    }
    1.0 - z.rho_mass * (-z.alpha * t).exp()
}

/// Exact class-1 NPQ wait in M/M/1.
pub fn npq_class1_zexp(config: &QueueConfig) -> ZExp {
    ZExp {
        rho_mass: config.rho(),
        alpha: config.mu - config.lambda1,
    }
}

/// Exact FCFS wait in M/M/1.
pub fn fcfs_zexp(config: &QueueConfig) -> ZExp {
    let rho = config.rho();
    ZExp {
        rho_mass: rho,
        alpha: config.mu * (1.0 - rho),
    }
}

/// Largest absolute difference between two curves over their common range,
/// evaluated at the union of both abscissae with linear interpolation.
pub fn cdf_sup_diff(a: &CdfCurve, b: &CdfCurve) -> Result<(f64, f64)> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::EmptyOverlap);
    }
    let lo = a.t[0].max(b.t[0]);
    let hi = a.t[a.len() - 1].min(b.t[b.len() - 1]);
    if lo > hi {
        return Err(Error::EmptyOverlap);
    }
    let mut points: Vec<f64> =
        a.t.iter()
            .chain(b.t.iter())
            .copied()
            .filter(|&t| t >= lo && t <= hi)
            .collect();
    points.sort_by(f64::total_cmp);
    points.dedup();
    let mut best = (0.0, points[0]);
    for &t in &points {
        let diff = (a.value_at(t) - b.value_at(t)).abs();
        if diff > best.0 {
            best = (diff, t);
        }
    }
    Ok(best)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MeanThreshold {
    /// Compliance holds iff the class-1 mean is at most this value.
    Bound(f64),
    /// The atom at zero alone meets the compliance target.
    AlwaysSatisfied,
}

impl MeanThreshold {
    pub fn admits(&self, mean: f64) -> bool {
        match self {
            MeanThreshold::Bound(m) => mean <= *m,
            MeanThreshold::AlwaysSatisfied => true,
        }
    }
}

/// Largest class-1 mean whose ZExp meets `P(W <= w) >= p`: `w rho / ln(rho / (1 - p))`.
pub fn kpi_mean_threshold(rho: f64, kpi: &Kpi) -> Result<MeanThreshold> {
    if kpi.class != KpiClass::One {
        return Err(Error::Unsupported("mean threshold applies to the class-1 KPI".into()));
    }
    let miss = 1.0 - kpi.compliance_p;
    if miss >= rho {
        return Ok(MeanThreshold::AlwaysSatisfied);
    }
    Ok(MeanThreshold::Bound(kpi.target_w * rho / (rho / miss).ln()))
}
