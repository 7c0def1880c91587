//! Expected waiting times under FCFS, NPQ and the (delayed) APQ.
//!
//! Both service kinds share one decomposition of the class-2 mean:
//!
//! `E[W2^N] - E[W2^D] = C * E[(mu R + N_d - 1) 1{B}]`, with
//! `C = rho1 b / (mu (1 - rho1^A)(1 - rho1))`,
//!
//! where `B` is the event that the server stays busy on `[0, d)` after a class-2
//! arrival, `N_d` the number in system at `d` and `R` the residual service at
//! `d`. For exponential service `mu E[R 1{B}] = P[B]`, which yields the x-table
//! form used by [`mm1_dapq_class2_mean`]. For deterministic service with
//! `d = l/mu` the residual at `d` equals the residual at the arrival epoch, so
//! [`md1_dapq_class2_mean`] integrates over the exact joint law of the
//! arrival-epoch queue length and residual.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::markov::{md1_stationary, StationaryDist};
use crate::model::{
    class1_mean_from_class2, conservation_rhs, DerivedRates, QueueConfig, ServiceKind, ToleranceConfig, WaitSummary,
};
use crate::numeric::{gauss_legendre, poisson_weights, KahanSum};

/// Gauss-Legendre nodes for the residual-service integral.
const RESIDUAL_NODES: usize = 48;

pub fn fcfs_mean(config: &QueueConfig) -> Result<f64> {
    let rho = config.validate()?.rho;
    if rho == 0.0 {
        return Ok(0.0);
    }
    Ok(conservation_rhs(config)? / rho)
}

pub fn npq_class2_mean(config: &QueueConfig) -> Result<f64> {
    let rates = config.validate()?;
    Ok(fcfs_mean(config)? / (1.0 - rates.rho1))
}

/// Class-1 NPQ mean, `fcfs_mean * (1 - rho) / (1 - rho1)`.
pub fn npq_class1_mean(config: &QueueConfig) -> Result<f64> {
    let rates = config.validate()?;
    Ok(fcfs_mean(config)? * (1.0 - rates.rho) / (1.0 - rates.rho1))
}

fn correction_factor(config: &QueueConfig, rates: &DerivedRates) -> f64 {
    config.lambda1 * config.b / config.mu / (config.mu * (1.0 - rates.rho1_acc) * (1.0 - rates.rho1))
}

/// Rows `k = 1..=k_max` of `x_l^(k) = (pi_+ P_+^k)_l / (1 - rho)` for `l <= k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct XTable {
    pub rows: Vec<Vec<f64>>,
    pub p_up: f64,
    pub q_down: f64,
    pub r_coef: f64,
}

impl XTable {
    /// `x_l^(k)`, including the closed form `rho^{l-k} r^k` above the diagonal.
    pub fn get(&self, k: usize, l: usize, rho: f64) -> f64 {
        if k == 0 {
            return rho.powi(l as i32);
        }
        if l == 0 {
            0.0
        } else if l <= k {
            self.rows[k - 1][l - 1]
        } else {
            rho.powi((l - k) as i32) * self.r_coef.powi(k as i32)
        }
    }

    pub fn k_max(&self) -> usize {
        self.rows.len()
    }
}

pub fn x_table(rates: &DerivedRates, k_max: usize) -> XTable {
    let (p, q, r, rho) = (rates.p_up, rates.q_down, rates.r_coef, rates.rho);
    let mut rows: Vec<Vec<f64>> = Vec::with_capacity(k_max);
    let mut r_pow = 1.0;
    for k in 1..=k_max {
        let mut row = vec![0.0; k];
        // x_i^(k-1) for i up to k+1, using the above-diagonal closed form
        let prev = |i: usize| -> f64 {
            if k == 1 {
                rho.powi(i as i32)
            } else if i < k {
                rows[k - 2][i - 1]
            } else {
                rho.powi((i - (k - 1)) as i32) * r_pow
            }
        };
        for i in 1..=k {
            let up = if i >= 2 { p * prev(i - 1) } else { 0.0 };
            row[i - 1] = up + q * prev(i + 1);
        }
        rows.push(row);
        r_pow *= r;
    }
    XTable {
        rows,
        p_up: p,
        q_down: q,
        r_coef: r,
    }
}

/// `E[N_d 1{B}]` for the M/M/1 chain via the x-table.
fn mm1_busy_functional(config: &QueueConfig, rates: &DerivedRates, tol: &ToleranceConfig) -> Result<f64> {
    let rho = rates.rho;
    let nu_d = rates.nu * config.d;
    if config.d == 0.0 {
        return Ok(rho / (1.0 - rho));
    }
    let (weights, _) = poisson_weights(nu_d, tol.eps_series);
    let k_max = weights.len().saturating_sub(1).max(1);
    if k_max > tol.max_states {
        return Err(Error::TruncationOverflow {
            needed: k_max,
            cap: tol.max_states,
        });
    }
    let table = x_table(rates, k_max);
    let mut inner = KahanSum::new();
    for (k, w) in weights.iter().enumerate().skip(1) {
        let row = &table.rows[k - 1];
        let s: f64 = row.iter().enumerate().map(|(i, x)| (i + 1) as f64 * x).sum();
        inner.add(w * s);
    }
    let closed = rho * (-nu_d * (1.0 - rates.r_coef)).exp() * (1.0 / (1.0 - rho) + rates.r_coef * nu_d);
    Ok((1.0 - rho) * inner.value() + closed)
}

pub fn mm1_dapq_class2_mean(config: &QueueConfig, tol: &ToleranceConfig) -> Result<f64> {
    let rates = config.validate()?;
    if config.service != ServiceKind::Exponential {
        return Err(Error::Unsupported(
            "mm1_dapq_class2_mean needs exponential service".into(),
        ));
    }
    let npq = npq_class2_mean(config)?;
    if config.b == 0.0 || config.lambda1 == 0.0 || rates.rho == 0.0 {
        return Ok(npq);
    }
    let c = correction_factor(config, &rates);
    Ok(npq - c * mm1_busy_functional(config, &rates, tol)?)
}

/// Convolves `v` with `pois` in place of `out`, dropping mass above `cap`.
fn convolve(v: &[f64], pois: &[f64], cap: usize) -> Vec<f64> {
    let len = (v.len() + pois.len() - 1).min(cap + 1);
    let mut out = vec![0.0; len];
    for (i, &a) in v.iter().enumerate() {
        if a == 0.0 {
            continue;
        }
        for (k, &w) in pois.iter().enumerate() {
            if i + k >= len {
                break;
            }
            out[i + k] += a * w;
        }
    }
    out
}

/// One departure: shift down by one, losing the mass that would reach zero.
fn depart(v: &mut Vec<f64>) {
    if v.is_empty() {
        return;
    }
    v.remove(0);
    if !v.is_empty() {
        v[0] = 0.0;
    }
}

/// Arrival-epoch law of the count `K` present just after the last departure
/// preceding the arrival, conditional on a busy server: `P[K=1] = pi_0 + pi_1`,
/// `P[K=k] = pi_k` for `k >= 2`, with index 0 unused.
fn md1_departure_count(pi: &StationaryDist, eps: f64) -> Vec<f64> {
    let n = pi.support_for(eps * 1e-3).max(2);
    let mut k = vec![0.0; n + 1];
    k[1] = pi.prob(0) + pi.prob(1);
    for (i, slot) in k.iter_mut().enumerate().skip(2) {
        *slot = pi.prob(i);
    }
    k
}

/// `E[(mu R + N_d - 1) 1{B}]` for deterministic service and `d = l/mu`, `l >= 1`.
fn md1_busy_functional(config: &QueueConfig, rates: &DerivedRates, ell: u32, tol: &ToleranceConfig) -> Result<f64> {
    let mu = config.mu;
    let lambda = config.lambda();
    let pi = md1_stationary(rates.rho, tol)?;
    let k_law = md1_departure_count(&pi, tol.eps_series);
    let poisson_full = poisson_weights(rates.rho1, tol.eps_series * 1e-3).0;
    let cap =
        k_law.len() + (ell as usize + 1) * poisson_full.len() + poisson_weights(lambda / mu, tol.eps_series).0.len();
    if cap > tol.max_states {
        return Err(Error::TruncationOverflow {
            needed: cap,
            cap: tol.max_states,
        });
    }
    let (nodes, weights) = gauss_legendre(RESIDUAL_NODES);
    let half = 0.5 / mu;
    let mut total = KahanSum::new();
    for (x, w) in nodes.iter().zip(&weights) {
        let r = half * (x + 1.0);
        let age = 1.0 / mu - r;
        let pois_age = poisson_weights(lambda * age, tol.eps_series * 1e-3).0;
        let mut v = convolve(&k_law, &pois_age, cap);
        let pois_r = poisson_weights(config.lambda1 * r, tol.eps_series * 1e-3).0;
        v = convolve(&v, &pois_r, cap);
        depart(&mut v);
        for _ in 1..ell {
            v = convolve(&v, &poisson_full, cap);
            depart(&mut v);
        }
        let pois_tail = poisson_weights(config.lambda1 * age, tol.eps_series * 1e-3).0;
        v = convolve(&v, &pois_tail, cap);
        let g: f64 = v
            .iter()
            .enumerate()
            .skip(1)
            .map(|(j, p)| p * (mu * r + j as f64 - 1.0))
            .sum();
        // density of R on (0, 1/mu) given busy is mu; dr = half dx
        total.add(w * half * mu * g);
    }
    Ok(rates.rho * total.value())
}

pub fn md1_dapq_class2_mean(config: &QueueConfig, tol: &ToleranceConfig) -> Result<f64> {
    let rates = config.validate()?;
    if config.service != ServiceKind::Deterministic {
        return Err(Error::Unsupported(
            "md1_dapq_class2_mean needs deterministic service".into(),
        ));
    }
    let ell = config.delay_in_services().ok_or(Error::InvalidDelay {
        d: config.d,
        unit: 1.0 / config.mu,
    })?;
    let npq = npq_class2_mean(config)?;
    if config.b == 0.0 || config.lambda1 == 0.0 || rates.rho == 0.0 {
        return Ok(npq);
    }
    let c = correction_factor(config, &rates);
    if ell == 0 {
        return Ok(npq - c * rates.rho / (2.0 * (1.0 - rates.rho)));
    }
    Ok(npq - c * md1_busy_functional(config, &rates, ell, tol)?)
}

pub fn dapq_class2_mean(config: &QueueConfig, tol: &ToleranceConfig) -> Result<f64> {
    match config.service {
        ServiceKind::Exponential => mm1_dapq_class2_mean(config, tol),
        ServiceKind::Deterministic => md1_dapq_class2_mean(config, tol),
    }
}

pub fn dapq_means(config: &QueueConfig, tol: &ToleranceConfig) -> Result<WaitSummary> {
    let w2 = dapq_class2_mean(config, tol)?;
    let w1 = class1_mean_from_class2(config, w2)?;
    WaitSummary::from_means(config, w1, w2)
}

/// Convex combination of the M/M/1 and M/D/1 results, an approximation for
/// service times with squared coefficient of variation `scv` in `[0, 1]`.
pub fn interpolated_mean(config: &QueueConfig, scv: f64, tol: &ToleranceConfig) -> Result<WaitSummary> {
    if !(0.0..=1.0).contains(&scv) {
        return Err(Error::OutOfRange {
            name: "scv",
            value: scv,
            expected: "in [0, 1]",
        });
    }
    let exp = dapq_means(&config.with_service(ServiceKind::Exponential), tol)?;
    let det = dapq_means(&config.with_service(ServiceKind::Deterministic), tol)?;
    Ok(WaitSummary {
        mean_w1: scv * exp.mean_w1 + (1.0 - scv) * det.mean_w1,
        mean_w2: scv * exp.mean_w2 + (1.0 - scv) * det.mean_w2,
        conservation_residual: scv * exp.conservation_residual + (1.0 - scv) * det.conservation_residual,
    })
}
