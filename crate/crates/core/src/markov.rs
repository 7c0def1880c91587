//! Queue-length distributions seen by arriving customers, and the transient
//! "server busy throughout `[0, d)`" transition probabilities of the class-1
//! birth-death chain that a waiting class-2 customer observes.
//!
//! # M/D/1 tail orientation
//!
//! The non-trivial root `sigma` of `exp(rho * sigma) / sigma = exp(rho)` lies
//! above `1/rho > 1`. The stationary probabilities decay like `sigma^{-i}`, so
//! the geometric continuation ratio is `1/sigma`; this is checked against the
//! exact alternating-sum terms in the tests below and in the acceptance suite.

use serde::{Deserialize, Serialize};
use twofloat::TwoFloat;

use crate::error::{Error, Result};
use crate::model::{QueueConfig, ServiceKind, ToleranceConfig};
use crate::numeric::{bisect, dd_div, dd_exp, dd_powi, poisson_weights};

/// Ratio agreement at which exact M/D/1 terms hand over to the geometric tail.
pub const MD1_RATIO_MATCH: f64 = 1e-13;
/// Agreement that must at least be reached before cancellation forces the handover.
pub const MD1_RATIO_REQUIRED: f64 = 1e-4;
/// Decimal digits of cancellation tolerated in the alternating sum (half of double-double).
pub const MD1_MAX_DIGITS_LOST: f64 = 15.5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StationaryDist {
    /// `pi_0 ..= pi_K`.
    pub probs: Vec<f64>,
    /// `pi_{i+1} / pi_i` for `i >= K`.
    pub tail_ratio: f64,
    pub truncation_k: usize,
}

impl StationaryDist {
    pub fn prob(&self, i: usize) -> f64 {
        if i <= self.truncation_k {
            self.probs[i]
        } else {
            self.probs[self.truncation_k] * self.tail_ratio.powi((i - self.truncation_k) as i32)
        }
    }

    /// Geometric mass beyond `K`.
    pub fn tail_mass(&self) -> f64 {
        let last = self.probs[self.truncation_k];
        if self.tail_ratio <= 0.0 {
            0.0
        } else {
            last * self.tail_ratio / (1.0 - self.tail_ratio)
        }
    }

    pub fn total_mass(&self) -> f64 {
        self.probs.iter().sum::<f64>() + self.tail_mass()
    }

    /// Mass strictly above state `n`.
    pub fn mass_above(&self, n: usize) -> f64 {
        if n >= self.truncation_k {
            self.prob(n) * self.tail_ratio / (1.0 - self.tail_ratio).max(f64::MIN_POSITIVE)
        } else {
            self.probs[n + 1..].iter().sum::<f64>() + self.tail_mass()
        }
    }

    /// Smallest `n` with mass above `n` below `eps`.
    pub fn support_for(&self, eps: f64) -> usize {
        let mut n = 0;
        while self.mass_above(n) >= eps {
            n += 1;
            if n > self.truncation_k && self.tail_ratio <= 0.0 {
                break;
            }
        }
        n
    }

    /// Explicit probabilities `pi_0..=pi_n`.
    pub fn to_vec(&self, n: usize) -> Vec<f64> {
        (0..=n).map(|i| self.prob(i)).collect()
    }
}

/// `pi_i = (1 - rho) rho^i`, truncated where `rho^{K+1} < eps_series`.
pub fn mm1_stationary(rho: f64, tol: &ToleranceConfig) -> StationaryDist {
    if rho <= 0.0 {
        return StationaryDist {
            probs: vec![1.0],
            tail_ratio: 0.0,
            truncation_k: 0,
        };
    }
    let mut probs = vec![1.0 - rho];
    let mut power = 1.0;
    loop {
        power *= rho;
        if power < tol.eps_series {
            break;
        }
        probs.push((1.0 - rho) * power);
    }
    let truncation_k = probs.len() - 1;
    StationaryDist {
        probs,
        tail_ratio: rho,
        truncation_k,
    }
}

/// Geometric decay ratio `1/sigma` of the M/D/1 queue-length distribution, where
/// `sigma > 1/rho` is the non-trivial root of `exp(rho sigma)/sigma = exp(rho)`.
pub fn md1_tail_ratio(rho: f64, tol: &ToleranceConfig) -> Result<f64> {
    if !(rho > 0.0 && rho < 1.0) {
        return Err(Error::OutOfRange {
            name: "rho",
            value: rho,
            expected: "in (0, 1)",
        });
    }
    // log form: g(s) = rho s - ln s - rho, zero at s = 1 and at sigma; min at 1/rho
    let g = |s: f64| rho * s - s.ln() - rho;
    let lo = 1.0 / rho;
    if g(lo) >= 0.0 {
        // heavy-traffic limit: both roots collapse onto 1
        return Ok(1.0);
    }
    let mut hi = 2.0 * lo;
    let mut doublings = 0;
    while g(hi) <= 0.0 {
        hi *= 2.0;
        doublings += 1;
        if doublings > 200 {
            return Err(Error::RootBracketFailure(format!("rho = {rho}")));
        }
    }
    let sigma = bisect(g, lo, hi, (tol.eps_root * lo).min(f64::EPSILON * lo))
        .ok_or_else(|| Error::RootBracketFailure(format!("rho = {rho}")))?;
    Ok(1.0 / sigma)
}

/// Exact M/D/1 arrival-epoch probability `pi_i` from the alternating-sum
/// formula, evaluated in double-double arithmetic. Also returns the number of
/// decimal digits lost to cancellation.
pub fn md1_exact_term(rho: f64, i: usize) -> (f64, f64) {
    if i == 0 {
        return (1.0 - rho, 0.0);
    }
    let e_rho = dd_exp(rho);
    let one_minus = TwoFloat::new_sub(1.0, rho);
    if i == 1 {
        let v = (e_rho - 1.0) * one_minus;
        return (v.hi() + v.lo(), 0.0);
    }
    let mut sum = dd_powi(e_rho, i as u32);
    let mut max_abs = sum.hi().abs();
    for k in 1..i {
        let m = i - k;
        let k_rho = TwoFloat::new_mul(k as f64, rho);
        // (k rho)^m / m!
        let mut poly = TwoFloat::from(1.0);
        for n in 1..=m {
            poly = dd_div(poly * k_rho, TwoFloat::from(n as f64));
        }
        let factor = dd_div(TwoFloat::from(i as f64) - one_minus * (k as f64), k_rho);
        let mut term = dd_powi(e_rho, k as u32) * poly * factor;
        if m % 2 == 1 {
            term = -term;
        }
        max_abs = max_abs.max(term.hi().abs());
        sum += term;
    }
    let value = sum * one_minus;
    let v = value.hi() + value.lo();
    let lost = if sum.hi() == 0.0 {
        f64::INFINITY
    } else {
        (max_abs / sum.hi().abs()).log10().max(0.0)
    };
    (v, lost)
}

/// M/D/1 queue length seen by arrivals: exact terms up to a handover index,
/// geometric continuation with [`md1_tail_ratio`] beyond it.
pub fn md1_stationary(rho: f64, tol: &ToleranceConfig) -> Result<StationaryDist> {
    if rho <= 0.0 {
        return Ok(StationaryDist {
            probs: vec![1.0],
            tail_ratio: 0.0,
            truncation_k: 0,
        });
    }
    let ratio = md1_tail_ratio(rho, tol)?;
    let tail_factor = ratio / (1.0 - ratio);
    let mut probs = vec![md1_exact_term(rho, 0).0, md1_exact_term(rho, 1).0];
    let mut i = 2;
    loop {
        let prev = probs[i - 1];
        if prev * tail_factor < tol.eps_series * 1e-3 {
            break;
        }
        let (value, lost) = md1_exact_term(rho, i);
        let mismatch = ((value / prev) - ratio).abs() / ratio;
        if lost > MD1_MAX_DIGITS_LOST || !(value > 0.0) {
            let prev_mismatch = if i >= 3 {
                ((prev / probs[i - 2]) - ratio).abs() / ratio
            } else {
                f64::INFINITY
            };
            if prev_mismatch > MD1_RATIO_REQUIRED && prev * tail_factor > tol.eps_series {
                return Err(Error::NumericalInstability(format!(
                    "M/D/1 alternating sum lost {lost:.1} digits at i = {i} before the geometric regime (rho = {rho})"
                )));
            }
            break;
        }
        probs.push(value);
        if mismatch < MD1_RATIO_MATCH {
            break;
        }
        i += 1;
    }
    let truncation_k = probs.len() - 1;
    Ok(StationaryDist {
        probs,
        tail_ratio: ratio,
        truncation_k,
    })
}

/// Stationary distribution seen by arrivals for the configured service kind.
pub fn stationary(config: &QueueConfig, tol: &ToleranceConfig) -> Result<StationaryDist> {
    match config.service {
        ServiceKind::Exponential => Ok(mm1_stationary(config.rho(), tol)),
        ServiceKind::Deterministic => md1_stationary(config.rho(), tol),
    }
}

/// `P[N_d = j, N_t > 0 for all t in [0, d) | N_0 = i]` for the M/M/1 class-1
/// birth-death chain (up rate `lambda1`, down rate `mu`, absorbing at 0).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurvivalTransition {
    /// `probs[i - 1][j - 1]` for `1 <= i <= max_initial`, `1 <= j <= max_state`.
    pub probs: Vec<Vec<f64>>,
    pub max_initial: usize,
    pub max_state: usize,
    /// Number of uniformization steps kept in the Poisson sum.
    pub poisson_terms: usize,
}

impl SurvivalTransition {
    pub fn get(&self, i: usize, j: usize) -> f64 {
        if i == 0 || j == 0 || i > self.max_initial || j > self.max_state {
            0.0
        } else {
            self.probs[i - 1][j - 1]
        }
    }

    /// Probability that the server stays busy through `[0, d)` from state `i`.
    pub fn row_sum(&self, i: usize) -> f64 {
        if i == 0 || i > self.max_initial {
            return 0.0;
        }
        self.probs[i - 1].iter().sum()
    }
}

/// One step of the uniformized chain restricted to the busy states `1..`.
/// `v[0]` is unused (state 0 is absorbing and dropped).
pub(crate) fn step_busy(v: &[f64], out: &mut [f64], p_up: f64, q_down: f64) {
    let n = v.len();
    out.iter_mut().for_each(|x| *x = 0.0);
    for j in 1..n {
        let mut acc = 0.0;
        if j >= 2 {
            acc += p_up * v[j - 1];
        }
        if j + 1 < n {
            acc += q_down * v[j + 1];
        }
        out[j] = acc;
    }
}

struct Uniformization {
    weights: Vec<f64>,
    states: usize,
}

fn uniformization_plan(config: &QueueConfig, tol: &ToleranceConfig, top_initial: usize) -> Result<Uniformization> {
    let nu = config.mu + config.lambda1;
    let (weights, _) = if config.d > 0.0 {
        poisson_weights(nu * config.d, tol.eps_series / 2.0)
    } else {
        (vec![1.0], 0.0)
    };
    let rho = config.rho();
    let geometric = if rho > 0.0 {
        (tol.eps_series.ln() / rho.ln()).ceil().max(0.0) as usize
    } else {
        0
    };
    // no path climbs more than k levels in k steps
    let needed = (64usize).max(geometric.max(top_initial) + weights.len()) + 2;
    if needed > tol.max_states {
        return Err(Error::TruncationOverflow {
            needed,
            cap: tol.max_states,
        });
    }
    Ok(Uniformization {
        weights,
        states: needed,
    })
}

/// Transient survival probabilities by uniformization at rate `mu + lambda1`.
pub fn survival_transition(config: &QueueConfig, tol: &ToleranceConfig) -> Result<SurvivalTransition> {
    let rates = config.validate()?;
    if config.service != ServiceKind::Exponential {
        return Err(Error::Unsupported(
            "survival_transition is defined for exponential service".into(),
        ));
    }
    let max_initial = mm1_stationary(rates.rho, tol).truncation_k.max(1);
    let plan = uniformization_plan(config, tol, max_initial)?;
    let n = plan.states;
    let rows: Vec<Vec<f64>> = {
        use rayon::prelude::*;
        (1..=max_initial)
            .into_par_iter()
            .map(|i| {
                let mut v = vec![0.0; n + 1];
                v[i] = 1.0;
                let mut acc = vec![0.0; n + 1];
                let mut scratch = vec![0.0; n + 1];
                for (k, w) in plan.weights.iter().enumerate() {
                    if k > 0 {
                        step_busy(&v, &mut scratch, rates.p_up, rates.q_down);
                        std::mem::swap(&mut v, &mut scratch);
                    }
                    for j in 1..=n {
                        acc[j] += w * v[j];
                    }
                }
                acc[1..].to_vec()
            })
            .collect()
    };
    Ok(SurvivalTransition {
        probs: rows,
        max_initial,
        max_state: n,
        poisson_terms: plan.weights.len(),
    })
}

/// `w_j = sum_i pi_i P[N_d = j, busy on [0, d) | N_0 = i]` for the M/M/1 chain,
/// returned with index 0 unused. `sum_j w_j = P[W_2^N > d]`.
pub fn arrival_survival_weights(config: &QueueConfig, tol: &ToleranceConfig) -> Result<Vec<f64>> {
    let rates = config.validate()?;
    if config.service != ServiceKind::Exponential {
        return Err(Error::Unsupported(
            "survival weights are defined for exponential service".into(),
        ));
    }
    let pi = mm1_stationary(rates.rho, tol);
    let plan = uniformization_plan(config, tol, pi.truncation_k)?;
    let n = plan.states;
    let mut v = vec![0.0; n + 1];
    for (j, slot) in v.iter_mut().enumerate().skip(1) {
        *slot = pi.prob(j);
    }
    let mut acc = vec![0.0; n + 1];
    let mut scratch = vec![0.0; n + 1];
    for (k, w) in plan.weights.iter().enumerate() {
        if k > 0 {
            step_busy(&v, &mut scratch, rates.p_up, rates.q_down);
            std::mem::swap(&mut v, &mut scratch);
        }
        for j in 1..=n {
            acc[j] += w * v[j];
        }
    }
    while acc.len() > 2 && *acc.last().unwrap() < tol.eps_series * 1e-6 {
        acc.pop();
    }
    Ok(acc)
}
