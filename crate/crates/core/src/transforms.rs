//! Laplace-Stieltjes transforms of accreditation intervals and class-2 waits,
//! and Euler-summation inversion back to distribution functions.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::markov::{arrival_survival_weights, mm1_stationary};
use crate::model::{QueueConfig, ServiceKind, ToleranceConfig};

/// Iteration cap for [`eta_fixed_point`].
pub const FIXED_POINT_MAX_ITER: usize = 100_000;

/// A transform `s -> E[exp(-s X); X in A]` of a (possibly defective) measure on
/// `[0, inf)`, evaluable on the right half plane.
pub trait Lst: Sync {
    fn eval(&self, s: Complex64) -> Complex64;

    /// Point mass at zero.
    fn atom(&self) -> f64 {
        0.0
    }

    /// Total mass, the value at `s = 0`.
    fn mass(&self) -> f64 {
        self.eval(Complex64::new(0.0, 0.0)).re
    }

    fn describe(&self) -> String;

    fn eval_real(&self, s: f64) -> f64 {
        self.eval(Complex64::new(s, 0.0)).re
    }
}

/// Closure-backed transform.
pub struct FnLst<F> {
    f: F,
    atom: f64,
    name: String,
}

impl<F: Fn(Complex64) -> Complex64 + Sync> FnLst<F> {
    pub fn new(name: impl Into<String>, atom: f64, f: F) -> Self {
        Self {
            f,
            atom,
            name: name.into(),
        }
    }
}

impl<F: Fn(Complex64) -> Complex64 + Sync> Lst for FnLst<F> {
    fn eval(&self, s: Complex64) -> Complex64 {
        (self.f)(s)
    }
    fn atom(&self) -> f64 {
        self.atom
    }
    fn describe(&self) -> String {
        self.name.clone()
    }
}

/// Service-time transform.
pub fn service_lst(service: ServiceKind, mu: f64, s: Complex64) -> Complex64 {
    match service {
        ServiceKind::Exponential => mu / (s + mu),
        ServiceKind::Deterministic => (-s / mu).exp(),
    }
}

/// Busy-period-type transform of an interval started by one exponential
/// service and extended by every arrival at `arrival_rate` during it.
pub fn eta_mm1_complex(s: Complex64, arrival_rate: f64, mu: f64) -> Complex64 {
    let a = s + mu + arrival_rate;
    let z = (a * a - 4.0 * mu * arrival_rate).sqrt();
    // rationalized root, branch picked away from cancellation
    let den = if (a + z).norm() >= (a - z).norm() { a + z } else { a - z };
    2.0 * mu / den
}

pub fn eta_mm1(s: f64, arrival_rate: f64, mu: f64) -> f64 {
    eta_mm1_complex(Complex64::new(s, 0.0), arrival_rate, mu).re
}

/// Solves `eta = S(s + a (1 - eta))` by iteration from 1.
pub fn eta_fixed_point(s: f64, service: ServiceKind, arrival_rate: f64, mu: f64, tol: &ToleranceConfig) -> Result<f64> {
    if arrival_rate / mu >= 1.0 {
        return Err(Error::UnstableSystem { rho: arrival_rate / mu });
    }
    let mut eta = 1.0;
    for _ in 0..FIXED_POINT_MAX_ITER {
        let next = service_lst(service, mu, Complex64::new(s + arrival_rate * (1.0 - eta), 0.0)).re;
        if (next - eta).abs() <= tol.eps_root * 1e-2 {
            return Ok(next);
        }
        eta = next;
    }
    Err(Error::NonConvergence {
        iterations: FIXED_POINT_MAX_ITER,
    })
}

/// `E[exp(-s (W - d)); W > d]` for the class-2 wait of the M/M/1 delayed APQ.
/// Evaluating at real `s` and multiplying by `exp(-s d)` gives the tail
/// transform `E[exp(-s W); W > d]`.
pub struct Class2Tail {
    /// `w_j = P[N_d = j, busy on [0, d)]`, index 0 unused.
    weights: Vec<f64>,
    accrual_rate: f64,
    mu: f64,
    d: f64,
}

impl Class2Tail {
    pub fn new(config: &QueueConfig, tol: &ToleranceConfig) -> Result<Self> {
        let rates = config.validate()?;
        if config.service != ServiceKind::Exponential {
            return Err(Error::Unsupported(
                "class-2 transforms are available for exponential service only".into(),
            ));
        }
        let weights = if config.d == 0.0 {
            let pi = mm1_stationary(rates.rho, tol);
            let n = pi.support_for(tol.eps_series * 1e-3);
            let mut w = pi.to_vec(n);
            w[0] = 0.0;
            w
        } else {
            arrival_survival_weights(config, tol)?
        };
        Ok(Self {
            weights,
            accrual_rate: rates.lambda1_acc,
            mu: config.mu,
            d: config.d,
        })
    }

    /// `P[W > d]`.
    pub fn survival_at_delay(&self) -> f64 {
        self.weights.iter().sum()
    }

    pub fn delay(&self) -> f64 {
        self.d
    }

    /// Same survival weights with a different accumulation rate.
    pub fn with_accrual(&self, lambda1: f64, b: f64) -> Self {
        Self {
            weights: self.weights.clone(),
            accrual_rate: lambda1 * (1.0 - b),
            mu: self.mu,
            d: self.d,
        }
    }
}

impl Lst for Class2Tail {
    fn eval(&self, s: Complex64) -> Complex64 {
        let eta = eta_mm1_complex(s, self.accrual_rate, self.mu);
        let mut power = Complex64::new(1.0, 0.0);
        let mut acc = Complex64::new(0.0, 0.0);
        for w in self.weights.iter().skip(1) {
            power *= eta;
            acc += *w * power;
        }
        acc
    }

    fn describe(&self) -> String {
        format!("class-2 excess wait beyond d = {}", self.d)
    }
}

/// `E[exp(-s W2); W2 > d]` at real `s`.
pub fn class2_tail_lst(config: &QueueConfig, s: f64, tol: &ToleranceConfig) -> Result<f64> {
    let tail = Class2Tail::new(config, tol)?;
    Ok((-s * config.d).exp() * tail.eval_real(s))
}

/// Full class-2 NPQ waiting-time transform with its atom `1 - rho`.
pub fn npq_class2_lst(config: &QueueConfig, tol: &ToleranceConfig) -> Result<impl Lst> {
    let npq = config.with_b(0.0).with_d(0.0);
    let tail = Class2Tail::new(&npq, tol)?;
    let atom = 1.0 - npq.rho();
    Ok(FnLst::new("class-2 NPQ wait", atom, move |s| atom + tail.eval(s)))
}

/// FCFS M/M/1 wait transform: zero-inflated exponential.
pub fn fcfs_mm1_lst(config: &QueueConfig) -> impl Lst {
    let rho = config.rho();
    let rate = config.mu * (1.0 - rho);
    FnLst::new("FCFS M/M/1 wait", 1.0 - rho, move |s| {
        (1.0 - rho) + rho * rate / (s + rate)
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    ClosedForm,
    Inverted,
    Approximate,
    Empirical,
}

impl Provenance {
    pub fn as_str(self) -> &'static str {
        match self {
            Provenance::ClosedForm => "closed_form",
            Provenance::Inverted => "inverted",
            Provenance::Approximate => "approximate",
            Provenance::Empirical => "empirical",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CdfCurve {
    pub t: Vec<f64>,
    pub f: Vec<f64>,
    pub provenance: Provenance,
    /// Largest upward correction applied when monotonizing.
    pub max_adjustment: f64,
    /// Largest pointwise inversion error estimate (0 unless inverted).
    pub max_error_estimate: f64,
}

impl CdfCurve {
    /// Clamps to `[0, 1]` and enforces monotonicity with a running maximum.
    pub fn new(t: Vec<f64>, f: Vec<f64>, provenance: Provenance) -> Self {
        let mut curve = Self {
            t,
            f,
            provenance,
            max_adjustment: 0.0,
            max_error_estimate: 0.0,
        };
        curve.monotonize();
        curve
    }

    pub fn from_fn(t: Vec<f64>, provenance: Provenance, f: impl Fn(f64) -> f64) -> Self {
        let values = t.iter().map(|&x| f(x)).collect();
        Self::new(t, values, provenance)
    }

    fn monotonize(&mut self) {
        let mut running = 0.0f64;
        let mut adj = 0.0f64;
        for v in self.f.iter_mut() {
            let clamped = v.clamp(0.0, 1.0);
            let fixed = clamped.max(running);
            adj = adj.max(fixed - clamped).max((clamped - *v).abs());
            *v = fixed;
            running = fixed;
        }
        self.max_adjustment = self.max_adjustment.max(adj);
    }

    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    /// Linear interpolation; flat extrapolation outside the abscissae.
    pub fn value_at(&self, x: f64) -> f64 {
        if self.t.is_empty() {
            return f64::NAN;
        }
        if x <= self.t[0] {
            return self.f[0];
        }
        let last = self.t.len() - 1;
        if x >= self.t[last] {
            return self.f[last];
        }
        let i = self.t.partition_point(|&v| v <= x);
        let (t0, t1) = (self.t[i - 1], self.t[i]);
        let (f0, f1) = (self.f[i - 1], self.f[i]);
        if t1 == t0 {
            f1
        } else {
            f0 + (f1 - f0) * (x - t0) / (t1 - t0)
        }
    }

    /// Mean of the distribution from the trapezoidal integral of `1 - F`.
    pub fn mean_from_survival(&self) -> f64 {
        self.t
            .windows(2)
            .zip(self.f.windows(2))
            .map(|(t, f)| 0.5 * (t[1] - t[0]) * ((1.0 - f[0]) + (1.0 - f[1])))
            .sum()
    }
}

/// Euler-summation parameters for the Fourier-series inversion.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EulerParams {
    /// Discretization parameter; aliasing error is about `exp(-a)`.
    pub a: f64,
    pub n: usize,
    pub m: usize,
}

impl Default for EulerParams {
    fn default() -> Self {
        Self { a: 18.4, n: 38, m: 11 }
    }
}

/// Inverts `g(s) / s` at `t > 0`, where `g` is `Lst::eval` minus its atom,
/// returning the value and an error estimate.
fn euler_point<L: Lst + ?Sized>(lst: &L, t: f64, p: EulerParams) -> (f64, f64) {
    let atom = lst.atom();
    let fhat = |s: Complex64| (lst.eval(s) - atom) / s;
    let scale = (p.a / 2.0).exp() / t;
    let x = p.a / (2.0 * t);
    let h = std::f64::consts::PI / t;
    let mut partial = Vec::with_capacity(p.n + p.m + 2);
    let mut sum = 0.5 * fhat(Complex64::new(x, 0.0)).re;
    partial.push(sum);
    for k in 1..=(p.n + p.m + 1) {
        let term = fhat(Complex64::new(x, k as f64 * h)).re;
        sum += if k % 2 == 0 { term } else { -term };
        partial.push(sum);
    }
    let euler = |n: usize| -> f64 {
        let mut binom = 1.0;
        let mut acc = 0.0;
        for k in 0..=p.m {
            acc += binom * partial[n + k];
            binom = binom * (p.m - k) as f64 / (k + 1) as f64;
        }
        acc * 2f64.powi(-(p.m as i32))
    };
    let e0 = scale * euler(p.n);
    let e1 = scale * euler(p.n + 1);
    let aliasing = (-p.a).exp() / (1.0 - (-p.a).exp());
    (atom + e0, (e1 - e0).abs() + aliasing)
}

/// Single-point inversion, failing if the error estimate exceeds `eps_invert`.
pub fn invert_at<L: Lst + ?Sized>(lst: &L, t: f64, tol: &ToleranceConfig) -> Result<(f64, f64)> {
    if t <= 0.0 {
        return Ok((lst.atom(), 0.0));
    }
    let (value, est) = euler_point(lst, t, EulerParams::default());
    if est > tol.eps_invert {
        return Err(Error::AccuracyNotMet {
            estimate: est,
            target: tol.eps_invert,
            t,
        });
    }
    Ok((value, est))
}

/// Inverts a transform on a grid; points run in parallel, output order is the grid order.
pub fn invert_to_cdf<L: Lst + ?Sized>(lst: &L, grid: &[f64], tol: &ToleranceConfig) -> Result<CdfCurve> {
    let points: Vec<(f64, f64)> = grid
        .par_iter()
        .map(|&t| invert_at(lst, t, tol))
        .collect::<Result<_>>()?;
    let max_est = points.iter().map(|p| p.1).fold(0.0, f64::max);
    let mut curve = CdfCurve::new(
        grid.to_vec(),
        points.into_iter().map(|p| p.0).collect(),
        Provenance::Inverted,
    );
    curve.max_error_estimate = max_est;
    Ok(curve)
}

/// Class-2 wait distribution evaluator for the M/M/1 delayed APQ.
pub struct Class2Cdf {
    npq: Box<dyn Lst + Send>,
    tail: Class2Tail,
    d: f64,
}

impl Class2Cdf {
    pub fn new(config: &QueueConfig, tol: &ToleranceConfig) -> Result<Self> {
        let tail = Class2Tail::new(config, tol)?;
        let npq = Box::new(npq_class2_lst(config, tol)?);
        Ok(Self { npq, tail, d: config.d })
    }

    /// Reuses the b-independent parts for another accumulation rate.
    pub fn set_accumulation(&mut self, lambda1: f64, b: f64) {
        self.tail = self.tail.with_accrual(lambda1, b);
    }

    /// `P[W2 <= t]` with its inversion error estimate.
    pub fn at(&self, t: f64, tol: &ToleranceConfig) -> Result<(f64, f64)> {
        if t <= self.d {
            return invert_at(self.npq.as_ref(), t, tol);
        }
        let below = 1.0 - self.tail.survival_at_delay();
        let (excess, est) = invert_at(&self.tail, t - self.d, tol)?;
        Ok((below + excess, est))
    }
}

/// Class-2 CDF of the M/M/1 delayed APQ: the NPQ distribution on `[0, d]`
/// and the inverted excess transform beyond `d`.
pub fn class2_cdf_dapq(config: &QueueConfig, grid: &[f64], tol: &ToleranceConfig) -> Result<CdfCurve> {
    let cdf = Class2Cdf::new(config, tol)?;
    let points: Vec<(f64, f64)> = grid.par_iter().map(|&t| cdf.at(t, tol)).collect::<Result<_>>()?;
    let max_est = points.iter().map(|p| p.1).fold(0.0, f64::max);
    let mut curve = CdfCurve::new(
        grid.to_vec(),
        points.into_iter().map(|p| p.0).collect(),
        Provenance::Inverted,
    );
    curve.max_error_estimate = max_est;
    Ok(curve)
}
