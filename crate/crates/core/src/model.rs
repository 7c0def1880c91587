//! Queue parameters, derived rates and the work-conserving conservation law.
//!
//! Every computation in the crate starts from a [`QueueConfig`]: two Poisson
//! classes sharing one service distribution, with class-2 customers accruing
//! priority credit at relative rate `b` once they have waited `d` time units.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ServiceKind {
    /// Exponential service with rate `mu`.
    Exponential,
    /// Constant service of length `1/mu`.
    Deterministic,
}

impl ServiceKind {
    /// `E[S^2]` for a service with mean `1/mu`.
    pub fn second_moment(self, mu: f64) -> f64 {
        match self {
            ServiceKind::Exponential => 2.0 / (mu * mu),
            ServiceKind::Deterministic => 1.0 / (mu * mu),
        }
    }

    /// Squared coefficient of variation of the service time.
    pub fn scv(self) -> f64 {
        match self {
            ServiceKind::Exponential => 1.0,
            ServiceKind::Deterministic => 0.0,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ServiceKind::Exponential => "exp",
            ServiceKind::Deterministic => "det",
        }
    }
}

impl std::fmt::Display for ServiceKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QueueConfig {
    pub lambda1: f64,
    pub lambda2: f64,
    pub mu: f64,
    /// Class-2 accumulation rate relative to class 1, in `[0, 1]`.
    pub b: f64,
    /// Time a class-2 customer waits before it starts accumulating.
    pub d: f64,
    pub service: ServiceKind,
}

impl QueueConfig {
    pub fn new(lambda1: f64, lambda2: f64, mu: f64, b: f64, d: f64, service: ServiceKind) -> Self {
        Self {
            lambda1,
            lambda2,
            mu,
            b,
            d,
            service,
        }
    }

    /// M/M/1 configuration with `mu = 1`.
    pub fn mm1(lambda1: f64, lambda2: f64, b: f64, d: f64) -> Self {
        Self::new(lambda1, lambda2, 1.0, b, d, ServiceKind::Exponential)
    }

    /// M/D/1 configuration with `mu = 1`.
    pub fn md1(lambda1: f64, lambda2: f64, b: f64, d: f64) -> Self {
        Self::new(lambda1, lambda2, 1.0, b, d, ServiceKind::Deterministic)
    }

    pub fn with_b(self, b: f64) -> Self {
        Self { b, ..self }
    }

    pub fn with_d(self, d: f64) -> Self {
        Self { d, ..self }
    }

    pub fn with_service(self, service: ServiceKind) -> Self {
        Self { service, ..self }
    }

    pub fn lambda(&self) -> f64 {
        self.lambda1 + self.lambda2
    }

    pub fn rho(&self) -> f64 {
        self.lambda() / self.mu
    }

    pub fn rho1(&self) -> f64 {
        self.lambda1 / self.mu
    }

    pub fn rho2(&self) -> f64 {
        self.lambda2 / self.mu
    }

    /// Number of whole services in the delay, `d * mu`, when it is an integer.
    pub fn delay_in_services(&self) -> Option<u32> {
        let units = self.d * self.mu;
        let rounded = units.round();
        if (units - rounded).abs() <= 1e-9 * rounded.max(1.0) && rounded >= 0.0 {
            Some(rounded as u32)
        } else {
            None
        }
    }

    pub fn validate(&self) -> Result<DerivedRates> {
        validate(self)
    }
}

/// Rates derived from a valid [`QueueConfig`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DerivedRates {
    pub rho1: f64,
    pub rho2: f64,
    pub rho: f64,
    /// Class-1 accreditation arrival rate `lambda1 (1 - b)`.
    pub lambda1_acc: f64,
    pub rho1_acc: f64,
    /// Uniformization rate `mu + lambda1` of the class-1 birth-death chain.
    pub nu: f64,
    pub p_up: f64,
    pub q_down: f64,
    /// `p_up + q_down rho^2`.
    pub r_coef: f64,
}

fn check_range(name: &'static str, value: f64, ok: bool, expected: &'static str) -> Result<()> {
    if ok && value.is_finite() {
        Ok(())
    } else {
        Err(Error::OutOfRange { name, value, expected })
    }
}

pub fn validate(config: &QueueConfig) -> Result<DerivedRates> {
    let c = config;
    check_range("lambda1", c.lambda1, c.lambda1 >= 0.0, ">= 0")?;
    check_range("lambda2", c.lambda2, c.lambda2 >= 0.0, ">= 0")?;
    check_range("mu", c.mu, c.mu > 0.0, "> 0")?;
    check_range("b", c.b, (0.0..=1.0).contains(&c.b), "in [0, 1]")?;
    check_range("d", c.d, c.d >= 0.0, ">= 0")?;
    let rho = c.rho();
    if rho >= 1.0 {
        return Err(Error::UnstableSystem { rho });
    }
    if c.service == ServiceKind::Deterministic && c.d > 0.0 && c.delay_in_services().is_none() {
        return Err(Error::InvalidDelay {
            d: c.d,
            unit: 1.0 / c.mu,
        });
    }
    let nu = c.mu + c.lambda1;
    let p_up = c.lambda1 / nu;
    let q_down = c.mu / nu;
    let lambda1_acc = c.lambda1 * (1.0 - c.b);
    Ok(DerivedRates {
        rho1: c.rho1(),
        rho2: c.rho2(),
        rho,
        lambda1_acc,
        rho1_acc: lambda1_acc / c.mu,
        nu,
        p_up,
        q_down,
        r_coef: p_up + q_down * rho * rho,
    })
}

/// `rho/(1-rho) * lambda E[S^2] / 2`, the discipline-free value of
/// `rho1 E[W1] + rho2 E[W2]`.
pub fn conservation_rhs(config: &QueueConfig) -> Result<f64> {
    let rates = validate(config)?;
    let lambda = config.lambda();
    let es2 = config.service.second_moment(config.mu);
    Ok(rates.rho / (1.0 - rates.rho) * lambda * es2 / 2.0)
}

/// Class-1 mean implied by a class-2 mean through the conservation law.
pub fn class1_mean_from_class2(config: &QueueConfig, mean_w2: f64) -> Result<f64> {
    let rhs = conservation_rhs(config)?;
    let rho1 = config.rho1();
    if rho1 <= 0.0 {
        return Err(Error::NoClass1);
    }
    Ok((rhs - config.rho2() * mean_w2) / rho1)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum KpiClass {
    One,
    Two,
}

impl KpiClass {
    pub fn index(self) -> u8 {
        match self {
            KpiClass::One => 1,
            KpiClass::Two => 2,
        }
    }

    pub fn from_index(i: u8) -> Result<Self> {
        match i {
            1 => Ok(KpiClass::One),
            2 => Ok(KpiClass::Two),
            _ => Err(Error::OutOfRange {
                name: "class",
                value: i as f64,
                expected: "1 or 2",
            }),
        }
    }
}

/// A waiting-time target together with the fraction of customers that must meet it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Kpi {
    pub target_w: f64,
    pub compliance_p: f64,
    pub class: KpiClass,
}

impl Kpi {
    pub fn new(target_w: f64, compliance_p: f64, class: KpiClass) -> Result<Self> {
        check_range("target_w", target_w, target_w > 0.0, "> 0")?;
        check_range(
            "compliance_p",
            compliance_p,
            compliance_p > 0.0 && compliance_p < 1.0,
            "in (0, 1)",
        )?;
        Ok(Self {
            target_w,
            compliance_p,
            class,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WaitSummary {
    pub mean_w1: f64,
    pub mean_w2: f64,
    /// `|rho1 E[W1] + rho2 E[W2] - conservation_rhs|`.
    pub conservation_residual: f64,
}

impl WaitSummary {
    pub fn from_means(config: &QueueConfig, mean_w1: f64, mean_w2: f64) -> Result<Self> {
        let rhs = conservation_rhs(config)?;
        let lhs = config.rho1() * mean_w1 + config.rho2() * mean_w2;
        Ok(Self {
            mean_w1,
            mean_w2,
            conservation_residual: (lhs - rhs).abs(),
        })
    }
}

/// CDF evaluation grid: uniform spacing `step` on `[0, t_max]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub step: f64,
    /// Upper end; `None` means "where the FCFS survival function drops below 1e-6".
    pub t_max: Option<f64>,
}

impl GridSpec {
    pub fn abscissae(&self, config: &QueueConfig) -> Vec<f64> {
        let t_max = self.t_max.unwrap_or_else(|| fcfs_horizon(config, 1e-6));
        let n = (t_max / self.step).round() as usize;
        (0..=n).map(|i| i as f64 * self.step).collect()
    }
}

/// Smallest `t` with `rho exp(-mu (1 - rho) t) < survival` (M/M/1 FCFS tail).
pub fn fcfs_horizon(config: &QueueConfig, survival: f64) -> f64 {
    let rho = config.rho();
    if rho <= survival {
        return 1.0 / config.mu;
    }
    (rho / survival).ln() / (config.mu * (1.0 - rho))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ToleranceConfig {
    /// Absolute truncation tolerance for infinite sums.
    pub eps_series: f64,
    pub eps_root: f64,
    /// Target absolute accuracy of transform inversion.
    pub eps_invert: f64,
    pub max_states: usize,
    pub grid: GridSpec,
}

impl Default for ToleranceConfig {
    fn default() -> Self {
        Self {
            eps_series: 1e-12,
            eps_root: 1e-10,
            eps_invert: 1e-7,
            max_states: 20_000,
            grid: GridSpec {
                step: 0.05,
                t_max: None,
            },
        }
    }
}

pub const ENV_EPS_SERIES: &str = "DAPQ_EPS_SERIES";
pub const ENV_EPS_ROOT: &str = "DAPQ_EPS_ROOT";
pub const ENV_EPS_INVERT: &str = "DAPQ_EPS_INVERT";
pub const ENV_MAX_STATES: &str = "DAPQ_MAX_STATES";

impl ToleranceConfig {
    /// Defaults, overridden by `DAPQ_EPS_SERIES`, `DAPQ_EPS_ROOT`,
    /// `DAPQ_EPS_INVERT` and `DAPQ_MAX_STATES` when set.
    pub fn from_env() -> Result<Self> {
        let mut tol = Self::default();
        let read = |key: &str| std::env::var(key).ok();
        if let Some(v) = read(ENV_EPS_SERIES) {
            tol.eps_series = parse_env(ENV_EPS_SERIES, &v)?;
        }
        if let Some(v) = read(ENV_EPS_ROOT) {
            tol.eps_root = parse_env(ENV_EPS_ROOT, &v)?;
        }
        if let Some(v) = read(ENV_EPS_INVERT) {
            tol.eps_invert = parse_env(ENV_EPS_INVERT, &v)?;
        }
        if let Some(v) = read(ENV_MAX_STATES) {
            tol.max_states = parse_env::<usize>(ENV_MAX_STATES, &v)?;
        }
        tol.check()?;
        Ok(tol)
    }

    pub fn check(&self) -> Result<()> {
        check_range("eps_series", self.eps_series, self.eps_series > 0.0, "> 0")?;
        check_range("eps_root", self.eps_root, self.eps_root > 0.0, "> 0")?;
        check_range("eps_invert", self.eps_invert, self.eps_invert > 0.0, "> 0")?;
        check_range("max_states", self.max_states as f64, self.max_states >= 1, ">= 1")?;
        check_range("grid.step", self.grid.step, self.grid.step > 0.0, "> 0")
    }
}

fn parse_env<T: std::str::FromStr>(key: &'static str, raw: &str) -> Result<T> {
    raw.trim().parse::<T>().map_err(|_| Error::OutOfRange {
        name: key,
        value: f64::NAN,
        expected: "a number",
    })
}
