//! Small numerical kernels shared by the analytic modules.

use std::f64::consts::PI;

use twofloat::TwoFloat;

/// Neumaier-compensated running sum.
#[derive(Debug, Clone, Copy, Default)]
pub struct KahanSum {
    sum: f64,
    comp: f64,
}

impl KahanSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

/// Sums in descending magnitude order with compensation.
pub fn stable_sum(values: &mut [f64]) -> f64 {
    values.sort_by(|a, b| b.abs().total_cmp(&a.abs()));
    let mut acc = KahanSum::new();
    for &v in values.iter() {
        acc.add(v);
    }
    acc.value()
}

/// Poisson probabilities `P[X = k]` for `k = 0..` until the remaining upper
/// tail drops below `tail_eps`. Returns the weights and the discarded tail mass.
pub fn poisson_weights(mean: f64, tail_eps: f64) -> (Vec<f64>, f64) {
    if mean <= 0.0 {
        return (vec![1.0], 0.0);
    }
    let ln_mean = mean.ln();
    let mut weights = Vec::new();
    let mut ln_fact = 0.0;
    let mut k = 0usize;
    loop {
        if k > 0 {
            ln_fact += (k as f64).ln();
        }
        let w = (-mean + k as f64 * ln_mean - ln_fact).exp();
        weights.push(w);
        // past the mode the tail is dominated by a geometric series in mean/(k+2)
        if k as f64 + 2.0 > mean {
            let ratio = mean / (k as f64 + 2.0);
            let bound = w * ratio / (1.0 - ratio);
            if bound < tail_eps {
                return (weights, bound);
            }
        }
        k += 1;
    }
}

/// Poisson pmf for `k = 0..len`.
pub fn poisson_pmf(mean: f64, len: usize) -> Vec<f64> {
    let mut out = vec![0.0; len];
    if len == 0 {
        return out;
    }
    if mean <= 0.0 {
        out[0] = 1.0;
        return out;
    }
    let ln_mean = mean.ln();
    let mut ln_fact = 0.0;
    for (k, slot) in out.iter_mut().enumerate() {
        if k > 0 {
            ln_fact += (k as f64).ln();
        }
        *slot = (-mean + k as f64 * ln_mean - ln_fact).exp();
    }
    out
}

/// Smallest `n` such that the Poisson(`mean`) upper tail beyond `n` is below `eps`.
pub fn poisson_cutoff(mean: f64, eps: f64) -> usize {
    poisson_weights(mean, eps).0.len()
}

/// Nodes and weights of the `n`-point Gauss-Legendre rule on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let nf = n as f64;
    for i in 0..n.div_ceil(2) {
        let mut x = (PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, x);
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Double-double `e^x` for moderate `|x|`, via range halving and Taylor series.
pub fn dd_exp(x: f64) -> TwoFloat {
    let mut halvings = 0u32;
    let mut y = x;
    while y.abs() > 0.125 {
        y *= 0.5;
        halvings += 1;
    }
    let y = TwoFloat::from(y);
    let mut term = TwoFloat::from(1.0);
    let mut sum = TwoFloat::from(1.0);
    for n in 1..40 {
        term = term * y / (n as f64);
        sum += term;
        if term.hi().abs() < 1e-34 {
            break;
        }
    }
    for _ in 0..halvings {
        sum = sum * sum;
    }
    sum
}

/// Double-double `base^n` by repeated squaring.
pub fn dd_powi(base: TwoFloat, mut n: u32) -> TwoFloat {
    let mut result = TwoFloat::from(1.0);
    let mut b = base;
    while n > 0 {
        if n & 1 == 1 {
            result *= b;
        }
        b = b * b;
        n >>= 1;
    }
    result
}

/// Double-double quotient with one Newton-style correction step.
pub fn dd_div(a: TwoFloat, b: TwoFloat) -> TwoFloat {
    let q1 = a.hi() / b.hi();
    let r = a - b * q1;
    let q2 = r.hi() / b.hi();
    let r = r - b * q2;
    let q3 = r.hi() / b.hi();
    TwoFloat::new_add(q1, q2) + q3
}

/// Safeguarded bisection for a sign change of `f` on `[lo, hi]`.
pub fn bisect<F: FnMut(f64) -> f64>(mut f: F, mut lo: f64, mut hi: f64, tol: f64) -> Option<f64> {
    let mut flo = f(lo);
    let fhi = f(hi);
    if flo == 0.0 {
        return Some(lo);
    }
    if fhi == 0.0 {
        return Some(hi);
    }
    if flo.signum() == fhi.signum() {
        return None;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if hi - lo <= tol || mid == lo || mid == hi {
            return Some(mid);
        }
        let fm = f(mid);
        if fm == 0.0 {
            return Some(mid);
        }
        if fm.signum() == flo.signum() {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    Some(0.5 * (lo + hi))
}

/// `%g`-style formatting with `digits` significant digits.
pub fn format_sig(x: f64, digits: usize) -> String {
    if x == 0.0 || !x.is_finite() {
        return if x == 0.0 { "0".to_string() } else { x.to_string() };
    }
    let sci = format!("{:.*e}", digits.saturating_sub(1), x);
    let (mantissa, exp) = sci.split_once('e').unwrap();
    let exp: i32 = exp.parse().unwrap();
    if exp < -5 || exp >= digits as i32 {
        let m = trim_zeros(mantissa);
        return format!("{m}e{}{:02}", if exp < 0 { '-' } else { '+' }, exp.abs());
    }
    let decimals = (digits as i32 - 1 - exp).max(0) as usize;
    trim_zeros(&format!("{:.*}", decimals, x)).to_string()
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}
