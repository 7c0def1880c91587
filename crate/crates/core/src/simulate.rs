//! Discrete-event simulation of the two-class delayed APQ.

use std::collections::VecDeque;
use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{QueueConfig, ServiceKind};
use crate::numeric::format_sig;
use crate::transforms::{CdfCurve, Provenance};

pub const RAW_CSV_HEADER: &str = "rep,class,arrival,wait";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub queue: QueueConfig,
    /// Customers recorded per replication, after the burn-in.
    pub n_customers: usize,
    /// Served customers discarded before recording starts.
    pub burn_in: usize,
    pub replications: usize,
    pub seed: u64,
}

impl SimConfig {
    pub fn new(queue: QueueConfig, seed: u64) -> Self {
        Self {
            queue,
            n_customers: 4000,
            burn_in: 1500,
            replications: 50,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.queue.validate()?;
        if self.n_customers == 0 || self.n_customers <= self.burn_in {
            return Err(Error::OutOfRange {
                name: "n_customers",
                value: self.n_customers as f64,
                expected: "> burn_in",
            });
        }
        if self.replications == 0 {
            return Err(Error::OutOfRange {
                name: "replications",
                value: 0.0,
                expected: ">= 1",
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WaitRecord {
    /// 1 or 2.
    pub class: u8,
    pub arrival: f64,
    pub wait: f64,
}

/// Per-replication random stream.
pub fn replication_rng(seed: u64, rep: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(rep as u64);
    rng
}

/// Service order key at time `now`: larger credit first, then earlier arrival, then class 1.
fn outranks(now: f64, b: f64, d: f64, first: f64, second: f64) -> bool {
    let c1 = now - first;
    let c2 = b * (now - second - d).max(0.0);
    if c1 != c2 {
        return c1 > c2;
    }
    first <= second
}

/// Simulates one replication and returns the recorded customers in service order.
pub fn run_single(sim: &SimConfig, rep: usize) -> Result<Vec<WaitRecord>> {
    sim.validate()?;
    let q = sim.queue;
    let lambda = q.lambda();
    let mut rng = replication_rng(sim.seed, rep);
    let interarrival = if lambda > 0.0 {
        Some(Exp::new(lambda).unwrap())
    } else {
        None
    };
    let service_exp = Exp::new(q.mu).unwrap();
    let class1_share = if lambda > 0.0 { q.lambda1 / lambda } else { 0.0 };

    let Some(interarrival) = interarrival else {
        return Ok(Vec::new());
    };

    let mut next_arrival = interarrival.sample(&mut rng);
    let mut next_class = if rng.gen::<f64>() < class1_share { 1u8 } else { 2u8 };
    let mut queue1: VecDeque<f64> = VecDeque::new();
    let mut queue2: VecDeque<f64> = VecDeque::new();
    let mut now = 0.0f64;
    let mut served = 0usize;
    let total = sim.burn_in + sim.n_customers;
    let mut out = Vec::with_capacity(sim.n_customers);

    while served < total {
        // admit everything that has arrived by the time the server frees up
        while next_arrival <= now || (queue1.is_empty() && queue2.is_empty()) {
            if queue1.is_empty() && queue2.is_empty() && next_arrival > now {
                now = next_arrival;
            }
            match next_class {
                1 => queue1.push_back(next_arrival),
                _ => queue2.push_back(next_arrival),
            }
            next_arrival += interarrival.sample(&mut rng);
            next_class = if rng.gen::<f64>() < class1_share { 1 } else { 2 };
        }
        let pick_first = match (queue1.front(), queue2.front()) {
            (Some(&a1), Some(&a2)) => outranks(now, q.b, q.d, a1, a2),
            (Some(_), None) => true,
            _ => false,
        };
        let (class, arrival) = if pick_first {
            (1u8, queue1.pop_front().unwrap())
        } else {
            (2u8, queue2.pop_front().unwrap())
        };
        if served >= sim.burn_in {
            out.push(WaitRecord {
                class,
                arrival,
                wait: now - arrival,
            });
        }
        served += 1;
        now += match q.service {
            ServiceKind::Exponential => service_exp.sample(&mut rng),
            ServiceKind::Deterministic => 1.0 / q.mu,
        };
    }
    Ok(out)
}

/// Replication-averaged statistics for one class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassStats {
    pub curve: CdfCurve,
    pub mean: f64,
    pub std_error: f64,
    pub rep_means: Vec<f64>,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalCdf {
    pub class1: Option<ClassStats>,
    pub class2: Option<ClassStats>,
    pub replications: usize,
}

impl EmpiricalCdf {
    pub fn class(&self, class: u8) -> Option<&ClassStats> {
        match class {
            1 => self.class1.as_ref(),
            _ => self.class2.as_ref(),
        }
    }
}

pub fn empirical_cdf_values(waits: &mut [f64], grid: &[f64]) -> Vec<f64> {
    waits.sort_by(f64::total_cmp);
    let n = waits.len() as f64;
    grid.iter()
        .map(|&t| waits.partition_point(|&w| w <= t) as f64 / n)
        .collect()
}

fn mean_and_se(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, f64::NAN);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

fn class_stats(per_rep: &[(Vec<f64>, f64, usize)], grid: &[f64]) -> Option<ClassStats> {
    let used: Vec<&(Vec<f64>, f64, usize)> = per_rep.iter().filter(|r| r.2 > 0).collect();
    if used.is_empty() {
        return None;
    }
    let mut avg = vec![0.0; grid.len()];
    for (curve, _, _) in &used {
        for (a, v) in avg.iter_mut().zip(curve) {
            *a += v;
        }
    }
    let k = used.len() as f64;
    avg.iter_mut().for_each(|a| *a /= k);
    let rep_means: Vec<f64> = used.iter().map(|r| r.1).collect();
    let (mean, std_error) = mean_and_se(&rep_means);
    Some(ClassStats {
        curve: CdfCurve::new(grid.to_vec(), avg, Provenance::Empirical),
        mean,
        std_error,
        rep_means,
        count: used.iter().map(|r| r.2).sum(),
    })
}

/// Runs all replications, then averages per-replication empirical CDFs on `grid`.
pub fn run_replicated(sim: &SimConfig, grid: &[f64]) -> Result<EmpiricalCdf> {
    Ok(summarize(&run_all(sim)?, grid, sim.replications))
}

/// Raw records of every replication, in replication order.
pub fn run_all(sim: &SimConfig) -> Result<Vec<Vec<WaitRecord>>> {
    sim.validate()?;
    (0..sim.replications)
        .into_par_iter()
        .map(|rep| run_single(sim, rep))
        .collect()
}

pub fn summarize(records: &[Vec<WaitRecord>], grid: &[f64], replications: usize) -> EmpiricalCdf {
    let per_class = |class: u8| -> Vec<(Vec<f64>, f64, usize)> {
        records
            .iter()
            .map(|rep| {
                let mut waits: Vec<f64> = rep.iter().filter(|r| r.class == class).map(|r| r.wait).collect();
                if waits.is_empty() {
                    return (Vec::new(), 0.0, 0);
                }
                let mean = waits.iter().sum::<f64>() / waits.len() as f64;
                let n = waits.len();
                (empirical_cdf_values(&mut waits, grid), mean, n)
            })
            .collect()
    };
    EmpiricalCdf {
        class1: class_stats(&per_class(1), grid),
        class2: class_stats(&per_class(2), grid),
        replications,
    }
}

/// Writes raw records as `rep,class,arrival,wait` with 12 significant digits.
pub fn write_raw_csv<W: Write>(mut out: W, records: &[Vec<WaitRecord>]) -> std::io::Result<()> {
    writeln!(out, "{RAW_CSV_HEADER}")?;
    for (rep, recs) in records.iter().enumerate() {
        for r in recs {
            writeln!(
                out,
                "{},{},{},{}",
                rep,
                r.class,
                format_sig(r.arrival, 12),
                format_sig(r.wait, 12)
            )?;
        }
    }
    Ok(())
}
