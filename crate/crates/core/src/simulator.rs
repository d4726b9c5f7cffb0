//! Monte Carlo oracle: an exact M|G|∞ busy-period simulator.
//!
//! With unlimited servers the system is busy exactly while some customer's
//! `[arrival, arrival + service)` interval covers the current time, so a busy
//! period is tracked by the running maximum of `arrival + service`. It ends
//! as soon as the next arrival falls at or after that maximum (ties end the
//! period). Service times come from the law's inverse CDF, which samples the
//! atom at the origin exactly.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::service::ServiceLaw;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum StartMode {
    /// Empty system at time 0; the first event is an idle period.
    EmptyAtZero,
    /// A customer arrives to an empty system at time 0.
    ArrivalAtZero,
}

#[derive(Debug, Clone)]
pub struct SimConfig {
    pub law: ServiceLaw,
    pub seed: u64,
    /// Complete busy cycles to collect.
    pub n_cycles: usize,
    pub renewal_horizon: f64,
    pub n_replications: usize,
    /// Times at which busy-period starts are counted; default `0, 1, …, horizon`.
    pub renewal_times: Vec<f64>,
    pub start_mode: StartMode,
}

impl SimConfig {
    pub fn new(law: ServiceLaw, seed: u64) -> Self {
        Self {
            law,
            seed,
            n_cycles: 10_000,
            renewal_horizon: 10.0,
            n_replications: 200,
            renewal_times: (0..=10).map(f64::from).collect(),
            start_mode: StartMode::EmptyAtZero,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_cycles < 1 {
            return Err(Error::InvalidParameter("n_cycles must be >= 1".into()));
        }
        if !(self.renewal_horizon > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "renewal horizon must be positive, got {}",
                self.renewal_horizon
            )));
        }
        if self.n_replications < 1 {
            return Err(Error::InvalidParameter("n_replications must be >= 1".into()));
        }
        if let Some(t) = self
            .renewal_times
            .iter()
            .find(|&&t| !(0.0..=self.renewal_horizon).contains(&t))
        {
            return Err(Error::InvalidParameter(format!(
                "renewal time {t} outside [0, {}]",
                self.renewal_horizon
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimResult {
    pub busy_samples: Vec<f64>,
    pub idle_samples: Vec<f64>,
    /// `cycle_samples[i] = idle_samples[i] + busy_samples[i]`.
    pub cycle_samples: Vec<f64>,
    pub renewal_times: Vec<f64>,
    /// `renewal_counts[rep][j]`: busy periods begun in `[0, renewal_times[j]]`.
    pub renewal_counts: Vec<Vec<u64>>,
    pub seed: u64,
}

struct Stream<'a> {
    rng: ChaCha8Rng,
    law: &'a ServiceLaw,
    inter: Exp<f64>,
}

impl<'a> Stream<'a> {
    fn new(law: &'a ServiceLaw, seed: u64) -> Self {
        Self {
            rng: ChaCha8Rng::seed_from_u64(seed),
            law,
            inter: Exp::new(law.lambda()).expect("lambda validated positive"),
        }
    }

    fn gap(&mut self) -> f64 {
        self.inter.sample(&mut self.rng)
    }

    fn service(&mut self) -> f64 {
        let u: f64 = self.rng.random();
        self.law
            .inverse_cdf(u)
            .expect("u in [0, 1) is always invertible")
    }
}

/// Simulates `n_cycles` consecutive (idle, busy) pairs from an empty system.
pub fn run_busy_cycles(config: &SimConfig) -> Result<SimResult> {
    config.validate()?;
    let mut stream = Stream::new(&config.law, config.seed);
    let n = config.n_cycles;
    let mut busy_samples = Vec::with_capacity(n);
    let mut idle_samples = Vec::with_capacity(n);

    let mut arrival = match config.start_mode {
        StartMode::EmptyAtZero => stream.gap(),
        StartMode::ArrivalAtZero => 0.0,
    };
    let mut idle_start = 0.0;
    while busy_samples.len() < n {
        idle_samples.push(arrival - idle_start);
        let start = arrival;
        let mut coverage = arrival + stream.service();
        loop {
            arrival += stream.gap();
            if arrival >= coverage {
                break;
            }
            coverage = coverage.max(arrival + stream.service());
        }
        busy_samples.push(coverage - start);
        idle_start = coverage;
    }
    let cycle_samples = idle_samples
        .iter()
        .zip(&busy_samples)
        .map(|(i, b)| i + b)
        .collect();
    Ok(SimResult {
        busy_samples,
        idle_samples,
        cycle_samples,
        renewal_times: Vec::new(),
        renewal_counts: Vec::new(),
        seed: config.seed,
    })
}

/// Replication seeds are `seed + index` (wrapping).
pub fn replication_seed(seed: u64, replication: usize) -> u64 {
    seed.wrapping_add(replication as u64)
}

/// Counts busy-period beginnings in `[0, t]` per replication, starting with
/// an arrival at time 0. A zero-length busy period (zero service, no
/// overlap) counts as a beginning.
pub fn run_renewal_counts(config: &SimConfig) -> Result<SimResult> {
    config.validate()?;
    if config.start_mode != StartMode::ArrivalAtZero {
        return Err(Error::InvalidParameter(
            "renewal counting needs start_mode = arrival-at-0".into(),
        ));
    }
    let horizon = config.renewal_horizon;
    let renewal_counts = (0..config.n_replications)
        .map(|rep| {
            let mut stream = Stream::new(&config.law, replication_seed(config.seed, rep));
            let mut starts = vec![0.0];
            let mut coverage = stream.service();
            let mut arrival = 0.0;
            loop {
                arrival += stream.gap();
                if arrival > horizon {
                    break;
                }
                if arrival >= coverage {
                    starts.push(arrival);
                }
                coverage = coverage.max(arrival + stream.service());
            }
            config
                .renewal_times
                .iter()
                .map(|&t| starts.partition_point(|&s| s <= t) as u64)
                .collect()
        })
        .collect();
    Ok(SimResult {
        busy_samples: Vec::new(),
        idle_samples: Vec::new(),
        cycle_samples: Vec::new(),
        renewal_times: config.renewal_times.clone(),
        renewal_counts,
        seed: config.seed,
    })
}

/// Mean and standard error of the counts at each renewal time.
pub fn renewal_summary(result: &SimResult) -> Vec<(f64, f64, f64)> {
    let reps = result.renewal_counts.len() as f64;
    result
        .renewal_times
        .iter()
        .enumerate()
        .map(|(j, &t)| {
            let xs: Vec<f64> = result.renewal_counts.iter().map(|r| r[j] as f64).collect();
            let (mean, se) = mean_and_se(&xs);
            debug_assert_eq!(xs.len() as f64, reps);
            (t, mean, se)
        })
        .collect()
}

/// Sample mean and its standard error.
pub fn mean_and_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, f64::INFINITY);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Right-continuous empirical distribution function.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalCdf {
    sorted: Vec<f64>,
}

impl EmpiricalCdf {
    pub fn new(samples: &[f64]) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::InvalidParameter("empirical CDF needs samples".into()));
        }
        if samples.iter().any(|x| x.is_nan()) {
            return Err(Error::InvalidParameter("samples contain NaN".into()));
        }
        let mut sorted = samples.to_vec();
        sorted.sort_by(f64::total_cmp);
        Ok(Self { sorted })
    }

    pub fn len(&self) -> usize {
        self.sorted.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sorted.is_empty()
    }

    /// Fraction of samples `≤ t`.
    pub fn eval(&self, t: f64) -> f64 {
        self.sorted.partition_point(|&x| x <= t) as f64 / self.sorted.len() as f64
    }

    /// `sup_t |F_n(t) − F(t)|` for a CDF `F` of a nonnegative variable that
    /// may carry an atom at 0 and is continuous elsewhere.
    pub fn ks_distance<F: Fn(f64) -> f64>(&self, cdf: F) -> f64 {
        let n = self.sorted.len() as f64;
        let mut worst: f64 = 0.0;
        let mut i = 0;
        while i < self.sorted.len() {
            let x = self.sorted[i];
            let j = i + self.sorted[i..].partition_point(|&y| y <= x);
            let f = cdf(x);
            let f_left = if x <= 0.0 { 0.0 } else { f };
            worst = worst
                .max((j as f64 / n - f).abs())
                .max((i as f64 / n - f_left).abs());
            i = j;
        }
        worst
    }
}

/// Writes one value per line in shortest round-trip form.
pub fn write_samples<W: std::io::Write>(mut out: W, samples: &[f64]) -> std::io::Result<()> {
    for x in samples {
        writeln!(out, "{x:?}")?;
    }
    out.flush()
}

/// Writes `replication,t,count` rows with a header.
pub fn write_renewal_csv<W: std::io::Write>(out: W, result: &SimResult) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let table = |e: csv::Error| Error::Table(e.to_string());
    w.write_record(["replication", "t", "count"]).map_err(table)?;
    for (rep, counts) in result.renewal_counts.iter().enumerate() {
        for (t, c) in result.renewal_times.iter().zip(counts) {
            w.write_record([rep.to_string(), format!("{t:?}"), c.to_string()])
                .map_err(table)?;
        }
    }
    w.flush().map_err(|e| Error::Table(e.to_string()))
}

/// Dvoretzky–Kiefer–Wolfowitz half-width at confidence `1 − alpha`.
pub fn dkw_bound(n: usize, alpha: f64) -> f64 {
    ((2.0 / alpha).ln() / (2.0 * n as f64)).sqrt()
}
