//! Service-time laws of the Riccati-induced collection.
//!
//! A member is fixed by the arrival rate `λ`, the traffic intensity `ρ` and a
//! drift `β(t)` mixed through `p`. Every quantity depends on `(p, β)` only
//! through the canonical drift
//!
//! ```text
//! η(t) = (λp + β(t)) / (1 − p)
//! ```
//!
//! With `E(t) = exp(−λt − ∫₀ᵗ η)`, `D = ∫₀^∞ E` and `c = 1 − e^{−ρ}` the
//! survival function is
//!
//! ```text
//! 1 − G(t) = (c/λ) · E(t) / (D − c ∫₀ᵗ E)
//! ```
//!
//! which for constant `η` (with `K = λ + η`) reduces to
//! `1 − G(t) = (cK/λ) e^{−Kt} / (e^{−ρ} + c e^{−Kt})`.

use std::io::Read;
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::numerics::{integrate, integrate_semi_infinite_scaled, invert_monotone, Tolerance};

/// Drift specification `β(t)` as accepted at the API surface.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum BetaSpec {
    Constant(f64),
    Tabulated(BetaTable),
}

/// Piecewise-linear `β(t)` through strictly increasing knots starting at
/// `t = 0`, held constant after the last knot.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BetaTable {
    knots: Vec<(f64, f64)>,
}

impl BetaTable {
    pub fn new(knots: Vec<(f64, f64)>) -> Result<Self> {
        let first = knots
            .first()
            .ok_or_else(|| Error::Table("no knots".into()))?;
        if first.0 != 0.0 {
            return Err(Error::Table(format!(
                "first knot must be at t = 0, got t = {}",
                first.0
            )));
        }
        if let Some(w) = knots.windows(2).find(|w| !(w[1].0 > w[0].0)) {
            return Err(Error::Table(format!(
                "knot times must be strictly increasing ({} then {})",
                w[0].0, w[1].0
            )));
        }
        if let Some(k) = knots.iter().find(|k| !k.0.is_finite() || !k.1.is_finite()) {
            return Err(Error::Table(format!("non-finite knot ({}, {})", k.0, k.1)));
        }
        Ok(Self { knots })
    }

    /// Reads a two-column `t,beta` CSV; a non-numeric first row is taken as a header.
    pub fn from_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(false)
            .trim(csv::Trim::All)
            .comment(Some(b'#'))
            .from_reader(reader);
        let mut knots = Vec::new();
        for (row, record) in rdr.records().enumerate() {
            let record = record.map_err(|e| Error::Table(e.to_string()))?;
            if record.len() != 2 {
                return Err(Error::Table(format!(
                    "row {}: expected 2 columns, found {}",
                    row + 1,
                    record.len()
                )));
            }
            let parsed = (record[0].parse::<f64>(), record[1].parse::<f64>());
            match parsed {
                (Ok(t), Ok(b)) => knots.push((t, b)),
                _ if row == 0 => continue,
                _ => {
                    return Err(Error::Table(format!(
                        "row {}: cannot parse ({}, {})",
                        row + 1,
                        &record[0],
                        &record[1]
                    )))
                }
            }
        }
        Self::new(knots)
    }

    pub fn from_path<P: AsRef<Path>>(path: P) -> Result<Self> {
        let file = std::fs::File::open(path.as_ref())
            .map_err(|e| Error::Table(format!("{}: {e}", path.as_ref().display())))?;
        Self::from_csv(file)
    }

    pub fn knots(&self) -> &[(f64, f64)] {
        &self.knots
    }

    pub fn eval(&self, t: f64) -> f64 {
        let k = &self.knots;
        if t <= 0.0 {
            return k[0].1;
        }
        match k.partition_point(|kn| kn.0 <= t) {
            i if i >= k.len() => k[k.len() - 1].1,
            i => {
                let (t0, b0) = k[i - 1];
                let (t1, b1) = k[i];
                b0 + (t - t0) / (t1 - t0) * (b1 - b0)
            }
        }
    }
}

/// Queue and service-law parameters.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QueueParams {
    pub lambda: f64,
    pub rho: f64,
    pub p: f64,
    pub beta: BetaSpec,
}

impl QueueParams {
    pub fn new(lambda: f64, rho: f64, p: f64, beta: BetaSpec) -> Self {
        Self {
            lambda,
            rho,
            p,
            beta,
        }
    }

    /// Parameters given directly by the canonical drift (`p = 0`, `β = η`).
    pub fn with_eta(lambda: f64, rho: f64, eta: f64) -> Self {
        Self::new(lambda, rho, 0.0, BetaSpec::Constant(eta))
    }

    /// `(p, β)` pair reproducing the canonical drift `eta`.
    pub fn with_eta_and_p(lambda: f64, rho: f64, eta: f64, p: f64) -> Self {
        Self::new(lambda, rho, p, BetaSpec::Constant(eta * (1.0 - p) - lambda * p))
    }

    /// Mean service time `α = ρ/λ`.
    pub fn alpha(&self) -> f64 {
        self.rho / self.lambda
    }

    /// Upper end `λ/(e^ρ − 1)` of the admissible drift band.
    pub fn eta_upper(&self) -> f64 {
        eta_upper(self.lambda, self.rho)
    }

    fn eta_of(&self, beta: f64) -> f64 {
        (self.lambda * self.p + beta) / (1.0 - self.p)
    }

    fn validate_scalars(&self) -> Result<()> {
        if !(self.lambda > 0.0) || !self.lambda.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "lambda must be positive, got {}",
                self.lambda
            )));
        }
        if !(self.rho > 0.0) || !self.rho.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "rho must be positive, got {}",
                self.rho
            )));
        }
        if !(0.0..1.0).contains(&self.p) {
            return Err(Error::InvalidParameter(format!(
                "p must lie in [0, 1), got {}",
                self.p
            )));
        }
        Ok(())
    }
}

pub(crate) fn eta_upper(lambda: f64, rho: f64) -> f64 {
    lambda / rho.exp_m1()
}

/// Slack allowed when comparing a drift with the band ends.
const BAND_SLACK: f64 = 1e-12;

fn check_band(lambda: f64, rho: f64, t: f64, mean_drift: f64) -> Result<()> {
    let (lower, upper) = (-lambda, eta_upper(lambda, rho));
    let slack = BAND_SLACK * lambda.max(upper);
    if mean_drift < lower - slack || mean_drift > upper + slack || !mean_drift.is_finite() {
        return Err(Error::Constraint {
            t,
            value: mean_drift,
            lower,
            upper,
        });
    }
    Ok(())
}

/// Canonical drift of a tabulated law with cached envelope integrals.
#[derive(Debug, Clone)]
struct TabulatedDrift {
    lambda: f64,
    /// Knot times and canonical drift values.
    times: Vec<f64>,
    etas: Vec<f64>,
    /// `∫₀^{t_i} η` at each knot.
    cum_eta: Vec<f64>,
    /// `∫_{t_i}^∞ E` at each knot.
    tail_at: Vec<f64>,
}

impl TabulatedDrift {
    fn segment(&self, t: f64) -> usize {
        self.times.partition_point(|&x| x <= t).max(1) - 1
    }

    fn eta_at(&self, t: f64) -> f64 {
        let i = self.segment(t);
        if i + 1 >= self.times.len() || t <= 0.0 {
            return self.etas[i.min(self.etas.len() - 1)];
        }
        let (t0, t1) = (self.times[i], self.times[i + 1]);
        let (e0, e1) = (self.etas[i], self.etas[i + 1]);
        e0 + (t - t0.max(0.0)) / (t1 - t0) * (e1 - e0)
    }

    fn cumulative(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return 0.0;
        }
        let i = self.segment(t);
        let dt = t - self.times[i];
        // trapezoid is exact for a linear drift
        self.cum_eta[i] + 0.5 * dt * (self.etas[i] + self.eta_at(t))
    }

    fn envelope(&self, t: f64) -> f64 {
        (-self.lambda * t - self.cumulative(t)).exp()
    }

    fn tail_rate(&self) -> f64 {
        self.lambda + self.etas[self.etas.len() - 1]
    }

    fn tail(&self, t: f64) -> f64 {
        let t = t.max(0.0);
        let last = self.times.len() - 1;
        if t >= self.times[last] {
            return self.envelope(t) / self.tail_rate();
        }
        let i = self.segment(t);
        let part = integrate(|u| self.envelope(u), t, self.times[i + 1], &Tolerance::fine())
            .expect("envelope is smooth and bounded on a segment");
        part + self.tail_at[i + 1]
    }
}

#[derive(Debug, Clone)]
enum Drift {
    Constant(f64),
    Tabulated(TabulatedDrift),
}

/// Evaluable member of the service-time collection.
#[derive(Debug, Clone)]
pub struct ServiceLaw {
    params: QueueParams,
    drift: Drift,
    denominator: f64,
    atom: f64,
}

/// How a service moment is computed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum MomentMethod {
    /// `∫ tⁿ g(t) dt` by quadrature.
    Quadrature,
    /// Geometric series in `(1 − e^ρ)`, valid for `ρ < ln 2`.
    Series,
    /// Riemann-type sum on the lattice `k/m`.
    Discretized { m: usize },
}

/// Truncation of the series route: the index required by the a-priori
/// conditions and the number of terms actually summed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SeriesTruncation {
    pub required: usize,
    pub used: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MomentEstimate {
    pub n: u32,
    pub value: f64,
    pub method: MomentMethod,
    pub truncation: Option<SeriesTruncation>,
    /// `(m, E_m)` for the discretized route at `m/8, m/4, m/2, m`.
    pub refinements: Vec<(usize, f64)>,
    /// Successive refinements moved monotonically toward the limit.
    pub monotone_refinement: Option<bool>,
}

impl ServiceLaw {
    /// Reduces `(p, β)` to the canonical drift and checks the admissible band.
    pub fn new(params: QueueParams) -> Result<Self> {
        params.validate_scalars()?;
        let (lambda, rho) = (params.lambda, params.rho);
        let c = -(-rho).exp_m1();
        match &params.beta {
            BetaSpec::Constant(beta) => {
                let eta = params.eta_of(*beta);
                check_band(lambda, rho, 0.0, eta)?;
                let k = (lambda + eta).max(0.0);
                let atom = (1.0 - c * k / lambda).clamp(0.0, 1.0);
                let denominator = if k > 0.0 { 1.0 / k } else { f64::INFINITY };
                Ok(Self {
                    drift: Drift::Constant(eta),
                    params,
                    denominator,
                    atom,
                })
            }
            BetaSpec::Tabulated(table) => {
                let drift = Self::tabulate(&params, table)?;
                let denominator = drift.tail_at[0];
                let atom = 1.0 - c / (lambda * denominator);
                let law = Self {
                    drift: Drift::Tabulated(drift),
                    params,
                    denominator,
                    atom,
                };
                law.check_distribution()?;
                Ok(law)
            }
        }
    }

    fn tabulate(params: &QueueParams, table: &BetaTable) -> Result<TabulatedDrift> {
        let lambda = params.lambda;
        let times: Vec<f64> = table.knots.iter().map(|k| k.0).collect();
        let etas: Vec<f64> = table.knots.iter().map(|k| params.eta_of(k.1)).collect();
        let mut cum_eta = vec![0.0; times.len()];
        for i in 1..times.len() {
            cum_eta[i] = cum_eta[i - 1] + 0.5 * (times[i] - times[i - 1]) * (etas[i] + etas[i - 1]);
        }
        let last = *etas.last().expect("nonempty");
        if !(lambda + last > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "tabulated drift must settle strictly above -lambda = {}; final value {last}",
                -lambda
            )));
        }
        let mut drift = TabulatedDrift {
            lambda,
            tail_at: vec![0.0; times.len()],
            times,
            etas,
            cum_eta,
        };

        // Mean drift on the knots refined tenfold, past the last knot, and in the limits.
        check_band(lambda, params.rho, 0.0, drift.etas[0])?;
        let t_last = *drift.times.last().expect("nonempty");
        let mut probes: Vec<f64> = drift
            .times
            .windows(2)
            .flat_map(|w| (1..=10).map(move |j| w[0] + (w[1] - w[0]) * j as f64 / 10.0))
            .collect();
        let reach = if t_last > 0.0 { t_last } else { 1.0 / lambda };
        probes.extend((1..=20).map(|j| t_last + reach * j as f64 / 2.0));
        for &t in &probes {
            check_band(lambda, params.rho, t, drift.cumulative(t) / t)?;
        }
        check_band(lambda, params.rho, f64::INFINITY, last)?;

        let n = drift.times.len();
        drift.tail_at[n - 1] = drift.envelope(t_last) / drift.tail_rate();
        for i in (0..n - 1).rev() {
            let seg = integrate(
                |u| drift.envelope(u),
                drift.times[i],
                drift.times[i + 1],
                &Tolerance::fine(),
            )?;
            drift.tail_at[i] = seg + drift.tail_at[i + 1];
        }
        Ok(drift)
    }

    fn check_distribution(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.atom) {
            return Err(Error::InvalidParameter(format!(
                "drift table yields atom G(0) = {} outside [0, 1]",
                self.atom
            )));
        }
        if let Drift::Tabulated(d) = &self.drift {
            let t_last = *d.times.last().expect("nonempty");
            let span = if t_last > 0.0 { 2.0 * t_last } else { 10.0 / d.tail_rate() };
            for j in 1..=400 {
                let t = span * j as f64 / 400.0;
                let g = self.pdf(t)?;
                if g < -1e-12 {
                    return Err(Error::InvalidParameter(format!(
                        "drift table yields a decreasing G near t = {t} (density {g})"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn params(&self) -> &QueueParams {
        &self.params
    }

    pub fn lambda(&self) -> f64 {
        self.params.lambda
    }

    pub fn rho(&self) -> f64 {
        self.params.rho
    }

    pub fn alpha(&self) -> f64 {
        self.params.alpha()
    }

    /// `1 − e^{−ρ}`.
    pub fn c(&self) -> f64 {
        -(-self.params.rho).exp_m1()
    }

    /// The constant canonical drift, if the law has one.
    pub fn eta(&self) -> Option<f64> {
        match self.drift {
            Drift::Constant(eta) => Some(eta),
            Drift::Tabulated(_) => None,
        }
    }

    pub fn is_constant(&self) -> bool {
        matches!(self.drift, Drift::Constant(_))
    }

    /// `G ≡ 1`: every service is of length zero (`η = −λ`).
    pub fn is_degenerate(&self) -> bool {
        self.atom >= 1.0
    }

    pub fn eta_at(&self, t: f64) -> f64 {
        match &self.drift {
            Drift::Constant(eta) => *eta,
            Drift::Tabulated(d) => d.eta_at(t),
        }
    }

    /// `λ + η(∞)`: exponential decay rate of the envelope and of `1 − G`.
    pub fn decay_rate(&self) -> f64 {
        match &self.drift {
            Drift::Constant(eta) => self.params.lambda + eta,
            Drift::Tabulated(d) => d.tail_rate(),
        }
    }

    /// Largest `λ + η(t)` over the drift; sets grid resolution.
    pub fn max_rate(&self) -> f64 {
        let lambda = self.params.lambda;
        match &self.drift {
            Drift::Constant(eta) => lambda + eta,
            Drift::Tabulated(d) => d.etas.iter().fold(lambda, |m, e| m.max(lambda + e)),
        }
    }

    /// `E(t) = exp(−λt − ∫₀ᵗ η)`.
    pub fn envelope(&self, t: f64) -> f64 {
        match &self.drift {
            Drift::Constant(eta) => (-(self.params.lambda + eta) * t).exp(),
            Drift::Tabulated(d) => d.envelope(t),
        }
    }

    /// `∫₀ᵗ E`.
    pub fn envelope_integral(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return 0.0;
        }
        match &self.drift {
            Drift::Constant(eta) => t * crate::numerics::one_minus_exp_over((self.params.lambda + eta) * t),
            Drift::Tabulated(d) => self.denominator - d.tail(t),
        }
    }

    /// `D = ∫₀^∞ E` (infinite for the degenerate law).
    pub fn denominator(&self) -> f64 {
        self.denominator
    }

    /// `P(T = 0) = G(0)`.
    pub fn atom(&self) -> f64 {
        self.atom
    }

    /// `1 − G(t)`, computed without cancellation.
    pub fn survival(&self, t: f64) -> f64 {
        if t < 0.0 {
            return 1.0;
        }
        let lambda = self.params.lambda;
        let c = self.c();
        match &self.drift {
            Drift::Constant(eta) => {
                let k = lambda + eta;
                if k <= 0.0 {
                    return 0.0;
                }
                let x = (-k * t).exp();
                c * k / lambda * x / ((-self.params.rho).exp() + c * x)
            }
            Drift::Tabulated(d) => {
                let den = (-self.params.rho).exp() * self.denominator + c * d.tail(t);
                c / lambda * d.envelope(t) / den
            }
        }
    }

    /// `G(t)`; zero for `t < 0`.
    pub fn cdf(&self, t: f64) -> f64 {
        if t < 0.0 {
            return 0.0;
        }
        1.0 - self.survival(t)
    }

    /// Density of the absolutely continuous part, `t > 0`.
    pub fn pdf(&self, t: f64) -> Result<f64> {
        if !(t > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "density is defined for t > 0 (the atom sits at 0), got {t}"
            )));
        }
        let lambda = self.params.lambda;
        let c = self.c();
        let e_rho = (-self.params.rho).exp();
        Ok(match &self.drift {
            Drift::Constant(eta) => {
                let k = lambda + eta;
                if k <= 0.0 {
                    return Ok(0.0);
                }
                let x = (-k * t).exp();
                let den = e_rho + c * x;
                c * e_rho * k * k * x / (lambda * den * den)
            }
            Drift::Tabulated(d) => {
                let e = d.envelope(t);
                let den = e_rho * self.denominator + c * d.tail(t);
                c / lambda * ((lambda + d.eta_at(t)) * e / den - c * e * e / (den * den))
            }
        })
    }

    /// Hazard rate `g(t)/(1 − G(t))`.
    pub fn hazard(&self, t: f64) -> Result<f64> {
        let s = self.survival(t);
        if s <= 0.0 {
            return Err(Error::InvalidParameter(format!(
                "hazard undefined where G(t) = 1 (t = {t})"
            )));
        }
        Ok(self.pdf(t)? / s)
    }

    /// Smallest `t ≥ 0` with `G(t) ≥ u`.
    pub fn inverse_cdf(&self, u: f64) -> Result<f64> {
        if !(0.0..1.0).contains(&u) {
            return Err(Error::InvalidParameter(format!(
                "inverse CDF needs 0 <= u < 1, got {u}"
            )));
        }
        if u <= self.atom {
            return Ok(0.0);
        }
        let lambda = self.params.lambda;
        let c = self.c();
        match &self.drift {
            Drift::Constant(eta) => {
                // (cK/λ)·x/(e^{−ρ} + cx) = v  with x = e^{−Kt}
                let k = lambda + eta;
                let v = 1.0 - u;
                let x = v * (-self.params.rho).exp() / (c * (k / lambda - v));
                Ok((-x.ln() / k).max(0.0))
            }
            Drift::Tabulated(_) => {
                let mut hi = 1.0 / self.decay_rate();
                while self.cdf(hi) < u {
                    hi *= 2.0;
                }
                let tol = Tolerance::new(1e-13, 1e-13, 200)?;
                invert_monotone(|t| self.cdf(t), u, 0.0, hi, &tol)
            }
        }
    }

    /// `dG/dt + λG² + (η(t) − λ)G − η(t)`, which vanishes for members of the collection.
    pub fn riccati_residual(&self, t: f64) -> Result<f64> {
        let lambda = self.params.lambda;
        let eta = self.eta_at(t);
        let g = self.cdf(t);
        Ok(self.pdf(t)? + lambda * g * g + (eta - lambda) * g - eta)
    }

    /// `∫₀ᵗ (1 − G)`, from `exp(−λ∫₀ᵗ(1−G)) = (D − c∫₀ᵗE)/D`.
    pub fn integrated_survival(&self, t: f64) -> f64 {
        -self.log_busy_free(t) / self.params.lambda
    }

    /// `ln exp(−λ∫₀ᵗ(1−G))`.
    pub fn log_busy_free(&self, t: f64) -> f64 {
        if t <= 0.0 || self.is_degenerate() {
            return 0.0;
        }
        let c = self.c();
        let e_rho = (-self.params.rho).exp();
        match &self.drift {
            Drift::Constant(eta) => {
                let x = (-(self.params.lambda + eta) * t).exp();
                (e_rho + c * x).ln()
            }
            Drift::Tabulated(d) => (e_rho + c * d.tail(t) / self.denominator).ln(),
        }
    }

    /// `E[Tⁿ]` for `n ≥ 1`.
    pub fn moment(&self, n: u32, method: MomentMethod) -> Result<MomentEstimate> {
        if n == 0 {
            return Err(Error::InvalidParameter("moment order must be >= 1".into()));
        }
        let mut est = MomentEstimate {
            n,
            value: 0.0,
            method,
            truncation: None,
            refinements: Vec::new(),
            monotone_refinement: None,
        };
        match method {
            MomentMethod::Quadrature => {
                if !self.is_degenerate() {
                    let scale = (n as f64 + 1.0) / self.decay_rate();
                    est.value = integrate_semi_infinite_scaled(
                        |t| if t > 0.0 { t.powi(n as i32) * self.pdf(t).unwrap_or(0.0) } else { 0.0 },
                        scale,
                        &Tolerance::fine(),
                    )?;
                }
            }
            MomentMethod::Series => {
                let (value, truncation) = self.series_moment(n, 1e-13)?;
                est.value = value;
                est.truncation = Some(truncation);
            }
            MomentMethod::Discretized { m } => {
                if m == 0 {
                    return Err(Error::InvalidParameter("lattice refinement m must be >= 1".into()));
                }
                let levels: Vec<usize> = [8, 4, 2, 1]
                    .iter()
                    .filter(|&&d| m % d == 0 && m / d >= 1)
                    .map(|&d| m / d)
                    .collect();
                for &level in &levels {
                    est.refinements.push((level, self.lattice_moment(n, level)?));
                }
                est.value = est.refinements.last().expect("m itself").1;
                est.monotone_refinement = Some(
                    est.refinements
                        .windows(2)
                        .all(|w| w[1].1 <= w[0].1 + 1e-15),
                );
            }
        }
        Ok(est)
    }

    fn series_moment(&self, n: u32, eps: f64) -> Result<(f64, SeriesTruncation)> {
        let eta = self.eta().ok_or(Error::RequiresConstantDrift("series moments"))?;
        let (lambda, rho) = (self.params.lambda, self.params.rho);
        if rho >= std::f64::consts::LN_2 {
            return Err(Error::Unsupported(format!(
                "series moments need rho < ln 2 for the (1 - e^rho)^k expansion to converge; got rho = {rho}"
            )));
        }
        let k_rate = lambda + eta;
        if !(k_rate > 0.0) {
            return Err(Error::Unsupported(
                "series moments exclude the degenerate law eta = -lambda".into(),
            ));
        }
        let q = -rho.exp_m1();
        let n_fact: f64 = (1..=n).map(f64::from).product();
        // M > 1/K − 1  and  M > log_{e^ρ−1}(ε e^ρ λ / (n! K)) − 1
        let m1 = 1.0 / k_rate - 1.0;
        let m2 = (eps * rho.exp() * lambda / (n_fact * k_rate)).ln() / rho.exp_m1().ln() - 1.0;
        let required = m1.max(m2).max(0.0).floor() as usize + 1;
        let lead = -(k_rate / lambda) * n_fact;
        let term = |k: usize| lead * q.powi(k as i32) / (k as f64 * k_rate).powi(n as i32);
        const CAP: usize = 10_000_000;
        let mut sum = 0.0;
        let mut k = 1;
        loop {
            sum += term(k);
            if k >= required && term(k + 1).abs() <= eps {
                break;
            }
            k += 1;
            if k > CAP {
                return Err(Error::NonConvergence {
                    what: "moment series",
                    estimate: sum,
                    error: term(k).abs(),
                });
            }
        }
        Ok((sum, SeriesTruncation { required, used: k }))
    }

    /// `Σ_{k≥1} (k/m)ⁿ [G(k/m) − G((k−1)/m)]`.
    fn lattice_moment(&self, n: u32, m: usize) -> Result<f64> {
        if self.is_degenerate() {
            return Ok(0.0);
        }
        let h = 1.0 / m as f64;
        let min_reach = (n as f64 + 30.0) / self.decay_rate();
        let cap = (1e4 * m as f64 * (1.0 + min_reach)) as usize;
        let mut sum = 0.0;
        let mut prev = self.survival(0.0);
        for k in 1..=cap {
            let x = k as f64 * h;
            let s = self.survival(x);
            let w = x.powi(n as i32);
            sum += w * (prev - s);
            prev = s;
            if x >= min_reach && w * s < 1e-16 * sum.abs().max(1e-300) {
                return Ok(sum);
            }
        }
        Err(Error::NonConvergence {
            what: "lattice moment",
            estimate: sum,
            error: f64::NAN,
        })
    }

    /// Two-sided bounds on `E[Tⁿ]` for constant `η > −λ`.
    pub fn moment_bounds(&self, n: u32) -> Result<(f64, f64)> {
        let eta = self.eta().ok_or(Error::RequiresConstantDrift("moment bounds"))?;
        if n == 0 {
            return Err(Error::InvalidParameter("moment order must be >= 1".into()));
        }
        let (lambda, rho) = (self.params.lambda, self.params.rho);
        let k_rate = lambda + eta;
        if !(k_rate > 0.0) {
            return Err(Error::Unsupported(
                "moment bounds exclude beta = -lambda".into(),
            ));
        }
        let n_fact: f64 = (1..=n).map(f64::from).product();
        let shape = n_fact / k_rate.powi(n as i32 - 1);
        let lower = self.c() * (-rho).exp() / lambda * shape;
        let upper = rho.exp_m1() / lambda * shape;
        Ok((lower, upper))
    }

    /// Equivalent law on the tabulated (numeric) route: the same constant
    /// drift written as a knot table spanning `horizon`.
    pub fn numeric_twin(&self, horizon: f64) -> Result<Self> {
        let BetaSpec::Constant(beta) = self.params.beta else {
            return Ok(self.clone());
        };
        let knots = 16;
        let table = BetaTable::new(
            (0..=knots)
                .map(|j| (horizon * j as f64 / knots as f64, beta))
                .collect(),
        )?;
        Self::new(QueueParams {
            beta: BetaSpec::Tabulated(table),
            ..self.params.clone()
        })
    }
}

/// `G(t)` for constant drift written straight from `(λ, ρ, η)`.
pub fn constant_cdf(lambda: f64, rho: f64, eta: f64, t: f64) -> f64 {
    1.0 - constant_survival(lambda, rho, eta, t)
}

fn constant_survival(lambda: f64, rho: f64, eta: f64, t: f64) -> f64 {
    let k = lambda + eta;
    if k <= 0.0 {
        return 0.0;
    }
    let c = -(-rho).exp_m1();
    let x = (-k * t).exp();
    c * k / lambda * x / ((-rho).exp() + c * x)
}

/// Both sides of the cross-ratio identity for four laws sharing `(λ, η)` and
/// differing in `ρ`: the cross-ratio of `G₁..G₄` at `t` and that of `e^{−ρᵢ}`.
pub fn cross_ratio(lambda: f64, eta: f64, rhos: [f64; 4], t: f64) -> Result<(f64, f64)> {
    if !(lambda > 0.0) {
        return Err(Error::InvalidParameter(format!("lambda must be positive, got {lambda}")));
    }
    if !(t > 0.0) {
        return Err(Error::InvalidParameter(format!("cross ratio needs t > 0, got {t}")));
    }
    for &rho in &rhos {
        if !(rho > 0.0) {
            return Err(Error::InvalidParameter(format!("rho must be positive, got {rho}")));
        }
        check_band(lambda, rho, 0.0, eta)?;
    }
    let s: Vec<f64> = rhos.iter().map(|&r| constant_survival(lambda, r, eta, t)).collect();
    let x: Vec<f64> = rhos.iter().map(|&r| (-r).exp()).collect();
    // G_i − G_j = S_j − S_i
    let ratio = |v: &[f64], sign: f64| -> Option<f64> {
        let d = |i: usize, j: usize| sign * (v[i] - v[j]);
        let den = d(3, 0) * d(2, 1);
        (den != 0.0).then(|| d(3, 1) * d(2, 0) / den)
    };
    match (ratio(&s, -1.0), ratio(&x, 1.0)) {
        (Some(lhs), Some(rhs)) if lhs.is_finite() && rhs.is_finite() => Ok((lhs, rhs)),
        _ => Err(Error::InvalidParameter(format!(
            "cross ratio is 0/0 for rho = {rhos:?}; the four values must be distinct"
        ))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::E;

    fn canonical() -> ServiceLaw {
        ServiceLaw::new(QueueParams::with_eta(1.0, 1.0, 0.0)).unwrap()
    }

    #[test]
    fn canonicalize_examples() {
        assert_eq!(canonical().eta(), Some(0.0));
        let law = ServiceLaw::new(QueueParams::new(1.0, 1.0, 0.5, BetaSpec::Constant(-0.5))).unwrap();
        assert_eq!(law.eta(), Some(0.0));
        assert_eq!(law.cdf(0.7), canonical().cdf(0.7));
        let err = ServiceLaw::new(QueueParams::with_eta(1.0, 1.0, -2.0)).unwrap_err();
        assert!(matches!(err, Error::Constraint { lower, .. } if lower == -1.0));
    }

    #[test]
    fn canonicalize_rejects_bad_scalars() {
        for params in [
            QueueParams::new(0.0, 1.0, 0.0, BetaSpec::Constant(0.0)),
            QueueParams::new(1.0, -1.0, 0.0, BetaSpec::Constant(0.0)),
            QueueParams::new(1.0, 1.0, 1.0, BetaSpec::Constant(0.0)),
            QueueParams::new(1.0, 1.0, -0.1, BetaSpec::Constant(0.0)),
        ] {
            assert!(matches!(ServiceLaw::new(params), Err(Error::InvalidParameter(_))));
        }
        // above the upper band end
        assert!(ServiceLaw::new(QueueParams::with_eta(1.0, 1.0, 0.6)).is_err());
    }

    #[test]
    fn cdf_examples() {
        let law = canonical();
        assert_abs_diff_eq!(law.cdf(0.0), (-1.0f64).exp(), epsilon = 1e-15);
        // G(1) = 1 − c/(1 + c) with c = 1 − e^{−1}
        let c = 1.0 - (-1.0f64).exp();
        assert_abs_diff_eq!(law.cdf(1.0), 1.0 - c / (1.0 + c), epsilon = 1e-15);
        assert_abs_diff_eq!(law.cdf(1.0), 0.612_699_836_780_282, epsilon = 1e-14);
        let deg = ServiceLaw::new(QueueParams::with_eta(1.0, 1.0, -1.0)).unwrap();
        for t in [0.0, 0.5, 3.0] {
            assert_eq!(deg.cdf(t), 1.0);
        }
        assert_eq!(law.cdf(-1.0), 0.0);
    }

    #[test]
    fn alternative_closed_form_agrees() {
        // G(t) = (1 + (η/λ)(1−e^ρ)x) / (1 − (1−e^ρ)x),  x = e^{−(λ+η)t}
        let (lambda, rho, eta) = (2.0, 0.8, 0.4);
        let law = ServiceLaw::new(QueueParams::with_eta(lambda, rho, eta)).unwrap();
        let q = 1.0 - f64::exp(rho);
        for t in [0.0, 0.1, 1.0, 4.0] {
            let x = (-(lambda + eta) * t).exp();
            let alt = (1.0 + eta / lambda * q * x) / (1.0 - q * x);
            assert_abs_diff_eq!(law.cdf(t), alt, epsilon = 1e-14);
        }
    }

    #[test]
    fn pdf_examples() {
        let law = canonical();
        let e1 = (-1.0f64).exp();
        assert_abs_diff_eq!(law.pdf(1e-12).unwrap(), e1 * (1.0 - e1), epsilon = 1e-10);
        assert!(law.pdf(0.0).is_err());
        let mass = integrate_semi_infinite_scaled(|t| law.pdf(t).unwrap_or(0.0), 1.0, &Tolerance::default())
            .unwrap();
        assert_abs_diff_eq!(mass, 1.0 - e1, epsilon = 1e-8);

        let upper = ServiceLaw::new(QueueParams::with_eta(1.0, 1.0, 1.0 / (E - 1.0))).unwrap();
        for t in [0.2, 1.0, 3.0] {
            let h = 1e-5;
            let fd = (upper.cdf(t + h) - upper.cdf(t - h)) / (2.0 * h);
            assert_abs_diff_eq!(upper.pdf(t).unwrap(), fd, epsilon = 1e-6);
        }
    }

    #[test]
    fn atom_examples() {
        assert_abs_diff_eq!(canonical().atom(), (-1.0f64).exp(), epsilon = 1e-15);
        let upper = ServiceLaw::new(QueueParams::with_eta(1.0, 1.0, 1.0 / (E - 1.0))).unwrap();
        assert_abs_diff_eq!(upper.atom(), 0.0, epsilon = 1e-15);
        let deg = ServiceLaw::new(QueueParams::with_eta(1.0, 1.0, -1.0)).unwrap();
        assert_eq!(deg.atom(), 1.0);
    }

    #[test]
    fn inverse_cdf_examples() {
        let law = canonical();
        assert_eq!(law.inverse_cdf(0.2).unwrap(), 0.0);
        assert_eq!(law.inverse_cdf((-1.0f64).exp()).unwrap(), 0.0);
        assert_abs_diff_eq!(law.inverse_cdf(0.5).unwrap(), (E - 1.0).ln(), epsilon = 1e-14);
        let deg = ServiceLaw::new(QueueParams::with_eta(1.0, 1.0, -1.0)).unwrap();
        assert_eq!(deg.inverse_cdf(0.99).unwrap(), 0.0);
        assert!(law.inverse_cdf(1.0).is_err());
        assert!(law.inverse_cdf(-0.1).is_err());
    }

    #[test]
    fn riccati_residual_examples() {
        for eta in [-0.5, 0.0, 0.3, 1.0 / (E - 1.0)] {
            let law = ServiceLaw::new(QueueParams::with_eta(1.0, 1.0, eta)).unwrap();
            for t in [0.1, 1.0, 5.0] {
                assert!(law.riccati_residual(t).unwrap().abs() < 1e-12);
            }
        }
        let deg = ServiceLaw::new(QueueParams::with_eta(1.0, 1.0, -1.0)).unwrap();
        assert_eq!(deg.riccati_residual(1.0).unwrap(), 0.0);
    }

    #[test]
    fn moments_basic() {
        let law = canonical();
        let m1 = law.moment(1, MomentMethod::Quadrature).unwrap();
        assert_abs_diff_eq!(m1.value, 1.0, epsilon = 1e-9);
        let deg = ServiceLaw::new(QueueParams::with_eta(1.0, 1.0, -1.0)).unwrap();
        assert_eq!(deg.moment(1, MomentMethod::Quadrature).unwrap().value, 0.0);
        assert!(law.moment(0, MomentMethod::Quadrature).is_err());
        assert!(matches!(law.moment(2, MomentMethod::Series), Err(Error::Unsupported(_))));

        let small = ServiceLaw::new(QueueParams::with_eta(1.0, 0.5, 0.0)).unwrap();
        let q = small.moment(2, MomentMethod::Quadrature).unwrap().value;
        let s = small.moment(2, MomentMethod::Series).unwrap();
        assert_abs_diff_eq!(q, s.value, epsilon = 1e-6);
        let tr = s.truncation.unwrap();
        assert!(tr.used >= tr.required);
    }

    #[test]
    fn discretized_moment_refines_downward() {
        let law = canonical();
        let est = law.moment(2, MomentMethod::Discretized { m: 256 }).unwrap();
        assert_eq!(est.refinements.iter().map(|r| r.0).collect::<Vec<_>>(), vec![32, 64, 128, 256]);
        assert_eq!(est.monotone_refinement, Some(true));
        let exact = law.moment(2, MomentMethod::Quadrature).unwrap().value;
        assert!(est.value > exact && est.value - exact < 1e-2);
    }

    #[test]
    fn moment_bound_examples() {
        let (_, upper) = canonical().moment_bounds(1).unwrap();
        assert_abs_diff_eq!(upper, E - 1.0, epsilon = 1e-14);
        let deg = ServiceLaw::new(QueueParams::with_eta(1.0, 1.0, -1.0)).unwrap();
        assert!(deg.moment_bounds(1).is_err());
    }

    #[test]
    fn cross_ratio_examples() {
        let (lhs, rhs) = cross_ratio(1.0, 0.0, [0.5, 1.0, 1.5, 2.0], 1.0).unwrap();
        assert_abs_diff_eq!(lhs, rhs, epsilon = 1e-10);
        assert_abs_diff_eq!(rhs, 1.307_20, epsilon = 1e-4);
        // swap (ρ₁,ρ₂) and (ρ₃,ρ₄) together
        let (l2, _) = cross_ratio(1.0, 0.0, [1.0, 0.5, 2.0, 1.5], 1.0).unwrap();
        assert_abs_diff_eq!(lhs, l2, epsilon = 1e-12);
        let (l0, r0) = cross_ratio(1.0, 0.0, [0.5, 1.0, 1.5, 2.0], 1e-12).unwrap();
        assert_abs_diff_eq!(l0, r0, epsilon = 1e-10);
        assert!(cross_ratio(1.0, 0.0, [0.5, 1.0, 1.0, 0.5], 1.0).is_err());
    }

    #[test]
    fn table_parsing() {
        let t = BetaTable::from_csv("t,beta\n0,0.1\n1,0.2\n".as_bytes()).unwrap();
        assert_eq!(t.knots(), &[(0.0, 0.1), (1.0, 0.2)]);
        let t = BetaTable::from_csv("0,0.1\n2,0.3\n".as_bytes()).unwrap();
        assert_abs_diff_eq!(t.eval(1.0), 0.2, epsilon = 1e-15);
        assert_eq!(t.eval(5.0), 0.3);
        assert!(BetaTable::from_csv("0.5,0\n1,0\n".as_bytes()).is_err());
        assert!(BetaTable::from_csv("0,0\n1,0\n1,0\n".as_bytes()).is_err());
        assert!(BetaTable::from_csv("0,0\n1,x\n".as_bytes()).is_err());
        assert!(BetaTable::from_csv("0,0,0\n".as_bytes()).is_err());
    }

    #[test]
    fn tabulated_constant_matches_closed_form() {
        let closed = ServiceLaw::new(QueueParams::with_eta(1.0, 1.0, 0.2)).unwrap();
        let twin = closed.numeric_twin(10.0).unwrap();
        assert!(!twin.is_constant());
        assert_abs_diff_eq!(twin.atom(), closed.atom(), epsilon = 1e-12);
        for t in [0.0, 0.3, 2.0, 9.9, 25.0] {
            assert_abs_diff_eq!(twin.cdf(t), closed.cdf(t), epsilon = 1e-11);
        }
        for t in [0.3, 2.0, 25.0] {
            assert_abs_diff_eq!(twin.pdf(t).unwrap(), closed.pdf(t).unwrap(), epsilon = 1e-11);
        }
        assert_abs_diff_eq!(
            twin.inverse_cdf(0.8).unwrap(),
            closed.inverse_cdf(0.8).unwrap(),
            epsilon = 1e-9
        );
    }

    #[test]
    fn tabulated_band_violation_names_time() {
        // drift climbs above λ/(e^ρ − 1) ≈ 0.582 and stays there
        let table = BetaTable::new(vec![(0.0, 0.0), (1.0, 2.0)]).unwrap();
        let err = ServiceLaw::new(QueueParams::new(1.0, 1.0, 0.0, BetaSpec::Tabulated(table))).unwrap_err();
        assert!(matches!(err, Error::Constraint { t, upper, .. } if t > 0.0 && (upper - 1.0 / (E - 1.0)).abs() < 1e-12));
    }

    #[test]
    fn tabulated_varying_law_is_valid() {
        let table = BetaTable::new(vec![(0.0, -0.4), (1.0, 0.1), (3.0, 0.4), (5.0, 0.2)]).unwrap();
        let law = ServiceLaw::new(QueueParams::new(1.0, 1.0, 0.0, BetaSpec::Tabulated(table))).unwrap();
        let mean = integrate_semi_infinite_scaled(|t| law.survival(t), 1.0, &Tolerance::default()).unwrap();
        assert_abs_diff_eq!(mean, 1.0, epsilon = 1e-7);
        for t in [0.1, 0.5, 1.0, 2.5, 4.0, 7.0] {
            assert!(law.riccati_residual(t).unwrap().abs() < 1e-8);
        }
    }
}
