//! Busy-period law of the M|G|∞ queue for service laws of the collection.
//!
//! With `E(t) = exp(−λt − ∫₀ᵗη)` and `L` the Laplace transform,
//!
//! ```text
//! B̄(s) = (1 − (s+λ)(1−G(0)) L[E](s)) / (1 − λ(1−G(0)) L[E](s))
//! ```
//!
//! For constant drift the law is an atom `G(0)` at the origin mixed with an
//! exponential of rate `r = e^{−ρ}(λ+η)` carrying weight `w = 1 − G(0)`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::numerics::{
    convolve_grid, integrate_semi_infinite_scaled, laplace_at, sum_series, GridFunction, Tolerance,
};
use crate::service::{BetaSpec, ServiceLaw};

/// Busy-period distribution for a given service law.
#[derive(Debug, Clone)]
pub struct BusyPeriodLaw {
    law: ServiceLaw,
}

/// Busy-period CDF sampled on a grid, with the bookkeeping of its series.
#[derive(Debug, Clone)]
pub struct BusyGrid {
    pub cdf: GridFunction,
    /// Number of convolution-series terms summed.
    pub terms: usize,
    /// Largest change made by clipping to `[0, 1]` and enforcing monotonicity.
    pub max_adjustment: f64,
}

/// Raw moments `E[Bⁿ]` and the derivatives `C⁽ⁿ⁾(0)` they are built from.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MomentTable {
    pub n_max: usize,
    /// `values[n-1] = E[Bⁿ]`.
    pub values: Vec<f64>,
    /// `c_values[n] = C⁽ⁿ⁾(0)` for `n = 0..n_max-1`.
    pub c_values: Vec<f64>,
}

impl MomentTable {
    pub fn get(&self, n: usize) -> Option<f64> {
        match n {
            0 => Some(1.0),
            n => self.values.get(n - 1).copied(),
        }
    }
}

/// Peak (`pi`, transform at `1/α`) and modified peak (`qi`).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Peaks {
    pub pi: f64,
    pub qi: f64,
    /// Transform at `1/α` computed by quadrature of the envelope.
    pub pi_numeric: f64,
    /// Closed-form `(p, β)` expression; constant drift only.
    pub pi_formula: Option<f64>,
    /// Modified-peak expression with the numerator sign as it is commonly
    /// printed (`−λp + β`); reported, not used.
    pub qi_printed_variant: Option<f64>,
}

pub(crate) fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, j| acc * (n - j) as f64 / (j + 1) as f64)
}

pub(crate) fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

/// `ρ/(e^ρ − ρ − 1)`, the modified-peak slope.
pub(crate) fn modified_peak_slope(rho: f64) -> f64 {
    rho / (rho.exp_m1() - rho)
}

/// Closed-form peak in the `(λ, ρ, p, β)` parameterization:
/// `(e^{−ρ}(λ+β)(ρ+1) − λp − β) / (λ(e^{−ρ}(ρ + αβ) + 1 − p))`.
pub fn peak_formula(lambda: f64, rho: f64, p: f64, beta: f64) -> f64 {
    let alpha = rho / lambda;
    let e = (-rho).exp();
    (e * (lambda + beta) * (rho + 1.0) - lambda * p - beta)
        / (lambda * (e * (rho + alpha * beta) + 1.0 - p))
}

/// The modified-peak expression with `−λp + β` in the numerator.
pub fn modified_peak_printed_variant(lambda: f64, rho: f64, p: f64, beta: f64) -> f64 {
    let alpha = rho / lambda;
    let e = (-rho).exp();
    (e * (lambda + beta) * (rho + 1.0) - lambda * p + beta)
        / (lambda * (e * (rho + alpha * beta) + 1.0 - p))
        * modified_peak_slope(rho)
        + 1.0
}

/// `1 − e^{−λt/(e^ρ−1)}`: the exponential law with the busy period's mean.
pub fn bp_lower_bound(lambda: f64, rho: f64, t: f64) -> f64 {
    if t <= 0.0 {
        return 0.0;
    }
    -(-lambda * t / rho.exp_m1()).exp_m1()
}

impl BusyPeriodLaw {
    pub fn new(law: ServiceLaw) -> Self {
        Self { law }
    }

    pub fn service(&self) -> &ServiceLaw {
        &self.law
    }

    /// `P(B = 0) = G(0)`.
    pub fn atom(&self) -> f64 {
        self.law.atom()
    }

    /// Weight of the exponential part, `(1 − e^{−ρ})(λ+η)/λ`; constant drift only.
    pub fn weight(&self) -> Option<f64> {
        self.law.eta().map(|_| 1.0 - self.law.atom())
    }

    /// Rate `e^{−ρ}(λ+η)` of the exponential part; constant drift only.
    pub fn rate(&self) -> Option<f64> {
        self.law
            .eta()
            .map(|eta| (-self.law.rho()).exp() * (self.law.lambda() + eta))
    }

    /// `B̄(s)`: closed form for constant drift, quadrature otherwise.
    pub fn transform(&self, s: f64) -> Result<f64> {
        if self.law.is_constant() {
            self.transform_closed(s)
        } else {
            self.transform_numeric(s, &Tolerance::fine())
        }
    }

    /// Atom-plus-exponential transform `G(0) + w·r/(s + r)`.
    pub fn transform_closed(&self, s: f64) -> Result<f64> {
        let (w, r) = self
            .weight()
            .zip(self.rate())
            .ok_or(Error::RequiresConstantDrift("closed-form busy-period transform"))?;
        if !(s >= 0.0) {
            return Err(Error::InvalidParameter(format!("transform needs s >= 0, got {s}")));
        }
        if w == 0.0 {
            return Ok(1.0);
        }
        Ok(self.atom() + w * r / (s + r))
    }

    /// `B̄(s)` from the envelope's Laplace transform evaluated by quadrature.
    pub fn transform_numeric(&self, s: f64, tol: &Tolerance) -> Result<f64> {
        let lambda = self.law.lambda();
        let w = 1.0 - self.law.atom();
        if w == 0.0 {
            if !(s > 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "Laplace argument must be positive, got {s}"
                )));
            }
            return Ok(1.0);
        }
        let le = laplace_at(|t| self.law.envelope(t), s, tol)?;
        Ok((1.0 - (s + lambda) * w * le) / (1.0 - lambda * w * le))
    }

    /// `B(t) = 1 − w e^{−rt}` for constant drift.
    pub fn cdf_closed(&self, t: f64) -> Result<f64> {
        let (w, r) = self
            .weight()
            .zip(self.rate())
            .ok_or(Error::RequiresConstantDrift("closed-form busy-period CDF"))?;
        if t < 0.0 {
            return Ok(0.0);
        }
        Ok(1.0 - w * (-r * t).exp())
    }

    /// Default grid step: `(λ + η)·dt ≤ 0.01` and `λ·dt ≤ 0.01`.
    pub fn default_dt(&self) -> f64 {
        0.01 / self.law.max_rate().max(self.law.lambda())
    }

    /// Busy-period CDF on `[0, t_max]` from the convolution series
    ///
    /// ```text
    /// B = F₀ * Σ_{n≥0} (λ(1−G(0)) E)^{*n},   F₀(t) = 1 − (1−G(0))(E(t) + λ∫₀ᵗE)
    /// ```
    ///
    /// where the zeroth convolution power is the identity. Works for any drift.
    pub fn cdf_general(&self, t_max: f64, dt: f64, tol: &Tolerance) -> Result<BusyGrid> {
        if !(t_max > 0.0) || !(dt > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "grid needs t_max > 0 and dt > 0, got {t_max}, {dt}"
            )));
        }
        let n = (t_max / dt).ceil() as usize + 1;
        let lambda = self.law.lambda();
        let w = 1.0 - self.law.atom();
        let base = GridFunction::sample(
            |t| 1.0 - w * (self.law.envelope(t) + lambda * self.law.envelope_integral(t)),
            dt,
            n,
        )?;
        let mut kernel = GridFunction::sample(|t| self.law.envelope(t), dt, n)?;
        kernel.scale(lambda * w);
        // mass of the kernel on the window bounds the term-to-term ratio
        let ratio = (lambda * w * self.law.envelope_integral(base.t_max())).min(self.law.c());
        let mut previous = base.clone();
        let series = sum_series(
            |k| {
                if k == 0 {
                    return Ok(base.clone());
                }
                previous = convolve_grid(&kernel, &previous)?;
                Ok(previous.clone())
            },
            0,
            Some(ratio),
            tol,
        )?;
        let (cdf, max_adjustment) = monotonize(series.sum);
        if max_adjustment > 10.0 * tol.abs_tol {
            return Err(Error::NonConvergence {
                what: "busy-period grid (monotone adjustment)",
                estimate: max_adjustment,
                error: 10.0 * tol.abs_tol,
            });
        }
        Ok(BusyGrid {
            cdf,
            terms: series.terms,
            max_adjustment,
        })
    }

    /// `E[Bⁿ] = w·n!/rⁿ` for constant drift.
    pub fn moments_closed(&self, n_max: usize) -> Result<Vec<f64>> {
        let (w, r) = self
            .weight()
            .zip(self.rate())
            .ok_or(Error::RequiresConstantDrift("closed-form busy-period moments"))?;
        Ok((1..=n_max)
            .map(|n| if w == 0.0 { 0.0 } else { w * factorial(n) / r.powi(n as i32) })
            .collect())
    }

    /// `C⁽ⁿ⁾(0) = ∫₀^∞ (−t)ⁿ e^{−λ∫₀ᵗ(1−G)} λ(1 − G(t)) dt`.
    pub fn c_derivative(&self, n: usize, tol: &Tolerance) -> Result<f64> {
        if self.law.is_degenerate() {
            return Ok(0.0);
        }
        let lambda = self.law.lambda();
        let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
        let scale = (n as f64 + 1.0) / self.law.decay_rate();
        let v = integrate_semi_infinite_scaled(
            |t| t.powi(n as i32) * self.law.log_busy_free(t).exp() * lambda * self.law.survival(t),
            scale,
            tol,
        )?;
        Ok(sign * v)
    }

    /// Busy-period moments from the functional equation
    /// `(B̄(s) − 1)(C(s) − 1) = s C(s)/λ` differentiated `n` times at `s = 0`:
    ///
    /// ```text
    /// E[Bⁿ] = (−1)^{n+1} e^ρ { n C⁽ⁿ⁻¹⁾(0)/λ − Σ_{p=1}^{n−1} (−1)^{n−p} C(n,p) E[B^{n−p}] C⁽ᵖ⁾(0) }
    /// ```
    pub fn moments(&self, n_max: usize, tol: &Tolerance) -> Result<MomentTable> {
        if n_max == 0 {
            return Err(Error::InvalidParameter("n_max must be >= 1".into()));
        }
        let lambda = self.law.lambda();
        let e_rho = self.law.rho().exp();
        let c_values = (0..n_max)
            .map(|n| self.c_derivative(n, tol))
            .collect::<Result<Vec<_>>>()?;
        let mut values: Vec<f64> = Vec::with_capacity(n_max);
        for n in 1..=n_max {
            let mut acc = n as f64 * c_values[n - 1] / lambda;
            for p in 1..n {
                let sign = if (n - p) % 2 == 0 { 1.0 } else { -1.0 };
                acc -= sign * binomial(n, p) * values[n - p - 1] * c_values[p];
            }
            let lead = if (n + 1) % 2 == 0 { 1.0 } else { -1.0 };
            values.push(lead * e_rho * acc);
        }
        Ok(MomentTable {
            n_max,
            values,
            c_values,
        })
    }

    /// Peak and modified peak.
    pub fn peaks(&self) -> Result<Peaks> {
        let s = 1.0 / self.law.alpha();
        let pi_numeric = self.transform_numeric(s, &Tolerance::fine())?;
        let pi = if self.law.is_constant() {
            self.transform_closed(s)?
        } else {
            pi_numeric
        };
        let params = self.law.params();
        let (pi_formula, qi_printed_variant) = match params.beta {
            BetaSpec::Constant(beta) => (
                Some(peak_formula(params.lambda, params.rho, params.p, beta)),
                Some(modified_peak_printed_variant(params.lambda, params.rho, params.p, beta)),
            ),
            BetaSpec::Tabulated(_) => (None, None),
        };
        Ok(Peaks {
            pi,
            qi: pi * modified_peak_slope(params.rho) + 1.0,
            pi_numeric,
            pi_formula,
            qi_printed_variant,
        })
    }
}

/// Clips to `[0, 1]` and takes the running maximum; returns the largest change.
fn monotonize(mut grid: GridFunction) -> (GridFunction, f64) {
    let mut running: f64 = 0.0;
    let mut adjustment: f64 = 0.0;
    for v in grid.values_mut() {
        let fixed = v.clamp(0.0, 1.0).max(running);
        adjustment = adjustment.max((fixed - *v).abs());
        *v = fixed;
        running = fixed;
    }
    (grid, adjustment)
}
