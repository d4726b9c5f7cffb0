//! Busy cycle (idle period followed by a busy period) and the renewal
//! function counting busy-period beginnings.
//!
//! The idle period is exponential with rate `λ` and independent of the busy
//! period, so `Z̄(s) = λ/(λ+s) · B̄(s)`.

use serde::Serialize;

use crate::busy_period::{binomial, factorial, BusyGrid, BusyPeriodLaw, MomentTable, Peaks};
use crate::error::{Error, Result};
use crate::numerics::{convolve_grid, integrate, one_minus_exp_over, GridFunction, Tolerance};
use crate::service::ServiceLaw;

/// `P(X + Y > t)` for independent exponentials of rates `a` and `b`; stable
/// when the rates coincide (Erlang limit).
pub(crate) fn hypoexp_survival(a: f64, b: f64, t: f64) -> f64 {
    if t <= 0.0 {
        return 1.0;
    }
    (-b * t).exp() * (1.0 + b * t * one_minus_exp_over((a - b) * t))
}

#[derive(Debug, Clone)]
pub struct BusyCycleLaw {
    bp: BusyPeriodLaw,
}

/// Busy-cycle peak `pi′` and modified peak `qi′`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CyclePeaks {
    pub pi: f64,
    pub qi: f64,
    /// `α·(e^{−ρ}(λ+β)(ρ+1) − λp − β) / ((ρ+1)(e^{−ρ}(ρ+αβ) + 1 − p))`; constant drift only.
    pub pi_formula: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RenewalMode {
    Closed,
    Numeric,
}

/// `R(t)`, the mean number of busy periods beginning in `[0, t]`.
#[derive(Debug, Clone)]
pub struct RenewalCurve {
    pub grid: GridFunction,
    pub mode: RenewalMode,
}

impl BusyCycleLaw {
    pub fn new(law: ServiceLaw) -> Self {
        Self {
            bp: BusyPeriodLaw::new(law),
        }
    }

    pub fn busy_period(&self) -> &BusyPeriodLaw {
        &self.bp
    }

    pub fn service(&self) -> &ServiceLaw {
        self.bp.service()
    }

    fn lambda(&self) -> f64 {
        self.service().lambda()
    }

    pub fn transform(&self, s: f64) -> Result<f64> {
        let lambda = self.lambda();
        Ok(lambda / (lambda + s) * self.bp.transform(s)?)
    }

    /// `Z(t)` for constant drift: `1 − G(0)e^{−λt} − w·P(Exp(λ) + Exp(r) > t)`.
    ///
    /// Equivalent to the two-exponential mixture
    /// `1 − cK/(λ−r)·e^{−rt} + η/(λ−r)·e^{−λt}` and continuous through `λ = r`.
    pub fn cdf_closed(&self, t: f64) -> Result<f64> {
        let (w, r) = self
            .bp
            .weight()
            .zip(self.bp.rate())
            .ok_or(Error::RequiresConstantDrift("closed-form busy-cycle CDF"))?;
        if t <= 0.0 {
            return Ok(0.0);
        }
        let lambda = self.lambda();
        let idle_only = (-lambda * t).exp();
        Ok(1.0 - (1.0 - w) * idle_only - w * hypoexp_survival(lambda, r, t))
    }

    /// Exponential idle density convolved with the general busy-period grid.
    pub fn cdf_general(&self, t_max: f64, dt: f64, tol: &Tolerance) -> Result<BusyGrid> {
        let busy = self.bp.cdf_general(t_max, dt, tol)?;
        let lambda = self.lambda();
        let idle = GridFunction::sample(|t| lambda * (-lambda * t).exp(), dt, busy.cdf.len())?;
        let cdf = convolve_grid(&idle, &busy.cdf)?;
        Ok(BusyGrid { cdf, ..busy })
    }

    /// `E[Zⁿ] = Σ_p C(n,p) E[Bᵖ] (n−p)!/λ^{n−p}`.
    pub fn moments_from(&self, busy: &MomentTable) -> Vec<f64> {
        let lambda = self.lambda();
        (1..=busy.n_max)
            .map(|n| {
                (0..=n)
                    .map(|p| {
                        binomial(n, p)
                            * busy.get(p).expect("p <= n_max")
                            * factorial(n - p)
                            / lambda.powi((n - p) as i32)
                    })
                    .sum()
            })
            .collect()
    }

    pub fn moments(&self, n_max: usize, tol: &Tolerance) -> Result<(MomentTable, Vec<f64>)> {
        let busy = self.bp.moments(n_max, tol)?;
        let cycle = self.moments_from(&busy);
        Ok((busy, cycle))
    }

    pub fn peaks(&self) -> Result<CyclePeaks> {
        let busy = self.bp.peaks()?;
        Ok(self.peaks_from(&busy))
    }

    pub fn peaks_from(&self, busy: &Peaks) -> CyclePeaks {
        let rho = self.service().rho();
        let factor = rho / (rho + 1.0);
        let pi = factor * busy.pi;
        CyclePeaks {
            pi,
            qi: pi * rho / rho.exp_m1() + 1.0,
            pi_formula: busy.pi_formula.map(|_| {
                let params = self.service().params();
                let crate::service::BetaSpec::Constant(beta) = params.beta else {
                    unreachable!("formula present only for constant drift")
                };
                cycle_peak_formula(params.lambda, rho, params.p, beta)
            }),
        }
    }

    /// Renewal function in closed form (constant drift):
    /// `R(t) = e^{−ρ}(1+λt) + c·(η/K)e^{−Kt} + c·λ/K` with `K = λ + η`.
    pub fn renewal_closed(&self, t: f64) -> Result<f64> {
        let law = self.service();
        let eta = law.eta().ok_or(Error::RequiresConstantDrift("closed-form renewal function"))?;
        let (lambda, rho) = (law.lambda(), law.rho());
        let k = lambda + eta;
        let t = t.max(0.0);
        // e^{−Kt} + λt(1 − e^{−Kt})/(Kt): the two K-terms combined, finite at K = 0
        let phi_part = (-k * t).exp() + lambda * t * one_minus_exp_over(k * t);
        Ok((-rho).exp() * (1.0 + lambda * t) + law.c() * phi_part)
    }

    /// The constant-drift renewal expression with `c·(λp+β)/(λ+β)` as its
    /// last term, as it is usually printed. It misses `R(0) = 1`; kept for
    /// reporting.
    pub fn renewal_printed(&self, t: f64) -> Result<f64> {
        let law = self.service();
        let params = law.params();
        let crate::service::BetaSpec::Constant(beta) = params.beta else {
            return Err(Error::RequiresConstantDrift("printed renewal expression"));
        };
        let (lambda, rho, p) = (params.lambda, params.rho, params.p);
        let eta = law.eta().expect("constant");
        let coef = law.c() * (lambda * p + beta) / (lambda + beta);
        Ok((-rho).exp() * (1.0 + lambda * t) + coef * (-(lambda + eta) * t).exp() + coef)
    }

    pub fn renewal(&self, t_max: f64, dt: f64, mode: RenewalMode) -> Result<RenewalCurve> {
        if !(t_max > 0.0) || !(dt > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "renewal grid needs t_max > 0 and dt > 0, got {t_max}, {dt}"
            )));
        }
        let n = (t_max / dt).ceil() as usize + 1;
        let grid = match mode {
            RenewalMode::Closed => {
                let values = (0..n)
                    .map(|k| self.renewal_closed(k as f64 * dt))
                    .collect::<Result<Vec<_>>>()?;
                GridFunction::new(dt, values)?
            }
            RenewalMode::Numeric => self.renewal_numeric(dt, n)?,
        };
        Ok(RenewalCurve { grid, mode })
    }

    /// `R(t) = Φ(t) + λ∫₀ᵗ Φ`, `Φ(u) = exp(−λ∫₀ᵘ (1−G))`, by nested quadrature
    /// of the service survival function.
    fn renewal_numeric(&self, dt: f64, n: usize) -> Result<GridFunction> {
        let law = self.service();
        let lambda = law.lambda();
        let tol = Tolerance::fine();
        let mut values = Vec::with_capacity(n);
        values.push(1.0);
        let mut cum_survival = 0.0;
        let mut cum_phi = 0.0;
        for k in 1..n {
            let (a, b) = ((k - 1) as f64 * dt, k as f64 * dt);
            let base = cum_survival;
            let phi = |u: f64| -> f64 {
                let inner = integrate(|v| law.survival(v), a, u, &tol).unwrap_or(f64::NAN);
                (-lambda * (base + inner)).exp()
            };
            cum_phi += integrate(phi, a, b, &tol)?;
            cum_survival += integrate(|v| law.survival(v), a, b, &tol)?;
            if !cum_phi.is_finite() {
                return Err(Error::NonConvergence {
                    what: "renewal nested quadrature",
                    estimate: cum_phi,
                    error: f64::NAN,
                });
            }
            values.push((-lambda * cum_survival).exp() + lambda * cum_phi);
        }
        GridFunction::new(dt, values)
    }
}

/// Closed-form busy-cycle peak in the `(λ, ρ, p, β)` parameterization.
pub fn cycle_peak_formula(lambda: f64, rho: f64, p: f64, beta: f64) -> f64 {
    let alpha = rho / lambda;
    let e = (-rho).exp();
    alpha * (e * (lambda + beta) * (rho + 1.0) - lambda * p - beta)
        / ((rho + 1.0) * (e * (rho + alpha * beta) + 1.0 - p))
}

/// Two-sided bounds for the busy-cycle CDF:
/// the lower one is the law of `Exp(λ) + Exp(λ/(e^ρ−1))`, the upper one the
/// idle period alone.
pub fn bc_bounds(lambda: f64, rho: f64, t: f64) -> (f64, f64) {
    if t <= 0.0 {
        return (0.0, 0.0);
    }
    let upper = -(-lambda * t).exp_m1();
    let em2 = rho.exp() - 2.0;
    let lower = if em2.abs() < 1e-8 {
        1.0 - (1.0 + lambda * t) * (-lambda * t).exp()
    } else {
        1.0 - hypoexp_survival(lambda, lambda / rho.exp_m1(), t)
    };
    (lower, upper)
}
