use clap::ValueEnum;
use mginf::busy_cycle::{bc_bounds, BusyCycleLaw, RenewalMode};
use mginf::busy_period::bp_lower_bound;
use mginf::{ServiceLaw, Tolerance};

use crate::Usage;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Target {
    /// Service CDF.
    #[value(name = "G")]
    ServiceCdf,
    /// Service density (continuous part).
    #[value(name = "g")]
    ServicePdf,
    /// Busy-period CDF.
    #[value(name = "B")]
    BusyPeriod,
    /// Busy-cycle CDF.
    #[value(name = "Z")]
    BusyCycle,
    /// Renewal function.
    #[value(name = "R")]
    Renewal,
    /// Lower and upper bounds on B and Z.
    #[value(name = "bounds")]
    Bounds,
}

impl Target {
    pub fn label(self) -> &'static str {
        match self {
            Target::ServiceCdf => "G",
            Target::ServicePdf => "g",
            Target::BusyPeriod => "B",
            Target::BusyCycle => "Z",
            Target::Renewal => "R",
            Target::Bounds => "bounds",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Method {
    Closed,
    General,
    Both,
}

/// Named value columns over a common time grid.
#[derive(Debug, Clone)]
pub struct Curve {
    pub times: Vec<f64>,
    pub columns: Vec<(String, Vec<f64>)>,
    pub sup_abs_diff: Option<f64>,
}

pub fn time_grid(t_max: f64, steps: usize) -> anyhow::Result<Vec<f64>> {
    if !(t_max > 0.0) || !t_max.is_finite() {
        return Err(Usage(format!("--t-max must be positive, got {t_max}")).into());
    }
    if steps < 2 {
        return Err(Usage(format!("--steps must be at least 2, got {steps}")).into());
    }
    let last = (steps - 1) as f64;
    Ok((0..steps).map(|k| t_max * k as f64 / last).collect())
}

pub fn evaluate(
    law: &ServiceLaw,
    target: Target,
    method: Option<Method>,
    t_max: f64,
    steps: usize,
) -> anyhow::Result<Curve> {
    let times = time_grid(t_max, steps)?;
    let (lambda, rho) = (law.lambda(), law.rho());

    if target == Target::Bounds {
        let col = |f: &dyn Fn(f64) -> f64| times.iter().map(|&t| f(t)).collect::<Vec<_>>();
        return Ok(Curve {
            columns: vec![
                ("busy_period_lower".into(), col(&|t| bp_lower_bound(lambda, rho, t))),
                ("busy_cycle_lower".into(), col(&|t| bc_bounds(lambda, rho, t).0)),
                ("busy_cycle_upper".into(), col(&|t| bc_bounds(lambda, rho, t).1)),
            ],
            times,
            sup_abs_diff: None,
        });
    }

    let method = method.unwrap_or(if law.is_constant() { Method::Closed } else { Method::General });
    if method != Method::General && !law.is_constant() {
        return Err(Usage(format!(
            "method {method:?} needs a constant β; use --method general with --beta-table"
        ))
        .into());
    }
    let bc = BusyCycleLaw::new(law.clone());
    let closed = || -> anyhow::Result<Vec<f64>> {
        times
            .iter()
            .map(|&t| -> anyhow::Result<f64> {
                Ok(match target {
                    Target::ServiceCdf => law.cdf(t),
                    Target::ServicePdf => law.pdf(t.max(f64::MIN_POSITIVE))?,
                    Target::BusyPeriod => bc.busy_period().cdf_closed(t)?,
                    Target::BusyCycle => bc.cdf_closed(t)?,
                    Target::Renewal => bc.renewal_closed(t)?,
                    Target::Bounds => unreachable!(),
                })
            })
            .collect()
    };
    let general = || -> anyhow::Result<Vec<f64>> {
        let dt = bc.busy_period().default_dt().min(t_max / (steps - 1) as f64);
        let tol = Tolerance::grid();
        Ok(match target {
            Target::ServiceCdf | Target::ServicePdf => {
                let twin = law.numeric_twin(t_max)?;
                times
                    .iter()
                    .map(|&t| match target {
                        Target::ServiceCdf => Ok(twin.cdf(t)),
                        _ => twin.pdf(t.max(f64::MIN_POSITIVE)),
                    })
                    .collect::<Result<_, _>>()?
            }
            Target::BusyPeriod => {
                let g = bc.busy_period().cdf_general(t_max, dt, &tol)?;
                times.iter().map(|&t| g.cdf.eval(t)).collect()
            }
            Target::BusyCycle => {
                let g = bc.cdf_general(t_max, dt, &tol)?;
                times.iter().map(|&t| g.cdf.eval(t)).collect()
            }
            Target::Renewal => {
                let g = bc.renewal(t_max, t_max / (steps - 1) as f64, RenewalMode::Numeric)?;
                times.iter().map(|&t| g.grid.eval(t)).collect()
            }
            Target::Bounds => unreachable!(),
        })
    };

    let label = target.label();
    Ok(match method {
        Method::Closed => Curve {
            columns: vec![(label.into(), closed()?)],
            times,
            sup_abs_diff: None,
        },
        Method::General => Curve {
            columns: vec![(label.into(), general()?)],
            times,
            sup_abs_diff: None,
        },
        Method::Both => {
            let (c, g) = (closed()?, general()?);
            let sup = c.iter().zip(&g).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            Curve {
                columns: vec![("closed".into(), c), ("general".into(), g)],
                times,
                sup_abs_diff: Some(sup),
            }
        }
    })
}
