use std::path::PathBuf;

use clap::Args;
use mginf::{BetaSpec, BetaTable, QueueParams, ServiceLaw};

use crate::Usage;

#[derive(Args, Debug, Clone)]
#[command(group = clap::ArgGroup::new("drift").required(true).args(["beta", "eta", "beta_table"]))]
pub struct ParamArgs {
    /// Arrival rate.
    #[arg(long)]
    pub lambda: f64,
    /// Traffic intensity λα.
    #[arg(long)]
    pub rho: f64,
    #[arg(long, conflicts_with = "eta", allow_negative_numbers = true)]
    pub p: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub beta: Option<f64>,
    /// Canonical drift (λp+β)/(1−p); replaces --p/--beta.
    #[arg(long, allow_negative_numbers = true)]
    pub eta: Option<f64>,
    /// CSV of (t, beta) knots for a time-varying β.
    #[arg(long, value_name = "FILE")]
    pub beta_table: Option<PathBuf>,
}

impl ParamArgs {
    pub fn params(&self) -> anyhow::Result<QueueParams> {
        if let Some(eta) = self.eta {
            return Ok(QueueParams::with_eta(self.lambda, self.rho, eta));
        }
        let p = self.p.unwrap_or(0.0);
        let beta = match (&self.beta, &self.beta_table) {
            (Some(b), None) => BetaSpec::Constant(*b),
            (None, Some(path)) => BetaSpec::Tabulated(BetaTable::from_path(path)?),
            _ => return Err(Usage("give exactly one of --beta, --eta, --beta-table".into()).into()),
        };
        Ok(QueueParams::new(self.lambda, self.rho, p, beta))
    }

    pub fn law(&self) -> anyhow::Result<ServiceLaw> {
        Ok(ServiceLaw::new(self.params()?)?)
    }
}
