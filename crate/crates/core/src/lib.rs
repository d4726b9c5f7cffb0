//! Busy-period and busy-cycle analysis of the M|G|∞ queue when the service
//! time belongs to the collection of laws solving the occupation Riccati
//! equation.

pub mod error;
pub mod numerics;
pub mod service;
pub mod busy_period;
pub mod busy_cycle;
pub mod simulator;
pub mod validation;

pub use error::{Error, Result};
pub use numerics::{GridFunction, Tolerance};
pub use service::{BetaSpec, BetaTable, MomentMethod, QueueParams, ServiceLaw};
