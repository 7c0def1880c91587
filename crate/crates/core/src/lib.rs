//! Two-class delayed accumulating priority queues.

pub mod approx;
pub mod cli;
pub mod error;
pub mod kpi;
pub mod markov;
pub mod mean_wait;
pub mod model;
pub mod numeric;
pub mod simulate;
pub mod transforms;

pub use error::{Error, Result};
pub use model::{GridSpec, Kpi, KpiClass, QueueConfig, ServiceKind, ToleranceConfig, WaitSummary};
