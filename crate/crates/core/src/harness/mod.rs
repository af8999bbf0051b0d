//! Experiment orchestration: configuration, the experiment drivers and
//! result persistence.

pub mod ber;
pub mod config;
pub mod energy;
pub mod link;
pub mod records;
pub mod selftest;
pub mod sumrate;

pub use ber::{run_ber_experiment, simulate_ber, BerPoint};
pub use config::{ExperimentKind, Preset, SimConfig};
pub use energy::run_energy_experiment;
pub use records::{MetricRecord, RecordSink};
pub use sumrate::run_sumrate_experiment;

use crate::error::{Error, Result};

/// Runs the configured experiment on a pool of `cfg.threads` workers.
/// The records do not depend on the number of workers.
pub fn run(cfg: &SimConfig) -> Result<RecordSink> {
    cfg.validate()?;
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cfg.threads {
        pool = pool.num_threads(n);
    }
    let pool = pool
        .build()
        .map_err(|e| Error::Contract(format!("cannot start worker pool: {e}")))?;
    pool.install(|| match cfg.experiment {
        ExperimentKind::EnergyVsKtilde | ExperimentKind::EnergyVsB => run_energy_experiment(cfg),
        ExperimentKind::Ber => run_ber_experiment(cfg),
        ExperimentKind::Sumrate => run_sumrate_experiment(cfg),
    })
}
