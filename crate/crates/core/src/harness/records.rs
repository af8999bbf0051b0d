//! Result rows and run manifests.

use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::config::SimConfig;
use crate::error::Result;

/// One CSV row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRecord {
    pub experiment: String,
    pub config_hash: String,
    pub seed: u64,
    pub x_name: String,
    pub x_value: f64,
    pub system: String,
    pub metric: String,
    pub value: f64,
    pub stderr: f64,
    pub n_trials: u64,
}

/// Fills the fields shared by all records of one run.
#[derive(Debug, Clone)]
pub struct RecordSink {
    experiment: String,
    config_hash: String,
    seed: u64,
    pub records: Vec<MetricRecord>,
}

impl RecordSink {
    pub fn new(cfg: &SimConfig) -> Self {
        Self {
            experiment: cfg.experiment.name().to_string(),
            config_hash: cfg.hash(),
            seed: cfg.seed,
            records: Vec::new(),
        }
    }

    #[allow(clippy::too_many_arguments)]
    pub fn push(&mut self, x_name: &str, x_value: f64, system: &str, metric: &str, value: f64, stderr: f64, n_trials: u64) {
        debug_assert!(value.is_finite() && stderr >= 0.0, "{metric} = {value} ± {stderr}");
        self.records.push(MetricRecord {
            experiment: self.experiment.clone(),
            config_hash: self.config_hash.clone(),
            seed: self.seed,
            x_name: x_name.to_string(),
            x_value,
            system: system.to_string(),
            metric: metric.to_string(),
            value,
            stderr,
            n_trials,
        });
    }

    pub fn find(&self, x_value: f64, system: &str, metric: &str) -> Option<&MetricRecord> {
        self.records
            .iter()
            .find(|r| r.x_value == x_value && r.system == system && r.metric == metric)
    }
}

pub fn write_csv<W: Write>(records: &[MetricRecord], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in records {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_csv(path: &Path) -> Result<Vec<MetricRecord>> {
    let mut r = csv::Reader::from_path(path)?;
    Ok(r.deserialize().collect::<std::result::Result<_, _>>()?)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub config: SimConfig,
    pub config_hash: String,
    pub seed: u64,
    pub version: String,
    pub wall_time_s: f64,
    pub started_unix_s: u64,
    pub records: usize,
    pub csv: PathBuf,
}

/// Writes `<experiment>.csv` and `<experiment>.manifest.json` under the
/// configured output directory and returns the CSV path.
pub fn write_run(cfg: &SimConfig, records: &[MetricRecord], wall_time_s: f64, started_unix_s: u64) -> Result<PathBuf> {
    std::fs::create_dir_all(&cfg.output_path)?;
    let csv_path = cfg.output_path.join(format!("{}.csv", cfg.experiment.name()));
    write_csv(records, std::fs::File::create(&csv_path)?)?;
    let manifest = Manifest {
        config: cfg.clone(),
        config_hash: cfg.hash(),
        seed: cfg.seed,
        version: env!("CARGO_PKG_VERSION").to_string(),
        wall_time_s,
        started_unix_s,
        records: records.len(),
        csv: csv_path.clone(),
    };
    let manifest_path = cfg.output_path.join(format!("{}.manifest.json", cfg.experiment.name()));
    serde_json::to_writer_pretty(std::fs::File::create(manifest_path)?, &manifest)?;
    Ok(csv_path)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_header_and_roundtrip() {
        let mut sink = RecordSink::new(&SimConfig::default());
        sink.push("snr_db", 1.5, "dd/soft", "ber", 1e-3, 2e-4, 10);
        let mut buf = Vec::new();
        write_csv(&sink.records, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("experiment,config_hash,seed,x_name,x_value,system,metric,value,stderr,n_trials\n"));
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.csv");
        std::fs::write(&p, &text).unwrap();
        assert_eq!(read_csv(&p).unwrap(), sink.records);
    }
}
