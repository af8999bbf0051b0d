//! Sum-rate lower bound versus the number of served users.

use super::config::{ExperimentKind, SimConfig};
use super::energy::estimate_block_energies;
use super::records::RecordSink;
use crate::error::{Error, Result};
use crate::rate::{qpsk_awgn_mutual_info, sum_rate_lower_bound};

/// Sum rate and its delta-method standard error for `Ē ± se`.
pub fn sum_rate_with_stderr(k_tilde: usize, energy_mean: f64, energy_stderr: f64, n0: f64) -> (f64, f64) {
    let r = sum_rate_lower_bound(k_tilde, energy_mean, n0);
    let gamma = 1.0 / (energy_mean * n0);
    let h = gamma * 1e-4;
    let slope = (qpsk_awgn_mutual_info(gamma + h) - qpsk_awgn_mutual_info(gamma - h)) / (2.0 * h);
    let d_energy = k_tilde as f64 * slope * gamma / energy_mean;
    (r, d_energy * energy_stderr)
}

/// Index of the largest value; the first one wins ties.
pub fn argmax(values: &[f64]) -> Option<usize> {
    values
        .iter()
        .enumerate()
        .fold(None, |best: Option<(usize, f64)>, (i, &v)| match best {
            Some((_, b)) if b >= v => best,
            _ => Some((i, v)),
        })
        .map(|(i, _)| i)
}

/// For each strategy and `k_tilde`, estimates `Ē` once and evaluates the
/// bound at every SNR `1/N0` of the grid (in dB).
///
/// Records: `sum_rate` and `user_rate` (x_name `k_tilde`, system
/// `<strategy>@snr_db=<snr>`), `energy_penalty` (system `<strategy>`), and
/// `k_tilde_opt` (x_name `snr_db`).
pub fn run_sumrate_experiment(cfg: &SimConfig) -> Result<RecordSink> {
    cfg.validate()?;
    if cfg.experiment != ExperimentKind::Sumrate {
        return Err(Error::Contract(format!("{} is not a sum-rate experiment", cfg.experiment.name())));
    }
    let mut sink = RecordSink::new(cfg);
    let grid = cfg.k_tilde_values();
    let mut energies = Vec::with_capacity(grid.len());
    for &kt in &grid {
        let est = estimate_block_energies(
            cfg.users,
            cfg.antennas,
            kt,
            cfg.block_size,
            &cfg.strategies,
            cfg.blocks_per_point,
            cfg.exhaustive_cap as u128,
            cfg.seed,
            &[kt as u64, cfg.block_size as u64],
        )?;
        for (s, e) in cfg.strategies.iter().zip(&est) {
            if let Some(e) = e.measured() {
                sink.push("k_tilde", kt as f64, s.name(), "energy_penalty", e.mean, e.stderr, e.samples as u64);
            }
        }
        energies.push(est);
    }
    for &snr_db in &cfg.snr_grid_db {
        let n0 = 10f64.powf(-snr_db / 10.0);
        for (j, s) in cfg.strategies.iter().enumerate() {
            let system = format!("{}@snr_db={snr_db}", s.name());
            let mut rates = Vec::with_capacity(grid.len());
            for (i, &kt) in grid.iter().enumerate() {
                let Some(e) = energies[i][j].measured() else {
                    rates.push(f64::NEG_INFINITY);
                    continue;
                };
                let (r, se) = sum_rate_with_stderr(kt, e.mean, e.stderr, n0);
                let n = e.samples as u64;
                sink.push("k_tilde", kt as f64, &system, "sum_rate", r, se, n);
                sink.push("k_tilde", kt as f64, &system, "user_rate", r / cfg.users as f64, se / cfg.users as f64, n);
                rates.push(r);
            }
            if let Some(i) = argmax(&rates).filter(|&i| rates[i].is_finite()) {
                sink.push("snr_db", snr_db, s.name(), "k_tilde_opt", grid[i] as f64, 0.0, cfg.blocks_per_point as u64);
            }
        }
    }
    Ok(sink)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::selection::Strategy;

    #[test]
    fn argmax_prefers_first() {
        assert_eq!(argmax(&[1.0, 3.0, 3.0, 2.0]), Some(1));
        assert_eq!(argmax(&[]), None);
    }

    #[test]
    fn single_grid_point_matches_direct_evaluation() {
        let cfg = SimConfig {
            experiment: ExperimentKind::Sumrate,
            users: 6,
            antennas: 4,
            block_size: 4,
            coherence_time: 4,
            k_tilde_grid: Some(vec![2]),
            strategies: vec![Strategy::DataDependent],
            snr_grid_db: vec![10.0],
            blocks_per_point: 50,
            ..SimConfig::default()
        };
        let sink = run_sumrate_experiment(&cfg).unwrap();
        let e = sink.find(2.0, "dd-greedy", "energy_penalty").unwrap();
        let r = sink.find(2.0, "dd-greedy@snr_db=10", "sum_rate").unwrap();
        assert!((r.value - sum_rate_lower_bound(2, e.value, 0.1)).abs() < 1e-12);
        assert_eq!(sink.find(10.0, "dd-greedy", "k_tilde_opt").unwrap().value, 2.0);
    }

    #[test]
    fn delta_method_matches_finite_difference() {
        let (r, se) = sum_rate_with_stderr(3, 2.0, 0.01, 0.25);
        let up = sum_rate_lower_bound(3, 2.01, 0.25);
        assert!(((r - up).abs() - se).abs() < 2e-2 * se, "{} vs {se}", (r - up).abs());
    }
}
