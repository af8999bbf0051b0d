//! Bit-error-rate runs of complete transmissions through the iterative receivers.

use rayon::prelude::*;

use super::config::{ExperimentKind, SimConfig};
use super::link::{LinkShape, Transmission};
use super::records::RecordSink;
use crate::demod::{DemodKind, EquivalentChannelParams, Estimate, InterferenceCache, InterferenceSetting};
use crate::error::{Error, Result};
use crate::receiver::{run_iterative_decode, ReceiverConfig, UserObservation};
use crate::rng::derive_seed;
use crate::selection::Strategy;

/// Fewer bit errors than this mark a BER point as statistically thin.
pub const MIN_ERROR_EVENTS: u64 = 50;

/// A selection strategy paired with a demodulator.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BerSystem {
    pub strategy: Strategy,
    pub demod: DemodKind,
    pub block: usize,
}

impl BerSystem {
    pub fn label(&self) -> String {
        format!("{}/{}", self.strategy.short(), self.demod)
    }
}

/// Per-transmission tallies of one system at one SNR point.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemTally {
    pub system: BerSystem,
    pub sigma2: Estimate,
    /// Bit errors of each transmission, summed over users.
    pub trial_bit_errors: Vec<u64>,
    pub trial_frame_errors: Vec<u64>,
    /// Frame energy penalty of each transmission.
    pub trial_energy: Vec<f64>,
    /// Bit errors after each iteration, summed over all transmissions.
    pub iteration_bit_errors: Vec<u64>,
    pub posterior_fallbacks: u64,
}

impl SystemTally {
    pub fn bit_errors(&self) -> u64 {
        self.trial_bit_errors.iter().sum()
    }

    /// BER with its standard error across transmissions.
    pub fn ber(&self, bits_per_trial: u64) -> Estimate {
        let xs: Vec<f64> = self.trial_bit_errors.iter().map(|&e| e as f64 / bits_per_trial as f64).collect();
        Estimate::from_samples(&xs)
    }

    pub fn fer(&self, frames_per_trial: u64) -> Estimate {
        let xs: Vec<f64> = self.trial_frame_errors.iter().map(|&e| e as f64 / frames_per_trial as f64).collect();
        Estimate::from_samples(&xs)
    }
}

/// Results of one SNR point; tallies share the transmissions index by index.
#[derive(Debug, Clone, PartialEq)]
pub struct BerPoint {
    pub snr_db: f64,
    pub n0: f64,
    pub trials: usize,
    pub frames_per_trial: u64,
    pub bits_per_trial: u64,
    pub systems: Vec<SystemTally>,
}

impl BerPoint {
    pub fn system(&self, label: &str) -> Option<&SystemTally> {
        self.systems.iter().find(|s| s.system.label() == label)
    }

    /// Paired difference `BER(a) - BER(b)` over matched transmissions.
    pub fn paired_difference(&self, a: &str, b: &str) -> Option<Estimate> {
        let (a, b) = (self.system(a)?, self.system(b)?);
        let xs: Vec<f64> = a
            .trial_bit_errors
            .iter()
            .zip(&b.trial_bit_errors)
            .map(|(&x, &y)| (x as f64 - y as f64) / self.bits_per_trial as f64)
            .collect();
        Some(Estimate::from_samples(&xs))
    }
}

pub fn systems(cfg: &SimConfig) -> Vec<BerSystem> {
    cfg.strategies
        .iter()
        .flat_map(|&strategy| {
            cfg.demod_kinds.iter().map(move |&demod| BerSystem {
                strategy,
                demod,
                block: cfg.block_for(strategy),
            })
        })
        .collect()
}

fn shape(cfg: &SimConfig) -> LinkShape {
    LinkShape {
        users: cfg.users,
        antennas: cfg.antennas,
        k_tilde: cfg.k_tilde,
        coherence_time: cfg.coherence_time,
        info_len: cfg.info_len,
        rate_inv: cfg.rate_inv,
    }
}

struct TrialOutcome {
    bit_errors: u64,
    frame_errors: u64,
    energy: f64,
    iteration_bit_errors: Vec<u64>,
    fallbacks: u64,
}

/// Seed of transmission `trial` at SNR point `snr_db`.
pub fn trial_seed(cfg: &SimConfig, snr_db: f64, trial: usize) -> u64 {
    derive_seed(cfg.seed, &[snr_db.to_bits(), trial as u64])
}

fn run_trial(
    cfg: &SimConfig,
    systems: &[BerSystem],
    sigma2: &[f64],
    n0: f64,
    seed: u64,
) -> Result<Vec<TrialOutcome>> {
    let tx = Transmission::generate(shape(cfg), seed)?;
    let prior = cfg.k_tilde as f64 / cfg.users as f64;
    let mut out = Vec::with_capacity(systems.len());
    let mut beamformed: Vec<(Strategy, usize, super::link::Beamformed)> = Vec::new();
    for (sys, &s2) in systems.iter().zip(sigma2) {
        if !beamformed.iter().any(|(s, b, _)| *s == sys.strategy && *b == sys.block) {
            let bf = tx.beamform(sys.strategy, sys.block, cfg.exhaustive_cap as u128)?;
            beamformed.push((sys.strategy, sys.block, bf));
        }
        let bf = &beamformed
            .iter()
            .find(|(s, b, _)| *s == sys.strategy && *b == sys.block)
            .expect("beamformed above")
            .2;
        let params = EquivalentChannelParams {
            energy_penalty: bf.energy,
            n0,
            sigma2: s2,
            prior_selected: prior,
        };
        let rcfg = ReceiverConfig {
            demod: sys.demod,
            max_iterations: cfg.max_iterations,
            early_exit: cfg.early_exit,
            exclude_own_slot: cfg.exclude_own_slot,
            damping: cfg.damping,
        };
        let mut t = TrialOutcome {
            bit_errors: 0,
            frame_errors: 0,
            energy: bf.energy,
            iteration_bit_errors: vec![0; cfg.max_iterations],
            fallbacks: 0,
        };
        for k in 0..cfg.users {
            let y = bf.received(&tx, k, n0);
            let obs = UserObservation {
                received: &y,
                code: &tx.codes[k],
                mapper: &tx.mappers[k],
                block_len: sys.block,
                true_indicators: Some(&bf.indicators[k]),
            };
            let dec = run_iterative_decode(&obs, &params, &rcfg, Some(&tx.info[k]))?;
            let errors = dec.bit_errors_at(cfg.max_iterations).unwrap_or(0) as u64;
            t.bit_errors += errors;
            t.frame_errors += (errors > 0) as u64;
            t.fallbacks += dec.posterior_fallbacks as u64;
            for (m, e) in t.iteration_bit_errors.iter_mut().enumerate() {
                *e += dec.bit_errors_at(m + 1).unwrap_or(0) as u64;
            }
        }
        out.push(t);
    }
    Ok(out)
}

/// Simulates every SNR point of the grid. Each point uses
/// `ceil(frames_per_point / K)` transmissions of `K` user frames.
pub fn simulate_ber(cfg: &SimConfig) -> Result<Vec<BerPoint>> {
    cfg.validate()?;
    if cfg.experiment != ExperimentKind::Ber {
        return Err(Error::Contract(format!("{} is not a BER experiment", cfg.experiment.name())));
    }
    let systems = systems(cfg);
    let cache = InterferenceCache::new(cfg.interference_blocks, cfg.seed);
    let sigma2: Vec<Estimate> = systems
        .iter()
        .map(|s| {
            cache.get(&InterferenceSetting {
                users: cfg.users,
                antennas: cfg.antennas,
                k_tilde: cfg.k_tilde,
                block: s.block,
                strategy: s.strategy,
            })
        })
        .collect::<Result<_>>()?;
    let sigma2_means: Vec<f64> = sigma2.iter().map(|e| e.mean).collect();
    let trials = cfg.frames_per_point.div_ceil(cfg.users);
    let mut points = Vec::with_capacity(cfg.snr_grid_db.len());
    for &snr_db in &cfg.snr_grid_db {
        let n0 = cfg.n0_for_snr_db(snr_db);
        log::info!("BER point {snr_db} dB (N0 = {n0:.4e}), {trials} transmissions");
        let outcomes: Vec<Vec<TrialOutcome>> = (0..trials)
            .into_par_iter()
            .map(|i| run_trial(cfg, &systems, &sigma2_means, n0, trial_seed(cfg, snr_db, i)))
            .collect::<Result<_>>()?;
        let tallies = systems
            .iter()
            .enumerate()
            .map(|(j, &system)| {
                let mut iteration_bit_errors = vec![0; cfg.max_iterations];
                for o in &outcomes {
                    for (acc, e) in iteration_bit_errors.iter_mut().zip(&o[j].iteration_bit_errors) {
                        *acc += e;
                    }
                }
                SystemTally {
                    system,
                    sigma2: sigma2[j],
                    trial_bit_errors: outcomes.iter().map(|o| o[j].bit_errors).collect(),
                    trial_frame_errors: outcomes.iter().map(|o| o[j].frame_errors).collect(),
                    trial_energy: outcomes.iter().map(|o| o[j].energy).collect(),
                    iteration_bit_errors,
                    posterior_fallbacks: outcomes.iter().map(|o| o[j].fallbacks).sum(),
                }
            })
            .collect();
        points.push(BerPoint {
            snr_db,
            n0,
            trials,
            frames_per_trial: cfg.users as u64,
            bits_per_trial: (cfg.users * cfg.info_len) as u64,
            systems: tallies,
        });
    }
    Ok(points)
}

/// Turns simulated points into CSV records (x_name `snr_db`).
pub fn ber_records(cfg: &SimConfig, points: &[BerPoint]) -> RecordSink {
    let mut sink = RecordSink::new(cfg);
    for p in points {
        let frames = p.trials as u64 * p.frames_per_trial;
        let bits = p.trials as u64 * p.bits_per_trial;
        for s in &p.systems {
            let label = s.system.label();
            let x = p.snr_db;
            let ber = s.ber(p.bits_per_trial);
            let fer = s.fer(p.frames_per_trial);
            let errors = s.bit_errors();
            let energy = Estimate::from_samples(&s.trial_energy);
            sink.push("snr_db", x, &label, "ber", ber.mean, ber.stderr, frames);
            sink.push("snr_db", x, &label, "fer", fer.mean, fer.stderr, frames);
            sink.push("snr_db", x, &label, "bit_errors", errors as f64, 0.0, frames);
            sink.push("snr_db", x, &label, "bits", bits as f64, 0.0, frames);
            sink.push("snr_db", x, &label, "insufficient_errors", (errors < MIN_ERROR_EVENTS) as u8 as f64, 0.0, frames);
            sink.push("snr_db", x, &label, "n0", p.n0, 0.0, frames);
            sink.push("snr_db", x, &label, "sigma2", s.sigma2.mean, s.sigma2.stderr, s.sigma2.samples as u64);
            sink.push("snr_db", x, &label, "energy_penalty", energy.mean, energy.stderr, p.trials as u64);
            sink.push("snr_db", x, &label, "posterior_fallbacks", s.posterior_fallbacks as f64, 0.0, frames);
            for (m, &e) in s.iteration_bit_errors.iter().enumerate() {
                sink.push("snr_db", x, &label, &format!("ber_iter_{}", m + 1), e as f64 / bits as f64, 0.0, frames);
            }
        }
    }
    sink
}

pub fn run_ber_experiment(cfg: &SimConfig) -> Result<RecordSink> {
    Ok(ber_records(cfg, &simulate_ber(cfg)?))
}
