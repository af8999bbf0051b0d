//! Experiment configuration, presets and validation.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::demod::DemodKind;
use crate::error::{Error, Result};
use crate::selection::Strategy;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    EnergyVsKtilde,
    #[serde(rename = "energy_vs_b")]
    EnergyVsB,
    Ber,
    Sumrate,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::EnergyVsKtilde => "energy_vs_ktilde",
            ExperimentKind::EnergyVsB => "energy_vs_b",
            ExperimentKind::Ber => "ber",
            ExperimentKind::Sumrate => "sumrate",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Preset {
    Desk,
    PaperFig3,
    PaperFig4,
    PaperFig5,
    PaperFig6,
    PaperFig7,
    PaperFig8,
}

/// Everything needed to reproduce one experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    pub experiment: ExperimentKind,
    /// `K`, number of users.
    pub users: usize,
    /// `N`, transmit antennas.
    pub antennas: usize,
    /// Users served per selection block.
    pub k_tilde: usize,
    /// `B`, slots per selection block.
    pub block_size: usize,
    /// Selection block of the data-independent strategy in BER runs;
    /// defaults to `block_size`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub di_block_size: Option<usize>,
    /// `T_c`, slots per fading block.
    pub coherence_time: usize,
    /// `L`, information bits per user frame.
    pub info_len: usize,
    /// `1/r` of the repeat-accumulate code.
    pub rate_inv: usize,
    pub max_iterations: usize,
    pub demod_kinds: Vec<DemodKind>,
    pub strategies: Vec<Strategy>,
    /// SNR grid in dB. Per information bit, `1/(2 r K N0)`, for BER runs;
    /// `1/N0` for sum-rate runs.
    pub snr_grid_db: Vec<f64>,
    /// User frames per SNR point in BER runs.
    pub frames_per_point: usize,
    /// Monte Carlo selection blocks per grid point in energy and sum-rate runs.
    pub blocks_per_point: usize,
    /// Grid of `k_tilde` for `energy_vs_ktilde` and `sumrate`; defaults to `1..=min(K, N)`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k_tilde_grid: Option<Vec<usize>>,
    /// Grid of `B` for `energy_vs_b`.
    #[serde(default)]
    pub b_grid: Vec<usize>,
    /// Largest number of subsets the exhaustive strategy may visit.
    pub exhaustive_cap: u64,
    /// Selection blocks used to estimate the interference power.
    pub interference_blocks: usize,
    pub early_exit: bool,
    pub exclude_own_slot: bool,
    pub damping: f64,
    pub seed: u64,
    /// Directory receiving the CSV and the manifest.
    pub output_path: PathBuf,
    /// Worker threads; `None` lets the pool decide.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threads: Option<usize>,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self::preset(Preset::Desk)
    }
}

impl SimConfig {
    pub fn preset(preset: Preset) -> Self {
        let desk = SimConfig {
            experiment: ExperimentKind::Ber,
            users: 8,
            antennas: 4,
            k_tilde: 4,
            block_size: 4,
            di_block_size: None,
            coherence_time: 4,
            info_len: 512,
            rate_inv: 4,
            max_iterations: 20,
            demod_kinds: vec![DemodKind::Genie, DemodKind::Soft, DemodKind::Hard],
            strategies: vec![Strategy::DataDependent, Strategy::DataIndependent],
            snr_grid_db: vec![5.0, 6.0, 7.0, 8.0, 9.0],
            frames_per_point: 2000,
            blocks_per_point: 10_000,
            k_tilde_grid: None,
            b_grid: Vec::new(),
            exhaustive_cap: 1_000_000,
            interference_blocks: 20_000,
            early_exit: true,
            exclude_own_slot: true,
            damping: 0.0,
            seed: 1,
            output_path: PathBuf::from("out"),
            threads: None,
        };
        let full_ber = SimConfig {
            users: 32,
            antennas: 16,
            k_tilde: 16,
            block_size: 16,
            coherence_time: 16,
            info_len: 4000,
            rate_inv: 4,
            max_iterations: 40,
            snr_grid_db: vec![2.0, 2.5, 3.0, 3.5, 4.0, 4.5, 5.0],
            frames_per_point: 10_000,
            ..desk.clone()
        };
        let full_energy = SimConfig {
            users: 32,
            antennas: 16,
            k_tilde: 16,
            block_size: 16,
            coherence_time: 16,
            strategies: vec![Strategy::DataDependent, Strategy::DataIndependent, Strategy::Exhaustive],
            ..desk.clone()
        };
        match preset {
            Preset::Desk => desk,
            Preset::PaperFig3 => SimConfig {
                experiment: ExperimentKind::EnergyVsKtilde,
                ..full_energy
            },
            Preset::PaperFig4 => SimConfig {
                experiment: ExperimentKind::EnergyVsB,
                strategies: vec![Strategy::DataDependent, Strategy::DataIndependent],
                b_grid: vec![1, 2, 4, 8, 16, 32, 64, 128],
                coherence_time: 128,
                ..full_energy
            },
            Preset::PaperFig5 => full_ber,
            Preset::PaperFig6 => SimConfig {
                coherence_time: 32,
                di_block_size: Some(32),
                ..full_ber
            },
            Preset::PaperFig7 => SimConfig {
                k_tilde: 8,
                rate_inv: 8,
                snr_grid_db: vec![0.0, 0.5, 1.0, 1.5, 2.0, 2.5, 3.0],
                ..full_ber
            },
            Preset::PaperFig8 => SimConfig {
                experiment: ExperimentKind::Sumrate,
                strategies: vec![Strategy::DataDependent, Strategy::DataIndependent],
                snr_grid_db: vec![0.0, 5.0, 10.0, 15.0, 20.0, 25.0],
                ..full_energy
            },
        }
    }

    pub fn from_toml_str(s: &str) -> Result<Self> {
        Ok(toml::from_str(s)?)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Slots per frame, `T = L / (2 r)`.
    pub fn frame_slots(&self) -> usize {
        self.info_len * self.rate_inv / 2
    }

    pub fn di_block(&self) -> usize {
        self.di_block_size.unwrap_or(self.block_size)
    }

    /// Block size used by `strategy` in BER runs.
    pub fn block_for(&self, strategy: Strategy) -> usize {
        match strategy {
            Strategy::DataIndependent => self.di_block(),
            _ => self.block_size,
        }
    }

    pub fn k_tilde_values(&self) -> Vec<usize> {
        self.k_tilde_grid
            .clone()
            .unwrap_or_else(|| (1..=self.users.min(self.antennas)).collect())
    }

    /// `N0` for a per-information-bit SNR in dB.
    pub fn n0_for_snr_db(&self, snr_db: f64) -> f64 {
        snr_per_bit_to_n0(snr_db, self.rate_inv, self.users)
    }

    /// Checks every invariant and reports all violations at once.
    pub fn validate(&self) -> Result<()> {
        let mut p = Vec::new();
        let (k, n) = (self.users, self.antennas);
        if n == 0 {
            p.push("antennas must be at least 1".to_string());
        }
        if k < n {
            p.push(format!("need K >= N, got K={k}, N={n}"));
        }
        let k_max = k.min(n);
        match self.experiment {
            ExperimentKind::EnergyVsKtilde | ExperimentKind::Sumrate => {
                let grid = self.k_tilde_values();
                if grid.is_empty() {
                    p.push("k_tilde grid is empty".into());
                }
                for &kt in &grid {
                    if kt == 0 || kt > k_max {
                        p.push(format!("k_tilde grid value {kt} outside 1..={k_max}"));
                    }
                }
            }
            _ => {
                if self.k_tilde == 0 || self.k_tilde > k_max {
                    p.push(format!("k_tilde = {} outside 1..=min(K, N) = {k_max}", self.k_tilde));
                }
            }
        }
        if self.strategies.is_empty() {
            p.push("no selection strategy given".into());
        }
        if self.exhaustive_cap == 0 {
            p.push("exhaustive_cap must be positive".into());
        }
        let mut blocks = vec![("block_size", self.block_size)];
        match self.experiment {
            ExperimentKind::EnergyVsB => {
                if self.b_grid.is_empty() {
                    p.push("b_grid is empty".into());
                }
                blocks.extend(self.b_grid.iter().map(|&b| ("b_grid value", b)));
            }
            ExperimentKind::Ber => {
                if let Some(b) = self.di_block_size {
                    blocks.push(("di_block_size", b));
                }
            }
            _ => {}
        }
        if self.coherence_time == 0 {
            p.push("coherence_time must be at least 1".into());
        }
        for &(name, b) in &blocks {
            if b == 0 {
                p.push(format!("{name} must be at least 1"));
            } else if self.coherence_time > 0 {
                if b > self.coherence_time {
                    p.push(format!("{name} = {b} exceeds coherence_time = {}", self.coherence_time));
                } else if self.coherence_time % b != 0 {
                    p.push(format!("coherence_time = {} is not a multiple of {name} = {b}", self.coherence_time));
                }
            }
        }
        if matches!(self.experiment, ExperimentKind::EnergyVsKtilde | ExperimentKind::EnergyVsB | ExperimentKind::Sumrate)
            && self.blocks_per_point < 2
        {
            p.push("blocks_per_point must be at least 2".into());
        }
        if self.experiment == ExperimentKind::Ber {
            if self.info_len == 0 || self.rate_inv == 0 {
                p.push("info_len and rate_inv must be positive".into());
            } else if (self.info_len * self.rate_inv) % 2 != 0 {
                p.push(format!(
                    "code length L/r = {} is odd, so T is not an integer",
                    self.info_len * self.rate_inv
                ));
            } else {
                let t = self.frame_slots();
                for &(name, b) in &blocks {
                    if b > 0 && t % b != 0 {
                        p.push(format!("T = {t} is not a multiple of {name} = {b}"));
                    }
                }
                if self.coherence_time > 0 && t % self.coherence_time != 0 {
                    p.push(format!("T = {t} is not a multiple of coherence_time = {}", self.coherence_time));
                }
            }
            if self.max_iterations == 0 {
                p.push("max_iterations must be at least 1".into());
            }
            if self.demod_kinds.is_empty() {
                p.push("no demodulator given".into());
            }
            if self.strategies.contains(&Strategy::Exhaustive) {
                p.push("BER runs support the greedy strategies only".into());
            }
            if self.frames_per_point == 0 {
                p.push("frames_per_point must be positive".into());
            }
            if self.interference_blocks < 2 {
                p.push("interference_blocks must be at least 2".into());
            }
            if !(0.0..1.0).contains(&self.damping) {
                p.push(format!("damping = {} outside [0, 1)", self.damping));
            }
        }
        if matches!(self.experiment, ExperimentKind::Ber | ExperimentKind::Sumrate) {
            if self.snr_grid_db.is_empty() {
                p.push("snr_grid_db is empty".into());
            }
            if self.snr_grid_db.iter().any(|s| !s.is_finite()) {
                p.push("snr_grid_db contains a non-finite value".into());
            }
        }
        if self.threads == Some(0) {
            p.push("threads must be at least 1".into());
        }
        if p.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidConfig(p))
        }
    }

    /// Short digest of every field that influences the results.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.output_path = PathBuf::new();
        c.threads = None;
        let canonical = serde_json::to_vec(&c).expect("config serializes");
        let digest = Sha256::digest(&canonical);
        format!("{digest:x}")[..16].to_string()
    }
}

/// `N0 = 1 / (2 r K · snr)` with `snr` given in dB.
pub fn snr_per_bit_to_n0(snr_db: f64, rate_inv: usize, users: usize) -> f64 {
    let snr = 10f64.powf(snr_db / 10.0);
    rate_inv as f64 / (2.0 * users as f64 * snr)
}
