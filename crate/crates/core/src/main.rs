use std::path::PathBuf;
use std::process::ExitCode;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand, ValueEnum};

use vbcsim::demod::DemodKind;
use vbcsim::harness::selftest::run_selftest;
use vbcsim::harness::{self, records, ExperimentKind, Preset, SimConfig};
use vbcsim::selection::Strategy;
use vbcsim::{Error, Result};

#[derive(Debug, Parser)]
#[command(name = "vbc-sim", version, about = "User selection and blind iterative reception for vector broadcast channels")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Energy penalty versus k_tilde or versus the selection block size.
    Energy {
        #[arg(long, value_enum, default_value_t = Sweep::Ktilde)]
        sweep: Sweep,
        #[command(flatten)]
        opts: ConfigArgs,
    },
    /// Bit error rate of the iterative receivers.
    Ber {
        #[command(flatten)]
        opts: ConfigArgs,
    },
    /// Sum-rate lower bound versus k_tilde.
    Sumrate {
        #[command(flatten)]
        opts: ConfigArgs,
    },
    /// Check a configuration and print its hash.
    ValidateConfig {
        #[command(flatten)]
        opts: ConfigArgs,
    },
    /// Run the built-in oracle checks.
    Selftest {
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Sweep {
    Ktilde,
    B,
}

#[derive(Debug, Args)]
struct ConfigArgs {
    /// TOML file holding a full configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Built-in configuration, used when no file is given.
    #[arg(long, value_enum)]
    preset: Option<Preset>,
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads.
    #[arg(long, env = "VBC_SIM_THREADS")]
    threads: Option<usize>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    users: Option<usize>,
    #[arg(long)]
    antennas: Option<usize>,
    #[arg(long)]
    k_tilde: Option<usize>,
    #[arg(long)]
    block_size: Option<usize>,
    #[arg(long)]
    di_block_size: Option<usize>,
    #[arg(long)]
    coherence_time: Option<usize>,
    #[arg(long)]
    info_len: Option<usize>,
    #[arg(long)]
    rate_inv: Option<usize>,
    #[arg(long)]
    iterations: Option<usize>,
    /// User frames per SNR point.
    #[arg(long)]
    frames: Option<usize>,
    /// Monte Carlo blocks per grid point.
    #[arg(long)]
    blocks: Option<usize>,
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    snr_db: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    strategies: Option<Vec<String>>,
    #[arg(long, value_delimiter = ',')]
    demods: Option<Vec<String>>,
    #[arg(long, value_delimiter = ',')]
    k_tilde_grid: Option<Vec<usize>>,
    #[arg(long, value_delimiter = ',')]
    b_grid: Option<Vec<usize>>,
    #[arg(long)]
    exhaustive_cap: Option<u64>,
    #[arg(long)]
    interference_blocks: Option<usize>,
    /// Always run every receiver iteration.
    #[arg(long)]
    no_early_exit: bool,
    /// Use the all-slot indicator posterior instead of the extrinsic one.
    #[arg(long)]
    all_slot_posterior: bool,
    #[arg(long)]
    damping: Option<f64>,
}

impl ConfigArgs {
    fn build(&self, experiment: Option<ExperimentKind>) -> Result<SimConfig> {
        let mut c = match &self.config {
            Some(path) => SimConfig::from_file(path)?,
            None => SimConfig::preset(self.preset.unwrap_or(Preset::Desk)),
        };
        if let Some(e) = experiment {
            c.experiment = e;
        }
        macro_rules! set {
            ($($field:ident <- $arg:ident),* $(,)?) => {
                $(if let Some(v) = self.$arg.clone() { c.$field = v; })*
            };
        }
        set!(
            seed <- seed,
            output_path <- out,
            users <- users,
            antennas <- antennas,
            k_tilde <- k_tilde,
            block_size <- block_size,
            coherence_time <- coherence_time,
            info_len <- info_len,
            rate_inv <- rate_inv,
            max_iterations <- iterations,
            frames_per_point <- frames,
            blocks_per_point <- blocks,
            snr_grid_db <- snr_db,
            b_grid <- b_grid,
            exhaustive_cap <- exhaustive_cap,
            interference_blocks <- interference_blocks,
            damping <- damping,
        );
        if self.threads.is_some() {
            c.threads = self.threads;
        }
        if self.di_block_size.is_some() {
            c.di_block_size = self.di_block_size;
        }
        if self.k_tilde_grid.is_some() {
            c.k_tilde_grid = self.k_tilde_grid.clone();
        }
        if let Some(s) = &self.strategies {
            c.strategies = s.iter().map(|s| s.parse::<Strategy>()).collect::<Result<_>>()?;
        }
        if let Some(d) = &self.demods {
            c.demod_kinds = d.iter().map(|s| s.parse::<DemodKind>()).collect::<Result<_>>()?;
        }
        if self.no_early_exit {
            c.early_exit = false;
        }
        if self.all_slot_posterior {
            c.exclude_own_slot = false;
        }
        c.validate()?;
        Ok(c)
    }
}

fn run_experiment(cfg: &SimConfig) -> Result<()> {
    let started = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
    let clock = Instant::now();
    let sink = harness::run(cfg)?;
    let path = records::write_run(cfg, &sink.records, clock.elapsed().as_secs_f64(), started)?;
    println!("{} records written to {}", sink.records.len(), path.display());
    Ok(())
}

fn dispatch(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Energy { sweep, opts } => {
            let kind = match sweep {
                Sweep::Ktilde => ExperimentKind::EnergyVsKtilde,
                Sweep::B => ExperimentKind::EnergyVsB,
            };
            run_experiment(&opts.build(Some(kind))?)?;
        }
        Command::Ber { opts } => run_experiment(&opts.build(Some(ExperimentKind::Ber))?)?,
        Command::Sumrate { opts } => run_experiment(&opts.build(Some(ExperimentKind::Sumrate))?)?,
        Command::ValidateConfig { opts } => {
            let cfg = opts.build(None)?;
            println!("config ok: experiment {} hash {}", cfg.experiment.name(), cfg.hash());
        }
        Command::Selftest { seed } => {
            let results = run_selftest(seed)?;
            let mut ok = true;
            for r in &results {
                println!("[{}] {}: {}", if r.passed { "PASS" } else { "FAIL" }, r.name, r.detail);
                ok &= r.passed;
            }
            return Ok(ok);
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match dispatch(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e @ Error::InvalidConfig(_)) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
