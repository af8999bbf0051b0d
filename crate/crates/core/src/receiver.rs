//! Iterative detection and decoding for one user.
//!
//! One iteration runs demodulator → accumulator decoder → repetition
//! decoder → accumulator decoder, after which the updated code-bit
//! extrinsics become the symbol beliefs `P` for the next demodulator pass.
//! The first pass starts from uniform beliefs.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::coding::{
    hard_bit, siso_accumulator_decode, siso_repetition_decode, symbol_to_bit_llrs, BicmMapper,
    RaCode, SymbolBelief,
};
use crate::demod::{demod_block, DemodKind, EquivalentChannelParams, SlotTerms};
use crate::error::{Error, Result};

pub const DEFAULT_ITERATIONS: usize = 40;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReceiverConfig {
    pub demod: DemodKind,
    pub max_iterations: usize,
    /// Stop once the decisions re-encode to the code-bit hard decisions.
    pub early_exit: bool,
    /// Use the extrinsic (leave-one-slot-out) indicator posterior. `false`
    /// selects the cheaper all-slot posterior approximation.
    pub exclude_own_slot: bool,
    /// Weight of the previous demodulator message in a convex update; 0 disables.
    pub damping: f64,
}

impl ReceiverConfig {
    pub fn new(demod: DemodKind, max_iterations: usize) -> Self {
        Self {
            demod,
            max_iterations,
            early_exit: true,
            exclude_own_slot: true,
            damping: 0.0,
        }
    }
}

/// Everything user `k` has for decoding one frame.
#[derive(Debug, Clone, Copy)]
pub struct UserObservation<'a> {
    pub received: &'a [Complex64],
    pub code: &'a RaCode,
    pub mapper: &'a BicmMapper,
    /// Slots per selection block.
    pub block_len: usize,
    /// True indicator per selection block; needed by the genie demodulator.
    pub true_indicators: Option<&'a [bool]>,
}

/// Messages held between iterations.
#[derive(Debug, Clone)]
pub struct ReceiverState {
    pub iteration: usize,
    /// `P_m`, decoder → demodulator.
    pub beliefs_to_demod: Vec<SymbolBelief>,
    /// `Q_m`, demodulator → decoder.
    pub beliefs_to_decoder: Vec<SymbolBelief>,
    /// All-slot posterior mean of the indicator per selection block.
    pub indicator_means: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationDiagnostics {
    pub iteration: usize,
    /// Information-bit errors after this iteration, when the truth is known.
    pub bit_errors: Option<usize>,
    /// Mean of the per-block indicator posteriors.
    pub mean_indicator: f64,
    /// Indicator posterior of every selection block.
    pub indicator_means: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct DecodeOutcome {
    pub info_bits: Vec<u8>,
    /// Iterations actually executed; equals `max_iterations` unless exited early.
    pub iterations_run: usize,
    pub converged: bool,
    /// One entry per executed iteration.
    pub diagnostics: Vec<IterationDiagnostics>,
    /// Blocks whose indicator posterior fell back to the prior.
    pub posterior_fallbacks: usize,
    pub state: ReceiverState,
}

impl DecodeOutcome {
    /// Bit errors after iteration `m` (1-based). Iterations skipped by the
    /// early exit repeat the final decisions.
    pub fn bit_errors_at(&self, m: usize) -> Option<usize> {
        let idx = m.min(self.diagnostics.len()).checked_sub(1)?;
        self.diagnostics[idx].bit_errors
    }
}

/// Runs the iterative receiver for one user and frame.
pub fn run_iterative_decode(
    obs: &UserObservation<'_>,
    params: &EquivalentChannelParams,
    cfg: &ReceiverConfig,
    truth: Option<&[u8]>,
) -> Result<DecodeOutcome> {
    params.validate()?;
    let slots = obs.received.len();
    if obs.mapper.symbols_len() != slots || obs.code.code_len() != 2 * slots {
        return Err(Error::Dimension(format!(
            "{slots} received slots for a code of length {}",
            obs.code.code_len()
        )));
    }
    if obs.block_len == 0 || slots % obs.block_len != 0 {
        return Err(Error::Contract(format!(
            "frame of {slots} slots is not a whole number of blocks of {}",
            obs.block_len
        )));
    }
    let blocks = slots / obs.block_len;
    if cfg.demod == DemodKind::Genie && obs.true_indicators.map_or(true, |a| a.len() != blocks) {
        return Err(Error::Contract("genie demodulation needs one true indicator per block".into()));
    }
    if let Some(t) = truth {
        if t.len() != obs.code.info_len() {
            return Err(Error::Dimension("truth length differs from the code dimension".into()));
        }
    }

    let terms: Vec<SlotTerms> = obs.received.iter().map(|&y| SlotTerms::new(y, params)).collect();
    let code_len = obs.code.code_len();
    let rate_inv = obs.code.rate_inv();

    let mut state = ReceiverState {
        iteration: 0,
        beliefs_to_demod: vec![SymbolBelief::UNIFORM; slots],
        beliefs_to_decoder: vec![SymbolBelief::UNIFORM; slots],
        indicator_means: vec![params.prior_selected; blocks],
    };
    // Decoder-side extrinsic LLRs per symbol, (b1, b0).
    let mut bit_priors = vec![[0.0f64; 2]; slots];
    // Repetition decoder → accumulator priors, accumulator-input order.
    let mut input_priors = vec![0.0f64; code_len];
    let mut fresh = vec![SymbolBelief::UNIFORM; obs.block_len];
    let mut decisions = vec![0u8; obs.code.info_len()];
    let mut diagnostics = Vec::with_capacity(cfg.max_iterations);
    let mut fallbacks = 0;
    let mut converged = false;

    for m in 1..=cfg.max_iterations {
        // demodulator
        for j in 0..blocks {
            let range = j * obs.block_len..(j + 1) * obs.block_len;
            let post = demod_block(
                cfg.demod,
                &terms[range.clone()],
                &state.beliefs_to_demod[range.clone()],
                obs.true_indicators.map(|a| a[j]),
                params,
                cfg.exclude_own_slot,
                &mut fresh,
            );
            fallbacks += post.fell_back as usize;
            state.indicator_means[j] = post.a_hat;
            for (q, new) in state.beliefs_to_decoder[range].iter_mut().zip(&fresh) {
                *q = if cfg.damping > 0.0 && m > 1 {
                    let mut w = [0.0; 4];
                    for i in 0..4 {
                        w[i] = cfg.damping * q.probs[i] + (1.0 - cfg.damping) * new.probs[i];
                    }
                    SymbolBelief::from_weights(w)
                } else {
                    *new
                };
            }
        }
        let channel_pairs: Vec<[f64; 2]> = state
            .beliefs_to_decoder
            .iter()
            .zip(&bit_priors)
            .map(|(q, p)| symbol_to_bit_llrs(q, *p))
            .collect();
        let channel = obs.mapper.to_code_order(&channel_pairs);

        // inner → outer → inner
        let inner = siso_accumulator_decode(&channel, &input_priors);
        let outer = siso_repetition_decode(&obs.code.deinterleave(&inner.input_ext), rate_inv);
        input_priors = obs.code.interleave(&outer.copy_ext);
        let inner = siso_accumulator_decode(&channel, &input_priors);

        for (d, &l) in decisions.iter_mut().zip(&outer.posterior) {
            *d = hard_bit(l);
        }
        bit_priors = obs.mapper.to_symbol_order(&inner.code_ext);
        for (p, b) in state.beliefs_to_demod.iter_mut().zip(&bit_priors) {
            *p = SymbolBelief::from_bit_llrs(b[0], b[1]);
        }
        state.iteration = m;

        let bit_errors = truth.map(|t| t.iter().zip(&decisions).filter(|(a, b)| a != b).count());
        diagnostics.push(IterationDiagnostics {
            iteration: m,
            bit_errors,
            mean_indicator: state.indicator_means.iter().sum::<f64>() / blocks as f64,
            indicator_means: state.indicator_means.clone(),
        });

        if cfg.early_exit {
            let reencoded = obs.code.encode(&decisions)?;
            let consistent = reencoded
                .iter()
                .zip(channel.iter().zip(&inner.code_ext))
                .all(|(&c, (&l, &e))| c == hard_bit(l + e));
            if consistent {
                converged = true;
                break;
            }
        }
    }

    Ok(DecodeOutcome {
        info_bits: decisions,
        iterations_run: state.iteration,
        converged,
        diagnostics,
        posterior_fallbacks: fallbacks,
        state,
    })
}
