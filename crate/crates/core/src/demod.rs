//! Demodulators for the per-user equivalent channel.
//!
//! After zero-forcing, user `k` sees in each slot of a selection block either
//! its own symbol (`a = 1`) or interference from the beams of the other
//! users (`a = 0`):
//!
//! ```text
//! y = (a x + (1 - a) I) / √E + n,   n ~ CN(0, N0)
//! ```
//!
//! The interference is modeled as CN(0, σ²). The indicator `a` is shared by
//! all slots of the block and unknown to the receiver; the soft demodulator
//! marginalizes it using the other slots of the block, the hard one decides
//! it by MAP and the genie is told the truth.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::Mutex;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::channel::sample_channel_matrix;
use crate::coding::{random_qpsk_matrix, SymbolBelief, QPSK};
use crate::error::{Error, Result};
use crate::linalg::dot;
use crate::rng::{rng_for, stream};
use crate::selection::{select, Strategy, UsBlockInput};

/// Parameters of the equivalent channel, assumed known at the receiver.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EquivalentChannelParams {
    /// Frame energy penalty `E`.
    pub energy_penalty: f64,
    pub n0: f64,
    /// Interference power `σ² = E[|I|²]`.
    pub sigma2: f64,
    /// `p(a = 1)`, the long-run selection frequency `k_tilde / K`.
    pub prior_selected: f64,
}

impl EquivalentChannelParams {
    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        if !(self.energy_penalty > 0.0 && self.energy_penalty.is_finite()) {
            problems.push(format!("energy penalty must be positive, got {}", self.energy_penalty));
        }
        if !(self.n0 > 0.0 && self.n0.is_finite()) {
            problems.push(format!("N0 must be positive, got {}", self.n0));
        }
        if !(self.sigma2 >= 0.0 && self.sigma2.is_finite()) {
            problems.push(format!("sigma^2 must be nonnegative, got {}", self.sigma2));
        }
        if !(0.0..=1.0).contains(&self.prior_selected) {
            problems.push(format!("prior must lie in [0, 1], got {}", self.prior_selected));
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidConfig(problems))
        }
    }

    /// Variance of `y` when the user is not served.
    pub fn erased_variance(&self) -> f64 {
        self.n0 + self.sigma2 / self.energy_penalty
    }

    fn prior_logit(&self) -> f64 {
        let p = self.prior_selected;
        if p >= 1.0 {
            f64::INFINITY
        } else if p <= 0.0 {
            f64::NEG_INFINITY
        } else {
            (p / (1.0 - p)).ln()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DemodKind {
    Soft,
    Hard,
    Genie,
}

impl DemodKind {
    pub fn name(self) -> &'static str {
        match self {
            DemodKind::Soft => "soft",
            DemodKind::Hard => "hard",
            DemodKind::Genie => "genie",
        }
    }
}

impl std::fmt::Display for DemodKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for DemodKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "soft" => Ok(DemodKind::Soft),
            "hard" => Ok(DemodKind::Hard),
            "genie" => Ok(DemodKind::Genie),
            _ => Err(Error::InvalidConfig(vec![format!("unknown demodulator `{s}`")])),
        }
    }
}

/// `p(y | x, a)` under the Gaussian interference model.
pub fn slot_likelihood(y: Complex64, x: Complex64, a: bool, params: &EquivalentChannelParams) -> f64 {
    if a {
        let r = y - x / params.energy_penalty.sqrt();
        (-r.norm_sqr() / params.n0).exp() / (PI * params.n0)
    } else {
        let v = params.erased_variance();
        (-y.norm_sqr() / v).exp() / (PI * v)
    }
}

/// Per-slot log-likelihood terms, independent of the decoder messages.
///
/// `ln p(y | x, a=1) = served_max + ln served[x]`, `ln p(y | a=0) = erased`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlotTerms {
    pub erased: f64,
    pub served_max: f64,
    pub served: [f64; 4],
}

impl SlotTerms {
    pub fn new(y: Complex64, params: &EquivalentChannelParams) -> Self {
        let v = params.erased_variance();
        let erased = -(PI * v).ln() - y.norm_sqr() / v;
        let scale = 1.0 / params.energy_penalty.sqrt();
        let log_norm = -(PI * params.n0).ln();
        let l = QPSK.map(|x| log_norm - (y - x * scale).norm_sqr() / params.n0);
        let served_max = l.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Self {
            erased,
            served_max,
            served: l.map(|li| (li - served_max).exp()),
        }
    }

    /// `ln p(y | a=1) - ln p(y | a=0)` with `x` marginalized over `belief`.
    pub fn log_ratio(&self, belief: &SymbolBelief) -> f64 {
        let s: f64 = self.served.iter().zip(&belief.probs).map(|(e, p)| e * p).sum();
        self.served_max + s.ln() - self.erased
    }

    /// Message `Q(x) ∝ (1 - â) p(y | a=0) + â p(y | x, a=1)` for an indicator
    /// posterior given by its log-odds.
    pub fn message(&self, log_odds: f64) -> SymbolBelief {
        let ln_on = -softplus(-log_odds);
        let ln_off = -softplus(log_odds);
        let a = ln_off + self.erased;
        let b = ln_on + self.served_max;
        let m = a.max(b);
        let (wa, wb) = ((a - m).exp(), (b - m).exp());
        SymbolBelief::from_weights(self.served.map(|e| wa + wb * e))
    }

    /// Message for a known indicator.
    pub fn message_given(&self, selected: bool) -> SymbolBelief {
        if selected {
            SymbolBelief::from_weights(self.served)
        } else {
            SymbolBelief::UNIFORM
        }
    }
}

/// `ln(1 + e^z)`, exact for infinite arguments.
fn softplus(z: f64) -> f64 {
    if z == f64::INFINITY {
        f64::INFINITY
    } else if z == f64::NEG_INFINITY {
        0.0
    } else {
        z.max(0.0) + (-z.abs()).exp().ln_1p()
    }
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Posterior mean of the selection indicator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IndicatorPosterior {
    pub a_hat: f64,
    /// Posterior log-odds `ln p(a=1 | ·) / p(a=0 | ·)`.
    pub log_odds: f64,
    /// The likelihoods were unusable and the prior was returned instead.
    pub fell_back: bool,
}

impl IndicatorPosterior {
    fn from_log_odds(log_odds: f64, prior: &EquivalentChannelParams) -> Self {
        if log_odds.is_nan() {
            let lo = prior.prior_logit();
            return Self {
                a_hat: prior.prior_selected,
                log_odds: lo,
                fell_back: true,
            };
        }
        Self {
            a_hat: sigmoid(log_odds),
            log_odds,
            fell_back: false,
        }
    }

    /// MAP decision; an exact tie declares the user selected.
    pub fn map_decision(&self) -> bool {
        self.log_odds >= 0.0
    }
}

/// `p(a = 1 | {y_t' : t' ≠ exclude})` from the block observations and the
/// decoder beliefs on each slot's symbol. `exclude = None` uses every slot.
pub fn indicator_posterior(
    block_obs: &[Complex64],
    beliefs: &[SymbolBelief],
    exclude_slot: Option<usize>,
    params: &EquivalentChannelParams,
) -> IndicatorPosterior {
    assert_eq!(block_obs.len(), beliefs.len(), "one belief per slot");
    let mut log_odds = params.prior_logit();
    for (t, (&y, b)) in block_obs.iter().zip(beliefs).enumerate() {
        if Some(t) != exclude_slot {
            log_odds += SlotTerms::new(y, params).log_ratio(b);
        }
    }
    IndicatorPosterior::from_log_odds(log_odds, params)
}

/// Soft-decision message for `slot`: the indicator is marginalized over
/// its posterior given the other slots of the block.
pub fn soft_demod(
    block_obs: &[Complex64],
    beliefs: &[SymbolBelief],
    slot: usize,
    params: &EquivalentChannelParams,
) -> SymbolBelief {
    let post = indicator_posterior(block_obs, beliefs, Some(slot), params);
    SlotTerms::new(block_obs[slot], params).message(post.log_odds)
}

/// Hard-decision message for `slot`: the indicator is replaced by its MAP estimate.
pub fn hard_demod(
    block_obs: &[Complex64],
    beliefs: &[SymbolBelief],
    slot: usize,
    params: &EquivalentChannelParams,
) -> SymbolBelief {
    let post = indicator_posterior(block_obs, beliefs, Some(slot), params);
    SlotTerms::new(block_obs[slot], params).message_given(post.map_decision())
}

/// Message with the true indicator supplied.
pub fn genie_demod(y: Complex64, true_a: bool, params: &EquivalentChannelParams) -> SymbolBelief {
    SlotTerms::new(y, params).message_given(true_a)
}

/// Message for an externally fixed posterior mean `a_hat`.
pub fn demod_with_posterior(y: Complex64, a_hat: f64, params: &EquivalentChannelParams) -> SymbolBelief {
    let log_odds = if a_hat >= 1.0 {
        f64::INFINITY
    } else if a_hat <= 0.0 {
        f64::NEG_INFINITY
    } else {
        (a_hat / (1.0 - a_hat)).ln()
    };
    SlotTerms::new(y, params).message(log_odds)
}

/// Demodulates one selection block in place.
///
/// `terms` and `beliefs` cover the block's slots; `out` receives the
/// messages. With `exclude_own_slot = false` every slot uses the posterior
/// computed from the whole block, a cheaper non-extrinsic approximation.
/// Returns the all-slot posterior of the block.
pub fn demod_block(
    kind: DemodKind,
    terms: &[SlotTerms],
    beliefs: &[SymbolBelief],
    true_selected: Option<bool>,
    params: &EquivalentChannelParams,
    exclude_own_slot: bool,
    out: &mut [SymbolBelief],
) -> IndicatorPosterior {
    let prior = params.prior_logit();
    let ratios: Vec<f64> = terms.iter().zip(beliefs).map(|(s, b)| s.log_ratio(b)).collect();
    let total: f64 = ratios.iter().sum();
    let block = IndicatorPosterior::from_log_odds(prior + total, params);
    for (t, s) in terms.iter().enumerate() {
        out[t] = match kind {
            DemodKind::Genie => s.message_given(true_selected.expect("genie demodulation needs the true indicator")),
            DemodKind::Soft | DemodKind::Hard => {
                let post = if exclude_own_slot {
                    let rest = if ratios[t].is_finite() {
                        total - ratios[t]
                    } else {
                        ratios.iter().enumerate().filter(|&(i, _)| i != t).map(|(_, r)| r).sum()
                    };
                    IndicatorPosterior::from_log_odds(prior + rest, params)
                } else {
                    block
                };
                match kind {
                    DemodKind::Soft => s.message(post.log_odds),
                    _ => s.message_given(post.map_decision()),
                }
            }
        };
    }
    block
}

/// Monte Carlo estimate with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub mean: f64,
    pub stderr: f64,
    pub samples: usize,
}

impl Estimate {
    /// Mean and standard error of i.i.d. samples.
    pub fn from_samples(xs: &[f64]) -> Self {
        let n = xs.len();
        if n == 0 {
            return Self { mean: f64::NAN, stderr: f64::NAN, samples: 0 };
        }
        let mean = xs.iter().sum::<f64>() / n as f64;
        let var = if n > 1 {
            xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64
        } else {
            0.0
        };
        Self {
            mean,
            stderr: (var / n as f64).sqrt(),
            samples: n,
        }
    }
}

/// Setting under which the interference power is estimated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct InterferenceSetting {
    pub users: usize,
    pub antennas: usize,
    pub k_tilde: usize,
    pub block: usize,
    pub strategy: Strategy,
}

/// `σ² = E[|h_k u_t|²]` over unselected users, fading and symbols.
///
/// Each of the `blocks` independent selection blocks contributes the mean
/// over its `B (K - k_tilde)` unselected user-slots; the standard error is
/// taken across blocks.
pub fn interference_power(setting: &InterferenceSetting, blocks: usize, seed: u64) -> Result<Estimate> {
    let InterferenceSetting { users, antennas, k_tilde, block, strategy } = *setting;
    if k_tilde == 0 || k_tilde == users {
        return Ok(Estimate { mean: 0.0, stderr: 0.0, samples: blocks });
    }
    let mut per_block = Vec::with_capacity(blocks);
    for i in 0..blocks {
        let mut rng = rng_for(seed, &[stream::INTERFERENCE, i as u64]);
        let h = sample_channel_matrix(&mut rng, users, antennas);
        let x = random_qpsk_matrix(&mut rng, block, users);
        let input = UsBlockInput { channel_rows: &h, symbols: &x, k_tilde };
        let sel = select(strategy, &input, crate::selection::EXHAUSTIVE_CAP)?;
        let on = sel.indicators(users);
        let mut acc = 0.0;
        for t in 0..block {
            let u = sel.pinv.mul_vec(&sel.gather(x.row(t)));
            for k in (0..users).filter(|&k| !on[k]) {
                acc += dot(h.row(k), &u).norm_sqr();
            }
        }
        per_block.push(acc / (block * (users - k_tilde)) as f64);
    }
    Ok(Estimate::from_samples(&per_block))
}

/// Memoizes [`interference_power`] per setting.
#[derive(Debug)]
pub struct InterferenceCache {
    blocks: usize,
    seed: u64,
    entries: Mutex<HashMap<InterferenceSetting, Estimate>>,
}

impl InterferenceCache {
    pub fn new(blocks: usize, seed: u64) -> Self {
        Self {
            blocks,
            seed,
            entries: Mutex::new(HashMap::new()),
        }
    }

    pub fn get(&self, setting: &InterferenceSetting) -> Result<Estimate> {
        if let Some(e) = self.entries.lock().unwrap().get(setting) {
            return Ok(*e);
        }
        let e = interference_power(setting, self.blocks, self.seed)?;
        self.entries.lock().unwrap().insert(*setting, e);
        Ok(e)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params() -> EquivalentChannelParams {
        EquivalentChannelParams { energy_penalty: 2.5, n0: 0.3, sigma2: 0.8, prior_selected: 0.5 }
    }

    #[test]
    fn likelihood_peaks() {
        let p = params();
        let x = QPSK[2];
        let y = x / p.energy_penalty.sqrt();
        assert!((slot_likelihood(y, x, true, &p) - 1.0 / (PI * p.n0)).abs() < 1e-12);
        let y0 = Complex64::new(0.0, 0.0);
        assert!((slot_likelihood(y0, x, false, &p) - 1.0 / (PI * p.erased_variance())).abs() < 1e-12);
    }

    #[test]
    fn likelihood_integrates_to_one() {
        let p = params();
        // Midpoint rule over a box wide enough for both branches.
        let (half, steps) = (6.0, 600);
        let h = 2.0 * half / steps as f64;
        for a in [true, false] {
            let mut total = 0.0;
            for i in 0..steps {
                for j in 0..steps {
                    let y = Complex64::new(-half + (i as f64 + 0.5) * h, -half + (j as f64 + 0.5) * h);
                    total += slot_likelihood(y, QPSK[1], a, &p) * h * h;
                }
            }
            assert!((total - 1.0).abs() < 1e-6, "a={a}: {total}");
        }
    }

    #[test]
    fn slot_terms_match_likelihood() {
        let p = params();
        let y = Complex64::new(0.3, -0.7);
        let s = SlotTerms::new(y, &p);
        for (i, x) in QPSK.iter().enumerate() {
            let direct = slot_likelihood(y, *x, true, &p).ln();
            assert!((s.served_max + s.served[i].ln() - direct).abs() < 1e-12);
        }
        assert!((s.erased - slot_likelihood(y, QPSK[0], false, &p).ln()).abs() < 1e-12);
    }

    #[test]
    fn single_slot_posterior_is_prior() {
        let mut p = params();
        p.prior_selected = 0.3;
        let post = indicator_posterior(&[Complex64::new(1.0, 0.0)], &[SymbolBelief::UNIFORM], Some(0), &p);
        assert!((post.a_hat - 0.3).abs() < 1e-12);
    }

    #[test]
    fn posterior_grows_with_interference_power() {
        let mut p = params();
        let ys: Vec<Complex64> = [QPSK[0], QPSK[3], QPSK[1]]
            .iter()
            .map(|x| x / p.energy_penalty.sqrt() + Complex64::new(0.05, -0.02))
            .collect();
        let beliefs = [SymbolBelief::UNIFORM; 3];
        let mut last = 0.0;
        for s2 in [0.5, 5.0, 50.0, 500.0, 5000.0] {
            p.sigma2 = s2;
            let a = indicator_posterior(&ys, &beliefs, None, &p).a_hat;
            assert!(a >= last, "not monotone at {s2}");
            last = a;
        }
        assert!(last > 0.99);
    }

    #[test]
    fn forced_posteriors() {
        let p = params();
        let y = QPSK[2] / p.energy_penalty.sqrt();
        let q0 = demod_with_posterior(y, 0.0, &p);
        assert!(q0.probs.iter().all(|&v| (v - 0.25).abs() < 1e-15));
        let mut sharp = p;
        sharp.n0 = 1e-3;
        let q1 = demod_with_posterior(y, 1.0, &sharp);
        assert!(q1.probs[2] > 1.0 - 1e-12);
        // branch consistency with the genie
        for a in [false, true] {
            let g = genie_demod(y, a, &p);
            let s = demod_with_posterior(y, a as u8 as f64, &p);
            for i in 0..4 {
                assert!((g.probs[i] - s.probs[i]).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn hard_with_certain_prior_always_selects() {
        let mut p = params();
        p.prior_selected = 1.0;
        let ys = [Complex64::new(3.0, 3.0), Complex64::new(0.0, 0.1)];
        let b = [SymbolBelief::UNIFORM; 2];
        let q = hard_demod(&ys, &b, 1, &p);
        assert_eq!(q, genie_demod(ys[1], true, &p));
    }

    #[test]
    fn genie_point_mass_when_noiseless() {
        let p = EquivalentChannelParams { energy_penalty: 1.7, n0: 1e-6, sigma2: 1.0, prior_selected: 0.5 };
        let q = genie_demod(QPSK[1] / 1.7f64.sqrt(), true, &p);
        assert!(q.probs[1] > 1.0 - 1e-12);
        assert_eq!(genie_demod(QPSK[1], false, &p), SymbolBelief::UNIFORM);
    }

    #[test]
    fn params_validation() {
        let mut p = params();
        assert!(p.validate().is_ok());
        p.prior_selected = 1.2;
        p.n0 = 0.0;
        match p.validate() {
            Err(Error::InvalidConfig(v)) => assert_eq!(v.len(), 2),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn zero_selected_has_no_interference() {
        let s = InterferenceSetting { users: 4, antennas: 2, k_tilde: 0, block: 2, strategy: Strategy::DataDependent };
        assert_eq!(interference_power(&s, 10, 1).unwrap().mean, 0.0);
    }
}
