//! Repeat-accumulate coding, BICM interleaving and Gray-labeled QPSK, with
//! the soft-in soft-out component decoders used by the iterative receiver.
//!
//! LLRs are `ln P(b = 0) / P(b = 1)` throughout.

use num_complex::Complex64;
use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{Error, Result};
use crate::linalg::CMatrix;
use crate::rng::rng_for;

/// Magnitude bound on every LLR exchanged between components.
pub const LLR_CLAMP: f64 = 30.0;

/// Floor applied to belief entries before normalization.
pub const PROB_FLOOR: f64 = 1e-300;

const H: f64 = std::f64::consts::FRAC_1_SQRT_2;

/// Gray-labeled QPSK, indexed by `2 * b1 + b0`.
pub const QPSK: [Complex64; 4] = [
    Complex64 { re: H, im: H },
    Complex64 { re: H, im: -H },
    Complex64 { re: -H, im: H },
    Complex64 { re: -H, im: -H },
];

pub const BITS_PER_SYMBOL: usize = 2;

#[inline]
pub fn clamp_llr(l: f64) -> f64 {
    if l.is_nan() {
        0.0
    } else {
        l.clamp(-LLR_CLAMP, LLR_CLAMP)
    }
}

/// `P(b = 0)` for an LLR.
#[inline]
pub fn prob_zero(llr: f64) -> f64 {
    1.0 / (1.0 + (-llr).exp())
}

/// `P(b = 1)` for an LLR.
#[inline]
pub fn prob_one(llr: f64) -> f64 {
    1.0 / (1.0 + llr.exp())
}

/// Maps a bit pair to its QPSK point.
#[inline]
pub fn qpsk_map(b1: u8, b0: u8) -> Complex64 {
    QPSK[symbol_index(b1, b0)]
}

#[inline]
pub fn symbol_index(b1: u8, b0: u8) -> usize {
    ((b1 & 1) as usize) << 1 | (b0 & 1) as usize
}

/// Nearest QPSK point's index.
pub fn qpsk_hard_index(y: Complex64) -> usize {
    symbol_index((y.re < 0.0) as u8, (y.im < 0.0) as u8)
}

/// A `rows x cols` matrix of i.i.d. uniform QPSK symbols.
pub fn random_qpsk_matrix<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize) -> CMatrix {
    CMatrix::from_fn(rows, cols, |_, _| QPSK[rng.gen_range(0..4)])
}

/// Probability vector over the four QPSK points.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SymbolBelief {
    pub probs: [f64; 4],
}

impl SymbolBelief {
    pub const UNIFORM: SymbolBelief = SymbolBelief { probs: [0.25; 4] };

    /// Normalizes nonnegative weights, flooring each entry at [`PROB_FLOOR`].
    pub fn from_weights(w: [f64; 4]) -> Self {
        let mut probs = w.map(|p| if p.is_finite() { p.max(PROB_FLOOR) } else if p > 0.0 { f64::MAX } else { PROB_FLOOR });
        let s: f64 = probs.iter().sum();
        probs.iter_mut().for_each(|p| *p /= s);
        Self { probs }
    }

    pub fn point_mass(index: usize) -> Self {
        let mut w = [0.0; 4];
        w[index] = 1.0;
        Self::from_weights(w)
    }

    /// Product belief of two independent bits given as LLRs `(b1, b0)`.
    pub fn from_bit_llrs(l1: f64, l0: f64) -> Self {
        let p1 = [prob_zero(l1), prob_one(l1)];
        let p0 = [prob_zero(l0), prob_one(l0)];
        Self::from_weights([p1[0] * p0[0], p1[0] * p0[1], p1[1] * p0[0], p1[1] * p0[1]])
    }

    pub fn is_normalized(&self, tol: f64) -> bool {
        self.probs.iter().all(|&p| p >= 0.0 && p.is_finite())
            && (self.probs.iter().sum::<f64>() - 1.0).abs() <= tol
    }

    /// Symbol mean `Σ_x P(x) x`.
    pub fn mean(&self) -> Complex64 {
        self.probs.iter().zip(QPSK).map(|(p, x)| x * *p).sum()
    }
}

/// Bit marginals `[P(b1 = 1), P(b0 = 1)]` of a symbol belief.
pub fn qpsk_soft_metrics(belief: &SymbolBelief) -> [f64; 2] {
    let p = belief.probs;
    [p[2] + p[3], p[1] + p[3]]
}

/// Extrinsic bit LLRs `(b1, b0)` from a symbol message `q` and the decoder's
/// prior LLRs on the same bits: each bit marginalizes `q` against the
/// prior of the other bit only.
pub fn symbol_to_bit_llrs(q: &SymbolBelief, prior: [f64; 2]) -> [f64; 2] {
    let p = q.probs;
    let pb1 = [prob_zero(prior[0]), prob_one(prior[0])];
    let pb0 = [prob_zero(prior[1]), prob_one(prior[1])];
    let l1 = ((p[0] * pb0[0] + p[1] * pb0[1]) / (p[2] * pb0[0] + p[3] * pb0[1])).ln();
    let l0 = ((p[0] * pb1[0] + p[2] * pb1[1]) / (p[1] * pb1[0] + p[3] * pb1[1])).ln();
    [clamp_llr(l1), clamp_llr(l0)]
}

/// Uniformly random permutation of `0..len`.
pub fn random_permutation(len: usize, seed: u64) -> Vec<usize> {
    let mut p: Vec<usize> = (0..len).collect();
    p.shuffle(&mut rng_for(seed, &[]));
    p
}

pub fn is_permutation(p: &[usize]) -> bool {
    let mut seen = vec![false; p.len()];
    p.iter().all(|&i| i < seen.len() && !std::mem::replace(&mut seen[i], true))
}

/// A rate `1/rate_inv` repeat-accumulate code with a fixed internal interleaver.
///
/// Encoding repeats each bit `rate_inv` times (`r[j] = s[j / rate_inv]`),
/// permutes (`v[n] = r[perm[n]]`) and accumulates (`c[n] = c[n-1] ⊕ v[n]`,
/// starting from state 0, no termination).
#[derive(Debug, Clone)]
pub struct RaCode {
    rate_inv: usize,
    info_len: usize,
    perm: Vec<usize>,
}

impl RaCode {
    pub fn new(info_len: usize, rate_inv: usize, perm: Vec<usize>) -> Result<Self> {
        if rate_inv == 0 {
            return Err(Error::Contract("rate_inv must be a positive integer".into()));
        }
        if perm.len() != info_len * rate_inv || !is_permutation(&perm) {
            return Err(Error::Contract(format!(
                "interleaver must be a permutation of length {}",
                info_len * rate_inv
            )));
        }
        Ok(Self { rate_inv, info_len, perm })
    }

    pub fn with_seed(info_len: usize, rate_inv: usize, seed: u64) -> Result<Self> {
        Self::new(info_len, rate_inv, random_permutation(info_len * rate_inv, seed))
    }

    pub fn rate_inv(&self) -> usize {
        self.rate_inv
    }

    pub fn info_len(&self) -> usize {
        self.info_len
    }

    pub fn code_len(&self) -> usize {
        self.info_len * self.rate_inv
    }

    pub fn interleaver(&self) -> &[usize] {
        &self.perm
    }

    /// Interleaved repetition stream `v` (the accumulator input).
    pub fn accumulator_input(&self, info_bits: &[u8]) -> Vec<u8> {
        self.perm.iter().map(|&j| info_bits[j / self.rate_inv] & 1).collect()
    }

    pub fn encode(&self, info_bits: &[u8]) -> Result<Vec<u8>> {
        if info_bits.len() != self.info_len {
            return Err(Error::Dimension(format!(
                "{} info bits for a code of dimension {}",
                info_bits.len(),
                self.info_len
            )));
        }
        Ok(accumulate(&self.accumulator_input(info_bits)))
    }

    /// Values on accumulator-input positions back to repetition order.
    pub fn deinterleave<T: Copy + Default>(&self, v: &[T]) -> Vec<T> {
        let mut r = vec![T::default(); v.len()];
        for (n, &j) in self.perm.iter().enumerate() {
            r[j] = v[n];
        }
        r
    }

    /// Values in repetition order onto accumulator-input positions.
    pub fn interleave<T: Copy>(&self, r: &[T]) -> Vec<T> {
        self.perm.iter().map(|&j| r[j]).collect()
    }
}

/// Running XOR.
pub fn accumulate(v: &[u8]) -> Vec<u8> {
    let mut state = 0u8;
    v.iter()
        .map(|&b| {
            state ^= b & 1;
            state
        })
        .collect()
}

/// Inverse of [`accumulate`]: `v[n] = c[n] ⊕ c[n-1]`.
pub fn differentiate(c: &[u8]) -> Vec<u8> {
    let mut prev = 0u8;
    c.iter()
        .map(|&b| {
            let v = (b ^ prev) & 1;
            prev = b & 1;
            v
        })
        .collect()
}

/// Encodes with a code whose interleaver is drawn from `perm_seed`.
pub fn ra_encode(info_bits: &[u8], rate_inv: usize, perm_seed: u64) -> Result<Vec<u8>> {
    RaCode::with_seed(info_bits.len(), rate_inv, perm_seed)?.encode(info_bits)
}

/// BICM bit interleaver followed by QPSK mapping. Coded bit `perm[m]` is
/// transmitted as stream bit `m`; stream bits `2t` and `2t+1` form the label
/// `(b1, b0)` of symbol `t`.
#[derive(Debug, Clone)]
pub struct BicmMapper {
    perm: Vec<usize>,
}

impl BicmMapper {
    pub fn new(perm: Vec<usize>) -> Result<Self> {
        if perm.len() % BITS_PER_SYMBOL != 0 || !is_permutation(&perm) {
            return Err(Error::Contract("BICM interleaver must be an even-length permutation".into()));
        }
        Ok(Self { perm })
    }

    pub fn with_seed(code_len: usize, seed: u64) -> Result<Self> {
        Self::new(random_permutation(code_len, seed))
    }

    pub fn symbols_len(&self) -> usize {
        self.perm.len() / BITS_PER_SYMBOL
    }

    pub fn map(&self, coded: &[u8]) -> Vec<Complex64> {
        (0..self.symbols_len())
            .map(|t| qpsk_map(coded[self.perm[2 * t]], coded[self.perm[2 * t + 1]]))
            .collect()
    }

    pub fn symbol_indices(&self, coded: &[u8]) -> Vec<usize> {
        (0..self.symbols_len())
            .map(|t| symbol_index(coded[self.perm[2 * t]], coded[self.perm[2 * t + 1]]))
            .collect()
    }

    /// Per-symbol bit pairs `(b1, b0)` to coded-bit order.
    pub fn to_code_order(&self, pairs: &[[f64; 2]]) -> Vec<f64> {
        let mut out = vec![0.0; self.perm.len()];
        for (t, p) in pairs.iter().enumerate() {
            out[self.perm[2 * t]] = p[0];
            out[self.perm[2 * t + 1]] = p[1];
        }
        out
    }

    /// Coded-bit values to per-symbol bit pairs.
    pub fn to_symbol_order(&self, code: &[f64]) -> Vec<[f64; 2]> {
        (0..self.symbols_len())
            .map(|t| [code[self.perm[2 * t]], code[self.perm[2 * t + 1]]])
            .collect()
    }
}

/// Extrinsic outputs of the accumulator decoder.
#[derive(Debug, Clone, PartialEq)]
pub struct AccumulatorOutput {
    /// Extrinsic LLRs on the accumulator input bits (towards the repetition decoder).
    pub input_ext: Vec<f64>,
    /// Extrinsic LLRs on the code bits (towards the demodulator).
    pub code_ext: Vec<f64>,
}

/// Forward-backward decoding of the two-state accumulator trellis.
///
/// `code_llrs` are the channel LLRs on `c`, `input_priors` the priors on `v`.
/// The trellis starts in state 0 and is left open at the end.
pub fn siso_accumulator_decode(code_llrs: &[f64], input_priors: &[f64]) -> AccumulatorOutput {
    assert_eq!(code_llrs.len(), input_priors.len(), "accumulator: length mismatch");
    let len = code_llrs.len();
    let pc: Vec<[f64; 2]> = code_llrs
        .iter()
        .map(|&l| {
            let l = clamp_llr(l);
            [prob_zero(l), prob_one(l)]
        })
        .collect();
    let pv: Vec<[f64; 2]> = input_priors
        .iter()
        .map(|&l| {
            let l = clamp_llr(l);
            [prob_zero(l), prob_one(l)]
        })
        .collect();

    // alpha[n] is the state distribution before step n (state = c[n-1]).
    let mut alpha = vec![[0.0; 2]; len + 1];
    alpha[0] = [1.0, 0.0];
    for n in 0..len {
        let [a0, a1] = alpha[n];
        let [v0, v1] = pv[n];
        let [c0, c1] = pc[n];
        let next = [(a0 * v0 + a1 * v1) * c0, (a0 * v1 + a1 * v0) * c1];
        let s = next[0] + next[1];
        alpha[n + 1] = [next[0] / s, next[1] / s];
    }

    let mut input_ext = vec![0.0; len];
    let mut code_ext = vec![0.0; len];
    let mut beta = [1.0, 1.0];
    for n in (0..len).rev() {
        let [a0, a1] = alpha[n];
        let [v0, v1] = pv[n];
        let [c0, c1] = pc[n];
        let [b0, b1] = beta;
        input_ext[n] = clamp_llr(((a0 * c0 * b0 + a1 * c1 * b1) / (a0 * c1 * b1 + a1 * c0 * b0)).ln());
        code_ext[n] = clamp_llr(((a0 * v0 + a1 * v1) * b0 / ((a0 * v1 + a1 * v0) * b1)).ln());
        let prev = [v0 * c0 * b0 + v1 * c1 * b1, v1 * c0 * b0 + v0 * c1 * b1];
        let s = prev[0] + prev[1];
        beta = [prev[0] / s, prev[1] / s];
    }
    AccumulatorOutput { input_ext, code_ext }
}

/// Repetition decoder output.
#[derive(Debug, Clone, PartialEq)]
pub struct RepetitionOutput {
    /// Posterior LLR per information bit (not clamped).
    pub posterior: Vec<f64>,
    /// Extrinsic LLR per copy, in repetition order.
    pub copy_ext: Vec<f64>,
}

/// Sum-product over each group of `rate_inv` copies.
pub fn siso_repetition_decode(copy_llrs: &[f64], rate_inv: usize) -> RepetitionOutput {
    assert!(rate_inv > 0 && copy_llrs.len() % rate_inv == 0, "repetition: bad length");
    let mut posterior = Vec::with_capacity(copy_llrs.len() / rate_inv);
    let mut copy_ext = Vec::with_capacity(copy_llrs.len());
    for group in copy_llrs.chunks(rate_inv) {
        let total: f64 = group.iter().sum();
        posterior.push(total);
        copy_ext.extend(group.iter().map(|&l| clamp_llr(total - l)));
    }
    RepetitionOutput { posterior, copy_ext }
}

/// Hard decision on an LLR (ties decide 0).
#[inline]
pub fn hard_bit(llr: f64) -> u8 {
    (llr < 0.0) as u8
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::accumulator_extrinsics_by_enumeration;

    #[test]
    fn labeling() {
        assert_eq!(qpsk_map(0, 0), Complex64::new(H, H));
        assert_eq!(qpsk_map(1, 0), Complex64::new(-H, H));
        assert_eq!(qpsk_map(0, 1), Complex64::new(H, -H));
        for x in QPSK {
            assert!((x.norm() - 1.0).abs() < 1e-15);
            assert_eq!(QPSK[qpsk_hard_index(x)], x);
        }
    }

    #[test]
    fn soft_metrics() {
        assert_eq!(qpsk_soft_metrics(&SymbolBelief::UNIFORM), [0.5, 0.5]);
        for s in 0..4 {
            let m = qpsk_soft_metrics(&SymbolBelief::point_mass(s));
            assert!((m[0] - (s >> 1) as f64).abs() < 1e-12);
            assert!((m[1] - (s & 1) as f64).abs() < 1e-12);
        }
        let b = SymbolBelief::from_bit_llrs(1.3, -0.4);
        let m = qpsk_soft_metrics(&b);
        assert!((m[0] - prob_one(1.3)).abs() < 1e-12);
        assert!((m[1] - prob_one(-0.4)).abs() < 1e-12);
    }

    #[test]
    fn demapper_inverts_product_beliefs() {
        let b = SymbolBelief::from_bit_llrs(2.0, -1.5);
        let l = symbol_to_bit_llrs(&b, [0.0, 0.0]);
        assert!((l[0] - 2.0).abs() < 1e-12 && (l[1] + 1.5).abs() < 1e-12);
        // A product belief carries no cross information: priors do not matter.
        let l = symbol_to_bit_llrs(&b, [5.0, -3.0]);
        assert!((l[0] - 2.0).abs() < 1e-12 && (l[1] + 1.5).abs() < 1e-12);
        assert_eq!(symbol_to_bit_llrs(&SymbolBelief::UNIFORM, [3.0, 1.0]), [0.0, 0.0]);
    }

    #[test]
    fn beliefs_are_normalized_and_floored() {
        let b = SymbolBelief::from_weights([0.0, 0.0, 3.0, 1.0]);
        assert!(b.is_normalized(1e-12));
        assert!(b.probs[0] > 0.0);
        assert!((b.probs[2] - 0.75).abs() < 1e-15);
    }

    #[test]
    fn all_zero_input_encodes_to_zero() {
        assert!(ra_encode(&[0; 16], 4, 3).unwrap().iter().all(|&b| b == 0));
    }

    #[test]
    fn single_bit_hand_example() {
        let code = RaCode::new(1, 4, vec![0, 1, 2, 3]).unwrap();
        assert_eq!(code.encode(&[1]).unwrap(), vec![1, 0, 1, 0]);
    }

    #[test]
    fn inverse_chain_recovers_repetitions() {
        let mut rng = rng_for(4, &[]);
        let info: Vec<u8> = (0..50).map(|_| rng.gen_range(0..2)).collect();
        let code = RaCode::with_seed(50, 8, 17).unwrap();
        let c = code.encode(&info).unwrap();
        assert_eq!(c.len(), 400);
        let rep = code.deinterleave(&differentiate(&c));
        for (j, chunk) in rep.chunks(8).enumerate() {
            assert!(chunk.iter().all(|&b| b == info[j]));
        }
    }

    #[test]
    fn rejects_bad_interleaver() {
        assert!(RaCode::new(2, 2, vec![0, 1, 1, 3]).is_err());
        assert!(RaCode::new(2, 0, vec![]).is_err());
        assert!(BicmMapper::new(vec![0, 2, 1]).is_err());
    }

    #[test]
    fn bicm_order_roundtrip() {
        let m = BicmMapper::with_seed(12, 2).unwrap();
        let code: Vec<f64> = (0..12).map(|i| i as f64).collect();
        assert_eq!(m.to_code_order(&m.to_symbol_order(&code)), code);
    }

    #[test]
    fn accumulator_zero_priors() {
        let out = siso_accumulator_decode(&[0.0; 7], &[0.0; 7]);
        assert!(out.input_ext.iter().chain(&out.code_ext).all(|&l| l.abs() < 1e-12));
    }

    #[test]
    fn accumulator_two_bits_matches_enumeration() {
        let ch = [0.7, -1.2];
        let pr = [0.3, 0.9];
        let out = siso_accumulator_decode(&ch, &pr);
        let (vin, cout) = accumulator_extrinsics_by_enumeration(&ch, &pr);
        for n in 0..2 {
            assert!((prob_zero(out.input_ext[n]) - vin[n]).abs() < 1e-12);
            assert!((prob_zero(out.code_ext[n]) - cout[n]).abs() < 1e-12);
        }
    }

    #[test]
    fn accumulator_single_section_is_boxplus() {
        // With an uninformative start state the step v = c_prev ⊕ c combines
        // the two code-bit beliefs by the boxplus rule.
        let (l_prev, l_cur) = (1.1, -0.6);
        let out = siso_accumulator_decode(&[l_prev, l_cur], &[0.0, 0.0]);
        let boxplus = 2.0 * ((l_prev / 2.0).tanh() * (l_cur / 2.0).tanh()).atanh();
        assert!((out.input_ext[1] - boxplus).abs() < 1e-12);
    }

    #[test]
    fn accumulator_confident_priors_reproduce_codeword() {
        let v = [1u8, 0, 1, 1, 0, 0, 1];
        let c = accumulate(&v);
        let ch: Vec<f64> = c.iter().map(|&b| if b == 0 { 1e6 } else { -1e6 }).collect();
        let out = siso_accumulator_decode(&ch, &[0.0; 7]);
        for (n, &l) in out.input_ext.iter().enumerate() {
            assert_eq!(hard_bit(l), v[n]);
            assert!(l.abs() <= LLR_CLAMP);
        }
    }

    #[test]
    fn repetition_cases() {
        let out = siso_repetition_decode(&[1.5], 1);
        assert_eq!(out.copy_ext, vec![0.0]);
        assert_eq!(out.posterior, vec![1.5]);
        let out = siso_repetition_decode(&[2.0, -2.0], 2);
        assert_eq!(out.posterior, vec![0.0]);
        let copies = [0.4, -1.1, 2.3, 0.05];
        let out = siso_repetition_decode(&copies, 4);
        // brute force: P(b=0 | copies) under independent observations
        let (w0, w1) = copies
            .iter()
            .fold((1.0, 1.0), |(a, b), &l| (a * prob_zero(l), b * prob_one(l)));
        assert!((out.posterior[0] - (w0 / w1).ln()).abs() < 1e-12);
        for (j, &l) in copies.iter().enumerate() {
            let (e0, e1) = copies
                .iter()
                .enumerate()
                .filter(|&(i, _)| i != j)
                .fold((1.0, 1.0), |(a, b), (_, &m)| (a * prob_zero(m), b * prob_one(m)));
            assert!((out.copy_ext[j] - (e0 / e1).ln()).abs() < 1e-12, "{l}");
        }
    }
}
