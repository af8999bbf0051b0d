//! Quick oracle suites run by `vbc-sim selftest`.

use rand::Rng;

use crate::channel::sample_channel_matrix;
use crate::coding::{prob_zero, random_qpsk_matrix, siso_accumulator_decode};
use crate::error::Result;
use crate::linalg::{pinv_append, projection_complement, CMatrix};
use crate::oracle::{accumulator_extrinsics_by_enumeration, direct_block_energy, direct_pseudo_inverse};
use crate::rng::{rng_for, stream};
use crate::selection::{exhaustive_optimal, greedy_data_dependent, UsBlockInput};

#[derive(Debug, Clone, PartialEq)]
pub struct SelftestOutcome {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn outcome(name: &'static str, worst: f64, tol: f64, what: &str) -> SelftestOutcome {
    SelftestOutcome {
        name,
        passed: worst <= tol,
        detail: format!("worst {what} {worst:.3e} (tolerance {tol:.0e})"),
    }
}

/// Sequential pseudo-inverse updates and greedy energy recursion against
/// direct evaluation.
pub fn linalg_recursions(instances: usize, seed: u64) -> Result<SelftestOutcome> {
    let mut worst = 0.0f64;
    for i in 0..instances {
        let mut rng = rng_for(seed, &[stream::SELFTEST, 1, i as u64]);
        let n = rng.gen_range(1..=12);
        let k = rng.gen_range(n..=2 * n);
        let kt = rng.gen_range(1..=n);
        let b = rng.gen_range(1..=16);
        let h = sample_channel_matrix(&mut rng, k, n);
        let x = random_qpsk_matrix(&mut rng, b, k);

        let mut pinv = CMatrix::zeros(n, 0);
        let mut p = CMatrix::identity(n);
        for r in 0..kt {
            pinv = pinv_append(&pinv, &p, h.row(r))?;
            let stacked = h.select_rows(&(0..=r).collect::<Vec<_>>());
            p = projection_complement(&pinv, &stacked)?;
            if let Some(direct) = direct_pseudo_inverse(&stacked) {
                worst = worst.max(pinv.relative_distance(&direct));
            }
        }

        let sel = greedy_data_dependent(&UsBlockInput { channel_rows: &h, symbols: &x, k_tilde: kt })?;
        let xs = CMatrix::from_fn(b, kt, |t, m| x[(t, sel.selected[m])]);
        if let Some(direct) = direct_block_energy(&h.select_rows(&sel.selected), &xs) {
            worst = worst.max((sel.block_energy - direct).abs() / direct);
        }
    }
    Ok(outcome("linalg recursions", worst, 1e-8, "relative error"))
}

/// Greedy energy never beats the exhaustive optimum, and the optimum agrees
/// with brute-force evaluation of every subset.
pub fn greedy_vs_exhaustive(instances: usize, seed: u64) -> Result<SelftestOutcome> {
    let (k, n, b) = (6, 4, 4);
    let mut worst = 0.0f64;
    for i in 0..instances {
        let mut rng = rng_for(seed, &[stream::SELFTEST, 2, i as u64]);
        let kt = 1 + i % n;
        let h = sample_channel_matrix(&mut rng, k, n);
        let x = random_qpsk_matrix(&mut rng, b, k);
        let input = UsBlockInput { channel_rows: &h, symbols: &x, k_tilde: kt };
        let opt = exhaustive_optimal(&input, u128::MAX)?;
        let greedy = greedy_data_dependent(&input)?;
        worst = worst.max(opt.block_energy - greedy.block_energy);
        let mut brute = f64::INFINITY;
        for subset in itertools::Itertools::combinations(0..k, kt) {
            let xs = CMatrix::from_fn(b, kt, |t, m| x[(t, subset[m])]);
            if let Some(e) = direct_block_energy(&h.select_rows(&subset), &xs) {
                brute = brute.min(e);
            }
        }
        worst = worst.max((opt.block_energy - brute).abs() / brute);
    }
    Ok(outcome("greedy vs exhaustive", worst, 1e-9, "violation"))
}

/// Accumulator BCJR against enumeration of every input sequence.
pub fn decoder_enumeration(instances: usize, seed: u64) -> Result<SelftestOutcome> {
    let mut worst = 0.0f64;
    for i in 0..instances {
        let mut rng = rng_for(seed, &[stream::SELFTEST, 3, i as u64]);
        let len = rng.gen_range(1..=10);
        let code: Vec<f64> = (0..len).map(|_| rng.gen_range(-6.0..6.0)).collect();
        let prior: Vec<f64> = (0..len).map(|_| rng.gen_range(-6.0..6.0)).collect();
        let out = siso_accumulator_decode(&code, &prior);
        let (v0, c0) = accumulator_extrinsics_by_enumeration(&code, &prior);
        for n in 0..len {
            worst = worst.max((prob_zero(out.input_ext[n]) - v0[n]).abs());
            worst = worst.max((prob_zero(out.code_ext[n]) - c0[n]).abs());
        }
    }
    Ok(outcome("decoder enumeration", worst, 1e-10, "probability gap"))
}

pub fn run_selftest(seed: u64) -> Result<Vec<SelftestOutcome>> {
    Ok(vec![
        linalg_recursions(200, seed)?,
        greedy_vs_exhaustive(200, seed)?,
        decoder_enumeration(200, seed)?,
    ])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn selftest_passes() {
        for o in run_selftest(5).unwrap() {
            assert!(o.passed, "{}: {}", o.name, o.detail);
        }
    }
}
