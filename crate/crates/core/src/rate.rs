//! QPSK mutual information over complex AWGN and the sum-rate lower bound.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::coding::QPSK;
use crate::rng::{complex_gaussian, rng_for};

/// Quadrature order per real dimension.
pub const GH_ORDER: usize = 40;

/// Nodes and weights of `n`-point Gauss-Hermite quadrature for the weight
/// `e^{-x²}`, by Newton iteration on the orthonormal Hermite recurrence.
pub fn gauss_hermite(n: usize) -> (Vec<f64>, Vec<f64>) {
    let pim4 = std::f64::consts::PI.powf(-0.25);
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let m = (n + 1) / 2;
    let mut z = 0.0f64;
    for i in 0..m {
        z = match i {
            0 => (2.0 * n as f64 + 1.0).sqrt() - 1.85575 * (2.0 * n as f64 + 1.0).powf(-1.0 / 6.0),
            1 => z - 1.14 * (n as f64).powf(0.426) / z,
            2 => 1.86 * z - 0.86 * x[0],
            3 => 1.91 * z - 0.91 * x[1],
            _ => 2.0 * z - x[i - 2],
        };
        let mut pp = 0.0;
        for _ in 0..100 {
            let mut p1 = pim4;
            let mut p2 = 0.0;
            for j in 0..n {
                let p3 = p2;
                p2 = p1;
                p1 = z * (2.0 / (j as f64 + 1.0)).sqrt() * p2 - (j as f64 / (j as f64 + 1.0)).sqrt() * p3;
            }
            pp = (2.0 * n as f64).sqrt() * p2;
            let z1 = z;
            z = z1 - p1 / pp;
            if (z - z1).abs() <= 1e-15 * z.abs().max(1.0) {
                break;
            }
        }
        x[i] = z;
        x[n - 1 - i] = -z;
        w[i] = 2.0 / (pp * pp);
        w[n - 1 - i] = w[i];
    }
    (x, w)
}

/// `log2 Σ_{x'} exp(-(|x - x' + n|² - |n|²) / N0)` for a transmitted `x`.
fn log_confusion(x: Complex64, n: Complex64, n0: f64) -> f64 {
    let base = n.norm_sqr();
    let s: f64 = QPSK
        .iter()
        .map(|xp| (-((x - xp + n).norm_sqr() - base) / n0).exp())
        .sum();
    s.log2()
}

/// `I(x; y)` in bits for equiprobable unit-energy QPSK over `y = x + n`,
/// `n ~ CN(0, 1/γ)`, by two-dimensional Gauss-Hermite quadrature.
pub fn qpsk_awgn_mutual_info(gamma: f64) -> f64 {
    assert!(gamma >= 0.0, "SNR must be nonnegative");
    if gamma == 0.0 {
        return 0.0;
    }
    if gamma.is_infinite() {
        return 2.0;
    }
    let n0 = 1.0 / gamma;
    let (nodes, weights) = gauss_hermite(GH_ORDER);
    let s = n0.sqrt();
    let mut loss = 0.0;
    for &x in &QPSK {
        for (a, wa) in nodes.iter().zip(&weights) {
            for (b, wb) in nodes.iter().zip(&weights) {
                loss += wa * wb * log_confusion(x, Complex64::new(s * a, s * b), n0);
            }
        }
    }
    let i = 2.0 - loss / (4.0 * std::f64::consts::PI);
    i.clamp(0.0, 2.0)
}

/// Monte Carlo estimate of [`qpsk_awgn_mutual_info`], with its standard error.
pub fn qpsk_awgn_mutual_info_mc(gamma: f64, samples: usize, seed: u64) -> (f64, f64) {
    if gamma == 0.0 {
        return (0.0, 0.0);
    }
    let n0 = 1.0 / gamma;
    let mut rng = rng_for(seed, &[]);
    let (mut sum, mut sum_sq) = (0.0, 0.0);
    for i in 0..samples {
        let x = QPSK[i % 4];
        let v = log_confusion(x, complex_gaussian(&mut rng, n0), n0);
        sum += v;
        sum_sq += v * v;
    }
    let m = sum / samples as f64;
    let var = (sum_sq / samples as f64 - m * m).max(0.0);
    (2.0 - m, (var / samples as f64).sqrt())
}

/// A point on a sum-rate curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RatePoint {
    pub k_tilde: usize,
    pub snr_inv_n0: f64,
    pub energy_penalty_mean: f64,
    pub sum_rate: f64,
}

/// `k_tilde · C(1 / (Ē N0))`.
pub fn sum_rate_lower_bound(k_tilde: usize, energy_penalty_mean: f64, n0: f64) -> f64 {
    if k_tilde == 0 {
        return 0.0;
    }
    assert!(energy_penalty_mean > 0.0 && n0 > 0.0, "sum rate needs positive energy and noise");
    k_tilde as f64 * qpsk_awgn_mutual_info(1.0 / (energy_penalty_mean * n0))
}

/// Per-user rate `(k_tilde / K) · C(1 / (Ē N0))`.
pub fn user_rate_lower_bound(k_tilde: usize, users: usize, energy_penalty_mean: f64, n0: f64) -> f64 {
    if k_tilde == 0 {
        return 0.0;
    }
    k_tilde as f64 / users as f64 * qpsk_awgn_mutual_info(1.0 / (energy_penalty_mean * n0))
}

pub fn rate_point(k_tilde: usize, energy_penalty_mean: f64, n0: f64) -> RatePoint {
    RatePoint {
        k_tilde,
        snr_inv_n0: 1.0 / n0,
        energy_penalty_mean,
        sum_rate: sum_rate_lower_bound(k_tilde, energy_penalty_mean, n0),
    }
}
