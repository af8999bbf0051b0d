//! I.i.d. Rayleigh block fading and the power-normalized broadcast link.

use num_complex::Complex64;
use rand::Rng;

use crate::error::{Error, Result};
use crate::linalg::{dot, norm_sqr, CMatrix};
use crate::rng::{complex_gaussian, rng_for};

/// Channel vectors of all users for every fading block of a frame.
#[derive(Debug, Clone)]
pub struct ChannelRealization {
    pub users: usize,
    pub antennas: usize,
    pub coherence_time: usize,
    /// One `users x antennas` matrix per fading block.
    pub blocks: Vec<CMatrix>,
}

impl ChannelRealization {
    /// Channel matrix in force at time slot `t`.
    pub fn at_slot(&self, t: usize) -> &CMatrix {
        &self.blocks[t / self.coherence_time]
    }

    pub fn slots(&self) -> usize {
        self.blocks.len() * self.coherence_time
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseModel {
    pub n0: f64,
}

impl NoiseModel {
    pub fn new(n0: f64) -> Result<Self> {
        if n0 > 0.0 && n0.is_finite() {
            Ok(Self { n0 })
        } else {
            Err(Error::Contract(format!("noise variance must be positive, got {n0}")))
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Complex64 {
        complex_gaussian(rng, self.n0)
    }
}

/// Draws a `users x antennas` matrix with i.i.d. CN(0, 1/antennas) entries.
pub fn sample_channel_matrix<R: Rng + ?Sized>(rng: &mut R, users: usize, antennas: usize) -> CMatrix {
    let var = 1.0 / antennas as f64;
    CMatrix::from_fn(users, antennas, |_, _| complex_gaussian(rng, var))
}

/// Samples `slots / coherence_time` independent fading blocks.
pub fn sample_block_fading(
    users: usize,
    antennas: usize,
    slots: usize,
    coherence_time: usize,
    seed: u64,
) -> Result<ChannelRealization> {
    let mut problems = Vec::new();
    if coherence_time == 0 || slots % coherence_time != 0 {
        problems.push(format!(
            "frame length {slots} is not a multiple of the coherence time {coherence_time}"
        ));
    }
    if antennas == 0 || users < antennas {
        problems.push(format!("need users >= antennas >= 1, got K={users}, N={antennas}"));
    }
    if !problems.is_empty() {
        return Err(Error::InvalidConfig(problems));
    }
    let mut rng = rng_for(seed, &[]);
    let blocks = (0..slots / coherence_time)
        .map(|_| sample_channel_matrix(&mut rng, users, antennas))
        .collect();
    Ok(ChannelRealization {
        users,
        antennas,
        coherence_time,
        blocks,
    })
}

/// `y = h u / √E + n`.
pub fn transmit_slot<R: Rng + ?Sized>(
    u: &[Complex64],
    energy_norm: f64,
    h: &[Complex64],
    noise: &NoiseModel,
    rng: &mut R,
) -> Complex64 {
    debug_assert!(energy_norm > 0.0);
    dot(h, u) / energy_norm.sqrt() + noise.sample(rng)
}

/// Noiseless counterpart of [`transmit_slot`] for a precomputed unit noise
/// sample: `y = h u / √E + √N0 · z`.
#[inline]
pub fn receive_with_noise(hu: Complex64, energy_norm: f64, n0: f64, unit_noise: Complex64) -> Complex64 {
    hu / energy_norm.sqrt() + unit_noise * n0.sqrt()
}

/// Mean squared norm of the transmitted vectors.
pub fn energy_penalty(us: &[Vec<Complex64>]) -> Result<f64> {
    if us.is_empty() {
        return Err(Error::Contract("energy_penalty of an empty sequence".into()));
    }
    Ok(us.iter().map(|u| norm_sqr(u)).sum::<f64>() / us.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_errors() {
        assert!(matches!(sample_block_fading(4, 2, 10, 4, 0), Err(Error::InvalidConfig(_))));
        assert!(matches!(sample_block_fading(1, 2, 8, 4, 0), Err(Error::InvalidConfig(_))));
    }

    #[test]
    fn deterministic_for_seed() {
        let a = sample_block_fading(4, 2, 16, 4, 99).unwrap();
        let b = sample_block_fading(4, 2, 16, 4, 99).unwrap();
        assert_eq!(a.blocks, b.blocks);
        assert_eq!(a.blocks.len(), 4);
        let c = sample_block_fading(4, 2, 16, 4, 100).unwrap();
        assert_ne!(a.blocks, c.blocks);
    }

    #[test]
    fn unit_variance_for_single_antenna() {
        let ch = sample_block_fading(1, 1, 100_000, 1, 5).unwrap();
        let m = ch.blocks.iter().map(|b| b[(0, 0)].norm_sqr()).sum::<f64>() / 1e5;
        assert!((m - 1.0).abs() < 0.02, "{m}");
    }

    #[test]
    fn noiseless_matched_transmission() {
        let h = [Complex64::new(0.6, 0.1), Complex64::new(-0.2, 0.5)];
        let u: Vec<Complex64> = h.iter().map(|z| z.conj() * 2.0).collect();
        let e = norm_sqr(&u);
        let noise = NoiseModel { n0: 0.0 };
        let y = transmit_slot(&u, e, &h, &noise, &mut rng_for(0, &[]));
        let expected = dot(&h, &u) / norm_sqr(&u).sqrt();
        assert!((y - expected).norm() < 1e-15);
    }

    #[test]
    fn pure_noise_variance() {
        let noise = NoiseModel::new(0.3).unwrap();
        let mut rng = rng_for(8, &[]);
        let u = [Complex64::new(0.0, 0.0); 2];
        let h = [Complex64::new(1.0, 0.0); 2];
        let n = 100_000;
        let v = (0..n)
            .map(|_| transmit_slot(&u, 1.0, &h, &noise, &mut rng).norm_sqr())
            .sum::<f64>()
            / n as f64;
        assert!((v - 0.3).abs() < 3.0 * 0.3 / (n as f64).sqrt(), "{v}");
    }

    #[test]
    fn noise_model_rejects_nonpositive() {
        assert!(NoiseModel::new(0.0).is_err());
        assert!(NoiseModel::new(-1.0).is_err());
    }

    #[test]
    fn energy_penalty_cases() {
        let z = Complex64::new(0.0, 0.0);
        assert_eq!(energy_penalty(&[vec![z, z]]).unwrap(), 0.0);
        assert_eq!(energy_penalty(&[vec![Complex64::new(0.0, 1.0), z]]).unwrap(), 1.0);
        assert!(energy_penalty(&[]).is_err());
        let us = vec![
            vec![Complex64::new(1.0, 2.0), Complex64::new(0.5, 0.0)],
            vec![Complex64::new(-3.0, 0.0), Complex64::new(0.0, 0.1)],
        ];
        let mut total = 0.0;
        for u in &us {
            for z in u {
                total += z.re * z.re + z.im * z.im;
            }
        }
        assert!((energy_penalty(&us).unwrap() - total / 2.0).abs() < 1e-15);
    }
}
