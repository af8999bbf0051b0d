//! Brute-force reference computations.
//!
//! These share no code path with the production routines they check and are
//! deliberately naive. They back both the unit tests and `vbc-sim selftest`.

use num_complex::Complex64;

use crate::coding::{accumulate, prob_one, prob_zero};
use crate::linalg::CMatrix;

/// Inverse of a square matrix by Gauss-Jordan elimination with partial pivoting.
pub fn gauss_jordan_inverse(a: &CMatrix) -> Option<CMatrix> {
    let n = a.rows();
    assert_eq!(n, a.cols());
    let mut m: Vec<Vec<Complex64>> = (0..n)
        .map(|i| {
            let mut row = a.row(i).to_vec();
            row.extend((0..n).map(|j| Complex64::new((i == j) as u8 as f64, 0.0)));
            row
        })
        .collect();
    for col in 0..n {
        let pivot = (col..n).max_by(|&x, &y| m[x][col].norm().total_cmp(&m[y][col].norm()))?;
        if m[pivot][col].norm() < 1e-300 {
            return None;
        }
        m.swap(col, pivot);
        let p = m[col][col];
        for v in m[col].iter_mut() {
            *v /= p;
        }
        for r in 0..n {
            if r != col {
                let f = m[r][col];
                if f != Complex64::new(0.0, 0.0) {
                    for c in 0..2 * n {
                        let sub = f * m[col][c];
                        m[r][c] -= sub;
                    }
                }
            }
        }
    }
    Some(CMatrix::from_fn(n, n, |i, j| m[i][n + j]))
}

/// `H^H (H H^H)^{-1}` with the Gram matrix inverted by Gauss-Jordan.
pub fn direct_pseudo_inverse(h: &CMatrix) -> Option<CMatrix> {
    let hh = h.adjoint();
    let gram = h.matmul(&hh).ok()?;
    hh.matmul(&gauss_jordan_inverse(&gram)?).ok()
}

/// `B⁻¹ Σ_t ‖H† x_t‖²` with an explicitly formed pseudo-inverse.
pub fn direct_block_energy(h_sel: &CMatrix, symbols: &CMatrix) -> Option<f64> {
    let pinv = direct_pseudo_inverse(h_sel)?;
    let b = symbols.rows();
    let mut total = 0.0;
    for t in 0..b {
        for i in 0..pinv.rows() {
            let mut s = Complex64::new(0.0, 0.0);
            for m in 0..pinv.cols() {
                s += pinv[(i, m)] * symbols[(t, m)];
            }
            total += s.norm_sqr();
        }
    }
    Some(total / b as f64)
}

/// Extrinsic `P(v_n = 0)` and `P(c_n = 0)` of the accumulator obtained by
/// enumerating all `2^n` input sequences. Feasible for `n <= 20`.
pub fn accumulator_extrinsics_by_enumeration(code_llrs: &[f64], input_priors: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let n = code_llrs.len();
    assert!(n <= 20 && input_priors.len() == n);
    let pb = |l: f64, bit: u8| if bit == 0 { prob_zero(l) } else { prob_one(l) };
    let mut v_mass = vec![[0.0f64; 2]; n];
    let mut c_mass = vec![[0.0f64; 2]; n];
    for word in 0u32..(1 << n) {
        let v: Vec<u8> = (0..n).map(|i| ((word >> i) & 1) as u8).collect();
        let c = accumulate(&v);
        let pv: Vec<f64> = (0..n).map(|i| pb(input_priors[i], v[i])).collect();
        let pc: Vec<f64> = (0..n).map(|i| pb(code_llrs[i], c[i])).collect();
        for i in 0..n {
            // extrinsic: every factor except the one on the bit itself
            let without_v: f64 = (0..n).map(|j| if j == i { 1.0 } else { pv[j] }).product::<f64>()
                * pc.iter().product::<f64>();
            let without_c: f64 = pv.iter().product::<f64>()
                * (0..n).map(|j| if j == i { 1.0 } else { pc[j] }).product::<f64>();
            v_mass[i][v[i] as usize] += without_v;
            c_mass[i][c[i] as usize] += without_c;
        }
    }
    let norm = |m: &[f64; 2]| m[0] / (m[0] + m[1]);
    (v_mass.iter().map(norm).collect(), c_mass.iter().map(norm).collect())
}
