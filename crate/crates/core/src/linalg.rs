//! Dense complex linear algebra for zero-forcing.
//!
//! Only what the selection algorithms need: the right pseudo-inverse of a
//! wide full-row-rank matrix, the projector onto the orthogonal complement of
//! its row space, and the rank-one recursions that grow both when a row is
//! appended.

use std::fmt;
use std::ops::{Index, IndexMut};

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Cholesky pivots below this fraction of the largest pivot mean rank deficiency.
pub const PIVOT_RATIO_THRESHOLD: f64 = 1e-12;

/// A new row is degenerate when `h P h^H <= DEGENERACY_THRESHOLD * |h|^2`.
pub const DEGENERACY_THRESHOLD: f64 = 1e-12;

const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };
const ONE: Complex64 = Complex64 { re: 1.0, im: 0.0 };

/// Dense row-major complex matrix.
#[derive(Clone, PartialEq)]
pub struct CMatrix {
    rows: usize,
    cols: usize,
    data: Vec<Complex64>,
}

impl CMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![ZERO; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = ONE;
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> Complex64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    /// Builds a matrix from row-major data.
    ///
    /// Panics when `data.len() != rows * cols`.
    pub fn from_vec(rows: usize, cols: usize, data: Vec<Complex64>) -> Self {
        assert_eq!(data.len(), rows * cols, "from_vec: wrong data length");
        Self { rows, cols, data }
    }

    /// Stacks `indices` rows of `self` in the given order.
    pub fn select_rows(&self, indices: &[usize]) -> Self {
        let mut data = Vec::with_capacity(indices.len() * self.cols);
        for &i in indices {
            data.extend_from_slice(self.row(i));
        }
        Self {
            rows: indices.len(),
            cols: self.cols,
            data,
        }
    }

    /// A one-row matrix.
    pub fn row_vector(row: &[Complex64]) -> Self {
        Self::from_vec(1, row.len(), row.to_vec())
    }

    /// A one-column matrix.
    pub fn column_vector(col: &[Complex64]) -> Self {
        Self::from_vec(col.len(), 1, col.to_vec())
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[Complex64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [Complex64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<Complex64> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.data
    }

    /// Conjugate transpose.
    pub fn adjoint(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)].conj())
    }

    pub fn matmul(&self, rhs: &CMatrix) -> Result<CMatrix> {
        if self.cols != rhs.rows {
            return Err(Error::Dimension(format!(
                "matmul {}x{} by {}x{}",
                self.rows, self.cols, rhs.rows, rhs.cols
            )));
        }
        let mut out = CMatrix::zeros(self.rows, rhs.cols);
        for i in 0..self.rows {
            let out_row = &mut out.data[i * rhs.cols..(i + 1) * rhs.cols];
            for (k, &a) in self.row(i).iter().enumerate() {
                if a == ZERO {
                    continue;
                }
                for (o, &b) in out_row.iter_mut().zip(rhs.row(k)) {
                    *o += a * b;
                }
            }
        }
        Ok(out)
    }

    /// `self * v` for a column vector `v`.
    pub fn mul_vec(&self, v: &[Complex64]) -> Vec<Complex64> {
        assert_eq!(self.cols, v.len(), "mul_vec: length mismatch");
        (0..self.rows).map(|i| dot(self.row(i), v)).collect()
    }

    /// `v * self` for a row vector `v`.
    pub fn vec_mul(&self, v: &[Complex64]) -> Vec<Complex64> {
        assert_eq!(self.rows, v.len(), "vec_mul: length mismatch");
        let mut out = vec![ZERO; self.cols];
        for (i, &a) in v.iter().enumerate() {
            for (o, &b) in out.iter_mut().zip(self.row(i)) {
                *o += a * b;
            }
        }
        out
    }

    pub fn sub(&self, rhs: &CMatrix) -> Result<CMatrix> {
        if self.rows != rhs.rows || self.cols != rhs.cols {
            return Err(Error::Dimension(format!(
                "sub {}x{} - {}x{}",
                self.rows, self.cols, rhs.rows, rhs.cols
            )));
        }
        Ok(Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a - b).collect(),
        })
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn trace(&self) -> Complex64 {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    /// `‖A - A^H‖_F <= tol * ‖A‖_F`.
    pub fn is_hermitian(&self, tol: f64) -> bool {
        if self.rows != self.cols {
            return false;
        }
        let mut diff = 0.0;
        for i in 0..self.rows {
            for j in 0..self.cols {
                diff += (self[(i, j)] - self[(j, i)].conj()).norm_sqr();
            }
        }
        diff.sqrt() <= tol * self.frobenius_norm().max(f64::MIN_POSITIVE)
    }

    /// `‖self - other‖_F / max(‖other‖_F, 1)`.
    pub fn relative_distance(&self, other: &CMatrix) -> f64 {
        let d = self.sub(other).map(|m| m.frobenius_norm()).unwrap_or(f64::INFINITY);
        d / other.frobenius_norm().max(1.0)
    }

    /// Gram matrix `A A^H`.
    pub fn gram(&self) -> CMatrix {
        let mut g = CMatrix::zeros(self.rows, self.rows);
        for i in 0..self.rows {
            for j in 0..=i {
                let v = dot_conj(self.row(i), self.row(j));
                g[(i, j)] = v;
                g[(j, i)] = v.conj();
            }
        }
        g
    }
}

impl Index<(usize, usize)> for CMatrix {
    type Output = Complex64;

    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &Complex64 {
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for CMatrix {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut Complex64 {
        &mut self.data[i * self.cols + j]
    }
}

impl fmt::Debug for CMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "CMatrix {}x{} [", self.rows, self.cols)?;
        for i in 0..self.rows {
            write!(f, "  ")?;
            for z in self.row(i) {
                write!(f, "{:+.4}{:+.4}i ", z.re, z.im)?;
            }
            writeln!(f)?;
        }
        write!(f, "]")
    }
}

/// `Σ a_n b_n` (row times column, no conjugation).
#[inline]
pub fn dot(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `Σ a_n conj(b_n)`, i.e. `a b^H` for row vectors.
#[inline]
pub fn dot_conj(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x * y.conj()).sum()
}

#[inline]
pub fn norm_sqr(a: &[Complex64]) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum()
}

/// Cholesky factor `L` of a Hermitian positive-definite matrix, `A = L L^H`.
#[derive(Debug, Clone)]
pub struct Cholesky {
    l: CMatrix,
}

impl Cholesky {
    /// Factorizes `a`. Only the lower triangle is read.
    pub fn new(a: &CMatrix) -> Result<Self> {
        let n = a.rows();
        if a.cols() != n {
            return Err(Error::Dimension(format!("cholesky of {}x{}", n, a.cols())));
        }
        let mut l = CMatrix::zeros(n, n);
        let mut max_pivot: f64 = 0.0;
        let mut min_pivot = f64::INFINITY;
        for j in 0..n {
            let mut d = a[(j, j)].re;
            for k in 0..j {
                d -= l[(j, k)].norm_sqr();
            }
            max_pivot = max_pivot.max(d);
            min_pivot = min_pivot.min(d);
            if !(d > PIVOT_RATIO_THRESHOLD * max_pivot) || !d.is_finite() {
                return Err(Error::RankDeficient {
                    pivot_ratio: if max_pivot > 0.0 { d / max_pivot } else { 0.0 },
                });
            }
            let djj = d.sqrt();
            l[(j, j)] = Complex64::new(djj, 0.0);
            for i in j + 1..n {
                let mut s = a[(i, j)];
                for k in 0..j {
                    s -= l[(i, k)] * l[(j, k)].conj();
                }
                l[(i, j)] = s / djj;
            }
        }
        if n > 0 && min_pivot < PIVOT_RATIO_THRESHOLD * max_pivot {
            return Err(Error::RankDeficient {
                pivot_ratio: min_pivot / max_pivot,
            });
        }
        Ok(Self { l })
    }

    pub fn factor(&self) -> &CMatrix {
        &self.l
    }

    /// Solves `L z = b` in place.
    pub fn forward_substitute(&self, b: &mut [Complex64]) {
        let n = self.l.rows();
        for i in 0..n {
            let mut s = b[i];
            for k in 0..i {
                s -= self.l[(i, k)] * b[k];
            }
            b[i] = s / self.l[(i, i)].re;
        }
    }

    /// Solves `A z = b` in place.
    pub fn solve_in_place(&self, b: &mut [Complex64]) {
        self.forward_substitute(b);
        let n = self.l.rows();
        for i in (0..n).rev() {
            let mut s = b[i];
            for k in i + 1..n {
                s -= self.l[(k, i)].conj() * b[k];
            }
            b[i] = s / self.l[(i, i)].re;
        }
    }

    /// `b^H A^{-1} b = ‖L^{-1} b‖²`.
    pub fn inverse_quadratic_form(&self, b: &[Complex64]) -> f64 {
        let mut z = b.to_vec();
        self.forward_substitute(&mut z);
        norm_sqr(&z)
    }

    pub fn inverse(&self) -> CMatrix {
        let n = self.l.rows();
        let mut inv = CMatrix::zeros(n, n);
        let mut e = vec![ZERO; n];
        for j in 0..n {
            e.iter_mut().for_each(|z| *z = ZERO);
            e[j] = ONE;
            self.solve_in_place(&mut e);
            for i in 0..n {
                inv[(i, j)] = e[i];
            }
        }
        inv
    }
}

/// Right pseudo-inverse `H^H (H H^H)^{-1}` of a wide full-row-rank `H`.
///
/// An empty `H` (zero rows) yields the `N x 0` matrix.
pub fn pseudo_inverse(h: &CMatrix) -> Result<CMatrix> {
    if h.rows() > h.cols() {
        return Err(Error::Dimension(format!(
            "pseudo_inverse needs rows <= cols, got {}x{}",
            h.rows(),
            h.cols()
        )));
    }
    let gram_inv = Cholesky::new(&h.gram())?.inverse();
    h.adjoint().matmul(&gram_inv)
}

/// `P⊥ = I_N - H† H`, the projector onto the orthogonal complement of the
/// row space of `H`.
pub fn projection_complement(h_pinv: &CMatrix, h: &CMatrix) -> Result<CMatrix> {
    if h_pinv.rows() != h.cols() || h_pinv.cols() != h.rows() {
        return Err(Error::Dimension(format!(
            "projection_complement: pinv {}x{} vs H {}x{}",
            h_pinv.rows(),
            h_pinv.cols(),
            h.rows(),
            h.cols()
        )));
    }
    CMatrix::identity(h.cols()).sub(&h_pinv.matmul(h)?)
}

/// `w = P h^H` and `d = h P h^H` for a candidate row, checking degeneracy.
fn projected_direction(p: &CMatrix, h: &[Complex64]) -> Result<(Vec<Complex64>, f64)> {
    if p.rows() != h.len() || p.cols() != h.len() {
        return Err(Error::Dimension(format!(
            "projector {}x{} vs row of length {}",
            p.rows(),
            p.cols(),
            h.len()
        )));
    }
    let w: Vec<Complex64> = (0..p.rows()).map(|i| dot_conj(p.row(i), h)).collect();
    let d = dot(h, &w).re;
    let scale = norm_sqr(h);
    if !(d > DEGENERACY_THRESHOLD * scale) {
        return Err(Error::DegenerateRow {
            ratio: if scale > 0.0 { d / scale } else { 0.0 },
        });
    }
    Ok((w, d))
}

/// Pseudo-inverse of `[H; h_new]` from that of `H` and its complement projector:
///
/// ```text
/// [ (I - P h^H h / (h P h^H)) H† ,  P h^H / (h P h^H) ]
/// ```
pub fn pinv_append(h_pinv_prev: &CMatrix, p_prev: &CMatrix, h_new: &[Complex64]) -> Result<CMatrix> {
    if h_pinv_prev.rows() != h_new.len() {
        return Err(Error::Dimension(format!(
            "pinv_append: pinv has {} rows, new row has {} entries",
            h_pinv_prev.rows(),
            h_new.len()
        )));
    }
    let (w, d) = projected_direction(p_prev, h_new)?;
    let n = h_new.len();
    let prev = h_pinv_prev.cols();
    // g = h H†_prev
    let g = h_pinv_prev.vec_mul(h_new);
    let mut out = CMatrix::zeros(n, prev + 1);
    for i in 0..n {
        let wi = w[i] / d;
        for j in 0..prev {
            out[(i, j)] = h_pinv_prev[(i, j)] - wi * g[j];
        }
        out[(i, prev)] = wi;
    }
    Ok(out)
}

/// `(H_new H_new^H)^{-1}` for `H_new = [H; h_new]` by block inversion:
///
/// ```text
/// [ G⁻¹ + g^H g / s ,  -g^H / s ]
/// [ -g / s          ,   1 / s   ]      g = h H†, s = h P⊥ h^H
/// ```
pub fn block_gram_inverse(
    gram_inv_prev: &CMatrix,
    h_pinv_prev: &CMatrix,
    p_prev: &CMatrix,
    h_new: &[Complex64],
) -> Result<CMatrix> {
    let prev = h_pinv_prev.cols();
    if gram_inv_prev.rows() != prev || gram_inv_prev.cols() != prev {
        return Err(Error::Dimension(format!(
            "block_gram_inverse: previous inverse is {}x{}, expected {prev}x{prev}",
            gram_inv_prev.rows(),
            gram_inv_prev.cols()
        )));
    }
    if h_pinv_prev.rows() != h_new.len() {
        return Err(Error::Dimension("block_gram_inverse: row length".into()));
    }
    let (_, s) = projected_direction(p_prev, h_new)?;
    let g = h_pinv_prev.vec_mul(h_new);
    let mut out = CMatrix::zeros(prev + 1, prev + 1);
    for i in 0..prev {
        for j in 0..prev {
            out[(i, j)] = gram_inv_prev[(i, j)] + g[i].conj() * g[j] / s;
        }
        out[(i, prev)] = -g[i].conj() / s;
        out[(prev, i)] = -g[i] / s;
    }
    out[(prev, prev)] = Complex64::new(1.0 / s, 0.0);
    Ok(out)
}
