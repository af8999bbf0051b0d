//! Zero-forcing beamforming with user selection.
//!
//! Three strategies pick `k_tilde` of `K` users for one selection block of
//! `B` slots over which the channel is constant:
//!
//! * [`greedy_data_dependent`] adds, stage by stage, the user whose admission
//!   raises the block energy `B⁻¹ Σ_t ‖H† x_t‖²` the least. The increment for
//!   candidate `k` given the already selected set is
//!   `B⁻¹ Σ_t |x_{k,t} - h_k u_t|² / ‖h_k P⊥‖²`, where `u_t` is the current
//!   beamformed vector, so the criterion sees the actual data symbols.
//! * [`greedy_data_independent`] uses the symbol average of that increment,
//!   `(1 + ‖h_k H†‖²) / ‖h_k P⊥‖²`, and never looks at the data.
//! * [`exhaustive_optimal`] enumerates every subset.

use itertools::Itertools;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{
    dot, norm_sqr, pinv_append, projection_complement, pseudo_inverse, CMatrix, Cholesky,
    DEGENERACY_THRESHOLD,
};

/// Default bound on the number of subsets [`exhaustive_optimal`] will visit.
pub const EXHAUSTIVE_CAP: u128 = 1_000_000;

const UNIT_MODULUS_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Strategy {
    #[serde(rename = "dd-greedy")]
    DataDependent,
    #[serde(rename = "di-greedy")]
    DataIndependent,
    #[serde(rename = "exhaustive")]
    Exhaustive,
}

impl Strategy {
    pub fn name(self) -> &'static str {
        match self {
            Strategy::DataDependent => "dd-greedy",
            Strategy::DataIndependent => "di-greedy",
            Strategy::Exhaustive => "exhaustive",
        }
    }

    /// Short tag used in system labels of BER records.
    pub fn short(self) -> &'static str {
        match self {
            Strategy::DataDependent => "dd",
            Strategy::DataIndependent => "di",
            Strategy::Exhaustive => "opt",
        }
    }
}

impl std::fmt::Display for Strategy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "dd-greedy" | "dd" => Ok(Strategy::DataDependent),
            "di-greedy" | "di" => Ok(Strategy::DataIndependent),
            "exhaustive" | "opt" => Ok(Strategy::Exhaustive),
            _ => Err(Error::InvalidConfig(vec![format!("unknown selection strategy `{s}`")])),
        }
    }
}

/// Outcome of selecting users for one block.
#[derive(Debug, Clone)]
pub struct SelectionResult {
    /// Selected users in stacking order.
    pub selected: Vec<usize>,
    /// `N x k_tilde` pseudo-inverse of the selected rows, stacked in `selected` order.
    pub pinv: CMatrix,
    /// `N x N` projector onto the complement of the selected rows.
    pub projection: CMatrix,
    /// Block energy penalty according to the strategy's criterion. For the
    /// data-independent strategy this is the symbol-averaged energy.
    pub block_energy: f64,
}

impl SelectionResult {
    fn empty(antennas: usize) -> Self {
        Self {
            selected: Vec::new(),
            pinv: CMatrix::zeros(antennas, 0),
            projection: CMatrix::identity(antennas),
            block_energy: 0.0,
        }
    }

    /// Selection indicator per user.
    pub fn indicators(&self, users: usize) -> Vec<bool> {
        let mut a = vec![false; users];
        for &k in &self.selected {
            a[k] = true;
        }
        a
    }

    /// Symbols of the selected users at one slot, in stacking order.
    pub fn gather(&self, all_users: &[Complex64]) -> Vec<Complex64> {
        self.selected.iter().map(|&k| all_users[k]).collect()
    }
}

/// Input of one selection block.
#[derive(Debug, Clone, Copy)]
pub struct UsBlockInput<'a> {
    /// `K x N`, constant over the block.
    pub channel_rows: &'a CMatrix,
    /// `B x K` unit-modulus symbols; row `t` holds every user's symbol in slot `t`.
    pub symbols: &'a CMatrix,
    pub k_tilde: usize,
}

impl UsBlockInput<'_> {
    fn validate(&self) -> Result<()> {
        let (k, n) = (self.channel_rows.rows(), self.channel_rows.cols());
        if self.symbols.cols() != k {
            return Err(Error::Dimension(format!(
                "symbols have {} users, channel has {k}",
                self.symbols.cols()
            )));
        }
        if self.symbols.rows() == 0 {
            return Err(Error::Contract("selection block size must be at least 1".into()));
        }
        if self.k_tilde > k.min(n) {
            return Err(Error::Contract(format!(
                "k_tilde = {} exceeds min(K, N) = {}",
                self.k_tilde,
                k.min(n)
            )));
        }
        if let Some(z) = self
            .symbols
            .as_slice()
            .iter()
            .find(|z| (z.norm_sqr() - 1.0).abs() > UNIT_MODULUS_TOL)
        {
            return Err(Error::Contract(format!("symbol {z} is not unit-modulus")));
        }
        Ok(())
    }

    pub fn block_len(&self) -> usize {
        self.symbols.rows()
    }
}

/// `u = H† x`.
pub fn zf_beamform(selection: &SelectionResult, symbols_slot: &[Complex64]) -> Result<Vec<Complex64>> {
    if symbols_slot.len() != selection.selected.len() {
        return Err(Error::Dimension(format!(
            "{} symbols for {} selected users",
            symbols_slot.len(),
            selection.selected.len()
        )));
    }
    Ok(selection.pinv.mul_vec(symbols_slot))
}

/// `B⁻¹ Σ_t x_t^H (H H^H)⁻¹ x_t` for the selected rows `h_sel` and the
/// `B x k_tilde` symbol matrix of the selected users.
pub fn block_energy_penalty(h_sel: &CMatrix, symbols: &CMatrix) -> Result<f64> {
    check_symbol_shape(h_sel, symbols)?;
    if h_sel.rows() == 0 {
        return Ok(0.0);
    }
    let chol = Cholesky::new(&h_sel.gram())?;
    let total: f64 = (0..symbols.rows())
        .map(|t| chol.inverse_quadratic_form(symbols.row(t)))
        .sum();
    Ok(total / symbols.rows() as f64)
}

/// Same quantity as [`block_energy_penalty`], evaluated as `B⁻¹ Σ_t ‖H† x_t‖²`.
pub fn block_energy_via_beamforming(h_sel: &CMatrix, symbols: &CMatrix) -> Result<f64> {
    check_symbol_shape(h_sel, symbols)?;
    if h_sel.rows() == 0 {
        return Ok(0.0);
    }
    let pinv = pseudo_inverse(h_sel)?;
    let total: f64 = (0..symbols.rows())
        .map(|t| norm_sqr(&pinv.mul_vec(symbols.row(t))))
        .sum();
    Ok(total / symbols.rows() as f64)
}

fn check_symbol_shape(h_sel: &CMatrix, symbols: &CMatrix) -> Result<()> {
    if symbols.cols() != h_sel.rows() || symbols.rows() == 0 {
        return Err(Error::Dimension(format!(
            "symbols {}x{} for {} selected rows",
            symbols.rows(),
            symbols.cols(),
            h_sel.rows()
        )));
    }
    Ok(())
}

/// Columns `selected` of a `B x K` symbol matrix.
pub fn selected_symbols(symbols: &CMatrix, selected: &[usize]) -> CMatrix {
    CMatrix::from_fn(symbols.rows(), selected.len(), |t, m| symbols[(t, selected[m])])
}

/// Realized block energy of a selection for the given block symbols.
pub fn realized_block_energy(input: &UsBlockInput<'_>, selected: &[usize]) -> Result<f64> {
    block_energy_penalty(
        &input.channel_rows.select_rows(selected),
        &selected_symbols(input.symbols, selected),
    )
}

/// Shared state of the greedy stages: the selected set, its pseudo-inverse
/// and the complement projector.
#[derive(Debug, Clone)]
pub struct GreedyState<'a> {
    rows: &'a CMatrix,
    selected: Vec<usize>,
    taken: Vec<bool>,
    row_norms: Vec<f64>,
    pinv: CMatrix,
    projection: CMatrix,
}

impl<'a> GreedyState<'a> {
    pub fn new(rows: &'a CMatrix) -> Self {
        let n = rows.cols();
        Self {
            rows,
            selected: Vec::new(),
            taken: vec![false; rows.rows()],
            row_norms: (0..rows.rows()).map(|k| norm_sqr(rows.row(k))).collect(),
            pinv: CMatrix::zeros(n, 0),
            projection: CMatrix::identity(n),
        }
    }

    pub fn selected(&self) -> &[usize] {
        &self.selected
    }

    pub fn is_selected(&self, k: usize) -> bool {
        self.taken[k]
    }

    pub fn pinv(&self) -> &CMatrix {
        &self.pinv
    }

    pub fn projection(&self) -> &CMatrix {
        &self.projection
    }

    /// `‖h_k P⊥‖² = h_k P⊥ h_k^H`.
    pub fn projected_power(&self, k: usize) -> f64 {
        let h = self.rows.row(k);
        let mut acc = Complex64::new(0.0, 0.0);
        for (i, &hi) in h.iter().enumerate() {
            let p = self.projection.row(i);
            let mut s = Complex64::new(0.0, 0.0);
            for (pij, hj) in p.iter().zip(h) {
                s += pij * hj.conj();
            }
            acc += hi * s;
        }
        acc.re
    }

    /// Denominator of the stage increment, or `None` for a degenerate candidate.
    pub fn denominator(&self, k: usize) -> Option<f64> {
        let d = self.projected_power(k);
        (d > DEGENERACY_THRESHOLD * self.row_norms[k]).then_some(d)
    }

    /// `(1 + ‖h_k H†‖²) / ‖h_k P⊥‖²`.
    pub fn data_independent_increment(&self, k: usize) -> Option<f64> {
        let den = self.denominator(k)?;
        let h = self.rows.row(k);
        let mut leak = 0.0;
        for j in 0..self.pinv.cols() {
            let mut g = Complex64::new(0.0, 0.0);
            for (n, hn) in h.iter().enumerate() {
                g += hn * self.pinv[(n, j)];
            }
            leak += g.norm_sqr();
        }
        Some((1.0 + leak) / den)
    }

    /// Admits user `k`: `H†` grows by the rank-one recursion and `P⊥` is
    /// recomputed as `I - H† H`.
    pub fn push(&mut self, k: usize) -> Result<()> {
        if self.taken[k] {
            return Err(Error::Contract(format!("user {k} selected twice")));
        }
        self.pinv = pinv_append(&self.pinv, &self.projection, self.rows.row(k))?;
        self.selected.push(k);
        self.taken[k] = true;
        self.projection = projection_complement(&self.pinv, &self.rows.select_rows(&self.selected))?;
        Ok(())
    }

    fn finish(self, block_energy: f64) -> SelectionResult {
        SelectionResult {
            selected: self.selected,
            pinv: self.pinv,
            projection: self.projection,
            block_energy,
        }
    }
}

/// Greedy selection minimizing the realized block energy.
pub fn greedy_data_dependent(input: &UsBlockInput<'_>) -> Result<SelectionResult> {
    input.validate()?;
    let rows = input.channel_rows;
    let (users, n) = (rows.rows(), rows.cols());
    let b = input.block_len();
    let x = input.symbols;
    let mut state = GreedyState::new(rows);
    // u_t for the users selected so far, row-major B x N.
    let mut u = vec![Complex64::new(0.0, 0.0); b * n];
    let mut energy = 0.0;

    for stage in 1..=input.k_tilde {
        let mut best: Option<(usize, f64)> = None;
        for k in 0..users {
            if state.is_selected(k) {
                continue;
            }
            let Some(den) = state.denominator(k) else { continue };
            let h = rows.row(k);
            let mut num = 0.0;
            for t in 0..b {
                num += (x[(t, k)] - dot(h, &u[t * n..(t + 1) * n])).norm_sqr();
            }
            let inc = num / b as f64 / den;
            if best.map_or(true, |(_, v)| inc < v) {
                best = Some((k, inc));
            }
        }
        let (k, inc) = best.ok_or(Error::NoCandidate { stage })?;
        let h = rows.row(k);
        let residual: Vec<Complex64> = (0..b)
            .map(|t| x[(t, k)] - dot(h, &u[t * n..(t + 1) * n]))
            .collect();
        state.push(k)?;
        // u_t += (P h^H / h P h^H) (x_{k,t} - h u_t); that direction is the new last pinv column.
        let last = state.pinv.cols() - 1;
        for (t, r) in residual.iter().enumerate() {
            let ut = &mut u[t * n..(t + 1) * n];
            for (i, ui) in ut.iter_mut().enumerate() {
                *ui += state.pinv[(i, last)] * r;
            }
        }
        energy += inc;
    }
    Ok(state.finish(energy))
}

/// Greedy selection minimizing the symbol-averaged block energy.
///
/// `block_energy` of the result is the accumulated averaged energy,
/// `tr((H H^H)⁻¹)`; use [`realized_block_energy`] for the energy of concrete
/// symbols.
pub fn greedy_data_independent(channel_rows: &CMatrix, k_tilde: usize) -> Result<SelectionResult> {
    let (users, n) = (channel_rows.rows(), channel_rows.cols());
    if k_tilde > users.min(n) {
        return Err(Error::Contract(format!(
            "k_tilde = {k_tilde} exceeds min(K, N) = {}",
            users.min(n)
        )));
    }
    let mut state = GreedyState::new(channel_rows);
    let mut energy = 0.0;
    for stage in 1..=k_tilde {
        let mut best: Option<(usize, f64)> = None;
        for k in 0..users {
            if state.is_selected(k) {
                continue;
            }
            let Some(inc) = state.data_independent_increment(k) else { continue };
            if best.map_or(true, |(_, v)| inc < v) {
                best = Some((k, inc));
            }
        }
        let (k, inc) = best.ok_or(Error::NoCandidate { stage })?;
        state.push(k)?;
        energy += inc;
    }
    Ok(state.finish(energy))
}

pub fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    (0..k).fold(1u128, |acc, i| acc.saturating_mul((n - i) as u128) / (i as u128 + 1))
}

/// Minimum realized block energy over all `k_tilde`-subsets. The first
/// subset in lexicographic order wins ties; the result is stacked in
/// ascending user order.
pub fn exhaustive_optimal(input: &UsBlockInput<'_>, cap: u128) -> Result<SelectionResult> {
    input.validate()?;
    let rows = input.channel_rows;
    let (users, n) = (rows.rows(), rows.cols());
    let subsets = binomial(users, input.k_tilde);
    if subsets > cap {
        return Err(Error::SearchCapExceeded { subsets, cap });
    }
    if input.k_tilde == 0 {
        return Ok(SelectionResult::empty(n));
    }
    let gram = rows.gram();
    let b = input.block_len();
    let mut best: Option<(Vec<usize>, f64)> = None;
    let mut xs = vec![Complex64::new(0.0, 0.0); input.k_tilde];
    for subset in (0..users).combinations(input.k_tilde) {
        let g = CMatrix::from_fn(subset.len(), subset.len(), |i, j| gram[(subset[i], subset[j])]);
        let Ok(chol) = Cholesky::new(&g) else { continue };
        let mut e = 0.0;
        for t in 0..b {
            for (m, &k) in subset.iter().enumerate() {
                xs[m] = input.symbols[(t, k)];
            }
            e += chol.inverse_quadratic_form(&xs);
        }
        e /= b as f64;
        if best.as_ref().map_or(true, |(_, v)| e < *v) {
            best = Some((subset, e));
        }
    }
    let (selected, block_energy) = best.ok_or(Error::NoCandidate { stage: 1 })?;
    let h = rows.select_rows(&selected);
    let pinv = pseudo_inverse(&h)?;
    let projection = projection_complement(&pinv, &h)?;
    Ok(SelectionResult {
        selected,
        pinv,
        projection,
        block_energy,
    })
}

/// Runs `strategy` on one block.
pub fn select(strategy: Strategy, input: &UsBlockInput<'_>, cap: u128) -> Result<SelectionResult> {
    match strategy {
        Strategy::DataDependent => greedy_data_dependent(input),
        Strategy::DataIndependent => {
            input.validate()?;
            greedy_data_independent(input.channel_rows, input.k_tilde)
        }
        Strategy::Exhaustive => exhaustive_optimal(input, cap),
    }
}
