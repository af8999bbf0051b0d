use itertools::Itertools;
use num_complex::Complex64;
use rand::Rng;

use vbcsim::channel::sample_channel_matrix;
use vbcsim::coding::{random_qpsk_matrix, QPSK};
use vbcsim::harness::energy::estimate_block_energies;
use vbcsim::linalg::{dot, CMatrix};
use vbcsim::oracle::direct_block_energy;
use vbcsim::rng::rng_for;
use vbcsim::selection::{
    exhaustive_optimal, greedy_data_dependent, greedy_data_independent, realized_block_energy,
    GreedyState, Strategy, UsBlockInput,
};

#[test]
fn greedy_never_beats_exhaustive() {
    let (k, n) = (6, 4);
    let mut same_set = 0;
    for i in 0..200u64 {
        let mut rng = rng_for(2024, &[i]);
        let kt = 1 + (i as usize % n);
        let b = if i % 2 == 0 { 1 } else { 4 };
        let h = sample_channel_matrix(&mut rng, k, n);
        let x = random_qpsk_matrix(&mut rng, b, k);
        let input = UsBlockInput { channel_rows: &h, symbols: &x, k_tilde: kt };
        let opt = exhaustive_optimal(&input, 1_000_000).unwrap();
        let dd = greedy_data_dependent(&input).unwrap();
        let di = greedy_data_independent(&h, kt).unwrap();
        let di_realized = realized_block_energy(&input, &di.selected).unwrap();
        assert!(opt.block_energy <= dd.block_energy * (1.0 + 1e-12), "instance {i}");
        assert!(opt.block_energy <= di_realized * (1.0 + 1e-12), "instance {i}");

        // the optimum is the brute-force minimum over all subsets
        let brute = (0..k)
            .combinations(kt)
            .map(|s| direct_block_energy(&h.select_rows(&s), &CMatrix::from_fn(b, kt, |t, m| x[(t, s[m])])).unwrap())
            .fold(f64::INFINITY, f64::min);
        assert!((opt.block_energy - brute).abs() <= 1e-9 * brute);

        let mut greedy_set = dd.selected.clone();
        greedy_set.sort_unstable();
        if greedy_set == opt.selected {
            same_set += 1;
            assert!((opt.block_energy - dd.block_energy).abs() <= 1e-9 * opt.block_energy, "instance {i}");
        }
    }
    assert!(same_set > 100, "greedy found the optimum only {same_set} times");
}

/// `B⁻¹ Σ |x_k - h_k u|² / ‖h_k P⊥‖²` averaged over random QPSK draws.
fn monte_carlo_increment(state: &GreedyState<'_>, rows: &CMatrix, k: usize, draws: usize, seed: u64) -> (f64, f64) {
    let mut rng = rng_for(seed, &[]);
    let sel = state.selected();
    let den = state.denominator(k).unwrap();
    let (mut s, mut s2) = (0.0, 0.0);
    for _ in 0..draws {
        let xs: Vec<Complex64> = sel.iter().map(|_| QPSK[rng.gen_range(0..4)]).collect();
        let xk = QPSK[rng.gen_range(0..4)];
        let u = state.pinv().mul_vec(&xs);
        let v = (xk - dot(rows.row(k), &u)).norm_sqr() / den;
        s += v;
        s2 += v * v;
    }
    let m = s / draws as f64;
    (m, ((s2 / draws as f64 - m * m) / draws as f64).sqrt())
}

#[test]
fn data_independent_increment_is_symbol_average() {
    for c in 0..8u64 {
        let mut rng = rng_for(77, &[c]);
        let (k, n) = (8, 5);
        let h = sample_channel_matrix(&mut rng, k, n);
        let stages = 1 + c as usize % 4;
        let mut state = GreedyState::new(&h);
        for j in 0..stages {
            state.push(j).unwrap();
        }
        let cand = k - 1;
        let exact = state.data_independent_increment(cand).unwrap();
        let (mc, se) = monte_carlo_increment(&state, &h, cand, 100_000, c);
        assert!((mc - exact).abs() < 0.01 * exact, "context {c}: {mc} ± {se} vs {exact}");
    }
}

#[test]
fn data_dependent_mean_is_below_data_independent_for_short_blocks() {
    for b in [1usize, 2, 4] {
        let est = estimate_block_energies(
            8,
            4,
            3,
            b,
            &[Strategy::DataDependent, Strategy::DataIndependent],
            1000,
            1,
            5,
            &[b as u64],
        )
        .unwrap();
        let dd = est[0].measured().unwrap();
        let di = est[1].measured().unwrap();
        let z = (di.mean - dd.mean) / dd.stderr.hypot(di.stderr);
        assert!(z > 3.0, "B={b}: dd {} ± {}, di {} ± {}", dd.mean, dd.stderr, di.mean, di.stderr);
    }
}

#[test]
fn block_size_sweep_approaches_data_independent() {
    let strategies = [Strategy::DataDependent, Strategy::DataIndependent];
    let mut last: Option<(f64, f64)> = None;
    let mut di_level = 0.0;
    for b in [1usize, 4, 16, 64, 256] {
        let est = estimate_block_energies(8, 4, 3, b, &strategies, 1500, 1, 9, &[b as u64]).unwrap();
        let dd = est[0].measured().unwrap();
        di_level = est[1].measured().unwrap().mean;
        if let Some((m, se)) = last {
            assert!(dd.mean - m > -3.0 * se.hypot(dd.stderr), "B={b}: {} after {m}", dd.mean);
        }
        last = Some((dd.mean, dd.stderr));
    }
    let (m, se) = last.unwrap();
    assert!(m < di_level + 3.0 * se && m > 0.9 * di_level, "B=256: {m} vs {di_level}");
}
