use vbcsim::demod::{interference_power, InterferenceSetting};
use vbcsim::rate::{qpsk_awgn_mutual_info, qpsk_awgn_mutual_info_mc, sum_rate_lower_bound};
use vbcsim::selection::Strategy;

#[test]
fn quadrature_agrees_with_monte_carlo() {
    let exact = qpsk_awgn_mutual_info(1.0);
    let (mc, se) = qpsk_awgn_mutual_info_mc(1.0, 16_000_000, 40);
    assert!((exact - mc).abs() < 1e-3, "γ=1: {exact} vs {mc} ± {se}");
    for (i, gamma) in [0.3, 3.0].into_iter().enumerate() {
        let exact = qpsk_awgn_mutual_info(gamma);
        let (mc, se) = qpsk_awgn_mutual_info_mc(gamma, 1_000_000, 41 + i as u64);
        assert!((exact - mc).abs() < 5.0 * se, "γ={gamma}: {exact} vs {mc} ± {se}");
    }
}

#[test]
fn sum_rate_scales_with_served_users() {
    // K̃ streams each at the QPSK rate of the per-stream SNR
    let r = sum_rate_lower_bound(4, 2.0, 0.5);
    assert!((r - 4.0 * qpsk_awgn_mutual_info(1.0)).abs() < 1e-12);
    assert!(sum_rate_lower_bound(4, 2.0, 1e-9) <= 8.0 + 1e-9);
}

#[test]
fn interference_estimates_are_reproducible_in_distribution() {
    for strategy in [Strategy::DataDependent, Strategy::DataIndependent] {
        let setting = InterferenceSetting { users: 8, antennas: 4, k_tilde: 4, block: 4, strategy };
        let a = interference_power(&setting, 25_000, 1).unwrap();
        let b = interference_power(&setting, 25_000, 2).unwrap();
        assert!((a.mean - b.mean).abs() < 0.02 * a.mean, "{strategy:?}: {} vs {}", a.mean, b.mean);
        assert!((a.mean - b.mean).abs() < 4.0 * a.stderr.hypot(b.stderr));
    }
}

#[test]
fn no_interference_without_served_users() {
    let setting = InterferenceSetting { users: 8, antennas: 4, k_tilde: 0, block: 4, strategy: Strategy::DataDependent };
    assert_eq!(interference_power(&setting, 100, 1).unwrap().mean, 0.0);
}
