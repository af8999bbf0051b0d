use vbcsim::demod::{DemodKind, EquivalentChannelParams};
use vbcsim::harness::link::{LinkShape, Transmission};
use vbcsim::harness::{self, simulate_ber, ExperimentKind, SimConfig};
use vbcsim::receiver::{run_iterative_decode, ReceiverConfig, UserObservation};
use vbcsim::selection::Strategy;

fn small_config() -> SimConfig {
    SimConfig {
        experiment: ExperimentKind::Ber,
        users: 4,
        antennas: 2,
        k_tilde: 2,
        block_size: 4,
        coherence_time: 4,
        info_len: 64,
        rate_inv: 4,
        max_iterations: 10,
        demod_kinds: vec![DemodKind::Genie, DemodKind::Soft, DemodKind::Hard],
        strategies: vec![Strategy::DataDependent],
        snr_grid_db: vec![6.0],
        frames_per_point: 40,
        interference_blocks: 2000,
        ..SimConfig::default()
    }
}

#[test]
fn simulation_is_reproducible_across_thread_counts() {
    let cfg = small_config();
    let a = simulate_ber(&cfg).unwrap();
    let b = simulate_ber(&cfg).unwrap();
    assert_eq!(a, b);

    let one = harness::run(&SimConfig { threads: Some(1), ..cfg.clone() }).unwrap();
    let three = harness::run(&SimConfig { threads: Some(3), ..cfg.clone() }).unwrap();
    assert_eq!(one.records, three.records);

    let other = simulate_ber(&SimConfig { seed: 2, ..cfg }).unwrap();
    assert_ne!(a[0].systems[1].trial_bit_errors, other[0].systems[1].trial_bit_errors);
}

#[test]
fn genie_is_no_worse_than_blind_reception() {
    let cfg = SimConfig {
        snr_grid_db: vec![4.0, 8.0],
        frames_per_point: 600,
        ..small_config()
    };
    for point in simulate_ber(&cfg).unwrap() {
        let genie = point.system("dd/genie").unwrap();
        for blind in ["dd/soft", "dd/hard"] {
            let fer = point.system(blind).unwrap().fer(point.frames_per_trial);
            let g = genie.fer(point.frames_per_trial);
            assert!(
                g.mean <= fer.mean + 3.0 * g.stderr.hypot(fer.stderr),
                "{} dB: genie FER {} vs {blind} {}",
                point.snr_db,
                g.mean,
                fer.mean
            );
            let other = point.system(blind).unwrap();
            for (m, (&ge, &be)) in genie.iteration_bit_errors.iter().zip(&other.iteration_bit_errors).enumerate() {
                let (ge, be) = (ge as f64, be as f64);
                assert!(ge <= be + 3.0 * (ge + be).sqrt().max(1.0), "{} dB iteration {}: {ge} vs {be}", point.snr_db, m + 1);
            }
        }
    }
}

#[test]
fn receiver_beliefs_stay_normalized() {
    let shape = LinkShape { users: 4, antennas: 2, k_tilde: 2, coherence_time: 4, info_len: 64, rate_inv: 4 };
    let tx = Transmission::generate(shape, 11).unwrap();
    let bf = tx.beamform(Strategy::DataDependent, 4, 1_000_000).unwrap();
    let n0 = 0.3;
    let params = EquivalentChannelParams { energy_penalty: bf.energy, n0, sigma2: 1.0, prior_selected: 0.5 };
    for kind in [DemodKind::Genie, DemodKind::Soft, DemodKind::Hard] {
        for k in 0..4 {
            let y = bf.received(&tx, k, n0);
            let obs = UserObservation {
                received: &y,
                code: &tx.codes[k],
                mapper: &tx.mappers[k],
                block_len: 4,
                true_indicators: Some(&bf.indicators[k]),
            };
            let mut rcfg = ReceiverConfig::new(kind, 6);
            rcfg.early_exit = false;
            let out = run_iterative_decode(&obs, &params, &rcfg, Some(&tx.info[k])).unwrap();
            assert_eq!(out.iterations_run, 6);
            assert!(out.state.beliefs_to_demod.iter().chain(&out.state.beliefs_to_decoder).all(|b| b.is_normalized(1e-9)));
            assert!(out.state.indicator_means.iter().all(|a| (0.0..=1.0).contains(a)));
        }
    }
}
