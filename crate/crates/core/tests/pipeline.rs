use statbeam::beamform::{optimal_high_snr, optimal_low_snr};
use statbeam::fixtures::correlated_pair_a;
use statbeam::montecarlo::{empirical_rate, McConfig};
use statbeam::rates::ergodic_rate_two_user;
use statbeam::PositiveReal;

#[test]
fn designed_pairs_match_simulation() {
    let (s1, s2) = correlated_pair_a();
    let low = optimal_low_snr(&s1, &s2).unwrap().pair;
    let (high, _) = optimal_high_snr(&s1, &s2).unwrap();
    let cfg = McConfig::new(200_000, 11, 1 << 14).unwrap();
    for (pair, db) in [(&low, -5.0), (&high, 25.0)] {
        let rho = PositiveReal::new(10f64.powf(db / 10.0)).unwrap();
        let est = empirical_rate(&s1, &s2, pair, rho, &cfg).unwrap();
        let r1 = ergodic_rate_two_user(&s1, &pair.w1, &pair.w2, rho).unwrap();
        let r2 = ergodic_rate_two_user(&s2, &pair.w2, &pair.w1, rho).unwrap();
        assert!(est[0].z_score(r1).abs() < 4.0, "user 1 at {db} dB: {r1} vs {:?}", est[0]);
        assert!(est[1].z_score(r2).abs() < 4.0, "user 2 at {db} dB: {r2} vs {:?}", est[1]);
    }
}

#[test]
fn simulation_is_seed_deterministic() {
    let (s1, s2) = correlated_pair_a();
    let pair = optimal_low_snr(&s1, &s2).unwrap().pair;
    let rho = PositiveReal::new(3.0).unwrap();
    let run = |seed| {
        let cfg = McConfig::new(20_000, seed, 4096).unwrap();
        empirical_rate(&s1, &s2, &pair, rho, &cfg).unwrap().map(|e| e.mean)
    };
    assert_eq!(run(5), run(5));
    assert_ne!(run(5), run(6));
}
