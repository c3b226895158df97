//! Monte Carlo estimators against values computed independently at high
//! precision (exact PEP by numerical Laplace inversion of the cascade CDF).

use lisnoma::channel::{simulate_pep, simulate_pep_with_level, SystemConfig};
use lisnoma::db_to_linear;
use lisnoma::pep::default_event;

/// `(M, user, snr_db, E[Q(q vartheta / lambda)])` in the reference scenario.
const EXACT_PEP: [(u32, usize, f64, f64); 6] = [
    (1, 0, 10.0, 0.346_462_224_094),
    (3, 1, 20.0, 4.044_497_297_91e-3),
    (3, 0, 30.0, 1.297_592_544_8e-4),
    (15, 0, 30.0, 6.564_923_639_34e-25),
    (15, 0, 35.0, 5.392_505_783_61e-31),
    (15, 0, 40.0, 2.517_377_052_4e-37),
];

#[test]
fn importance_sampled_pep_matches_exact_values() {
    for (m, user, db, want) in EXACT_PEP {
        let cfg = SystemConfig::reference(m);
        let e = default_event(&cfg, user)
            .unwrap()
            .with_snr(db_to_linear(db));
        let est = simulate_pep(&cfg, &e, 400_000, 17).unwrap();
        let z = (est.value - want).abs() / est.std_error;
        assert!(
            z < 4.0,
            "M={m} user {user} {db} dB: {est:?} vs {want:e} ({z:.1} SE)"
        );
        assert!(est.std_error < 0.1 * want, "M={m} {db} dB: {est:?}");
    }
}

#[test]
fn plain_and_importance_sampling_agree() {
    let cfg = SystemConfig::reference(3);
    let e = default_event(&cfg, 1).unwrap().with_snr(db_to_linear(20.0));
    let plain = simulate_pep_with_level(&cfg, &e, 1 << 20, 3, Some(1.0)).unwrap();
    let tilted = simulate_pep_with_level(&cfg, &e, 1 << 20, 3, Some(0.05)).unwrap();
    let se = (plain.std_error.powi(2) + tilted.std_error.powi(2)).sqrt();
    assert!((plain.value - tilted.value).abs() < 4.0 * se);
    assert_eq!(plain.importance_level, 1.0);
}

#[test]
fn estimates_are_reproducible() {
    let cfg = SystemConfig::reference(6);
    let e = default_event(&cfg, 0).unwrap().with_snr(db_to_linear(25.0));
    let a = simulate_pep(&cfg, &e, 100_000, 9).unwrap();
    let b = simulate_pep(&cfg, &e, 100_000, 9).unwrap();
    assert_eq!(a, b);
    assert!(simulate_pep_with_level(&cfg, &e, 100, 9, Some(1.5)).is_err());
}
