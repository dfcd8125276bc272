use geofence_core::geometry::Point2;
use geofence_core::rtls::{blink_schedule, calibrate_sigma, estimate_position, ErrorModel, TagConfig};
use geofence_core::stats::{ks_two_sample, quantile_sorted};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn radial_errors(em: &ErrorModel, n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let p = Point2::new(4.0, 4.0);
    (0..n)
        .filter_map(|i| estimate_position("t", i as f64, p, em, &mut rng))
        .map(|e| e.position.distance(p))
        .collect()
}

#[test]
fn ninety_eighth_percentile_is_thirty_cm() {
    let sigma = calibrate_sigma(0.98, 0.30).unwrap();
    let mut r = radial_errors(&ErrorModel::gaussian(sigma), 1_000_000, 1);
    r.sort_by(f64::total_cmp);
    let q98 = quantile_sorted(&r, 0.98);
    assert!((q98 - 0.30).abs() < 0.003, "q98 = {q98}");
}

#[test]
fn radial_error_median_is_rayleigh() {
    let sigma = calibrate_sigma(0.98, 0.30).unwrap();
    let mut r = radial_errors(&ErrorModel::gaussian(sigma), 100_000, 2);
    r.sort_by(f64::total_cmp);
    let expected = sigma * (2.0 * 2f64.ln()).sqrt();
    let median = quantile_sorted(&r, 0.5);
    assert!((median / expected - 1.0).abs() < 0.02, "{median} vs {expected}");
}

#[test]
fn nlos_at_unit_scale_is_indistinguishable() {
    let los = ErrorModel::vendor_default();
    let nlos = ErrorModel {
        nlos_enabled: true,
        ..los.clone()
    };
    let a = radial_errors(&los, 10_000, 3);
    let b = radial_errors(&nlos, 10_000, 4);
    let ks = ks_two_sample(&a, &b).unwrap();
    assert!(!ks.rejects(0.01), "D = {} p = {}", ks.statistic, ks.p_value);

    let stressed = ErrorModel {
        nlos_enabled: true,
        nlos_sigma_scale: 1.5,
        ..los
    };
    let c = radial_errors(&stressed, 10_000, 4);
    assert!(ks_two_sample(&a, &c).unwrap().rejects(0.01));
}

#[test]
fn schedules_and_estimates_are_deterministic() {
    let cfg = TagConfig::new(100.0, true);
    let em = ErrorModel::vendor_default();
    let run = |seed| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let s = blink_schedule(&cfg, 60_000.0, &mut rng);
        let e: Vec<_> = s
            .iter()
            .map(|&t| estimate_position("t", t, Point2::new(1.0, 2.0), &em, &mut rng))
            .collect();
        (s, e)
    };
    let (s1, e1) = run(9);
    let (s2, e2) = run(9);
    assert_eq!(s1, s2);
    assert_eq!(e1, e2);
    assert_ne!(run(10).0, s1);
}

#[test]
fn jitter_does_not_drift() {
    let cfg = TagConfig::new(200.0, true);
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let s = blink_schedule(&cfg, 2_100_000.0, &mut rng);
    let gaps: Vec<f64> = s.windows(2).map(|w| w[1] - w[0]).take(10_000).collect();
    assert_eq!(gaps.len(), 10_000);
    let mean = gaps.iter().sum::<f64>() / gaps.len() as f64;
    assert!((mean - 200.0).abs() < 2.0);
}
