use geofence_core::agv::AgvProfile;
use geofence_core::geometry::{segment_enters_zone, Point2, WorldConfig};
use geofence_core::harness::{
    random_trajectory, run_experiment, run_experiment_sequential, simulate_run, ExperimentConfig, Trajectory,
    TrajectoryConfig,
};
use geofence_core::latency::LatencyPipeline;
use geofence_core::presets::{preset, TABLE};
use geofence_core::rtls::{ErrorModel, TagConfig};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Straight approach along y = 1 toward the default lab zone, no noise,
/// 1 ms fixed blinks, constant latency, instantaneous stop.
fn oracle_config(speed: f64, latency_ms: f64) -> ExperimentConfig {
    let mut cfg = preset("T4").unwrap();
    cfg.agv = AgvProfile {
        tag_forward_offset_m: 0.0,
        ..AgvProfile::r2()
    };
    cfg.speed_mps = speed;
    cfg.tag = TagConfig::new(1.0, false);
    cfg.error_model = ErrorModel::gaussian(1e-12);
    cfg.pipeline = LatencyPipeline::constant_total(latency_ms).unwrap();
    cfg.trajectory.fixed = Some(Trajectory {
        start: Point2::new(4.5, 1.0),
        heading_rad: 0.0,
    });
    cfg.n_runs = 1;
    cfg
}

#[test]
fn zero_noise_matches_closed_form() {
    for v in [0.093, 0.277] {
        for l in [0.0, 100.0, 300.0, 500.0] {
            let r = simulate_run(&oracle_config(v, l), 0).unwrap();
            let expected = 0.30 - v * l / 1000.0;
            // trigger happens within one blink of the buffer crossing
            let tol = v * (1.0 + 1e-6) / 1000.0;
            assert!(
                r.stop_distance_m <= expected + 1e-9 && r.stop_distance_m >= expected - tol,
                "v={v} L={l}: {} vs {expected}",
                r.stop_distance_m
            );
        }
    }
}

#[test]
fn stop_distance_decreases_with_speed_and_latency() {
    let d = |v, l| simulate_run(&oracle_config(v, l), 0).unwrap().stop_distance_m;
    assert!(d(0.05, 200.0) > d(0.1, 200.0));
    assert!(d(0.1, 200.0) > d(0.2, 200.0));
    assert!(d(0.1, 100.0) > d(0.1, 150.0));
    assert!(d(0.1, 150.0) > d(0.1, 400.0));
}

#[test]
fn reports_are_byte_identical_and_order_free() {
    let mut cfg = preset("T4").unwrap();
    cfg.n_runs = 64;
    cfg.seed = 7;
    let a = serde_json::to_string(&run_experiment(&cfg).unwrap()).unwrap();
    let b = serde_json::to_string(&run_experiment(&cfg).unwrap()).unwrap();
    let c = serde_json::to_string(&run_experiment_sequential(&cfg).unwrap()).unwrap();
    assert_eq!(a, b);
    assert_eq!(a, c);
}

#[test]
fn single_run_collapses_statistics() {
    let mut cfg = preset("T1").unwrap();
    cfg.n_runs = 1;
    let r = run_experiment(&cfg).unwrap();
    let d = r.samples[0];
    assert_eq!(r.box_stats.median, d);
    assert_eq!(r.box_stats.q1, d);
    assert_eq!(r.box_stats.whisker_hi, d);
    assert!(r.mean_ci.is_none());
}

#[test]
fn random_headings_reach_the_zone() {
    let world = WorldConfig::default_lab();
    let zone = &world.zones[0];
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..10_000 {
        let t = random_trajectory(&world, zone, &TrajectoryConfig::default(), &mut rng).unwrap();
        let far = t.start.add(Point2::from_heading(t.heading_rad).scale(20.0));
        assert!(segment_enters_zone(t.start, far, zone));
        assert!(world.extent.contains(t.start));
    }
}

#[test]
fn samples_stay_within_sanity_bound_without_anomalies() {
    let sigma = ErrorModel::vendor_default().sigma_m;
    for row in TABLE {
        for seed in 1..=5 {
            let mut cfg = preset(row.id).unwrap();
            cfg.seed = seed;
            let r = run_experiment(&cfg).unwrap();
            assert_eq!(r.anomalies, 0, "{} seed {seed}", row.id);
            let max = r.samples.iter().copied().fold(f64::MIN, f64::max);
            assert!(max <= 0.30 + 4.0 * sigma, "{} seed {seed}: {max}", row.id);
        }
    }
}
