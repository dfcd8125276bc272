use geofence_core::agv::{apply_stop, step, tag_position, AgvProfile, AgvState};
use geofence_core::geometry::Point2;
use proptest::prelude::*;

#[test]
fn finite_decel_travel_matches_closed_form() {
    for (v, a) in [(0.093, 0.5), (0.277, 0.5), (0.277, 2.0), (1.0, 0.8)] {
        let profile = AgvProfile {
            decel_mps2: Some(a),
            ..AgvProfile::r2()
        };
        let mut s = apply_stop(&AgvState::moving(Point2::new(0.0, 0.0), 0.0, v), &profile, 0.0);
        let mut n = 0;
        while !s.stopped {
            s = step(&s, &profile, 1.0);
            n += 1;
            assert!(n < 1_000_000);
        }
        let expected = v * v / (2.0 * a);
        assert!(
            (s.position.x - expected).abs() <= 0.001,
            "{} vs {expected}",
            s.position.x
        );
    }
}

#[test]
fn instantaneous_stop_has_no_overshoot() {
    let profile = AgvProfile::r1();
    let s = AgvState::moving(Point2::new(1.0, 1.0), 0.7, 0.093);
    let s = step(&s, &profile, 1234.0);
    let at_stop = tag_position(&s, &profile);
    let stopped = apply_stop(&s, &profile, 1234.0);
    let later = step(&stopped, &profile, 10_000.0);
    assert_eq!(tag_position(&later, &profile), at_stop);
}

proptest! {
    #[test]
    fn step_is_linear_in_dt(x in -5.0..5.0f64, y in -5.0..5.0f64, h in -3.2..3.2f64, v in 0.0..1.0f64, dt in 0.0..500.0f64) {
        let profile = AgvProfile::r2();
        let s = AgvState::moving(Point2::new(x, y), h, v);
        let twice = step(&step(&s, &profile, dt), &profile, dt);
        let once = step(&s, &profile, 2.0 * dt);
        prop_assert!((twice.position.x - once.position.x).abs() < 1e-12);
        prop_assert!((twice.position.y - once.position.y).abs() < 1e-12);
    }

    #[test]
    fn stop_latches_once(events in proptest::collection::vec((0u8..3, 0.0..200.0f64), 1..40), decel in proptest::option::of(0.1..3.0f64)) {
        let profile = AgvProfile { decel_mps2: decel, ..AgvProfile::r2() };
        let mut s = AgvState::moving(Point2::new(0.0, 0.0), 0.0, 0.277);
        let mut now = 0.0;
        let mut latched_at: Option<f64> = None;
        let mut was_stopped = false;
        for (kind, dt) in events {
            now += dt;
            s = match kind {
                0 => step(&s, &profile, dt),
                _ => apply_stop(&step(&s, &profile, dt), &profile, now),
            };
            if let Some(t) = latched_at {
                prop_assert_eq!(s.stop_latched_at_ms, Some(t));
            }
            latched_at = s.stop_latched_at_ms;
            prop_assert!(!was_stopped || s.stopped);
            was_stopped = s.stopped;
        }
    }
}
