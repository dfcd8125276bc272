use geofence_core::controller::SafetyController;
use geofence_core::geometry::{in_buffered_zone, Point2, WorldConfig};
use geofence_core::rtls::PositionEstimate;
use proptest::prelude::*;

fn stream() -> impl Strategy<Value = Vec<(f64, f64, f64, bool)>> {
    proptest::collection::vec((0.0..50.0f64, 4.0..8.0f64, 0.0..4.0f64, any::<bool>()), 1..60)
}

fn estimates(raw: &[(f64, f64, f64, bool)]) -> Vec<PositionEstimate> {
    let mut t = 0.0;
    raw.iter()
        .map(|&(dt, x, y, second)| {
            t += dt;
            PositionEstimate {
                tag_id: if second { "R2".into() } else { "R1".into() },
                timestamp_ms: t,
                position: Point2::new(x, y),
                true_position: Point2::new(x, y),
            }
        })
        .collect()
}

proptest! {
    #[test]
    fn sound_complete_one_shot(raw in stream()) {
        let world = WorldConfig::default_lab();
        let mut c = SafetyController::new(world.clone());
        let mut commands = Vec::new();
        for e in estimates(&raw) {
            let out = c.process_estimate(&e).unwrap();
            if let Some(cmd) = out.command {
                // soundness: the triggering estimate is inside a buffered zone
                prop_assert!(world.buffered_zones().any(|bz| in_buffered_zone(e.position, &bz)));
                commands.push((e.tag_id.clone(), cmd.issued_at_ms));
            }
        }
        for tag in ["R1", "R2"] {
            let issued: Vec<f64> = commands.iter().filter(|(t, _)| t == tag).map(|c| c.1).collect();
            prop_assert!(issued.len() <= 1);
            let first_inside = estimates(&raw)
                .into_iter()
                .find(|e| e.tag_id == tag && world.buffered_zones().any(|bz| in_buffered_zone(e.position, &bz)))
                .map(|e| e.timestamp_ms);
            prop_assert_eq!(issued.first().copied(), first_inside);
            prop_assert_eq!(c.command_for(tag).map(|c| c.issued_at_ms), first_inside);
        }
    }

    #[test]
    fn replay_is_bit_exact(raw in stream()) {
        let run = || {
            let mut c = SafetyController::new(WorldConfig::default_lab());
            for e in estimates(&raw) {
                c.process_estimate(&e).unwrap();
            }
            c.alerts().iter().map(|a| a.trace_line()).collect::<Vec<_>>()
        };
        prop_assert_eq!(run(), run());
    }
}
