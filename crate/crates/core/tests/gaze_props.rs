use fva_core::gaze::*;
use proptest::prelude::*;

fn oracle(p_c: [f64; 3], p_fva: [f64; 3], heading: f64) -> (f64, f64) {
    let (wx, wy, wz) = (p_c[0] - p_fva[0], p_c[1] - p_fva[1], p_c[2] - p_fva[2]);
    let (s, c) = heading.sin_cos();
    // R(-h) = [[c, s], [-s, c]]
    let dx = c * wx + s * wy;
    let dy = -s * wx + c * wy;
    let n = (dx * dx + dy * dy + wz * wz).sqrt();
    let f = (wz / n).asin().to_degrees().clamp(-60.0, 60.0);
    let r = (dx / n).asin().to_degrees().clamp(-80.0, 80.0);
    (f, r)
}

fn coord() -> impl Strategy<Value = f64> {
    -10.0..10.0f64
}

fn p3() -> impl Strategy<Value = [f64; 3]> {
    (coord(), coord(), coord()).prop_map(|(x, y, z)| [x, y, z])
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn matches_closed_form(p_c in p3(), p_fva in p3(), heading in -10.0..10.0f64) {
        prop_assume!((0..3).map(|k| (p_c[k] - p_fva[k]).powi(2)).sum::<f64>().sqrt() > 1e-3);
        let g = gaze_angles(&GazeTarget { p_c, p_fva, heading }).unwrap();
        let (f, r) = oracle(p_c, p_fva, heading);
        prop_assert!((g.flexion - f).abs() <= 1e-9);
        prop_assert!((g.rotation - r).abs() <= 1e-9);
        prop_assert!(g.flexion.abs() <= 60.0 && g.rotation.abs() <= 80.0);
    }

    #[test]
    fn heading_equivariant(p_c in p3(), p_fva in p3(), heading in -4.0..4.0f64, yaw in -4.0..4.0f64) {
        prop_assume!((0..3).map(|k| (p_c[k] - p_fva[k]).powi(2)).sum::<f64>().sqrt() > 1e-3);
        let a = gaze_angles(&GazeTarget { p_c, p_fva, heading }).unwrap();
        let (s, c) = yaw.sin_cos();
        let (wx, wy) = (p_c[0] - p_fva[0], p_c[1] - p_fva[1]);
        let rotated = [p_fva[0] + c * wx - s * wy, p_fva[1] + s * wx + c * wy, p_c[2]];
        let b = gaze_angles(&GazeTarget { p_c: rotated, p_fva, heading: heading + yaw }).unwrap();
        prop_assert!((a.flexion - b.flexion).abs() <= 1e-9);
        prop_assert!((a.rotation - b.rotation).abs() <= 1e-9);
    }

    #[test]
    fn look_at_direction_is_exact(p_c in p3(), heading in -4.0..4.0f64) {
        prop_assume!(p_c.iter().map(|v| v * v).sum::<f64>().sqrt() > 1e-3);
        let t = GazeTarget { p_c, p_fva: [0.0; 3], heading };
        let d = agent_frame(&t).unwrap().normalize();
        let dir = pose_direction(look_at_angles(&t).unwrap());
        prop_assert!((d - dir).norm() <= 1e-9);
    }
}

#[test]
fn clamping_engages_exactly_past_limits() {
    let at = |deg: f64| {
        let r = deg.to_radians();
        GazeTarget { p_c: [r.cos(), 0.0, r.sin()], p_fva: [0.0; 3], heading: 0.0 }
    };
    // flexion exactly at and past the limit
    let g = gaze_angles(&at(59.999)).unwrap();
    assert!((g.flexion - 59.999).abs() < 1e-9);
    assert_eq!(gaze_angles(&at(60.5)).unwrap().flexion, 60.0);
    assert_eq!(gaze_angles(&at(-75.0)).unwrap().flexion, -60.0);
    // rotation: asin(d_x/|d|) with d in the horizontal plane, angle measured from +y
    let side = |deg: f64| {
        let r = deg.to_radians();
        GazeTarget { p_c: [r.sin(), r.cos(), 0.0], p_fva: [0.0; 3], heading: 0.0 }
    };
    assert!((gaze_angles(&side(79.999)).unwrap().rotation - 79.999).abs() < 1e-9);
    assert_eq!(gaze_angles(&side(80.001)).unwrap().rotation, 80.0);
    assert_eq!(gaze_angles(&side(-85.0)).unwrap().rotation, -80.0);
}
