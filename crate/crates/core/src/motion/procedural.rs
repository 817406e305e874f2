//! Built-in 16-joint skeleton and synthesized clips.
//!
//! The engine needs gait and gesture clips even when no motion-capture data
//! is installed. These are smooth, loopable, in-place cycles on a z-up,
//! x-forward skeleton; a style value in [0, 1] scales stride, arm swing and
//! posture so that higher values read as more relaxed and open.

use std::f64::consts::TAU;

use super::{Channel::*, ClipKind, Joint, JointConfig, MotionClip, Skeleton};

pub const NECK: &str = "Neck";
pub const HEAD: &str = "Head";
/// Standing height of the hip joint above the floor, meters.
pub const HIP_HEIGHT: f64 = 0.95;

const GAIT_FRAMES: usize = 61;
const GAIT_FRAME_TIME: f64 = 1.0 / 60.0;

fn joint(name: &str, parent: Option<usize>, offset: [f64; 3], end_site: Option<[f64; 3]>) -> Joint {
    let channels = if parent.is_none() {
        vec![Xposition, Yposition, Zposition, Zrotation, Yrotation, Xrotation]
    } else {
        vec![Zrotation, Yrotation, Xrotation]
    };
    Joint {
        name: name.to_string(),
        parent,
        offset,
        channels,
        end_site,
    }
}

/// The reference 16-joint skeleton (root at the hips, 48 positional DOF).
pub fn reference_skeleton() -> Skeleton {
    Skeleton::new(vec![
        joint("Hips", None, [0.0, 0.0, 0.0], None),
        joint("Chest", Some(0), [0.0, 0.0, 0.30], None),
        joint(NECK, Some(1), [0.0, 0.0, 0.25], None),
        joint(HEAD, Some(2), [0.0, 0.0, 0.10], Some([0.0, 0.0, 0.15])),
        joint("LeftShoulder", Some(1), [0.0, 0.18, 0.20], None),
        joint("LeftElbow", Some(4), [0.0, 0.0, -0.28], None),
        joint("LeftHand", Some(5), [0.0, 0.0, -0.26], Some([0.0, 0.0, -0.08])),
        joint("RightShoulder", Some(1), [0.0, -0.18, 0.20], None),
        joint("RightElbow", Some(7), [0.0, 0.0, -0.28], None),
        joint("RightHand", Some(8), [0.0, 0.0, -0.26], Some([0.0, 0.0, -0.08])),
        joint("LeftHip", Some(0), [0.0, 0.10, 0.0], None),
        joint("LeftKnee", Some(10), [0.0, 0.0, -0.45], None),
        joint("LeftFoot", Some(11), [0.0, 0.0, -0.45], Some([0.12, 0.0, -0.05])),
        joint("RightHip", Some(0), [0.0, -0.10, 0.0], None),
        joint("RightKnee", Some(13), [0.0, 0.0, -0.45], None),
        joint("RightFoot", Some(14), [0.0, 0.0, -0.45], Some([0.12, 0.0, -0.05])),
    ])
    .expect("reference skeleton is well formed")
}

fn standing(sk: &Skeleton) -> JointConfig {
    let mut c = sk.zero_config();
    c.translations[0] = [0.0, 0.0, HIP_HEIGHT];
    c
}

fn set(sk: &Skeleton, c: &mut JointConfig, name: &str, axis: usize, degrees: f64) {
    let i = sk.joint_index(name).expect("reference joint");
    c.rotations[i][axis] = degrees;
}

/// A walking cycle with the given style in [0, 1], sampled at `frames`
/// frames. The last frame equals the first so the loop is seamless.
pub fn gait_clip_with(id: &str, style: f64, frames: usize, frame_time: f64) -> MotionClip {
    let sk = reference_skeleton();
    let s = style.clamp(0.0, 1.0);
    let stride = 18.0 + 14.0 * s;
    let arm_swing = 6.0 + 26.0 * s;
    let slouch = 12.0 * (1.0 - s);
    let head_down = 10.0 * (1.0 - s);
    let bounce = 0.01 + 0.02 * s;
    let configs = (0..frames)
        .map(|k| {
            let phase = if frames > 1 {
                TAU * (k % (frames - 1)) as f64 / (frames - 1) as f64
            } else {
                0.0
            };
            let (sin, cos) = phase.sin_cos();
            let mut c = standing(&sk);
            c.translations[0][2] = HIP_HEIGHT + bounce * (2.0 * phase).cos();
            set(&sk, &mut c, "Chest", 1, slouch);
            set(&sk, &mut c, HEAD, 1, head_down);
            set(&sk, &mut c, "LeftHip", 1, -stride * sin);
            set(&sk, &mut c, "RightHip", 1, stride * sin);
            set(&sk, &mut c, "LeftKnee", 1, 25.0 * (0.5 + 0.5 * cos).powi(2));
            set(&sk, &mut c, "RightKnee", 1, 25.0 * (0.5 - 0.5 * cos).powi(2));
            set(&sk, &mut c, "LeftShoulder", 1, arm_swing * sin);
            set(&sk, &mut c, "RightShoulder", 1, -arm_swing * sin);
            set(&sk, &mut c, "LeftElbow", 1, -10.0 - 10.0 * s);
            set(&sk, &mut c, "RightElbow", 1, -10.0 - 10.0 * s);
            c
        })
        .collect();
    MotionClip::new(id, ClipKind::Gait, sk, frame_time, true, configs).expect("valid gait clip")
}

pub fn gait_clip(id: &str, style: f64) -> MotionClip {
    gait_clip_with(id, style, GAIT_FRAMES, GAIT_FRAME_TIME)
}

fn gesture(id: &str, kind: ClipKind, seconds: f64, pose: impl Fn(&Skeleton, &mut JointConfig, f64)) -> MotionClip {
    let sk = reference_skeleton();
    let frames = (seconds * 60.0).round() as usize + 1;
    let configs = (0..frames)
        .map(|k| {
            let u = k as f64 / (frames - 1) as f64;
            let mut c = standing(&sk);
            pose(&sk, &mut c, u);
            c
        })
        .collect();
    MotionClip::new(id, kind, sk, 1.0 / 60.0, false, configs).expect("valid gesture clip")
}

/// Raise envelope: 0 at the ends, 1 through the middle of the gesture.
fn envelope(u: f64) -> f64 {
    let ramp = 0.2;
    if u < ramp {
        (u / ramp).powi(2) * (3.0 - 2.0 * u / ramp)
    } else if u > 1.0 - ramp {
        let v = (1.0 - u) / ramp;
        v * v * (3.0 - 2.0 * v)
    } else {
        1.0
    }
}

// Gesture reach is kept inside the agent's collision disc (0.3 m from the
// vertical body axis) so that gestures cannot introduce contacts that
// navigation did not plan for.

/// Forearm raised with the hand above the shoulder, waving side to side.
pub fn wave_open() -> MotionClip {
    gesture("wave_open", ClipKind::GestureHand, 2.4, |sk, c, u| {
        let e = envelope(u);
        set(sk, c, "RightShoulder", 0, -15.0 * e);
        set(sk, c, "RightElbow", 0, e * (172.0 + 12.0 * (3.0 * TAU * u).sin()));
    })
}

/// Forearm held in front of the body at waist height, small wrist wave.
pub fn wave_closed() -> MotionClip {
    gesture("wave_closed", ClipKind::GestureHand, 2.4, |sk, c, u| {
        let e = envelope(u);
        set(sk, c, "RightElbow", 2, 35.0 * e);
        set(sk, c, "RightElbow", 1, -120.0 * e);
        set(sk, c, "RightHand", 0, e * 15.0 * (3.0 * TAU * u).sin());
    })
}

pub fn head_nod() -> MotionClip {
    gesture("head_nod", ClipKind::GestureHead, 1.2, |sk, c, u| {
        set(sk, c, HEAD, 1, 16.0 * (2.0 * TAU * u).sin().max(0.0) * envelope(u));
    })
}

pub fn head_shake() -> MotionClip {
    gesture("head_shake", ClipKind::GestureHead, 1.2, |sk, c, u| {
        set(sk, c, HEAD, 2, 20.0 * (2.0 * TAU * u).sin() * envelope(u));
    })
}
