//! Eye contact: neck flexion and rotation toward the user's eye point,
//! with joint limits and a slew-rate limited neck controller.
//!
//! Two angle sets are provided. [`gaze_angles`] is the closed form in which
//! the rotation angle is `asin(d_x / |d|)` in the agent frame; it measures
//! the target's angle from the agent's lateral plane, so a target straight
//! ahead gives 90 degrees and left and right are not distinguished.
//! [`look_at_angles`] gives the same flexion with a signed yaw, which is what
//! a neck joint needs to actually face the target.

use nalgebra::{Rotation3, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::motion::{forward_kinematics, local_rotation, JointConfig, Skeleton};

pub const FLEXION_LIMIT_DEG: f64 = 60.0;
pub const ROTATION_LIMIT_DEG: f64 = 80.0;
/// Neck slew rate, degrees per second.
pub const SLEW_RATE_DEG: f64 = 120.0;
/// Eye height above the neck base, meters.
pub const EYE_OFFSET: f64 = 0.12;

const MIN_DISTANCE: f64 = 1e-6;

#[derive(Debug, Error, PartialEq)]
pub enum GazeError {
    #[error("gaze target coincides with the agent (distance {0} m)")]
    Coincident(f64),
    #[error("gaze input is not finite")]
    NonFinite,
    #[error("skeleton has no neck joint named {0:?}")]
    MissingNeck(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GazeTarget {
    /// User eye point.
    pub p_c: [f64; 3],
    /// Agent neck base (plus eye offset).
    pub p_fva: [f64; 3],
    /// Agent yaw in radians, 0 facing +x, counter-clockwise.
    pub heading: f64,
}

/// Neck angles in degrees.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct NeckPose {
    pub flexion: f64,
    pub rotation: f64,
}

impl NeckPose {
    pub fn clamped(self) -> Self {
        NeckPose {
            flexion: self.flexion.clamp(-FLEXION_LIMIT_DEG, FLEXION_LIMIT_DEG),
            rotation: self.rotation.clamp(-ROTATION_LIMIT_DEG, ROTATION_LIMIT_DEG),
        }
    }
}

/// Target offset expressed in the agent frame (x forward, z up).
pub fn agent_frame(target: &GazeTarget) -> Result<Vector3<f64>, GazeError> {
    let finite = target.p_c.iter().chain(&target.p_fva).all(|v| v.is_finite()) && target.heading.is_finite();
    if !finite {
        return Err(GazeError::NonFinite);
    }
    let world = Vector3::from(target.p_c) - Vector3::from(target.p_fva);
    let n = world.norm();
    if n <= MIN_DISTANCE {
        return Err(GazeError::Coincident(n));
    }
    Ok(Rotation3::from_axis_angle(&Vector3::z_axis(), -target.heading) * world)
}

/// Closed-form flexion `asin(d_z/|d|)` and rotation `asin(d_x/|d|)`,
/// clamped to the joint limits.
pub fn gaze_angles(target: &GazeTarget) -> Result<NeckPose, GazeError> {
    let d = agent_frame(target)?;
    let n = d.norm();
    Ok(NeckPose {
        flexion: (d.z / n).clamp(-1.0, 1.0).asin().to_degrees(),
        rotation: (d.x / n).clamp(-1.0, 1.0).asin().to_degrees(),
    }
    .clamped())
}

/// Flexion as in [`gaze_angles`]; rotation is the signed yaw of the target
/// (positive to the agent's left). Unclamped.
pub fn look_at_angles(target: &GazeTarget) -> Result<NeckPose, GazeError> {
    let d = agent_frame(target)?;
    Ok(NeckPose {
        flexion: (d.z / d.norm()).clamp(-1.0, 1.0).asin().to_degrees(),
        rotation: d.y.atan2(d.x).to_degrees(),
    })
}

/// Unit direction a neck in `pose` faces, in the agent frame.
pub fn pose_direction(pose: NeckPose) -> Vector3<f64> {
    let (f, r) = (pose.flexion.to_radians(), pose.rotation.to_radians());
    Vector3::new(f.cos() * r.cos(), f.cos() * r.sin(), f.sin())
}

/// Moves `current` toward `target` by at most `max_step`.
pub fn slew(current: f64, target: f64, max_step: f64) -> f64 {
    current + (target - current).clamp(-max_step, max_step)
}

/// Where the neck angles live in a joint configuration: flexion on the
/// neck's y rotation (negated, positive y pitches down) and rotation on z.
#[derive(Clone, Debug, PartialEq)]
pub struct NeckMapping {
    joint: usize,
}

impl NeckMapping {
    pub fn new(skeleton: &Skeleton, neck: &str) -> Result<Self, GazeError> {
        skeleton
            .joint_index(neck)
            .map(|joint| NeckMapping { joint })
            .ok_or_else(|| GazeError::MissingNeck(neck.to_string()))
    }

    pub fn joint(&self) -> usize {
        self.joint
    }

    pub fn read(&self, config: &JointConfig) -> NeckPose {
        let r = config.rotations[self.joint];
        NeckPose {
            flexion: -r[1],
            rotation: r[2],
        }
    }

    pub fn write(&self, config: &mut JointConfig, pose: NeckPose) {
        let r = &mut config.rotations[self.joint];
        r[1] = -pose.flexion;
        r[2] = pose.rotation;
        r[0] = 0.0;
    }

    /// World position of the neck base and world rotation of its parent.
    pub fn frame(&self, skeleton: &Skeleton, config: &JointConfig) -> ([f64; 3], Rotation3<f64>) {
        let pose = forward_kinematics(skeleton, config);
        let parent = skeleton.joints()[self.joint].parent;
        let rot = parent.map_or_else(Rotation3::identity, |p| world_rotation(skeleton, config, p));
        (pose.positions[self.joint], rot)
    }

    /// Unit forward (+x) of the neck joint in world coordinates.
    pub fn world_forward(&self, skeleton: &Skeleton, config: &JointConfig) -> Vector3<f64> {
        world_rotation(skeleton, config, self.joint) * Vector3::x()
    }
}

fn world_rotation(skeleton: &Skeleton, config: &JointConfig, joint: usize) -> Rotation3<f64> {
    let joints = skeleton.joints();
    let mut chain = vec![joint];
    while let Some(p) = joints[*chain.last().unwrap()].parent {
        chain.push(p);
    }
    chain
        .iter()
        .rev()
        .fold(Rotation3::identity(), |acc, &j| acc * local_rotation(skeleton, config, j))
}

/// Rate-limited neck update. With `xi` the neck tracks `target` (clamped);
/// otherwise it returns toward the neck values already in `config` (the
/// animation's own). `current` carries the neck state between ticks.
pub fn apply_gaze(
    mapping: &NeckMapping,
    config: &JointConfig,
    current: &mut NeckPose,
    target: NeckPose,
    xi: bool,
    dt: f64,
) -> JointConfig {
    let goal = if xi { target.clamped() } else { mapping.read(config) };
    let step = SLEW_RATE_DEG * dt;
    *current = NeckPose {
        flexion: slew(current.flexion, goal.flexion, step),
        rotation: slew(current.rotation, goal.rotation, step),
    };
    let mut out = config.clone();
    let keep_roll = config.rotations[mapping.joint][0];
    mapping.write(&mut out, *current);
    if !xi {
        out.rotations[mapping.joint][0] = keep_roll;
    }
    out
}

/// Neck target that makes the neck face `eye`, computed in the frame of the
/// neck's parent joint so that torso posture is compensated.
pub fn neck_target(
    mapping: &NeckMapping,
    skeleton: &Skeleton,
    config: &JointConfig,
    root_yaw: f64,
    root_position: [f64; 3],
    eye: [f64; 3],
) -> Result<NeckPose, GazeError> {
    let (neck_local, parent_rot) = mapping.frame(skeleton, config);
    let yaw = Rotation3::from_axis_angle(&Vector3::z_axis(), root_yaw);
    let neck_world = Vector3::from(root_position) + yaw * Vector3::from(neck_local);
    let eye_point = neck_world + Vector3::new(0.0, 0.0, EYE_OFFSET);
    let to_user = Vector3::from(eye) - eye_point;
    let in_parent = (yaw * parent_rot).inverse() * to_user;
    look_at_angles(&GazeTarget {
        p_c: [in_parent.x, in_parent.y, in_parent.z],
        p_fva: [0.0; 3],
        heading: 0.0,
    })
}
