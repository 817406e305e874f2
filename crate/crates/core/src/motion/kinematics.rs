use nalgebra::{Rotation3, Vector3};

use super::{JointConfig, Pose, Skeleton};

fn axis_rotation(axis: usize, degrees: f64) -> Rotation3<f64> {
    let v = match axis {
        0 => Vector3::x_axis(),
        1 => Vector3::y_axis(),
        _ => Vector3::z_axis(),
    };
    Rotation3::from_axis_angle(&v, degrees.to_radians())
}

/// Local rotation of joint `i`, composing its rotation channels in declared
/// order (intrinsic, as in BVH).
pub(crate) fn local_rotation(skeleton: &Skeleton, config: &JointConfig, i: usize) -> Rotation3<f64> {
    skeleton.joints()[i]
        .rotation_order()
        .fold(Rotation3::identity(), |acc, axis| {
            acc * axis_rotation(axis, config.rotations[i][axis])
        })
}

/// World positions of every joint. Position channels, where a joint has
/// them, replace that joint's static offset.
pub fn forward_kinematics(skeleton: &Skeleton, config: &JointConfig) -> Pose {
    let joints = skeleton.joints();
    let mut rotations: Vec<Rotation3<f64>> = Vec::with_capacity(joints.len());
    let mut positions: Vec<Vector3<f64>> = Vec::with_capacity(joints.len());
    for (i, joint) in joints.iter().enumerate() {
        let local_t = if joint.has_position_channels() {
            Vector3::from(config.translations[i])
        } else {
            Vector3::from(joint.offset)
        };
        let local_r = local_rotation(skeleton, config, i);
        match joint.parent {
            None => {
                positions.push(local_t);
                rotations.push(local_r);
            }
            Some(p) => {
                positions.push(positions[p] + rotations[p] * local_t);
                rotations.push(rotations[p] * local_r);
            }
        }
    }
    Pose {
        positions: positions.iter().map(|p| [p.x, p.y, p.z]).collect(),
    }
}
