//! Skeletal motion: skeletons, joint configurations, clips, playback,
//! layering and forward kinematics.

mod bvh;
mod kinematics;
pub mod procedural;

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use bvh::{parse_bvh, parse_bvh_with_scale, write_bvh, BvhError, CM_TO_M};
pub use kinematics::forward_kinematics;
pub(crate) use kinematics::local_rotation;

/// A single degree of freedom of a joint.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Channel {
    Xposition,
    Yposition,
    Zposition,
    Xrotation,
    Yrotation,
    Zrotation,
}

impl Channel {
    pub fn parse(name: &str) -> Option<Self> {
        Some(match name {
            "Xposition" => Channel::Xposition,
            "Yposition" => Channel::Yposition,
            "Zposition" => Channel::Zposition,
            "Xrotation" => Channel::Xrotation,
            "Yrotation" => Channel::Yrotation,
            "Zrotation" => Channel::Zrotation,
            _ => return None,
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            Channel::Xposition => "Xposition",
            Channel::Yposition => "Yposition",
            Channel::Zposition => "Zposition",
            Channel::Xrotation => "Xrotation",
            Channel::Yrotation => "Yrotation",
            Channel::Zrotation => "Zrotation",
        }
    }

    /// Axis index 0..3 (x, y, z).
    pub fn axis(self) -> usize {
        match self {
            Channel::Xposition | Channel::Xrotation => 0,
            Channel::Yposition | Channel::Yrotation => 1,
            Channel::Zposition | Channel::Zrotation => 2,
        }
    }

    pub fn is_rotation(self) -> bool {
        matches!(
            self,
            Channel::Xrotation | Channel::Yrotation | Channel::Zrotation
        )
    }
}

impl fmt::Display for Channel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Joint {
    pub name: String,
    pub parent: Option<usize>,
    /// Offset from the parent joint, meters.
    pub offset: [f64; 3],
    pub channels: Vec<Channel>,
    /// Offset of the terminal `End Site`, if the joint has one.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub end_site: Option<[f64; 3]>,
}

impl Joint {
    pub fn has_position_channels(&self) -> bool {
        self.channels.iter().any(|c| !c.is_rotation())
    }

    /// Rotation axes in the order they are declared (and composed).
    pub fn rotation_order(&self) -> impl Iterator<Item = usize> + '_ {
        self.channels
            .iter()
            .filter(|c| c.is_rotation())
            .map(|c| c.axis())
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum SkeletonError {
    #[error("skeleton has no joints")]
    Empty,
    #[error("joint 0 must be the root")]
    RootNotFirst,
    #[error("joint {index} ({name}) has invalid parent {parent:?}")]
    BadParent {
        index: usize,
        name: String,
        parent: Option<usize>,
    },
    #[error("joint {0} declares {1} channels, expected 3 or 6")]
    ChannelCount(String, usize),
}

/// Hierarchical joint tree stored in parent-before-child order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Joint>", into = "Vec<Joint>")]
pub struct Skeleton {
    joints: Vec<Joint>,
}

impl TryFrom<Vec<Joint>> for Skeleton {
    type Error = SkeletonError;

    fn try_from(joints: Vec<Joint>) -> Result<Self, Self::Error> {
        Skeleton::new(joints)
    }
}

impl From<Skeleton> for Vec<Joint> {
    fn from(s: Skeleton) -> Self {
        s.joints
    }
}

impl Skeleton {
    pub fn new(joints: Vec<Joint>) -> Result<Self, SkeletonError> {
        if joints.is_empty() {
            return Err(SkeletonError::Empty);
        }
        if joints[0].parent.is_some() {
            return Err(SkeletonError::RootNotFirst);
        }
        for (i, j) in joints.iter().enumerate() {
            if i > 0 && !matches!(j.parent, Some(p) if p < i) {
                return Err(SkeletonError::BadParent {
                    index: i,
                    name: j.name.clone(),
                    parent: j.parent,
                });
            }
            let n = j.channels.len();
            let rot = j.channels.iter().filter(|c| c.is_rotation()).count();
            if !(n == 3 || n == 6) || rot != 3 {
                return Err(SkeletonError::ChannelCount(j.name.clone(), n));
            }
        }
        Ok(Skeleton { joints })
    }

    pub fn joints(&self) -> &[Joint] {
        &self.joints
    }

    pub fn len(&self) -> usize {
        self.joints.len()
    }

    pub fn is_empty(&self) -> bool {
        self.joints.is_empty()
    }

    pub fn joint_index(&self, name: &str) -> Option<usize> {
        self.joints.iter().position(|j| j.name == name)
    }

    pub fn channel_count(&self) -> usize {
        self.joints.iter().map(|j| j.channels.len()).sum()
    }

    /// A configuration with every channel at zero.
    pub fn zero_config(&self) -> JointConfig {
        JointConfig {
            translations: vec![[0.0; 3]; self.len()],
            rotations: vec![[0.0; 3]; self.len()],
        }
    }

    /// Flattens a configuration into raw channel values in declared order.
    pub fn to_channels(&self, config: &JointConfig) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.channel_count());
        for (i, j) in self.joints.iter().enumerate() {
            for c in &j.channels {
                let v = if c.is_rotation() {
                    config.rotations[i][c.axis()]
                } else {
                    config.translations[i][c.axis()]
                };
                out.push(v);
            }
        }
        out
    }

    /// Inverse of [`Skeleton::to_channels`]. Returns `None` on a length mismatch.
    pub fn from_channels(&self, values: &[f64]) -> Option<JointConfig> {
        if values.len() != self.channel_count() {
            return None;
        }
        let mut config = self.zero_config();
        let mut it = values.iter();
        for (i, j) in self.joints.iter().enumerate() {
            for c in &j.channels {
                let v = *it.next()?;
                if c.is_rotation() {
                    config.rotations[i][c.axis()] = v;
                } else {
                    config.translations[i][c.axis()] = v;
                }
            }
        }
        Some(config)
    }
}

/// Per-joint Euler rotations (degrees, indexed x/y/z) and translations
/// (meters, only meaningful for joints carrying position channels).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct JointConfig {
    pub translations: Vec<[f64; 3]>,
    pub rotations: Vec<[f64; 3]>,
}

impl JointConfig {
    pub fn len(&self) -> usize {
        self.rotations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rotations.is_empty()
    }

    pub fn root_translation(&self) -> [f64; 3] {
        self.translations[0]
    }

    pub fn is_finite(&self) -> bool {
        self.rotations
            .iter()
            .chain(self.translations.iter())
            .flatten()
            .all(|v| v.is_finite())
    }
}

/// World-space joint positions, meters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Pose {
    pub positions: Vec<[f64; 3]>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClipKind {
    Gait,
    GestureHand,
    GestureHead,
}

#[derive(Debug, Error, PartialEq)]
pub enum ClipError {
    #[error("clip {0} has no frames")]
    NoFrames(String),
    #[error("clip {0} frame time must be positive, got {1}")]
    FrameTime(String, f64),
    #[error("clip {id} frame {frame} does not match the skeleton layout")]
    Layout { id: String, frame: usize },
    #[error(transparent)]
    Skeleton(#[from] SkeletonError),
}

/// A time series of joint configurations over a skeleton.
#[derive(Clone, Debug, PartialEq)]
pub struct MotionClip {
    pub id: String,
    pub kind: ClipKind,
    pub skeleton: Skeleton,
    pub frame_time: f64,
    pub loopable: bool,
    frames: Vec<JointConfig>,
}

impl MotionClip {
    pub fn new(
        id: impl Into<String>,
        kind: ClipKind,
        skeleton: Skeleton,
        frame_time: f64,
        loopable: bool,
        frames: Vec<JointConfig>,
    ) -> Result<Self, ClipError> {
        let id = id.into();
        if frames.is_empty() {
            return Err(ClipError::NoFrames(id));
        }
        if !(frame_time > 0.0 && frame_time.is_finite()) {
            return Err(ClipError::FrameTime(id, frame_time));
        }
        let n = skeleton.len();
        if let Some(frame) = frames
            .iter()
            .position(|f| f.rotations.len() != n || f.translations.len() != n || !f.is_finite())
        {
            return Err(ClipError::Layout { id, frame });
        }
        Ok(MotionClip {
            id,
            kind,
            skeleton,
            frame_time,
            loopable,
            frames,
        })
    }

    pub fn frames(&self) -> &[JointConfig] {
        &self.frames
    }

    pub fn frame_count(&self) -> usize {
        self.frames.len()
    }

    /// Playback length. A looping clip wraps from the last frame back to the
    /// first, so its period includes one extra interval.
    pub fn duration(&self) -> f64 {
        (self.frames.len() - 1) as f64 * self.frame_time
    }

    /// Samples the clip at time `t` (seconds, `t >= 0`).
    ///
    /// Rotations interpolate per channel along the shorter arc; translations
    /// interpolate linearly. With `looping`, `t` wraps modulo the duration,
    /// otherwise it clamps to the last frame.
    pub fn sample(&self, t: f64, looping: bool) -> JointConfig {
        let n = self.frames.len();
        let duration = self.duration();
        if n == 1 || duration <= 0.0 {
            return self.frames[0].clone();
        }
        let t = t.max(0.0);
        let t = if looping {
            t.rem_euclid(duration)
        } else if t >= duration {
            return self.frames[n - 1].clone();
        } else {
            t
        };
        let pos = t / self.frame_time;
        let i = (pos.floor() as usize).min(n - 2);
        let s = pos - i as f64;
        if s == 0.0 {
            return self.frames[i].clone();
        }
        interpolate(&self.frames[i], &self.frames[i + 1], s)
    }
}

/// Wraps an angle difference into (-180, 180].
pub fn wrap_degrees(d: f64) -> f64 {
    let w = (d + 180.0).rem_euclid(360.0) - 180.0;
    if w == -180.0 {
        180.0
    } else {
        w
    }
}

fn interpolate(a: &JointConfig, b: &JointConfig, s: f64) -> JointConfig {
    let rotations = a
        .rotations
        .iter()
        .zip(&b.rotations)
        .map(|(ra, rb)| std::array::from_fn(|k| ra[k] + s * wrap_degrees(rb[k] - ra[k])))
        .collect();
    let translations = a
        .translations
        .iter()
        .zip(&b.translations)
        .map(|(ta, tb)| std::array::from_fn(|k| ta[k] + s * (tb[k] - ta[k])))
        .collect();
    JointConfig {
        translations,
        rotations,
    }
}

/// Set of joints a layer is allowed to write.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct JointMask(BTreeSet<usize>);

impl JointMask {
    pub fn new(joints: impl IntoIterator<Item = usize>) -> Self {
        JointMask(joints.into_iter().collect())
    }

    pub fn all(skeleton: &Skeleton) -> Self {
        JointMask((0..skeleton.len()).collect())
    }

    /// Mask covering the named joints and all of their descendants.
    pub fn subtree(skeleton: &Skeleton, roots: &[&str]) -> Self {
        let mut set = BTreeSet::new();
        for (i, j) in skeleton.joints().iter().enumerate() {
            let named = roots.contains(&j.name.as_str());
            let inherited = j.parent.is_some_and(|p| set.contains(&p));
            if named || inherited {
                set.insert(i);
            }
        }
        JointMask(set)
    }

    pub fn contains(&self, joint: usize) -> bool {
        self.0.contains(&joint)
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.0.iter().copied()
    }

    pub fn max_index(&self) -> Option<usize> {
        self.0.last().copied()
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum OverlayError {
    #[error("mask references joint {joint} but the skeleton has {joints} joints")]
    MaskOutOfRange { joint: usize, joints: usize },
    #[error("base and layer configurations differ in joint count ({0} vs {1})")]
    Mismatch(usize, usize),
}

/// Blends `layer` over `base` on the masked joints:
/// `(1 - weight) * base + weight * layer`, per channel.
pub fn overlay(
    base: &JointConfig,
    layer: &JointConfig,
    mask: &JointMask,
    weight: f64,
) -> Result<JointConfig, OverlayError> {
    if base.len() != layer.len() {
        return Err(OverlayError::Mismatch(base.len(), layer.len()));
    }
    if let Some(joint) = mask.max_index().filter(|&j| j >= base.len()) {
        return Err(OverlayError::MaskOutOfRange {
            joint,
            joints: base.len(),
        });
    }
    let w = weight.clamp(0.0, 1.0);
    let mut out = base.clone();
    for j in mask.iter() {
        for k in 0..3 {
            out.rotations[j][k] = (1.0 - w) * base.rotations[j][k] + w * layer.rotations[j][k];
            out.translations[j][k] =
                (1.0 - w) * base.translations[j][k] + w * layer.translations[j][k];
        }
    }
    Ok(out)
}

/// Canonical JSON interchange form of a clip; frames are raw channel rows.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ClipDocument {
    pub id: String,
    pub kind: ClipKind,
    pub skeleton: Skeleton,
    pub frame_time: f64,
    pub loopable: bool,
    pub frames: Vec<Vec<f64>>,
}

impl From<&MotionClip> for ClipDocument {
    fn from(clip: &MotionClip) -> Self {
        ClipDocument {
            id: clip.id.clone(),
            kind: clip.kind,
            skeleton: clip.skeleton.clone(),
            frame_time: clip.frame_time,
            loopable: clip.loopable,
            frames: clip
                .frames
                .iter()
                .map(|f| clip.skeleton.to_channels(f))
                .collect(),
        }
    }
}

impl TryFrom<ClipDocument> for MotionClip {
    type Error = ClipError;

    fn try_from(doc: ClipDocument) -> Result<Self, Self::Error> {
        let frames = doc
            .frames
            .iter()
            .enumerate()
            .map(|(frame, row)| {
                doc.skeleton.from_channels(row).ok_or(ClipError::Layout {
                    id: doc.id.clone(),
                    frame,
                })
            })
            .collect::<Result<Vec<_>, _>>()?;
        MotionClip::new(
            doc.id,
            doc.kind,
            doc.skeleton,
            doc.frame_time,
            doc.loopable,
            frames,
        )
    }
}

impl Serialize for MotionClip {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        ClipDocument::from(self).serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for MotionClip {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let doc = ClipDocument::deserialize(deserializer)?;
        MotionClip::try_from(doc).map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_joint() -> Skeleton {
        use Channel::*;
        Skeleton::new(vec![
            Joint {
                name: "Hips".into(),
                parent: None,
                offset: [0.0; 3],
                channels: vec![Xposition, Yposition, Zposition, Zrotation, Xrotation, Yrotation],
                end_site: None,
            },
            Joint {
                name: "Neck".into(),
                parent: Some(0),
                offset: [0.0, 0.0, 0.5],
                channels: vec![Zrotation, Xrotation, Yrotation],
                end_site: Some([0.0, 0.0, 0.1]),
            },
        ])
        .unwrap()
    }

    fn clip_with_neck_z(angles: &[f64], looping: bool) -> MotionClip {
        let sk = two_joint();
        let frames = angles
            .iter()
            .map(|&a| {
                let mut c = sk.zero_config();
                c.rotations[1][2] = a;
                c
            })
            .collect();
        MotionClip::new("c", ClipKind::Gait, sk, 0.1, looping, frames).unwrap()
    }

    #[test]
    fn sample_at_zero_is_first_frame() {
        let clip = clip_with_neck_z(&[3.0, 10.0, 20.0], false);
        assert_eq!(clip.sample(0.0, false), clip.frames()[0]);
    }

    #[test]
    fn sample_midpoint() {
        let clip = clip_with_neck_z(&[0.0, 10.0], false);
        let c = clip.sample(0.05, false);
        assert!((c.rotations[1][2] - 5.0).abs() < 1e-12);
    }

    #[test]
    fn sample_wraps_when_looping() {
        let clip = clip_with_neck_z(&[0.0, 10.0, 30.0, 5.0], true);
        let d = clip.duration();
        let a = clip.sample(d + 0.1, true);
        let b = clip.sample(0.1, true);
        for k in 0..3 {
            assert!((a.rotations[1][k] - b.rotations[1][k]).abs() < 1e-9);
        }
    }

    #[test]
    fn sample_clamps_without_loop() {
        let clip = clip_with_neck_z(&[0.0, 10.0, 30.0], false);
        assert_eq!(clip.sample(5.0, false), clip.frames()[2]);
    }

    #[test]
    fn sample_takes_shortest_arc() {
        let clip = clip_with_neck_z(&[170.0, -170.0], false);
        let c = clip.sample(0.05, false);
        assert!((c.rotations[1][2] - 180.0).abs() < 1e-9);
    }

    #[test]
    fn overlay_weight_zero_is_base() {
        let sk = two_joint();
        let base = sk.zero_config();
        let mut layer = sk.zero_config();
        layer.rotations[1] = [10.0, 20.0, 30.0];
        let out = overlay(&base, &layer, &JointMask::all(&sk), 0.0).unwrap();
        assert_eq!(out, base);
        let out = overlay(&base, &layer, &JointMask::all(&sk), 1.0).unwrap();
        assert_eq!(out, layer);
    }

    #[test]
    fn overlay_masked_midpoint() {
        let sk = two_joint();
        let mut base = sk.zero_config();
        base.rotations[0] = [1.0, 2.0, 3.0];
        let mut layer = sk.zero_config();
        layer.rotations[1][2] = 30.0;
        layer.rotations[0] = [9.0, 9.0, 9.0];
        let out = overlay(&base, &layer, &JointMask::new([1]), 0.5).unwrap();
        assert_eq!(out.rotations[1][2], 15.0);
        assert_eq!(out.rotations[0], base.rotations[0]);
    }

    #[test]
    fn overlay_rejects_out_of_range_mask() {
        let sk = two_joint();
        let c = sk.zero_config();
        assert_eq!(
            overlay(&c, &c, &JointMask::new([5]), 0.5),
            Err(OverlayError::MaskOutOfRange {
                joint: 5,
                joints: 2
            })
        );
    }

    #[test]
    fn skeleton_rejects_forward_parent() {
        let mut joints: Vec<Joint> = two_joint().into();
        joints[1].parent = Some(1);
        assert!(matches!(
            Skeleton::new(joints),
            Err(SkeletonError::BadParent { index: 1, .. })
        ));
    }

    #[test]
    fn clip_json_round_trip() {
        let clip = clip_with_neck_z(&[0.0, 12.5, -3.25], true);
        let text = serde_json::to_string(&clip).unwrap();
        let back: MotionClip = serde_json::from_str(&text).unwrap();
        assert_eq!(back, clip);
    }

    #[test]
    fn subtree_mask_includes_descendants() {
        let sk = procedural::reference_skeleton();
        let mask = JointMask::subtree(&sk, &["RightShoulder"]);
        let names: Vec<_> = mask.iter().map(|i| sk.joints()[i].name.as_str()).collect();
        assert_eq!(names, ["RightShoulder", "RightElbow", "RightHand"]);
    }

    #[test]
    fn wrap_degrees_range() {
        assert_eq!(wrap_degrees(190.0), -170.0);
        assert_eq!(wrap_degrees(-180.0), 180.0);
        assert_eq!(wrap_degrees(540.0), 180.0);
    }
}
