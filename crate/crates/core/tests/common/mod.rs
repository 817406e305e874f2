#![allow(dead_code)]

use std::fmt::Write as _;

use fva_core::motion::BvhError;
use fva_core::motion::MotionClip;
use rand::seq::SliceRandom;
use rand::Rng;

const ROTATIONS: [&str; 3] = ["Xrotation", "Yrotation", "Zrotation"];

/// A random BVH document written directly as text: `joints` joints in a
/// random tree, `frames` rows of values with four decimals.
pub fn random_bvh<R: Rng>(rng: &mut R, joints: usize, frames: usize) -> String {
    let parents: Vec<Option<usize>> = (0..joints)
        .map(|i| (i > 0).then(|| rng.gen_range(0..i)))
        .collect();
    let mut channels = Vec::with_capacity(joints);
    for i in 0..joints {
        let mut rot = ROTATIONS.to_vec();
        rot.shuffle(rng);
        let mut c: Vec<&str> = Vec::new();
        if i == 0 || rng.gen_bool(0.1) {
            c.extend(["Xposition", "Yposition", "Zposition"]);
        }
        c.extend(rot);
        channels.push(c);
    }
    let mut out = String::from("HIERARCHY\n");
    write_joint(&mut out, rng, &parents, &channels, 0, 0);
    let total: usize = channels.iter().map(Vec::len).sum();
    let dt = [1.0 / 120.0, 1.0 / 60.0, 0.0333333, 0.04][rng.gen_range(0..4)];
    let _ = writeln!(out, "MOTION\nFrames: {frames}\nFrame Time: {dt}");
    for _ in 0..frames {
        let row: Vec<String> = (0..total)
            .map(|_| format!("{:.4}", rng.gen_range(-179.0..179.0)))
            .collect();
        let _ = writeln!(out, "{}", row.join(" "));
    }
    out
}

fn write_joint<R: Rng>(
    out: &mut String,
    rng: &mut R,
    parents: &[Option<usize>],
    channels: &[Vec<&str>],
    i: usize,
    depth: usize,
) {
    let pad = "\t".repeat(depth);
    let kw = if i == 0 { "ROOT" } else { "JOINT" };
    let _ = writeln!(out, "{pad}{kw} J{i}\n{pad}{{");
    let o: Vec<String> = (0..3).map(|_| format!("{:.3}", rng.gen_range(-20.0..20.0))).collect();
    let _ = writeln!(out, "{pad}\tOFFSET {}", o.join(" "));
    let _ = writeln!(out, "{pad}\tCHANNELS {} {}", channels[i].len(), channels[i].join(" "));
    let kids: Vec<usize> = (0..parents.len()).filter(|&c| parents[c] == Some(i)).collect();
    for c in &kids {
        write_joint(out, rng, parents, channels, *c, depth + 1);
    }
    if kids.is_empty() {
        let _ = writeln!(out, "{pad}\tEnd Site\n{pad}\t{{\n{pad}\t\tOFFSET 0 {:.2} 0\n{pad}\t}}", rng.gen_range(1.0..10.0));
    }
    let _ = writeln!(out, "{pad}}}");
}

pub const MINIMAL: &str = "HIERARCHY
ROOT Hips
{
  OFFSET 0 0 0
  CHANNELS 6 Xposition Yposition Zposition Zrotation Xrotation Yrotation
  JOINT Chest
  {
    OFFSET 0 10 0
    CHANNELS 3 Zrotation Xrotation Yrotation
    End Site
    {
      OFFSET 0 5 0
    }
  }
}
MOTION
Frames: 1
Frame Time: 0.0333333
0 0 0 0 0 0 0 0 0
";

pub type Diagnostic = fn(&BvhError) -> bool;

/// One document per malformed-input class, with a check for its diagnostic.
pub fn malformed_cases() -> Vec<(&'static str, String, Diagnostic)> {
    vec![
        (
            "syntax",
            MINIMAL.replace("OFFSET 0 10 0", "OFFSET 0 ten 0"),
            |e| matches!(e, BvhError::Syntax { line: 8, column: 14, .. }),
        ),
        (
            "unsupported channel",
            MINIMAL.replace("CHANNELS 3 Zrotation", "CHANNELS 3 Wrotation"),
            |e| matches!(e, BvhError::UnsupportedChannel { name, .. } if name == "Wrotation"),
        ),
        (
            "channel count",
            MINIMAL.replace("0 0 0 0 0 0 0 0 0", "0 0 0 0 0 0 0 0"),
            |e| matches!(e, BvhError::ChannelMismatch { expected: 9, found: 8, .. }),
        ),
        (
            "frame count",
            MINIMAL.replace("Frames: 1", "Frames: 3") + "0 0 0 0 0 0 0 0 0\n",
            |e| matches!(e, BvhError::FrameCountMismatch { declared: 3, found: 2 }),
        ),
        (
            "frame time",
            MINIMAL.replace("Frame Time: 0.0333333", "Frame Time: 0"),
            |e| matches!(e, BvhError::NonPositiveFrameTime { .. }),
        ),
    ]
}

/// Largest absolute difference between two clips' channel rows, or `None`
/// when their layouts differ.
pub fn clip_distance(a: &MotionClip, b: &MotionClip) -> Option<f64> {
    if a.skeleton.joints().len() != b.skeleton.joints().len() || a.frame_count() != b.frame_count() {
        return None;
    }
    let mut d: f64 = (a.frame_time - b.frame_time).abs();
    for (ja, jb) in a.skeleton.joints().iter().zip(b.skeleton.joints()) {
        if ja.name != jb.name || ja.parent != jb.parent || ja.channels != jb.channels {
            return None;
        }
        for k in 0..3 {
            d = d.max((ja.offset[k] - jb.offset[k]).abs());
        }
        match (ja.end_site, jb.end_site) {
            (Some(x), Some(y)) => (0..3).for_each(|k| d = d.max((x[k] - y[k]).abs())),
            (None, None) => {}
            _ => return None,
        }
    }
    for (fa, fb) in a.frames().iter().zip(b.frames()) {
        let (ra, rb) = (a.skeleton.to_channels(fa), b.skeleton.to_channels(fb));
        for (x, y) in ra.iter().zip(&rb) {
            d = d.max((x - y).abs());
        }
    }
    Some(d)
}
