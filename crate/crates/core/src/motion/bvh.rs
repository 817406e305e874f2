use std::fmt::Write as _;

use thiserror::Error;

use super::{Channel, ClipKind, Joint, MotionClip, Skeleton};

/// Centimeter-to-meter factor applied to offsets and positions by [`parse_bvh`].
pub const CM_TO_M: f64 = 0.01;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BvhError {
    #[error("syntax error at {line}:{column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("unsupported channel `{name}` at {line}:{column}")]
    UnsupportedChannel {
        line: usize,
        column: usize,
        name: String,
    },
    #[error("frame on line {line} has {found} values, expected {expected}")]
    ChannelMismatch {
        line: usize,
        expected: usize,
        found: usize,
    },
    #[error("header declares {declared} frames but {found} were provided")]
    FrameCountMismatch { declared: usize, found: usize },
    #[error("frame time must be positive, got {value} on line {line}")]
    NonPositiveFrameTime { line: usize, value: f64 },
}

#[derive(Clone, Copy, Debug)]
struct Token<'a> {
    text: &'a str,
    line: usize,
    column: usize,
}

struct Parser<'a> {
    tokens: Vec<Token<'a>>,
    pos: usize,
    scale: f64,
    joints: Vec<Joint>,
}

fn tokenize(text: &str) -> Vec<Token<'_>> {
    let mut out = Vec::new();
    for (li, line) in text.lines().enumerate() {
        let mut start = None;
        for (ci, ch) in line.char_indices().chain(std::iter::once((line.len(), ' '))) {
            if ch.is_whitespace() {
                if let Some(s) = start.take() {
                    out.push(Token {
                        text: &line[s..ci],
                        line: li + 1,
                        column: s + 1,
                    });
                }
            } else if start.is_none() {
                start = Some(ci);
            }
        }
    }
    out
}

impl<'a> Parser<'a> {
    fn eof_error(&self, expected: &str) -> BvhError {
        let (line, column) = self
            .tokens
            .last()
            .map(|t| (t.line, t.column + t.text.len()))
            .unwrap_or((1, 1));
        BvhError::Syntax {
            line,
            column,
            message: format!("unexpected end of input, expected {expected}"),
        }
    }

    fn next(&mut self, expected: &str) -> Result<Token<'a>, BvhError> {
        let t = self
            .tokens
            .get(self.pos)
            .copied()
            .ok_or_else(|| self.eof_error(expected))?;
        self.pos += 1;
        Ok(t)
    }

    fn expect(&mut self, word: &str) -> Result<Token<'a>, BvhError> {
        let t = self.next(word)?;
        if t.text != word {
            return Err(syntax(t, format!("expected `{word}`, found `{}`", t.text)));
        }
        Ok(t)
    }

    fn number(&mut self, what: &str) -> Result<f64, BvhError> {
        let t = self.next(what)?;
        parse_float(t, what)
    }

    fn offset(&mut self) -> Result<[f64; 3], BvhError> {
        self.expect("OFFSET")?;
        let mut v = [0.0; 3];
        for c in &mut v {
            *c = self.number("offset component")? * self.scale;
        }
        Ok(v)
    }

    fn joint(&mut self, parent: Option<usize>) -> Result<(), BvhError> {
        let name = self.next("joint name")?;
        self.expect("{")?;
        let offset = self.offset()?;
        let kw = self.expect("CHANNELS")?;
        let count_tok = self.next("channel count")?;
        let count: usize = count_tok
            .text
            .parse()
            .map_err(|_| syntax(count_tok, format!("invalid channel count `{}`", count_tok.text)))?;
        if count != 3 && count != 6 {
            return Err(syntax(count_tok, format!("expected 3 or 6 channels, found {count}")));
        }
        let mut channels = Vec::with_capacity(count);
        for _ in 0..count {
            let t = self.next("channel name")?;
            let c = Channel::parse(t.text).ok_or_else(|| BvhError::UnsupportedChannel {
                line: t.line,
                column: t.column,
                name: t.text.to_string(),
            })?;
            channels.push(c);
        }
        let rotations = channels.iter().filter(|c| c.is_rotation()).count();
        let distinct = channels
            .iter()
            .enumerate()
            .all(|(i, c)| !channels[..i].contains(c));
        if rotations != 3 || !distinct {
            return Err(syntax(kw, "channels must include each rotation axis exactly once".into()));
        }
        let index = self.joints.len();
        self.joints.push(Joint {
            name: name.text.to_string(),
            parent,
            offset,
            channels,
            end_site: None,
        });
        loop {
            let t = self.next("`JOINT`, `End` or `}`")?;
            match t.text {
                "JOINT" => self.joint(Some(index))?,
                "End" => {
                    self.expect("Site")?;
                    self.expect("{")?;
                    let off = self.offset()?;
                    self.expect("}")?;
                    if self.joints[index].end_site.replace(off).is_some() {
                        return Err(syntax(t, "joint has more than one End Site".into()));
                    }
                }
                "}" => return Ok(()),
                other => {
                    return Err(syntax(t, format!("expected `JOINT`, `End` or `}}`, found `{other}`")))
                }
            }
        }
    }
}

fn syntax(t: Token<'_>, message: String) -> BvhError {
    BvhError::Syntax {
        line: t.line,
        column: t.column,
        message,
    }
}

fn parse_float(t: Token<'_>, what: &str) -> Result<f64, BvhError> {
    t.text
        .parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| syntax(t, format!("invalid {what} `{}`", t.text)))
}

/// Parses a BVH document, converting centimeters to meters.
pub fn parse_bvh(text: &str) -> Result<(Skeleton, MotionClip), BvhError> {
    parse_bvh_with_scale(text, CM_TO_M)
}

/// Parses a BVH document, multiplying offsets and position channels by `scale`.
///
/// The returned clip has kind [`ClipKind::Gait`], is marked loopable and takes
/// its id from the root joint name; callers relabel as needed.
pub fn parse_bvh_with_scale(text: &str, scale: f64) -> Result<(Skeleton, MotionClip), BvhError> {
    let mut p = Parser {
        tokens: tokenize(text),
        pos: 0,
        scale,
        joints: Vec::new(),
    };
    p.expect("HIERARCHY")?;
    p.expect("ROOT")?;
    p.joint(None)?;
    p.expect("MOTION")?;
    p.expect("Frames:")?;
    let frames_tok = p.next("frame count")?;
    let declared: usize = frames_tok
        .text
        .parse()
        .map_err(|_| syntax(frames_tok, format!("invalid frame count `{}`", frames_tok.text)))?;
    p.expect("Frame")?;
    p.expect("Time:")?;
    let ft_tok = p.next("frame time")?;
    let frame_time = parse_float(ft_tok, "frame time")?;
    if frame_time <= 0.0 {
        return Err(BvhError::NonPositiveFrameTime {
            line: ft_tok.line,
            value: frame_time,
        });
    }

    let skeleton = Skeleton::new(std::mem::take(&mut p.joints)).map_err(|e| BvhError::Syntax {
        line: 1,
        column: 1,
        message: e.to_string(),
    })?;
    let expected = skeleton.channel_count();
    let position_channel: Vec<bool> = skeleton
        .joints()
        .iter()
        .flat_map(|j| j.channels.iter().map(|c| !c.is_rotation()))
        .collect();

    let data = &p.tokens[p.pos..];
    let mut frames = Vec::with_capacity(declared);
    let mut i = 0;
    while i < data.len() {
        let line = data[i].line;
        let end = data[i..]
            .iter()
            .position(|t| t.line != line)
            .map_or(data.len(), |n| i + n);
        let row = &data[i..end];
        if row.len() != expected {
            return Err(BvhError::ChannelMismatch {
                line,
                expected,
                found: row.len(),
            });
        }
        let values = row
            .iter()
            .zip(&position_channel)
            .map(|(t, &is_pos)| parse_float(*t, "channel value").map(|v| if is_pos { v * scale } else { v }))
            .collect::<Result<Vec<_>, _>>()?;
        frames.push(skeleton.from_channels(&values).expect("row length checked"));
        i = end;
    }
    if frames.len() != declared {
        return Err(BvhError::FrameCountMismatch {
            declared,
            found: frames.len(),
        });
    }
    let id = skeleton.joints()[0].name.clone();
    let clip = MotionClip::new(id, ClipKind::Gait, skeleton.clone(), frame_time, true, frames)
        .map_err(|e| BvhError::Syntax {
            line: ft_tok.line,
            column: ft_tok.column,
            message: e.to_string(),
        })?;
    Ok((skeleton, clip))
}

fn write_joint(
    out: &mut String,
    joints: &[Joint],
    children: &[Vec<usize>],
    i: usize,
    depth: usize,
    scale: f64,
) {
    let pad = "  ".repeat(depth);
    let j = &joints[i];
    let kw = if j.parent.is_none() { "ROOT" } else { "JOINT" };
    let _ = writeln!(out, "{pad}{kw} {}", j.name);
    let _ = writeln!(out, "{pad}{{");
    let o = j.offset;
    let _ = writeln!(out, "{pad}  OFFSET {} {} {}", o[0] / scale, o[1] / scale, o[2] / scale);
    let names: Vec<_> = j.channels.iter().map(|c| c.name()).collect();
    let _ = writeln!(out, "{pad}  CHANNELS {} {}", names.len(), names.join(" "));
    for &c in &children[i] {
        write_joint(out, joints, children, c, depth + 1, scale);
    }
    if let Some(e) = j.end_site {
        let _ = writeln!(out, "{pad}  End Site");
        let _ = writeln!(out, "{pad}  {{");
        let _ = writeln!(out, "{pad}    OFFSET {} {} {}", e[0] / scale, e[1] / scale, e[2] / scale);
        let _ = writeln!(out, "{pad}  }}");
    }
    let _ = writeln!(out, "{pad}}}");
}

/// Serializes a clip as BVH. Offsets and positions are divided by `scale`,
/// so `write_bvh(clip, CM_TO_M)` emits centimeters.
pub fn write_bvh(clip: &MotionClip, scale: f64) -> String {
    let sk = &clip.skeleton;
    let mut out = String::from("HIERARCHY\n");
    let joints = sk.joints();
    let children: Vec<Vec<usize>> = (0..joints.len())
        .map(|i| (0..joints.len()).filter(|&c| joints[c].parent == Some(i)).collect())
        .collect();
    write_joint(&mut out, joints, &children, 0, 0, scale);
    let _ = writeln!(out, "MOTION");
    let _ = writeln!(out, "Frames: {}", clip.frame_count());
    let _ = writeln!(out, "Frame Time: {}", clip.frame_time);
    let position_channel: Vec<bool> = joints
        .iter()
        .flat_map(|j| j.channels.iter().map(|c| !c.is_rotation()))
        .collect();
    for frame in clip.frames() {
        let row: Vec<String> = sk
            .to_channels(frame)
            .iter()
            .zip(&position_channel)
            .map(|(v, &is_pos)| if is_pos { v / scale } else { *v }.to_string())
            .collect();
        let _ = writeln!(out, "{}", row.join(" "));
    }
    out
}
