//! NTU RGB+D `.skeleton` text files.
//!
//! Layout, one item per line:
//!
//! ```text
//! <frame count>
//! per frame:
//!   <body count>
//!   per body:
//!     <bodyID clippedEdges handLeftConfidence handLeftState
//!      handRightConfidence handRightState isRestricted leanX leanY trackingState>
//!     <joint count>            (always 25)
//!     per joint:
//!       <x y z depthX depthY colorX colorY orientW orientX orientY orientZ trackingState>
//! ```
//!
//! Only the camera-space `x y z` of each joint is kept. The remaining nine
//! joint fields are checked to be numeric and dropped, so [`write_ntu_skeleton`]
//! emits zeros (and tracking state 2) for them.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::error::{Error, Result};

pub const NTU_JOINTS: usize = 25;
const BODY_FIELDS: usize = 10;
const JOINT_FIELDS: usize = 12;

#[derive(Clone, Debug, PartialEq)]
pub struct BodyMeta {
    pub body_id: u64,
    pub clipped_edges: i64,
    pub hand_left_confidence: i64,
    pub hand_left_state: i64,
    pub hand_right_confidence: i64,
    pub hand_right_state: i64,
    pub is_restricted: i64,
    pub lean_x: f64,
    pub lean_y: f64,
    pub tracking_state: i64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct NtuBody {
    pub meta: BodyMeta,
    /// Camera-space joint positions in meters.
    pub joints: Vec<[f64; 3]>,
}

#[derive(Clone, Debug, PartialEq, Default)]
pub struct NtuFrame {
    pub bodies: Vec<NtuBody>,
}

#[derive(Clone, Debug, PartialEq, Default)]
pub struct NtuRecording {
    pub frames: Vec<NtuFrame>,
}

impl NtuRecording {
    /// Per body id, the flattened `x y z` frames in which that body appears.
    pub fn body_sequences(&self) -> BTreeMap<u64, Vec<Vec<f64>>> {
        let mut out: BTreeMap<u64, Vec<Vec<f64>>> = BTreeMap::new();
        for frame in &self.frames {
            for body in &frame.bodies {
                out.entry(body.meta.body_id)
                    .or_default()
                    .push(body.joints.iter().flatten().copied().collect());
            }
        }
        out
    }

    /// Frames of the first tracked body (tracking state > 0) in file order.
    pub fn primary_sequence(&self) -> Option<Vec<Vec<f64>>> {
        let id = self
            .frames
            .iter()
            .flat_map(|f| &f.bodies)
            .find(|b| b.meta.tracking_state > 0)?
            .meta
            .body_id;
        self.body_sequences().remove(&id)
    }
}

struct Lines<'a> {
    inner: std::iter::Enumerate<std::str::Lines<'a>>,
    last: usize,
}

impl<'a> Lines<'a> {
    fn new(text: &'a str) -> Self {
        Lines {
            inner: text.lines().enumerate(),
            last: 0,
        }
    }

    fn next(&mut self, expect: &str) -> Result<(usize, Vec<&'a str>)> {
        match self.inner.next() {
            Some((i, line)) => {
                self.last = i + 1;
                Ok((i + 1, line.split_whitespace().collect()))
            }
            None => Err(Error::Parse {
                line: self.last + 1,
                msg: format!("unexpected end of file, expected {expect}"),
            }),
        }
    }
}

fn field<T: std::str::FromStr>(tok: &str, line: usize, what: &str) -> Result<T> {
    tok.parse().map_err(|_| Error::Parse {
        line,
        msg: format!("invalid {what} {tok:?}"),
    })
}

fn count(lines: &mut Lines, what: &str) -> Result<(usize, usize)> {
    let (ln, toks) = lines.next(what)?;
    match toks.as_slice() {
        [tok] => Ok((ln, field(tok, ln, what)?)),
        _ => Err(Error::Parse {
            line: ln,
            msg: format!("expected a single {what}, found {} fields", toks.len()),
        }),
    }
}

fn fields<'a>(lines: &mut Lines<'a>, what: &str, n: usize) -> Result<(usize, Vec<&'a str>)> {
    let (ln, toks) = lines.next(what)?;
    if toks.len() != n {
        return Err(Error::Parse {
            line: ln,
            msg: format!("{what} needs {n} fields, found {}", toks.len()),
        });
    }
    Ok((ln, toks))
}

pub fn parse_ntu_skeleton(text: &str) -> Result<NtuRecording> {
    let mut lines = Lines::new(text);
    let (_, frame_count) = count(&mut lines, "frame count")?;
    let mut frames = Vec::with_capacity(frame_count);
    for _ in 0..frame_count {
        let (_, body_count) = count(&mut lines, "body count")?;
        let mut bodies = Vec::with_capacity(body_count);
        for _ in 0..body_count {
            let (ln, t) = fields(&mut lines, "body metadata", BODY_FIELDS)?;
            let meta = BodyMeta {
                body_id: field(t[0], ln, "body id")?,
                clipped_edges: field(t[1], ln, "clippedEdges")?,
                hand_left_confidence: field(t[2], ln, "handLeftConfidence")?,
                hand_left_state: field(t[3], ln, "handLeftState")?,
                hand_right_confidence: field(t[4], ln, "handRightConfidence")?,
                hand_right_state: field(t[5], ln, "handRightState")?,
                is_restricted: field(t[6], ln, "isRestricted")?,
                lean_x: field(t[7], ln, "leanX")?,
                lean_y: field(t[8], ln, "leanY")?,
                tracking_state: field(t[9], ln, "trackingState")?,
            };
            let (ln, joint_count) = count(&mut lines, "joint count")?;
            if joint_count != NTU_JOINTS {
                return Err(Error::Parse {
                    line: ln,
                    msg: format!("expected {NTU_JOINTS} joints, found {joint_count}"),
                });
            }
            let mut joints = Vec::with_capacity(NTU_JOINTS);
            for _ in 0..NTU_JOINTS {
                let (ln, t) = fields(&mut lines, "joint line", JOINT_FIELDS)?;
                let mut vals = [0.0f64; JOINT_FIELDS];
                for (v, tok) in vals.iter_mut().zip(&t) {
                    *v = field(tok, ln, "joint coordinate")?;
                }
                if !vals[..3].iter().all(|v| v.is_finite()) {
                    return Err(Error::Parse {
                        line: ln,
                        msg: "non-finite joint coordinate".into(),
                    });
                }
                joints.push([vals[0], vals[1], vals[2]]);
            }
            bodies.push(NtuBody { meta, joints });
        }
        frames.push(NtuFrame { bodies });
    }
    for (i, line) in lines.inner {
        if !line.trim().is_empty() {
            return Err(Error::Parse {
                line: i + 1,
                msg: "trailing data after the last frame".into(),
            });
        }
    }
    Ok(NtuRecording { frames })
}

/// Canonical text form; `parse ∘ write` is the identity on recordings whose
/// joint coordinates are finite.
pub fn write_ntu_skeleton(rec: &NtuRecording) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{}", rec.frames.len());
    for frame in &rec.frames {
        let _ = writeln!(out, "{}", frame.bodies.len());
        for b in &frame.bodies {
            let m = &b.meta;
            let _ = writeln!(
                out,
                "{} {} {} {} {} {} {} {} {} {}",
                m.body_id,
                m.clipped_edges,
                m.hand_left_confidence,
                m.hand_left_state,
                m.hand_right_confidence,
                m.hand_right_state,
                m.is_restricted,
                m.lean_x,
                m.lean_y,
                m.tracking_state
            );
            let _ = writeln!(out, "{}", b.joints.len());
            for [x, y, z] in &b.joints {
                let _ = writeln!(out, "{x} {y} {z} 0 0 0 0 0 0 0 0 2");
            }
        }
    }
    out
}

/// Action class from an NTU file name (`S001C002P003R002A013.skeleton` → 12).
pub fn label_from_file_name(name: &str) -> Option<usize> {
    let stem = name.rsplit(['/', '\\']).next()?.split('.').next()?;
    let pos = stem.rfind('A')?;
    let digits = &stem[pos + 1..];
    if digits.len() != 3 || !digits.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    digits.parse::<usize>().ok()?.checked_sub(1)
}
