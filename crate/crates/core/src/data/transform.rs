//! Root-centering, scale normalization and fixed-length resampling.

use serde::{Deserialize, Serialize};

use super::skeleton::{ActionSequence, SkeletonFrame};
use crate::error::{Error, Result};

/// Largest coordinate magnitude after normalization over the fitting set.
pub const NORMALIZED_BOUND: f64 = 0.9;

/// Scale statistics fitted on a training split.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormStats {
    /// Coordinates per joint.
    pub dims: usize,
    /// Multiplier applied after root-centering.
    pub scale: f64,
}

/// Result of [`normalize`].
#[derive(Clone, Debug, PartialEq)]
pub struct Normalized {
    pub sequence: ActionSequence,
    /// Set when the sequence was all zeros after centering and was left as is.
    pub degenerate: bool,
}

/// Subtracts joint 0 of frame 0 from every joint of every frame.
pub fn root_center(seq: &ActionSequence, dims: usize) -> Result<ActionSequence> {
    let first = seq
        .frames
        .first()
        .ok_or_else(|| Error::contract("cannot center an empty sequence"))?;
    if dims == 0 || first.len() % dims != 0 {
        return Err(Error::dim("root_center", &[first.len()], &[dims]));
    }
    let root: Vec<f64> = first[..dims].to_vec();
    let frames = seq
        .frames
        .iter()
        .map(|f| f.iter().enumerate().map(|(i, v)| v - root[i % dims]).collect())
        .collect();
    Ok(ActionSequence {
        frames,
        ..seq.clone()
    })
}

impl NormStats {
    /// Picks the scale that maps the largest centered magnitude to
    /// [`NORMALIZED_BOUND`]. An all-zero set gets scale 1.
    pub fn fit<'a>(sequences: impl IntoIterator<Item = &'a ActionSequence>, dims: usize) -> Result<Self> {
        let mut max_abs = 0.0f64;
        for s in sequences {
            let c = root_center(s, dims)?;
            for v in c.frames.iter().flatten() {
                max_abs = max_abs.max(v.abs());
            }
        }
        let scale = if max_abs > 0.0 {
            NORMALIZED_BOUND / max_abs
        } else {
            1.0
        };
        Ok(NormStats { dims, scale })
    }

    /// Maps a single normalized frame back to the source units, relative to the root.
    pub fn denormalize_frame(&self, frame: &[f64]) -> SkeletonFrame {
        frame.iter().map(|v| v / self.scale).collect()
    }

    /// Normalizes one frame against its own root joint.
    pub fn normalize_frame(&self, frame: &[f64]) -> Result<SkeletonFrame> {
        let seq = ActionSequence::new(0, vec![frame.to_vec()]);
        Ok(normalize(&seq, self)?.sequence.frames.remove(0))
    }
}

/// Root-centers, then scales by `stats.scale`.
pub fn normalize(seq: &ActionSequence, stats: &NormStats) -> Result<Normalized> {
    if seq.is_empty() {
        return Err(Error::contract("cannot normalize an empty sequence"));
    }
    let centered = root_center(seq, stats.dims)?;
    if centered.frames.iter().flatten().all(|&v| v == 0.0) {
        return Ok(Normalized {
            sequence: seq.clone(),
            degenerate: true,
        });
    }
    let frames = centered
        .frames
        .iter()
        .map(|f| f.iter().map(|v| v * stats.scale).collect())
        .collect();
    Ok(Normalized {
        sequence: ActionSequence {
            frames,
            ..centered
        },
        degenerate: false,
    })
}

/// Linear interpolation at `target` uniformly spaced times spanning the
/// first to the last input frame. Endpoints are reproduced exactly.
pub fn resample(seq: &ActionSequence, target: usize) -> Result<ActionSequence> {
    if seq.len() < 2 {
        return Err(Error::contract(format!(
            "resampling needs at least 2 frames, got {}",
            seq.len()
        )));
    }
    if target == 0 {
        return Err(Error::contract("cannot resample to zero frames"));
    }
    if target == seq.len() {
        return Ok(seq.clone());
    }
    let last = seq.len() - 1;
    let frames = (0..target)
        .map(|i| {
            if i == 0 {
                return seq.frames[0].clone();
            }
            if i == target - 1 {
                return seq.frames[last].clone();
            }
            let t = i as f64 * last as f64 / (target - 1) as f64;
            let k = (t.floor() as usize).min(last - 1);
            let w = t - k as f64;
            let (a, b) = (&seq.frames[k], &seq.frames[k + 1]);
            a.iter().zip(b).map(|(x, y)| (1.0 - w) * x + w * y).collect()
        })
        .collect();
    Ok(ActionSequence {
        frames,
        ..seq.clone()
    })
}
