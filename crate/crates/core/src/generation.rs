//! Conditional generation from a single initial frame, and chaining of
//! consecutive actions by re-encoding the last generated frame.

use serde::{Deserialize, Serialize};

use crate::data::{one_hot, ActionSequence};
use crate::error::{Error, Result};
use crate::model::{LatentSequence, ModelBundle};
use crate::rng;

/// Streams for per-segment noise start here; segment `k` uses `BASE + k`.
const SEGMENT_STREAM_BASE: u64 = 1000;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GenerationRequest {
    /// Normalized initial pose.
    pub initial: Vec<f64>,
    pub label: usize,
    /// Explicit noise; drawn from `seed` when absent.
    pub z: Option<Vec<f64>>,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChainRequest {
    pub initial: Vec<f64>,
    pub labels: Vec<usize>,
    /// One noise vector per segment; drawn from `seed` when absent.
    pub z: Option<Vec<Vec<f64>>>,
    pub seed: u64,
}

/// A decoded sequence together with the latent trajectory it came from.
#[derive(Clone, Debug, PartialEq)]
pub struct Generated {
    pub sequence: ActionSequence,
    pub latent: LatentSequence,
    /// Code of the initial pose.
    pub condition: Vec<f64>,
}

/// Noise for chain segment `k` (segment 0 is also what [`generate`] uses).
pub fn segment_noise(seed: u64, segment: usize, z_dim: usize) -> Vec<f64> {
    let mut r = rng::stream(seed, SEGMENT_STREAM_BASE + segment as u64);
    rng::standard_normal(&mut r, z_dim)
}

fn check_ready(bundle: &ModelBundle) -> Result<()> {
    if !bundle.is_finite() {
        return Err(Error::contract("model parameters are not finite"));
    }
    Ok(())
}

fn generate_one(bundle: &ModelBundle, initial: &[f64], label: usize, z: &[f64]) -> Result<Generated> {
    let cfg = &bundle.config;
    if label >= cfg.classes {
        return Err(Error::contract(format!("label {label} out of range for {} classes", cfg.classes)));
    }
    let condition = bundle.encode_frame(initial)?;
    let latent = bundle.generator_forward(z, &condition, &one_hot(label, cfg.classes)?)?;
    let frames = bundle.decode_sequence(&latent)?;
    Ok(Generated {
        sequence: ActionSequence::new(label, frames),
        latent,
        condition,
    })
}

pub fn generate_detailed(bundle: &ModelBundle, req: &GenerationRequest) -> Result<Generated> {
    check_ready(bundle)?;
    let z = match &req.z {
        Some(z) => z.clone(),
        None => segment_noise(req.seed, 0, bundle.config.z_dim),
    };
    generate_one(bundle, &req.initial, req.label, &z)
}

/// `N` decoded frames for the requested label, starting from `req.initial`.
pub fn generate(bundle: &ModelBundle, req: &GenerationRequest) -> Result<ActionSequence> {
    Ok(generate_detailed(bundle, req)?.sequence)
}

pub fn chain_detailed(bundle: &ModelBundle, req: &ChainRequest) -> Result<Vec<Generated>> {
    check_ready(bundle)?;
    if req.labels.is_empty() {
        return Err(Error::contract("a chain needs at least one label"));
    }
    if let Some(z) = &req.z {
        if z.len() != req.labels.len() {
            return Err(Error::contract(format!(
                "{} noise vectors for {} segments",
                z.len(),
                req.labels.len()
            )));
        }
    }
    let mut initial = req.initial.clone();
    let mut out = Vec::with_capacity(req.labels.len());
    for (k, &label) in req.labels.iter().enumerate() {
        let z = match &req.z {
            Some(z) => z[k].clone(),
            None => segment_noise(req.seed, k, bundle.config.z_dim),
        };
        let g = generate_one(bundle, &initial, label, &z)?;
        initial = g.sequence.frames.last().cloned().unwrap_or_default();
        out.push(g);
    }
    Ok(out)
}

/// One sequence per label; segment `k > 0` starts from the last decoded frame
/// of segment `k − 1`. Junctions are not smoothed.
pub fn chain(bundle: &ModelBundle, req: &ChainRequest) -> Result<Vec<ActionSequence>> {
    Ok(chain_detailed(bundle, req)?.into_iter().map(|g| g.sequence).collect())
}
