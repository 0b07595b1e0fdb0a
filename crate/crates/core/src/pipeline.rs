//! Synthetic data → normalization → training → checkpoint → evaluation.

use serde::{Deserialize, Serialize};

use crate::analysis::{evaluate, EvalConfig, Report};
use crate::checkpoint::Checkpoint;
use crate::data::synth::{default_specs, synth_generate, SynthConfig};
use crate::data::{apply_normalization, normalize_dataset, Dataset, NormStats};
use crate::error::{Error, Result};
use crate::training::{train_with, TrainConfig, TrainMetrics, TrainState};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub per_class: usize,
    pub held_out_per_class: usize,
    pub data_seed: u64,
    pub held_out_seed: u64,
    pub train: TrainConfig,
    pub eval: EvalConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            per_class: 300,
            held_out_per_class: 100,
            data_seed: 7,
            held_out_seed: 8,
            train: TrainConfig::default(),
            eval: EvalConfig::default(),
        }
    }
}

/// Normalized training data plus what a checkpoint needs to reuse it.
#[derive(Clone, Debug)]
pub struct Prepared {
    pub dataset: Dataset,
    pub stats: NormStats,
    /// Mean normalized first frame.
    pub default_initial: Vec<f64>,
}

pub fn prepare(raw: &Dataset) -> Result<Prepared> {
    if raw.is_empty() {
        return Err(Error::contract("cannot prepare an empty dataset"));
    }
    let (dataset, stats) = normalize_dataset(raw)?;
    let d = dataset.frame_dim();
    let mut default_initial = vec![0.0; d];
    for s in &dataset.sequences {
        for (a, v) in default_initial.iter_mut().zip(&s.frames[0]) {
            *a += v / dataset.len() as f64;
        }
    }
    Ok(Prepared {
        dataset,
        stats,
        default_initial,
    })
}

/// Trains on `prepared`, passing every cadence checkpoint to `on_checkpoint`.
pub fn train_checkpointed<F>(
    prepared: &Prepared,
    cfg: &TrainConfig,
    mut on_checkpoint: F,
) -> Result<(Checkpoint, Vec<TrainMetrics>)>
where
    F: FnMut(&Checkpoint) -> Result<()>,
{
    let snapshot = |state: &TrainState| Checkpoint::new(state, Some(cfg), prepared.stats, prepared.default_initial.clone());
    let out = train_with(&prepared.dataset, cfg, |state, due| {
        if due.is_some() {
            on_checkpoint(&snapshot(state)?)?;
        }
        Ok(())
    })?;
    Ok((snapshot(&out.state)?, out.history))
}

pub struct PipelineOutput {
    pub checkpoint: Checkpoint,
    pub report: Report,
    pub history: Vec<TrainMetrics>,
    pub train: Dataset,
    pub held_out: Dataset,
}

/// Builds train and held-out synthetic sets from different seeds.
pub fn synthetic_split(cfg: &PipelineConfig) -> Result<(Dataset, Dataset)> {
    let m = &cfg.train.model;
    let synth = SynthConfig::default();
    if m.frame_dim != synth.joints * synth.dims {
        return Err(Error::Config(format!(
            "the synthetic skeleton has frame dim {}, model expects {}",
            synth.joints * synth.dims,
            m.frame_dim
        )));
    }
    let specs = default_specs(m.classes, cfg.data_seed)?;
    let train = synth_generate(&specs, &synth, cfg.per_class, m.seq_len, cfg.data_seed)?;
    let held = synth_generate(&specs, &synth, cfg.held_out_per_class, m.seq_len, cfg.held_out_seed)?;
    Ok((train, held))
}

/// The whole pipeline on synthetic data.
pub fn run(cfg: &PipelineConfig) -> Result<PipelineOutput> {
    let (raw_train, raw_held) = synthetic_split(cfg)?;
    let prepared = prepare(&raw_train)?;
    let held_out = apply_normalization(&raw_held, &prepared.stats)?;
    let (checkpoint, history) = train_checkpointed(&prepared, &cfg.train, |_| Ok(()))?;
    let bundle = checkpoint.bundle()?;
    let report = evaluate(&bundle, &prepared.dataset, &held_out, &cfg.eval)?;
    Ok(PipelineOutput {
        checkpoint,
        report,
        history,
        train: prepared.dataset,
        held_out,
    })
}
