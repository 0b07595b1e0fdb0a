//! Post-training evaluation report.
//!
//! Every draw comes from one seeded stream, so a report is a pure function of
//! (model, datasets, config).

use std::collections::BTreeMap;

use rand::seq::IndexedRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::metrics::{
    classify_generated, diversity_metric, frame_distance, jerk_metric, junction_gap, mean, median, NearestCentroid,
};
use super::pca::PcaModel;
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::generation::{chain_detailed, generate_detailed, ChainRequest, GenerationRequest, Generated};
use crate::model::{LatentSequence, ModelBundle};
use crate::rng;

pub const REPORT_FORMAT: &str = "actgen-eval";
pub const REPORT_VERSION: u32 = 1;

/// Trial counts for each measurement.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    pub seed: u64,
    /// Generations classified for label fidelity.
    pub conditional_generations: usize,
    pub diversity_trials: usize,
    pub diversity_draws: usize,
    pub initial_pose_trials: usize,
    pub chain_trials: usize,
    /// Random dataset frames each junction gap is compared against.
    pub chain_reference_frames: usize,
    pub jerk_generations: usize,
    /// Seed of the untrained baseline model.
    pub baseline_seed: u64,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            seed: 0,
            conditional_generations: 300,
            diversity_trials: 50,
            diversity_draws: 10,
            initial_pose_trials: 50,
            chain_trials: 100,
            chain_reference_frames: 100,
            jerk_generations: 100,
            baseline_seed: 12345,
        }
    }
}

/// A 2-D latent trajectory for plotting.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub name: String,
    pub label: usize,
    pub points: Vec<[f64; 2]>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub format: String,
    pub version: u32,
    pub metrics: BTreeMap<String, f64>,
    pub trajectories: Vec<Trajectory>,
}

impl Report {
    pub fn metric(&self, name: &str) -> Result<f64> {
        self.metrics
            .get(name)
            .copied()
            .ok_or_else(|| Error::contract(format!("report has no metric {name}")))
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let r: Report = serde_json::from_str(text)?;
        if r.format != REPORT_FORMAT || r.version != REPORT_VERSION {
            return Err(Error::Config(format!("unsupported report {} v{}", r.format, r.version)));
        }
        Ok(r)
    }
}

/// Encoder codes of every frame of every sequence.
pub fn latent_points(bundle: &ModelBundle, ds: &Dataset) -> Result<Vec<Vec<f64>>> {
    let codes = bundle.encode_frames(&ds.frame_matrix()?)?;
    Ok((0..codes.rows()).map(|i| codes.row(i).to_vec()).collect())
}

/// PCA fitted on the encoder codes of real frames.
pub fn fit_latent_pca(bundle: &ModelBundle, ds: &Dataset) -> Result<PcaModel> {
    PcaModel::fit(&latent_points(bundle, ds)?)
}

struct Sampler<'a> {
    rng: ChaCha8Rng,
    data: &'a Dataset,
    z_dim: usize,
}

impl Sampler<'_> {
    fn sequence(&mut self) -> usize {
        self.rng.random_range(0..self.data.len())
    }

    fn initial(&mut self) -> Vec<f64> {
        let i = self.sequence();
        self.data.sequences[i].frames[0].clone()
    }

    fn frame(&mut self) -> &[f64] {
        let s = &self.data.sequences[self.sequence()];
        s.frames.choose(&mut self.rng).expect("non-empty sequence")
    }

    fn z(&mut self) -> Vec<f64> {
        rng::standard_normal(&mut self.rng, self.z_dim)
    }

    fn label(&mut self) -> usize {
        self.rng.random_range(0..self.data.classes)
    }
}

fn generate_with(bundle: &ModelBundle, initial: Vec<f64>, label: usize, z: Vec<f64>) -> Result<Generated> {
    generate_detailed(
        bundle,
        &GenerationRequest {
            initial,
            label,
            z: Some(z),
            seed: 0,
        },
    )
}

fn mean_pairwise(points: &[[f64; 2]]) -> f64 {
    let mut total = 0.0;
    let mut pairs = 0;
    for i in 0..points.len() {
        for j in i + 1..points.len() {
            total += frame_distance(&points[i], &points[j]);
            pairs += 1;
        }
    }
    total / pairs.max(1) as f64
}

fn label_accuracy(
    bundle: &ModelBundle,
    clf: &NearestCentroid,
    sampler: &mut Sampler,
    count: usize,
) -> Result<(f64, Vec<Option<f64>>)> {
    let k = bundle.config.classes;
    let mut out = Vec::with_capacity(count);
    for i in 0..count {
        let initial = sampler.initial();
        let z = sampler.z();
        out.push(generate_with(bundle, initial, i % k, z)?.sequence);
    }
    let acc = classify_generated(clf, &out)?;
    Ok((acc.overall, acc.per_class))
}

/// Runs every measurement. `train` fits the classifier, `held_out` supplies
/// initial poses, reference frames and the real-data PCA. Both must be
/// normalized with the model's statistics.
pub fn evaluate(bundle: &ModelBundle, train: &Dataset, held_out: &Dataset, cfg: &EvalConfig) -> Result<Report> {
    let mc = &bundle.config;
    for ds in [train, held_out] {
        if ds.frame_dim() != mc.frame_dim || ds.classes != mc.classes || ds.seq_len() != Some(mc.seq_len) {
            return Err(Error::Config("evaluation data does not match the model".into()));
        }
    }
    if cfg.diversity_draws < 2 || held_out.len() < 2 {
        return Err(Error::Config("evaluation needs at least 2 draws and 2 held-out sequences".into()));
    }
    let mut m = BTreeMap::new();
    let mut sampler = Sampler {
        rng: rng::stream(cfg.seed, rng::streams::EVAL),
        data: held_out,
        z_dim: mc.z_dim,
    };

    // Autoencoder quality.
    let frames = held_out.frame_matrix()?;
    let recon_mse = bundle.recon_loss(&frames)?;
    let d = mc.frame_dim as f64;
    let rows = frames.rows() as f64;
    let col_mean: Vec<f64> = (0..mc.frame_dim)
        .map(|j| (0..frames.rows()).map(|i| frames.row(i)[j]).sum::<f64>() / rows)
        .collect();
    let variance = (0..frames.rows())
        .map(|i| frames.row(i).iter().zip(&col_mean).map(|(x, m)| (x - m).powi(2)).sum::<f64>())
        .sum::<f64>()
        / (rows * d);
    let recon = bundle.decoder.eval(&bundle.encode_frames(&frames)?)?;
    let noise_floor = (0..frames.rows())
        .map(|i| frame_distance(frames.row(i), recon.row(i)))
        .sum::<f64>()
        / rows;
    m.insert("recon_mse".into(), recon_mse);
    m.insert("frame_variance".into(), variance);
    m.insert("recon_ratio".into(), recon_mse / variance);
    m.insert("recon_noise_floor".into(), noise_floor);

    // Label fidelity.
    let clf = NearestCentroid::fit(train)?;
    m.insert("classifier_real_accuracy".into(), clf.accuracy(&held_out.sequences)?);
    let (acc, per_class) = label_accuracy(bundle, &clf, &mut sampler, cfg.conditional_generations)?;
    m.insert("conditional_accuracy".into(), acc);
    for (k, a) in per_class.iter().enumerate() {
        if let Some(a) = a {
            m.insert(format!("conditional_accuracy_class{k}"), *a);
        }
    }
    let baseline = ModelBundle::new(mc.clone(), cfg.baseline_seed)?;
    let (base_acc, _) = label_accuracy(&baseline, &clf, &mut sampler, cfg.conditional_generations)?;
    m.insert("untrained_accuracy".into(), base_acc);
    m.insert("chance_accuracy".into(), 1.0 / mc.classes as f64);

    // Style diversity and shared start region.
    let pca = fit_latent_pca(bundle, held_out)?;
    let mid = mc.seq_len / 2;
    let mut diversities = Vec::new();
    let mut start_hits = 0usize;
    let mut trajectories = Vec::new();
    for trial in 0..cfg.diversity_trials {
        let initial = sampler.initial();
        let label = sampler.label();
        let mut decoded = Vec::new();
        let mut projected = Vec::new();
        for _ in 0..cfg.diversity_draws {
            let z = sampler.z();
            let g = generate_with(bundle, initial.clone(), label, z)?;
            projected.push(pca.project_trajectory(&g.latent)?);
            decoded.push(g.sequence.frames);
        }
        diversities.push(diversity_metric(&decoded)?);
        let firsts: Vec<[f64; 2]> = projected.iter().map(|p| p[0]).collect();
        let mids: Vec<[f64; 2]> = projected.iter().map(|p| p[mid]).collect();
        if mean_pairwise(&firsts) < mean_pairwise(&mids) {
            start_hits += 1;
        }
        if trial == 0 {
            let c = bundle.encode_frame(&initial)?;
            trajectories.push(Trajectory {
                name: "initial".into(),
                label,
                points: vec![pca.project(&c)?],
            });
            for (i, p) in projected.into_iter().enumerate() {
                trajectories.push(Trajectory {
                    name: format!("generated{i}"),
                    label,
                    points: p,
                });
            }
        }
    }
    let diversity = mean(&diversities);
    m.insert("diversity".into(), diversity);
    m.insert("diversity_ratio".into(), diversity / noise_floor);
    m.insert("start_region_fraction".into(), start_hits as f64 / cfg.diversity_trials.max(1) as f64);

    // Initial-pose control: same (z, l), two different starting poses.
    let mut pose_hits = 0usize;
    for _ in 0..cfg.initial_pose_trials {
        let a = sampler.sequence();
        let mut b = sampler.sequence();
        while b == a {
            b = sampler.sequence();
        }
        let (label, z) = (sampler.label(), sampler.z());
        let ga = generate_with(bundle, held_out.sequences[a].frames[0].clone(), label, z.clone())?;
        let gb = generate_with(bundle, held_out.sequences[b].frames[0].clone(), label, z)?;
        let (fa, fb) = (&ga.sequence.frames, &gb.sequence.frames);
        if frame_distance(&fa[0], &fb[0]) < frame_distance(&fa[mid], &fb[mid]) {
            pose_hits += 1;
        }
    }
    m.insert("initial_pose_fraction".into(), pose_hits as f64 / cfg.initial_pose_trials.max(1) as f64);

    // Chaining continuity.
    let mut chain_hits = 0usize;
    let mut gaps = Vec::new();
    for _ in 0..cfg.chain_trials {
        let initial = sampler.initial();
        let labels = vec![sampler.label(), sampler.label()];
        let z = vec![sampler.z(), sampler.z()];
        let segs = chain_detailed(
            bundle,
            &ChainRequest {
                initial,
                labels,
                z: Some(z),
                seed: 0,
            },
        )?;
        let gap = junction_gap(&segs[0].sequence, &segs[1].sequence)?;
        let last = segs[0].sequence.frames.last().expect("N >= 2").clone();
        let reference: Vec<f64> = (0..cfg.chain_reference_frames)
            .map(|_| frame_distance(&last, sampler.frame()))
            .collect();
        if gap < mean(&reference) {
            chain_hits += 1;
        }
        gaps.push(gap);
    }
    m.insert("chain_continuity_fraction".into(), chain_hits as f64 / cfg.chain_trials.max(1) as f64);
    m.insert("mean_junction_gap".into(), mean(&gaps));

    // Temporal smoothness and decoder output range.
    let (lo, hi) = held_out
        .sequences
        .iter()
        .flat_map(|s| s.frames.iter().flatten())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    let margin = 0.2 * (hi - lo);
    let mut jerks = Vec::new();
    let mut in_band = 0usize;
    for i in 0..cfg.jerk_generations {
        let initial = sampler.initial();
        let z = sampler.z();
        let g = generate_with(bundle, initial, i % mc.classes, z)?;
        jerks.push(jerk_metric(&g.sequence.frames)?);
        if g.sequence.frames.iter().flatten().all(|&v| v >= lo - margin && v <= hi + margin) {
            in_band += 1;
        }
    }
    m.insert("median_jerk".into(), median(&jerks).unwrap_or(0.0));
    m.insert("output_in_band_fraction".into(), in_band as f64 / cfg.jerk_generations.max(1) as f64);
    let real_jerks: Vec<f64> = held_out
        .sequences
        .iter()
        .map(|s| jerk_metric(&s.frames))
        .collect::<Result<_>>()?;
    m.insert("real_median_jerk".into(), median(&real_jerks).unwrap_or(0.0));

    // A few real trajectories in the same frame.
    for (k, idx) in held_out.indices_by_label().iter().enumerate() {
        if let Some(&i) = idx.first() {
            let h = bundle.encode_sequence(&held_out.sequences[i].frames)?;
            trajectories.push(Trajectory {
                name: format!("real{k}"),
                label: k,
                points: pca.project_trajectory(&h)?,
            });
        }
    }

    if let Some((name, v)) = m.iter().find(|(_, v)| !v.is_finite()) {
        return Err(Error::Degenerate(format!("metric {name} is {v}")));
    }
    Ok(Report {
        format: REPORT_FORMAT.into(),
        version: REPORT_VERSION,
        metrics: m,
        trajectories,
    })
}

/// 2-D latent trajectories of generations from one initial pose with
/// several noise draws, plus the initial pose itself.
pub fn style_trajectories(
    bundle: &ModelBundle,
    pca: &PcaModel,
    initial: &[f64],
    label: usize,
    draws: usize,
    seed: u64,
) -> Result<Vec<Trajectory>> {
    let mut r = rng::stream(seed, rng::streams::EVAL);
    let c = bundle.encode_frame(initial)?;
    let mut out = vec![Trajectory {
        name: "initial".into(),
        label,
        points: vec![pca.project(&c)?],
    }];
    for i in 0..draws {
        let z = rng::standard_normal(&mut r, bundle.config.z_dim);
        let g = generate_with(bundle, initial.to_vec(), label, z)?;
        out.push(Trajectory {
            name: format!("generated{i}"),
            label,
            points: pca.project_trajectory(&g.latent)?,
        });
    }
    Ok(out)
}

/// Projects a latent sequence for plotting.
pub fn trajectory_of(pca: &PcaModel, name: &str, label: usize, h: &LatentSequence) -> Result<Trajectory> {
    Ok(Trajectory {
        name: name.into(),
        label,
        points: pca.project_trajectory(h)?,
    })
}
