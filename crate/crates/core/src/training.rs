//! Joint training: per step the autoencoder descends reconstruction loss,
//! the discriminator descends its adversarial loss on stop-gradient real codes
//! versus generated codes, then the generator descends adversarial plus
//! windowed consistency loss.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::{sigmoid, Graph};
use crate::data::{batches, Batch, Dataset};
use crate::error::{Error, Result};
use crate::model::{
    combine_generator_loss, consistency_loss_windowed, d_loss_from_logits, discriminator_logits_graph,
    g_adv_loss_from_logits, generator_graph, recon_loss_graph, ModelBundle, ModelConfig,
};
use crate::nn::Mlp;
use crate::optim::{Adam, AdamConfig};
use crate::rng;
use crate::tensor::Tensor;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub model: ModelConfig,
    pub epochs: usize,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub batch_size: usize,
    pub d_steps_per_g: usize,
    pub seed: u64,
    /// Steps between checkpoint callbacks; 0 disables them.
    pub checkpoint_every: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        let adam = AdamConfig::default();
        TrainConfig {
            model: ModelConfig::default(),
            epochs: 100,
            learning_rate: 1e-5,
            beta1: adam.beta1,
            beta2: adam.beta2,
            eps: adam.eps,
            batch_size: 64,
            d_steps_per_g: 1,
            seed: 0,
            checkpoint_every: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        if self.epochs == 0 || self.batch_size == 0 || self.d_steps_per_g == 0 {
            return Err(Error::Config("epochs, batch_size and d_steps_per_g must be positive".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config(format!("learning rate {} must be positive", self.learning_rate)));
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) || self.eps <= 0.0 {
            return Err(Error::Config("Adam needs betas in [0, 1) and eps > 0".into()));
        }
        Ok(())
    }

    pub fn adam(&self) -> AdamConfig {
        AdamConfig {
            lr: self.learning_rate,
            beta1: self.beta1,
            beta2: self.beta2,
            eps: self.eps,
        }
    }
}

/// Per-step diagnostics. `d_real`/`d_fake` are mean discriminator
/// probabilities from the last discriminator update of the step.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainMetrics {
    pub step: usize,
    pub epoch: usize,
    pub recon: f64,
    pub d_loss: f64,
    pub g_adv: f64,
    pub consistency: f64,
    pub d_real: f64,
    pub d_fake: f64,
}

impl TrainMetrics {
    fn values(&self) -> [(&'static str, f64); 6] {
        [
            ("recon", self.recon),
            ("d_loss", self.d_loss),
            ("g_adv", self.g_adv),
            ("consistency", self.consistency),
            ("d_real", self.d_real),
            ("d_fake", self.d_fake),
        ]
    }

    pub fn is_finite(&self) -> bool {
        self.values().iter().all(|(_, v)| v.is_finite())
    }
}

/// One Adam state per network.
#[derive(Clone, Debug, PartialEq)]
pub struct Optimizers {
    pub encoder: Adam,
    pub decoder: Adam,
    pub generator: Adam,
    pub discriminator: Adam,
}

impl Optimizers {
    pub fn new(config: AdamConfig, bundle: &ModelBundle) -> Self {
        let adam = |m: &Mlp| Adam::new(config, &m.parameters());
        Optimizers {
            encoder: adam(&bundle.encoder),
            decoder: adam(&bundle.decoder),
            generator: adam(&bundle.generator),
            discriminator: adam(&bundle.discriminator),
        }
    }

    pub fn is_finite(&self) -> bool {
        [&self.encoder, &self.decoder, &self.generator, &self.discriminator]
            .iter()
            .all(|a| {
                a.first_moments().iter().flatten().all(|v| v.is_finite())
                    && a.second_moments().iter().flatten().all(|v| v.is_finite())
            })
    }
}

/// Everything that evolves during training.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainState {
    pub bundle: ModelBundle,
    pub optimizers: Optimizers,
    /// Completed steps.
    pub step: usize,
}

impl TrainState {
    pub fn new(cfg: &TrainConfig) -> Result<Self> {
        cfg.validate()?;
        let bundle = ModelBundle::new(cfg.model.clone(), cfg.seed)?;
        let optimizers = Optimizers::new(cfg.adam(), &bundle);
        Ok(TrainState {
            bundle,
            optimizers,
            step: 0,
        })
    }
}

/// `rows × z_dim` standard-normal noise.
pub fn sample_z(rows: usize, z_dim: usize, rng: &mut rand_chacha::ChaCha8Rng) -> Result<Tensor> {
    Tensor::matrix(rows, z_dim, rng::standard_normal(rng, rows * z_dim))
}

fn apply(net: &mut Mlp, opt: &mut Adam, grads: &[Tensor]) -> Result<()> {
    let mut params = net.parameters_mut();
    opt.step(&mut params, grads)
}

/// Real latent sequences `M × (N·n)` and their first-frame codes `M × n`,
/// computed outside any graph so no gradient reaches the encoder.
pub fn real_codes(bundle: &ModelBundle, batch: &Batch) -> Result<(Tensor, Tensor)> {
    let cfg = &bundle.config;
    let (m, n) = (batch.size(), cfg.latent_dim);
    let codes = bundle.encode_frames(&batch.frame_rows()?)?;
    let h = codes.reshape(vec![m, cfg.seq_len * n])?;
    let c: Vec<f64> = (0..m).flat_map(|i| h.row(i)[..n].to_vec()).collect();
    Ok((h, Tensor::matrix(m, n, c)?))
}

fn generator_input(z: &Tensor, c: &Tensor, l: &Tensor) -> Result<Tensor> {
    let m = z.rows();
    let data: Vec<f64> = (0..m)
        .flat_map(|i| [z.row(i), c.row(i), l.row(i)].concat())
        .collect();
    Tensor::matrix(m, z.cols() + c.cols() + l.cols(), data)
}

fn check_batch(cfg: &ModelConfig, batch: &Batch) -> Result<()> {
    let want = [batch.size(), cfg.seq_len, cfg.frame_dim];
    if batch.frames.shape() != want || batch.one_hot.cols() != cfg.classes {
        return Err(Error::dim("train_step batch", batch.frames.shape(), &want));
    }
    Ok(())
}

/// Autoencoder update on every frame of the batch. Returns the loss before the update.
pub fn autoencoder_step(bundle: &mut ModelBundle, opts: &mut Optimizers, batch: &Batch) -> Result<f64> {
    let mut g = Graph::new();
    let enc = bundle.encoder.bind(&mut g, true);
    let dec = bundle.decoder.bind(&mut g, true);
    let x = g.constant(batch.frame_rows()?);
    let loss = recon_loss_graph(&mut g, &enc, &dec, x)?;
    g.backward(loss)?;
    let value = g.value(loss).item()?;
    apply(&mut bundle.encoder, &mut opts.encoder, &enc.grads(&g)?)?;
    apply(&mut bundle.decoder, &mut opts.decoder, &dec.grads(&g)?)?;
    Ok(value)
}

/// Discriminator update. Returns `(loss, mean D(real), mean D(fake))` before the update.
pub fn discriminator_step(
    bundle: &mut ModelBundle,
    opts: &mut Optimizers,
    real: &Tensor,
    c: &Tensor,
    l: &Tensor,
    z: &Tensor,
) -> Result<(f64, f64, f64)> {
    let fake = bundle.generator.eval(&generator_input(z, c, l)?)?;
    let mut g = Graph::new();
    let disc = bundle.discriminator.bind(&mut g, true);
    let (hr, hf) = (g.constant(real.clone()), g.constant(fake));
    let (cv, lv) = (g.constant(c.clone()), g.constant(l.clone()));
    let lr = discriminator_logits_graph(&mut g, &disc, hr, cv, lv)?;
    let lf = discriminator_logits_graph(&mut g, &disc, hf, cv, lv)?;
    let loss = d_loss_from_logits(&mut g, lr, lf)?;
    g.backward(loss)?;
    let p = |t: &Tensor| t.data().iter().map(|&x| sigmoid(x)).sum::<f64>() / t.numel() as f64;
    let out = (g.value(loss).item()?, p(g.value(lr)), p(g.value(lf)));
    apply(&mut bundle.discriminator, &mut opts.discriminator, &disc.grads(&g)?)?;
    Ok(out)
}

/// Generator update through a frozen discriminator. Returns `(adv, consistency)`
/// before the update.
#[allow(clippy::too_many_arguments)]
pub fn generator_step(
    bundle: &mut ModelBundle,
    opts: &mut Optimizers,
    c: &Tensor,
    l: &Tensor,
    z: &Tensor,
    window_start: usize,
    window_len: usize,
    lambda: f64,
) -> Result<(f64, f64)> {
    let n = bundle.config.latent_dim;
    let mut g = Graph::new();
    let gen = bundle.generator.bind(&mut g, true);
    let disc = bundle.discriminator.bind(&mut g, false);
    let (zv, cv, lv) = (g.constant(z.clone()), g.constant(c.clone()), g.constant(l.clone()));
    let h = generator_graph(&mut g, &gen, zv, cv, lv)?;
    let logits = discriminator_logits_graph(&mut g, &disc, h, cv, lv)?;
    let adv = g_adv_loss_from_logits(&mut g, logits)?;
    let cons = consistency_loss_windowed(&mut g, h, n, window_start, window_len)?;
    let total = combine_generator_loss(&mut g, adv, cons, lambda)?;
    g.backward(total)?;
    let out = (g.value(adv).item()?, g.value(cons).item()?);
    apply(&mut bundle.generator, &mut opts.generator, &gen.grads(&g)?)?;
    Ok(out)
}

fn non_finite(step: usize, what: &str, bundle: &ModelBundle, metrics: Option<&TrainMetrics>) -> Error {
    let nets = [
        ("encoder", bundle.encoder.is_finite()),
        ("decoder", bundle.decoder.is_finite()),
        ("generator", bundle.generator.is_finite()),
        ("discriminator", bundle.discriminator.is_finite()),
    ];
    let mut snapshot = format!("{what}; finite networks: {nets:?}");
    if let Some(m) = metrics {
        snapshot.push_str(&format!("; metrics: {:?}", m.values()));
    }
    Error::NonFinite { step, snapshot }
}

/// One AE → D → G step on `batch`. Noise and the consistency window are drawn
/// from streams keyed by `(cfg.seed, state.step)`.
pub fn train_step(state: &mut TrainState, batch: &Batch, cfg: &TrainConfig, epoch: usize) -> Result<TrainMetrics> {
    let mcfg = cfg.model.clone();
    check_batch(&mcfg, batch)?;
    let step = state.step;
    let m = batch.size();
    let mut noise = rng::indexed(cfg.seed, step as u64, rng::streams::NOISE);
    let mut window_rng = rng::indexed(cfg.seed, step as u64, rng::streams::WINDOW);

    let recon = autoencoder_step(&mut state.bundle, &mut state.optimizers, batch)?;

    let (real, c) = real_codes(&state.bundle, batch)?;
    let l = &batch.one_hot;
    let mut d_out = (0.0, 0.0, 0.0);
    for _ in 0..cfg.d_steps_per_g {
        let z = sample_z(m, mcfg.z_dim, &mut noise)?;
        d_out = discriminator_step(&mut state.bundle, &mut state.optimizers, &real, &c, l, &z)?;
    }

    let z = sample_z(m, mcfg.z_dim, &mut noise)?;
    let start = window_rng.random_range(0..=mcfg.seq_len - mcfg.window);
    let (g_adv, consistency) = generator_step(
        &mut state.bundle,
        &mut state.optimizers,
        &c,
        l,
        &z,
        start,
        mcfg.window,
        mcfg.lambda,
    )?;

    state.step += 1;
    let metrics = TrainMetrics {
        step,
        epoch,
        recon,
        d_loss: d_out.0,
        g_adv,
        consistency,
        d_real: d_out.1,
        d_fake: d_out.2,
    };
    if !metrics.is_finite() {
        return Err(non_finite(step, "non-finite loss", &state.bundle, Some(&metrics)));
    }
    if !state.bundle.is_finite() || !state.optimizers.is_finite() {
        return Err(non_finite(step, "non-finite parameter or moment", &state.bundle, Some(&metrics)));
    }
    Ok(metrics)
}

/// Result of a full run.
#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub state: TrainState,
    pub history: Vec<TrainMetrics>,
}

/// Trains for `cfg.epochs` epochs on a normalized dataset.
pub fn train(dataset: &Dataset, cfg: &TrainConfig) -> Result<TrainOutcome> {
    train_with(dataset, cfg, |_, _| Ok(()))
}

/// [`train`] with a callback after every step. The metrics are passed only
/// when the step falls on the checkpoint cadence.
pub fn train_with<F>(dataset: &Dataset, cfg: &TrainConfig, mut on_step: F) -> Result<TrainOutcome>
where
    F: FnMut(&TrainState, Option<&TrainMetrics>) -> Result<()>,
{
    cfg.validate()?;
    if dataset.is_empty() {
        return Err(Error::contract("cannot train on an empty dataset"));
    }
    dataset.validate()?;
    let mc = &cfg.model;
    if dataset.frame_dim() != mc.frame_dim || dataset.classes != mc.classes || dataset.seq_len() != Some(mc.seq_len) {
        return Err(Error::Config(format!(
            "dataset (d={}, K={}, N={:?}) does not match the model (d={}, K={}, N={})",
            dataset.frame_dim(),
            dataset.classes,
            dataset.seq_len(),
            mc.frame_dim,
            mc.classes,
            mc.seq_len
        )));
    }
    let batch_size = cfg.batch_size.min(dataset.len());
    let mut state = TrainState::new(cfg)?;
    let mut history = Vec::new();
    for epoch in 0..cfg.epochs {
        for batch in batches(dataset, batch_size, cfg.seed, epoch as u64)? {
            let metrics = train_step(&mut state, &batch, cfg, epoch)?;
            let due = cfg.checkpoint_every > 0 && state.step % cfg.checkpoint_every == 0;
            on_step(&state, due.then_some(&metrics))?;
            history.push(metrics);
        }
    }
    Ok(TrainOutcome { state, history })
}

/// Exponential moving average with smoothing `1 − 1/window`.
pub fn ema(values: &[f64], window: usize) -> Vec<f64> {
    let alpha = 1.0 / window.max(1) as f64;
    let mut out = Vec::with_capacity(values.len());
    let mut acc = None;
    for &v in values {
        let next = match acc {
            None => v,
            Some(a) => a + alpha * (v - a),
        };
        acc = Some(next);
        out.push(next);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::synth::{default_specs, synth_generate, SynthConfig};
    use crate::data::{normalize_dataset, Batch};

    fn small() -> (TrainConfig, Dataset) {
        let model = ModelConfig {
            seq_len: 8,
            window: 3,
            latent_dim: 4,
            z_dim: 4,
            encoder_hidden: vec![16],
            decoder_hidden: vec![16],
            generator_hidden: vec![32],
            discriminator_hidden: vec![32],
            ..ModelConfig::default()
        };
        let cfg = TrainConfig {
            model,
            epochs: 2,
            learning_rate: 1e-3,
            batch_size: 8,
            seed: 3,
            ..TrainConfig::default()
        };
        let raw = synth_generate(&default_specs(3, 0).unwrap(), &SynthConfig::default(), 8, 8, 11).unwrap();
        (cfg, normalize_dataset(&raw).unwrap().0)
    }

    fn delta(a: &Mlp, b: &Mlp) -> f64 {
        a.parameters()
            .iter()
            .zip(b.parameters())
            .flat_map(|(x, y)| x.data().iter().zip(y.data()).map(|(p, q)| (p - q).abs()).collect::<Vec<_>>())
            .fold(0.0, f64::max)
    }

    #[test]
    fn sample_z_statistics() {
        let mut rng = rng::stream(5, rng::streams::NOISE);
        let z = sample_z(1000, 100, &mut rng).unwrap();
        let mean = z.data().iter().sum::<f64>() / z.numel() as f64;
        let var = z.data().iter().map(|v| (v - mean).powi(2)).sum::<f64>() / z.numel() as f64;
        assert!(mean.abs() < 0.02, "mean {mean}");
        assert!((var - 1.0).abs() < 0.05, "var {var}");
        let mut again = rng::stream(5, rng::streams::NOISE);
        assert_eq!(sample_z(1000, 100, &mut again).unwrap(), z);
    }

    #[test]
    fn each_update_touches_only_its_network() {
        let (cfg, ds) = small();
        let batch = Batch::from_indices(&ds, &[0, 9, 17, 3]).unwrap();
        let mut state = TrainState::new(&cfg).unwrap();
        let before = state.bundle.clone();

        autoencoder_step(&mut state.bundle, &mut state.optimizers, &batch).unwrap();
        assert!(delta(&before.encoder, &state.bundle.encoder) > 0.0);
        assert!(delta(&before.decoder, &state.bundle.decoder) > 0.0);
        assert_eq!(before.generator, state.bundle.generator);
        assert_eq!(before.discriminator, state.bundle.discriminator);

        let after_ae = state.bundle.clone();
        let (real, c) = real_codes(&state.bundle, &batch).unwrap();
        let mut rng = rng::stream(0, rng::streams::NOISE);
        let z = sample_z(4, cfg.model.z_dim, &mut rng).unwrap();
        discriminator_step(&mut state.bundle, &mut state.optimizers, &real, &c, &batch.one_hot, &z).unwrap();
        assert!(delta(&after_ae.discriminator, &state.bundle.discriminator) > 0.0);
        assert_eq!(after_ae.encoder, state.bundle.encoder);
        assert_eq!(after_ae.decoder, state.bundle.decoder);
        assert_eq!(after_ae.generator, state.bundle.generator);

        let after_d = state.bundle.clone();
        generator_step(&mut state.bundle, &mut state.optimizers, &c, &batch.one_hot, &z, 2, 3, 0.01).unwrap();
        assert!(delta(&after_d.generator, &state.bundle.generator) > 0.0);
        assert_eq!(after_d.encoder, state.bundle.encoder);
        assert_eq!(after_d.decoder, state.bundle.decoder);
        assert_eq!(after_d.discriminator, state.bundle.discriminator);
    }

    #[test]
    fn zero_lambda_with_half_discriminator_is_pure_adversarial() {
        let (mut cfg, ds) = small();
        cfg.model.lambda = 0.0;
        let batch = Batch::from_indices(&ds, &[1, 2, 3]).unwrap();
        let mut state = TrainState::new(&cfg).unwrap();
        for layer_params in state.bundle.discriminator.parameters_mut() {
            layer_params.data_mut().iter_mut().for_each(|v| *v = 0.0);
        }
        let (_, c) = real_codes(&state.bundle, &batch).unwrap();
        let mut rng = rng::stream(0, rng::streams::NOISE);
        let z = sample_z(3, cfg.model.z_dim, &mut rng).unwrap();
        let before = state.bundle.generator.clone();
        let (adv, _) =
            generator_step(&mut state.bundle, &mut state.optimizers, &c, &batch.one_hot, &z, 0, 3, 0.0).unwrap();
        assert!((adv - std::f64::consts::LN_2).abs() < 1e-12);
        // A constant discriminator passes no gradient back, so λ = 0 leaves G unchanged.
        assert_eq!(before, state.bundle.generator);
    }

    #[test]
    fn training_is_deterministic_and_history_matches_steps() {
        let (cfg, ds) = small();
        let a = train(&ds, &cfg).unwrap();
        let b = train(&ds, &cfg).unwrap();
        assert_eq!(a.state, b.state);
        assert_eq!(a.history, b.history);
        assert_eq!(a.history.len(), a.state.step);
        assert_eq!(a.state.step, 2 * 3);
        for m in &a.history {
            assert!(m.d_real > 0.0 && m.d_real < 1.0 && m.d_fake > 0.0 && m.d_fake < 1.0);
        }
    }

    #[test]
    fn reconstruction_trend_falls_by_half() {
        let (mut cfg, ds) = small();
        cfg.epochs = 67;
        let out = train(&ds, &cfg).unwrap();
        let recon: Vec<f64> = out.history.iter().map(|m| m.recon).take(200).collect();
        assert_eq!(recon.len(), 200);
        let smooth = ema(&recon, 20);
        assert!(smooth[199] <= 0.5 * smooth[19], "{} vs {}", smooth[199], smooth[19]);
    }

    #[test]
    fn mismatched_dataset_is_rejected() {
        let (mut cfg, ds) = small();
        cfg.model.seq_len = 9;
        assert!(matches!(train(&ds, &cfg), Err(Error::Config(_))));
    }

    #[test]
    fn checkpoint_cadence() {
        let (mut cfg, ds) = small();
        cfg.checkpoint_every = 4;
        let mut due = vec![];
        train_with(&ds, &cfg, |s, m| {
            if m.is_some() {
                due.push(s.step);
            }
            Ok(())
        })
        .unwrap();
        assert_eq!(due, vec![4]);
    }
}
