//! Autoencoder + conditional GAN over latent frame sequences.
//!
//! Latent sequences are `n × N` (column `j` is the code of frame `j`). On a
//! graph, a batch of latent sequences is an `M × (N·n)` matrix in
//! frame-major order: row `i`, columns `j·n .. (j+1)·n` hold frame `j` of
//! sequence `i`. Generator output and discriminator input use that same
//! flat order.

use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::autodiff::{Activation, Graph, Var};
use crate::error::{Error, Result};
use crate::nn::{BoundMlp, Mlp};
use crate::rng;
use crate::tensor::Tensor;

/// Floor applied inside `log` when losses are fed probabilities.
pub const LOG_FLOOR: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    /// Frame vector length (joints × coords).
    pub frame_dim: usize,
    /// Latent code length per frame.
    pub latent_dim: usize,
    /// Frames per sequence.
    pub seq_len: usize,
    pub classes: usize,
    pub z_dim: usize,
    /// Weight of the consistency term in the generator objective.
    pub lambda: f64,
    /// Consistency window length.
    pub window: usize,
    pub encoder_hidden: Vec<usize>,
    pub decoder_hidden: Vec<usize>,
    pub generator_hidden: Vec<usize>,
    pub discriminator_hidden: Vec<usize>,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            frame_dim: 10,
            latent_dim: 8,
            seq_len: 32,
            classes: 3,
            z_dim: 16,
            lambda: 0.01,
            window: 8,
            encoder_hidden: vec![128, 64],
            decoder_hidden: vec![64, 128],
            generator_hidden: vec![256, 256],
            discriminator_hidden: vec![256, 128],
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        let dims = [
            ("frame_dim", self.frame_dim),
            ("latent_dim", self.latent_dim),
            ("seq_len", self.seq_len),
            ("classes", self.classes),
            ("z_dim", self.z_dim),
        ];
        for (name, v) in dims {
            if v == 0 {
                return Err(Error::Config(format!("{name} must be positive")));
            }
        }
        if self.seq_len < 2 {
            return Err(Error::Config("seq_len must be at least 2".into()));
        }
        if self.window < 2 || self.window > self.seq_len {
            return Err(Error::Config(format!(
                "window {} must lie in [2, seq_len={}]",
                self.window, self.seq_len
            )));
        }
        if !(0.0..=1.0).contains(&self.lambda) {
            return Err(Error::Config(format!("lambda {} outside [0, 1]", self.lambda)));
        }
        let hidden = [
            &self.encoder_hidden,
            &self.decoder_hidden,
            &self.generator_hidden,
            &self.discriminator_hidden,
        ];
        if hidden.iter().any(|h| h.contains(&0)) {
            return Err(Error::Config("hidden widths must be positive".into()));
        }
        Ok(())
    }

    /// Default window: a quarter of the sequence, at least 2 frames.
    pub fn default_window(seq_len: usize) -> usize {
        (seq_len / 4).max(2).min(seq_len)
    }

    pub fn generator_input_dim(&self) -> usize {
        self.z_dim + self.latent_dim + self.classes
    }

    pub fn sequence_code_dim(&self) -> usize {
        self.latent_dim * self.seq_len
    }

    pub fn discriminator_input_dim(&self) -> usize {
        self.sequence_code_dim() + self.latent_dim + self.classes
    }
}

/// Per-frame latent codes of one sequence, `n × N`.
#[derive(Clone, Debug, PartialEq)]
pub struct LatentSequence {
    values: Tensor,
}

impl LatentSequence {
    /// From `N` codes of length `n`.
    pub fn from_codes(codes: &[Vec<f64>]) -> Result<Self> {
        let frames = codes.len();
        let n = codes.first().map_or(0, Vec::len);
        if frames == 0 || n == 0 || codes.iter().any(|c| c.len() != n) {
            return Err(Error::contract("latent sequence needs equally sized non-empty codes"));
        }
        let mut data = vec![0.0; n * frames];
        for (j, code) in codes.iter().enumerate() {
            for (r, &v) in code.iter().enumerate() {
                data[r * frames + j] = v;
            }
        }
        let values = Tensor::matrix(n, frames, data)?;
        if !values.is_finite() {
            return Err(Error::contract("latent sequence must be finite"));
        }
        Ok(LatentSequence { values })
    }

    /// From the frame-major flat layout used on graphs.
    pub fn from_frame_major(latent_dim: usize, flat: &[f64]) -> Result<Self> {
        if latent_dim == 0 || !flat.len().is_multiple_of(latent_dim) {
            return Err(Error::dim("latent sequence", &[flat.len()], &[latent_dim]));
        }
        let codes: Vec<Vec<f64>> = flat.chunks(latent_dim).map(<[f64]>::to_vec).collect();
        LatentSequence::from_codes(&codes)
    }

    /// The `n × N` matrix.
    pub fn values(&self) -> &Tensor {
        &self.values
    }

    pub fn latent_dim(&self) -> usize {
        self.values.shape()[0]
    }

    pub fn len(&self) -> usize {
        self.values.shape()[1]
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        let frames = self.len();
        (0..self.latent_dim())
            .map(|r| self.values.data()[r * frames + j])
            .collect()
    }

    pub fn columns(&self) -> Vec<Vec<f64>> {
        (0..self.len()).map(|j| self.column(j)).collect()
    }

    pub fn to_frame_major(&self) -> Vec<f64> {
        self.columns().concat()
    }
}

/// The four networks and the configuration they were built for.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelBundle {
    pub config: ModelConfig,
    pub encoder: Mlp,
    pub decoder: Mlp,
    pub generator: Mlp,
    pub discriminator: Mlp,
}

fn stack(input: usize, hidden: &[usize], output: usize, out_act: Activation) -> (Vec<usize>, Vec<Activation>) {
    let mut dims = vec![input];
    dims.extend_from_slice(hidden);
    dims.push(output);
    let mut acts = vec![Activation::Relu; hidden.len()];
    acts.push(out_act);
    (dims, acts)
}

impl ModelConfig {
    /// Layer dims and activations for (encoder, decoder, generator, discriminator).
    pub fn architectures(&self) -> [(Vec<usize>, Vec<Activation>); 4] {
        [
            stack(self.frame_dim, &self.encoder_hidden, self.latent_dim, Activation::Tanh),
            stack(self.latent_dim, &self.decoder_hidden, self.frame_dim, Activation::Linear),
            stack(
                self.generator_input_dim(),
                &self.generator_hidden,
                self.sequence_code_dim(),
                Activation::Linear,
            ),
            stack(
                self.discriminator_input_dim(),
                &self.discriminator_hidden,
                1,
                Activation::Sigmoid,
            ),
        ]
    }
}

fn check_len(op: &'static str, got: usize, want: usize) -> Result<()> {
    if got == want {
        Ok(())
    } else {
        Err(Error::dim(op, &[got], &[want]))
    }
}

/// Validates a one-hot label vector of length `classes`.
pub fn check_one_hot(l: &[f64], classes: usize) -> Result<usize> {
    check_len("one-hot label", l.len(), classes)?;
    let ones: Vec<usize> = (0..l.len()).filter(|&i| l[i] == 1.0).collect();
    let zeros = l.iter().filter(|&&v| v == 0.0).count();
    match ones.as_slice() {
        [k] if zeros == classes - 1 => Ok(*k),
        _ => Err(Error::contract(format!("label {l:?} is not one-hot"))),
    }
}

impl ModelBundle {
    pub fn new(config: ModelConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut seeds = rng::stream(seed, rng::streams::INIT);
        let [enc, dec, gen, disc] = config.architectures();
        let mut build = |(dims, acts): (Vec<usize>, Vec<Activation>)| Mlp::init(&dims, &acts, seeds.next_u64());
        Ok(ModelBundle {
            encoder: build(enc)?,
            decoder: build(dec)?,
            generator: build(gen)?,
            discriminator: build(disc)?,
            config,
        })
    }

    pub fn is_finite(&self) -> bool {
        [&self.encoder, &self.decoder, &self.generator, &self.discriminator]
            .iter()
            .all(|m| m.is_finite())
    }

    pub fn encode_frame(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_len("encode_frame", x.len(), self.config.frame_dim)?;
        Ok(self.encoder.eval(&Tensor::vector(x.to_vec())?)?.into_data())
    }

    /// Encodes the rows of a `B × d` matrix.
    pub fn encode_frames(&self, frames: &Tensor) -> Result<Tensor> {
        self.encoder.eval(frames)
    }

    pub fn decode_latent(&self, h: &[f64]) -> Result<Vec<f64>> {
        check_len("decode_latent", h.len(), self.config.latent_dim)?;
        Ok(self.decoder.eval(&Tensor::vector(h.to_vec())?)?.into_data())
    }

    /// Decodes every column of a latent sequence into a frame.
    pub fn decode_sequence(&self, h: &LatentSequence) -> Result<Vec<Vec<f64>>> {
        check_len("decode_sequence", h.latent_dim(), self.config.latent_dim)?;
        let codes = Tensor::from_rows(&h.columns())?;
        let out = self.decoder.eval(&codes)?;
        Ok((0..out.rows()).map(|i| out.row(i).to_vec()).collect())
    }

    /// Mean over the rows of `frames` of `‖x − Dec(Enc(x))‖² / d`.
    pub fn recon_loss(&self, frames: &Tensor) -> Result<f64> {
        if frames.rank() != 2 {
            return Err(Error::dim("recon_loss", frames.shape(), &[0, self.config.frame_dim]));
        }
        let mut g = Graph::new();
        let enc = self.encoder.bind(&mut g, false);
        let dec = self.decoder.bind(&mut g, false);
        let x = g.constant(frames.clone());
        let loss = recon_loss_graph(&mut g, &enc, &dec, x)?;
        g.value(loss).item()
    }

    pub fn encode_sequence(&self, frames: &[Vec<f64>]) -> Result<LatentSequence> {
        check_len("encode_sequence", frames.len(), self.config.seq_len)?;
        for f in frames {
            check_len("encode_sequence", f.len(), self.config.frame_dim)?;
        }
        let codes = self.encode_frames(&Tensor::from_rows(frames)?)?;
        let rows: Vec<Vec<f64>> = (0..codes.rows()).map(|i| codes.row(i).to_vec()).collect();
        LatentSequence::from_codes(&rows)
    }

    /// `ĥ_seq = reshape(G(concat(z, c, l)), n × N)`.
    pub fn generator_forward(&self, z: &[f64], c: &[f64], l: &[f64]) -> Result<LatentSequence> {
        let cfg = &self.config;
        check_len("generator z", z.len(), cfg.z_dim)?;
        check_len("generator c", c.len(), cfg.latent_dim)?;
        check_one_hot(l, cfg.classes)?;
        let input = [z, c, l].concat();
        let out = self.generator.eval(&Tensor::vector(input)?)?;
        LatentSequence::from_frame_major(cfg.latent_dim, out.data())
    }

    /// `D(h_seq | c, l)` as a probability.
    pub fn discriminator_forward(&self, h: &LatentSequence, c: &[f64], l: &[f64]) -> Result<f64> {
        let cfg = &self.config;
        check_len("discriminator h_seq", h.latent_dim(), cfg.latent_dim)?;
        check_len("discriminator h_seq", h.len(), cfg.seq_len)?;
        check_len("discriminator c", c.len(), cfg.latent_dim)?;
        check_one_hot(l, cfg.classes)?;
        let input = [h.to_frame_major().as_slice(), c, l].concat();
        self.discriminator.eval(&Tensor::vector(input)?)?.item()
    }
}

/// Reconstruction loss on a `B × d` batch: `mean_b ‖x_b − Dec(Enc(x_b))‖² / d`.
pub fn recon_loss_graph(g: &mut Graph, enc: &BoundMlp, dec: &BoundMlp, x: Var) -> Result<Var> {
    let h = enc.forward(g, x)?;
    let xr = dec.forward(g, h)?;
    let diff = g.sub(x, xr)?;
    let sq = g.square(diff)?;
    g.mean(sq)
}

/// Generator output `M × (N·n)` from row-aligned `z`, `c`, `l` batches.
pub fn generator_graph(g: &mut Graph, gen: &BoundMlp, z: Var, c: Var, l: Var) -> Result<Var> {
    let input = g.concat(&[z, c, l], 1)?;
    gen.forward(g, input)
}

/// Discriminator pre-sigmoid scores, `M × 1`.
pub fn discriminator_logits_graph(g: &mut Graph, disc: &BoundMlp, h: Var, c: Var, l: Var) -> Result<Var> {
    let input = g.concat(&[h, c, l], 1)?;
    disc.forward_logits(g, input)
}

/// `−[mean log p_r + mean log(1 − p_f)]` from probabilities.
pub fn d_loss(g: &mut Graph, p_real: Var, p_fake: Var) -> Result<Var> {
    let log_r = g.log_clamped(p_real, LOG_FLOOR)?;
    let one = g.constant(Tensor::scalar(1.0));
    let q = g.sub(one, p_fake)?;
    let log_f = g.log_clamped(q, LOG_FLOOR)?;
    let a = g.mean(log_r)?;
    let b = g.mean(log_f)?;
    let s = g.add(a, b)?;
    g.neg(s)
}

/// [`d_loss`] on discriminator logits, using `log σ(x)` and `log(1 − σ(x)) = log σ(−x)`.
pub fn d_loss_from_logits(g: &mut Graph, logit_real: Var, logit_fake: Var) -> Result<Var> {
    let log_r = g.log_sigmoid(logit_real)?;
    let neg_f = g.neg(logit_fake)?;
    let log_f = g.log_sigmoid(neg_f)?;
    let a = g.mean(log_r)?;
    let b = g.mean(log_f)?;
    let s = g.add(a, b)?;
    g.neg(s)
}

/// Non-saturating generator loss `−mean log p_f`.
pub fn g_adv_loss(g: &mut Graph, p_fake: Var) -> Result<Var> {
    let l = g.log_clamped(p_fake, LOG_FLOOR)?;
    let m = g.mean(l)?;
    g.neg(m)
}

pub fn g_adv_loss_from_logits(g: &mut Graph, logit_fake: Var) -> Result<Var> {
    let l = g.log_sigmoid(logit_fake)?;
    let m = g.mean(l)?;
    g.neg(m)
}

fn sequence_count(g: &Graph, h: Var, latent_dim: usize) -> Result<(usize, usize)> {
    match g.shape(h) {
        [m, w] if latent_dim > 0 && w % latent_dim == 0 => Ok((*m, w / latent_dim)),
        other => Err(Error::dim("consistency loss", other, &[latent_dim])),
    }
}

/// Mean squared jump between adjacent latent frames over the whole sequence:
/// `1/(M(N−1)) Σ_i Σ_j ‖s_ij − s_i(j+1)‖²`.
pub fn consistency_loss_full(g: &mut Graph, h: Var, latent_dim: usize) -> Result<Var> {
    let (_, frames) = sequence_count(g, h, latent_dim)?;
    if frames < 2 {
        return Err(Error::contract("consistency loss needs at least 2 frames"));
    }
    consistency_loss_windowed(g, h, latent_dim, 0, frames)
}

/// Consistency over the `len − 1` adjacent pairs starting at frame `start`,
/// normalized by `M(len − 1)`.
pub fn consistency_loss_windowed(
    g: &mut Graph,
    h: Var,
    latent_dim: usize,
    start: usize,
    len: usize,
) -> Result<Var> {
    let (m, frames) = sequence_count(g, h, latent_dim)?;
    if len < 2 || start + len > frames {
        return Err(Error::contract(format!(
            "window start={start} len={len} does not fit {frames} frames"
        )));
    }
    let pairs = len - 1;
    let a = g.slice(h, 1, start * latent_dim, pairs * latent_dim)?;
    let b = g.slice(h, 1, (start + 1) * latent_dim, pairs * latent_dim)?;
    let d = g.sub(a, b)?;
    let sq = g.square(d)?;
    let s = g.sum(sq)?;
    g.scale(s, 1.0 / (m * pairs) as f64)
}

/// `adv + λ·cons`.
pub fn combine_generator_loss(g: &mut Graph, adv: Var, cons: Var, lambda: f64) -> Result<Var> {
    let weighted = g.scale(cons, lambda)?;
    g.add(adv, weighted)
}

/// Generator objective from fake probabilities: `g_adv + λ·windowed consistency`.
pub fn g_total_loss(
    g: &mut Graph,
    p_fake: Var,
    h: Var,
    latent_dim: usize,
    start: usize,
    len: usize,
    lambda: f64,
) -> Result<Var> {
    let adv = g_adv_loss(g, p_fake)?;
    let cons = consistency_loss_windowed(g, h, latent_dim, start, len)?;
    combine_generator_loss(g, adv, cons, lambda)
}
