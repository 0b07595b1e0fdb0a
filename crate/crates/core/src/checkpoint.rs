//! Versioned JSON checkpoints.
//!
//! The file is a single compact JSON object followed by `\n`. Keys appear in
//! the fixed order below; map keys are sorted. Floats use the shortest
//! representation that parses back to the identical `f64`, so a save/load/save
//! cycle is byte-exact.
//!
//! ```text
//! {"format":"actgen-checkpoint","version":1,"step":<u64>,
//!  "model":{ModelConfig},"train":{TrainConfig}|null,
//!  "normalization":{"dims":<usize>,"scale":<f64>},
//!  "default_initial":[<f64>; d],
//!  "tensors":{"<net>.<layer>.weight":{"shape":[in,out],"values":[...]},
//!             "<net>.<layer>.bias":{"shape":[out],"values":[...]}, ...},
//!  "optimizers":{"<net>":{"config":{...},"t":<u64>,"m":[[...],...],"v":[[...],...]}, ...}}
//! ```
//!
//! `<net>` is one of `encoder`, `decoder`, `generator`, `discriminator`.
//! Weights are row-major `[in × out]`. Moment lists follow parameter order
//! (`0.weight`, `0.bias`, `1.weight`, ...).

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::NormStats;
use crate::error::{Error, Result};
use crate::model::{ModelBundle, ModelConfig};
use crate::nn::Mlp;
use crate::optim::{Adam, AdamConfig};
use crate::tensor::Tensor;
use crate::training::{Optimizers, TrainConfig, TrainState};

pub const FORMAT: &str = "actgen-checkpoint";
pub const VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StoredTensor {
    pub shape: Vec<usize>,
    pub values: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StoredAdam {
    pub config: AdamConfig,
    pub t: u64,
    pub m: Vec<Vec<f64>>,
    pub v: Vec<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Checkpoint {
    pub format: String,
    pub version: u32,
    pub step: u64,
    pub model: ModelConfig,
    pub train: Option<TrainConfig>,
    pub normalization: NormStats,
    /// Initial pose used when a generation request gives none (normalized).
    pub default_initial: Vec<f64>,
    pub tensors: BTreeMap<String, StoredTensor>,
    pub optimizers: BTreeMap<String, StoredAdam>,
}

const NETS: [&str; 4] = ["encoder", "decoder", "generator", "discriminator"];

fn nets(b: &ModelBundle) -> [&Mlp; 4] {
    [&b.encoder, &b.decoder, &b.generator, &b.discriminator]
}

fn nets_mut(b: &mut ModelBundle) -> [&mut Mlp; 4] {
    [&mut b.encoder, &mut b.decoder, &mut b.generator, &mut b.discriminator]
}

fn adams(o: &Optimizers) -> [&Adam; 4] {
    [&o.encoder, &o.decoder, &o.generator, &o.discriminator]
}

impl Checkpoint {
    pub fn new(
        state: &TrainState,
        train: Option<&TrainConfig>,
        normalization: NormStats,
        default_initial: Vec<f64>,
    ) -> Result<Self> {
        let bundle = &state.bundle;
        if !bundle.is_finite() || !state.optimizers.is_finite() {
            return Err(Error::contract("refusing to checkpoint non-finite state"));
        }
        if default_initial.len() != bundle.config.frame_dim {
            return Err(Error::dim("default initial pose", &[default_initial.len()], &[bundle.config.frame_dim]));
        }
        let mut tensors = BTreeMap::new();
        for (name, net) in NETS.iter().zip(nets(bundle)) {
            for (pname, t) in net.named_parameters() {
                tensors.insert(
                    format!("{name}.{pname}"),
                    StoredTensor {
                        shape: t.shape().to_vec(),
                        values: t.data().to_vec(),
                    },
                );
            }
        }
        let optimizers = NETS
            .iter()
            .zip(adams(&state.optimizers))
            .map(|(name, a)| {
                (
                    name.to_string(),
                    StoredAdam {
                        config: a.config,
                        t: a.steps(),
                        m: a.first_moments().to_vec(),
                        v: a.second_moments().to_vec(),
                    },
                )
            })
            .collect();
        Ok(Checkpoint {
            format: FORMAT.into(),
            version: VERSION,
            step: state.step as u64,
            model: bundle.config.clone(),
            train: train.cloned(),
            normalization,
            default_initial,
            tensors,
            optimizers,
        })
    }

    /// Rebuilds the training state, checking every name and shape.
    pub fn restore(&self) -> Result<TrainState> {
        if self.format != FORMAT || self.version != VERSION {
            return Err(Error::Config(format!(
                "unsupported checkpoint {} v{}",
                self.format, self.version
            )));
        }
        let mut bundle = ModelBundle::new(self.model.clone(), 0)?;
        let mut expected = 0;
        for (name, net) in NETS.iter().zip(nets_mut(&mut bundle)) {
            let names: Vec<String> = net.named_parameters().into_iter().map(|(n, _)| n).collect();
            for (pname, param) in names.iter().zip(net.parameters_mut()) {
                let key = format!("{name}.{pname}");
                let stored = self
                    .tensors
                    .get(&key)
                    .ok_or_else(|| Error::Config(format!("checkpoint is missing tensor {key}")))?;
                let t = Tensor::new(stored.shape.clone(), stored.values.clone())?;
                if t.shape() != param.shape() {
                    return Err(Error::dim("checkpoint tensor", t.shape(), param.shape()));
                }
                *param = t;
                expected += 1;
            }
        }
        if expected != self.tensors.len() {
            return Err(Error::Config("checkpoint has unexpected tensors".into()));
        }
        if !bundle.is_finite() {
            return Err(Error::contract("checkpoint holds non-finite parameters"));
        }
        let adam = |name: &str, net: &Mlp| -> Result<Adam> {
            let s = self
                .optimizers
                .get(name)
                .ok_or_else(|| Error::Config(format!("checkpoint is missing optimizer {name}")))?;
            let sizes: Vec<usize> = net.parameters().iter().map(|t| t.numel()).collect();
            let fits = |x: &[Vec<f64>]| x.len() == sizes.len() && x.iter().zip(&sizes).all(|(a, &n)| a.len() == n);
            if !fits(&s.m) || !fits(&s.v) {
                return Err(Error::Config(format!("optimizer {name} does not match its network")));
            }
            Adam::from_state(s.config, s.t, s.m.clone(), s.v.clone())
        };
        let optimizers = Optimizers {
            encoder: adam("encoder", &bundle.encoder)?,
            decoder: adam("decoder", &bundle.decoder)?,
            generator: adam("generator", &bundle.generator)?,
            discriminator: adam("discriminator", &bundle.discriminator)?,
        };
        if self.default_initial.len() != self.model.frame_dim {
            return Err(Error::dim("default initial pose", &[self.default_initial.len()], &[self.model.frame_dim]));
        }
        Ok(TrainState {
            bundle,
            optimizers,
            step: self.step as usize,
        })
    }

    pub fn bundle(&self) -> Result<ModelBundle> {
        Ok(self.restore()?.bundle)
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let ck: Checkpoint = serde_json::from_str(text)?;
        ck.restore()?;
        Ok(ck)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        Ok(std::fs::write(path, self.to_json()?)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn state() -> TrainState {
        let cfg = TrainConfig {
            model: ModelConfig {
                seq_len: 4,
                window: 2,
                latent_dim: 3,
                z_dim: 2,
                encoder_hidden: vec![5],
                decoder_hidden: vec![5],
                generator_hidden: vec![6],
                discriminator_hidden: vec![6],
                ..ModelConfig::default()
            },
            ..TrainConfig::default()
        };
        let mut s = TrainState::new(&cfg).unwrap();
        let grads: Vec<Tensor> = s
            .bundle
            .encoder
            .parameters()
            .iter()
            .map(|t| Tensor::filled(t.shape().to_vec(), 0.3).unwrap())
            .collect();
        s.optimizers
            .encoder
            .step(&mut s.bundle.encoder.parameters_mut(), &grads)
            .unwrap();
        s.step = 1;
        s
    }

    #[test]
    fn save_load_save_is_byte_exact() {
        let s = state();
        let ck = Checkpoint::new(&s, None, NormStats { dims: 2, scale: 0.37 }, vec![0.1; 10]).unwrap();
        let text = ck.to_json().unwrap();
        assert!(text.starts_with("{\"format\":\"actgen-checkpoint\",\"version\":1,\"step\":1,"));
        let back = Checkpoint::from_json(&text).unwrap();
        assert_eq!(back.to_json().unwrap(), text);
        assert_eq!(back.restore().unwrap(), s);
    }

    #[test]
    fn tampered_checkpoints_are_rejected() {
        let s = state();
        let ck = Checkpoint::new(&s, None, NormStats { dims: 2, scale: 1.0 }, vec![0.0; 10]).unwrap();
        let mut bad = ck.clone();
        bad.tensors.get_mut("decoder.0.weight").unwrap().shape = vec![5, 3];
        assert!(bad.restore().is_err());
        let mut bad = ck.clone();
        bad.tensors.remove("generator.1.bias");
        assert!(bad.restore().is_err());
        let mut bad = ck.clone();
        bad.version = 2;
        assert!(bad.restore().is_err());
        let mut bad = ck;
        bad.optimizers.get_mut("encoder").unwrap().v[0][0] = -1.0;
        assert!(bad.restore().is_err());
        assert!(Checkpoint::new(&s, None, NormStats { dims: 2, scale: 1.0 }, vec![0.0; 3]).is_err());
    }
}
