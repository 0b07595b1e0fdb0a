use rand::seq::SliceRandom;

use super::skeleton::Dataset;
use crate::error::{Error, Result};
use crate::rng;
use crate::tensor::Tensor;

/// Unit basis vector `e_label` of length `classes`.
pub fn one_hot(label: usize, classes: usize) -> Result<Vec<f64>> {
    if label >= classes {
        return Err(Error::contract(format!("label {label} out of range for {classes} classes")));
    }
    let mut v = vec![0.0; classes];
    v[label] = 1.0;
    Ok(v)
}

/// `M × K` matrix of one-hot rows.
pub fn one_hot_matrix(labels: &[usize], classes: usize) -> Result<Tensor> {
    let rows = labels
        .iter()
        .map(|&l| one_hot(l, classes))
        .collect::<Result<Vec<_>>>()?;
    Tensor::from_rows(&rows)
}

/// A mini-batch of fixed-length sequences.
#[derive(Clone, Debug)]
pub struct Batch {
    /// Dataset indices of the batch members.
    pub indices: Vec<usize>,
    /// `M × N × d`.
    pub frames: Tensor,
    pub labels: Vec<usize>,
    /// `M × K`.
    pub one_hot: Tensor,
}

impl Batch {
    pub fn from_indices(ds: &Dataset, indices: &[usize]) -> Result<Self> {
        let seq_len = ds
            .seq_len()
            .ok_or_else(|| Error::contract("batching needs equal-length sequences"))?;
        let d = ds.frame_dim();
        let data: Vec<f64> = indices
            .iter()
            .flat_map(|&i| ds.sequences[i].frames.iter().flatten().copied())
            .collect();
        let labels: Vec<usize> = indices.iter().map(|&i| ds.sequences[i].label).collect();
        Ok(Batch {
            indices: indices.to_vec(),
            frames: Tensor::new(vec![indices.len(), seq_len, d], data)?,
            one_hot: one_hot_matrix(&labels, ds.classes)?,
            labels,
        })
    }

    pub fn size(&self) -> usize {
        self.labels.len()
    }

    /// Frames as an `(M·N) × d` matrix.
    pub fn frame_rows(&self) -> Result<Tensor> {
        let s = self.frames.shape();
        self.frames.clone().reshape(vec![s[0] * s[1], s[2]])
    }

    /// First frame of every sequence, `M × d`.
    pub fn first_frames(&self) -> Result<Tensor> {
        let s = self.frames.shape();
        let (n, d) = (s[1], s[2]);
        let data = (0..s[0])
            .flat_map(|i| self.frames.data()[i * n * d..i * n * d + d].iter().copied())
            .collect();
        Tensor::matrix(s[0], d, data)
    }
}

/// Permutation of `0..len` for one epoch.
pub fn epoch_order(len: usize, seed: u64, epoch: u64) -> Vec<usize> {
    let mut order: Vec<usize> = (0..len).collect();
    let mut rng = rng::indexed(seed, epoch, rng::streams::SHUFFLE);
    order.shuffle(&mut rng);
    order
}

/// One epoch of shuffled batches of size `batch_size`; the last batch holds
/// the remainder so every sequence appears exactly once.
pub fn batches(ds: &Dataset, batch_size: usize, seed: u64, epoch: u64) -> Result<Vec<Batch>> {
    if batch_size == 0 || batch_size > ds.len() {
        return Err(Error::Config(format!(
            "batch size {batch_size} must be in [1, {}]",
            ds.len()
        )));
    }
    epoch_order(ds.len(), seed, epoch)
        .chunks(batch_size)
        .map(|idx| Batch::from_indices(ds, idx))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::synth::{default_specs, synth_generate, SynthConfig};

    #[test]
    fn one_hot_basics() {
        assert_eq!(one_hot(2, 4).unwrap(), vec![0.0, 0.0, 1.0, 0.0]);
        assert!(one_hot(4, 4).is_err());
        for k in 0..7 {
            let v = one_hot(k, 7).unwrap();
            assert_eq!(v.iter().sum::<f64>(), 1.0);
            let argmax = v
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.total_cmp(b.1))
                .unwrap()
                .0;
            assert_eq!(argmax, k);
        }
    }

    #[test]
    fn epoch_covers_every_sample_once() {
        let ds = synth_generate(&default_specs(3, 0).unwrap(), &SynthConfig::default(), 10, 8, 1).unwrap();
        let bs = batches(&ds, 4, 9, 0).unwrap();
        let mut seen: Vec<usize> = bs.iter().flat_map(|b| b.indices.clone()).collect();
        seen.sort_unstable();
        assert_eq!(seen, (0..30).collect::<Vec<_>>());
        assert_eq!(bs[0].frames.shape(), &[4, 8, 10]);
        assert_eq!(bs[0].one_hot.shape(), &[4, 3]);
        assert_eq!(bs.last().unwrap().size(), 2);
        assert_eq!(bs[0].frame_rows().unwrap().shape(), &[32, 10]);
        let first = bs[0].first_frames().unwrap();
        assert_eq!(first.row(1), ds.sequences[bs[0].indices[1]].frames[0].as_slice());
    }

    #[test]
    fn orders_depend_on_seed_and_epoch() {
        assert_eq!(epoch_order(50, 1, 0), epoch_order(50, 1, 0));
        assert_ne!(epoch_order(50, 1, 0), epoch_order(50, 2, 0));
        assert_ne!(epoch_order(50, 1, 0), epoch_order(50, 1, 1));
    }

    #[test]
    fn batch_size_must_fit() {
        let ds = synth_generate(&default_specs(2, 0).unwrap(), &SynthConfig::default(), 2, 4, 1).unwrap();
        assert!(batches(&ds, 5, 0, 0).is_err());
        assert!(batches(&ds, 0, 0, 0).is_err());
    }
}
