use crate::data::transform::root_center;
use crate::data::{ActionSequence, Dataset};
use crate::error::{Error, Result};

pub fn frame_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

/// Mean over frames of the per-frame L2 distance.
pub fn sequence_distance(a: &[Vec<f64>], b: &[Vec<f64>]) -> Result<f64> {
    if a.len() != b.len() || a.is_empty() {
        return Err(Error::dim("sequence_distance", &[a.len()], &[b.len()]));
    }
    Ok(a.iter().zip(b).map(|(x, y)| frame_distance(x, y)).sum::<f64>() / a.len() as f64)
}

/// Mean pairwise [`sequence_distance`] over a set of sequences.
pub fn diversity_metric(sequences: &[Vec<Vec<f64>>]) -> Result<f64> {
    if sequences.len() < 2 {
        return Err(Error::contract("diversity needs at least 2 sequences"));
    }
    let mut total = 0.0;
    let mut pairs = 0usize;
    for i in 0..sequences.len() {
        for j in i + 1..sequences.len() {
            total += sequence_distance(&sequences[i], &sequences[j])?;
            pairs += 1;
        }
    }
    Ok(total / pairs as f64)
}

/// Mean squared adjacent-frame displacement.
pub fn jerk_metric(frames: &[Vec<f64>]) -> Result<f64> {
    if frames.len() < 2 {
        return Err(Error::contract("jerk needs at least 2 frames"));
    }
    let total: f64 = frames.windows(2).map(|w| frame_distance(&w[0], &w[1]).powi(2)).sum();
    Ok(total / (frames.len() - 1) as f64)
}

/// Distance between the last frame of one segment and the first of the next.
pub fn junction_gap(prev: &ActionSequence, next: &ActionSequence) -> Result<f64> {
    match (prev.frames.last(), next.frames.first()) {
        (Some(a), Some(b)) => Ok(frame_distance(a, b)),
        _ => Err(Error::contract("junction between empty segments")),
    }
}

pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let mid = v.len() / 2;
    Some(if v.len() % 2 == 1 { v[mid] } else { 0.5 * (v[mid - 1] + v[mid]) })
}

pub fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len().max(1) as f64
}

/// Nearest-centroid classifier over root-centered, flattened trajectories.
#[derive(Clone, Debug, PartialEq)]
pub struct NearestCentroid {
    pub dims: usize,
    pub centroids: Vec<Vec<f64>>,
}

impl NearestCentroid {
    fn features(&self, seq: &ActionSequence) -> Result<Vec<f64>> {
        Ok(root_center(seq, self.dims)?.flatten())
    }

    /// One centroid per class; every class needs at least one sequence.
    pub fn fit(ds: &Dataset) -> Result<Self> {
        let mut clf = NearestCentroid {
            dims: ds.dims,
            centroids: Vec::new(),
        };
        let by_label = ds.indices_by_label();
        for (k, idx) in by_label.iter().enumerate() {
            if idx.is_empty() {
                return Err(Error::Degenerate(format!("class {k} has no training sequences")));
            }
            let feats = idx
                .iter()
                .map(|&i| clf.features(&ds.sequences[i]))
                .collect::<Result<Vec<_>>>()?;
            let len = feats[0].len();
            if feats.iter().any(|f| f.len() != len) {
                return Err(Error::contract("nearest centroid needs equal-length sequences"));
            }
            let c = (0..len)
                .map(|j| feats.iter().map(|f| f[j]).sum::<f64>() / feats.len() as f64)
                .collect();
            clf.centroids.push(c);
        }
        Ok(clf)
    }

    pub fn predict(&self, seq: &ActionSequence) -> Result<usize> {
        let f = self.features(seq)?;
        if f.len() != self.centroids[0].len() {
            return Err(Error::dim("nearest centroid", &[f.len()], &[self.centroids[0].len()]));
        }
        let dist = |c: &Vec<f64>| c.iter().zip(&f).map(|(a, b)| (a - b).powi(2)).sum::<f64>();
        Ok((0..self.centroids.len())
            .min_by(|&a, &b| dist(&self.centroids[a]).total_cmp(&dist(&self.centroids[b])))
            .expect("at least one class"))
    }

    /// Fraction of sequences predicted as their own label.
    pub fn accuracy(&self, sequences: &[ActionSequence]) -> Result<f64> {
        Ok(classify_generated(self, sequences)?.overall)
    }
}

/// Label agreement of generated sequences with their conditioning labels.
#[derive(Clone, Debug, PartialEq)]
pub struct ClassAccuracy {
    pub overall: f64,
    /// `None` for classes with no sequences.
    pub per_class: Vec<Option<f64>>,
}

pub fn classify_generated(clf: &NearestCentroid, sequences: &[ActionSequence]) -> Result<ClassAccuracy> {
    if sequences.is_empty() {
        return Err(Error::contract("nothing to classify"));
    }
    let k = clf.centroids.len();
    let mut hits = vec![0usize; k];
    let mut counts = vec![0usize; k];
    for s in sequences {
        if s.label >= k {
            return Err(Error::contract(format!("label {} out of range", s.label)));
        }
        counts[s.label] += 1;
        if clf.predict(s)? == s.label {
            hits[s.label] += 1;
        }
    }
    Ok(ClassAccuracy {
        overall: hits.iter().sum::<usize>() as f64 / sequences.len() as f64,
        per_class: hits
            .iter()
            .zip(&counts)
            .map(|(&h, &c)| (c > 0).then(|| h as f64 / c as f64))
            .collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::synth::{default_specs, synth_generate, SynthConfig};
    use crate::data::normalize_dataset;

    #[test]
    fn diversity_examples() {
        let a = vec![vec![0.0, 1.0, 2.0]; 4];
        assert_eq!(diversity_metric(&[a.clone(), a.clone()]).unwrap(), 0.0);
        let delta = 0.3;
        let b: Vec<Vec<f64>> = a.iter().map(|f| f.iter().map(|v| v + delta).collect()).collect();
        let got = diversity_metric(&[a.clone(), b]).unwrap();
        assert!((got - delta * 3f64.sqrt()).abs() < 1e-12);
        assert!(diversity_metric(&[a]).is_err());
    }

    #[test]
    fn jerk_examples() {
        assert_eq!(jerk_metric(&vec![vec![1.0, 2.0]; 5]).unwrap(), 0.0);
        assert_eq!(jerk_metric(&[vec![0.0], vec![1.0], vec![3.0]]).unwrap(), 2.5);
        assert!(jerk_metric(&[vec![0.0]]).is_err());
    }

    #[test]
    fn median_and_gap() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), Some(2.0));
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), Some(2.5));
        assert_eq!(median(&[]), None);
        let p = ActionSequence::new(0, vec![vec![0.0, 0.0], vec![3.0, 0.0]]);
        let n = ActionSequence::new(1, vec![vec![3.0, 4.0], vec![0.0, 0.0]]);
        assert_eq!(junction_gap(&p, &n).unwrap(), 4.0);
    }

    #[test]
    fn classifier_separates_held_out_synthetic_data() {
        let specs = default_specs(3, 0).unwrap();
        let cfg = SynthConfig::default();
        let (train, _) = normalize_dataset(&synth_generate(&specs, &cfg, 60, 32, 1).unwrap()).unwrap();
        let (test, _) = normalize_dataset(&synth_generate(&specs, &cfg, 40, 32, 2).unwrap()).unwrap();
        let clf = NearestCentroid::fit(&train).unwrap();
        let acc = clf.accuracy(&test.sequences).unwrap();
        assert!(acc >= 0.95, "accuracy {acc}");
        let report = classify_generated(&clf, &test.sequences).unwrap();
        assert_eq!(report.per_class.len(), 3);
    }
}
