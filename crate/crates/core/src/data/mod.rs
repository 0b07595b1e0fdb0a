//! Skeleton sequences: interchange formats, NTU import, preprocessing, the
//! synthetic action set and mini-batching.

pub mod batch;
pub mod ntu;
mod skeleton;
pub mod synth;
pub mod transform;

pub use batch::{batches, one_hot, one_hot_matrix, Batch};
pub use skeleton::{ActionSequence, Dataset, SkeletonFrame};
pub use transform::{normalize, resample, NormStats, Normalized};

use crate::error::Result;

/// Root-centers and scales every sequence with stats fitted on `ds` itself.
pub fn normalize_dataset(ds: &Dataset) -> Result<(Dataset, NormStats)> {
    let stats = NormStats::fit(&ds.sequences, ds.dims)?;
    let sequences = ds
        .sequences
        .iter()
        .map(|s| Ok(normalize(s, &stats)?.sequence))
        .collect::<Result<Vec<_>>>()?;
    Ok((
        Dataset {
            sequences,
            ..ds.clone()
        },
        stats,
    ))
}

/// Applies existing stats (e.g. fitted on a training split).
pub fn apply_normalization(ds: &Dataset, stats: &NormStats) -> Result<Dataset> {
    let sequences = ds
        .sequences
        .iter()
        .map(|s| Ok(normalize(s, stats)?.sequence))
        .collect::<Result<Vec<_>>>()?;
    Ok(Dataset {
        sequences,
        ..ds.clone()
    })
}
