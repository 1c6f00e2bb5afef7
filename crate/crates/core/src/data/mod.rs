//! Sparse multi-label datasets: types, text I/O, feature hashing, synthetic
//! power-law generation and the frequent-class non-iid partitioner.

mod feature_hash;
mod io;
mod partition;
mod synthetic;

use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::rng::{self, tag};

pub use feature_hash::feature_hash;
pub use io::{load_xc_dataset, parse_xc_dataset, write_xc_dataset};
pub use partition::{default_frequent_count, frequent_classes, partition_noniid, PartitionPlan};
pub use synthetic::{generate_synthetic, SyntheticSpec};

/// Sparse real vector with strictly increasing indices and no stored zeros.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SparseVector {
    indices: Vec<u32>,
    values: Vec<f64>,
}

impl SparseVector {
    /// Validate sorted, zero-free entries against dimension `dim`.
    pub fn new(indices: Vec<u32>, values: Vec<f64>, dim: usize) -> Result<Self> {
        if indices.len() != values.len() {
            return Err(Error::shape(format!(
                "{} indices but {} values",
                indices.len(),
                values.len()
            )));
        }
        if indices.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::input("sparse indices must be strictly increasing"));
        }
        if let Some(&i) = indices.iter().find(|&&i| i as usize >= dim) {
            return Err(Error::input(format!("feature index {i} >= dimension {dim}")));
        }
        if values.iter().any(|&v| v == 0.0 || !v.is_finite()) {
            return Err(Error::input("sparse values must be finite and nonzero"));
        }
        Ok(SparseVector { indices, values })
    }

    /// Build from unordered pairs: duplicates are summed and exact zeros
    /// (including cancellations) dropped.
    pub fn from_pairs(mut pairs: Vec<(u32, f64)>, dim: usize) -> Result<Self> {
        pairs.sort_by_key(|&(i, _)| i);
        let mut indices = Vec::with_capacity(pairs.len());
        let mut values: Vec<f64> = Vec::with_capacity(pairs.len());
        for (i, v) in pairs {
            if indices.last() == Some(&i) {
                *values.last_mut().unwrap() += v;
            } else {
                indices.push(i);
                values.push(v);
            }
        }
        let (indices, values) = indices
            .into_iter()
            .zip(values)
            .filter(|&(_, v)| v != 0.0)
            .unzip();
        Self::new(indices, values, dim)
    }

    pub fn indices(&self) -> &[u32] {
        &self.indices
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn nnz(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (u32, f64)> + '_ {
        self.indices.iter().copied().zip(self.values.iter().copied())
    }

    pub fn to_dense(&self, dim: usize) -> Vec<f64> {
        let mut out = vec![0.0; dim];
        for (i, v) in self.iter() {
            out[i as usize] = v;
        }
        out
    }
}

/// One training example: sparse features plus its positive classes.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Sample {
    pub features: SparseVector,
    /// Sorted, duplicate-free positive class indices.
    pub positives: Vec<u32>,
}

impl Sample {
    pub fn new(features: SparseVector, mut positives: Vec<u32>) -> Self {
        positives.sort_unstable();
        positives.dedup();
        Sample { features, positives }
    }
}

/// An ordered collection of samples with feature dimension `d` and `p`
/// classes.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseDataset {
    samples: Vec<Sample>,
    dim: usize,
    num_classes: usize,
}

impl SparseDataset {
    pub fn new(samples: Vec<Sample>, dim: usize, num_classes: usize) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::input("a dataset needs at least one sample"));
        }
        if dim == 0 || num_classes == 0 {
            return Err(Error::input("feature dimension and class count must be positive"));
        }
        for (n, s) in samples.iter().enumerate() {
            if let Some(&i) = s.features.indices().last() {
                if i as usize >= dim {
                    return Err(Error::input(format!(
                        "sample {n}: feature index {i} >= dimension {dim}"
                    )));
                }
            }
            if s.positives.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::input(format!("sample {n}: positives not sorted and unique")));
            }
            if let Some(&l) = s.positives.last() {
                if l as usize >= num_classes {
                    return Err(Error::input(format!(
                        "sample {n}: class {l} >= class count {num_classes}"
                    )));
                }
            }
        }
        Ok(SparseDataset {
            samples,
            dim,
            num_classes,
        })
    }

    pub fn samples(&self) -> &[Sample] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn labels(&self) -> impl Iterator<Item = &[u32]> + '_ {
        self.samples.iter().map(|s| s.positives.as_slice())
    }

    /// Sub-dataset with the given sample indices, in order.
    pub fn subset(&self, indices: &[usize]) -> Result<Self> {
        let samples = indices
            .iter()
            .map(|&i| {
                self.samples
                    .get(i)
                    .cloned()
                    .ok_or_else(|| Error::input(format!("sample index {i} out of range")))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(samples, self.dim, self.num_classes)
    }

    /// Seeded random holdout split into `(train, test)`. The test part gets
    /// `round(fraction · N)` samples, clamped so both parts are nonempty.
    pub fn split_holdout(&self, fraction: f64, seed: u64) -> Result<(Self, Self)> {
        if !(fraction > 0.0 && fraction < 1.0) {
            return Err(Error::config(format!("holdout fraction must lie in (0, 1), got {fraction}")));
        }
        if self.len() < 2 {
            return Err(Error::input("need at least two samples to split"));
        }
        let mut idx: Vec<usize> = (0..self.len()).collect();
        idx.shuffle(&mut rng::stream(seed, &[tag::HOLDOUT]));
        let n_test = ((fraction * self.len() as f64).round() as usize).clamp(1, self.len() - 1);
        let (test, train) = idx.split_at(n_test);
        let (mut train, mut test) = (train.to_vec(), test.to_vec());
        train.sort_unstable();
        test.sort_unstable();
        Ok((self.subset(&train)?, self.subset(&test)?))
    }
}

/// Per-class positive counts `n_j` and their total `N_lab`.
pub fn class_frequencies(ds: &SparseDataset) -> (Vec<u64>, u64) {
    let mut counts = vec![0u64; ds.num_classes()];
    for labels in ds.labels() {
        for &l in labels {
            counts[l as usize] += 1;
        }
    }
    let total = counts.iter().sum();
    (counts, total)
}
