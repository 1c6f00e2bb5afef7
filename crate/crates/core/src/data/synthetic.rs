use rand::distributions::{Distribution, WeightedIndex};
use rand::seq::index;
use rand::Rng;

use crate::data::{Sample, SparseDataset, SparseVector};
use crate::error::{Error, Result};
use crate::rng::{self, tag};

/// Parameters of the synthetic power-law multi-label generator.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSpec {
    pub num_samples: usize,
    pub dim: usize,
    pub num_classes: usize,
    /// Class `c` (0-based) is drawn with probability ∝ `(c + 1)^(−zipf_exponent)`.
    pub zipf_exponent: f64,
    /// Size of each class's feature prototype.
    pub features_per_class: usize,
    /// Probability that each prototype feature of a sample is replaced by a
    /// uniformly random feature.
    pub noise_rate: f64,
    /// Distinct positive classes per sample.
    pub labels_per_sample: usize,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        SyntheticSpec {
            num_samples: 1000,
            dim: 1000,
            num_classes: 100,
            zipf_exponent: 1.0,
            features_per_class: 8,
            noise_rate: 0.1,
            labels_per_sample: 1,
            seed: 0,
        }
    }
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        if self.num_samples == 0 || self.dim == 0 || self.num_classes == 0 {
            return Err(Error::config("synthetic sizes must be positive"));
        }
        if !(self.zipf_exponent > 0.0 && self.zipf_exponent.is_finite()) {
            return Err(Error::config("zipf exponent must be positive"));
        }
        if self.features_per_class == 0 || self.features_per_class > self.dim {
            return Err(Error::config("features per class must lie in [1, d]"));
        }
        if !(0.0..1.0).contains(&self.noise_rate) {
            return Err(Error::config("noise rate must lie in [0, 1)"));
        }
        if self.labels_per_sample == 0 || self.labels_per_sample > self.num_classes {
            return Err(Error::config("labels per sample must lie in [1, p]"));
        }
        Ok(())
    }

    /// Feature prototype of class `c`, sorted.
    pub fn prototype(&self, class: usize) -> Vec<u32> {
        let mut r = rng::stream(self.seed, &[tag::SYNTH_PROTOTYPE, class as u64]);
        let mut idx: Vec<u32> = index::sample(&mut r, self.dim, self.features_per_class)
            .into_iter()
            .map(|i| i as u32)
            .collect();
        idx.sort_unstable();
        idx
    }
}

/// Generate a dataset whose class frequencies follow a Zipf law and whose
/// features are the union of the positive classes' prototypes, perturbed by
/// random feature substitutions. Deterministic under `spec.seed`.
pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<SparseDataset> {
    spec.validate()?;
    let weights: Vec<f64> = (0..spec.num_classes)
        .map(|c| ((c + 1) as f64).powf(-spec.zipf_exponent))
        .collect();
    let law = WeightedIndex::new(&weights).map_err(|e| Error::config(e.to_string()))?;
    let prototypes: Vec<Vec<u32>> = (0..spec.num_classes).map(|c| spec.prototype(c)).collect();

    let mut label_rng = rng::stream(spec.seed, &[tag::SYNTH_LABELS]);
    let mut noise_rng = rng::stream(spec.seed, &[tag::SYNTH_NOISE]);
    let mut samples = Vec::with_capacity(spec.num_samples);
    for _ in 0..spec.num_samples {
        let mut labels: Vec<u32> = Vec::with_capacity(spec.labels_per_sample);
        while labels.len() < spec.labels_per_sample {
            let mut pick = None;
            for _ in 0..1000 {
                let c = law.sample(&mut label_rng) as u32;
                if !labels.contains(&c) {
                    pick = Some(c);
                    break;
                }
            }
            // Rejection stalls only when the remaining mass is tiny.
            let c = pick.unwrap_or_else(|| (0..spec.num_classes as u32).find(|c| !labels.contains(c)).unwrap());
            labels.push(c);
        }
        labels.sort_unstable();

        let mut feats: Vec<u32> = labels
            .iter()
            .flat_map(|&c| prototypes[c as usize].iter().copied())
            .collect();
        feats.sort_unstable();
        feats.dedup();
        if spec.noise_rate > 0.0 {
            for f in feats.iter_mut() {
                if noise_rng.gen::<f64>() < spec.noise_rate {
                    *f = noise_rng.gen_range(0..spec.dim as u32);
                }
            }
            feats.sort_unstable();
            feats.dedup();
        }
        let values = vec![1.0; feats.len()];
        samples.push(Sample {
            features: SparseVector::new(feats, values, spec.dim)?,
            positives: labels,
        });
    }
    SparseDataset::new(samples, spec.dim, spec.num_classes)
}
