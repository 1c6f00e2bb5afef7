use crate::data::{Sample, SparseDataset, SparseVector};
use crate::error::{Error, Result};
use crate::hashing::HashFunctionSpec;
use crate::rng::{self, tag};

/// Signed feature hashing into `d_tilde` dimensions.
///
/// Feature `i` lands at `h(i)` with sign `s(i)`; colliding contributions are
/// summed and exact cancellations dropped. Labels are untouched.
pub fn feature_hash(ds: &SparseDataset, d_tilde: usize, seed: u64) -> Result<SparseDataset> {
    if d_tilde == 0 {
        return Err(Error::config("hashed feature dimension must be positive"));
    }
    let h = HashFunctionSpec::random(&mut rng::stream(seed, &[tag::FEATURE_HASH, 0]), d_tilde as u64)?;
    let s = HashFunctionSpec::random(&mut rng::stream(seed, &[tag::FEATURE_HASH, 1]), 2)?;
    let samples = ds
        .samples()
        .iter()
        .map(|sample| {
            let pairs = sample
                .features
                .iter()
                .map(|(i, v)| {
                    let sign = if s.eval(i as u64) == 0 { 1.0 } else { -1.0 };
                    (h.eval(i as u64) as u32, sign * v)
                })
                .collect();
            Ok(Sample {
                features: SparseVector::from_pairs(pairs, d_tilde)?,
                positives: sample.positives.clone(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    SparseDataset::new(samples, d_tilde, ds.num_classes())
}
