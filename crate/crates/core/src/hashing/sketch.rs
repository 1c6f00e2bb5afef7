use crate::error::{Error, Result};
use crate::hashing::scheme::{median, MergeMode};
use crate::hashing::universal::HashFunctionSpec;
use crate::rng::{self, tag};

/// Signed count sketch over a real vector indexed by `[0, domain)`.
///
/// Each of the `K` rows owns a bucket hash and a ±1 sign hash. Insertion adds
/// `x_i · s_j(i)` into `M[j, h_j(i)]`; retrieval returns the median (or mean)
/// over rows of `M[j, h_j(i)] · s_j(i)`.
///
/// Insertion takes `&mut self`: a sketch has a single writer.
#[derive(Debug, Clone, PartialEq)]
pub struct CountSketch {
    buckets: usize,
    domain: usize,
    values: Vec<f64>,
    value_hashes: Vec<HashFunctionSpec>,
    sign_hashes: Vec<HashFunctionSpec>,
}

impl CountSketch {
    pub fn new(rows: usize, buckets: usize, domain: usize, seed: u64) -> Result<Self> {
        if rows == 0 || buckets == 0 {
            return Err(Error::config("count sketch needs at least one row and one bucket"));
        }
        let value_hashes = (0..rows)
            .map(|j| {
                HashFunctionSpec::random(&mut rng::stream(seed, &[tag::SKETCH_VALUE, j as u64]), buckets as u64)
            })
            .collect::<Result<Vec<_>>>()?;
        let sign_hashes = (0..rows)
            .map(|j| HashFunctionSpec::random(&mut rng::stream(seed, &[tag::SKETCH_SIGN, j as u64]), 2))
            .collect::<Result<Vec<_>>>()?;
        Self::from_hashes(domain, value_hashes, sign_hashes)
    }

    /// Build a sketch from explicit row hashes; value hashes define the
    /// bucket count and sign hashes must have range 2.
    pub fn from_hashes(
        domain: usize,
        value_hashes: Vec<HashFunctionSpec>,
        sign_hashes: Vec<HashFunctionSpec>,
    ) -> Result<Self> {
        let rows = value_hashes.len();
        if rows == 0 || sign_hashes.len() != rows {
            return Err(Error::config("need one value hash and one sign hash per row"));
        }
        let buckets = value_hashes[0].range() as usize;
        if value_hashes.iter().any(|h| h.range() as usize != buckets) {
            return Err(Error::config("all value hashes must share one range"));
        }
        if sign_hashes.iter().any(|h| h.range() != 2) {
            return Err(Error::config("sign hashes must have range 2"));
        }
        Ok(CountSketch {
            buckets,
            domain,
            values: vec![0.0; rows * buckets],
            value_hashes,
            sign_hashes,
        })
    }

    pub fn rows(&self) -> usize {
        self.value_hashes.len()
    }

    pub fn buckets(&self) -> usize {
        self.buckets
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    pub fn bucket(&self, row: usize, i: usize) -> usize {
        self.value_hashes[row].eval(i as u64) as usize
    }

    #[inline]
    pub fn sign(&self, row: usize, i: usize) -> f64 {
        if self.sign_hashes[row].eval(i as u64) == 0 {
            1.0
        } else {
            -1.0
        }
    }

    fn check_index(&self, i: usize) -> Result<()> {
        if i >= self.domain {
            return Err(Error::input(format!("index {i} outside sketch domain {}", self.domain)));
        }
        Ok(())
    }

    /// Add the entries of a sparse vector given as `(index, value)` pairs.
    pub fn insert<I>(&mut self, entries: I) -> Result<()>
    where
        I: IntoIterator<Item = (usize, f64)>,
    {
        for (i, x) in entries {
            self.check_index(i)?;
            for j in 0..self.rows() {
                let b = self.bucket(j, i);
                let s = self.sign(j, i);
                self.values[j * self.buckets + b] += x * s;
            }
        }
        Ok(())
    }

    pub fn insert_dense(&mut self, x: &[f64]) -> Result<()> {
        self.insert(x.iter().copied().enumerate().filter(|&(_, v)| v != 0.0))
    }

    /// Median estimate of coordinate `i`.
    pub fn retrieve(&self, i: usize) -> Result<f64> {
        self.retrieve_with(i, MergeMode::Median)
    }

    pub fn retrieve_with(&self, i: usize, mode: MergeMode) -> Result<f64> {
        self.check_index(i)?;
        let mut est: Vec<f64> = (0..self.rows())
            .map(|j| self.values[j * self.buckets + self.bucket(j, i)] * self.sign(j, i))
            .collect();
        Ok(match mode {
            MergeMode::Median => median(&mut est),
            MergeMode::Mean => est.iter().sum::<f64>() / est.len() as f64,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn starts_at_zero() {
        let cs = CountSketch::new(3, 8, 100, 1).unwrap();
        assert!(cs.values().iter().all(|&v| v == 0.0));
        assert_eq!(cs.retrieve(42).unwrap(), 0.0);
    }

    #[test]
    fn single_entry_is_exact() {
        let mut cs = CountSketch::new(3, 1024, 100, 4).unwrap();
        cs.insert([(7, 5.0)]).unwrap();
        assert_eq!(cs.retrieve(7).unwrap(), 5.0);
        assert_eq!(cs.retrieve_with(7, MergeMode::Mean).unwrap(), 5.0);
    }

    #[test]
    fn rejects_out_of_domain() {
        let mut cs = CountSketch::new(2, 4, 10, 0).unwrap();
        assert!(cs.insert([(10, 1.0)]).is_err());
        assert!(cs.retrieve(10).is_err());
    }
}
