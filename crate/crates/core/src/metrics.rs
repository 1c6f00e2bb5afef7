//! Top-k precision with a frequent/infrequent decomposition, and
//! class-distribution divergences.
//!
//! Ranking ties are broken by the lower class index, so every metric is a
//! deterministic function of the scores.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::hashing::LabelHashScheme;

/// The `k` highest-scoring classes, best first; equal scores rank the lower
/// index first.
pub fn top_k(scores: &[f64], k: usize) -> Vec<u32> {
    let k = k.min(scores.len());
    if k == 0 {
        return Vec::new();
    }
    let cmp = |a: &u32, b: &u32| {
        scores[*b as usize]
            .total_cmp(&scores[*a as usize])
            .then(a.cmp(b))
    };
    let mut idx: Vec<u32> = (0..scores.len() as u32).collect();
    if k < idx.len() {
        idx.select_nth_unstable_by(k - 1, cmp);
        idx.truncate(k);
    }
    idx.sort_unstable_by(cmp);
    idx
}

fn check_k(k: usize, p: usize) -> Result<()> {
    if k == 0 {
        return Err(Error::input("k must be at least 1"));
    }
    if k > p {
        return Err(Error::input(format!("k = {k} exceeds the class count {p}")));
    }
    Ok(())
}

fn hits(scores: &[f64], positives: &[u32], k: usize, mut count: impl FnMut(u32)) {
    for c in top_k(scores, k) {
        if positives.binary_search(&c).is_ok() {
            count(c);
        }
    }
}

fn check_inputs<S: AsRef<[f64]>, L: AsRef<[u32]>>(scores: &[S], labels: &[L], k: usize) -> Result<()> {
    if scores.len() != labels.len() {
        return Err(Error::shape(format!("{} score rows but {} label sets", scores.len(), labels.len())));
    }
    if scores.is_empty() {
        return Err(Error::input("no samples to score"));
    }
    let p = scores[0].as_ref().len();
    check_k(k, p)?;
    for (i, s) in scores.iter().enumerate() {
        let s = s.as_ref();
        if s.len() != p {
            return Err(Error::shape(format!("score row {i} has length {}, expected {p}", s.len())));
        }
        if s.iter().any(|v| !v.is_finite()) {
            return Err(Error::input(format!("score row {i} is not finite")));
        }
        if labels[i].as_ref().windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::input(format!("label set {i} is not sorted and unique")));
        }
    }
    Ok(())
}

/// `Σ_i |P_k(x_i) ∩ S(x_i)| / (N·k)`.
pub fn topk_accuracy<S: AsRef<[f64]>, L: AsRef<[u32]>>(scores: &[S], labels: &[L], k: usize) -> Result<f64> {
    check_inputs(scores, labels, k)?;
    let mut h = 0u64;
    for (s, l) in scores.iter().zip(labels) {
        hits(s.as_ref(), l.as_ref(), k, |_| h += 1);
    }
    Ok(h as f64 / (scores.len() * k) as f64)
}

/// Split the top-k hits into those on frequent and on infrequent classes.
/// The two parts sum to [`topk_accuracy`].
pub fn freq_split_accuracy<S: AsRef<[f64]>, L: AsRef<[u32]>>(
    scores: &[S],
    labels: &[L],
    k: usize,
    frequent_set: &[u32],
) -> Result<(f64, f64)> {
    check_inputs(scores, labels, k)?;
    let p = scores[0].as_ref().len();
    let mask = frequent_mask(frequent_set, p);
    let (mut f, mut inf) = (0u64, 0u64);
    for (s, l) in scores.iter().zip(labels) {
        hits(s.as_ref(), l.as_ref(), k, |c| {
            if mask[c as usize] {
                f += 1
            } else {
                inf += 1
            }
        });
    }
    let denom = (scores.len() * k) as f64;
    Ok((f as f64 / denom, inf as f64 / denom))
}

fn frequent_mask(frequent_set: &[u32], p: usize) -> Vec<bool> {
    let mut mask = vec![false; p];
    for &c in frequent_set {
        if let Some(m) = mask.get_mut(c as usize) {
            *m = true;
        }
    }
    mask
}

/// The cut-offs reported by [`EvalResult`].
pub const REPORTED_KS: [usize; 3] = [1, 3, 5];

/// Top-1/3/5 precision with its frequent/infrequent parts.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct EvalResult {
    pub top1: f64,
    pub top3: f64,
    pub top5: f64,
    /// Frequent-class parts for k = 1, 3, 5.
    pub frequent: [f64; 3],
    /// Infrequent-class parts for k = 1, 3, 5.
    pub infrequent: [f64; 3],
    pub n_eval: usize,
}

impl EvalResult {
    pub fn topk(&self) -> [f64; 3] {
        [self.top1, self.top3, self.top5]
    }

    /// Mean of top-1, top-3 and top-5: the model-selection criterion.
    pub fn mean_topk(&self) -> f64 {
        (self.top1 + self.top3 + self.top5) / 3.0
    }

    pub fn to_kv(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "n_eval={}", self.n_eval);
        for (i, k) in REPORTED_KS.iter().enumerate() {
            let _ = writeln!(s, "top{k}={}", self.topk()[i]);
            let _ = writeln!(s, "top{k}_frequent={}", self.frequent[i]);
            let _ = writeln!(s, "top{k}_infrequent={}", self.infrequent[i]);
        }
        s
    }
}

/// Streaming evaluator: feed one score row at a time, then
/// [`finish`](Self::finish). When a dataset has fewer than five classes, k
/// is capped at the class count.
#[derive(Debug, Clone)]
pub struct TopKAccumulator {
    mask: Vec<bool>,
    hits: [u64; 3],
    frequent_hits: [u64; 3],
    n: usize,
}

impl TopKAccumulator {
    pub fn new(num_classes: usize, frequent_set: &[u32]) -> Self {
        TopKAccumulator {
            mask: frequent_mask(frequent_set, num_classes),
            hits: [0; 3],
            frequent_hits: [0; 3],
            n: 0,
        }
    }

    fn k_eff(&self, i: usize) -> usize {
        REPORTED_KS[i].min(self.mask.len())
    }

    pub fn add(&mut self, scores: &[f64], positives: &[u32]) {
        debug_assert_eq!(scores.len(), self.mask.len());
        let ranked = top_k(scores, self.k_eff(2));
        for (i, _) in REPORTED_KS.iter().enumerate() {
            for &c in &ranked[..self.k_eff(i)] {
                if positives.binary_search(&c).is_ok() {
                    self.hits[i] += 1;
                    if self.mask[c as usize] {
                        self.frequent_hits[i] += 1;
                    }
                }
            }
        }
        self.n += 1;
    }

    pub fn finish(&self) -> EvalResult {
        let mut r = EvalResult {
            n_eval: self.n,
            ..Default::default()
        };
        if self.n == 0 {
            return r;
        }
        let mut overall = [0.0; 3];
        for i in 0..3 {
            let denom = (self.n * self.k_eff(i)) as f64;
            overall[i] = self.hits[i] as f64 / denom;
            r.frequent[i] = self.frequent_hits[i] as f64 / denom;
            r.infrequent[i] = (self.hits[i] - self.frequent_hits[i]) as f64 / denom;
        }
        [r.top1, r.top3, r.top5] = overall;
        r
    }
}

/// Tolerance on `Σ π = 1` for a [`LabelDistribution`].
pub const SIMPLEX_TOL: f64 = 1e-12;

/// A point on the probability simplex.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelDistribution {
    proportions: Vec<f64>,
}

impl LabelDistribution {
    /// Validate non-negative proportions summing to 1 within
    /// [`SIMPLEX_TOL`].
    pub fn new(proportions: Vec<f64>) -> Result<Self> {
        if proportions.is_empty() {
            return Err(Error::input("a distribution needs at least one coordinate"));
        }
        if proportions.iter().any(|&v| !(v >= 0.0) || !v.is_finite()) {
            return Err(Error::input("proportions must be finite and non-negative"));
        }
        let sum: f64 = proportions.iter().sum();
        if (sum - 1.0).abs() > SIMPLEX_TOL {
            return Err(Error::input(format!("proportions sum to {sum}, not 1")));
        }
        Ok(LabelDistribution { proportions })
    }

    /// Normalize non-negative weights.
    pub fn from_weights(weights: &[f64]) -> Result<Self> {
        let sum: f64 = weights.iter().sum();
        if !(sum > 0.0) || weights.iter().any(|&w| !(w >= 0.0) || !w.is_finite()) {
            return Err(Error::input("weights must be non-negative with a positive sum"));
        }
        Self::new(weights.iter().map(|w| w / sum).collect())
    }

    /// Normalize counts after adding `epsilon` to every coordinate.
    pub fn from_counts(counts: &[u64], epsilon: f64) -> Result<Self> {
        let w: Vec<f64> = counts.iter().map(|&c| c as f64 + epsilon).collect();
        Self::from_weights(&w)
    }

    pub fn proportions(&self) -> &[f64] {
        &self.proportions
    }

    pub fn len(&self) -> usize {
        self.proportions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.proportions.is_empty()
    }

    pub fn is_strictly_positive(&self) -> bool {
        self.proportions.iter().all(|&v| v > 0.0)
    }
}

/// Additive smoothing used before KL on empirical counts:
/// `ε = 1/(10·N_lab)`.
pub fn smoothing_epsilon(n_lab: u64) -> f64 {
    1.0 / (10.0 * n_lab.max(1) as f64)
}

/// `Σ_i a_i ln(a_i / b_i)`. Both distributions must be strictly positive.
pub fn kl_divergence(a: &LabelDistribution, b: &LabelDistribution) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::shape(format!("distributions of length {} and {}", a.len(), b.len())));
    }
    if !a.is_strictly_positive() || !b.is_strictly_positive() {
        return Err(Error::Domain(
            "KL divergence requires strictly positive coordinates; smooth first".into(),
        ));
    }
    Ok(kl_unchecked(a.proportions(), b.proportions()))
}

pub(crate) fn kl_unchecked(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(&x, &y)| x * (x / y).ln()).sum()
}

/// Bucket proportions `ω_i = Σ_{l: h_j(l) = i} π_l` of table `table`.
pub fn bucket_proportions(
    pi: &LabelDistribution,
    scheme: &LabelHashScheme,
    table: usize,
) -> Result<LabelDistribution> {
    if table >= scheme.num_tables() {
        return Err(Error::input(format!(
            "table {table} out of range for {} tables",
            scheme.num_tables()
        )));
    }
    if pi.len() != scheme.num_classes() {
        return Err(Error::shape(format!(
            "distribution over {} classes, scheme over {}",
            pi.len(),
            scheme.num_classes()
        )));
    }
    let assign = scheme.assignments(table);
    Ok(LabelDistribution {
        proportions: group_sums(pi.proportions(), &assign, scheme.num_buckets()),
    })
}

pub(crate) fn group_sums(values: &[f64], assign: &[u32], groups: usize) -> Vec<f64> {
    let mut out = vec![0.0; groups];
    for (&v, &g) in values.iter().zip(assign) {
        out[g as usize] += v;
    }
    out
}
