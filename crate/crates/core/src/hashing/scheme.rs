use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::hashing::universal::HashFunctionSpec;
use crate::rng::{self, tag};

/// How per-table bucket scores are combined into a class score.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MergeMode {
    /// Arithmetic mean over the R looked-up buckets.
    #[default]
    Mean,
    /// Median over the R looked-up buckets (mean of the two middle values
    /// when R is even), as in count-sketch retrieval.
    Median,
}

/// R independent hash functions mapping `p` classes into `B` buckets each.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelHashScheme {
    num_classes: usize,
    num_buckets: usize,
    seed: u64,
    tables: Vec<HashFunctionSpec>,
}

impl LabelHashScheme {
    /// Draw `tables` independent functions `[0, p) → [0, B)`.
    ///
    /// Table `j` is drawn from a stream keyed on `(seed, j)`, so a scheme
    /// with more tables extends one with fewer.
    pub fn generate(num_classes: usize, num_buckets: usize, tables: usize, seed: u64) -> Result<Self> {
        check_dims(num_classes, num_buckets, tables)?;
        let tables = (0..tables)
            .map(|j| {
                let mut r = rng::stream(seed, &[tag::SCHEME_TABLE, j as u64]);
                HashFunctionSpec::random(&mut r, num_buckets as u64)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(LabelHashScheme {
            num_classes,
            num_buckets,
            seed,
            tables,
        })
    }

    /// Build a scheme from explicit tables, e.g. an injective identity
    /// scheme for reduction tests.
    pub fn from_tables(
        num_classes: usize,
        num_buckets: usize,
        seed: u64,
        tables: Vec<HashFunctionSpec>,
    ) -> Result<Self> {
        check_dims(num_classes, num_buckets, tables.len())?;
        for (j, t) in tables.iter().enumerate() {
            if t.range() != num_buckets as u64 {
                return Err(Error::config(format!(
                    "table {j} has range {} but the scheme has {num_buckets} buckets",
                    t.range()
                )));
            }
            if !t.covers_domain(num_classes as u64) {
                return Err(Error::config(format!(
                    "table {j} modulus {} does not exceed the class count {num_classes}",
                    t.prime()
                )));
            }
        }
        Ok(LabelHashScheme {
            num_classes,
            num_buckets,
            seed,
            tables,
        })
    }

    /// `tables` copies of the identity map with `B = p`.
    pub fn identity(num_classes: usize, tables: usize) -> Result<Self> {
        let t = HashFunctionSpec::identity(num_classes.max(1) as u64)?;
        Self::from_tables(num_classes, num_classes, 0, vec![t; tables])
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn num_buckets(&self) -> usize {
        self.num_buckets
    }

    pub fn num_tables(&self) -> usize {
        self.tables.len()
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn tables(&self) -> &[HashFunctionSpec] {
        &self.tables
    }

    /// Bucket of `class` in table `table`.
    #[inline]
    pub fn bucket(&self, table: usize, class: u32) -> usize {
        self.tables[table].eval(class as u64) as usize
    }

    /// The full class → bucket map of one table.
    pub fn assignments(&self, table: usize) -> Vec<u32> {
        (0..self.num_classes as u32)
            .map(|l| self.bucket(table, l) as u32)
            .collect()
    }

    /// True when every table maps the classes to distinct buckets.
    pub fn is_injective(&self) -> bool {
        (0..self.num_tables()).all(|j| {
            let mut seen = vec![false; self.num_buckets];
            self.assignments(j).into_iter().all(|b| {
                let fresh = !seen[b as usize];
                seen[b as usize] = true;
                fresh
            })
        })
    }

    fn check_classes(&self, positives: &[u32]) -> Result<()> {
        match positives.iter().find(|&&l| l as usize >= self.num_classes) {
            Some(l) => Err(Error::input(format!(
                "class index {l} out of range for {} classes",
                self.num_classes
            ))),
            None => Ok(()),
        }
    }

    /// Positive buckets of one table: sorted, duplicate-free.
    pub fn table_buckets(&self, table: usize, positives: &[u32]) -> Result<Vec<u32>> {
        self.check_classes(positives)?;
        let mut out: Vec<u32> = positives
            .iter()
            .map(|&l| self.bucket(table, l) as u32)
            .collect();
        out.sort_unstable();
        out.dedup();
        Ok(out)
    }

    /// Bucket targets of every table for one sample. A bucket is positive
    /// iff at least one positive class hashes to it (union, not count).
    pub fn bucket_labels(&self, positives: &[u32]) -> Result<BucketLabels> {
        self.check_classes(positives)?;
        let mut bits = vec![0u8; self.num_tables() * self.num_buckets];
        for j in 0..self.num_tables() {
            for &l in positives {
                bits[j * self.num_buckets + self.bucket(j, l)] = 1;
            }
        }
        Ok(BucketLabels {
            tables: self.num_tables(),
            buckets: self.num_buckets,
            bits,
        })
    }

    /// Combine an `R × B` row-major matrix of bucket scores into one score
    /// per class: class `l` aggregates `scores[j][h_j(l)]` over all tables.
    pub fn merge_scores(&self, scores: &[f64], mode: MergeMode) -> Result<Vec<f64>> {
        let (r, b) = (self.num_tables(), self.num_buckets);
        if scores.len() != r * b {
            return Err(Error::shape(format!(
                "score matrix has {} entries, expected {r}×{b}",
                scores.len()
            )));
        }
        let mut out = vec![0.0; self.num_classes];
        self.merge_scores_into(scores, mode, &mut out);
        Ok(out)
    }

    pub(crate) fn merge_scores_into(&self, scores: &[f64], mode: MergeMode, out: &mut [f64]) {
        let (r, b) = (self.num_tables(), self.num_buckets);
        match mode {
            MergeMode::Mean => {
                out.iter_mut().for_each(|v| *v = 0.0);
                for j in 0..r {
                    let row = &scores[j * b..(j + 1) * b];
                    for (l, v) in out.iter_mut().enumerate() {
                        *v += row[self.bucket(j, l as u32)];
                    }
                }
                let inv = 1.0 / r as f64;
                out.iter_mut().for_each(|v| *v *= inv);
            }
            MergeMode::Median => {
                let mut buf = vec![0.0; r];
                for (l, v) in out.iter_mut().enumerate() {
                    for (j, slot) in buf.iter_mut().enumerate() {
                        *slot = scores[j * b + self.bucket(j, l as u32)];
                    }
                    *v = median(&mut buf);
                }
            }
        }
    }

    /// Text form: a header `p B R seed`, then one `a b prime range` line per
    /// table.
    pub fn to_text(&self) -> String {
        let mut s = format!(
            "{} {} {} {}\n",
            self.num_classes,
            self.num_buckets,
            self.num_tables(),
            self.seed
        );
        for t in &self.tables {
            let _ = writeln!(s, "{} {} {} {}", t.a(), t.b(), t.prime(), t.range());
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty());
        let (ln, header) = lines
            .next()
            .ok_or_else(|| Error::format(None, "empty scheme text"))?;
        let h = parse_u64s(header, 4, ln)?;
        let (p, b, r, seed) = (h[0] as usize, h[1] as usize, h[2] as usize, h[3]);
        let mut tables = Vec::with_capacity(r);
        for _ in 0..r {
            let (ln, line) = lines
                .next()
                .ok_or_else(|| Error::format(None, format!("expected {r} table lines")))?;
            let v = parse_u64s(line, 4, ln)?;
            tables.push(
                HashFunctionSpec::new(v[0], v[1], v[2], v[3])
                    .map_err(|e| Error::format(Some(ln), e.to_string()))?,
            );
        }
        if let Some((ln, _)) = lines.next() {
            return Err(Error::format(Some(ln), "trailing content after scheme tables"));
        }
        Self::from_tables(p, b, seed, tables)
    }
}

fn check_dims(p: usize, b: usize, r: usize) -> Result<()> {
    if p == 0 || b == 0 {
        return Err(Error::config(format!(
            "class and bucket counts must be positive (p = {p}, B = {b})"
        )));
    }
    if r == 0 {
        return Err(Error::config("at least one hash table is required"));
    }
    Ok(())
}

fn parse_u64s(line: &str, n: usize, ln: usize) -> Result<Vec<u64>> {
    let v = line
        .split_whitespace()
        .map(|t| t.parse::<u64>())
        .collect::<std::result::Result<Vec<_>, _>>()
        .map_err(|e| Error::format(Some(ln), e.to_string()))?;
    if v.len() != n {
        return Err(Error::format(Some(ln), format!("expected {n} integers, found {}", v.len())));
    }
    Ok(v)
}

/// Median of a small buffer; reorders it.
pub(crate) fn median(buf: &mut [f64]) -> f64 {
    buf.sort_unstable_by(|a, b| a.total_cmp(b));
    let n = buf.len();
    if n % 2 == 1 {
        buf[n / 2]
    } else {
        0.5 * (buf[n / 2 - 1] + buf[n / 2])
    }
}

/// `R × B` binary bucket-target matrix of one sample.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BucketLabels {
    tables: usize,
    buckets: usize,
    bits: Vec<u8>,
}

impl BucketLabels {
    pub fn get(&self, table: usize, bucket: usize) -> u8 {
        self.bits[table * self.buckets + bucket]
    }

    pub fn row(&self, table: usize) -> &[u8] {
        &self.bits[table * self.buckets..(table + 1) * self.buckets]
    }

    pub fn num_tables(&self) -> usize {
        self.tables
    }

    pub fn num_buckets(&self) -> usize {
        self.buckets
    }
}

/// Smallest table size for which, with probability at least `1 − δ`, no pair
/// of classes collides in all `R` tables: `⌈(p(p−1)/(2δ))^{1/R}⌉`.
pub fn min_table_size(num_classes: usize, delta: f64, tables: usize) -> Result<u64> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::config(format!("delta must lie in (0, 1), got {delta}")));
    }
    if tables == 0 {
        return Err(Error::config("at least one hash table is required"));
    }
    if num_classes < 2 {
        return Err(Error::config("at least two classes are required"));
    }
    let p = num_classes as f64;
    let target = p * (p - 1.0) / (2.0 * delta);
    let r = tables as i32;
    let mut b = target.powf(1.0 / tables as f64).ceil();
    // powf can land one ulp either side of an exact root.
    while b > 1.0 && (b - 1.0).powi(r) >= target {
        b -= 1.0;
    }
    while b.powi(r) < target {
        b += 1.0;
    }
    Ok(b as u64)
}
