//! The extreme-classification repository text format.
//!
//! ```text
//! N d p
//! l1,l2,... f1:v1 f2:v2 ...
//! ```
//!
//! The label list may be empty, in which case the line starts with a space.
//! LF and CRLF line endings are both accepted.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::data::{Sample, SparseDataset, SparseVector};
use crate::error::{Error, Result};

pub fn load_xc_dataset(path: impl AsRef<Path>) -> Result<SparseDataset> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_xc_dataset(&text).map_err(|e| e.at_path(path))
}

pub fn parse_xc_dataset(text: &str) -> Result<SparseDataset> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim_end_matches('\r')));
    let (_, header) = lines
        .next()
        .ok_or_else(|| Error::format(Some(1), "missing header line"))?;
    let h: Vec<usize> = header
        .split_whitespace()
        .map(|t| t.parse::<usize>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| Error::format(Some(1), format!("bad header: {e}")))?;
    let &[n, d, p] = h.as_slice() else {
        return Err(Error::format(Some(1), "header must be `N d p`"));
    };
    if n == 0 || d == 0 || p == 0 {
        return Err(Error::format(Some(1), "N, d and p must be positive"));
    }

    let mut samples = Vec::with_capacity(n);
    for (ln, line) in lines {
        // A blank line is a record with no labels and no features; only
        // trailing blank lines after the last record are skipped.
        if samples.len() == n {
            if line.trim().is_empty() {
                continue;
            }
            return Err(Error::format(Some(ln), format!("more than {n} records")));
        }
        samples.push(parse_record(line, d, p).map_err(|m| Error::format(Some(ln), m))?);
    }
    if samples.len() != n {
        return Err(Error::format(
            None,
            format!("header declares {n} records, found {}", samples.len()),
        ));
    }
    SparseDataset::new(samples, d, p)
}

fn parse_record(line: &str, d: usize, p: usize) -> std::result::Result<Sample, String> {
    let (label_field, feature_field) = match line.find(' ') {
        Some(i) => (&line[..i], &line[i + 1..]),
        None if line.contains(':') => ("", line),
        None => (line, ""),
    };
    let mut positives = Vec::new();
    for tok in label_field.split(',').filter(|t| !t.is_empty()) {
        let l: u32 = tok.trim().parse().map_err(|e| format!("bad label `{tok}`: {e}"))?;
        if l as usize >= p {
            return Err(format!("label {l} >= class count {p}"));
        }
        positives.push(l);
    }
    let mut pairs = Vec::new();
    for tok in feature_field.split_whitespace() {
        let (i, v) = tok
            .split_once(':')
            .ok_or_else(|| format!("feature `{tok}` is not index:value"))?;
        let i: u32 = i.parse().map_err(|e| format!("bad feature index `{i}`: {e}"))?;
        let v: f64 = v.parse().map_err(|e| format!("bad feature value `{v}`: {e}"))?;
        if i as usize >= d {
            return Err(format!("feature index {i} >= dimension {d}"));
        }
        if !v.is_finite() {
            return Err(format!("non-finite feature value `{v}`"));
        }
        pairs.push((i, v));
    }
    let features = SparseVector::from_pairs(pairs, d).map_err(|e| e.to_string())?;
    Ok(Sample::new(features, positives))
}

/// Serialize in the same format; values use the shortest round-tripping
/// decimal representation.
pub fn write_xc_dataset(ds: &SparseDataset) -> String {
    let mut s = format!("{} {} {}\n", ds.len(), ds.dim(), ds.num_classes());
    for sample in ds.samples() {
        let labels: Vec<String> = sample.positives.iter().map(|l| l.to_string()).collect();
        s.push_str(&labels.join(","));
        for (i, v) in sample.features.iter() {
            let _ = write!(s, " {i}:{v}");
        }
        if sample.features.is_empty() {
            s.push(' ');
        }
        s.push('\n');
    }
    s
}
