use std::fmt::Write as _;

use rand::Rng;

use crate::data::{class_frequencies, SparseDataset};
use crate::error::{Error, Result};
use crate::rng::{self, tag};

/// Assignment of sample indices to `K` clients.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PartitionPlan {
    clients: Vec<Vec<usize>>,
    frequent_set: Vec<u32>,
    seed: u64,
}

impl PartitionPlan {
    /// Build a plan from explicit client lists. Lists are sorted and
    /// deduplicated.
    pub fn new(mut clients: Vec<Vec<usize>>, frequent_set: Vec<u32>, seed: u64) -> Result<Self> {
        if clients.is_empty() {
            return Err(Error::config("a partition needs at least one client"));
        }
        for c in &mut clients {
            c.sort_unstable();
            c.dedup();
        }
        Ok(PartitionPlan {
            clients,
            frequent_set,
            seed,
        })
    }

    /// Every sample on client 0.
    pub fn single_client(ds: &SparseDataset) -> Self {
        PartitionPlan {
            clients: vec![(0..ds.len()).collect()],
            frequent_set: Vec::new(),
            seed: 0,
        }
    }

    pub fn num_clients(&self) -> usize {
        self.clients.len()
    }

    pub fn client(&self, k: usize) -> &[usize] {
        &self.clients[k]
    }

    pub fn clients(&self) -> &[Vec<usize>] {
        &self.clients
    }

    /// Frequent classes in decreasing-count order.
    pub fn frequent_set(&self) -> &[u32] {
        &self.frequent_set
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Check the plan against a dataset: indices in range and every sample
    /// assigned somewhere.
    pub fn validate(&self, ds: &SparseDataset) -> Result<()> {
        let mut seen = vec![false; ds.len()];
        for (k, c) in self.clients.iter().enumerate() {
            for &i in c {
                *seen.get_mut(i).ok_or_else(|| {
                    Error::input(format!("client {k} references sample {i} of {}", ds.len()))
                })? = true;
            }
        }
        match seen.iter().position(|&s| !s) {
            Some(i) => Err(Error::input(format!("sample {i} is not assigned to any client"))),
            None => Ok(()),
        }
    }

    /// Header `K F seed`, then one line of space-separated indices per
    /// client.
    pub fn to_text(&self) -> String {
        let mut s = format!(
            "{} {} {}\n",
            self.num_clients(),
            self.frequent_set.len(),
            self.seed
        );
        for c in &self.clients {
            let idx: Vec<String> = c.iter().map(|i| i.to_string()).collect();
            let _ = writeln!(s, "{}", idx.join(" "));
        }
        s
    }

    /// Parse the text form. The frequent set is not stored in the file; it
    /// is recomputed as the top-F classes of `ds`.
    pub fn from_text(text: &str, ds: &SparseDataset) -> Result<Self> {
        let mut lines = text.lines().map(|l| l.trim_end_matches('\r'));
        let header = lines.next().ok_or_else(|| Error::format(Some(1), "missing header"))?;
        let h: Vec<u64> = header
            .split_whitespace()
            .map(|t| t.parse())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::format(Some(1), format!("bad header: {e}")))?;
        let &[k, f, seed] = h.as_slice() else {
            return Err(Error::format(Some(1), "header must be `K F seed`"));
        };
        let mut clients = Vec::with_capacity(k as usize);
        for (i, line) in lines.enumerate() {
            if clients.len() == k as usize {
                if line.trim().is_empty() {
                    continue;
                }
                return Err(Error::format(Some(i + 2), format!("more than {k} client lines")));
            }
            let c = line
                .split_whitespace()
                .map(|t| t.parse::<usize>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| Error::format(Some(i + 2), e.to_string()))?;
            clients.push(c);
        }
        if clients.len() != k as usize {
            return Err(Error::format(None, format!("expected {k} client lines, found {}", clients.len())));
        }
        let frequent = if f == 0 { Vec::new() } else { frequent_classes(ds, f as usize)? };
        let plan = Self::new(clients, frequent, seed)?;
        plan.validate(ds)?;
        Ok(plan)
    }
}

/// Top-`f` classes by positive count, ties broken by lower index.
pub fn frequent_classes(ds: &SparseDataset, f: usize) -> Result<Vec<u32>> {
    if f == 0 || f > ds.num_classes() {
        return Err(Error::config(format!(
            "frequent-class count must satisfy 1 <= F <= p (F = {f}, p = {})",
            ds.num_classes()
        )));
    }
    let (counts, _) = class_frequencies(ds);
    let mut order: Vec<u32> = (0..ds.num_classes() as u32).collect();
    order.sort_by(|&a, &b| counts[b as usize].cmp(&counts[a as usize]).then(a.cmp(&b)));
    order.truncate(f);
    Ok(order)
}

/// Number of top classes that together cover at least 30% of all positive
/// label events (at least 1).
pub fn default_frequent_count(ds: &SparseDataset) -> usize {
    let (mut counts, total) = class_frequencies(ds);
    counts.sort_unstable_by(|a, b| b.cmp(a));
    let target = 0.3 * total as f64;
    let mut acc = 0u64;
    for (i, c) in counts.iter().enumerate() {
        acc += c;
        if acc as f64 >= target {
            return i + 1;
        }
    }
    1
}

/// Frequent-class non-iid partition.
///
/// For each of the `f` most frequent classes a client is drawn uniformly and
/// receives every sample positive for that class, so a sample with several
/// frequent classes can land on several clients. Samples without a frequent
/// class go to a uniformly drawn client.
pub fn partition_noniid(ds: &SparseDataset, clients: usize, f: usize, seed: u64) -> Result<PartitionPlan> {
    if clients == 0 {
        return Err(Error::config("a partition needs at least one client"));
    }
    let frequent = frequent_classes(ds, f)?;
    let mut rng = rng::stream(seed, &[tag::PARTITION]);

    let mut owner = vec![usize::MAX; ds.num_classes()];
    for &c in &frequent {
        owner[c as usize] = rng.gen_range(0..clients);
    }

    let mut lists = vec![Vec::new(); clients];
    for (i, labels) in ds.labels().enumerate() {
        let mut placed = false;
        for &l in labels {
            let k = owner[l as usize];
            if k != usize::MAX {
                lists[k].push(i);
                placed = true;
            }
        }
        if !placed {
            lists[rng.gen_range(0..clients)].push(i);
        }
    }
    PartitionPlan::new(lists, frequent, seed)
}
