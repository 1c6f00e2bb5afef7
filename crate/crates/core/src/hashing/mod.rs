//! Universal hashing, label-to-bucket schemes and the count sketch.
//!
//! A [`LabelHashScheme`] holds R independent functions from the `p` classes
//! into `B` buckets. A sample's bucket targets in table `j` are the union of
//! its positive classes' buckets ([`LabelHashScheme::bucket_labels`]), and at
//! inference the per-bucket scores of the R sub-models are merged back into
//! class scores ([`LabelHashScheme::merge_scores`]).

mod scheme;
mod sketch;
mod universal;

pub use scheme::{min_table_size, BucketLabels, LabelHashScheme, MergeMode};
pub use sketch::CountSketch;
pub use universal::{HashFunctionSpec, MERSENNE_61};
