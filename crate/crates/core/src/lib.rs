//! Federated extreme multi-label classification with label hashing.
//!
//! `fedsketch` trains sparse-input MLP classifiers across simulated clients
//! with two algorithms. FedAvg averages one full-width model. FedMLH hashes
//! the label space into `R` independent tables of `B` buckets, trains one
//! small model per table, and merges bucket scores back to class scores.
//! Every transfer is counted in bytes, so the two can be compared on
//! accuracy per megabyte.
//!
//! ```
//! use fedsketch::data::{generate_synthetic, partition_noniid, SyntheticSpec};
//! use fedsketch::federation::{run_federated, Algorithm, FedConfig};
//! use fedsketch::hashing::LabelHashScheme;
//!
//! let spec = SyntheticSpec { num_samples: 400, dim: 40, num_classes: 30, ..SyntheticSpec::default() };
//! let ds = generate_synthetic(&spec).unwrap();
//! let (train, test) = ds.split_holdout(0.2, 1).unwrap();
//! let plan = partition_noniid(&train, 4, 5, 2).unwrap();
//!
//! let mut cfg = FedConfig::new(Algorithm::FedMlh);
//! cfg.scheme = Some(LabelHashScheme::generate(30, 8, 2, 3).unwrap());
//! cfg.clients = 4;
//! cfg.selected = 2;
//! cfg.rounds = 2;
//! cfg.hidden = [16, 16];
//! let out = run_federated::<f32>(&train, Some(&test), &plan, &cfg).unwrap();
//! assert_eq!(out.history.len(), 2);
//! assert!(out.upload_to_best() > 0);
//! ```
//!
//! The modules follow the pipeline:
//!
//! - [`hashing`]: hash families, label hash schemes and score merging.
//! - [`data`]: sparse datasets, the text format, synthesis and partitioning.
//! - [`model`]: the sparse-input MLP, its loss, gradients and serialization.
//! - [`federation`]: client selection, local training, aggregation and the
//!   communication ledger.
//! - [`metrics`]: top-k accuracy and label distribution divergences.
//! - [`analysis`]: numerical verification of the hashing statements.
//! - [`cli`]: configuration files and the `fedsketch` binary.

pub mod analysis;
pub mod cli;
pub mod data;
pub mod error;
pub mod federation;
pub mod hashing;
pub mod metrics;
pub mod model;
pub mod rng;

pub use error::{Error, Result};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/hashing.md")]
    mod hashing {}
    #[doc = include_str!("../../../book/src/data.md")]
    mod data {}
    #[doc = include_str!("../../../book/src/model.md")]
    mod model {}
    #[doc = include_str!("../../../book/src/federation.md")]
    mod federation {}
    #[doc = include_str!("../../../book/src/communication.md")]
    mod communication {}
    #[doc = include_str!("../../../book/src/metrics.md")]
    mod metrics {}
    #[doc = include_str!("../../../book/src/verification.md")]
    mod verification {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
