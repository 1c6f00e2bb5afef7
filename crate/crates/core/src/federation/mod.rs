//! Federated simulation over virtual clients.
//!
//! Each round the server samples `S` of `K` clients, every selected client
//! trains its copy of the global model(s) for `E` epochs on its shard, and
//! the server averages the results. FedAvg trains one `p`-output network;
//! FedMLH trains one `B`-output sub-model per hash table against bucket
//! labels and averages each sub-model separately. The [`CommLedger`]
//! charges every transfer at the parameter byte size.
//!
//! Local training tasks run on the ambient rayon pool. Every task draws
//! from its own RNG stream keyed by `(seed, round, client, sub-model)`, and
//! aggregation order is fixed, so results are identical for any pool size.

mod config;
mod engine;
mod ledger;

pub use config::{Algorithm, DownloadScope, FedConfig, ScoreKind, Weighting};
pub use engine::{
    local_train, run_fedavg, run_federated, run_fedmlh, select_clients, GlobalModel, RoundRecord, TrainedGlobal,
    HISTORY_HEADER,
};
pub use ledger::{ledger_totals, CommLedger, LedgerRecord, LedgerTotals};
