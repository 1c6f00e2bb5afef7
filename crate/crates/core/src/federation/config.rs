use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::hashing::{LabelHashScheme, MergeMode};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Algorithm {
    /// One model with `p` outputs, parameters averaged across clients.
    FedAvg,
    /// R independent sub-models with `B` outputs each, trained on hashed
    /// bucket labels and averaged per sub-model.
    FedMlh,
}

/// How selected clients' parameters are weighted at aggregation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Weighting {
    /// `1/S` per selected client.
    Uniform,
    /// `n_k / Σ_{selected} n_k`.
    SampleProportional,
}

/// Which clients receive the aggregated model each round.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DownloadScope {
    Selected,
    All,
}

/// Quantity ranked at inference.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ScoreKind {
    /// `ln σ(logit)` per output; for FedMLH these are merged across tables.
    #[default]
    LogLikelihood,
    /// Raw logits.
    Logit,
}

macro_rules! text_enum {
    ($ty:ident { $($variant:ident => $name:literal),+ $(,)? }) => {
        impl $ty {
            pub fn name(self) -> &'static str {
                match self { $($ty::$variant => $name),+ }
            }
        }

        impl fmt::Display for $ty {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.name())
            }
        }

        impl FromStr for $ty {
            type Err = Error;

            fn from_str(s: &str) -> Result<Self> {
                match s {
                    $($name => Ok($ty::$variant),)+
                    other => Err(Error::config(format!(
                        concat!("unknown ", stringify!($ty), " `{}` (expected one of: {})"),
                        other,
                        [$($name),+].join(", ")
                    ))),
                }
            }
        }
    };
}

text_enum!(Algorithm { FedAvg => "fedavg", FedMlh => "fedmlh" });
text_enum!(Weighting { Uniform => "uniform", SampleProportional => "sample_proportional" });
text_enum!(DownloadScope { Selected => "selected", All => "all" });
text_enum!(ScoreKind { LogLikelihood => "loglik", Logit => "logit" });

/// Everything that drives one federated simulation.
#[derive(Debug, Clone, PartialEq)]
pub struct FedConfig {
    pub algorithm: Algorithm,
    /// K: number of clients.
    pub clients: usize,
    /// S: clients selected per round.
    pub selected: usize,
    /// T: maximum synchronization rounds.
    pub rounds: usize,
    /// E: local epochs per round.
    pub local_epochs: usize,
    /// Required for FedMLH, ignored by FedAvg.
    pub scheme: Option<LabelHashScheme>,
    pub hidden: [usize; 2],
    pub weighting: Weighting,
    pub download_scope: DownloadScope,
    pub lr: f64,
    pub batch_size: usize,
    /// Stop after this many evaluated rounds without a new best; `None`
    /// disables early stopping.
    pub early_stop_patience: Option<usize>,
    pub eval_each_round: bool,
    pub score_kind: ScoreKind,
    pub merge_mode: MergeMode,
    pub seed: u64,
}

impl FedConfig {
    /// Defaults: K = 10, S = 4, T = 70, E = 5, lr = 0.05, batch 64,
    /// patience 10. FedAvg weights by sample count and downloads to the
    /// selected clients; FedMLH weights uniformly and downloads to all.
    pub fn new(algorithm: Algorithm) -> Self {
        let (weighting, download_scope) = match algorithm {
            Algorithm::FedAvg => (Weighting::SampleProportional, DownloadScope::Selected),
            Algorithm::FedMlh => (Weighting::Uniform, DownloadScope::All),
        };
        FedConfig {
            algorithm,
            clients: 10,
            selected: 4,
            rounds: 70,
            local_epochs: 5,
            scheme: None,
            hidden: [128, 128],
            weighting,
            download_scope,
            lr: 0.05,
            batch_size: 64,
            early_stop_patience: Some(10),
            eval_each_round: true,
            score_kind: ScoreKind::LogLikelihood,
            merge_mode: MergeMode::Mean,
            seed: 0,
        }
    }

    pub fn fedavg() -> Self {
        Self::new(Algorithm::FedAvg)
    }

    pub fn fedmlh(scheme: LabelHashScheme) -> Self {
        FedConfig {
            scheme: Some(scheme),
            ..Self::new(Algorithm::FedMlh)
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.clients == 0 || self.selected == 0 || self.selected > self.clients {
            return Err(Error::config(format!(
                "need 1 <= S <= K (S = {}, K = {})",
                self.selected, self.clients
            )));
        }
        if self.rounds == 0 || self.local_epochs == 0 {
            return Err(Error::config("rounds and local epochs must be at least 1"));
        }
        if self.hidden.contains(&0) {
            return Err(Error::config("hidden widths must be positive"));
        }
        if !(self.lr >= 0.0 && self.lr.is_finite()) {
            return Err(Error::config(format!("learning rate must be finite and >= 0, got {}", self.lr)));
        }
        if self.batch_size == 0 {
            return Err(Error::config("batch size must be positive"));
        }
        if self.early_stop_patience == Some(0) {
            return Err(Error::config("early-stopping patience must be positive"));
        }
        if self.algorithm == Algorithm::FedMlh && self.scheme.is_none() {
            return Err(Error::config("fedmlh requires a label hash scheme"));
        }
        Ok(())
    }

    /// Number of models each client trains and transmits.
    pub fn num_models(&self) -> usize {
        match self.algorithm {
            Algorithm::FedAvg => 1,
            Algorithm::FedMlh => self.scheme.as_ref().map_or(0, |s| s.num_tables()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_follow_algorithm() {
        let a = FedConfig::fedavg();
        assert_eq!((a.clients, a.selected, a.rounds, a.local_epochs), (10, 4, 70, 5));
        assert_eq!(a.weighting, Weighting::SampleProportional);
        assert_eq!(a.download_scope, DownloadScope::Selected);
        let m = FedConfig::fedmlh(LabelHashScheme::generate(10, 5, 2, 0).unwrap());
        assert_eq!(m.weighting, Weighting::Uniform);
        assert_eq!(m.download_scope, DownloadScope::All);
        assert_eq!(m.num_models(), 2);
        m.validate().unwrap();
    }

    #[test]
    fn validation() {
        let mut c = FedConfig::fedavg();
        c.selected = 11;
        assert!(c.validate().is_err());
        let mut c = FedConfig::fedavg();
        c.rounds = 0;
        assert!(c.validate().is_err());
        assert!(FedConfig::new(Algorithm::FedMlh).validate().is_err());
    }

    #[test]
    fn names_round_trip() {
        for a in [Algorithm::FedAvg, Algorithm::FedMlh] {
            assert_eq!(a.name().parse::<Algorithm>().unwrap(), a);
        }
        assert_eq!("sample_proportional".parse::<Weighting>().unwrap(), Weighting::SampleProportional);
        assert!("fedprox".parse::<Algorithm>().is_err());
    }
}
