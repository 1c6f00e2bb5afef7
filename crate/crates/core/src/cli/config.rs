//! Flat `section.key=value` experiment configuration.
//!
//! Blank lines and lines starting with `#` are ignored. Unknown keys are
//! errors. Component seeds default to the top-level `seed`.

use std::fmt::Write as _;
use std::path::PathBuf;
use std::str::FromStr;

use crate::data::SyntheticSpec;
use crate::error::{Error, Result};
use crate::federation::{Algorithm, DownloadScope, FedConfig, ScoreKind, Weighting};
use crate::hashing::{LabelHashScheme, MergeMode};
use crate::metrics::REPORTED_KS;
use crate::model::Precision;

/// Everything a `run` needs, with every default made explicit.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub seed: u64,
    /// Training data in the XC text format; synthetic data when absent.
    pub train: Option<PathBuf>,
    pub test: Option<PathBuf>,
    /// Fraction held out for evaluation when no test file is given.
    pub holdout: f64,
    /// Feature-hashing dimension; 0 keeps the raw features.
    pub feature_dim: usize,
    pub feature_seed: Option<u64>,
    pub synth: SyntheticSpec,
    synth_seed: Option<u64>,
    /// Frequent-class count F; `None` picks the classes covering 30% of
    /// label events.
    pub frequent: Option<usize>,
    pub partition_seed: Option<u64>,
    pub plan: Option<PathBuf>,
    pub algorithm: Algorithm,
    pub clients: usize,
    pub selected: usize,
    pub rounds: usize,
    pub local_epochs: usize,
    pub weighting: Option<Weighting>,
    pub download_scope: Option<DownloadScope>,
    pub lr: f64,
    pub batch_size: usize,
    pub patience: Option<usize>,
    pub eval_each_round: bool,
    pub score: ScoreKind,
    pub merge: MergeMode,
    pub fed_seed: Option<u64>,
    pub hidden: [usize; 2],
    pub precision: Precision,
    pub buckets: Option<usize>,
    pub tables: Option<usize>,
    pub scheme_seed: Option<u64>,
    pub scheme_file: Option<PathBuf>,
    pub ks: Vec<usize>,
    pub out_dir: PathBuf,
    pub record_time: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let fed = FedConfig::fedavg();
        ExperimentConfig {
            seed: 0,
            train: None,
            test: None,
            holdout: 0.2,
            feature_dim: 0,
            feature_seed: None,
            synth: SyntheticSpec::default(),
            synth_seed: None,
            frequent: None,
            partition_seed: None,
            plan: None,
            algorithm: Algorithm::FedAvg,
            clients: fed.clients,
            selected: fed.selected,
            rounds: fed.rounds,
            local_epochs: fed.local_epochs,
            weighting: None,
            download_scope: None,
            lr: fed.lr,
            batch_size: fed.batch_size,
            patience: fed.early_stop_patience,
            eval_each_round: fed.eval_each_round,
            score: fed.score_kind,
            merge: fed.merge_mode,
            fed_seed: None,
            hidden: fed.hidden,
            precision: Precision::F32,
            buckets: None,
            tables: None,
            scheme_seed: None,
            scheme_file: None,
            ks: REPORTED_KS.to_vec(),
            out_dir: PathBuf::from("out"),
            record_time: false,
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::config(format!("invalid value `{value}` for `{key}`")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        _ => Err(Error::config(format!("invalid boolean `{value}` for `{key}`"))),
    }
}

fn parse_list(key: &str, value: &str) -> Result<Vec<usize>> {
    value.split(',').map(|v| parse(key, v.trim())).collect()
}

fn opt_path(value: &str) -> Option<PathBuf> {
    (!value.is_empty()).then(|| PathBuf::from(value))
}

fn show_opt<T: ToString>(v: &Option<T>) -> String {
    v.as_ref().map_or(String::new(), T::to_string)
}

fn show_path(v: &Option<PathBuf>) -> String {
    v.as_ref().map_or(String::new(), |p| p.display().to_string())
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut c = ExperimentConfig::default();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::config(format!("line {}: expected key=value", n + 1)))?;
            c.set(key.trim(), value.trim()).map_err(|e| match e {
                Error::Config(m) => Error::config(format!("line {}: {m}", n + 1)),
                other => other,
            })?;
        }
        Ok(c)
    }

    /// Set one key. Empty values reset optional keys.
    pub fn set(&mut self, key: &str, v: &str) -> Result<()> {
        match key {
            "seed" => self.seed = parse(key, v)?,
            "data.train" => self.train = opt_path(v),
            "data.test" => self.test = opt_path(v),
            "data.holdout" => self.holdout = parse(key, v)?,
            "data.feature_dim" => self.feature_dim = parse(key, v)?,
            "data.feature_seed" => self.feature_seed = opt(key, v)?,
            "synth.n" => self.synth.num_samples = parse(key, v)?,
            "synth.d" => self.synth.dim = parse(key, v)?,
            "synth.p" => self.synth.num_classes = parse(key, v)?,
            "synth.zipf" => self.synth.zipf_exponent = parse(key, v)?,
            "synth.features_per_class" => self.synth.features_per_class = parse(key, v)?,
            "synth.noise" => self.synth.noise_rate = parse(key, v)?,
            "synth.labels_per_sample" => self.synth.labels_per_sample = parse(key, v)?,
            "synth.seed" => self.synth_seed = opt(key, v)?,
            "partition.F" => self.frequent = opt(key, v)?,
            "partition.seed" => self.partition_seed = opt(key, v)?,
            "partition.plan" => self.plan = opt_path(v),
            "fed.algorithm" => self.algorithm = parse_enum(v)?,
            "fed.K" => self.clients = parse(key, v)?,
            "fed.S" => self.selected = parse(key, v)?,
            "fed.T" => self.rounds = parse(key, v)?,
            "fed.E" => self.local_epochs = parse(key, v)?,
            "fed.weighting" => self.weighting = opt_enum(v)?,
            "fed.download_scope" => self.download_scope = opt_enum(v)?,
            "fed.lr" => self.lr = parse(key, v)?,
            "fed.batch_size" => self.batch_size = parse(key, v)?,
            "fed.patience" => {
                self.patience = match v {
                    "" | "none" | "0" => None,
                    _ => Some(parse(key, v)?),
                }
            }
            "fed.eval_each_round" => self.eval_each_round = parse_bool(key, v)?,
            "fed.score" => self.score = parse_enum(v)?,
            "fed.merge" => {
                self.merge = match v {
                    "mean" => MergeMode::Mean,
                    "median" => MergeMode::Median,
                    _ => return Err(Error::config(format!("unknown merge mode `{v}` (mean, median)"))),
                }
            }
            "fed.seed" => self.fed_seed = opt(key, v)?,
            "model.hidden" => {
                let h = parse_list(key, v)?;
                self.hidden = h
                    .try_into()
                    .map_err(|_| Error::config("model.hidden takes two widths, e.g. 128,128"))?;
            }
            "model.precision" => self.precision = parse(key, v)?,
            "scheme.B" => self.buckets = opt(key, v)?,
            "scheme.R" => self.tables = opt(key, v)?,
            "scheme.seed" => self.scheme_seed = opt(key, v)?,
            "scheme.file" => self.scheme_file = opt_path(v),
            "metrics.ks" => self.ks = parse_list(key, v)?,
            "output.dir" => self.out_dir = PathBuf::from(v),
            "output.record_time" => self.record_time = parse_bool(key, v)?,
            _ => return Err(Error::config(format!("unknown key `{key}`"))),
        }
        Ok(())
    }

    pub fn synth_spec(&self) -> SyntheticSpec {
        SyntheticSpec {
            seed: self.synth_seed.unwrap_or(self.seed),
            ..self.synth.clone()
        }
    }

    pub fn feature_seed(&self) -> u64 {
        self.feature_seed.unwrap_or(self.seed)
    }

    pub fn partition_seed(&self) -> u64 {
        self.partition_seed.unwrap_or(self.seed)
    }

    pub fn fed_seed(&self) -> u64 {
        self.fed_seed.unwrap_or(self.seed)
    }

    pub fn scheme_seed(&self) -> u64 {
        self.scheme_seed.unwrap_or(self.seed)
    }

    pub fn validate(&self) -> Result<()> {
        if self.train.is_none() {
            self.synth_spec().validate()?;
        }
        if self.test.is_none() && !(self.holdout > 0.0 && self.holdout < 1.0) {
            return Err(Error::config("data.holdout must lie in (0, 1) when no test file is given"));
        }
        if self.ks.is_empty() || self.ks.iter().any(|k| !REPORTED_KS.contains(k)) {
            return Err(Error::config("metrics.ks must be a non-empty subset of 1,3,5"));
        }
        if self.algorithm == Algorithm::FedMlh
            && self.scheme_file.is_none()
            && (self.buckets.is_none() || self.tables.is_none())
        {
            return Err(Error::config("fedmlh requires scheme.B and scheme.R (or scheme.file)"));
        }
        self.fed_config(None).validate().or_else(|e| match e {
            // The scheme is attached later; everything else must hold now.
            Error::Config(m) if m.contains("label hash scheme") => Ok(()),
            e => Err(e),
        })
    }

    /// The federation settings, with the algorithm's defaults for anything
    /// left unset.
    pub fn fed_config(&self, scheme: Option<LabelHashScheme>) -> FedConfig {
        let base = FedConfig::new(self.algorithm);
        FedConfig {
            clients: self.clients,
            selected: self.selected,
            rounds: self.rounds,
            local_epochs: self.local_epochs,
            scheme,
            hidden: self.hidden,
            weighting: self.weighting.unwrap_or(base.weighting),
            download_scope: self.download_scope.unwrap_or(base.download_scope),
            lr: self.lr,
            batch_size: self.batch_size,
            early_stop_patience: self.patience,
            eval_each_round: self.eval_each_round,
            score_kind: self.score,
            merge_mode: self.merge,
            seed: self.fed_seed(),
            ..base
        }
    }

    /// Every key with its resolved value; parses back to an equivalent
    /// configuration.
    pub fn to_kv(&self) -> String {
        let fed = self.fed_config(None);
        let s = self.synth_spec();
        let mut o = String::new();
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(o, "{k}={v}");
        };
        kv("seed", self.seed.to_string());
        kv("data.train", show_path(&self.train));
        kv("data.test", show_path(&self.test));
        kv("data.holdout", self.holdout.to_string());
        kv("data.feature_dim", self.feature_dim.to_string());
        kv("data.feature_seed", self.feature_seed().to_string());
        kv("synth.n", s.num_samples.to_string());
        kv("synth.d", s.dim.to_string());
        kv("synth.p", s.num_classes.to_string());
        kv("synth.zipf", s.zipf_exponent.to_string());
        kv("synth.features_per_class", s.features_per_class.to_string());
        kv("synth.noise", s.noise_rate.to_string());
        kv("synth.labels_per_sample", s.labels_per_sample.to_string());
        kv("synth.seed", s.seed.to_string());
        kv("partition.F", show_opt(&self.frequent));
        kv("partition.seed", self.partition_seed().to_string());
        kv("partition.plan", show_path(&self.plan));
        kv("fed.algorithm", self.algorithm.to_string());
        kv("fed.K", self.clients.to_string());
        kv("fed.S", self.selected.to_string());
        kv("fed.T", self.rounds.to_string());
        kv("fed.E", self.local_epochs.to_string());
        kv("fed.weighting", fed.weighting.to_string());
        kv("fed.download_scope", fed.download_scope.to_string());
        kv("fed.lr", self.lr.to_string());
        kv("fed.batch_size", self.batch_size.to_string());
        kv("fed.patience", self.patience.map_or("none".into(), |p| p.to_string()));
        kv("fed.eval_each_round", self.eval_each_round.to_string());
        kv("fed.score", self.score.to_string());
        kv(
            "fed.merge",
            match self.merge {
                MergeMode::Mean => "mean",
                MergeMode::Median => "median",
            }
            .into(),
        );
        kv("fed.seed", self.fed_seed().to_string());
        kv("model.hidden", format!("{},{}", self.hidden[0], self.hidden[1]));
        kv("model.precision", self.precision.name().into());
        kv("scheme.B", show_opt(&self.buckets));
        kv("scheme.R", show_opt(&self.tables));
        kv("scheme.seed", self.scheme_seed().to_string());
        kv("scheme.file", show_path(&self.scheme_file));
        kv(
            "metrics.ks",
            self.ks.iter().map(usize::to_string).collect::<Vec<_>>().join(","),
        );
        kv("output.dir", self.out_dir.display().to_string());
        kv("output.record_time", self.record_time.to_string());
        o
    }
}

fn opt<T: FromStr>(key: &str, v: &str) -> Result<Option<T>> {
    if v.is_empty() {
        Ok(None)
    } else {
        parse(key, v).map(Some)
    }
}

fn parse_enum<T: FromStr<Err = Error>>(v: &str) -> Result<T> {
    v.parse()
}

fn opt_enum<T: FromStr<Err = Error>>(v: &str) -> Result<Option<T>> {
    if v.is_empty() {
        Ok(None)
    } else {
        v.parse().map(Some)
    }
}
