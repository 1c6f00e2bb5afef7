use std::fmt::Write as _;
use std::time::Instant;

use rand::seq::{index, SliceRandom};
use rand::Rng;
use rayon::prelude::*;

use crate::data::{PartitionPlan, SparseDataset, SparseVector};
use crate::error::{Error, Result};
use crate::federation::config::{Algorithm, DownloadScope, FedConfig, ScoreKind, Weighting};
use crate::federation::ledger::CommLedger;
use crate::hashing::{LabelHashScheme, MergeMode};
use crate::metrics::{EvalResult, TopKAccumulator};
use crate::model::{average_params, log_sigmoid, MlpConfig, MlpParams, Real};
use crate::rng::{self, tag};

const EVAL_CHUNK: usize = 256;

/// Uniform sample of `s` distinct client ids out of `k`, sorted ascending.
/// Deterministic in `(seed, round)`.
pub fn select_clients(k: usize, s: usize, seed: u64, round: usize) -> Result<Vec<usize>> {
    if s > k {
        return Err(Error::config(format!("cannot select {s} of {k} clients")));
    }
    let mut r = rng::stream(seed, &[tag::CLIENT_SELECT, round as u64]);
    let mut ids = index::sample(&mut r, k, s).into_vec();
    ids.sort_unstable();
    Ok(ids)
}

/// `epochs` passes of mini-batch SGD over `shard`, each over a fresh
/// shuffle of the shard drawn from `rng`, so that two calls of one epoch
/// sharing `rng` equal one call of two. Each shard entry pairs an input with its positive
/// output indices. Returns the mean batch loss of the final pass (0 for an
/// empty shard).
pub fn local_train<T: Real, R: Rng + ?Sized>(
    params: &mut MlpParams<T>,
    shard: &[(&SparseVector, &[u32])],
    epochs: usize,
    lr: f64,
    batch_size: usize,
    rng: &mut R,
) -> Result<f64> {
    if epochs == 0 || batch_size == 0 {
        return Err(Error::config("local training needs epochs >= 1 and batch size >= 1"));
    }
    let mut last = 0.0;
    for _ in 0..epochs {
        let mut order: Vec<usize> = (0..shard.len()).collect();
        order.shuffle(rng);
        let mut total = 0.0;
        let mut batches = 0usize;
        for chunk in order.chunks(batch_size) {
            let xs: Vec<&SparseVector> = chunk.iter().map(|&i| shard[i].0).collect();
            let ys: Vec<&[u32]> = chunk.iter().map(|&i| shard[i].1).collect();
            let (loss, g) = params.loss_and_grad_sparse(&xs, &ys)?;
            params.apply_sgd(&g, lr)?;
            total += loss;
            batches += 1;
        }
        last = if batches == 0 { 0.0 } else { total / batches as f64 };
    }
    Ok(last)
}

/// The server-side model: one network for FedAvg, or R sub-models plus the
/// label hash scheme for FedMLH.
#[derive(Debug, Clone, PartialEq)]
pub struct GlobalModel<T> {
    algorithm: Algorithm,
    models: Vec<MlpParams<T>>,
    scheme: Option<LabelHashScheme>,
    score_kind: ScoreKind,
    merge_mode: MergeMode,
}

impl<T: Real> GlobalModel<T> {
    pub fn algorithm(&self) -> Algorithm {
        self.algorithm
    }

    pub fn models(&self) -> &[MlpParams<T>] {
        &self.models
    }

    pub fn scheme(&self) -> Option<&LabelHashScheme> {
        self.scheme.as_ref()
    }

    pub fn num_classes(&self) -> usize {
        match &self.scheme {
            Some(s) => s.num_classes(),
            None => self.models[0].output_dim(),
        }
    }

    /// Bytes one client sends (or receives) per round.
    pub fn bytes_per_client(&self) -> u64 {
        self.models.iter().map(|m| m.byte_size() as u64).sum()
    }

    pub fn param_count(&self) -> usize {
        self.models.iter().map(|m| m.param_count()).sum()
    }

    fn transform(&self, z: T) -> f64 {
        let z = z.to_f64().unwrap();
        match self.score_kind {
            ScoreKind::LogLikelihood => log_sigmoid(z),
            ScoreKind::Logit => z,
        }
    }

    /// Per-class scores, row-major `n × p`. FedMLH merges per-table bucket
    /// scores with the configured merge mode.
    pub fn class_scores(&self, xs: &[&SparseVector]) -> Result<Vec<f64>> {
        let d = self.models[0].input_dim();
        if let Some(bad) = xs.iter().flat_map(|x| x.indices()).find(|&&i| i as usize >= d) {
            return Err(Error::shape(format!("feature index {bad} >= input dimension {d}")));
        }
        let n = xs.len();
        let p = self.num_classes();
        match &self.scheme {
            None => Ok(self.models[0]
                .forward_batch(xs)
                .into_iter()
                .map(|z| self.transform(z))
                .collect()),
            Some(scheme) => {
                let b = scheme.num_buckets();
                let r = self.models.len();
                let outs: Vec<Vec<T>> = self.models.iter().map(|m| m.forward_batch(xs)).collect();
                let mut table_scores = vec![0.0; r * b];
                let mut merged = vec![0.0; n * p];
                for i in 0..n {
                    for (j, out) in outs.iter().enumerate() {
                        for (dst, &z) in table_scores[j * b..(j + 1) * b].iter_mut().zip(&out[i * b..(i + 1) * b]) {
                            *dst = self.transform(z);
                        }
                    }
                    scheme.merge_scores_into(&table_scores, self.merge_mode, &mut merged[i * p..(i + 1) * p]);
                }
                Ok(merged)
            }
        }
    }

    /// Top-1/3/5 precision on `ds`, split by `frequent_set`.
    pub fn evaluate(&self, ds: &SparseDataset, frequent_set: &[u32]) -> Result<EvalResult> {
        let p = self.num_classes();
        if ds.num_classes() != p {
            return Err(Error::shape(format!(
                "evaluation set has {} classes, model has {p}",
                ds.num_classes()
            )));
        }
        let mut acc = TopKAccumulator::new(p, frequent_set);
        for chunk in ds.samples().chunks(EVAL_CHUNK) {
            let xs: Vec<&SparseVector> = chunk.iter().map(|s| &s.features).collect();
            let scores = self.class_scores(&xs)?;
            for (s, row) in chunk.iter().zip(scores.chunks_exact(p)) {
                acc.add(row, &s.positives);
            }
        }
        Ok(acc.finish())
    }
}

/// One synchronization round.
#[derive(Debug, Clone, PartialEq)]
pub struct RoundRecord {
    /// 1-based.
    pub round: usize,
    pub selected: Vec<usize>,
    /// Mean final-epoch loss over the (client, sub-model) tasks that had data.
    pub train_loss: f64,
    pub eval: Option<EvalResult>,
    pub upload_bytes_cum: u64,
    pub download_bytes_cum: u64,
    pub seconds: f64,
}

/// Outcome of a simulation.
#[derive(Debug, Clone)]
pub struct TrainedGlobal<T> {
    pub final_model: GlobalModel<T>,
    /// Global model after the best evaluated round.
    pub best_model: GlobalModel<T>,
    /// Round maximizing mean top-k, earliest on ties. Without evaluation it
    /// is the last round run.
    pub best_round: usize,
    pub history: Vec<RoundRecord>,
    pub ledger: CommLedger,
    pub stopped_early: bool,
}

/// Column header of [`TrainedGlobal::history_csv`].
pub const HISTORY_HEADER: &str = "round,algorithm,top1,top3,top5,upload_bytes_cum,download_bytes_cum,seconds";

impl<T: Real> TrainedGlobal<T> {
    pub fn algorithm(&self) -> Algorithm {
        self.final_model.algorithm
    }

    pub fn rounds_run(&self) -> usize {
        self.history.len()
    }

    pub fn best_eval(&self) -> Option<EvalResult> {
        self.history.get(self.best_round.checked_sub(1)?)?.eval
    }

    pub fn final_eval(&self) -> Option<EvalResult> {
        self.history.last()?.eval
    }

    /// Upload bytes through the best round: the headline communication cost.
    pub fn upload_to_best(&self) -> u64 {
        self.ledger.totals(self.best_round).map_or(0, |t| t.upload_bytes)
    }

    /// First round whose top-1 reaches `target`, if any.
    pub fn first_round_reaching(&self, target: f64) -> Option<usize> {
        self.history
            .iter()
            .find(|r| r.eval.is_some_and(|e| e.top1 >= target))
            .map(|r| r.round)
    }

    /// Round history as CSV. Wall-clock seconds are written as 0 unless
    /// `record_time` is set, so that reruns are byte-identical.
    pub fn history_csv(&self, record_time: bool) -> String {
        let mut s = String::from(HISTORY_HEADER);
        s.push('\n');
        let alg = self.algorithm().name();
        for r in &self.history {
            let (t1, t3, t5) = match r.eval {
                Some(e) => (e.top1.to_string(), e.top3.to_string(), e.top5.to_string()),
                None => Default::default(),
            };
            let secs = if record_time { r.seconds } else { 0.0 };
            let _ = writeln!(
                s,
                "{},{alg},{t1},{t3},{t5},{},{},{secs}",
                r.round, r.upload_bytes_cum, r.download_bytes_cum
            );
        }
        s
    }

    /// Best-round and ledger summary as `key=value` lines.
    pub fn summary_kv(&self) -> String {
        let mut s = String::new();
        let best = self.ledger.totals(self.best_round).unwrap_or_default();
        let total = self.ledger.total();
        let per_client = self.final_model.bytes_per_client();
        let _ = writeln!(s, "algorithm={}", self.algorithm());
        let _ = writeln!(s, "rounds_run={}", self.rounds_run());
        let _ = writeln!(s, "stopped_early={}", self.stopped_early);
        let _ = writeln!(s, "best_round={}", self.best_round);
        if let Some(e) = self.best_eval() {
            for (k, v) in [1, 3, 5].iter().zip(e.topk()) {
                let _ = writeln!(s, "best_top{k}={v}");
            }
            let _ = writeln!(s, "best_mean_topk={}", e.mean_topk());
        }
        if let Some(e) = self.final_eval() {
            for (k, v) in [1, 3, 5].iter().zip(e.topk()) {
                let _ = writeln!(s, "final_top{k}={v}");
            }
        }
        let _ = writeln!(s, "upload_bytes_to_best={}", best.upload_bytes);
        let _ = writeln!(s, "download_bytes_to_best={}", best.download_bytes);
        let _ = writeln!(s, "upload_mb_to_best={:.2}", best.upload_bytes as f64 / 1e6);
        let _ = writeln!(s, "upload_bytes_total={}", total.upload_bytes);
        let _ = writeln!(s, "download_bytes_total={}", total.download_bytes);
        let _ = writeln!(s, "model_bytes={per_client}");
        let _ = writeln!(s, "model_mb={:.2}", per_client as f64 / 1e6);
        let _ = writeln!(s, "submodels={}", self.final_model.models.len());
        let _ = writeln!(s, "submodel_bytes={}", self.final_model.models[0].byte_size());
        let _ = writeln!(s, "params={}", self.final_model.param_count());
        s
    }
}

/// FedAvg over `plan`'s clients, evaluating on `eval` when given.
pub fn run_fedavg<T: Real>(
    train: &SparseDataset,
    eval: Option<&SparseDataset>,
    plan: &PartitionPlan,
    cfg: &FedConfig,
) -> Result<TrainedGlobal<T>> {
    if cfg.algorithm != Algorithm::FedAvg {
        return Err(Error::config("run_fedavg needs algorithm = fedavg"));
    }
    run_federated(train, eval, plan, cfg)
}

/// FedMLH: R sub-models trained on hashed bucket labels.
pub fn run_fedmlh<T: Real>(
    train: &SparseDataset,
    eval: Option<&SparseDataset>,
    plan: &PartitionPlan,
    cfg: &FedConfig,
) -> Result<TrainedGlobal<T>> {
    if cfg.algorithm != Algorithm::FedMlh {
        return Err(Error::config("run_fedmlh needs algorithm = fedmlh"));
    }
    run_federated(train, eval, plan, cfg)
}

/// Runs whichever algorithm `cfg` names. Local training tasks run on the
/// current rayon pool; results do not depend on its size.
pub fn run_federated<T: Real>(
    train: &SparseDataset,
    eval: Option<&SparseDataset>,
    plan: &PartitionPlan,
    cfg: &FedConfig,
) -> Result<TrainedGlobal<T>> {
    cfg.validate()?;
    plan.validate(train)?;
    if plan.num_clients() != cfg.clients {
        return Err(Error::config(format!(
            "partition has {} clients, config says {}",
            plan.num_clients(),
            cfg.clients
        )));
    }
    if let Some(e) = eval {
        if e.dim() != train.dim() || e.num_classes() != train.num_classes() {
            return Err(Error::shape("evaluation set shape differs from training set"));
        }
    }

    // targets[j][n]: positive outputs of sample n for sub-model j.
    let (scheme, targets) = match cfg.algorithm {
        Algorithm::FedAvg => (None, vec![train.labels().map(<[u32]>::to_vec).collect::<Vec<_>>()]),
        Algorithm::FedMlh => {
            let scheme = cfg.scheme.clone().expect("validated");
            if scheme.num_classes() != train.num_classes() {
                return Err(Error::config(format!(
                    "scheme covers {} classes, dataset has {}",
                    scheme.num_classes(),
                    train.num_classes()
                )));
            }
            let targets = (0..scheme.num_tables())
                .map(|j| train.labels().map(|l| scheme.table_buckets(j, l)).collect())
                .collect::<Result<Vec<Vec<_>>>>()?;
            (Some(scheme), targets)
        }
    };
    let out_dim = scheme.as_ref().map_or(train.num_classes(), |s| s.num_buckets());
    let models = (0..targets.len())
        .map(|j| {
            let mc = MlpConfig::new(train.dim(), cfg.hidden, out_dim)
                .with_precision(T::PRECISION)
                .with_seed(rng::derive_seed(cfg.seed, &[tag::MODEL_INIT, j as u64]));
            MlpParams::<T>::init(&mc)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut global = GlobalModel {
        algorithm: cfg.algorithm,
        models,
        scheme,
        score_kind: cfg.score_kind,
        merge_mode: cfg.merge_mode,
    };
    let per_client = global.bytes_per_client();
    let downloaders = match cfg.download_scope {
        DownloadScope::Selected => cfg.selected,
        DownloadScope::All => cfg.clients,
    } as u64;

    let mut ledger = CommLedger::new();
    let mut history = Vec::with_capacity(cfg.rounds);
    let mut best: Option<(f64, usize, GlobalModel<T>)> = None;
    let mut stopped_early = false;

    for t in 1..=cfg.rounds {
        let started = Instant::now();
        let selected = select_clients(cfg.clients, cfg.selected, cfg.seed, t)?;
        let tasks: Vec<(usize, usize)> = selected
            .iter()
            .flat_map(|&k| (0..global.models.len()).map(move |j| (k, j)))
            .collect();

        let results = tasks
            .par_iter()
            .map(|&(k, j)| {
                let shard: Vec<(&SparseVector, &[u32])> = plan
                    .client(k)
                    .iter()
                    .map(|&n| (&train.samples()[n].features, targets[j][n].as_slice()))
                    .collect();
                let mut params = global.models[j].clone();
                let mut r = rng::stream(cfg.seed, &[tag::LOCAL_SHUFFLE, t as u64, k as u64, j as u64]);
                let loss = local_train(&mut params, &shard, cfg.local_epochs, cfg.lr, cfg.batch_size, &mut r)?;
                Ok((params, loss, shard.len()))
            })
            .collect::<Result<Vec<_>>>()?;

        let weights: Vec<f64> = selected
            .iter()
            .map(|&k| match cfg.weighting {
                Weighting::Uniform => 1.0,
                Weighting::SampleProportional => plan.client(k).len() as f64,
            })
            .collect();
        let r = global.models.len();
        if weights.iter().any(|&w| w > 0.0) {
            for j in 0..r {
                let locals: Vec<&MlpParams<T>> = (0..selected.len()).map(|s| &results[s * r + j].0).collect();
                global.models[j] = average_params(&locals, &weights)?;
            }
        }
        let trained: Vec<f64> = results.iter().filter(|x| x.2 > 0).map(|x| x.1).collect();
        let train_loss = if trained.is_empty() {
            0.0
        } else {
            trained.iter().sum::<f64>() / trained.len() as f64
        };

        ledger.record_round(per_client, cfg.selected as u64, downloaders);
        let cum = ledger.total();

        let eval_result = match eval {
            Some(ds) if cfg.eval_each_round || t == cfg.rounds => {
                Some(global.evaluate(ds, plan.frequent_set())?)
            }
            _ => None,
        };
        if let Some(e) = eval_result {
            let score = e.mean_topk();
            if best.as_ref().map_or(true, |b| score > b.0) {
                best = Some((score, t, global.clone()));
            }
        }
        history.push(RoundRecord {
            round: t,
            selected,
            train_loss,
            eval: eval_result,
            upload_bytes_cum: cum.upload_bytes,
            download_bytes_cum: cum.download_bytes,
            seconds: started.elapsed().as_secs_f64(),
        });

        if let (Some(patience), Some((_, best_round, _)), Some(_)) = (cfg.early_stop_patience, &best, eval_result) {
            if t < cfg.rounds && t - best_round >= patience {
                stopped_early = true;
                break;
            }
        }
    }

    let last = history.len();
    let (best_round, best_model) = match best {
        Some((_, round, model)) => (round, model),
        None => (last, global.clone()),
    };
    Ok(TrainedGlobal {
        final_model: global,
        best_model,
        best_round,
        history,
        ledger,
        stopped_early,
    })
}
