//! Federated training: reductions, determinism and ledger identities.

mod common;

use fedsketch::data::{partition_noniid, PartitionPlan, SparseDataset, SparseVector};
use fedsketch::federation::{
    local_train, run_federated, select_clients, Algorithm, DownloadScope, FedConfig, TrainedGlobal, Weighting,
};
use fedsketch::hashing::LabelHashScheme;
use fedsketch::model::{init_mlp, MlpConfig, MlpParams, Precision};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn small_cfg(alg: Algorithm, scheme: Option<LabelHashScheme>) -> FedConfig {
    let mut cfg = FedConfig::new(alg);
    cfg.scheme = scheme;
    cfg.clients = 4;
    cfg.selected = 2;
    cfg.rounds = 3;
    cfg.local_epochs = 2;
    cfg.hidden = [16, 8];
    cfg.lr = 0.5;
    cfg.batch_size = 16;
    cfg.early_stop_patience = None;
    cfg.eval_each_round = true;
    cfg.seed = 11;
    cfg
}

fn setup(n: usize) -> (SparseDataset, SparseDataset, PartitionPlan) {
    let ds = common::synthetic(n, 60, 20, 5);
    let (train, test) = ds.split_holdout(0.2, 1).unwrap();
    let plan = partition_noniid(&train, 4, 3, 2).unwrap();
    (train, test, plan)
}

fn run(train: &SparseDataset, test: &SparseDataset, plan: &PartitionPlan, cfg: &FedConfig) -> TrainedGlobal<f64> {
    run_federated(train, Some(test), plan, cfg).unwrap()
}

fn same_params(a: &MlpParams<f64>, b: &MlpParams<f64>) -> bool {
    a.tensors().iter().zip(b.tensors()).all(|(x, y)| x == &y)
}

#[test]
fn fedmlh_with_one_identity_table_reduces_to_fedavg() {
    let (train, test, plan) = setup(500);
    let mut avg = small_cfg(Algorithm::FedAvg, None);
    avg.weighting = Weighting::Uniform;
    let mut mlh = small_cfg(Algorithm::FedMlh, Some(LabelHashScheme::identity(20, 1).unwrap()));
    mlh.weighting = Weighting::Uniform;
    let a = run(&train, &test, &plan, &avg);
    let m = run(&train, &test, &plan, &mlh);
    let xs: Vec<&SparseVector> = test.samples().iter().map(|s| &s.features).collect();
    let sa = a.final_model.class_scores(&xs).unwrap();
    let sm = m.final_model.class_scores(&xs).unwrap();
    let worst = sa.iter().zip(&sm).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    assert!(worst <= 1e-6, "max score difference {worst}");
}

#[test]
fn reruns_are_identical() {
    let (train, test, plan) = setup(300);
    let cfg = small_cfg(Algorithm::FedMlh, Some(LabelHashScheme::generate(20, 8, 3, 4).unwrap()));
    let a = run(&train, &test, &plan, &cfg);
    let b = run(&train, &test, &plan, &cfg);
    assert_eq!(a.history_csv(false), b.history_csv(false));
    assert_eq!(a.summary_kv(), b.summary_kv());
    for (x, y) in a.final_model.models().iter().zip(b.final_model.models()) {
        assert!(same_params(x, y));
    }
}

#[test]
fn thread_count_does_not_change_results() {
    let (train, test, plan) = setup(300);
    let cfg = small_cfg(Algorithm::FedMlh, Some(LabelHashScheme::generate(20, 8, 3, 4).unwrap()));
    let in_pool = |threads| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| run(&train, &test, &plan, &cfg))
    };
    let one = in_pool(1);
    let four = in_pool(4);
    assert_eq!(one.history_csv(false), four.history_csv(false));
    for (x, y) in one.final_model.models().iter().zip(four.final_model.models()) {
        assert!(same_params(x, y));
    }
}

#[test]
fn adding_a_table_leaves_existing_submodels_unchanged() {
    let (train, test, plan) = setup(300);
    let two = small_cfg(Algorithm::FedMlh, Some(LabelHashScheme::generate(20, 8, 2, 4).unwrap()));
    let three = small_cfg(Algorithm::FedMlh, Some(LabelHashScheme::generate(20, 8, 3, 4).unwrap()));
    let a = run(&train, &test, &plan, &two);
    let b = run(&train, &test, &plan, &three);
    for j in 0..2 {
        assert!(same_params(&a.final_model.models()[j], &b.final_model.models()[j]));
    }
}

#[test]
fn ledger_matches_config_arithmetic() {
    let (train, test, plan) = setup(300);
    for (alg, scheme) in [
        (Algorithm::FedAvg, None),
        (Algorithm::FedMlh, Some(LabelHashScheme::generate(20, 8, 3, 4).unwrap())),
    ] {
        let cfg = small_cfg(alg, scheme.clone());
        let out = run(&train, &test, &plan, &cfg);
        let (outputs, models) = scheme.map_or((20, 1), |s| (s.num_buckets(), s.num_tables()));
        let per_model = MlpConfig::new(train.dim(), cfg.hidden, outputs)
            .with_precision(Precision::F64)
            .byte_size() as u64;
        let per_client = per_model * models as u64;
        let down = match cfg.download_scope {
            DownloadScope::Selected => cfg.selected,
            DownloadScope::All => cfg.clients,
        } as u64;
        for r in &out.history {
            assert_eq!(r.upload_bytes_cum, r.round as u64 * cfg.selected as u64 * per_client);
            assert_eq!(r.download_bytes_cum, r.round as u64 * down * per_client);
        }
        assert_eq!(
            out.upload_to_best(),
            out.best_round as u64 * cfg.selected as u64 * per_client
        );
    }
}

fn shard_of(ds: &SparseDataset) -> Vec<(&SparseVector, &[u32])> {
    ds.samples().iter().map(|s| (&s.features, s.positives.as_slice())).collect()
}

#[test]
fn zero_learning_rate_keeps_parameters() {
    let ds = common::synthetic(50, 30, 5, 1);
    let cfg = MlpConfig::new(30, [8, 4], 5).with_precision(Precision::F64).with_seed(2);
    let init = init_mlp::<f64>(&cfg).unwrap();
    let mut p = init.clone();
    local_train(&mut p, &shard_of(&ds), 3, 0.0, 7, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
    assert!(same_params(&p, &init));
}

#[test]
fn two_epochs_equal_two_chained_single_epochs() {
    let ds = common::synthetic(50, 30, 5, 1);
    let cfg = MlpConfig::new(30, [8, 4], 5).with_precision(Precision::F64).with_seed(2);
    let shard = shard_of(&ds);
    let mut a = init_mlp::<f64>(&cfg).unwrap();
    let mut b = a.clone();
    local_train(&mut a, &shard, 2, 0.3, 7, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
    let mut r = ChaCha8Rng::seed_from_u64(9);
    local_train(&mut b, &shard, 1, 0.3, 7, &mut r).unwrap();
    local_train(&mut b, &shard, 1, 0.3, 7, &mut r).unwrap();
    assert!(same_params(&a, &b));
}

#[test]
fn empty_shard_trains_nothing() {
    let cfg = MlpConfig::new(5, [3, 3], 2).with_precision(Precision::F64);
    let init = init_mlp::<f64>(&cfg).unwrap();
    let mut p = init.clone();
    let loss = local_train(&mut p, &[], 4, 1.0, 8, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
    assert_eq!(loss, 0.0);
    assert!(same_params(&p, &init));
}

#[test]
fn single_full_batch_round_is_one_gradient_step() {
    let ds = common::synthetic(40, 30, 6, 3);
    let plan = PartitionPlan::single_client(&ds);
    let mut cfg = small_cfg(Algorithm::FedAvg, None);
    cfg.clients = 1;
    cfg.selected = 1;
    cfg.rounds = 1;
    cfg.local_epochs = 1;
    cfg.batch_size = 1000;
    cfg.lr = 0.0;
    let init = run_federated::<f64>(&ds, None, &plan, &cfg).unwrap().final_model.models()[0].clone();
    cfg.lr = 0.7;
    let got = run_federated::<f64>(&ds, None, &plan, &cfg).unwrap().final_model.models()[0].clone();

    let xs: Vec<&SparseVector> = ds.samples().iter().map(|s| &s.features).collect();
    let ys: Vec<&[u32]> = ds.labels().collect();
    let (_, g) = init.loss_and_grad_sparse(&xs, &ys).unwrap();
    for ((w0, gw), w1) in init.tensors().iter().zip(g.tensors()).zip(got.tensors()) {
        for i in 0..w0.len() {
            assert!((w0[i] - 0.7 * gw[i] - w1[i]).abs() < 1e-12);
        }
    }
}

#[test]
fn one_client_federation_is_centralized_training() {
    let ds = common::synthetic(80, 30, 6, 3);
    let plan = PartitionPlan::single_client(&ds);
    let mut cfg = small_cfg(Algorithm::FedAvg, None);
    cfg.clients = 1;
    cfg.selected = 1;
    cfg.rounds = 3;
    cfg.local_epochs = 1;
    cfg.batch_size = 1000;
    cfg.lr = 0.0;
    let init = run_federated::<f64>(&ds, None, &plan, &cfg).unwrap().final_model.models()[0].clone();
    cfg.lr = 0.4;
    let fed = run_federated::<f64>(&ds, None, &plan, &cfg).unwrap();

    // With one client the average is the local model: three rounds are
    // three steps of full-batch gradient descent.
    let xs: Vec<&SparseVector> = ds.samples().iter().map(|s| &s.features).collect();
    let ys: Vec<&[u32]> = ds.labels().collect();
    let mut central = init;
    for _ in 0..3 {
        let (_, g) = central.loss_and_grad_sparse(&xs, &ys).unwrap();
        central.apply_sgd(&g, 0.4).unwrap();
    }
    let got = &fed.final_model.models()[0];
    for (a, b) in central.tensors().iter().zip(got.tensors()) {
        for (x, y) in a.iter().zip(b) {
            assert!((x - y).abs() < 1e-10);
        }
    }
    assert!(fed.history.iter().all(|r| r.selected == vec![0]));
}

#[test]
fn client_selection_is_uniform() {
    let (k, s, rounds) = (10, 1, 20_000);
    let mut hits = vec![0usize; k];
    for t in 1..=rounds {
        for c in select_clients(k, s, 3, t).unwrap() {
            hits[c] += 1;
        }
    }
    let q = s as f64 / k as f64;
    let se = (q * (1.0 - q) / rounds as f64).sqrt();
    for h in hits {
        assert!((h as f64 / rounds as f64 - q).abs() <= 3.0 * se + 1e-12, "frequency {}", h as f64 / rounds as f64);
    }
    let pick = select_clients(10, 4, 3, 7).unwrap();
    assert!(pick.windows(2).all(|w| w[0] < w[1]) && pick.len() == 4);
    assert!(select_clients(3, 4, 0, 1).is_err());
}

#[test]
fn mismatched_partition_is_rejected() {
    let (train, test, plan) = setup(200);
    let mut cfg = small_cfg(Algorithm::FedAvg, None);
    cfg.clients = 5;
    cfg.selected = 2;
    assert!(run_federated::<f64>(&train, Some(&test), &plan, &cfg).is_err());
    let cfg = small_cfg(Algorithm::FedMlh, None);
    assert!(run_federated::<f64>(&train, Some(&test), &plan, &cfg).is_err());
}
