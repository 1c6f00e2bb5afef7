//! Library results checked against independent brute-force computations.

mod common;

use fedsketch::data::SparseVector;
use fedsketch::hashing::{min_table_size, CountSketch, HashFunctionSpec, LabelHashScheme, MergeMode, MERSENNE_61};
use fedsketch::metrics::{bucket_proportions, freq_split_accuracy, topk_accuracy, LabelDistribution};
use fedsketch::model::{average_params, init_mlp, MlpConfig, MlpParams, Precision};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

#[test]
fn count_sketch_retrieval_matches_enumeration() {
    let mut r = rng(1);
    for trial in 0..20 {
        let domain = r.gen_range(5..40);
        let rows = r.gen_range(1..6);
        let buckets = r.gen_range(2..10);
        let mut cs = CountSketch::new(rows, buckets, domain, trial).unwrap();
        let x: Vec<f64> = (0..domain).map(|_| r.gen_range(-5.0..5.0)).collect();
        cs.insert_dense(&x).unwrap();
        for i in 0..domain {
            // Row estimate: Σ_{j: h(j) = h(i)} s(i)·s(j)·x_j.
            let mut est: Vec<f64> = (0..rows)
                .map(|k| {
                    (0..domain)
                        .filter(|&j| cs.bucket(k, j) == cs.bucket(k, i))
                        .map(|j| cs.sign(k, i) * cs.sign(k, j) * x[j])
                        .sum()
                })
                .collect();
            est.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let m = est.len();
            let median = if m % 2 == 1 {
                est[m / 2]
            } else {
                (est[m / 2 - 1] + est[m / 2]) / 2.0
            };
            let mean = est.iter().sum::<f64>() / m as f64;
            assert!((cs.retrieve(i).unwrap() - median).abs() < 1e-9);
            assert!((cs.retrieve_with(i, MergeMode::Mean).unwrap() - mean).abs() < 1e-9);
        }
    }
}

#[test]
fn count_sketch_without_collisions_is_exact() {
    let ident = |n| HashFunctionSpec::identity(n).unwrap();
    let sign = HashFunctionSpec::new(1, 0, 2, 2).unwrap();
    let mut cs = CountSketch::from_hashes(7, vec![ident(7), ident(7)], vec![sign, sign]).unwrap();
    let x = [3.0, -1.0, 0.0, 2.5, 9.0, -4.0, 1.0];
    cs.insert_dense(&x).unwrap();
    for (i, &v) in x.iter().enumerate() {
        assert_eq!(cs.retrieve(i).unwrap(), v);
    }
}

#[test]
fn merge_scores_matches_per_class_gather() {
    let mut r = rng(2);
    for seed in 0..30 {
        let p = r.gen_range(2..60);
        let b = r.gen_range(1..=p);
        let tables = r.gen_range(1..6);
        let s = LabelHashScheme::generate(p, b, tables, seed).unwrap();
        let scores: Vec<f64> = (0..tables * b).map(|_| r.gen_range(-3.0..3.0)).collect();
        for mode in [MergeMode::Mean, MergeMode::Median] {
            let merged = s.merge_scores(&scores, mode).unwrap();
            for c in 0..p {
                let mut g: Vec<f64> = (0..tables).map(|j| scores[j * b + s.bucket(j, c as u32)]).collect();
                g.sort_by(|x, y| x.partial_cmp(y).unwrap());
                let want = match mode {
                    MergeMode::Mean => g.iter().sum::<f64>() / tables as f64,
                    MergeMode::Median if tables % 2 == 1 => g[tables / 2],
                    MergeMode::Median => (g[tables / 2 - 1] + g[tables / 2]) / 2.0,
                };
                assert!((merged[c] - want).abs() < 1e-12, "p={p} b={b} class {c}");
            }
        }
    }
}

#[test]
fn bucket_labels_match_union_definition() {
    let mut r = rng(3);
    for seed in 0..30 {
        let p = r.gen_range(2..80);
        let b = r.gen_range(1..=p);
        let tables = r.gen_range(1..5);
        let s = LabelHashScheme::generate(p, b, tables, seed).unwrap();
        let mut pos: Vec<u32> = (0..r.gen_range(0..6)).map(|_| r.gen_range(0..p as u32)).collect();
        pos.sort_unstable();
        pos.dedup();
        let z = s.bucket_labels(&pos).unwrap();
        for j in 0..tables {
            for bucket in 0..b {
                let want = pos.iter().any(|&l| s.bucket(j, l) == bucket);
                assert_eq!(z.get(j, bucket) == 1, want);
            }
            let tb = s.table_buckets(j, &pos).unwrap();
            let want: Vec<u32> = (0..b as u32).filter(|&k| z.get(j, k as usize) == 1).collect();
            assert_eq!(tb, want);
        }
    }
}

#[test]
fn hash_family_collision_rate_is_near_one_over_range() {
    let mut r = rng(4);
    let range = 16u64;
    let trials = 20_000;
    for _ in 0..5 {
        let x = r.gen_range(0..1_000_000u64);
        let y = loop {
            let y = r.gen_range(0..1_000_000u64);
            if y != x {
                break y;
            }
        };
        let hits = (0..trials)
            .filter(|_| {
                let h = HashFunctionSpec::random(&mut r, range).unwrap();
                h.eval(x) == h.eval(y)
            })
            .count() as f64;
        let q = 1.0 / range as f64;
        let se = (q * (1.0 - q) / trials as f64).sqrt();
        assert!(hits / trials as f64 <= q + 3.0 * se, "rate {}", hits / trials as f64);
    }
}

#[test]
fn hash_eval_matches_big_integer_arithmetic() {
    let mut r = rng(5);
    for _ in 0..1000 {
        let range = r.gen_range(1..1000);
        let h = HashFunctionSpec::random(&mut r, range).unwrap();
        let x: u64 = r.gen();
        // Reduce x first, then multiply in two halves to avoid u128.
        let xm = x % MERSENNE_61;
        let (hi, lo) = (xm >> 32, xm & 0xffff_ffff);
        let mulmod = |a: u64, b: u64| ((a as u128 * b as u128) % MERSENNE_61 as u128) as u64;
        let ax = (mulmod(mulmod(h.a(), hi), 1 << 32) + mulmod(h.a(), lo)) % MERSENNE_61;
        let want = ((ax + h.b()) % MERSENNE_61) % h.range();
        assert_eq!(h.eval(x), want);
    }
}

#[test]
fn min_table_size_is_smallest_integer_solution() {
    for (p, delta, tables) in [(50, 0.1, 2), (3993, 0.05, 4), (200, 0.05, 1), (200, 0.05, 3), (7, 0.5, 5)] {
        let target = (p * (p - 1)) as f64 / (2.0 * delta);
        let got = min_table_size(p, delta, tables).unwrap();
        let ok = |b: u64| (b as f64).powi(tables as i32) >= target;
        assert!(ok(got) && (got == 1 || !ok(got - 1)), "p={p} R={tables}: {got}");
    }
    assert_eq!(min_table_size(50, 0.1, 2).unwrap(), 111);
    assert_eq!(min_table_size(3993, 0.05, 4).unwrap(), 113);
}

#[test]
fn sparse_forward_matches_dense_reference() {
    let mut r = rng(6);
    for seed in 0..10 {
        let d = r.gen_range(1..30);
        let cfg = MlpConfig::new(d, [r.gen_range(1..9), r.gen_range(1..9)], r.gen_range(1..7))
            .with_precision(Precision::F64)
            .with_seed(seed);
        let p = init_mlp::<f64>(&cfg).unwrap();
        let dense: Vec<f64> = (0..d)
            .map(|_| if r.gen_bool(0.4) { r.gen_range(-2.0..2.0) } else { 0.0 })
            .collect();
        let pairs: Vec<(u32, f64)> = dense
            .iter()
            .enumerate()
            .filter(|(_, &v)| v != 0.0)
            .map(|(i, &v)| (i as u32, v))
            .collect();
        let x = SparseVector::from_pairs(pairs, d).unwrap();
        let got = p.forward(&x).unwrap();
        let want = common::dense_forward(&p, &dense);
        for (g, w) in got.iter().zip(&want) {
            assert!((g - w).abs() < 1e-12);
        }
    }
}

#[test]
fn loss_matches_dense_reference() {
    let cfg = MlpConfig::new(6, [5, 4], 3).with_precision(Precision::F64).with_seed(3);
    let p = init_mlp::<f64>(&cfg).unwrap();
    let xs = [
        SparseVector::from_pairs(vec![(0, 1.0), (4, -0.5)], 6).unwrap(),
        SparseVector::from_pairs(vec![(2, 2.0)], 6).unwrap(),
    ];
    let pos: [&[u32]; 2] = [&[1], &[0, 2]];
    let (loss, _) = p.loss_and_grad_sparse(&[&xs[0], &xs[1]], &pos).unwrap();
    let dense_x: Vec<Vec<f64>> = xs.iter().map(|x| x.to_dense(6)).collect();
    let ys = vec![vec![0.0, 1.0, 0.0], vec![1.0, 0.0, 1.0]];
    assert!((loss - common::dense_loss(&p, &dense_x, &ys)).abs() < 1e-12);
}

#[test]
fn topk_matches_set_intersection() {
    let mut r = rng(7);
    for _ in 0..200 {
        let p = r.gen_range(1..40);
        let n = r.gen_range(1..8);
        let k = r.gen_range(1..=p.min(5));
        let scores: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..p).map(|_| r.gen_range(0..6) as f64).collect())
            .collect();
        let labels: Vec<Vec<u32>> = (0..n)
            .map(|_| {
                let mut l: Vec<u32> = (0..p as u32).filter(|_| r.gen_bool(0.2)).collect();
                l.sort_unstable();
                l
            })
            .collect();
        let frequent: Vec<u32> = (0..p as u32).filter(|_| r.gen_bool(0.3)).collect();
        let (mut hits, mut fhits) = (0usize, 0usize);
        for (s, l) in scores.iter().zip(&labels) {
            // Rank by (score desc, index asc) with a full sort.
            let mut idx: Vec<usize> = (0..p).collect();
            idx.sort_by(|&a, &b| s[b].partial_cmp(&s[a]).unwrap().then(a.cmp(&b)));
            for &c in &idx[..k] {
                if l.contains(&(c as u32)) {
                    hits += 1;
                    fhits += frequent.contains(&(c as u32)) as usize;
                }
            }
        }
        let denom = (n * k) as f64;
        assert_eq!(topk_accuracy(&scores, &labels, k).unwrap(), hits as f64 / denom);
        let (f, i) = freq_split_accuracy(&scores, &labels, k, &frequent).unwrap();
        assert_eq!(f, fhits as f64 / denom);
        assert!((f + i - hits as f64 / denom).abs() < 1e-12);
    }
}

#[test]
fn bucket_proportions_are_group_sums() {
    let mut r = rng(8);
    for seed in 0..20 {
        let p = r.gen_range(2..50);
        let b = r.gen_range(1..=p);
        let w: Vec<f64> = (0..p).map(|_| r.gen_range(0.01..1.0)).collect();
        let pi = LabelDistribution::from_weights(&w).unwrap();
        let s = LabelHashScheme::generate(p, b, 2, seed).unwrap();
        for j in 0..2 {
            let omega = bucket_proportions(&pi, &s, j).unwrap();
            for bucket in 0..b {
                let want: f64 = (0..p)
                    .filter(|&c| s.bucket(j, c as u32) == bucket)
                    .map(|c| pi.proportions()[c])
                    .sum();
                assert!((omega.proportions()[bucket] - want).abs() < 1e-15);
            }
        }
    }
}

#[test]
fn average_matches_elementwise_mean() {
    let cfg = MlpConfig::new(4, [3, 2], 2).with_precision(Precision::F64);
    let ms: Vec<MlpParams<f64>> = (0..3).map(|s| init_mlp(&cfg.with_seed(s)).unwrap()).collect();
    let w = [2.0, 1.0, 1.0];
    let avg = average_params(&ms.iter().collect::<Vec<_>>(), &w).unwrap();
    for t in 0..6 {
        for i in 0..avg.tensors()[t].len() {
            let want = (2.0 * ms[0].tensors()[t][i] + ms[1].tensors()[t][i] + ms[2].tensors()[t][i]) / 4.0;
            assert!((avg.tensors()[t][i] - want).abs() < 1e-15);
        }
    }
}
