use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::analysis::{
    mse_scaling_demo, reports_to_csv, theorem3_sweep, verify_bucket_amplification, verify_lemma1_all, verify_lemma2,
    LabelIncidence, VerificationReport,
};
use crate::cli::config::ExperimentConfig;
use crate::cli::{Cli, Command, Suite, EXIT_ASSERTION, EXIT_OK};
use crate::data::{
    default_frequent_count, feature_hash, generate_synthetic, load_xc_dataset, partition_noniid, write_xc_dataset,
    PartitionPlan, SparseDataset, SyntheticSpec,
};
use crate::error::{Error, Result};
use crate::federation::{run_federated, Algorithm, TrainedGlobal};
use crate::hashing::{min_table_size, LabelHashScheme};
use crate::model::{Precision, Real};

/// Write through a temporary sibling and rename, so readers never see a
/// partial file.
pub(crate) fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(format!(".tmp{}", std::process::id()));
    let tmp = PathBuf::from(tmp);
    fs::write(&tmp, contents).map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn load_config(cli: &Cli) -> Result<ExperimentConfig> {
    let mut cfg = match &cli.config {
        Some(p) => ExperimentConfig::parse(&read(p)?)?,
        None => ExperimentConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    Ok(cfg)
}

pub(crate) fn dispatch(cli: &Cli) -> Result<i32> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cli.threads.unwrap_or(0))
        .build()
        .map_err(|e| Error::config(format!("cannot start worker threads: {e}")))?;
    pool.install(|| match &cli.command {
        Command::Run(a) => {
            let mut cfg = load_config(cli)?;
            for kv in &a.overrides {
                let (k, v) = kv
                    .split_once('=')
                    .ok_or_else(|| Error::config(format!("override `{kv}` is not key=value")))?;
                cfg.set(k.trim(), v.trim())?;
            }
            if let Some(o) = &cli.out {
                cfg.out_dir = o.clone();
            }
            let art = cmd_run(&cfg)?;
            println!("{}", art.summary.trim_end());
            Ok(EXIT_OK)
        }
        Command::Verify(a) => {
            let seed = cli.seed.unwrap_or(0);
            let out = cli.out.clone().unwrap_or_else(|| PathBuf::from("verify-out"));
            let opts = VerifyOptions {
                p: a.p,
                buckets: a.buckets,
                tables: a.tables,
                delta: a.delta,
                trials: a.trials,
            };
            let reports = cmd_verify(a.suite, &opts, seed, &out)?;
            for r in &reports {
                let tag = match (r.asserted, r.pass) {
                    (false, _) => "INFO",
                    (true, true) => "PASS",
                    (true, false) => "FAIL",
                };
                println!(
                    "{tag} {} statistic={} bound={} stderr={}",
                    r.statement, r.statistic, r.bound, r.stderr
                );
            }
            Ok(if reports.iter().all(VerificationReport::ok) {
                EXIT_OK
            } else {
                EXIT_ASSERTION
            })
        }
        Command::Synth(a) => {
            let cfg = load_config(cli)?;
            let mut spec = cfg.synth_spec();
            let set = |dst: &mut usize, v: Option<usize>| {
                if let Some(v) = v {
                    *dst = v;
                }
            };
            set(&mut spec.num_samples, a.n);
            set(&mut spec.dim, a.d);
            set(&mut spec.num_classes, a.p);
            set(&mut spec.features_per_class, a.features_per_class);
            set(&mut spec.labels_per_sample, a.labels_per_sample);
            spec.zipf_exponent = a.zipf.unwrap_or(spec.zipf_exponent);
            spec.noise_rate = a.noise.unwrap_or(spec.noise_rate);
            let out = cli.out.as_deref().ok_or_else(|| Error::config("synth needs --out FILE"))?;
            let ds = cmd_synth(&spec, out)?;
            println!("wrote {} samples to {}", ds.len(), out.display());
            Ok(EXIT_OK)
        }
        Command::Partition(a) => {
            let out = cli
                .out
                .as_deref()
                .ok_or_else(|| Error::config("partition needs --out FILE"))?;
            let plan = cmd_partition(&a.data, a.clients, a.frequent, cli.seed.unwrap_or(0), out)?;
            println!(
                "wrote {} clients ({} frequent classes) to {}",
                plan.num_clients(),
                plan.frequent_set().len(),
                out.display()
            );
            Ok(EXIT_OK)
        }
        Command::Report(a) => {
            let table = cmd_report(&a.runs, a.baseline.as_deref())?;
            match &cli.out {
                Some(p) => write_atomic(p, &table)?,
                None => print!("{table}"),
            }
            Ok(EXIT_OK)
        }
    })
}

/// What `run` wrote.
#[derive(Debug, Clone)]
pub struct RunArtifacts {
    pub dir: PathBuf,
    pub history_csv: String,
    pub summary: String,
}

fn prepare_data(cfg: &ExperimentConfig) -> Result<(SparseDataset, SparseDataset)> {
    let (train, test) = match &cfg.train {
        Some(path) => {
            let ds = load_xc_dataset(path)?;
            match &cfg.test {
                Some(t) => (ds, load_xc_dataset(t)?),
                None => ds.split_holdout(cfg.holdout, cfg.seed)?,
            }
        }
        None => generate_synthetic(&cfg.synth_spec())?.split_holdout(cfg.holdout, cfg.seed)?,
    };
    if cfg.feature_dim == 0 {
        return Ok((train, test));
    }
    let s = cfg.feature_seed();
    Ok((feature_hash(&train, cfg.feature_dim, s)?, feature_hash(&test, cfg.feature_dim, s)?))
}

/// Execute one experiment and write `history.csv`, `summary.txt` and
/// `config.resolved.txt` (plus `scheme.txt` for FedMLH) into the output
/// directory.
pub fn cmd_run(cfg: &ExperimentConfig) -> Result<RunArtifacts> {
    cfg.validate()?;
    let (train, test) = prepare_data(cfg)?;
    let plan = match &cfg.plan {
        Some(p) => PartitionPlan::from_text(&read(p)?, &train).map_err(|e| e.at_path(p))?,
        None => {
            let f = cfg.frequent.unwrap_or_else(|| default_frequent_count(&train));
            partition_noniid(&train, cfg.clients, f, cfg.partition_seed())?
        }
    };
    let scheme = match cfg.algorithm {
        Algorithm::FedAvg => None,
        Algorithm::FedMlh => Some(match &cfg.scheme_file {
            Some(p) => LabelHashScheme::from_text(&read(p)?).map_err(|e| e.at_path(p))?,
            None => LabelHashScheme::generate(
                train.num_classes(),
                cfg.buckets.expect("validated"),
                cfg.tables.expect("validated"),
                cfg.scheme_seed(),
            )?,
        }),
    };
    let fed = cfg.fed_config(scheme.clone());
    let (history_csv, summary) = match cfg.precision {
        Precision::F32 => outputs(cfg, &run_federated::<f32>(&train, Some(&test), &plan, &fed)?),
        Precision::F64 => outputs(cfg, &run_federated::<f64>(&train, Some(&test), &plan, &fed)?),
    };

    let dir = cfg.out_dir.clone();
    write_atomic(&dir.join("config.resolved.txt"), &cfg.to_kv())?;
    if let Some(s) = &scheme {
        write_atomic(&dir.join("scheme.txt"), &s.to_text())?;
    }
    write_atomic(&dir.join("history.csv"), &history_csv)?;
    write_atomic(&dir.join("summary.txt"), &summary)?;
    Ok(RunArtifacts {
        dir,
        history_csv,
        summary,
    })
}

fn outputs<T: Real>(cfg: &ExperimentConfig, t: &TrainedGlobal<T>) -> (String, String) {
    let skipped: Vec<String> = [1, 3, 5]
        .iter()
        .filter(|k| !cfg.ks.contains(k))
        .flat_map(|k| [format!("best_top{k}="), format!("final_top{k}=")])
        .collect();
    let mut summary: String = t
        .summary_kv()
        .lines()
        .filter(|l| !skipped.iter().any(|s| l.starts_with(s)))
        .map(|l| format!("{l}\n"))
        .collect();
    let per_round = t.ledger.records().first().map_or(0, |r| r.upload_bytes);
    let _ = writeln!(summary, "upload_bytes_per_round={per_round}");
    let _ = writeln!(summary, "clients={}", cfg.clients);
    let _ = writeln!(summary, "selected={}", cfg.selected);
    (t.history_csv(cfg.record_time), summary)
}

/// Options shared by the verification suites; `None` picks the documented
/// default.
#[derive(Debug, Clone, Default)]
pub struct VerifyOptions {
    pub p: Option<usize>,
    pub buckets: Option<usize>,
    pub tables: Option<usize>,
    pub delta: Option<f64>,
    pub trials: Option<u64>,
}

fn suite_lemma1(o: &VerifyOptions, seed: u64) -> Result<Vec<VerificationReport>> {
    let p = o.p.unwrap_or(100);
    let b = o.buckets.unwrap_or(10);
    let trials = o.trials.unwrap_or(10_000);
    // Sparse independent labels: 20 positives per class over 10^4 samples.
    let inc = LabelIncidence::independent(&vec![20; p], 10_000, seed)?;
    let mut reports = verify_lemma1_all(&inc, b, trials, seed)?;
    // p/B = 32: the bucket of an average class holds about 32 times more
    // positives than the class itself.
    let amp = LabelIncidence::independent(&[10; 1024], 100_000, seed)?;
    reports.push(verify_bucket_amplification(&amp, 32, 0, o.trials.unwrap_or(2000), seed, 32.0, 0.1)?);
    Ok(reports)
}

fn suite_lemma2(o: &VerifyOptions, seed: u64) -> Result<Vec<VerificationReport>> {
    let p = o.p.unwrap_or(200);
    let delta = o.delta.unwrap_or(0.05);
    let trials = o.trials.unwrap_or(2000);
    let rs = o.tables.map_or(vec![1, 2, 4], |r| vec![r]);
    let mut reports = Vec::new();
    for r in rs {
        let bound = min_table_size(p, delta, r)? as usize;
        let b = o.buckets.unwrap_or(bound);
        reports.push(verify_lemma2(p, b, r, delta, trials, seed)?);
        if o.buckets.is_none() && bound > 1 {
            reports.push(verify_lemma2(p, bound - 1, r, delta, trials, seed)?);
        }
    }
    Ok(reports)
}

fn suite_theorem3(o: &VerifyOptions, seed: u64) -> Result<Vec<VerificationReport>> {
    let p = o.p.unwrap_or(500);
    let bs = o.buckets.map_or(vec![10, 50, 250], |b| vec![b]);
    let n = o.trials.unwrap_or(500);
    theorem3_sweep(p, &bs, n, n, seed)
}

fn suite_mse(o: &VerifyOptions, seed: u64) -> Result<Vec<VerificationReport>> {
    let sizes: Vec<usize> = (0..11).map(|k| 10 << k).collect();
    Ok(vec![mse_scaling_demo(&sizes, &[1.0], o.trials.unwrap_or(400), seed)?])
}

/// Run one suite (or all four) and write `<suite>.csv` and `<suite>.txt`
/// into `out_dir`.
pub fn cmd_verify(suite: Suite, opts: &VerifyOptions, seed: u64, out_dir: &Path) -> Result<Vec<VerificationReport>> {
    let suites: &[Suite] = match suite {
        Suite::All => &[Suite::Lemma1, Suite::Lemma2, Suite::Theorem3, Suite::Mse],
        _ => std::slice::from_ref(&suite),
    };
    let mut all = Vec::new();
    for &s in suites {
        let (name, reports) = match s {
            Suite::Lemma1 => ("lemma1", suite_lemma1(opts, seed)?),
            Suite::Lemma2 => ("lemma2", suite_lemma2(opts, seed)?),
            Suite::Theorem3 => ("theorem3", suite_theorem3(opts, seed)?),
            Suite::Mse => ("mse", suite_mse(opts, seed)?),
            Suite::All => unreachable!(),
        };
        write_atomic(&out_dir.join(format!("{name}.csv")), &reports_to_csv(&reports))?;
        let text = reports.iter().map(VerificationReport::to_kv).collect::<Vec<_>>().join("\n");
        write_atomic(&out_dir.join(format!("{name}.txt")), &text)?;
        all.extend(reports);
    }
    Ok(all)
}

/// Generate a synthetic dataset and write it in the XC text format.
pub fn cmd_synth(spec: &SyntheticSpec, out: &Path) -> Result<SparseDataset> {
    let ds = generate_synthetic(spec)?;
    write_atomic(out, &write_xc_dataset(&ds))?;
    Ok(ds)
}

/// Non-iid partition of a dataset file, written in the plan text format.
pub fn cmd_partition(
    data: &Path,
    clients: usize,
    frequent: Option<usize>,
    seed: u64,
    out: &Path,
) -> Result<PartitionPlan> {
    let ds = load_xc_dataset(data)?;
    let f = frequent.unwrap_or_else(|| default_frequent_count(&ds));
    let plan = partition_noniid(&ds, clients, f, seed)?;
    write_atomic(out, &plan.to_text())?;
    Ok(plan)
}

/// Column header of [`cmd_report`].
pub const REPORT_HEADER: &str =
    "run,algorithm,best_round,top1,top3,top5,upload_bytes_to_best,upload_mb_to_best,model_bytes,cc_ratio,rounds_ratio";

struct RunSummary {
    name: String,
    kv: BTreeMap<String, String>,
}

impl RunSummary {
    fn load(dir: &Path) -> Result<Self> {
        let path = dir.join("summary.txt");
        let text = read(&path)?;
        let kv = text
            .lines()
            .filter_map(|l| l.split_once('='))
            .map(|(k, v)| (k.to_string(), v.to_string()))
            .collect();
        Ok(RunSummary {
            name: dir.display().to_string(),
            kv,
        })
    }

    fn get(&self, key: &str) -> Result<&str> {
        self.kv
            .get(key)
            .map(String::as_str)
            .ok_or_else(|| Error::format(None, format!("{}: summary lacks `{key}`", self.name)))
    }

    fn num(&self, key: &str) -> Result<f64> {
        self.get(key)?
            .parse()
            .map_err(|_| Error::format(None, format!("{}: bad number for `{key}`", self.name)))
    }
}

/// Comparison table over finished runs. Ratios are baseline ÷ run for
/// upload bytes and rounds to the best round; they are blank for the
/// baseline itself or when there is no baseline.
pub fn cmd_report(runs: &[PathBuf], baseline: Option<&Path>) -> Result<String> {
    let sums = runs.iter().map(|d| RunSummary::load(d)).collect::<Result<Vec<_>>>()?;
    let base = match baseline {
        Some(b) => Some(RunSummary::load(b)?),
        None => None,
    };
    let base_idx = match &base {
        Some(_) => None,
        None if sums.len() > 1 => sums.iter().position(|s| s.get("algorithm").ok() == Some("fedavg")),
        None => None,
    };
    let base_ref = base.as_ref().or_else(|| base_idx.map(|i| &sums[i]));

    let mut out = String::from(REPORT_HEADER);
    out.push('\n');
    for (i, s) in sums.iter().enumerate() {
        let upload = s.num("upload_bytes_to_best")?;
        let rounds = s.num("best_round")?;
        let (cc, rr) = match base_ref {
            Some(b) if Some(i) != base_idx => (
                format!("{:.2}", b.num("upload_bytes_to_best")? / upload),
                format!("{:.2}", b.num("best_round")? / rounds),
            ),
            _ => (String::new(), String::new()),
        };
        let top = |k: &str| s.get(k).unwrap_or("").to_string();
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{:.2},{},{cc},{rr}",
            s.name,
            s.get("algorithm")?,
            s.get("best_round")?,
            top("best_top1"),
            top("best_top3"),
            top("best_top5"),
            s.get("upload_bytes_to_best")?,
            upload / 1e6,
            s.get("model_bytes")?,
        );
    }
    Ok(out)
}
