//! Cross-validated benchmark runs over the five classifiers.
//!
//! For `knn` and `pknn-fixed` the neighbour count is chosen per outer fold by
//! inner 4-fold validation accuracy on the training part; the Bayesian
//! methods average over K instead and need no selection. Every source of
//! randomness (fold shuffles, MCMC chains) derives from the config seed, so a
//! benchmark run is reproducible; wall-clock timings are reported on stdout
//! but kept out of the machine-readable records.

use std::io::Write;
use std::time::Instant;

use rayon::prelude::*;

use pknn::dataset::NeighbourCache;
use pknn::korea::{classify_batch, KoreaConfig, DEFAULT_K_MAX_CAP};
use pknn::likelihood::{conditional_class_posterior, log_pseudo_likelihood, InteractionParams};
use pknn::math::mean_and_std;
use pknn::mcmc::{run_chain, McmcConfig};
use pknn::metrics::f_measure;
use pknn::optim::laplace_fit_1d;
use pknn::{GammaPrior, LabeledDataset, NeighbourRule};

use crate::cv::kfold_split;
use crate::io::Standardizer;
use crate::{mix_seed, HarnessError, Result};

/// Classifier under benchmark.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    Knn,
    PknnFixed,
    KoreaAverage,
    KoreaOptimal,
    Mcmc,
}

impl Method {
    pub const ALL: [Method; 5] = [
        Method::Knn,
        Method::PknnFixed,
        Method::KoreaAverage,
        Method::KoreaOptimal,
        Method::Mcmc,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Method::Knn => "knn",
            Method::PknnFixed => "pknn-fixed",
            Method::KoreaAverage => "korea-average",
            Method::KoreaOptimal => "korea-optimal",
            Method::Mcmc => "mcmc",
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Method {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "knn" => Ok(Method::Knn),
            "pknn-fixed" | "pknn" => Ok(Method::PknnFixed),
            "korea-average" | "korea" => Ok(Method::KoreaAverage),
            "korea-optimal" => Ok(Method::KoreaOptimal),
            "mcmc" => Ok(Method::Mcmc),
            other => Err(HarnessError::Config(format!(
                "unknown method '{other}' (expected knn, pknn-fixed, korea-average, \
                 korea-optimal or mcmc)"
            ))),
        }
    }
}

/// One benchmark run: a dataset, one method, one neighbouring rule, and the
/// shared protocol parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub dataset_name: String,
    pub method: Method,
    pub rule: NeighbourRule,
    /// Cap on the candidate orders; defaults to `min(25, N_train - 1)`.
    pub k_max: Option<usize>,
    pub beta_max: f64,
    pub prior: GammaPrior,
    pub folds: usize,
    pub seed: u64,
    pub mcmc_iterations: usize,
    pub mcmc_burn_in: Option<usize>,
    pub standardize: bool,
}

impl ExperimentConfig {
    pub fn new(dataset_name: impl Into<String>, method: Method, rule: NeighbourRule) -> Self {
        Self {
            dataset_name: dataset_name.into(),
            method,
            rule,
            k_max: None,
            beta_max: pknn::korea::DEFAULT_BETA_MAX,
            prior: GammaPrior::default(),
            folds: 4,
            seed: 0,
            mcmc_iterations: 10_000,
            mcmc_burn_in: None,
            standardize: false,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.folds < 2 {
            return Err(HarnessError::Config(format!(
                "folds must be at least 2, got {}",
                self.folds
            )));
        }
        if let Some(k) = self.k_max {
            if k == 0 {
                return Err(HarnessError::Config("k_max must be positive".into()));
            }
        }
        Ok(())
    }
}

/// Per-fold outcome of one (method, rule) run.
#[derive(Debug, Clone, PartialEq)]
pub struct FoldRecord {
    pub dataset: String,
    pub method: Method,
    pub rule: NeighbourRule,
    pub fold: usize,
    pub f_measure: f64,
    pub seconds: f64,
    pub selected_k: Option<usize>,
}

/// Mean/std summary of one (method, rule) group.
#[derive(Debug, Clone, PartialEq)]
pub struct MethodSummary {
    pub method: Method,
    pub rule: NeighbourRule,
    pub mean_f: f64,
    pub std_f: f64,
    pub mean_seconds: f64,
}

/// All fold records of a benchmark, possibly covering several methods and
/// rules after merging.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct BenchmarkReport {
    pub records: Vec<FoldRecord>,
}

impl BenchmarkReport {
    pub fn merge(&mut self, other: BenchmarkReport) {
        self.records.extend(other.records);
    }

    /// Group records by (method, rule) in first-appearance order.
    pub fn summaries(&self) -> Vec<MethodSummary> {
        let mut groups: Vec<(Method, NeighbourRule)> = Vec::new();
        for r in &self.records {
            if !groups.contains(&(r.method, r.rule)) {
                groups.push((r.method, r.rule));
            }
        }
        groups
            .into_iter()
            .map(|(method, rule)| {
                let fs: Vec<f64> = self
                    .records
                    .iter()
                    .filter(|r| r.method == method && r.rule == rule)
                    .map(|r| r.f_measure)
                    .collect();
                let secs: Vec<f64> = self
                    .records
                    .iter()
                    .filter(|r| r.method == method && r.rule == rule)
                    .map(|r| r.seconds)
                    .collect();
                let (mean_f, std_f) = mean_and_std(&fs);
                MethodSummary {
                    method,
                    rule,
                    mean_f,
                    std_f,
                    mean_seconds: secs.iter().sum::<f64>() / secs.len() as f64,
                }
            })
            .collect()
    }

    pub fn mean_f(&self, method: Method, rule: NeighbourRule) -> Option<f64> {
        self.summaries()
            .into_iter()
            .find(|s| s.method == method && s.rule == rule)
            .map(|s| s.mean_f)
    }

    pub fn mean_seconds(&self, method: Method, rule: NeighbourRule) -> Option<f64> {
        self.summaries()
            .into_iter()
            .find(|s| s.method == method && s.rule == rule)
            .map(|s| s.mean_seconds)
    }

    /// Machine-readable records, one row per fold x method x rule. Timing is
    /// deliberately excluded so the output is byte-identical across runs
    /// with the same config and seed.
    pub fn write_records_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "dataset,method,rule,fold,f_measure,selected_k")?;
        for r in &self.records {
            writeln!(
                w,
                "{},{},{},{},{},{}",
                r.dataset,
                r.method,
                r.rule,
                r.fold,
                r.f_measure,
                r.selected_k.map(|k| k.to_string()).unwrap_or_default()
            )?;
        }
        Ok(())
    }

    /// Human-readable summary table (includes mean wall-clock seconds).
    pub fn render_table(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!(
            "{:<14} {:<20} {:>7} {:>8} {:>12}\n",
            "method", "rule", "mean F", "std F", "mean seconds"
        ));
        for s in self.summaries() {
            out.push_str(&format!(
                "{:<14} {:<20} {:>7.4} {:>8.4} {:>12.3}\n",
                s.method.name(),
                s.rule.name(),
                s.mean_f,
                s.std_f,
                s.mean_seconds
            ));
        }
        out
    }
}

fn argmax_lowest(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// Attach dataset/fold/item context to a per-item model error, preserving
/// its exit-code class.
fn fold_context(dataset: &str, fold: usize, item: usize, e: pknn::Error) -> HarnessError {
    let msg = format!("{dataset} fold {fold} test point {item}: {e}");
    match e {
        pknn::Error::Numerical(_) => HarnessError::Model(pknn::Error::Numerical(msg)),
        _ => HarnessError::Model(pknn::Error::InvalidInput(msg)),
    }
}

/// Majority votes of one query against a fixed training set, for every k in
/// `1..=k_cap` at once (one distance ranking serves all k).
fn knn_votes_all_k(
    train: &LabeledDataset,
    y: &[f64],
    rule: NeighbourRule,
    k_cap: usize,
) -> Result<Vec<usize>> {
    let mut points = train.points().to_vec();
    points.push(y.to_vec());
    let cache = NeighbourCache::build(&points);
    let test_site = train.len();
    (1..=k_cap)
        .map(|k| {
            let graph = cache.graph(k, rule)?;
            let mut votes = vec![0.0; train.class_count()];
            for j in graph.interaction_sites(test_site) {
                votes[train.labels()[j]] += 1.0;
            }
            Ok(argmax_lowest(&votes))
        })
        .collect::<std::result::Result<Vec<_>, pknn::Error>>()
        .map_err(Into::into)
}

/// Laplace mode of the train-only posterior `p(beta | z, y, K)` (the
/// pseudo-likelihood over the N-site graph times the prior).
pub fn train_only_beta_mode(
    train: &LabeledDataset,
    k: usize,
    rule: NeighbourRule,
    prior: &GammaPrior,
    beta_max: f64,
) -> Result<f64> {
    let graph = pknn::build_neighbour_graph(train, k, rule)?;
    let labels = train.labels();
    let class_count = train.class_count();
    let fit = laplace_fit_1d(
        |beta| {
            log_pseudo_likelihood(labels, &graph, InteractionParams { beta, k }, class_count)
                + prior.log_pdf(beta)
        },
        pknn::korea::BETA_FLOOR,
        beta_max,
    )?;
    Ok(fit.mode)
}

/// PKNN prediction at a fixed `(beta, k)`: the argmax of the conditional
/// class posterior.
pub fn pknn_fixed_predict(
    train: &LabeledDataset,
    y: &[f64],
    beta: f64,
    k: usize,
    rule: NeighbourRule,
) -> Result<usize> {
    let probs = conditional_class_posterior(train, y, InteractionParams { beta, k }, rule)?;
    Ok(argmax_lowest(&probs))
}

/// Select k for `knn`/`pknn-fixed` by inner 4-fold validation accuracy on
/// the training part; accuracy ties go to the smaller k.
fn select_k_inner_cv(
    train: &LabeledDataset,
    method: Method,
    rule: NeighbourRule,
    k_cap: usize,
    prior: &GammaPrior,
    beta_max: f64,
    seed: u64,
) -> Result<usize> {
    let n = train.len();
    if n < 4 {
        return Ok(1);
    }
    let inner_folds = 4.min(n);
    let splits = kfold_split(n, inner_folds, seed)?;
    let min_inner_train = splits.iter().map(|(t, _)| t.len()).min().unwrap();
    let max_k = match method {
        Method::Knn => k_cap.min(min_inner_train),
        _ => k_cap.min(min_inner_train.saturating_sub(1)),
    }
    .max(1);

    let mut correct = vec![0usize; max_k];
    for (train_idx, val_idx) in &splits {
        let inner_train = train.subset(train_idx)?;
        match method {
            Method::Knn => {
                let fold_hits: Vec<Vec<usize>> = val_idx
                    .par_iter()
                    .map(|&vi| {
                        let votes =
                            knn_votes_all_k(&inner_train, train.point(vi), rule, max_k)?;
                        Ok(votes
                            .into_iter()
                            .map(|p| usize::from(p == train.labels()[vi]))
                            .collect())
                    })
                    .collect::<Result<_>>()?;
                for hits in fold_hits {
                    for (c, h) in correct.iter_mut().zip(hits) {
                        *c += h;
                    }
                }
            }
            Method::PknnFixed => {
                for k in 1..=max_k {
                    let beta = train_only_beta_mode(&inner_train, k, rule, prior, beta_max)?;
                    let hits: usize = val_idx
                        .par_iter()
                        .map(|&vi| {
                            let pred =
                                pknn_fixed_predict(&inner_train, train.point(vi), beta, k, rule)?;
                            Ok(usize::from(pred == train.labels()[vi]))
                        })
                        .collect::<Result<Vec<usize>>>()?
                        .iter()
                        .sum();
                    correct[k - 1] += hits;
                }
            }
            other => {
                return Err(HarnessError::Config(format!(
                    "no inner k selection for method {other}"
                )))
            }
        }
    }
    let mut best_k = 1;
    for k in 2..=max_k {
        if correct[k - 1] > correct[best_k - 1] {
            best_k = k;
        }
    }
    Ok(best_k)
}

/// Inner-validation k selection against a full training set (no outer
/// fold); used by the classify command.
pub fn select_k_for_training_set(
    train: &LabeledDataset,
    method: Method,
    rule: NeighbourRule,
    k_cap: usize,
    prior: &GammaPrior,
    beta_max: f64,
    seed: u64,
) -> Result<usize> {
    select_k_inner_cv(train, method, rule, k_cap, prior, beta_max, seed)
}

/// Predict the labels of `tests` after fitting/selecting on `train`.
/// Returns the predictions and the selected k, when the method selects one.
fn predict_fold(
    cfg: &ExperimentConfig,
    train: &LabeledDataset,
    tests: &[Vec<f64>],
    fold: usize,
    test_indices: &[usize],
) -> Result<(Vec<usize>, Option<usize>)> {
    let k_cap = cfg
        .k_max
        .unwrap_or(DEFAULT_K_MAX_CAP)
        .min(train.len().saturating_sub(1))
        .max(1);
    match cfg.method {
        Method::Knn => {
            let k = select_k_inner_cv(
                train,
                Method::Knn,
                cfg.rule,
                k_cap,
                &cfg.prior,
                cfg.beta_max,
                mix_seed(cfg.seed, 0x1777, fold as u64),
            )?;
            let preds = tests
                .par_iter()
                .map(|y| Ok(knn_votes_all_k(train, y, cfg.rule, k)?[k - 1]))
                .collect::<Result<Vec<usize>>>()?;
            Ok((preds, Some(k)))
        }
        Method::PknnFixed => {
            let k = select_k_inner_cv(
                train,
                Method::PknnFixed,
                cfg.rule,
                k_cap,
                &cfg.prior,
                cfg.beta_max,
                mix_seed(cfg.seed, 0x1777, fold as u64),
            )?;
            let beta = train_only_beta_mode(train, k, cfg.rule, &cfg.prior, cfg.beta_max)?;
            let preds = tests
                .par_iter()
                .map(|y| pknn_fixed_predict(train, y, beta, k, cfg.rule))
                .collect::<Result<Vec<usize>>>()?;
            Ok((preds, Some(k)))
        }
        Method::KoreaAverage | Method::KoreaOptimal => {
            let korea_cfg = KoreaConfig::new(k_cap, cfg.rule, cfg.prior, cfg.beta_max)?;
            let results = classify_batch(train, tests, &korea_cfg);
            let mut preds = Vec::with_capacity(results.len());
            for (i, r) in results.into_iter().enumerate() {
                let r = r.map_err(|e| fold_context(&cfg.dataset_name, fold, i, e))?;
                preds.push(match cfg.method {
                    Method::KoreaAverage => r.predicted_class(),
                    _ => r.map_predicted_class(),
                });
            }
            Ok((preds, None))
        }
        Method::Mcmc => {
            let preds = tests
                .par_iter()
                .zip(test_indices)
                .map(|(y, &orig_idx)| {
                    let mcmc_cfg = McmcConfig {
                        iterations: cfg.mcmc_iterations,
                        burn_in: cfg.mcmc_burn_in,
                        seed: mix_seed(cfg.seed, fold as u64, orig_idx as u64),
                        k_max: k_cap,
                        rule: cfg.rule,
                        prior: cfg.prior,
                        beta_proposal: Default::default(),
                    };
                    let trace = run_chain(train, y, &mcmc_cfg)?;
                    Ok(argmax_lowest(&trace.z_histogram()))
                })
                .collect::<Result<Vec<usize>>>()?;
            Ok((preds, None))
        }
    }
}

/// Run the full cross-validated benchmark for one (method, rule) pair.
pub fn run_benchmark(data: &LabeledDataset, cfg: &ExperimentConfig) -> Result<BenchmarkReport> {
    cfg.validate()?;
    let splits = kfold_split(data.len(), cfg.folds, cfg.seed)?;
    let mut records = Vec::with_capacity(cfg.folds);
    for (fold, (train_idx, test_idx)) in splits.iter().enumerate() {
        let started = Instant::now();
        let mut train = data.subset(train_idx)?;
        let mut tests: Vec<Vec<f64>> = test_idx
            .iter()
            .map(|&i| data.point(i).to_vec())
            .collect();
        if cfg.standardize {
            let standardizer = Standardizer::fit(&train);
            train = standardizer.apply(&train);
            for t in &mut tests {
                *t = standardizer.apply_point(t);
            }
        }
        let truth: Vec<usize> = test_idx.iter().map(|&i| data.labels()[i]).collect();
        let (preds, selected_k) = predict_fold(cfg, &train, &tests, fold, test_idx)?;
        let f = f_measure(&preds, &truth, data.class_count())?;
        records.push(FoldRecord {
            dataset: cfg.dataset_name.clone(),
            method: cfg.method,
            rule: cfg.rule,
            fold,
            f_measure: f,
            seconds: started.elapsed().as_secs_f64(),
            selected_k,
        });
    }
    Ok(BenchmarkReport { records })
}
