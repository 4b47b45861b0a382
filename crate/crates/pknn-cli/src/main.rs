use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;

use pknn::korea::{classify_batch, KoreaConfig, DEFAULT_K_MAX_CAP};
use pknn::mcmc::{run_chain, McmcConfig};
use pknn::metrics::f_measure;
use pknn::{GammaPrior, LabeledDataset, NeighbourRule};
use pknn_cli::bench::{run_benchmark, BenchmarkReport, ExperimentConfig, Method};
use pknn_cli::compare::{compare_dumps, MetricKind};
use pknn_cli::io::{load_csv, LabelColumn, LoadOptions, LoadedDataset, Standardizer};
use pknn_cli::posterior::{dump_posterior, PosteriorConfig, PosteriorMethod};
use pknn_cli::{mix_seed, HarnessError};

type Result<T> = pknn_cli::Result<T>;

#[derive(Parser)]
#[command(
    name = "pknn",
    version,
    about = "Probabilistic k-nearest-neighbour classification with Bayesian \
             averaging over the number of neighbours"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct DataArgs {
    /// Training dataset CSV (numeric features plus one label column).
    #[arg(long)]
    data: PathBuf,
    /// Label column, as a header name or 0-based index; defaults to the
    /// last column.
    #[arg(long)]
    label_column: Option<String>,
    /// The CSV has no header row.
    #[arg(long)]
    no_header: bool,
}

impl DataArgs {
    fn options(&self) -> LoadOptions {
        let label_column = self.label_column.as_ref().map(|raw| {
            raw.parse::<usize>()
                .map(LabelColumn::Index)
                .unwrap_or_else(|_| LabelColumn::Name(raw.clone()))
        });
        LoadOptions {
            has_header: !self.no_header,
            label_column,
            standardize: false,
        }
    }

    fn load(&self) -> Result<LoadedDataset> {
        load_csv(&self.data, &self.options())
    }

    fn name(&self) -> String {
        self.data
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "dataset".to_string())
    }
}

#[derive(Args, Clone)]
struct ModelArgs {
    /// Cap on candidate neighbour counts; defaults to min(25, N-1).
    #[arg(long)]
    k_max: Option<usize>,
    #[arg(long, default_value_t = 20.0)]
    beta_max: f64,
    #[arg(long, default_value_t = 2.0)]
    prior_shape: f64,
    #[arg(long, default_value_t = 10.0)]
    prior_scale: f64,
    /// Z-score features with training statistics.
    #[arg(long)]
    standardize: bool,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 10_000)]
    mcmc_iterations: usize,
    /// Defaults to 10% of the iterations.
    #[arg(long)]
    mcmc_burn_in: Option<usize>,
}

impl ModelArgs {
    fn prior(&self) -> Result<GammaPrior> {
        GammaPrior::new(self.prior_shape, self.prior_scale).map_err(Into::into)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Classify the rows of a test CSV against a training CSV.
    Classify {
        #[command(flatten)]
        data: DataArgs,
        /// Test CSV with the same columns as the training data.
        #[arg(long)]
        test: PathBuf,
        /// knn, pknn-fixed, korea-average, korea-optimal or mcmc.
        #[arg(long, default_value = "korea-average")]
        method: String,
        /// asymmetric, boltzmann-symmetric or boltzmann2.
        #[arg(long, default_value = "asymmetric")]
        rule: String,
        #[command(flatten)]
        model: ModelArgs,
    },
    /// Cross-validated F-measure benchmark over methods and rules.
    Benchmark {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long, default_value_t = 4)]
        folds: usize,
        /// Comma-separated method list.
        #[arg(long, value_delimiter = ',', default_value = "knn,korea-average")]
        methods: Vec<String>,
        /// Comma-separated rule list.
        #[arg(long, value_delimiter = ',', default_value = "asymmetric")]
        rules: Vec<String>,
        /// Write machine-readable per-fold records (CSV) here.
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        model: ModelArgs,
    },
    /// Dump the posterior densities over (K, beta) for one held-out row.
    Posterior {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long)]
        test_index: usize,
        /// korea or mcmc.
        #[arg(long, default_value = "korea")]
        method: String,
        #[arg(long, default_value = "asymmetric")]
        rule: String,
        /// Output directory for the dump files.
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        model: ModelArgs,
    },
    /// Compare a KOREA dump with an MCMC dump using density metrics.
    Compare {
        /// Directory containing korea_k.csv and korea_2d.csv.
        #[arg(long)]
        korea_dump: PathBuf,
        /// Directory containing mcmc_k.csv and mcmc_2d.csv.
        #[arg(long)]
        mcmc_dump: PathBuf,
        #[arg(long, value_delimiter = ',', default_value = "rmse,kld,psnr,ssim")]
        metrics: Vec<String>,
        /// Evaluate KL(mcmc || korea) instead of KL(korea || mcmc).
        #[arg(long)]
        kld_reverse: bool,
    },
}

fn effective_k_cap(requested: Option<usize>, train_len: usize) -> usize {
    requested
        .unwrap_or(DEFAULT_K_MAX_CAP)
        .min(train_len.saturating_sub(1))
        .max(1)
}

fn run_classify(
    data: &DataArgs,
    test: &PathBuf,
    method: &str,
    rule: &str,
    model: &ModelArgs,
) -> Result<()> {
    let method: Method = method.parse()?;
    let rule: NeighbourRule = rule.parse().map_err(HarnessError::Model)?;
    let prior = model.prior()?;
    let train_loaded = data.load()?;
    let test_loaded = load_csv(test, &data.options())?;
    let mut train = train_loaded.data.clone();
    let mut tests: Vec<Vec<f64>> = test_loaded.data.points().to_vec();
    if model.standardize {
        let standardizer = Standardizer::fit(&train);
        train = standardizer.apply(&train);
        for t in &mut tests {
            *t = standardizer.apply_point(t);
        }
    }
    let k_cap = effective_k_cap(model.k_max, train.len());

    // per-class probability columns only for the probabilistic methods
    let probs_header: String = train_loaded
        .label_names
        .iter()
        .map(|n| format!(",p_{n}"))
        .collect();
    let (preds, probs): (Vec<usize>, Option<Vec<Vec<f64>>>) = match method {
        Method::Knn => {
            let k = select_k(&train, Method::Knn, rule, k_cap, &prior, model)?;
            eprintln!("selected k = {k} by inner validation");
            let preds = tests
                .par_iter()
                .map(|y| {
                    pknn::knn::knn_classify(&train, y, &pknn::knn::KnnConfig { k, rule })
                        .map_err(Into::into)
                })
                .collect::<Result<Vec<_>>>()?;
            (preds, None)
        }
        Method::PknnFixed => {
            let k = select_k(&train, Method::PknnFixed, rule, k_cap, &prior, model)?;
            let beta =
                pknn_cli::bench::train_only_beta_mode(&train, k, rule, &prior, model.beta_max)?;
            eprintln!("selected k = {k}, beta mode = {beta:.4}");
            let rows = tests
                .par_iter()
                .map(|y| {
                    pknn::likelihood::conditional_class_posterior(
                        &train,
                        y,
                        pknn::likelihood::InteractionParams { beta, k },
                        rule,
                    )
                    .map_err(Into::into)
                })
                .collect::<Result<Vec<_>>>()?;
            (rows.iter().map(|p| argmax(p)).collect(), Some(rows))
        }
        Method::KoreaAverage | Method::KoreaOptimal => {
            let cfg = KoreaConfig::new(k_cap, rule, prior, model.beta_max)?;
            let results = classify_batch(&train, &tests, &cfg);
            let mut rows = Vec::with_capacity(results.len());
            for r in results {
                let r = r?;
                rows.push(match method {
                    Method::KoreaAverage => r.class_probs,
                    _ => r.map_class_probs,
                });
            }
            (rows.iter().map(|p| argmax(p)).collect(), Some(rows))
        }
        Method::Mcmc => {
            let rows = tests
                .par_iter()
                .enumerate()
                .map(|(i, y)| {
                    let cfg = McmcConfig {
                        iterations: model.mcmc_iterations,
                        burn_in: model.mcmc_burn_in,
                        seed: mix_seed(model.seed, 0x636c, i as u64),
                        k_max: k_cap,
                        rule,
                        prior,
                        beta_proposal: Default::default(),
                    };
                    run_chain(&train, y, &cfg)
                        .map(|t| t.z_histogram())
                        .map_err(Into::into)
                })
                .collect::<Result<Vec<_>>>()?;
            (rows.iter().map(|p| argmax(p)).collect(), Some(rows))
        }
    };

    match &probs {
        Some(_) => println!("index,prediction{probs_header}"),
        None => println!("index,prediction"),
    }
    for (i, &p) in preds.iter().enumerate() {
        let label = &train_loaded.label_names[p];
        match &probs {
            Some(rows) => {
                let cells: String = rows[i].iter().map(|v| format!(",{v}")).collect();
                println!("{i},{label}{cells}");
            }
            None => println!("{i},{label}"),
        }
    }

    // score when the test labels map onto the training vocabulary
    let mapping: Option<Vec<usize>> = test_loaded
        .label_names
        .iter()
        .map(|n| train_loaded.label_names.iter().position(|t| t == n))
        .collect();
    if let Some(mapping) = mapping {
        let truth: Vec<usize> = test_loaded
            .data
            .labels()
            .iter()
            .map(|&l| mapping[l])
            .collect();
        let f = f_measure(&preds, &truth, train_loaded.data.class_count())?;
        eprintln!("macro F1 against test labels: {f:.4}");
    } else {
        eprintln!("test labels outside the training vocabulary; skipping F-measure");
    }
    Ok(())
}

fn select_k(
    train: &LabeledDataset,
    method: Method,
    rule: NeighbourRule,
    k_cap: usize,
    prior: &GammaPrior,
    model: &ModelArgs,
) -> Result<usize> {
    // reuse the benchmark's inner-validation selection on the full training
    // set by running it as a single pseudo-fold
    pknn_cli::bench::select_k_for_training_set(
        train,
        method,
        rule,
        k_cap,
        prior,
        model.beta_max,
        mix_seed(model.seed, 0x73656c, 0),
    )
}

fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

fn run_benchmark_cmd(
    data: &DataArgs,
    folds: usize,
    methods: &[String],
    rules: &[String],
    out: Option<&PathBuf>,
    model: &ModelArgs,
) -> Result<()> {
    let loaded = data.load()?;
    let prior = model.prior()?;
    let methods: Vec<Method> = methods.iter().map(|m| m.parse()).collect::<Result<_>>()?;
    let rules: Vec<NeighbourRule> = rules
        .iter()
        .map(|r| r.parse().map_err(HarnessError::Model))
        .collect::<Result<_>>()?;
    let mut report = BenchmarkReport::default();
    for &rule in &rules {
        for &method in &methods {
            let cfg = ExperimentConfig {
                dataset_name: data.name(),
                method,
                rule,
                k_max: model.k_max,
                beta_max: model.beta_max,
                prior,
                folds,
                seed: model.seed,
                mcmc_iterations: model.mcmc_iterations,
                mcmc_burn_in: model.mcmc_burn_in,
                standardize: model.standardize,
            };
            report.merge(run_benchmark(&loaded.data, &cfg)?);
        }
    }
    print!("{}", report.render_table());
    if let Some(path) = out {
        let file = std::fs::File::create(path).map_err(|e| HarnessError::io(path, e))?;
        report
            .write_records_csv(file)
            .map_err(|e| HarnessError::io(path, e))?;
        eprintln!("records written to {}", path.display());
    }
    Ok(())
}

fn run_posterior(
    data: &DataArgs,
    test_index: usize,
    method: &str,
    rule: &str,
    out: &PathBuf,
    model: &ModelArgs,
) -> Result<()> {
    let loaded = data.load()?;
    let method: PosteriorMethod = method.parse()?;
    let rule: NeighbourRule = rule.parse().map_err(HarnessError::Model)?;
    let cfg = PosteriorConfig {
        method,
        rule,
        k_max: model.k_max,
        beta_max: model.beta_max,
        prior: model.prior()?,
        seed: model.seed,
        mcmc_iterations: model.mcmc_iterations,
        mcmc_burn_in: model.mcmc_burn_in,
        standardize: model.standardize,
    };
    let dump = dump_posterior(&loaded.data, test_index, &cfg, out)?;
    eprintln!("maximum-posterior order K* = {}", dump.k_star);
    for f in &dump.files {
        println!("{}", f.display());
    }
    Ok(())
}

fn run_compare(
    korea_dump: &PathBuf,
    mcmc_dump: &PathBuf,
    metrics: &[String],
    kld_reverse: bool,
) -> Result<()> {
    let metrics: Vec<MetricKind> = metrics.iter().map(|m| m.parse()).collect::<Result<_>>()?;
    let rows = compare_dumps(korea_dump, mcmc_dump, &metrics, kld_reverse)?;
    println!("metric,grid,value");
    for row in rows {
        println!("{},{},{}", row.metric, row.grid, row.value);
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match &cli.command {
        Command::Classify {
            data,
            test,
            method,
            rule,
            model,
        } => run_classify(data, test, method, rule, model),
        Command::Benchmark {
            data,
            folds,
            methods,
            rules,
            out,
            model,
        } => run_benchmark_cmd(data, *folds, methods, rules, out.as_ref(), model),
        Command::Posterior {
            data,
            test_index,
            method,
            rule,
            out,
            model,
        } => run_posterior(data, *test_index, method, rule, out, model),
        Command::Compare {
            korea_dump,
            mcmc_dump,
            metrics,
            kld_reverse,
        } => run_compare(korea_dump, mcmc_dump, metrics, *kld_reverse),
    }
}

fn main() {
    let cli = Cli::parse();
    if let Err(err) = run(cli) {
        eprintln!("error: {err}");
        std::process::exit(err.exit_code());
    }
}
