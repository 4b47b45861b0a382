//! Posterior density dumps for one held-out observation.
//!
//! The chosen observation becomes the test point, the remaining rows the
//! training set. The dump directory receives, per source (`korea` and, when
//! requested, `mcmc` binned on the same axes):
//!
//! * `<source>_k.csv` — the 1-D posterior over K (`k,weight`),
//! * `<source>_2d.csv` — the joint `(K, beta)` grid (`k,beta,weight`),
//! * `posterior_long.csv` — all of the above in one long-format table
//!   (`source,kind,k,beta,weight`) for plotting.

use std::fs::File;
use std::io::Write;
use std::path::{Path, PathBuf};

use pknn::korea::{classify, KoreaConfig, DEFAULT_K_MAX_CAP};
use pknn::mcmc::{run_chain, McmcConfig};
use pknn::metrics::DensityGrid;
use pknn::{GammaPrior, LabeledDataset, NeighbourRule};

use crate::io::{write_density_1d, write_density_2d, Standardizer};
use crate::{mix_seed, HarnessError, Result};

/// Which inference produces the dumped densities.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PosteriorMethod {
    Korea,
    Mcmc,
}

impl std::str::FromStr for PosteriorMethod {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "korea" => Ok(PosteriorMethod::Korea),
            "mcmc" => Ok(PosteriorMethod::Mcmc),
            other => Err(HarnessError::Config(format!(
                "unknown posterior method '{other}' (expected korea or mcmc)"
            ))),
        }
    }
}

/// Configuration for [`dump_posterior`].
#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorConfig {
    pub method: PosteriorMethod,
    pub rule: NeighbourRule,
    pub k_max: Option<usize>,
    pub beta_max: f64,
    pub prior: GammaPrior,
    pub seed: u64,
    pub mcmc_iterations: usize,
    pub mcmc_burn_in: Option<usize>,
    pub standardize: bool,
}

impl PosteriorConfig {
    pub fn new(method: PosteriorMethod, rule: NeighbourRule) -> Self {
        Self {
            method,
            rule,
            k_max: None,
            beta_max: pknn::korea::DEFAULT_BETA_MAX,
            prior: GammaPrior::default(),
            seed: 0,
            mcmc_iterations: 10_000,
            mcmc_burn_in: None,
            standardize: false,
        }
    }
}

/// Files written by a dump, plus the densities themselves.
#[derive(Debug, Clone)]
pub struct PosteriorDump {
    pub files: Vec<PathBuf>,
    pub k_grid: DensityGrid,
    pub joint_grid: DensityGrid,
    pub k_star: usize,
}

fn create(path: &Path) -> Result<File> {
    File::create(path).map_err(|e| HarnessError::io(path, e))
}

fn append_long<W: Write>(
    w: &mut W,
    source: &str,
    k_grid: &DensityGrid,
    joint: &DensityGrid,
) -> std::io::Result<()> {
    for (k, v) in k_grid.k_axis().iter().zip(k_grid.values()) {
        writeln!(w, "{source},marginal-k,{k},,{v}")?;
    }
    let m = joint.beta_axis().len();
    for (ki, k) in joint.k_axis().iter().enumerate() {
        for (bi, beta) in joint.beta_axis().iter().enumerate() {
            writeln!(w, "{source},joint,{k},{beta},{}", joint.values()[ki * m + bi])?;
        }
    }
    Ok(())
}

/// Hold out `data[test_index]`, infer the posterior densities for it, and
/// write them under `out_dir`.
pub fn dump_posterior(
    data: &LabeledDataset,
    test_index: usize,
    cfg: &PosteriorConfig,
    out_dir: &Path,
) -> Result<PosteriorDump> {
    if test_index >= data.len() {
        return Err(HarnessError::Config(format!(
            "test index {test_index} out of range for {} observations",
            data.len()
        )));
    }
    let train_idx: Vec<usize> = (0..data.len()).filter(|&i| i != test_index).collect();
    let mut train = data.subset(&train_idx)?;
    let mut y = data.point(test_index).to_vec();
    if cfg.standardize {
        let std = Standardizer::fit(&train);
        train = std.apply(&train);
        y = std.apply_point(&y);
    }
    let k_max = cfg
        .k_max
        .unwrap_or(DEFAULT_K_MAX_CAP)
        .min(train.len().saturating_sub(1))
        .max(1);

    // KOREA always runs: it defines the beta axis the MCMC histogram shares.
    let korea_cfg = KoreaConfig::new(k_max, cfg.rule, cfg.prior, cfg.beta_max)?;
    let result = classify(&train, &y, &korea_cfg)?;
    let korea_k = DensityGrid::from_order_posterior(&result.order_posterior);
    let korea_joint = DensityGrid::from_mixture(&result);

    std::fs::create_dir_all(out_dir).map_err(|e| HarnessError::io(out_dir, e))?;
    let mut files = Vec::new();
    let long_path = out_dir.join("posterior_long.csv");
    let mut long = create(&long_path)?;
    writeln!(long, "source,kind,k,beta,weight").map_err(|e| HarnessError::io(&long_path, e))?;

    let (k_grid, joint_grid) = match cfg.method {
        PosteriorMethod::Korea => {
            let p1 = out_dir.join("korea_k.csv");
            write_density_1d(create(&p1)?, &korea_k).map_err(|e| HarnessError::io(&p1, e))?;
            let p2 = out_dir.join("korea_2d.csv");
            write_density_2d(create(&p2)?, &korea_joint).map_err(|e| HarnessError::io(&p2, e))?;
            append_long(&mut long, "korea", &korea_k, &korea_joint)
                .map_err(|e| HarnessError::io(&long_path, e))?;
            files.extend([p1, p2]);
            (korea_k, korea_joint)
        }
        PosteriorMethod::Mcmc => {
            let mcmc_cfg = McmcConfig {
                iterations: cfg.mcmc_iterations,
                burn_in: cfg.mcmc_burn_in,
                seed: mix_seed(cfg.seed, 0x6d63, test_index as u64),
                k_max,
                rule: cfg.rule,
                prior: cfg.prior,
                beta_proposal: Default::default(),
            };
            let trace = run_chain(&train, &y, &mcmc_cfg)?;
            let mcmc_k = DensityGrid::from_mcmc_k(&trace);
            let mcmc_joint = DensityGrid::from_mcmc_joint(&trace, &result.beta_grid);
            let p1 = out_dir.join("mcmc_k.csv");
            write_density_1d(create(&p1)?, &mcmc_k).map_err(|e| HarnessError::io(&p1, e))?;
            let p2 = out_dir.join("mcmc_2d.csv");
            write_density_2d(create(&p2)?, &mcmc_joint).map_err(|e| HarnessError::io(&p2, e))?;
            append_long(&mut long, "mcmc", &mcmc_k, &mcmc_joint)
                .map_err(|e| HarnessError::io(&long_path, e))?;
            files.extend([p1, p2]);
            (mcmc_k, mcmc_joint)
        }
    };
    files.push(long_path);
    Ok(PosteriorDump {
        files,
        k_grid,
        joint_grid,
        k_star: result.order_posterior.k_star,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::io::{parse_density_1d, parse_density_2d};
    use std::fs::File;

    fn toy_data() -> LabeledDataset {
        let mut points = Vec::new();
        let mut labels = Vec::new();
        for i in 0..8 {
            let t = i as f64;
            points.push(vec![t * 0.3, (t * 0.7).sin()]);
            labels.push(0);
            points.push(vec![3.0 + t * 0.3, 2.0 + (t * 0.9).cos()]);
            labels.push(1);
        }
        LabeledDataset::new(points, labels, 2).unwrap()
    }

    #[test]
    fn korea_dump_round_trips_exactly() {
        let dir = tempfile::tempdir().unwrap();
        let data = toy_data();
        let mut cfg = PosteriorConfig::new(PosteriorMethod::Korea, NeighbourRule::Asymmetric);
        cfg.k_max = Some(4);
        let dump = dump_posterior(&data, 3, &cfg, dir.path()).unwrap();
        let k_back =
            parse_density_1d(File::open(dir.path().join("korea_k.csv")).unwrap()).unwrap();
        assert_eq!(dump.k_grid, k_back);
        let j_back =
            parse_density_2d(File::open(dir.path().join("korea_2d.csv")).unwrap()).unwrap();
        assert_eq!(dump.joint_grid, j_back);
        // weights normalize
        assert!((k_back.values().iter().sum::<f64>() - 1.0).abs() < 1e-9);
        assert!((j_back.values().iter().sum::<f64>() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn k_max_one_dump_is_the_single_row() {
        let dir = tempfile::tempdir().unwrap();
        let data = toy_data();
        let mut cfg = PosteriorConfig::new(PosteriorMethod::Korea, NeighbourRule::Asymmetric);
        cfg.k_max = Some(1);
        let dump = dump_posterior(&data, 0, &cfg, dir.path()).unwrap();
        assert_eq!(dump.k_grid.k_axis(), &[1]);
        assert_eq!(dump.k_grid.values(), &[1.0]);
        let text = std::fs::read_to_string(dir.path().join("korea_k.csv")).unwrap();
        assert_eq!(text, "k,weight\n1,1\n");
    }

    #[test]
    fn mcmc_dump_shares_the_korea_axes() {
        let dir = tempfile::tempdir().unwrap();
        let data = toy_data();
        let mut korea_cfg = PosteriorConfig::new(PosteriorMethod::Korea, NeighbourRule::Asymmetric);
        korea_cfg.k_max = Some(3);
        let korea_dir = dir.path().join("korea");
        let korea_dump = dump_posterior(&data, 2, &korea_cfg, &korea_dir).unwrap();

        let mut mcmc_cfg = korea_cfg.clone();
        mcmc_cfg.method = PosteriorMethod::Mcmc;
        mcmc_cfg.mcmc_iterations = 500;
        let mcmc_dir = dir.path().join("mcmc");
        let mcmc_dump = dump_posterior(&data, 2, &mcmc_cfg, &mcmc_dir).unwrap();

        assert_eq!(korea_dump.joint_grid.beta_axis(), mcmc_dump.joint_grid.beta_axis());
        assert_eq!(korea_dump.k_grid.shape(), mcmc_dump.k_grid.shape());
        assert!((mcmc_dump.k_grid.values().iter().sum::<f64>() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn out_of_range_index_rejected() {
        let data = toy_data();
        let cfg = PosteriorConfig::new(PosteriorMethod::Korea, NeighbourRule::Asymmetric);
        let dir = tempfile::tempdir().unwrap();
        assert!(dump_posterior(&data, 99, &cfg, dir.path()).is_err());
    }
}
