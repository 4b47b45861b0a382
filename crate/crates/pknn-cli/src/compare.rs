//! Comparison of two posterior dumps (typically KOREA vs MCMC) with the
//! density metrics.

use std::fs::File;
use std::path::Path;

use pknn::metrics::{
    density_kld, density_psnr, density_rmse, density_ssim, DensityGrid, KLD_EPSILON,
};

use crate::io::{parse_density_1d, parse_density_2d};
use crate::{HarnessError, Result};

/// Which density metric to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MetricKind {
    Rmse,
    Kld,
    Psnr,
    Ssim,
}

impl MetricKind {
    pub const ALL: [MetricKind; 4] = [
        MetricKind::Rmse,
        MetricKind::Kld,
        MetricKind::Psnr,
        MetricKind::Ssim,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            MetricKind::Rmse => "rmse",
            MetricKind::Kld => "kld",
            MetricKind::Psnr => "psnr",
            MetricKind::Ssim => "ssim",
        }
    }
}

impl std::fmt::Display for MetricKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for MetricKind {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rmse" => Ok(MetricKind::Rmse),
            "kld" => Ok(MetricKind::Kld),
            "psnr" => Ok(MetricKind::Psnr),
            "ssim" => Ok(MetricKind::Ssim),
            other => Err(HarnessError::Config(format!(
                "unknown metric '{other}' (expected rmse, kld, psnr or ssim)"
            ))),
        }
    }
}

/// One evaluated metric on one grid kind.
#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonRow {
    pub metric: MetricKind,
    /// "k" for the 1-D posterior over K, "k-beta" for the joint grid.
    pub grid: &'static str,
    pub value: f64,
}

/// Evaluate a metric with the approximation grid first and the reference
/// (MCMC) grid second; `kld_reverse` swaps the KL direction.
pub fn evaluate_metric(
    metric: MetricKind,
    korea: &DensityGrid,
    mcmc: &DensityGrid,
    kld_reverse: bool,
) -> Result<f64> {
    Ok(match metric {
        MetricKind::Rmse => density_rmse(korea, mcmc)?,
        MetricKind::Kld => {
            if kld_reverse {
                density_kld(mcmc, korea, KLD_EPSILON)?
            } else {
                density_kld(korea, mcmc, KLD_EPSILON)?
            }
        }
        MetricKind::Psnr => density_psnr(korea, mcmc)?,
        MetricKind::Ssim => density_ssim(korea, mcmc)?,
    })
}

fn load_pair(dir: &Path, stem: &str) -> Result<(DensityGrid, DensityGrid)> {
    let k_path = dir.join(format!("{stem}_k.csv"));
    let k = parse_density_1d(File::open(&k_path).map_err(|e| HarnessError::io(&k_path, e))?)?;
    let j_path = dir.join(format!("{stem}_2d.csv"));
    let j = parse_density_2d(File::open(&j_path).map_err(|e| HarnessError::io(&j_path, e))?)?;
    Ok((k, j))
}

/// Load `korea_*` files from one dump directory and `mcmc_*` files from
/// another, and evaluate the requested metrics on both the 1-D K posterior
/// and the joint grid.
pub fn compare_dumps(
    korea_dir: &Path,
    mcmc_dir: &Path,
    metrics: &[MetricKind],
    kld_reverse: bool,
) -> Result<Vec<ComparisonRow>> {
    let (korea_k, korea_joint) = load_pair(korea_dir, "korea")?;
    let (mcmc_k, mcmc_joint) = load_pair(mcmc_dir, "mcmc")?;
    let mut rows = Vec::with_capacity(metrics.len() * 2);
    for &metric in metrics {
        rows.push(ComparisonRow {
            metric,
            grid: "k",
            value: evaluate_metric(metric, &korea_k, &mcmc_k, kld_reverse)?,
        });
        rows.push(ComparisonRow {
            metric,
            grid: "k-beta",
            value: evaluate_metric(metric, &korea_joint, &mcmc_joint, kld_reverse)?,
        });
    }
    Ok(rows)
}
