//! Classification scoring and density-similarity metrics.
//!
//! The density metrics compare the approximated posterior grids against MCMC
//! histograms on a shared support: MCMC beta samples are binned onto the
//! approximation's beta grid (nearest cell, out-of-range samples clipped to
//! the end cells) so both sides live on identical axes.

use crate::korea::{BetaGrid, OrderPosterior, PredictiveResult};
use crate::mcmc::ChainTrace;
use crate::{Error, Result};

/// PSNR value reported for identical grids (zero mean-squared error).
pub const PSNR_CAP_DB: f64 = 300.0;

/// Default smoothing epsilon for the KL divergence.
pub const KLD_EPSILON: f64 = 1e-12;

/// A non-negative density over `(K)` cells or `(K, beta)` cells.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityGrid {
    /// Row-major values: `values[k_index * beta_len + beta_index]`; for 1-D
    /// grids `beta_len = 1`.
    values: Vec<f64>,
    k_axis: Vec<usize>,
    beta_axis: Vec<f64>,
    normalized: bool,
}

impl DensityGrid {
    fn validate_values(values: &[f64]) -> Result<()> {
        if values.is_empty() {
            return Err(Error::InvalidInput("density grid must not be empty".into()));
        }
        if let Some(&bad) = values.iter().find(|v| !v.is_finite() || **v < 0.0) {
            return Err(Error::InvalidInput(format!(
                "density values must be finite and non-negative, got {bad}"
            )));
        }
        Ok(())
    }

    /// One-dimensional grid over K cells.
    pub fn new_1d(k_axis: Vec<usize>, values: Vec<f64>) -> Result<Self> {
        Self::validate_values(&values)?;
        if k_axis.len() != values.len() {
            return Err(Error::LengthMismatch {
                left: k_axis.len(),
                right: values.len(),
            });
        }
        let normalized = (values.iter().sum::<f64>() - 1.0).abs() <= 1e-9;
        Ok(Self {
            values,
            k_axis,
            beta_axis: Vec::new(),
            normalized,
        })
    }

    /// Two-dimensional grid over `(K, beta)` cells, row-major in K.
    pub fn new_2d(k_axis: Vec<usize>, beta_axis: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        Self::validate_values(&values)?;
        if beta_axis.is_empty() || k_axis.len() * beta_axis.len() != values.len() {
            return Err(Error::LengthMismatch {
                left: k_axis.len() * beta_axis.len(),
                right: values.len(),
            });
        }
        let normalized = (values.iter().sum::<f64>() - 1.0).abs() <= 1e-9;
        Ok(Self {
            values,
            k_axis,
            beta_axis,
            normalized,
        })
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.k_axis.len(), self.beta_axis.len().max(1))
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn k_axis(&self) -> &[usize] {
        &self.k_axis
    }

    pub fn beta_axis(&self) -> &[f64] {
        &self.beta_axis
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    /// The 1-D order posterior as a density grid.
    pub fn from_order_posterior(op: &OrderPosterior) -> Self {
        Self {
            values: op.weights.clone(),
            k_axis: (1..=op.k_max).collect(),
            beta_axis: Vec::new(),
            normalized: true,
        }
    }

    /// The normalized `(K, beta)` mixture weights of a predictive result.
    pub fn from_mixture(result: &PredictiveResult) -> Self {
        let k_max = result.order_posterior.k_max;
        let m_count = result.beta_grid.points.len();
        let mut values = vec![0.0; k_max * m_count];
        for (m, row) in result.mixture_weights.iter().enumerate() {
            for (j, &w) in row.iter().enumerate() {
                values[j * m_count + m] = w;
            }
        }
        Self {
            values,
            k_axis: (1..=k_max).collect(),
            beta_axis: result.beta_grid.points.clone(),
            normalized: true,
        }
    }

    /// Empirical posterior over K from the retained samples of a chain.
    pub fn from_mcmc_k(trace: &ChainTrace) -> Self {
        Self {
            values: trace.k_histogram(),
            k_axis: (1..=trace.k_max).collect(),
            beta_axis: Vec::new(),
            normalized: true,
        }
    }

    /// Joint `(K, beta)` histogram of the retained samples, binned on the
    /// given beta grid.
    pub fn from_mcmc_joint(trace: &ChainTrace, grid: &BetaGrid) -> Self {
        let m_count = grid.points.len();
        let mut counts = vec![0.0; trace.k_max * m_count];
        let samples = trace.k_beta_samples();
        for &(k, beta) in &samples {
            counts[(k - 1) * m_count + nearest_cell(grid, beta)] += 1.0;
        }
        let total = samples.len() as f64;
        for c in &mut counts {
            *c /= total;
        }
        Self {
            values: counts,
            k_axis: (1..=trace.k_max).collect(),
            beta_axis: grid.points.clone(),
            normalized: true,
        }
    }
}

/// Index of the grid cell nearest to `beta`; out-of-range values clip to the
/// end cells.
pub fn nearest_cell(grid: &BetaGrid, beta: f64) -> usize {
    let m = grid.points.len();
    if m == 1 {
        return 0;
    }
    let idx = ((beta - grid.points[0]) / grid.spacing).round();
    (idx.max(0.0) as usize).min(m - 1)
}

fn check_labels(labels: &[usize], class_count: usize) -> Result<()> {
    if let Some(&bad) = labels.iter().find(|&&l| l >= class_count) {
        return Err(Error::InvalidInput(format!(
            "label {bad} out of range for {class_count} classes"
        )));
    }
    Ok(())
}

/// Macro-averaged F1: per-class F1 with empty-denominator classes scoring 0,
/// averaged over the classes present in the truth.
pub fn f_measure(predicted: &[usize], truth: &[usize], class_count: usize) -> Result<f64> {
    if predicted.len() != truth.len() {
        return Err(Error::LengthMismatch {
            left: predicted.len(),
            right: truth.len(),
        });
    }
    if truth.is_empty() {
        return Err(Error::InvalidInput("empty label sequences".into()));
    }
    check_labels(predicted, class_count)?;
    check_labels(truth, class_count)?;
    let mut tp = vec![0.0; class_count];
    let mut fp = vec![0.0; class_count];
    let mut fn_ = vec![0.0; class_count];
    for (&p, &t) in predicted.iter().zip(truth) {
        if p == t {
            tp[p] += 1.0;
        } else {
            fp[p] += 1.0;
            fn_[t] += 1.0;
        }
    }
    let mut total = 0.0;
    let mut present = 0.0;
    for c in 0..class_count {
        if tp[c] + fn_[c] == 0.0 {
            continue; // class absent from the truth
        }
        present += 1.0;
        let precision = if tp[c] + fp[c] > 0.0 {
            tp[c] / (tp[c] + fp[c])
        } else {
            0.0
        };
        let recall = tp[c] / (tp[c] + fn_[c]);
        if precision + recall > 0.0 {
            total += 2.0 * precision * recall / (precision + recall);
        }
    }
    Ok(total / present)
}

/// Micro-averaged F1; for single-label classification this equals accuracy.
pub fn f_measure_micro(predicted: &[usize], truth: &[usize], class_count: usize) -> Result<f64> {
    if predicted.len() != truth.len() {
        return Err(Error::LengthMismatch {
            left: predicted.len(),
            right: truth.len(),
        });
    }
    if truth.is_empty() {
        return Err(Error::InvalidInput("empty label sequences".into()));
    }
    check_labels(predicted, class_count)?;
    check_labels(truth, class_count)?;
    let correct = predicted
        .iter()
        .zip(truth)
        .filter(|(p, t)| p == t)
        .count();
    Ok(correct as f64 / truth.len() as f64)
}

fn check_shapes(p: &DensityGrid, q: &DensityGrid) -> Result<()> {
    if p.shape() != q.shape() {
        return Err(Error::ShapeMismatch {
            left: p.shape(),
            right: q.shape(),
        });
    }
    Ok(())
}

fn mse(p: &DensityGrid, q: &DensityGrid) -> f64 {
    let n = p.values.len() as f64;
    p.values
        .iter()
        .zip(&q.values)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        / n
}

/// Root mean squared difference between two grids of identical shape.
pub fn density_rmse(p: &DensityGrid, q: &DensityGrid) -> Result<f64> {
    check_shapes(p, q)?;
    Ok(mse(p, q).sqrt())
}

/// `KL(p || q)` with epsilon smoothing and renormalization; both grids must
/// be normalized. Call with the approximation grid as `p` and the MCMC
/// histogram as `q`.
pub fn density_kld(p: &DensityGrid, q: &DensityGrid, epsilon: f64) -> Result<f64> {
    check_shapes(p, q)?;
    if epsilon <= 0.0 {
        return Err(Error::InvalidInput(format!(
            "epsilon must be positive, got {epsilon}"
        )));
    }
    for grid in [p, q] {
        if !grid.normalized {
            return Err(Error::NotNormalized {
                sum: grid.values.iter().sum(),
            });
        }
    }
    let ps: f64 = p.values.iter().map(|v| v + epsilon).sum();
    let qs: f64 = q.values.iter().map(|v| v + epsilon).sum();
    Ok(p.values
        .iter()
        .zip(&q.values)
        .map(|(&a, &b)| {
            let pa = (a + epsilon) / ps;
            let qb = (b + epsilon) / qs;
            pa * (pa / qb).ln()
        })
        .sum::<f64>()
        .max(0.0))
}

/// Peak signal-to-noise ratio in decibels, with the peak taken from the
/// reference grid `q`. Identical grids return the 300 dB cap.
pub fn density_psnr(p: &DensityGrid, q: &DensityGrid) -> Result<f64> {
    check_shapes(p, q)?;
    let mse = mse(p, q);
    if mse == 0.0 {
        return Ok(PSNR_CAP_DB);
    }
    let peak = q.values.iter().copied().fold(0.0f64, f64::max);
    let peak = if peak > 0.0 { peak } else { 1.0 };
    Ok((10.0 * (peak * peak / mse).log10()).min(PSNR_CAP_DB))
}

/// Global single-window structural similarity over the flattened grids,
/// with the dynamic range taken as the maximum cell value across both
/// grids (1 if both are all-zero). The grids here are tiny, so no sliding
/// window applies.
pub fn density_ssim(p: &DensityGrid, q: &DensityGrid) -> Result<f64> {
    check_shapes(p, q)?;
    let n = p.values.len() as f64;
    let mu_p = p.values.iter().sum::<f64>() / n;
    let mu_q = q.values.iter().sum::<f64>() / n;
    let mut var_p = 0.0;
    let mut var_q = 0.0;
    let mut cov = 0.0;
    for (&a, &b) in p.values.iter().zip(&q.values) {
        var_p += (a - mu_p) * (a - mu_p);
        var_q += (b - mu_q) * (b - mu_q);
        cov += (a - mu_p) * (b - mu_q);
    }
    var_p /= n;
    var_q /= n;
    cov /= n;
    let peak = p
        .values
        .iter()
        .chain(&q.values)
        .copied()
        .fold(0.0f64, f64::max);
    let level = if peak > 0.0 { peak } else { 1.0 };
    let c1 = (0.01 * level) * (0.01 * level);
    let c2 = (0.03 * level) * (0.03 * level);
    Ok(((2.0 * mu_p * mu_q + c1) * (2.0 * cov + c2))
        / ((mu_p * mu_p + mu_q * mu_q + c1) * (var_p + var_q + c2)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn grid1(values: &[f64]) -> DensityGrid {
        DensityGrid::new_1d((1..=values.len()).collect(), values.to_vec()).unwrap()
    }

    #[test]
    fn f_measure_perfect_and_all_wrong() {
        assert_eq!(f_measure(&[0, 1, 0], &[0, 1, 0], 2).unwrap(), 1.0);
        assert_eq!(f_measure(&[1, 0, 1], &[0, 1, 0], 2).unwrap(), 0.0);
    }

    #[test]
    fn f_measure_confusion_matrix_example() {
        // truth AABB, predicted ABBB: F_A = 2/3, F_B = 0.8, macro 0.7333..
        let f = f_measure(&[0, 1, 1, 1], &[0, 0, 1, 1], 2).unwrap();
        assert!((f - (2.0 / 3.0 + 0.8) / 2.0).abs() < 1e-12);
    }

    #[test]
    fn f_measure_ignores_classes_absent_from_truth() {
        // class 2 never appears in the truth: macro over classes 0 and 1
        let f = f_measure(&[0, 1], &[0, 1], 3).unwrap();
        assert_eq!(f, 1.0);
    }

    #[test]
    fn f_measure_micro_is_accuracy() {
        let f = f_measure_micro(&[0, 1, 1, 1], &[0, 0, 1, 1], 2).unwrap();
        assert_eq!(f, 0.75);
    }

    #[test]
    fn f_measure_length_mismatch() {
        assert!(f_measure(&[0], &[0, 1], 2).is_err());
        assert!(f_measure(&[], &[], 2).is_err());
    }

    #[test]
    fn rmse_examples() {
        assert_eq!(
            density_rmse(&grid1(&[0.5, 0.5]), &grid1(&[0.5, 0.5])).unwrap(),
            0.0
        );
        assert_eq!(
            density_rmse(&grid1(&[1.0, 0.0]), &grid1(&[0.0, 1.0])).unwrap(),
            1.0
        );
        let r = density_rmse(&grid1(&[0.5, 0.5]), &grid1(&[0.25, 0.75])).unwrap();
        assert!((r - 0.25).abs() < 1e-15);
    }

    #[test]
    fn rmse_shape_mismatch() {
        assert!(density_rmse(&grid1(&[1.0]), &grid1(&[0.5, 0.5])).is_err());
    }

    #[test]
    fn kld_examples() {
        assert_eq!(
            density_kld(&grid1(&[0.5, 0.5]), &grid1(&[0.5, 0.5]), KLD_EPSILON).unwrap(),
            0.0
        );
        let k = density_kld(&grid1(&[1.0, 0.0]), &grid1(&[0.5, 0.5]), KLD_EPSILON).unwrap();
        assert!((k - std::f64::consts::LN_2).abs() < 1e-9, "k = {k}");
        let k = density_kld(&grid1(&[0.5, 0.5]), &grid1(&[0.25, 0.75]), KLD_EPSILON).unwrap();
        let expected = 0.5 * (2.0f64).ln() + 0.5 * (2.0f64 / 3.0).ln();
        assert!((k - expected).abs() < 1e-9);
    }

    #[test]
    fn kld_requires_normalized_grids() {
        let bad = grid1(&[0.5, 0.2]);
        assert!(matches!(
            density_kld(&bad, &grid1(&[0.5, 0.5]), KLD_EPSILON),
            Err(Error::NotNormalized { .. })
        ));
    }

    #[test]
    fn psnr_examples() {
        assert_eq!(
            density_psnr(&grid1(&[0.3, 0.7]), &grid1(&[0.3, 0.7])).unwrap(),
            PSNR_CAP_DB
        );
        let p = density_psnr(&grid1(&[0.9, 0.1]), &grid1(&[1.0, 0.0])).unwrap();
        assert!((p - 20.0).abs() < 1e-12, "p = {p}");
    }

    #[test]
    fn psnr_is_scale_covariant() {
        let p = grid1(&[0.9, 0.1]);
        let q = grid1(&[1.0, 0.0]);
        let p2 = grid1(&[1.8, 0.2]);
        let q2 = grid1(&[2.0, 0.0]);
        let a = density_psnr(&p, &q).unwrap();
        let b = density_psnr(&p2, &q2).unwrap();
        assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn ssim_identical_nonconstant_is_one() {
        let g = grid1(&[0.2, 0.8]);
        assert!((density_ssim(&g, &g).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn ssim_penalizes_constant_shift() {
        let p = grid1(&[0.2, 0.8]);
        let q = grid1(&[0.4, 1.0]);
        assert!(density_ssim(&p, &q).unwrap() < 1.0);
    }

    #[test]
    fn ssim_direct_formula_example() {
        let p = grid1(&[0.5, 0.5]);
        let q = grid1(&[0.25, 0.75]);
        // direct evaluation with L = 0.75
        let (mu_p, mu_q) = (0.5, 0.5);
        let (var_p, var_q, cov) = (0.0, 0.0625, 0.0);
        let c1 = 0.0075f64 * 0.0075;
        let c2 = 0.0225f64 * 0.0225;
        let expected = ((2.0 * mu_p * mu_q + c1) * (2.0 * cov + c2))
            / ((mu_p * mu_p + mu_q * mu_q + c1) * (var_p + var_q + c2));
        let got = density_ssim(&p, &q).unwrap();
        assert!((got - expected).abs() < 1e-12, "got {got}, want {expected}");
    }

    #[test]
    fn grid_validation() {
        assert!(DensityGrid::new_1d(vec![], vec![]).is_err());
        assert!(DensityGrid::new_1d(vec![1], vec![-0.5]).is_err());
        assert!(DensityGrid::new_1d(vec![1, 2], vec![0.5]).is_err());
        assert!(DensityGrid::new_2d(vec![1, 2], vec![0.1], vec![0.5]).is_err());
        let g = DensityGrid::new_2d(vec![1, 2], vec![0.1, 0.2], vec![0.25; 4]).unwrap();
        assert_eq!(g.shape(), (2, 2));
        assert!(g.is_normalized());
    }

    #[test]
    fn nearest_cell_clips_out_of_range() {
        let grid = BetaGrid {
            points: vec![1.0, 3.0, 5.0],
            spacing: 2.0,
            beta_max: 10.0,
        };
        assert_eq!(nearest_cell(&grid, -4.0), 0);
        assert_eq!(nearest_cell(&grid, 1.9), 0);
        assert_eq!(nearest_cell(&grid, 2.1), 1);
        assert_eq!(nearest_cell(&grid, 99.0), 2);
    }

    fn arb_density(len: usize) -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(0.0..1.0f64, len).prop_map(|mut v| {
            let s: f64 = v.iter().sum();
            if s > 0.0 {
                for x in &mut v {
                    *x /= s;
                }
            } else {
                let n = v.len() as f64;
                for x in &mut v {
                    *x = 1.0 / n;
                }
            }
            v
        })
    }

    proptest! {
        #[test]
        fn rmse_is_a_metric(
            a in arb_density(6), b in arb_density(6), c in arb_density(6)
        ) {
            let (ga, gb, gc) = (grid1(&a), grid1(&b), grid1(&c));
            let ab = density_rmse(&ga, &gb).unwrap();
            let ba = density_rmse(&gb, &ga).unwrap();
            let ac = density_rmse(&ga, &gc).unwrap();
            let cb = density_rmse(&gc, &gb).unwrap();
            prop_assert!((ab - ba).abs() < 1e-15);
            prop_assert!(ab <= ac + cb + 1e-12);
            prop_assert!(ab >= 0.0);
        }

        #[test]
        fn kld_nonnegative_and_zero_iff_equal(a in arb_density(6), b in arb_density(6)) {
            let (ga, gb) = (grid1(&a), grid1(&b));
            let k = density_kld(&ga, &gb, KLD_EPSILON).unwrap();
            prop_assert!(k >= 0.0);
            let self_k = density_kld(&ga, &ga, KLD_EPSILON).unwrap();
            prop_assert!(self_k.abs() < 1e-12);
        }

        #[test]
        fn metrics_are_permutation_covariant(
            a in arb_density(6), b in arb_density(6), shift in 0usize..6
        ) {
            let rotate = |v: &[f64]| -> Vec<f64> {
                (0..v.len()).map(|i| v[(i + shift) % v.len()]).collect()
            };
            let (ga, gb) = (grid1(&a), grid1(&b));
            let (ra, rb) = (grid1(&rotate(&a)), grid1(&rotate(&b)));
            prop_assert!((density_rmse(&ga, &gb).unwrap()
                - density_rmse(&ra, &rb).unwrap()).abs() < 1e-12);
            prop_assert!((density_kld(&ga, &gb, KLD_EPSILON).unwrap()
                - density_kld(&ra, &rb, KLD_EPSILON).unwrap()).abs() < 1e-12);
            prop_assert!((density_psnr(&ga, &gb).unwrap()
                - density_psnr(&ra, &rb).unwrap()).abs() < 1e-9);
            prop_assert!((density_ssim(&ga, &gb).unwrap()
                - density_ssim(&ra, &rb).unwrap()).abs() < 1e-12);
        }

        #[test]
        fn ssim_never_exceeds_one(a in arb_density(5), b in arb_density(5)) {
            let s = density_ssim(&grid1(&a), &grid1(&b)).unwrap();
            prop_assert!(s <= 1.0 + 1e-12);
            prop_assert!(s > -1.0 - 1e-12);
        }

        #[test]
        fn f_measure_bounded(
            labels in prop::collection::vec((0usize..3, 0usize..3), 1..40)
        ) {
            let predicted: Vec<usize> = labels.iter().map(|&(p, _)| p).collect();
            let truth: Vec<usize> = labels.iter().map(|&(_, t)| t).collect();
            let f = f_measure(&predicted, &truth, 3).unwrap();
            prop_assert!((0.0..=1.0).contains(&f));
            let perfect = f_measure(&truth, &truth, 3).unwrap();
            prop_assert_eq!(perfect, 1.0);
        }
    }
}
