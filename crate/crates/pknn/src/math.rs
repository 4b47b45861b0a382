//! Small numerical helpers shared across the crate.

/// `log(sum(exp(values)))` with max-subtraction so that large magnitudes do
/// not overflow. Returns negative infinity for an empty slice.
pub fn log_sum_exp(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    let sum: f64 = values.iter().map(|v| (v - max).exp()).sum();
    max + sum.ln()
}

/// Turn unnormalized log weights into probabilities summing to one.
pub fn normalize_log_weights(log_weights: &[f64]) -> Vec<f64> {
    let max = log_weights
        .iter()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max);
    let mut out: Vec<f64> = log_weights.iter().map(|w| (w - max).exp()).collect();
    let sum: f64 = out.iter().sum();
    for v in &mut out {
        *v /= sum;
    }
    out
}

/// Mean and variance of a mixture from component weights, means and
/// variances: `mu = sum w_j mu_j`, `var = sum w_j (var_j + (mu - mu_j)^2)`.
pub fn mixture_moments(weights: &[f64], means: &[f64], variances: &[f64]) -> (f64, f64) {
    debug_assert_eq!(weights.len(), means.len());
    debug_assert_eq!(weights.len(), variances.len());
    let mean: f64 = weights.iter().zip(means).map(|(w, m)| w * m).sum();
    let var: f64 = weights
        .iter()
        .zip(means)
        .zip(variances)
        .map(|((w, m), v)| w * (v + (mean - m) * (mean - m)))
        .sum();
    (mean, var)
}

/// Log density of a normal distribution with the given mean and variance.
pub fn log_normal_pdf(x: f64, mean: f64, variance: f64) -> f64 {
    let d = x - mean;
    -0.5 * (2.0 * std::f64::consts::PI * variance).ln() - d * d / (2.0 * variance)
}

/// Sample mean and standard deviation (n-1 denominator) of a slice.
pub fn mean_and_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let ss: f64 = values.iter().map(|v| (v - mean) * (v - mean)).sum();
    (mean, (ss / (n - 1.0)).sqrt())
}
