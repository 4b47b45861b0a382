//! Slow exact reference computations by dense one-dimensional quadrature.
//!
//! These deliberately avoid the Laplace/grid machinery: the only shared
//! ingredient is the pseudo-likelihood itself. The test suites compare the
//! fast approximations in [`crate::korea`] and the samplers in
//! [`crate::mcmc`] against these values on small instances.

use crate::dataset::{NeighbourCache, NeighbourRule};
use crate::likelihood::JointEvaluator;
use crate::math::log_sum_exp;
use crate::{korea::BETA_FLOOR, Error, GammaPrior, LabeledDataset, Result};

fn evaluator_for_k(
    train: &LabeledDataset,
    y_new: &[f64],
    k: usize,
    rule: NeighbourRule,
) -> Result<JointEvaluator> {
    if y_new.len() != train.dim() {
        return Err(Error::DimensionMismatch {
            expected: train.dim(),
            got: y_new.len(),
        });
    }
    let mut points = train.points().to_vec();
    points.push(y_new.to_vec());
    let graph = NeighbourCache::build(&points).graph(k, rule)?;
    JointEvaluator::new(&graph, train.labels(), train.class_count())
}

/// Trapezoid nodes over `[BETA_FLOOR, beta_max]` with their log weights
/// (`ln(h)` inside, `ln(h/2)` at the ends).
fn trapezoid_nodes(beta_max: f64, intervals: usize) -> Vec<(f64, f64)> {
    let lo = BETA_FLOOR;
    let h = (beta_max - lo) / intervals as f64;
    (0..=intervals)
        .map(|i| {
            let w = if i == 0 || i == intervals { 0.5 * h } else { h };
            (lo + i as f64 * h, w.ln())
        })
        .collect()
}

/// `log integral of sum_c p(z'=c, z | beta, K) p(beta) d beta` per class, for
/// one order; returns one log integral per class.
fn log_class_integrals(
    evaluator: &JointEvaluator,
    prior: &GammaPrior,
    beta_max: f64,
    intervals: usize,
) -> Vec<f64> {
    let nodes = trapezoid_nodes(beta_max, intervals);
    let class_count = evaluator.class_count();
    let mut per_class: Vec<Vec<f64>> = vec![Vec::with_capacity(nodes.len()); class_count];
    for &(beta, log_w) in &nodes {
        let log_joint = evaluator.log_joint_per_class(beta);
        let log_prior = prior.log_pdf(beta);
        for (c, v) in log_joint.iter().enumerate() {
            per_class[c].push(v + log_prior + log_w);
        }
    }
    per_class.iter().map(|vals| log_sum_exp(vals)).collect()
}

/// Exact posterior over `K = 1..k_max` under a uniform order prior, by
/// trapezoid quadrature of the beta integral for every order.
pub fn quadrature_order_posterior(
    train: &LabeledDataset,
    y_new: &[f64],
    k_max: usize,
    rule: NeighbourRule,
    prior: &GammaPrior,
    beta_max: f64,
    intervals: usize,
) -> Result<Vec<f64>> {
    let log_marginals = (1..=k_max)
        .map(|k| {
            let ev = evaluator_for_k(train, y_new, k, rule)?;
            Ok(log_sum_exp(&log_class_integrals(
                &ev, prior, beta_max, intervals,
            )))
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(crate::math::normalize_log_weights(&log_marginals))
}

/// Exact model-averaged class posterior: `p(c) proportional to sum_K p(K)
/// integral p(z'=c, z | beta, K) p(beta) d beta`.
pub fn quadrature_class_posterior(
    train: &LabeledDataset,
    y_new: &[f64],
    k_max: usize,
    rule: NeighbourRule,
    prior: &GammaPrior,
    beta_max: f64,
    intervals: usize,
) -> Result<Vec<f64>> {
    let class_count = train.class_count();
    let mut per_class_logs: Vec<Vec<f64>> = vec![Vec::with_capacity(k_max); class_count];
    for k in 1..=k_max {
        let ev = evaluator_for_k(train, y_new, k, rule)?;
        let integrals = log_class_integrals(&ev, prior, beta_max, intervals);
        for (c, v) in integrals.iter().enumerate() {
            per_class_logs[c].push(*v);
        }
    }
    let log_totals: Vec<f64> = per_class_logs.iter().map(|v| log_sum_exp(v)).collect();
    Ok(crate::math::normalize_log_weights(&log_totals))
}

/// Mean and variance of `p(beta | Y, K = k)` (the class-summed joint times
/// the prior, normalized over beta) by trapezoid quadrature.
pub fn quadrature_beta_moments(
    train: &LabeledDataset,
    y_new: &[f64],
    k: usize,
    rule: NeighbourRule,
    prior: &GammaPrior,
    beta_max: f64,
    intervals: usize,
) -> Result<(f64, f64)> {
    let ev = evaluator_for_k(train, y_new, k, rule)?;
    let nodes = trapezoid_nodes(beta_max, intervals);
    let log_density: Vec<f64> = nodes
        .iter()
        .map(|&(beta, log_w)| {
            log_sum_exp(&ev.log_joint_per_class(beta)) + prior.log_pdf(beta) + log_w
        })
        .collect();
    let max = log_density
        .iter()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return Err(Error::Numerical(
            "quadrature density is nowhere finite".into(),
        ));
    }
    let mut mass = 0.0;
    let mut mean = 0.0;
    for (&(beta, _), &ld) in nodes.iter().zip(&log_density) {
        let d = (ld - max).exp();
        mass += d;
        mean += d * beta;
    }
    mean /= mass;
    let mut var = 0.0;
    for (&(beta, _), &ld) in nodes.iter().zip(&log_density) {
        var += (ld - max).exp() * (beta - mean) * (beta - mean);
    }
    var /= mass;
    Ok((mean, var))
}

/// Exact joint `(K, beta-cell)` posterior on the cells centred at the given
/// beta points (cell width = the grid spacing), used to validate mixture
/// weight grids.
pub fn quadrature_joint_k_beta(
    train: &LabeledDataset,
    y_new: &[f64],
    k_max: usize,
    rule: NeighbourRule,
    prior: &GammaPrior,
    beta_points: &[f64],
    intervals_per_cell: usize,
    spacing: f64,
    beta_max: f64,
) -> Result<Vec<Vec<f64>>> {
    let mut log_cells = Vec::new();
    for &center in beta_points {
        let lo = (center - 0.5 * spacing).max(BETA_FLOOR);
        let hi = (center + 0.5 * spacing).min(beta_max);
        let h = (hi - lo) / intervals_per_cell as f64;
        let mut row = Vec::with_capacity(k_max);
        for k in 1..=k_max {
            let ev = evaluator_for_k(train, y_new, k, rule)?;
            let vals: Vec<f64> = (0..=intervals_per_cell)
                .map(|i| {
                    let beta = lo + i as f64 * h;
                    let w = if i == 0 || i == intervals_per_cell {
                        0.5 * h
                    } else {
                        h
                    };
                    log_sum_exp(&ev.log_joint_per_class(beta)) + prior.log_pdf(beta) + w.ln()
                })
                .collect();
            row.push(log_sum_exp(&vals));
        }
        log_cells.push(row);
    }
    let flat: Vec<f64> = log_cells.iter().flatten().copied().collect();
    let normalized = crate::math::normalize_log_weights(&flat);
    Ok(normalized
        .chunks(k_max)
        .map(|chunk| chunk.to_vec())
        .collect())
}
