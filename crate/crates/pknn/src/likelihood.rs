//! Pseudo-likelihood of the PKNN model and conditional class posteriors.
//!
//! Each site's full conditional is a softmax over classes of the scaled
//! agreement counts with its interaction sites:
//!
//! `p(z_i = c | ...) = exp{(beta/K) S_i(c)} / sum_c' exp{(beta/K) S_i(c')}`
//!
//! where `S_i(c)` counts how many sites in `i`'s interaction multiset carry
//! label `c`. The pseudo-likelihood is the product of these conditionals over
//! all sites. Everything is computed in log space with max-subtraction, since
//! `beta * S / K` reaches several hundred for large `beta`.

use crate::dataset::{NeighbourGraph, NeighbourRule};
use crate::math::log_sum_exp;
use crate::{Error, LabeledDataset, Result};

/// Interaction strength and neighbour count of one PKNN model.
///
/// `beta = 0` is accepted (it makes every site distribution uniform and is
/// useful as a diagnostic case) but rejected by the priors used in inference.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InteractionParams {
    pub beta: f64,
    pub k: usize,
}

impl InteractionParams {
    pub fn new(beta: f64, k: usize) -> Result<Self> {
        if !beta.is_finite() || beta < 0.0 {
            return Err(Error::InvalidInput(format!(
                "beta must be finite and non-negative, got {beta}"
            )));
        }
        if k == 0 {
            return Err(Error::KOutOfRange { k, max: usize::MAX });
        }
        Ok(Self { beta, k })
    }
}

/// One site's class-agreement scores and resulting log probability.
#[derive(Debug, Clone, PartialEq)]
pub struct SiteTerm {
    pub site: usize,
    /// Agreement count per class, before scaling by `beta / K`.
    pub per_class_score: Vec<f64>,
    /// Log of the site's normalized conditional probability.
    pub log_prob: f64,
}

fn class_counts(
    labels: &[usize],
    graph: &NeighbourGraph,
    site: usize,
    class_count: usize,
) -> Vec<f64> {
    let mut counts = vec![0.0; class_count];
    for j in graph.interaction_sites(site) {
        counts[labels[j]] += 1.0;
    }
    counts
}

fn site_log_prob_from_counts(counts: &[f64], own: usize, weight: f64) -> f64 {
    let scaled: Vec<f64> = counts.iter().map(|&s| weight * s).collect();
    scaled[own] - log_sum_exp(&scaled)
}

/// Scores and normalized log probability of one site's full conditional.
///
/// `params.k` must equal `graph.k()`.
pub fn site_term(
    labels: &[usize],
    site: usize,
    graph: &NeighbourGraph,
    params: InteractionParams,
    class_count: usize,
) -> SiteTerm {
    debug_assert_eq!(params.k, graph.k());
    let counts = class_counts(labels, graph, site, class_count);
    let log_prob = site_log_prob_from_counts(&counts, labels[site], params.beta / params.k as f64);
    SiteTerm {
        site,
        per_class_score: counts,
        log_prob,
    }
}

/// Log of one site's normalized conditional probability.
pub fn site_log_probability(
    labels: &[usize],
    site: usize,
    graph: &NeighbourGraph,
    params: InteractionParams,
    class_count: usize,
) -> f64 {
    site_term(labels, site, graph, params, class_count).log_prob
}

/// Log pseudo-likelihood: sum of the per-site conditional log probabilities
/// over every site in the graph.
pub fn log_pseudo_likelihood(
    labels: &[usize],
    graph: &NeighbourGraph,
    params: InteractionParams,
    class_count: usize,
) -> f64 {
    (0..graph.len())
        .map(|site| site_log_probability(labels, site, graph, params, class_count))
        .sum()
}

/// Evaluates `log p(z, z' = c | beta, K)` on a graph with one test site, for
/// all classes `c` at once.
///
/// The per-site agreement counts are precomputed; only the handful of sites
/// whose interaction multiset contains the test site must be re-scored per
/// class, which makes repeated evaluation over a beta grid cheap.
#[derive(Debug, Clone)]
pub struct JointEvaluator {
    class_count: usize,
    k: usize,
    /// (counts, own label) for train sites not interacting with the test site.
    fixed: Vec<(Vec<f64>, usize)>,
    /// (base counts without the test site, multiplicity of the test site,
    /// own label) for train sites that do interact with it.
    affected: Vec<(Vec<f64>, f64, usize)>,
    /// Agreement counts of the test site itself (its interaction sites are
    /// all train sites, so these do not depend on the test label).
    test_counts: Vec<f64>,
}

impl JointEvaluator {
    /// `graph` must span `train_labels.len() + 1` sites, the last one being
    /// the test site.
    pub fn new(graph: &NeighbourGraph, train_labels: &[usize], class_count: usize) -> Result<Self> {
        let test_site = train_labels.len();
        if graph.len() != test_site + 1 {
            return Err(Error::LengthMismatch {
                left: graph.len(),
                right: test_site + 1,
            });
        }
        let mut fixed = Vec::new();
        let mut affected = Vec::new();
        for site in 0..test_site {
            let mut counts = vec![0.0; class_count];
            let mut test_multiplicity = 0.0;
            for j in graph.interaction_sites(site) {
                if j == test_site {
                    test_multiplicity += 1.0;
                } else {
                    counts[train_labels[j]] += 1.0;
                }
            }
            if test_multiplicity > 0.0 {
                affected.push((counts, test_multiplicity, train_labels[site]));
            } else {
                fixed.push((counts, train_labels[site]));
            }
        }
        let mut test_counts = vec![0.0; class_count];
        for j in graph.interaction_sites(test_site) {
            test_counts[train_labels[j]] += 1.0;
        }
        Ok(Self {
            class_count,
            k: graph.k(),
            fixed,
            affected,
            test_counts,
        })
    }

    pub fn class_count(&self) -> usize {
        self.class_count
    }

    /// `log p(z, z' = c | beta, K)` for every class `c`.
    pub fn log_joint_per_class(&self, beta: f64) -> Vec<f64> {
        let w = beta / self.k as f64;
        let common: f64 = self
            .fixed
            .iter()
            .map(|(counts, own)| site_log_prob_from_counts(counts, *own, w))
            .sum();
        let test_lse = log_sum_exp(
            &self
                .test_counts
                .iter()
                .map(|&s| w * s)
                .collect::<Vec<f64>>(),
        );
        let mut scaled = vec![0.0; self.class_count];
        (0..self.class_count)
            .map(|t| {
                let mut total = common + w * self.test_counts[t] - test_lse;
                for (base, mult, own) in &self.affected {
                    for (c, s) in scaled.iter_mut().enumerate() {
                        *s = w * (base[c] + if c == t { *mult } else { 0.0 });
                    }
                    total += scaled[*own] - log_sum_exp(&scaled);
                }
                total
            })
            .collect()
    }

    /// Normalized conditional class posterior at the given beta.
    pub fn class_posterior(&self, beta: f64) -> Vec<f64> {
        crate::math::normalize_log_weights(&self.log_joint_per_class(beta))
    }
}

/// Conditional class posterior of a test point: the joint pseudo-likelihood
/// of `(z, z' = c)` on the `(N+1)`-site graph, normalized over classes in log
/// space.
pub fn conditional_class_posterior(
    train: &LabeledDataset,
    y_new: &[f64],
    params: InteractionParams,
    rule: NeighbourRule,
) -> Result<Vec<f64>> {
    if y_new.len() != train.dim() {
        return Err(Error::DimensionMismatch {
            expected: train.dim(),
            got: y_new.len(),
        });
    }
    if params.k > train.len() {
        return Err(Error::KOutOfRange {
            k: params.k,
            max: train.len(),
        });
    }
    let mut points = train.points().to_vec();
    points.push(y_new.to_vec());
    let graph = crate::dataset::NeighbourCache::build(&points).graph(params.k, rule)?;
    let evaluator = JointEvaluator::new(&graph, train.labels(), train.class_count())?;
    Ok(evaluator.class_posterior(params.beta))
}
