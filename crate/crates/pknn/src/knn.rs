//! Classical majority-vote kNN over the three neighbouring structures.

use crate::dataset::{NeighbourCache, NeighbourRule};
use crate::korea::argmax_lowest;
use crate::{Error, LabeledDataset, Result};

/// Neighbour count and interaction structure for the vote.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KnnConfig {
    pub k: usize,
    pub rule: NeighbourRule,
}

/// Majority vote among the test site's interaction sites in the
/// `(N+1)`-site graph.
///
/// Under the asymmetric rule this is the ordinary kNN vote over the k
/// nearest training points. Under `BoltzmannSymmetric` incoming edges join
/// the vote (mutual neighbours count twice), and under `Boltzmann2` the vote
/// runs over the symmetrised neighbour set; in each case the vote is the
/// argmax of the same agreement score the pseudo-likelihood uses. Vote ties
/// resolve to the lowest class index, distance ties to the lowest site
/// index.
pub fn knn_classify(train: &LabeledDataset, y_new: &[f64], config: &KnnConfig) -> Result<usize> {
    if y_new.len() != train.dim() {
        return Err(Error::DimensionMismatch {
            expected: train.dim(),
            got: y_new.len(),
        });
    }
    if config.k == 0 || config.k > train.len() {
        return Err(Error::KOutOfRange {
            k: config.k,
            max: train.len(),
        });
    }
    let mut points = train.points().to_vec();
    points.push(y_new.to_vec());
    let graph = NeighbourCache::build(&points).graph(config.k, config.rule)?;
    let test_site = train.len();
    let mut votes = vec![0usize; train.class_count()];
    for j in graph.interaction_sites(test_site) {
        votes[train.labels()[j]] += 1;
    }
    let votes: Vec<f64> = votes.into_iter().map(|v| v as f64).collect();
    Ok(argmax_lowest(&votes))
}
