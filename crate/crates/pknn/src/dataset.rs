//! Data model, distances and the three neighbouring structures.
//!
//! A [`NeighbourGraph`] records, per site, which other sites its label
//! interacts with. Three rules are supported:
//!
//! * [`NeighbourRule::Asymmetric`] — plain directed kNN: `ne(i)` holds the k
//!   nearest sites of `i`.
//! * [`NeighbourRule::BoltzmannSymmetric`] — the directed graph is kept but
//!   each site's interaction term combines its outgoing edges with the
//!   incoming edges `{ j : i in ne(j) }`, so mutual pairs count twice.
//! * [`NeighbourRule::Boltzmann2`] — the graph itself is symmetrised: for
//!   every `j in ne(i)` with `i not in ne(j)`, `i` is added to `ne(j)`.

use crate::{Error, Result};

/// Labeled observations: `N` feature vectors with class labels in
/// `0..class_count`, all of the same dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    points: Vec<Vec<f64>>,
    labels: Vec<usize>,
    class_count: usize,
    dim: usize,
}

impl LabeledDataset {
    pub fn new(points: Vec<Vec<f64>>, labels: Vec<usize>, class_count: usize) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::InvalidInput("dataset must not be empty".into()));
        }
        if points.len() != labels.len() {
            return Err(Error::LengthMismatch {
                left: points.len(),
                right: labels.len(),
            });
        }
        if class_count == 0 {
            return Err(Error::InvalidInput("class_count must be positive".into()));
        }
        let dim = points[0].len();
        if dim == 0 {
            return Err(Error::InvalidInput(
                "feature vectors must have at least one coordinate".into(),
            ));
        }
        for p in &points {
            if p.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: p.len(),
                });
            }
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= class_count) {
            return Err(Error::InvalidInput(format!(
                "label {bad} out of range for {class_count} classes"
            )));
        }
        Ok(Self {
            points,
            labels,
            class_count,
            dim,
        })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn class_count(&self) -> usize {
        self.class_count
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.points[i]
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    /// Dataset restricted to the given row indices (used by fold splitting).
    pub fn subset(&self, indices: &[usize]) -> Result<Self> {
        let points = indices.iter().map(|&i| self.points[i].clone()).collect();
        let labels = indices.iter().map(|&i| self.labels[i]).collect();
        LabeledDataset::new(points, labels, self.class_count)
    }
}

/// Which interaction structure the graph encodes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum NeighbourRule {
    Asymmetric,
    BoltzmannSymmetric,
    Boltzmann2,
}

impl NeighbourRule {
    pub const ALL: [NeighbourRule; 3] = [
        NeighbourRule::Asymmetric,
        NeighbourRule::BoltzmannSymmetric,
        NeighbourRule::Boltzmann2,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            NeighbourRule::Asymmetric => "asymmetric",
            NeighbourRule::BoltzmannSymmetric => "boltzmann-symmetric",
            NeighbourRule::Boltzmann2 => "boltzmann2",
        }
    }
}

impl std::fmt::Display for NeighbourRule {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for NeighbourRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "asymmetric" => Ok(NeighbourRule::Asymmetric),
            "boltzmann-symmetric" | "symmetric" => Ok(NeighbourRule::BoltzmannSymmetric),
            "boltzmann2" => Ok(NeighbourRule::Boltzmann2),
            other => Err(Error::InvalidInput(format!(
                "unknown neighbour rule '{other}' (expected asymmetric, \
                 boltzmann-symmetric or boltzmann2)"
            ))),
        }
    }
}

/// Per-site neighbour sets under one of the three rules.
///
/// Neighbour lists are stored sorted by site index; ties in distance are
/// always broken towards the lower site index, so construction is
/// deterministic.
#[derive(Debug, Clone, PartialEq)]
pub struct NeighbourGraph {
    neighbours: Vec<Vec<usize>>,
    /// Incoming edge lists `{ j : i in ne(j) }`, populated only under
    /// [`NeighbourRule::BoltzmannSymmetric`] where the interaction term
    /// needs them per evaluation.
    incoming: Vec<Vec<usize>>,
    k: usize,
    rule: NeighbourRule,
}

impl NeighbourGraph {
    pub fn len(&self) -> usize {
        self.neighbours.len()
    }

    pub fn is_empty(&self) -> bool {
        self.neighbours.is_empty()
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn rule(&self) -> NeighbourRule {
        self.rule
    }

    /// Outgoing neighbour set of `site` (the symmetrised set for
    /// `Boltzmann2`).
    pub fn neighbours(&self, site: usize) -> &[usize] {
        &self.neighbours[site]
    }

    /// Incoming edge list of `site`; empty unless the rule is
    /// `BoltzmannSymmetric`.
    pub fn incoming(&self, site: usize) -> &[usize] {
        &self.incoming[site]
    }

    /// The sites whose labels enter `site`'s interaction term, with
    /// multiplicity (mutual pairs appear twice under `BoltzmannSymmetric`).
    pub fn interaction_sites(&self, site: usize) -> impl Iterator<Item = usize> + '_ {
        self.neighbours[site]
            .iter()
            .chain(self.incoming[site].iter())
            .copied()
    }
}

/// Euclidean distance between two feature vectors of equal dimension.
pub fn euclidean_distance(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            expected: a.len(),
            got: b.len(),
        });
    }
    Ok(a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt())
}

fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Per-site nearest-neighbour orderings, computed once and reused to build
/// graphs for several values of k (the inference loops over k = 1..k_max).
#[derive(Debug, Clone)]
pub struct NeighbourCache {
    /// `order[i]` lists all sites j != i sorted by (distance to i, j).
    order: Vec<Vec<usize>>,
}

impl NeighbourCache {
    /// Brute-force O(N^2 log N) construction; the benchmark datasets are
    /// small enough that a spatial index would not pay for itself.
    pub fn build(points: &[Vec<f64>]) -> Self {
        let n = points.len();
        let order = (0..n)
            .map(|i| {
                let mut idx: Vec<usize> = (0..n).filter(|&j| j != i).collect();
                let dists: Vec<f64> = (0..n)
                    .map(|j| squared_distance(&points[i], &points[j]))
                    .collect();
                idx.sort_by(|&a, &b| {
                    dists[a]
                        .partial_cmp(&dists[b])
                        .expect("distances are finite")
                        .then(a.cmp(&b))
                });
                idx
            })
            .collect();
        Self { order }
    }

    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }

    /// Neighbour graph for the given k under the given rule.
    pub fn graph(&self, k: usize, rule: NeighbourRule) -> Result<NeighbourGraph> {
        let n = self.order.len();
        if n < 2 || k == 0 || k > n - 1 {
            return Err(Error::KOutOfRange {
                k,
                max: n.saturating_sub(1),
            });
        }
        let mut neighbours: Vec<Vec<usize>> = self
            .order
            .iter()
            .map(|ord| {
                let mut ne: Vec<usize> = ord[..k].to_vec();
                ne.sort_unstable();
                ne
            })
            .collect();
        let mut incoming = vec![Vec::new(); n];
        match rule {
            NeighbourRule::Asymmetric => {}
            NeighbourRule::BoltzmannSymmetric => {
                for i in 0..n {
                    for &j in &neighbours[i] {
                        incoming[j].push(i);
                    }
                }
                for list in &mut incoming {
                    list.sort_unstable();
                }
            }
            NeighbourRule::Boltzmann2 => {
                let mut extra: Vec<Vec<usize>> = vec![Vec::new(); n];
                for i in 0..n {
                    for &j in &neighbours[i] {
                        if neighbours[j].binary_search(&i).is_err() {
                            extra[j].push(i);
                        }
                    }
                }
                for (ne, mut add) in neighbours.iter_mut().zip(extra) {
                    ne.append(&mut add);
                    ne.sort_unstable();
                }
            }
        }
        Ok(NeighbourGraph {
            neighbours,
            incoming,
            k,
            rule,
        })
    }
}

/// Build the neighbour graph of `data` for the given k and rule.
///
/// Requires `1 <= k <= N-1`. Distance ties are broken by the lower site
/// index.
pub fn build_neighbour_graph(
    data: &LabeledDataset,
    k: usize,
    rule: NeighbourRule,
) -> Result<NeighbourGraph> {
    NeighbourCache::build(data.points()).graph(k, rule)
}

/// Neighbour graph over the `N+1` sites obtained by appending `y_new` to the
/// dataset the graph was built from. Defined as the full rebuild on the
/// concatenated point set; the test point gets site index `N`.
pub fn insert_test_point(
    graph: &NeighbourGraph,
    data: &LabeledDataset,
    y_new: &[f64],
) -> Result<NeighbourGraph> {
    if y_new.len() != data.dim() {
        return Err(Error::DimensionMismatch {
            expected: data.dim(),
            got: y_new.len(),
        });
    }
    let mut points = data.points().to_vec();
    points.push(y_new.to_vec());
    NeighbourCache::build(&points).graph(graph.k(), graph.rule())
}
