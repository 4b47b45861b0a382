//! Probabilistic k-nearest-neighbour (PKNN) classification with Bayesian
//! model averaging over the number of neighbours.
//!
//! The PKNN model places a Markov-random-field pseudo-likelihood over class
//! labels: each label interacts with the labels of its K nearest feature-space
//! neighbours with strength `beta`. This crate provides
//!
//! * the three neighbouring structures (asymmetric kNN, Boltzmann
//!   symmetrisation of the interaction terms, and the symmetrised-graph
//!   "Boltzmann squared" variant) in [`dataset`],
//! * the pseudo-likelihood and conditional class posteriors in [`likelihood`],
//! * a fast functional approximation of the joint posterior over
//!   `(K, beta, class)` built from per-K Laplace fits in [`korea`],
//! * a joint Metropolis-Hastings sampler over the same posterior in [`mcmc`],
//!   used as the reference baseline,
//! * classical majority-vote kNN in [`knn`] and scoring/density-comparison
//!   metrics in [`metrics`],
//! * slow but exact quadrature reference computations in [`reference`], used
//!   by the test suites to validate the fast approximations.

pub mod dataset;
mod error;
pub mod knn;
pub mod korea;
pub mod likelihood;
pub mod math;
pub mod mcmc;
pub mod metrics;
pub mod optim;
pub mod prior;
pub mod reference;

pub use dataset::{
    build_neighbour_graph, euclidean_distance, insert_test_point, LabeledDataset, NeighbourCache,
    NeighbourGraph, NeighbourRule,
};
pub use error::Error;
pub use prior::GammaPrior;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
