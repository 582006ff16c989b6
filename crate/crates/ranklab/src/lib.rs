//! A numerical laboratory around the power law of PageRank components.
//!
//! The crate grows Buckley–Osthus web graphs, aggregates pages into
//! weighted site graphs, computes the PageRank vector by four solver
//! families (power iteration, iterate averaging, single-walker Monte
//! Carlo, parallel walker ensembles) against a dense direct-solve oracle,
//! fits the rank plot's power law by log-log least squares, and trains a
//! supervised feature-parameterized ranking model with adaptive gradient
//! descent and randomized coordinate descent.
//!
//! Start with the runnable examples:
//!
//! ```bash
//! cargo run --release -p ranklab --example generate_graph
//! cargo run --release -p ranklab --example solver_showdown
//! cargo run --release -p ranklab --example walker_concentration
//! cargo run --release -p ranklab --example election_sample_size
//! cargo run --release -p ranklab --example rank_power_law
//! cargo run --release -p ranklab --example g_of_a_sweep
//! cargo run --release -p ranklab --example supervised_ranking
//! cargo run --release -p ranklab --example coordinate_economics
//! ```
//!
//! Every randomized routine is a pure function of its seed; see
//! [`rng`] for the stream-derivation scheme.

pub mod error;
pub mod experiment;
pub mod graphgen;
pub mod learn;
pub mod mcmc;
pub mod powerlaw;
pub mod rng;
pub mod solvers;
pub mod sparse;

pub use error::{Error, Result};
pub use graphgen::{
    aggregate_sites, generate_page_graph, indegree_histogram, mean_field_degree_fractions,
    DegreeFractions, PageGraph,
};
pub use sparse::{RankMeta, RankVector, StochasticMatrix};
