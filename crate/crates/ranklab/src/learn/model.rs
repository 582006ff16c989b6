//! The ranking model: a digraph with per-edge and per-node feature vectors,
//! whose transition matrix and teleport distribution are row softmaxes of
//! feature inner products. Smooth in the parameters, row-stochastic by
//! construction, and each element costs O(d) to evaluate.

use crate::error::{Error, Result};
use crate::sparse::{RankMeta, RankVector};

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Edge {
    pub target: usize,
    pub features: Vec<f64>,
}

/// A query's ranking instance: graph, features, teleport weight, and the
/// iteration budget of the truncated solver.
#[derive(Debug, Clone, PartialEq)]
pub struct RankingModel {
    pub(crate) out_edges: Vec<Vec<Edge>>,
    pub(crate) node_features: Vec<Vec<f64>>,
    feature_dim: usize,
    teleport: f64,
    iterations: usize,
}

/// Iteration budget that brings the truncated iterate within 2(1-delta)^T
/// <= 1e-8 of the fixed point: `ceil(ln(2e8) / delta)`.
pub fn default_iteration_budget(delta: f64) -> usize {
    ((2.0 / 1e-8f64).ln() / delta).ceil() as usize
}

impl RankingModel {
    /// `edges` are `(from, to, features)` triples. Every node needs at
    /// least one outgoing edge and one feature vector; all feature vectors
    /// share the dimension `l`.
    pub fn new(
        n_nodes: usize,
        edges: Vec<(usize, usize, Vec<f64>)>,
        node_features: Vec<Vec<f64>>,
        teleport: f64,
        iterations: usize,
    ) -> Result<Self> {
        if n_nodes == 0 {
            return Err(Error::invalid("model must have at least one node"));
        }
        if !(teleport > 0.0 && teleport <= 1.0) {
            return Err(Error::invalid(format!(
                "teleport weight must lie in (0, 1], got {teleport}"
            )));
        }
        if iterations == 0 {
            return Err(Error::invalid("iteration budget T must be at least 1"));
        }
        if node_features.len() != n_nodes {
            return Err(Error::dims(format!(
                "{} node feature vectors for {n_nodes} nodes",
                node_features.len()
            )));
        }
        let feature_dim = node_features
            .first()
            .map(Vec::len)
            .filter(|&l| l > 0)
            .ok_or_else(|| Error::invalid("feature dimension must be positive"))?;
        if node_features.iter().any(|f| f.len() != feature_dim) {
            return Err(Error::dims("node feature dimensions are not uniform".into()));
        }
        let mut out_edges: Vec<Vec<Edge>> = vec![Vec::new(); n_nodes];
        for (from, to, features) in edges {
            if from >= n_nodes || to >= n_nodes {
                return Err(Error::invalid(format!(
                    "edge ({from}, {to}) outside {n_nodes} nodes"
                )));
            }
            if features.len() != feature_dim {
                return Err(Error::dims(format!(
                    "edge ({from}, {to}) has {} features, expected {feature_dim}",
                    features.len()
                )));
            }
            out_edges[from].push(Edge { target: to, features });
        }
        if let Some(node) = out_edges.iter().position(Vec::is_empty) {
            return Err(Error::invalid(format!("node {node} has no outgoing edge")));
        }
        Ok(RankingModel {
            out_edges,
            node_features,
            feature_dim,
            teleport,
            iterations,
        })
    }

    pub fn n_nodes(&self) -> usize {
        self.out_edges.len()
    }

    /// Feature dimension `l`; the parameter dimension is `2l`.
    pub fn feature_dim(&self) -> usize {
        self.feature_dim
    }

    pub fn teleport(&self) -> f64 {
        self.teleport
    }

    pub fn iterations(&self) -> usize {
        self.iterations
    }

    pub fn edges(&self) -> impl Iterator<Item = (usize, usize, &[f64])> + '_ {
        self.out_edges.iter().enumerate().flat_map(|(from, edges)| {
            edges
                .iter()
                .map(move |e| (from, e.target, e.features.as_slice()))
        })
    }
}

/// Parameter vector `x` of dimension `d = 2l`: the first half weighs edge
/// features, the second half weighs node features for the teleport
/// distribution.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    x: Vec<f64>,
}

impl ModelParams {
    pub fn zeros(feature_dim: usize) -> Self {
        ModelParams {
            x: vec![0.0; 2 * feature_dim],
        }
    }

    pub fn from_vec(x: Vec<f64>) -> Result<Self> {
        if x.is_empty() || x.len() % 2 != 0 {
            return Err(Error::invalid(format!(
                "parameter vector length must be even and positive, got {}",
                x.len()
            )));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("parameters must be finite"));
        }
        Ok(ModelParams { x })
    }

    pub fn dim(&self) -> usize {
        self.x.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.x
    }

    /// Edge-weight half of the parameters.
    pub fn edge_part(&self) -> &[f64] {
        &self.x[..self.x.len() / 2]
    }

    /// Teleport-distribution half.
    pub fn teleport_part(&self) -> &[f64] {
        &self.x[self.x.len() / 2..]
    }
}

/// Row-stochastic transition probabilities (aligned with the model's edge
/// lists) plus the teleport distribution.
#[derive(Debug, Clone)]
pub struct TransitionSystem {
    /// `rows[i][e]` is the probability of edge `e` out of node `i`.
    pub rows: Vec<Vec<f64>>,
    pub teleport_dist: Vec<f64>,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Softmax in place with max-subtraction, returning nothing; `scores`
/// becomes the probability vector.
fn softmax_in_place(scores: &mut [f64]) {
    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for s in scores.iter_mut() {
        *s = (*s - max).exp();
        sum += *s;
    }
    for s in scores.iter_mut() {
        *s /= sum;
    }
}

/// Builds `P(y, x)` and `pi(y, x)`: per-row softmax of `<x_P, y_edge>` and
/// a global softmax of `<x_pi, y_node>`. Rows and the teleport vector are
/// normalized exactly (up to rounding) and the map is smooth in `x`.
pub fn build_transition(model: &RankingModel, params: &ModelParams) -> Result<TransitionSystem> {
    if params.dim() != 2 * model.feature_dim() {
        return Err(Error::dims(format!(
            "parameter dimension {} does not match 2 * feature dim {}",
            params.dim(),
            2 * model.feature_dim()
        )));
    }
    let x_edge = params.edge_part();
    let x_node = params.teleport_part();
    let rows = model
        .out_edges
        .iter()
        .map(|edges| {
            let mut scores: Vec<f64> = edges.iter().map(|e| dot(x_edge, &e.features)).collect();
            softmax_in_place(&mut scores);
            scores
        })
        .collect();
    let mut teleport_dist: Vec<f64> = model
        .node_features
        .iter()
        .map(|f| dot(x_node, f))
        .collect();
    softmax_in_place(&mut teleport_dist);
    Ok(TransitionSystem { rows, teleport_dist })
}

/// One teleported transition: `next = (1 - delta) p^T P + delta pi^T`.
pub(crate) fn step(model: &RankingModel, ts: &TransitionSystem, p: &[f64], delta: f64) -> Vec<f64> {
    let n = model.n_nodes();
    let mut next = vec![0.0f64; n];
    for (i, edges) in model.out_edges.iter().enumerate() {
        let mass = (1.0 - delta) * p[i];
        if mass == 0.0 {
            continue;
        }
        for (e, edge) in edges.iter().enumerate() {
            next[edge.target] += mass * ts.rows[i][e];
        }
    }
    for (v, pi) in next.iter_mut().zip(&ts.teleport_dist) {
        *v += delta * pi;
    }
    next
}

/// All iterates `p(0) .. p(T)` of the truncated iteration from the uniform
/// start. The trajectory is what the reverse pass differentiates.
pub(crate) fn solve_trajectory(
    model: &RankingModel,
    ts: &TransitionSystem,
) -> Vec<Vec<f64>> {
    let n = model.n_nodes();
    let delta = model.teleport();
    let mut trajectory = Vec::with_capacity(model.iterations() + 1);
    trajectory.push(vec![1.0 / n as f64; n]);
    for _ in 0..model.iterations() {
        let next = step(model, ts, trajectory.last().unwrap(), delta);
        trajectory.push(next);
    }
    trajectory
}

/// Exactly `T` iterations of the teleported recursion from the uniform
/// start. Truncation is part of the definition: the computed map is smooth
/// in the parameters and the gradient code differentiates it exactly. The
/// distance to the true fixed point is at most `2 (1 - delta)^T`.
pub fn solve_ranking(model: &RankingModel, params: &ModelParams) -> Result<RankVector> {
    let ts = build_transition(model, params)?;
    let trajectory = solve_trajectory(model, &ts);
    Ok(RankVector::from_values_unchecked(
        trajectory.into_iter().next_back().unwrap(),
        RankMeta {
            solver: "truncated-mpi".into(),
            iterations: model.iterations(),
            residual: 2.0 * (1.0 - model.teleport()).powi(model.iterations() as i32),
            seed: None,
        },
    ))
}
