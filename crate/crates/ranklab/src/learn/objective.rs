//! The learning objective and its exact gradient.
//!
//! `F(x) = sum over queries of 1/2 sum over labeled nodes of
//! (p_w(q, x) - target_w)^2`, where `p(q, x)` is the truncated iterate of
//! the teleported recursion. The gradient is computed by reverse
//! accumulation through the `T` unrolled iterations and through both
//! softmax parameterizations, at a small constant multiple of the forward
//! cost; central finite differences serve as the independent cross-check.

use std::collections::BTreeMap;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::learn::model::{build_transition, solve_trajectory, ModelParams, RankingModel};
use crate::learn::optimize::Objective;

/// A query with expert grades: the model, the sparse grade map, and the
/// grades rescaled to sum 1 over the labeled set.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledQuery {
    model: RankingModel,
    labels: BTreeMap<usize, u8>,
    /// `(node, target)` pairs in ascending node order; targets sum to 1.
    targets: Vec<(usize, f64)>,
}

impl LabeledQuery {
    /// Grades are on the 5-point scale 0..=4 and must not all be zero
    /// (zero-sum grades cannot be rescaled to a distribution).
    pub fn new(model: RankingModel, labels: BTreeMap<usize, u8>) -> Result<Self> {
        if labels.is_empty() {
            return Err(Error::invalid("a query needs at least one labeled node"));
        }
        for (&node, &grade) in &labels {
            if node >= model.n_nodes() {
                return Err(Error::invalid(format!(
                    "labeled node {node} outside {} nodes",
                    model.n_nodes()
                )));
            }
            if grade > 4 {
                return Err(Error::invalid(format!(
                    "grade {grade} at node {node} outside the 0..=4 scale"
                )));
            }
        }
        let total: u64 = labels.values().map(|&g| g as u64).sum();
        if total == 0 {
            return Err(Error::invalid("all grades are zero; targets cannot be normalized"));
        }
        let targets = labels
            .iter()
            .map(|(&node, &grade)| (node, grade as f64 / total as f64))
            .collect();
        Ok(LabeledQuery {
            model,
            labels,
            targets,
        })
    }

    pub fn model(&self) -> &RankingModel {
        &self.model
    }

    pub fn labels(&self) -> &BTreeMap<usize, u8> {
        &self.labels
    }

    /// Normalized targets over the labeled nodes.
    pub fn targets(&self) -> &[(usize, f64)] {
        &self.targets
    }
}

/// Forward value of a single query.
fn query_value(q: &LabeledQuery, params: &ModelParams) -> Result<f64> {
    let ts = build_transition(&q.model, params)?;
    let trajectory = solve_trajectory(&q.model, &ts);
    let p = trajectory.last().unwrap();
    Ok(q.targets
        .iter()
        .map(|&(node, target)| {
            let r = p[node] - target;
            0.5 * r * r
        })
        .sum())
}

/// Forward value plus reverse-accumulated gradient of a single query.
fn query_value_and_gradient(q: &LabeledQuery, params: &ModelParams) -> Result<(f64, Vec<f64>)> {
    let model = &q.model;
    let l = model.feature_dim();
    let delta = model.teleport();
    let keep = 1.0 - delta;
    let ts = build_transition(model, params)?;
    let trajectory = solve_trajectory(model, &ts);
    let p_final = trajectory.last().unwrap();

    let mut value = 0.0;
    let mut adj = vec![0.0f64; model.n_nodes()];
    for &(node, target) in &q.targets {
        let r = p_final[node] - target;
        value += 0.5 * r * r;
        adj[node] = r;
    }

    // Reverse sweep through the unrolled iterations. `adj` holds the
    // adjoint of p(t+1); each pass contributes to the teleport and edge
    // adjoints and produces the adjoint of p(t).
    let mut pi_adj = vec![0.0f64; model.n_nodes()];
    let mut edge_adj: Vec<Vec<f64>> = ts.rows.iter().map(|r| vec![0.0; r.len()]).collect();
    for t in (0..model.iterations()).rev() {
        let p_t = &trajectory[t];
        for (pa, a) in pi_adj.iter_mut().zip(&adj) {
            *pa += delta * a;
        }
        let mut prev = vec![0.0f64; model.n_nodes()];
        for (i, edges) in model.out_edges.iter().enumerate() {
            let mass = keep * p_t[i];
            let mut acc = 0.0;
            for (e, edge) in edges.iter().enumerate() {
                let a = adj[edge.target];
                edge_adj[i][e] += mass * a;
                acc += ts.rows[i][e] * a;
            }
            prev[i] = keep * acc;
        }
        adj = prev;
    }

    // Through the softmaxes into the parameters.
    let mut grad = vec![0.0f64; 2 * l];
    let (grad_edge, grad_node) = grad.split_at_mut(l);
    for (i, edges) in model.out_edges.iter().enumerate() {
        let row = &ts.rows[i];
        let row_dot: f64 = edge_adj[i].iter().zip(row).map(|(a, p)| a * p).sum();
        for (e, edge) in edges.iter().enumerate() {
            let score_adj = row[e] * (edge_adj[i][e] - row_dot);
            for (g, f) in grad_edge.iter_mut().zip(&edge.features) {
                *g += score_adj * f;
            }
        }
    }
    let pi_dot: f64 = pi_adj
        .iter()
        .zip(&ts.teleport_dist)
        .map(|(a, p)| a * p)
        .sum();
    for (w, features) in model.node_features.iter().enumerate() {
        let score_adj = ts.teleport_dist[w] * (pi_adj[w] - pi_dot);
        for (g, f) in grad_node.iter_mut().zip(features) {
            *g += score_adj * f;
        }
    }
    Ok((value, grad))
}

fn check_queries(queries: &[LabeledQuery], params: &ModelParams) -> Result<()> {
    if queries.is_empty() {
        return Err(Error::invalid("objective needs at least one query"));
    }
    for q in queries {
        if params.dim() != 2 * q.model().feature_dim() {
            return Err(Error::dims(format!(
                "parameter dimension {} does not match query feature dim {}",
                params.dim(),
                q.model().feature_dim()
            )));
        }
    }
    Ok(())
}

/// `F(x)` over a query set.
pub fn objective_value(queries: &[LabeledQuery], params: &ModelParams) -> Result<f64> {
    check_queries(queries, params)?;
    let values: Result<Vec<f64>> = queries.par_iter().map(|q| query_value(q, params)).collect();
    Ok(values?.iter().sum())
}

/// `(F(x), grad F(x))` over a query set. Queries run independently (and
/// possibly concurrently); the reduction order is fixed by query order.
pub fn objective_and_gradient(
    queries: &[LabeledQuery],
    params: &ModelParams,
) -> Result<(f64, Vec<f64>)> {
    check_queries(queries, params)?;
    let parts: Result<Vec<(f64, Vec<f64>)>> = queries
        .par_iter()
        .map(|q| query_value_and_gradient(q, params))
        .collect();
    let parts = parts?;
    let mut value = 0.0;
    let mut grad = vec![0.0f64; params.dim()];
    for (v, g) in parts {
        value += v;
        for (acc, gi) in grad.iter_mut().zip(g) {
            *acc += gi;
        }
    }
    Ok((value, grad))
}

/// Central finite differences `(F(x + h e_i) - F(x - h e_i)) / (2h)` per
/// coordinate; O(h^2) accurate for smooth F.
pub fn finite_diff_gradient<F>(mut f: F, x: &[f64], h: f64) -> Result<Vec<f64>>
where
    F: FnMut(&[f64]) -> f64,
{
    if !(h > 0.0) {
        return Err(Error::invalid(format!("step h must be positive, got {h}")));
    }
    let mut grad = Vec::with_capacity(x.len());
    let mut probe = x.to_vec();
    for i in 0..x.len() {
        probe[i] = x[i] + h;
        let up = f(&probe);
        probe[i] = x[i] - h;
        let down = f(&probe);
        probe[i] = x[i];
        grad.push((up - down) / (2.0 * h));
    }
    Ok(grad)
}

/// The training objective over a fixed query set, packaged for the
/// optimizers.
pub struct LearningObjective<'a> {
    queries: &'a [LabeledQuery],
    dim: usize,
}

impl<'a> LearningObjective<'a> {
    pub fn new(queries: &'a [LabeledQuery]) -> Result<Self> {
        let first = queries
            .first()
            .ok_or_else(|| Error::invalid("objective needs at least one query"))?;
        Ok(LearningObjective {
            queries,
            dim: 2 * first.model().feature_dim(),
        })
    }
}

impl Objective for LearningObjective<'_> {
    fn dim(&self) -> usize {
        self.dim
    }

    fn value(&mut self, x: &[f64]) -> f64 {
        let params = ModelParams::from_vec(x.to_vec()).expect("finite parameters");
        objective_value(self.queries, &params).expect("consistent query set")
    }

    fn gradient(&mut self, x: &[f64]) -> Vec<f64> {
        let params = ModelParams::from_vec(x.to_vec()).expect("finite parameters");
        objective_and_gradient(self.queries, &params)
            .expect("consistent query set")
            .1
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::learn::synth::{planted_labels, synthetic_model, SynthConfig};
    use crate::rng::SplitMix64;

    fn sample_query(seed: u64) -> LabeledQuery {
        let cfg = SynthConfig {
            n_nodes: 30,
            feature_dim: 5,
            out_degree: 3,
            teleport: 0.15,
            iterations: 50,
            seed,
        };
        let model = synthetic_model(&cfg);
        let mut rng = SplitMix64::new(seed ^ 0xfeed);
        let truth =
            ModelParams::from_vec((0..10).map(|_| rng.next_f64() - 0.5).collect()).unwrap();
        let labels = planted_labels(&model, &truth, 12, seed ^ 0xbeef);
        LabeledQuery::new(model, labels).unwrap()
    }

    #[test]
    fn targets_normalize_over_labeled_set() {
        let q = sample_query(0);
        let sum: f64 = q.targets().iter().map(|(_, t)| t).sum();
        assert!((sum - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn rejects_all_zero_grades() {
        let cfg = SynthConfig {
            n_nodes: 5,
            feature_dim: 2,
            out_degree: 2,
            teleport: 0.15,
            iterations: 10,
            seed: 3,
        };
        let model = synthetic_model(&cfg);
        let labels = BTreeMap::from([(0usize, 0u8), (1, 0)]);
        assert!(LabeledQuery::new(model, labels).is_err());
    }

    #[test]
    fn perfect_labels_give_zero_objective_and_gradient() {
        // Targets equal to the model's own output (every node labeled, so
        // the target sum is exactly 1) make every residual zero, hence
        // F = 0 and grad F = 0 identically.
        let q = sample_query(7);
        let params = ModelParams::from_vec(vec![0.25; 10]).unwrap();
        let p = crate::learn::solve_ranking(q.model(), &params).unwrap();
        let mut forged = q.clone();
        forged.targets = p.values().iter().copied().enumerate().collect();
        let (value, grad) =
            objective_and_gradient(std::slice::from_ref(&forged), &params).unwrap();
        assert_eq!(value, 0.0);
        assert!(grad.iter().all(|g| *g == 0.0));
    }

    #[test]
    fn gradient_matches_central_differences() {
        let queries = vec![sample_query(11)];
        let mut rng = SplitMix64::new(99);
        for trial in 0..10 {
            let x: Vec<f64> = (0..10).map(|_| rng.next_f64() - 0.5).collect();
            let params = ModelParams::from_vec(x.clone()).unwrap();
            let (_, grad) = objective_and_gradient(&queries, &params).unwrap();
            let norm_x = x.iter().map(|v| v * v).sum::<f64>().sqrt();
            let h = 1e-6 * (1.0 + norm_x);
            let fd = finite_diff_gradient(
                |y| {
                    let p = ModelParams::from_vec(y.to_vec()).unwrap();
                    objective_value(&queries, &p).unwrap()
                },
                &x,
                h,
            )
            .unwrap();
            let num: f64 = grad
                .iter()
                .zip(&fd)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();
            let den: f64 = grad.iter().map(|v| v * v).sum::<f64>().sqrt();
            assert!(
                num <= 1e-5 * den.max(1e-12),
                "trial {trial}: relative gradient error {}",
                num / den
            );
        }
    }

    #[test]
    fn finite_diff_warmups() {
        // Linear objective: the difference quotient is exact up to rounding.
        let c = [1.5, -2.25, 0.75];
        let f = |x: &[f64]| c.iter().zip(x).map(|(a, b)| a * b).sum::<f64>();
        let grad = finite_diff_gradient(f, &[0.3, -0.4, 0.9], 1e-6).unwrap();
        for (g, want) in grad.iter().zip(&c) {
            assert!((g - want).abs() <= 1e-9);
        }
        // Half squared norm: gradient is x within O(h^2).
        let x = [0.2, -1.3, 2.4];
        let grad = finite_diff_gradient(
            |y| 0.5 * y.iter().map(|v| v * v).sum::<f64>(),
            &x,
            1e-6,
        )
        .unwrap();
        for (g, want) in grad.iter().zip(&x) {
            assert!((g - want).abs() <= 1e-9);
        }
        assert!(finite_diff_gradient(f, &[0.0], 0.0).is_err());
    }

    #[test]
    fn softmax_shift_direction_has_zero_gradient() {
        // Append a constant feature to every edge: moving the matching
        // parameter adds the same amount to every score in a row, which
        // softmax ignores, so that gradient coordinate must vanish.
        let base = sample_query(21);
        let model = base.model();
        let edges: Vec<(usize, usize, Vec<f64>)> = model
            .edges()
            .map(|(from, to, f)| {
                let mut f = f.to_vec();
                f.push(1.0);
                (from, to, f)
            })
            .collect();
        let node_features: Vec<Vec<f64>> = model
            .node_features
            .iter()
            .map(|f| {
                let mut f = f.clone();
                f.push(0.0);
                f
            })
            .collect();
        let augmented = RankingModel::new(
            model.n_nodes(),
            edges,
            node_features,
            model.teleport(),
            model.iterations(),
        )
        .unwrap();
        let q = LabeledQuery::new(augmented, base.labels().clone()).unwrap();
        let mut rng = SplitMix64::new(5);
        let params =
            ModelParams::from_vec((0..12).map(|_| rng.next_f64() - 0.5).collect()).unwrap();
        let (_, grad) = objective_and_gradient(std::slice::from_ref(&q), &params).unwrap();
        // Edge half is coordinates 0..6; the constant feature is index 5.
        assert!(
            grad[5].abs() <= 1e-10,
            "shift-direction gradient {} not zero",
            grad[5]
        );
    }
}
