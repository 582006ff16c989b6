//! Synthetic ranking instances for demos and tests: random graphs with
//! random feature tensors, and expert grades planted from a hidden true
//! parameter vector.

use std::collections::BTreeMap;

use crate::learn::model::{solve_ranking, ModelParams, RankingModel};
use crate::learn::objective::LabeledQuery;
use crate::rng::{derive_stream, SplitMix64};

#[derive(Debug, Clone, Copy)]
pub struct SynthConfig {
    pub n_nodes: usize,
    pub feature_dim: usize,
    /// Outgoing edges per node.
    pub out_degree: usize,
    pub teleport: f64,
    pub iterations: usize,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            n_nodes: 30,
            feature_dim: 5,
            out_degree: 3,
            teleport: 0.15,
            iterations: 50,
            seed: 0,
        }
    }
}

/// Random model: every node gets `out_degree` distinct targets and all
/// features are uniform in [-1, 1].
pub fn synthetic_model(cfg: &SynthConfig) -> RankingModel {
    assert!(cfg.out_degree >= 1 && cfg.out_degree <= cfg.n_nodes);
    let mut rng = SplitMix64::new(derive_stream(cfg.seed, &[0x5a11]));
    let mut edges = Vec::with_capacity(cfg.n_nodes * cfg.out_degree);
    for from in 0..cfg.n_nodes {
        let mut targets = Vec::with_capacity(cfg.out_degree);
        while targets.len() < cfg.out_degree {
            let to = rng.below_usize(cfg.n_nodes);
            if !targets.contains(&to) {
                targets.push(to);
            }
        }
        for to in targets {
            let features = (0..cfg.feature_dim)
                .map(|_| 2.0 * rng.next_f64() - 1.0)
                .collect();
            edges.push((from, to, features));
        }
    }
    let node_features = (0..cfg.n_nodes)
        .map(|_| {
            (0..cfg.feature_dim)
                .map(|_| 2.0 * rng.next_f64() - 1.0)
                .collect()
        })
        .collect();
    RankingModel::new(
        cfg.n_nodes,
        edges,
        node_features,
        cfg.teleport,
        cfg.iterations,
    )
    .expect("synthetic model construction")
}

/// Grades `n_labeled` random nodes on the 0..=4 scale by quantile of the
/// model's own ranking at `truth`: the top fifth of the labeled set gets 4,
/// the bottom fifth gets 0. The top node always gets a positive grade, so
/// the labels normalize.
pub fn planted_labels(
    model: &RankingModel,
    truth: &ModelParams,
    n_labeled: usize,
    seed: u64,
) -> BTreeMap<usize, u8> {
    assert!(n_labeled >= 1 && n_labeled <= model.n_nodes());
    let p = solve_ranking(model, truth).expect("forward solve");
    let mut rng = SplitMix64::new(derive_stream(seed, &[0x1abe1]));
    let mut labeled: Vec<usize> = Vec::with_capacity(n_labeled);
    while labeled.len() < n_labeled {
        let node = rng.below_usize(model.n_nodes());
        if !labeled.contains(&node) {
            labeled.push(node);
        }
    }
    // Rank the labeled nodes by the true model's scores, best first.
    labeled.sort_by(|&a, &b| p.values()[b].total_cmp(&p.values()[a]).then(a.cmp(&b)));
    labeled
        .iter()
        .enumerate()
        .map(|(pos, &node)| {
            let grade = 4 - (5 * pos / n_labeled) as u8;
            (node, grade.min(4))
        })
        .collect()
}

/// A ready-to-train query: synthetic model plus grades planted from a
/// random hidden parameter vector drawn from the same seed family.
pub fn synthetic_instance(cfg: &SynthConfig, n_labeled: usize) -> (LabeledQuery, ModelParams) {
    let model = synthetic_model(cfg);
    let mut rng = SplitMix64::new(derive_stream(cfg.seed, &[0x7271]));
    let truth = ModelParams::from_vec(
        (0..2 * cfg.feature_dim)
            .map(|_| 2.0 * rng.next_f64() - 1.0)
            .collect(),
    )
    .expect("finite truth vector");
    let labels = planted_labels(&model, &truth, n_labeled, derive_stream(cfg.seed, &[0xf00d]));
    let query = LabeledQuery::new(model, labels).expect("valid synthetic labels");
    (query, truth)
}
