//! Scenario selection: train candidate model configurations on a learning
//! split, score them on a held-out test split, keep the winner.

use crate::error::{Error, Result};
use crate::learn::model::ModelParams;
use crate::learn::objective::{objective_value, LabeledQuery, LearningObjective};
use crate::learn::optimize::{adaptive_gd, OptimizerReport};

/// One candidate configuration: its own featurization of the training and
/// test queries. Splits must be disjoint and non-empty.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub name: String,
    pub train: Vec<LabeledQuery>,
    pub test: Vec<LabeledQuery>,
}

#[derive(Debug, Clone, Copy)]
pub struct TrainOptions {
    pub epsilon: f64,
    /// Oracle inexactness `delta_tilde`; zero for the exact gradient of the
    /// truncated objective.
    pub inexactness: f64,
    pub max_iterations: usize,
}

impl Default for TrainOptions {
    fn default() -> Self {
        TrainOptions {
            epsilon: 1e-4,
            inexactness: 0.0,
            max_iterations: 50_000,
        }
    }
}

/// Outcome of training one scenario.
#[derive(Debug, Clone)]
pub struct ScenarioOutcome {
    pub name: String,
    pub params: ModelParams,
    pub train_objective: f64,
    pub test_objective: f64,
    pub report: OptimizerReport,
}

/// Trains every scenario on its learning split from the zero start and
/// returns the index minimizing the test objective, ties broken by lowest
/// index. The per-scenario outcomes come along for inspection.
pub fn scenario_select(
    scenarios: &[Scenario],
    options: &TrainOptions,
) -> Result<(usize, Vec<ScenarioOutcome>)> {
    if scenarios.is_empty() {
        return Err(Error::invalid("need at least one scenario"));
    }
    let mut outcomes = Vec::with_capacity(scenarios.len());
    for scenario in scenarios {
        if scenario.train.is_empty() || scenario.test.is_empty() {
            return Err(Error::invalid(format!(
                "scenario `{}` has an empty split",
                scenario.name
            )));
        }
        let feature_dim = scenario.train[0].model().feature_dim();
        let mut objective = LearningObjective::new(&scenario.train)?;
        let x0 = vec![0.0; 2 * feature_dim];
        let (x, report) = adaptive_gd(
            &mut objective,
            &x0,
            options.epsilon,
            options.inexactness,
            options.max_iterations,
        )?;
        let params = ModelParams::from_vec(x)?;
        let train_objective = objective_value(&scenario.train, &params)?;
        let test_objective = objective_value(&scenario.test, &params)?;
        outcomes.push(ScenarioOutcome {
            name: scenario.name.clone(),
            params,
            train_objective,
            test_objective,
            report,
        });
    }
    let best = outcomes
        .iter()
        .enumerate()
        .min_by(|(i, a), (j, b)| {
            a.test_objective
                .total_cmp(&b.test_objective)
                .then(i.cmp(j))
        })
        .map(|(i, _)| i)
        .unwrap();
    Ok((best, outcomes))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::learn::model::RankingModel;
    use crate::learn::objective::LabeledQuery;
    use crate::learn::synth::{synthetic_instance, SynthConfig};
    use crate::rng::{derive_stream, SplitMix64};

    fn scenario_pair(seed: u64) -> (Scenario, Scenario) {
        // True-feature scenario: the labels were planted from these very
        // features. Noise scenario: same graphs and labels, features
        // replaced by fresh noise, so the signal is gone.
        let make_queries = |tag: u64, noise: bool| -> Vec<LabeledQuery> {
            (0..3)
                .map(|k| {
                    let cfg = SynthConfig {
                        n_nodes: 12,
                        feature_dim: 3,
                        out_degree: 2,
                        iterations: 30,
                        seed: derive_stream(seed, &[tag, k]),
                        ..SynthConfig::default()
                    };
                    let (query, _) = synthetic_instance(&cfg, 8);
                    if !noise {
                        return query;
                    }
                    let model = query.model();
                    let mut rng =
                        SplitMix64::new(derive_stream(seed, &[tag, k, 0x4015e]));
                    let edges = model
                        .edges()
                        .map(|(from, to, f)| {
                            let noise_f =
                                (0..f.len()).map(|_| 2.0 * rng.next_f64() - 1.0).collect();
                            (from, to, noise_f)
                        })
                        .collect();
                    let node_features = (0..model.n_nodes())
                        .map(|_| (0..3).map(|_| 2.0 * rng.next_f64() - 1.0).collect())
                        .collect();
                    let noisy_model = RankingModel::new(
                        model.n_nodes(),
                        edges,
                        node_features,
                        model.teleport(),
                        model.iterations(),
                    )
                    .unwrap();
                    LabeledQuery::new(noisy_model, query.labels().clone()).unwrap()
                })
                .collect()
        };
        let informative = Scenario {
            name: "planted-features".into(),
            train: make_queries(1, false),
            test: make_queries(2, false),
        };
        let noise = Scenario {
            name: "noise-features".into(),
            train: make_queries(1, true),
            test: make_queries(2, true),
        };
        (informative, noise)
    }

    #[test]
    fn single_scenario_is_returned_trivially() {
        let (s, _) = scenario_pair(5);
        let opts = TrainOptions {
            epsilon: 1e-3,
            max_iterations: 20_000,
            ..TrainOptions::default()
        };
        let (best, outcomes) = scenario_select(std::slice::from_ref(&s), &opts).unwrap();
        assert_eq!(best, 0);
        assert_eq!(outcomes.len(), 1);
    }

    #[test]
    fn identical_scenarios_tie_break_to_lowest_index() {
        let (s, _) = scenario_pair(6);
        let opts = TrainOptions {
            epsilon: 1e-3,
            max_iterations: 20_000,
            ..TrainOptions::default()
        };
        let (best, _) = scenario_select(&[s.clone(), s], &opts).unwrap();
        assert_eq!(best, 0);
    }

    #[test]
    fn empty_split_is_rejected() {
        let (mut s, _) = scenario_pair(7);
        s.test.clear();
        assert!(scenario_select(std::slice::from_ref(&s), &TrainOptions::default()).is_err());
    }

    #[test]
    fn planted_features_beat_noise_features() {
        // The informative scenario should win in at least 18 of 20 seeded
        // trials.
        let opts = TrainOptions {
            epsilon: 1e-3,
            max_iterations: 30_000,
            ..TrainOptions::default()
        };
        let mut wins = 0;
        for trial in 0..20 {
            let (informative, noise) = scenario_pair(1000 + trial);
            let (best, _) = scenario_select(&[informative, noise], &opts).unwrap();
            if best == 0 {
                wins += 1;
            }
        }
        assert!(wins >= 18, "planted features won only {wins}/20 trials");
    }
}
