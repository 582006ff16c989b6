//! Supervised PageRank: a feature-parameterized teleported chain, a
//! least-squares objective against expert grades, exact gradients by
//! reverse accumulation through the truncated iteration, and first-order
//! optimizers (adaptive gradient descent with an optional inexact oracle,
//! and randomized coordinate descent).

mod format;
mod model;
mod objective;
mod optimize;
mod scenario;
mod synth;

pub use format::{read_instance, write_instance};
pub use model::{
    build_transition, default_iteration_budget, solve_ranking, ModelParams, RankingModel,
    TransitionSystem,
};
pub use objective::{
    finite_diff_gradient, objective_and_gradient, objective_value, LabeledQuery,
    LearningObjective,
};
pub use optimize::{
    adaptive_gd, coordinate_descent, default_inexactness, write_trace_csv, CoordinateObjective,
    Objective, OptimizerReport, QuadraticObjective, TraceRow,
};
pub use scenario::{scenario_select, Scenario, ScenarioOutcome, TrainOptions};
pub use synth::{planted_labels, synthetic_instance, synthetic_model, SynthConfig};
