//! Evaluation tables, the decision-tree benchmark and stability measures.

mod evaluate;
mod stability;
mod tree;

pub use evaluate::{evaluate, EvaluationReport, MethodRow};
pub use stability::{
    feature_contributions, k_concordance, stability, Contribution, ContributionRule,
    StabilityReport, TOP_K,
};
pub use tree::{fit_benchmark_dtr, fit_benchmark_dtr_with, DtrModel, RegressionTree, TreeConfig};
