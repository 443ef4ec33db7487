//! Explanation models and their fitting procedures.

mod benchmark;
mod clemo;
pub mod lbfgs;
mod loss;
mod model;

pub use benchmark::{fit_benchmark_lr, fit_benchmark_lr_with, LOGISTIC_RIDGE, WLS_RIDGE};
pub use clemo::{fit_clemo, ClemoOptions, FitReport, DEFAULT_MAX_ITER, DEFAULT_TOL};
pub use loss::{
    auto_balance_lambdas, balance_lambdas, loss_gradient, total_loss, LambdaWeights,
    LossBreakdown, LossContext, PROB_CLAMP,
};
pub use model::{predict, Explainer, Layout, SurrogateModel};
