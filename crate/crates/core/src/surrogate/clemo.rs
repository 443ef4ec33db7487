use serde::{Deserialize, Serialize};

use crate::error::{ClemoError, Result};
use crate::problem::Problem;
use crate::sampling::ExplainDataset;

use super::benchmark::Standardizer;
use super::lbfgs::{minimize, LbfgsOptions};
use super::loss::{LambdaWeights, LossContext};
use super::model::SurrogateModel;

pub const DEFAULT_MAX_ITER: usize = 1000;
pub const DEFAULT_TOL: f64 = 1e-8;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub model: SurrogateModel,
    pub iterations: usize,
    pub converged: bool,
    /// Total loss at the initial model and after every accepted iteration.
    pub loss_trace: Vec<f64>,
}

#[derive(Clone, Copy, Debug)]
pub struct ClemoOptions {
    pub max_iter: usize,
    pub tol: f64,
}

impl Default for ClemoOptions {
    fn default() -> Self {
        Self {
            max_iter: DEFAULT_MAX_ITER,
            tol: DEFAULT_TOL,
        }
    }
}

/// Minimizes the λ-weighted accuracy plus incoherence loss, starting from `init`.
pub fn fit_clemo(
    dataset: &ExplainDataset,
    problem: &dyn Problem,
    lambda: LambdaWeights,
    init: &SurrogateModel,
    opts: ClemoOptions,
) -> Result<FitReport> {
    let layout = init.layout_owned();
    let raw = LossContext::new(problem, dataset, &layout)?;
    if raw.num_features() != init.num_features() {
        return Err(ClemoError::Data("initial model does not match the dataset".into()));
    }
    let n_comp = layout.num_components();
    let start = raw.breakdown(&init.beta, lambda).total;
    if !start.is_finite() {
        return Err(ClemoError::NonFiniteLoss);
    }

    let std = Standardizer::fit(&raw);
    let ctx = std.transform(&raw);
    let gamma0 = std.to_standard(&init.beta, n_comp);
    let lb = LbfgsOptions {
        max_iter: opts.max_iter,
        tol: opts.tol,
        ..Default::default()
    };
    let result = minimize(
        |g: &[f64], grad: &mut [f64]| ctx.value_and_gradient(g, lambda, grad).total,
        gamma0,
        &lb,
    );

    let mut beta = std.to_raw(&result.x, n_comp);
    let mut trace = result.trace;
    // the back-transform can move the loss by rounding; never return worse than init
    let end = raw.breakdown(&beta, lambda).total;
    if end <= start {
        *trace.last_mut().expect("trace holds the start value") = end;
    } else {
        beta = init.beta.clone();
        trace.truncate(1);
    }
    trace[0] = start;
    for i in 1..trace.len() {
        trace[i] = trace[i].min(trace[i - 1]);
    }

    Ok(FitReport {
        model: SurrogateModel::new(&layout, &dataset.param_names, beta)?,
        iterations: result.iterations,
        converged: result.converged,
        loss_trace: trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instances::{gen_kp, KpGenConfig, KpType};
    use crate::problem::Problem;
    use crate::sampling::{sample_dataset, SamplerConfig};
    use crate::surrogate::{fit_benchmark_lr, total_loss};

    fn kp_case() -> (crate::solvers::KpInstance, ExplainDataset) {
        let kp = gen_kp(&KpGenConfig::new(KpType::WeaklyCorrelated, 11).with_items(4)).unwrap();
        let ds = sample_dataset(&kp, &kp.nominal(), &SamplerConfig::gaussian(200, 5)).unwrap();
        (kp, ds)
    }

    #[test]
    fn accuracy_only_recovers_least_squares_from_zero() {
        let (kp, ds) = kp_case();
        let lr = fit_benchmark_lr(&ds, &kp).unwrap();
        let zero = SurrogateModel::zeros(&lr.layout_owned(), &ds.param_names);
        let fit = fit_clemo(&ds, &kp, LambdaWeights::ACCURACY, &zero, ClemoOptions::default()).unwrap();
        let want = total_loss(&lr, &ds, &kp, LambdaWeights::ACCURACY).unwrap().total;
        let got = total_loss(&fit.model, &ds, &kp, LambdaWeights::ACCURACY).unwrap().total;
        assert!((got - want).abs() <= 1e-6 * want.max(1.0), "{got} vs {want}");
    }

    #[test]
    fn trace_starts_at_warm_start_and_never_increases() {
        let (kp, ds) = kp_case();
        let lr = fit_benchmark_lr(&ds, &kp).unwrap();
        let fit = fit_clemo(&ds, &kp, LambdaWeights::ONES, &lr, ClemoOptions::default()).unwrap();
        let start = total_loss(&lr, &ds, &kp, LambdaWeights::ONES).unwrap().total;
        assert_eq!(fit.loss_trace[0], start);
        assert!(fit.loss_trace.windows(2).all(|w| w[1] <= w[0]));
        let end = total_loss(&fit.model, &ds, &kp, LambdaWeights::ONES).unwrap().total;
        assert_eq!(*fit.loss_trace.last().unwrap(), end);
        assert!(end < start);
    }

    #[test]
    fn identical_rows_converge_immediately() {
        let kp = gen_kp(&KpGenConfig::new(KpType::Uncorrelated, 3).with_items(3)).unwrap();
        let mut cfg = SamplerConfig::gaussian(20, 0);
        cfg.perturbation = crate::sampling::Perturbation::Gaussian { spread: 0.0 };
        let ds = sample_dataset(&kp, &kp.nominal(), &cfg).unwrap();
        let lr = fit_benchmark_lr(&ds, &kp).unwrap();
        let fit = fit_clemo(&ds, &kp, LambdaWeights::ONES, &lr, ClemoOptions::default()).unwrap();
        assert!(fit.converged);
        assert!(fit.iterations <= 2, "{} iterations", fit.iterations);
    }
}
