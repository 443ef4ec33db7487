//! Independent per-component fits: weighted least squares for continuous
//! components and weighted logistic regression for binary ones.

use nalgebra::{DMatrix, DVector};

use crate::error::{ClemoError, Result};
use crate::problem::Problem;
use crate::sampling::ExplainDataset;

use super::loss::LossContext;
use super::model::{sigmoid, Layout, SurrogateModel};

pub const WLS_RIDGE: f64 = 1e-8;
pub const LOGISTIC_RIDGE: f64 = 1e-6;
pub const LOGISTIC_GRAD_TOL: f64 = 1e-8;
pub const LOGISTIC_MAX_ITER: usize = 500;

/// Column centering and scaling. Constant columns are mapped to zero.
#[derive(Clone, Debug)]
pub(crate) struct Standardizer {
    mean: Vec<f64>,
    scale: Vec<f64>,
    active: Vec<bool>,
}

impl Standardizer {
    pub(crate) fn fit(ctx: &LossContext) -> Self {
        let q = ctx.num_features() - 1;
        let n = ctx.num_samples() as f64;
        let mut mean = vec![0.0; q];
        for i in 0..ctx.num_samples() {
            for (m, t) in mean.iter_mut().zip(&ctx.feature_row(i)[1..]) {
                *m += t / n;
            }
        }
        let mut var = vec![0.0; q];
        for i in 0..ctx.num_samples() {
            for j in 0..q {
                let d = ctx.feature_row(i)[j + 1] - mean[j];
                var[j] += d * d / n;
            }
        }
        let mut scale = Vec::with_capacity(q);
        let mut active = Vec::with_capacity(q);
        for j in 0..q {
            let s = var[j].sqrt();
            let on = s > 1e-12 * mean[j].abs().max(1.0);
            active.push(on);
            scale.push(if on { s } else { 1.0 });
        }
        Self {
            mean,
            scale,
            active,
        }
    }

    pub(crate) fn transform(&self, ctx: &LossContext) -> LossContext {
        let k = ctx.num_features();
        let mut features = Vec::with_capacity(ctx.num_samples() * k);
        for i in 0..ctx.num_samples() {
            features.push(1.0);
            for (j, t) in ctx.feature_row(i)[1..].iter().enumerate() {
                features.push(if self.active[j] {
                    (t - self.mean[j]) / self.scale[j]
                } else {
                    0.0
                });
            }
        }
        ctx.with_features(features)
    }

    /// Maps standardized coefficients back to raw θ coordinates.
    pub(crate) fn to_raw(&self, gamma: &[f64], n_comp: usize) -> Vec<f64> {
        let k = self.mean.len() + 1;
        let mut beta = vec![0.0; gamma.len()];
        for c in 0..n_comp {
            let g = &gamma[c * k..(c + 1) * k];
            let b = &mut beta[c * k..(c + 1) * k];
            b[0] = g[0];
            for j in 0..k - 1 {
                if self.active[j] {
                    b[j + 1] = g[j + 1] / self.scale[j];
                    b[0] -= g[j + 1] * self.mean[j] / self.scale[j];
                }
            }
        }
        beta
    }

    /// Inverse of [`to_raw`](Self::to_raw) on the active columns.
    pub(crate) fn to_standard(&self, beta: &[f64], n_comp: usize) -> Vec<f64> {
        let k = self.mean.len() + 1;
        let mut gamma = vec![0.0; beta.len()];
        for c in 0..n_comp {
            let b = &beta[c * k..(c + 1) * k];
            let g = &mut gamma[c * k..(c + 1) * k];
            g[0] = b[0];
            for j in 0..k - 1 {
                // inactive columns are constant and fold into the intercept
                g[0] += b[j + 1] * self.mean[j];
                if self.active[j] {
                    g[j + 1] = b[j + 1] * self.scale[j];
                }
            }
        }
        gamma
    }
}

fn weighted_gram(ctx: &LossContext) -> DMatrix<f64> {
    let k = ctx.num_features();
    let mut gram = DMatrix::zeros(k, k);
    for i in 0..ctx.num_samples() {
        let w = ctx.weights()[i];
        let x = ctx.feature_row(i);
        for a in 0..k {
            let wa = w * x[a];
            if wa == 0.0 {
                continue;
            }
            for b in a..k {
                gram[(a, b)] += wa * x[b];
            }
        }
    }
    for a in 0..k {
        for b in 0..a {
            gram[(a, b)] = gram[(b, a)];
        }
    }
    gram
}

fn solve_spd(mut gram: DMatrix<f64>, rhs: &DMatrix<f64>, ridge: f64) -> DMatrix<f64> {
    let max_diag = gram.diagonal().max().max(1e-300);
    if let Some(ch) = gram.clone().cholesky() {
        let l = ch.l_dirty();
        let min_pivot = (0..l.nrows()).map(|i| l[(i, i)] * l[(i, i)]).fold(f64::INFINITY, f64::min);
        if min_pivot > 1e-12 * max_diag {
            return ch.solve(rhs);
        }
    }
    log::debug!("normal equations are singular; adding ridge {ridge}");
    for a in 0..gram.nrows() {
        gram[(a, a)] += ridge;
    }
    match gram.clone().cholesky() {
        Some(ch) => ch.solve(rhs),
        None => gram
            .svd(true, true)
            .solve(rhs, 1e-14 * max_diag)
            .expect("svd with both factors"),
    }
}

/// Closed-form weighted least squares for the continuous components; binary
/// rows of the returned matrix are left at zero.
fn fit_wls(ctx: &LossContext) -> Vec<f64> {
    let k = ctx.num_features();
    let layout = ctx.layout();
    let comps: Vec<usize> = (0..layout.num_components())
        .filter(|&c| !layout.binary_mask[c])
        .collect();
    let mut beta = vec![0.0; layout.num_components() * k];
    if comps.is_empty() {
        return beta;
    }
    let gram = weighted_gram(ctx);
    let mut rhs = DMatrix::zeros(k, comps.len());
    for i in 0..ctx.num_samples() {
        let w = ctx.weights()[i];
        let x = ctx.feature_row(i);
        let h = ctx.target_row(i);
        for (col, &c) in comps.iter().enumerate() {
            let wh = w * h[c];
            for a in 0..k {
                rhs[(a, col)] += wh * x[a];
            }
        }
    }
    let sol = solve_spd(gram, &rhs, WLS_RIDGE);
    for (col, &c) in comps.iter().enumerate() {
        for a in 0..k {
            beta[c * k + a] = sol[(a, col)];
        }
    }
    beta
}

fn logistic_objective(ctx: &LossContext, c: usize, g: &[f64]) -> f64 {
    let mut total = 0.5 * LOGISTIC_RIDGE * g.iter().map(|v| v * v).sum::<f64>();
    for i in 0..ctx.num_samples() {
        let z: f64 = g.iter().zip(ctx.feature_row(i)).map(|(b, x)| b * x).sum();
        let h = ctx.target_row(i)[c];
        // log(1 + e^z) − h·z, stable for both signs
        let softplus = if z > 0.0 {
            z + (-z).exp().ln_1p()
        } else {
            z.exp().ln_1p()
        };
        total += ctx.weights()[i] * (softplus - h * z);
    }
    total
}

/// Damped Newton on the ridge-penalized weighted log-loss of component `c`.
fn fit_logistic(ctx: &LossContext, c: usize) -> Vec<f64> {
    let k = ctx.num_features();
    let mut g = vec![0.0; k];
    let mut value = logistic_objective(ctx, c, &g);
    for _ in 0..LOGISTIC_MAX_ITER {
        let mut grad = DVector::from_iterator(k, g.iter().map(|v| LOGISTIC_RIDGE * v));
        let mut hess = DMatrix::from_diagonal_element(k, k, LOGISTIC_RIDGE);
        for i in 0..ctx.num_samples() {
            let x = ctx.feature_row(i);
            let z: f64 = g.iter().zip(x).map(|(b, f)| b * f).sum();
            let p = sigmoid(z);
            let w = ctx.weights()[i];
            let r = w * (p - ctx.target_row(i)[c]);
            let s = w * p * (1.0 - p);
            for a in 0..k {
                grad[a] += r * x[a];
                let sa = s * x[a];
                if sa != 0.0 {
                    for b in a..k {
                        hess[(a, b)] += sa * x[b];
                    }
                }
            }
        }
        if grad.norm() <= LOGISTIC_GRAD_TOL {
            break;
        }
        for a in 0..k {
            for b in 0..a {
                hess[(a, b)] = hess[(b, a)];
            }
        }
        let step = match hess.clone().cholesky() {
            Some(ch) => ch.solve(&grad),
            None => grad.clone(),
        };
        let mut t = 1.0;
        let slope = grad.dot(&step);
        let mut improved = false;
        while t > 1e-12 {
            let trial: Vec<f64> = g.iter().zip(step.iter()).map(|(b, s)| b - t * s).collect();
            let v = logistic_objective(ctx, c, &trial);
            if v <= value - 1e-4 * t * slope {
                g = trial;
                value = v;
                improved = true;
                break;
            }
            t *= 0.5;
        }
        if !improved {
            break;
        }
    }
    g
}

/// Benchmark coefficients in the context's own feature space.
pub(crate) fn fit_benchmark_in(ctx: &LossContext) -> Vec<f64> {
    let k = ctx.num_features();
    let mut beta = fit_wls(ctx);
    for c in 0..ctx.num_components() {
        if ctx.layout().binary_mask[c] {
            let g = fit_logistic(ctx, c);
            beta[c * k..(c + 1) * k].copy_from_slice(&g);
        }
    }
    beta
}

/// Linear regression for continuous components and logistic regression for
/// binary ones, each fitted independently on the weighted accuracy loss.
pub fn fit_benchmark_lr(dataset: &ExplainDataset, problem: &dyn Problem) -> Result<SurrogateModel> {
    fit_benchmark_lr_with(dataset, problem, &Layout::from_problem(problem))
}

pub fn fit_benchmark_lr_with(
    dataset: &ExplainDataset,
    problem: &dyn Problem,
    layout: &Layout,
) -> Result<SurrogateModel> {
    if !(dataset.total_weight() > 0.0) {
        return Err(ClemoError::Data("dataset has zero total weight".into()));
    }
    let raw = LossContext::new(problem, dataset, layout)?;
    let std = Standardizer::fit(&raw);
    let gamma = fit_benchmark_in(&std.transform(&raw));
    let beta = std.to_raw(&gamma, layout.num_components());
    SurrogateModel::new(layout, &dataset.param_names, beta)
}
