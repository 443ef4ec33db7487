//! Accuracy and coherence losses of a surrogate on a training set.
//!
//! For every sample the context precomputes the objective and constraint
//! rows reduced to the explained components: unexplained decision variables
//! are replaced by the solver's values, so each row becomes
//! `Σ_k a_k g_k(θ) + const`.

use serde::{Deserialize, Serialize};

use crate::error::{ClemoError, Result};
use crate::problem::{violation_term, Problem, FEAS_TOL};
use crate::sampling::ExplainDataset;

use super::model::{sigmoid, Explainer, Layout, SurrogateModel};

/// Bounds applied to probabilities inside the log-loss.
pub const PROB_CLAMP: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LambdaWeights {
    pub a1: f64,
    pub a2: f64,
    pub c1: f64,
    pub c2: f64,
}

impl LambdaWeights {
    pub const ONES: LambdaWeights = LambdaWeights {
        a1: 1.0,
        a2: 1.0,
        c1: 1.0,
        c2: 1.0,
    };

    /// Accuracy terms only, as in the independent benchmark fit.
    pub const ACCURACY: LambdaWeights = LambdaWeights {
        a1: 1.0,
        a2: 1.0,
        c1: 0.0,
        c2: 0.0,
    };

    pub fn as_array(&self) -> [f64; 4] {
        [self.a1, self.a2, self.c1, self.c2]
    }

    pub fn from_array(a: [f64; 4]) -> Result<Self> {
        if a.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
            return Err(ClemoError::Config("loss weights must be finite and ≥ 0".into()));
        }
        Ok(Self {
            a1: a[0],
            a2: a[1],
            c1: a[2],
            c2: a[3],
        })
    }
}

/// The four loss terms and their λ-weighted sum.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown {
    /// Weighted squared error of the continuous components (objective included).
    pub a1: f64,
    /// Weighted log-loss of the binary components.
    pub a2: f64,
    /// Objective incoherence.
    pub c1: f64,
    /// Feasibility incoherence.
    pub c2: f64,
    /// Squared-error share of `a1` that belongs to the objective component.
    pub a1_objective: f64,
    pub lambda: LambdaWeights,
    pub total: f64,
}

impl LossBreakdown {
    fn from_terms(t: &Terms, lambda: LambdaWeights) -> Self {
        let a1 = t.a1_objective + t.a1_decisions;
        Self {
            a1,
            a2: t.a2,
            c1: t.c1,
            c2: t.c2,
            a1_objective: t.a1_objective,
            lambda,
            total: lambda.a1 * a1 + lambda.a2 * t.a2 + lambda.c1 * t.c1 + lambda.c2 * t.c2,
        }
    }

    pub fn terms(&self) -> [f64; 4] {
        [self.a1, self.a2, self.c1, self.c2]
    }

    /// Accuracy loss of the decision components (`a1` without the objective, plus `a2`).
    pub fn accuracy_decisions(&self) -> f64 {
        (self.a1 - self.a1_objective) + self.a2
    }

    pub fn accuracy(&self) -> f64 {
        self.a1 + self.a2
    }
}

#[derive(Clone, Copy, Debug, Default)]
struct Terms {
    a1_objective: f64,
    a1_decisions: f64,
    a2: f64,
    c1: f64,
    c2: f64,
}

impl Terms {
    fn add_scaled(&mut self, o: &Terms, w: f64) {
        self.a1_objective += w * o.a1_objective;
        self.a1_decisions += w * o.a1_decisions;
        self.a2 += w * o.a2;
        self.c1 += w * o.c1;
        self.c2 += w * o.c2;
    }
}

#[derive(Clone, Debug)]
struct Row {
    start: usize,
    end: usize,
    constant: f64,
}

/// Precomputed per-sample data for loss and gradient evaluation.
#[derive(Clone, Debug)]
pub struct LossContext {
    layout: Layout,
    n_samples: usize,
    n_features: usize,
    features: Vec<f64>,
    weights: Vec<f64>,
    targets: Vec<f64>,
    obj_coef: Vec<f64>,
    obj_const: Vec<f64>,
    sample_rows: Vec<(usize, usize)>,
    rows: Vec<Row>,
    term_comp: Vec<u32>,
    term_coef: Vec<f64>,
    const_violation: Vec<f64>,
}

fn log_loss(p: f64, h: f64) -> (f64, bool) {
    let pc = p.clamp(PROB_CLAMP, 1.0 - PROB_CLAMP);
    let clamped = pc != p;
    (-(h * pc.ln() + (1.0 - h) * (1.0 - pc).ln()), clamped)
}

impl LossContext {
    pub fn new(problem: &dyn Problem, dataset: &ExplainDataset, layout: &Layout) -> Result<Self> {
        if dataset.is_empty() {
            return Err(ClemoError::Data("empty dataset".into()));
        }
        if dataset.num_vars() != problem.num_vars() || dataset.num_params() != problem.num_params()
        {
            return Err(ClemoError::Data(
                "dataset layout does not match the problem".into(),
            ));
        }
        let p = problem.num_vars();
        let n_comp = layout.num_components();
        let n_expl = n_comp - 1;
        let mut position = vec![usize::MAX; p];
        for (k, &j) in layout.explained_vars.iter().enumerate() {
            if j >= p {
                return Err(ClemoError::Data(format!("explained variable {j} out of range")));
            }
            position[j] = k;
        }

        let n = dataset.len();
        let q = dataset.num_params();
        let mut ctx = LossContext {
            layout: layout.clone(),
            n_samples: n,
            n_features: q + 1,
            features: Vec::with_capacity(n * (q + 1)),
            weights: Vec::with_capacity(n),
            targets: Vec::with_capacity(n * n_comp),
            obj_coef: Vec::with_capacity(n * n_expl),
            obj_const: Vec::with_capacity(n),
            sample_rows: Vec::with_capacity(n),
            rows: Vec::new(),
            term_comp: Vec::new(),
            term_coef: Vec::new(),
            const_violation: Vec::with_capacity(n),
        };

        for row in &dataset.rows {
            let x = &row.record.decision.values;
            ctx.features.push(1.0);
            ctx.features.extend_from_slice(&row.theta);
            ctx.weights.push(row.weight);
            ctx.targets.push(row.record.objective_value);
            ctx.targets.extend(layout.explained_vars.iter().map(|&j| x[j]));

            let obj = problem.objective(&row.theta)?;
            let mut constant = obj.constant;
            for j in 0..p {
                if position[j] == usize::MAX {
                    constant += obj.coeffs[j] * x[j];
                }
            }
            ctx.obj_coef
                .extend(layout.explained_vars.iter().map(|&j| obj.coeffs[j]));
            ctx.obj_const.push(constant);

            let first_row = ctx.rows.len();
            let mut fixed = 0.0;
            for c in problem.constraints(&row.theta, &row.record.aux)? {
                let start = ctx.term_comp.len();
                let mut constant = -c.rhs;
                for (j, a) in c.terms {
                    match position[j] {
                        usize::MAX => constant += a * x[j],
                        k => {
                            ctx.term_comp.push(k as u32 + 1);
                            ctx.term_coef.push(a);
                        }
                    }
                }
                let end = ctx.term_comp.len();
                if start == end {
                    fixed += violation_term(constant);
                } else {
                    ctx.rows.push(Row {
                        start,
                        end,
                        constant,
                    });
                }
            }
            ctx.sample_rows.push((first_row, ctx.rows.len()));
            ctx.const_violation.push(fixed);
        }
        Ok(ctx)
    }

    pub fn layout(&self) -> &Layout {
        &self.layout
    }

    pub fn num_samples(&self) -> usize {
        self.n_samples
    }

    pub fn num_features(&self) -> usize {
        self.n_features
    }

    pub fn num_components(&self) -> usize {
        self.layout.num_components()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Augmented feature row `(1, θⁱ)`.
    pub fn feature_row(&self, i: usize) -> &[f64] {
        &self.features[i * self.n_features..(i + 1) * self.n_features]
    }

    pub fn target_row(&self, i: usize) -> &[f64] {
        let c = self.num_components();
        &self.targets[i * c..(i + 1) * c]
    }

    /// Copy of this context with the feature rows replaced (same sample order).
    pub(crate) fn with_features(&self, features: Vec<f64>) -> Self {
        assert_eq!(features.len(), self.features.len());
        Self {
            features,
            ..self.clone()
        }
    }

    /// Unweighted (by wⁱ) loss terms of sample `i` for the given predictions.
    /// When `dz` is given, it receives `∂(λ·terms)/∂z` where `z` is the
    /// linear predictor of each component (pre-sigmoid for binary ones).
    fn sample_terms(
        &self,
        i: usize,
        pred: &[f64],
        lambda: &LambdaWeights,
        mut dz: Option<&mut [f64]>,
    ) -> Terms {
        let n_comp = self.num_components();
        let n_expl = n_comp - 1;
        let h = self.target_row(i);
        let binary = &self.layout.binary_mask;
        let mut t = Terms::default();

        if let Some(d) = dz.as_deref_mut() {
            d.iter_mut().for_each(|v| *v = 0.0);
        }

        for c in 0..n_comp {
            if binary[c] {
                let (l, clamped) = log_loss(pred[c], h[c]);
                t.a2 += l;
                if let Some(d) = dz.as_deref_mut() {
                    if !clamped {
                        d[c] += lambda.a2 * (pred[c] - h[c]);
                    }
                }
            } else {
                let r = pred[c] - h[c];
                if c == 0 {
                    t.a1_objective += r * r;
                } else {
                    t.a1_decisions += r * r;
                }
                if let Some(d) = dz.as_deref_mut() {
                    d[c] += 2.0 * lambda.a1 * r;
                }
            }
        }

        // derivatives of the coherence terms with respect to the predictions
        let coef = &self.obj_coef[i * n_expl..(i + 1) * n_expl];
        let predicted_obj =
            self.obj_const[i] + coef.iter().zip(&pred[1..]).map(|(a, g)| a * g).sum::<f64>();
        let r = pred[0] - predicted_obj;
        t.c1 = r * r;

        let mut dpred = dz.as_ref().map(|_| vec![0.0; n_comp]);
        if let Some(dp) = dpred.as_mut() {
            dp[0] += 2.0 * lambda.c1 * r;
            for k in 0..n_expl {
                dp[k + 1] -= 2.0 * lambda.c1 * r * coef[k];
            }
        }

        let (lo, hi) = self.sample_rows[i];
        let mut c2 = self.const_violation[i];
        for row in &self.rows[lo..hi] {
            let mut gamma = row.constant;
            for t in row.start..row.end {
                gamma += self.term_coef[t] * pred[self.term_comp[t] as usize];
            }
            if gamma > FEAS_TOL {
                c2 += gamma;
                if let Some(dp) = dpred.as_mut() {
                    for t in row.start..row.end {
                        dp[self.term_comp[t] as usize] += lambda.c2 * self.term_coef[t];
                    }
                }
            }
        }
        t.c2 = c2;

        if let (Some(d), Some(dp)) = (dz, dpred) {
            for c in 0..n_comp {
                let chain = if binary[c] {
                    pred[c] * (1.0 - pred[c])
                } else {
                    1.0
                };
                d[c] += dp[c] * chain;
            }
        }
        t
    }

    fn predictions(&self, beta: &[f64], i: usize, out: &mut [f64]) {
        let k = self.n_features;
        let x = self.feature_row(i);
        for (c, o) in out.iter_mut().enumerate() {
            let row = &beta[c * k..(c + 1) * k];
            let z: f64 = row.iter().zip(x).map(|(b, f)| b * f).sum();
            *o = if self.layout.binary_mask[c] {
                sigmoid(z)
            } else {
                z
            };
        }
    }

    fn check_beta(&self, beta: &[f64]) {
        assert_eq!(
            beta.len(),
            self.num_components() * self.n_features,
            "coefficient matrix does not match the loss context"
        );
    }

    /// Loss breakdown of a raw coefficient matrix.
    pub fn breakdown(&self, beta: &[f64], lambda: LambdaWeights) -> LossBreakdown {
        self.check_beta(beta);
        let mut pred = vec![0.0; self.num_components()];
        let mut total = Terms::default();
        for i in 0..self.n_samples {
            self.predictions(beta, i, &mut pred);
            let t = self.sample_terms(i, &pred, &lambda, None);
            total.add_scaled(&t, self.weights[i]);
        }
        LossBreakdown::from_terms(&total, lambda)
    }

    /// λ-weighted total and its gradient with respect to `beta`.
    pub fn value_and_gradient(
        &self,
        beta: &[f64],
        lambda: LambdaWeights,
        grad: &mut [f64],
    ) -> LossBreakdown {
        self.check_beta(beta);
        assert_eq!(grad.len(), beta.len());
        grad.iter_mut().for_each(|g| *g = 0.0);
        let n_comp = self.num_components();
        let k = self.n_features;
        let mut pred = vec![0.0; n_comp];
        let mut dz = vec![0.0; n_comp];
        let mut total = Terms::default();
        for i in 0..self.n_samples {
            self.predictions(beta, i, &mut pred);
            let t = self.sample_terms(i, &pred, &lambda, Some(&mut dz));
            let w = self.weights[i];
            total.add_scaled(&t, w);
            let x = self.feature_row(i);
            for c in 0..n_comp {
                let s = w * dz[c];
                if s != 0.0 {
                    for (g, f) in grad[c * k..(c + 1) * k].iter_mut().zip(x) {
                        *g += s * f;
                    }
                }
            }
        }
        LossBreakdown::from_terms(&total, lambda)
    }

    /// Loss breakdown of an arbitrary predictor evaluated at every sample.
    pub fn breakdown_of(&self, model: &dyn Explainer, lambda: LambdaWeights) -> Result<LossBreakdown> {
        if model.layout() != &self.layout {
            return Err(ClemoError::Data(
                "model layout does not match the dataset layout".into(),
            ));
        }
        let mut total = Terms::default();
        for i in 0..self.n_samples {
            let theta = &self.feature_row(i)[1..];
            let pred = model.predict(theta);
            let t = self.sample_terms(i, &pred, &lambda, None);
            total.add_scaled(&t, self.weights[i]);
        }
        Ok(LossBreakdown::from_terms(&total, lambda))
    }
}

pub fn total_loss(
    model: &SurrogateModel,
    dataset: &ExplainDataset,
    problem: &dyn Problem,
    lambda: LambdaWeights,
) -> Result<LossBreakdown> {
    let ctx = LossContext::new(problem, dataset, &model.layout_owned())?;
    if ctx.num_features() != model.num_features() {
        return Err(ClemoError::Data("model features do not match the dataset".into()));
    }
    Ok(ctx.breakdown(&model.beta, lambda))
}

/// Gradient of the λ-weighted total loss with respect to every coefficient,
/// laid out like `model.beta`.
pub fn loss_gradient(
    model: &SurrogateModel,
    dataset: &ExplainDataset,
    problem: &dyn Problem,
    lambda: LambdaWeights,
) -> Result<Vec<f64>> {
    let ctx = LossContext::new(problem, dataset, &model.layout_owned())?;
    if ctx.num_features() != model.num_features() {
        return Err(ClemoError::Data("model features do not match the dataset".into()));
    }
    let mut grad = vec![0.0; model.beta.len()];
    ctx.value_and_gradient(&model.beta, lambda, &mut grad);
    Ok(grad)
}

/// λ_j = 1 for the largest and for vanishing terms, `0.5·L_max/L_j` otherwise.
pub fn balance_lambdas(terms: [f64; 4]) -> LambdaWeights {
    let max = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let pick = |l: f64| {
        if l == max || l == 0.0 {
            1.0
        } else {
            0.5 * max / l
        }
    };
    LambdaWeights {
        a1: pick(terms[0]),
        a2: pick(terms[1]),
        c1: pick(terms[2]),
        c2: pick(terms[3]),
    }
}

/// Balances the loss terms as evaluated at the benchmark fit.
pub fn auto_balance_lambdas(
    dataset: &ExplainDataset,
    problem: &dyn Problem,
    benchmark: &SurrogateModel,
) -> Result<LambdaWeights> {
    let b = total_loss(benchmark, dataset, problem, LambdaWeights::ONES)?;
    Ok(balance_lambdas(b.terms()))
}
