use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, ClemoError, Result};
use crate::problem::Problem;

/// Which outputs get a surrogate: the objective (always first) followed by
/// the explained decision variables in index order.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Layout {
    pub component_labels: Vec<String>,
    /// Decision-variable index of every component after the objective.
    pub explained_vars: Vec<usize>,
    /// One flag per component; the objective is never binary.
    pub binary_mask: Vec<bool>,
}

impl Layout {
    pub fn from_problem(problem: &dyn Problem) -> Self {
        Self::with_vars(problem, problem.explained_vars())
    }

    pub fn with_vars(problem: &dyn Problem, mut explained_vars: Vec<usize>) -> Self {
        explained_vars.sort_unstable();
        explained_vars.dedup();
        let names = problem.var_names();
        let mask = problem.binary_mask();
        let mut component_labels = vec!["f".to_string()];
        component_labels.extend(explained_vars.iter().map(|&j| names[j].clone()));
        let mut binary_mask = vec![false];
        binary_mask.extend(explained_vars.iter().map(|&j| mask[j]));
        Self {
            component_labels,
            explained_vars,
            binary_mask,
        }
    }

    pub fn num_components(&self) -> usize {
        self.component_labels.len()
    }
}

pub(crate) fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Anything that maps θ to one prediction per layout component.
pub trait Explainer {
    fn layout(&self) -> &Layout;

    /// Predictions per component; binary components are probabilities.
    fn predict(&self, theta: &[f64]) -> Vec<f64>;
}

/// Linear/logistic surrogates: one coefficient row per component, intercept
/// in column 0.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SurrogateModel {
    pub component_labels: Vec<String>,
    pub feature_names: Vec<String>,
    /// Row-major, `components × (1 + parameters)`.
    pub beta: Vec<f64>,
    pub binary_mask: Vec<bool>,
    pub explained_vars: Vec<usize>,
    #[serde(skip)]
    layout: Option<Layout>,
}

impl SurrogateModel {
    pub fn new(layout: &Layout, param_names: &[String], beta: Vec<f64>) -> Result<Self> {
        let cols = param_names.len() + 1;
        check_dim("coefficient matrix", layout.num_components() * cols, beta.len())?;
        if beta.iter().any(|b| !b.is_finite()) {
            return Err(ClemoError::Data("non-finite surrogate coefficients".into()));
        }
        let mut feature_names = vec!["intercept".to_string()];
        feature_names.extend(param_names.iter().cloned());
        Ok(Self {
            component_labels: layout.component_labels.clone(),
            feature_names,
            beta,
            binary_mask: layout.binary_mask.clone(),
            explained_vars: layout.explained_vars.clone(),
            layout: Some(layout.clone()),
        })
    }

    pub fn zeros(layout: &Layout, param_names: &[String]) -> Self {
        let beta = vec![0.0; layout.num_components() * (param_names.len() + 1)];
        Self::new(layout, param_names, beta).expect("zero matrix has the right shape")
    }

    pub fn num_components(&self) -> usize {
        self.component_labels.len()
    }

    /// Columns including the intercept.
    pub fn num_features(&self) -> usize {
        self.feature_names.len()
    }

    pub fn param_names(&self) -> &[String] {
        &self.feature_names[1..]
    }

    pub fn row(&self, c: usize) -> &[f64] {
        let k = self.num_features();
        &self.beta[c * k..(c + 1) * k]
    }

    pub fn row_mut(&mut self, c: usize) -> &mut [f64] {
        let k = self.num_features();
        &mut self.beta[c * k..(c + 1) * k]
    }

    pub fn layout_owned(&self) -> Layout {
        Layout {
            component_labels: self.component_labels.clone(),
            explained_vars: self.explained_vars.clone(),
            binary_mask: self.binary_mask.clone(),
        }
    }

    /// `β_cᵀ(1, θ)` for every component, before any sigmoid.
    pub fn linear_predictors(&self, theta: &[f64]) -> Vec<f64> {
        (0..self.num_components())
            .map(|c| {
                let row = self.row(c);
                row[0] + row[1..].iter().zip(theta).map(|(b, t)| b * t).sum::<f64>()
            })
            .collect()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let mut model: SurrogateModel = serde_json::from_str(text)?;
        let layout = model.layout_owned();
        if layout.binary_mask.len() != layout.component_labels.len()
            || layout.explained_vars.len() + 1 != layout.component_labels.len()
        {
            return Err(ClemoError::Data("inconsistent surrogate layout".into()));
        }
        check_dim(
            "coefficient matrix",
            model.num_components() * model.num_features(),
            model.beta.len(),
        )?;
        model.layout = Some(layout);
        Ok(model)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }
}

impl Explainer for SurrogateModel {
    fn layout(&self) -> &Layout {
        self.layout.as_ref().expect("constructed through new/from_json")
    }

    fn predict(&self, theta: &[f64]) -> Vec<f64> {
        self.linear_predictors(theta)
            .into_iter()
            .zip(&self.binary_mask)
            .map(|(z, &b)| if b { sigmoid(z) } else { z })
            .collect()
    }
}

pub fn predict(model: &SurrogateModel, theta: &[f64]) -> Result<Vec<f64>> {
    check_dim("parameter vector", model.num_features() - 1, theta.len())?;
    Ok(model.predict(theta))
}
