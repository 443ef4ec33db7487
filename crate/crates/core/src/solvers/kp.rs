//! Continuous knapsack `max{vᵀx : wᵀx ≤ 1, x ∈ [0,1]^p}`.

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, ClemoError, Result};
use crate::problem::{
    dot, unit_box, AffineObjective, DecisionVector, LinearConstraint, ParamVector, Problem, Sense,
    SolverRecord,
};

/// Which part of `(v, w)` is treated as the sensitive parameter vector.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KpParams {
    /// θ = (v, w)
    #[default]
    ValuesAndWeights,
    /// θ = w, v fixed at the nominal values
    WeightsOnly,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KpInstance {
    pub values: Vec<f64>,
    pub weights: Vec<f64>,
    #[serde(default)]
    pub params: KpParams,
    /// Whether `0 ≤ x ≤ 1` enters the constraint rows (and hence δ). When
    /// false the box is treated as variable bounds and only the capacity
    /// row counts.
    #[serde(default = "default_true")]
    pub box_rows: bool,
}

fn default_true() -> bool {
    true
}

impl KpInstance {
    pub fn new(values: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        check_dim("knapsack weights", values.len(), weights.len())?;
        if values.is_empty() {
            return Err(ClemoError::Config("knapsack needs at least one item".into()));
        }
        if values.iter().chain(&weights).any(|v| !v.is_finite()) {
            return Err(ClemoError::Data("knapsack data must be finite".into()));
        }
        Ok(Self {
            values,
            weights,
            params: KpParams::ValuesAndWeights,
            box_rows: true,
        })
    }

    pub fn with_params(mut self, params: KpParams) -> Self {
        self.params = params;
        self
    }

    pub fn with_box_rows(mut self, box_rows: bool) -> Self {
        self.box_rows = box_rows;
        self
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Splits θ into `(v, w)`.
    pub fn unpack<'a>(&'a self, theta: &'a [f64]) -> (&'a [f64], &'a [f64]) {
        let p = self.len();
        match self.params {
            KpParams::ValuesAndWeights => (&theta[..p], &theta[p..]),
            KpParams::WeightsOnly => (&self.values, theta),
        }
    }
}

/// Exact solution of the continuous knapsack with capacity 1.
///
/// Items with negative weight and non-positive value are complemented
/// (`x = 1 − y`) so every remaining candidate has positive weight; the rest is
/// the density greedy with one fractional break item. Equal densities keep
/// the lower index first.
pub fn solve_kp(values: &[f64], weights: &[f64]) -> Result<SolverRecord> {
    check_dim("knapsack weights", values.len(), weights.len())?;
    let p = values.len();
    let mut x = vec![0.0; p];
    let mut capacity = 1.0;
    // (index, value, weight, complemented)
    let mut candidates: Vec<(usize, f64, f64, bool)> = Vec::new();

    for j in 0..p {
        let (v, w) = (values[j], weights[j]);
        if w <= 0.0 && v > 0.0 {
            x[j] = 1.0;
            capacity -= w;
        } else if w < 0.0 {
            // v ≤ 0: take fully, then decide how much to give back
            x[j] = 1.0;
            capacity -= w;
            if v < 0.0 {
                candidates.push((j, -v, -w, true));
            }
        } else if w > 0.0 && v > 0.0 {
            candidates.push((j, v, w, false));
        }
    }

    candidates.sort_by(|a, b| {
        let da = a.1 / a.2;
        let db = b.1 / b.2;
        db.total_cmp(&da).then(a.0.cmp(&b.0))
    });

    for &(j, _, w, complemented) in &candidates {
        if capacity <= 0.0 {
            break;
        }
        let take = if w <= capacity { 1.0 } else { capacity / w };
        capacity -= take * w;
        x[j] = if complemented { 1.0 - take } else { take };
    }

    let objective_value = dot(values, &x);
    Ok(SolverRecord {
        objective_value,
        decision: DecisionVector::new(x, vec![false; p])?,
        aux: vec![],
        routes: None,
    })
}

impl Problem for KpInstance {
    fn kind(&self) -> &'static str {
        "kp"
    }

    fn num_vars(&self) -> usize {
        self.len()
    }

    fn binary_mask(&self) -> Vec<bool> {
        vec![false; self.len()]
    }

    fn sense(&self) -> Sense {
        Sense::Max
    }

    fn var_names(&self) -> Vec<String> {
        (1..=self.len()).map(|j| format!("x{j}")).collect()
    }

    fn nominal(&self) -> ParamVector {
        let p = self.len();
        let (values, names) = match self.params {
            KpParams::ValuesAndWeights => (
                self.values.iter().chain(&self.weights).copied().collect(),
                (1..=p)
                    .map(|j| format!("v{j}"))
                    .chain((1..=p).map(|j| format!("w{j}")))
                    .collect(),
            ),
            KpParams::WeightsOnly => (
                self.weights.clone(),
                (1..=p).map(|j| format!("w{j}")).collect(),
            ),
        };
        ParamVector { values, names }
    }

    fn num_params(&self) -> usize {
        match self.params {
            KpParams::ValuesAndWeights => 2 * self.len(),
            KpParams::WeightsOnly => self.len(),
        }
    }

    fn objective(&self, theta: &[f64]) -> Result<AffineObjective> {
        check_dim("parameter vector", self.num_params(), theta.len())?;
        let (v, _) = self.unpack(theta);
        Ok(AffineObjective {
            coeffs: v.to_vec(),
            constant: 0.0,
        })
    }

    fn constraints(&self, theta: &[f64], _aux: &[f64]) -> Result<Vec<LinearConstraint>> {
        check_dim("parameter vector", self.num_params(), theta.len())?;
        let (_, w) = self.unpack(theta);
        let mut rows = vec![LinearConstraint::le(
            w.iter().copied().enumerate().collect(),
            1.0,
        )];
        if self.box_rows {
            rows.extend(unit_box(self.len()));
        }
        Ok(rows)
    }

    fn is_feasible_and_bounded(&self, theta: &[f64]) -> bool {
        theta.len() == self.num_params()
    }

    fn solve(&self, theta: &[f64]) -> Result<SolverRecord> {
        check_dim("parameter vector", self.num_params(), theta.len())?;
        let (v, w) = self.unpack(theta);
        solve_kp(v, w)
    }
}
