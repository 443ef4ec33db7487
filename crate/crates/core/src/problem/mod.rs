//! Parametrized optimization problems `min f(x; θ) s.t. γ_t(x; θ) ≤ 0`.
//!
//! Every testbed exposes an objective that is affine in `x` and constraints
//! that are affine in `x` for a fixed parameter vector (plus, for the CVRP,
//! the auxiliary load variables of the solver's own solution). That is all
//! the loss and gradient code needs.

mod instance;

pub use instance::ProblemInstance;

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, ClemoError, Result};

/// Absolute tolerance under which a constraint value counts as satisfied.
pub const FEAS_TOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sense {
    Min,
    Max,
}

impl Sense {
    /// Sign that turns the objective into a minimization objective.
    pub fn sign(self) -> f64 {
        match self {
            Sense::Min => 1.0,
            Sense::Max => -1.0,
        }
    }
}

/// Values of the sensitive parameters θ together with their labels.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParamVector {
    pub values: Vec<f64>,
    pub names: Vec<String>,
}

impl ParamVector {
    pub fn new(values: Vec<f64>, names: Vec<String>) -> Result<Self> {
        check_dim("parameter names", values.len(), names.len())?;
        if values.iter().any(|v| !v.is_finite()) {
            return Err(ClemoError::Data("parameter vector has non-finite entries".into()));
        }
        Ok(Self { values, names })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn with_values(&self, values: Vec<f64>) -> Self {
        Self {
            values,
            names: self.names.clone(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecisionVector {
    pub values: Vec<f64>,
    pub binary_mask: Vec<bool>,
}

impl DecisionVector {
    pub fn new(values: Vec<f64>, binary_mask: Vec<bool>) -> Result<Self> {
        check_dim("binary mask", values.len(), binary_mask.len())?;
        Ok(Self {
            values,
            binary_mask,
        })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// `h(θ) = (f(x; θ), x)` as returned by a solution algorithm.
///
/// `aux` holds auxiliary variables of the formulation that are never
/// explained but are needed to evaluate its constraints (CVRP loads).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverRecord {
    pub objective_value: f64,
    pub decision: DecisionVector,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub aux: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub routes: Option<Vec<Vec<usize>>>,
}

/// `f(x; θ) = coeffsᵀx + constant` for one fixed θ.
#[derive(Clone, Debug, PartialEq)]
pub struct AffineObjective {
    pub coeffs: Vec<f64>,
    pub constant: f64,
}

impl AffineObjective {
    pub fn eval(&self, x: &[f64]) -> f64 {
        self.constant + dot(&self.coeffs, x)
    }
}

/// `γ(x) = Σ coeff·x[idx] − rhs`, feasible iff `γ(x) ≤ 0`.
#[derive(Clone, Debug, PartialEq)]
pub struct LinearConstraint {
    pub terms: Vec<(usize, f64)>,
    pub rhs: f64,
}

impl LinearConstraint {
    pub fn new(terms: Vec<(usize, f64)>, rhs: f64) -> Self {
        Self { terms, rhs }
    }

    /// `Σ a x ≤ rhs`
    pub fn le(terms: Vec<(usize, f64)>, rhs: f64) -> Self {
        Self::new(terms, rhs)
    }

    /// `Σ a x ≥ rhs`, stored as `−Σ a x ≤ −rhs`.
    pub fn ge(terms: Vec<(usize, f64)>, rhs: f64) -> Self {
        Self::new(terms.into_iter().map(|(i, a)| (i, -a)).collect(), -rhs)
    }

    /// `Σ a x = rhs` as a pair of inequalities.
    pub fn eq(terms: Vec<(usize, f64)>, rhs: f64) -> [Self; 2] {
        [Self::le(terms.clone(), rhs), Self::ge(terms, rhs)]
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        self.terms.iter().map(|&(i, a)| a * x[i]).sum::<f64>() - self.rhs
    }
}

/// Positive part with the feasibility tolerance applied.
pub fn violation_term(gamma: f64) -> f64 {
    if gamma > FEAS_TOL {
        gamma
    } else {
        0.0
    }
}

/// Box constraints `0 ≤ x_j ≤ 1` for every variable.
pub fn unit_box(p: usize) -> Vec<LinearConstraint> {
    let mut rows = Vec::with_capacity(2 * p);
    for j in 0..p {
        rows.push(LinearConstraint::ge(vec![(j, 1.0)], 0.0));
        rows.push(LinearConstraint::le(vec![(j, 1.0)], 1.0));
    }
    rows
}

/// A parametrized optimization problem together with its solution algorithm.
pub trait Problem: Send + Sync {
    fn kind(&self) -> &'static str;

    /// Number of decision variables `p`.
    fn num_vars(&self) -> usize;

    fn binary_mask(&self) -> Vec<bool>;

    fn sense(&self) -> Sense;

    fn var_names(&self) -> Vec<String>;

    /// The present problem θ⁰.
    fn nominal(&self) -> ParamVector;

    /// Indices of the decision variables that get a surrogate. The objective
    /// is always explained.
    fn explained_vars(&self) -> Vec<usize> {
        (0..self.num_vars()).collect()
    }

    fn objective(&self, theta: &[f64]) -> Result<AffineObjective>;

    /// Constraint rows of `X(θ)`; `aux` are the auxiliary values of the
    /// solver's solution at θ (empty when the formulation has none).
    fn constraints(&self, theta: &[f64], aux: &[f64]) -> Result<Vec<LinearConstraint>>;

    /// Feasible, bounded, and inside the registered solver's domain.
    fn is_feasible_and_bounded(&self, theta: &[f64]) -> bool;

    fn solve(&self, theta: &[f64]) -> Result<SolverRecord>;

    fn num_params(&self) -> usize {
        self.nominal().len()
    }
}

pub fn evaluate_objective(problem: &dyn Problem, x: &[f64], theta: &[f64]) -> Result<f64> {
    check_dim("decision vector", problem.num_vars(), x.len())?;
    check_dim("parameter vector", problem.num_params(), theta.len())?;
    Ok(problem.objective(theta)?.eval(x))
}

/// `δ(x, X(θ)) = Σ_t max{0, γ_t(x, θ)}`.
pub fn constraint_violation(
    problem: &dyn Problem,
    x: &[f64],
    theta: &[f64],
    aux: &[f64],
) -> Result<f64> {
    check_dim("decision vector", problem.num_vars(), x.len())?;
    check_dim("parameter vector", problem.num_params(), theta.len())?;
    Ok(problem
        .constraints(theta, aux)?
        .iter()
        .map(|c| violation_term(c.value(x)))
        .sum())
}

pub fn is_feasible_and_bounded(problem: &dyn Problem, theta: &[f64]) -> bool {
    theta.len() == problem.num_params()
        && theta.iter().all(|t| t.is_finite())
        && problem.is_feasible_and_bounded(theta)
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}


#[cfg(test)]
mod tests {
    use super::fixtures::TwoVarLp;
    use super::*;
    use crate::solvers::KpInstance;

    #[test]
    fn two_var_objective_values() {
        let lp = TwoVarLp { a12: 4.1 };
        assert_eq!(evaluate_objective(&lp, &[0.0, 0.0], &[4.1]).unwrap(), 0.0);
        assert_eq!(evaluate_objective(&lp, &[2.5, 0.0], &[4.1]).unwrap(), 2.5);
    }

    #[test]
    fn two_var_incoherent_prediction_violates_capacity() {
        let lp = TwoVarLp { a12: 4.1 };
        let x = [0.11 * 4.1, 0.59 * 4.1];
        let d = constraint_violation(&lp, &x, &[4.1], &[]).unwrap();
        // 4·0.451 + 4.1·2.419 − 10
        assert!((d - 1.72190).abs() < 1e-4, "{d}");
        assert!(d / 10.0 > 0.17);
    }

    #[test]
    fn kp_objective_and_violation() {
        let kp = KpInstance::new(vec![2.0, 1.0], vec![0.6, 0.8]).unwrap();
        let theta = kp.nominal().values;
        assert!((evaluate_objective(&kp, &[1.0, 0.5], &theta).unwrap() - 2.5).abs() < 1e-15);

        let d = constraint_violation(&kp, &[1.0, 1.0], &theta, &[]).unwrap();
        let by_hand: f64 = kp
            .constraints(&theta, &[])
            .unwrap()
            .iter()
            .map(|c| c.value(&[1.0, 1.0]).max(0.0))
            .sum();
        assert!((d - 0.4).abs() < 1e-12);
        assert!((d - by_hand).abs() < 1e-12);
    }

    #[test]
    fn feasible_point_has_zero_violation() {
        let kp = KpInstance::new(vec![2.0, 1.0], vec![0.6, 0.8]).unwrap();
        let theta = kp.nominal().values;
        assert_eq!(constraint_violation(&kp, &[1.0, 0.5], &theta, &[]).unwrap(), 0.0);
        assert_eq!(constraint_violation(&kp, &[0.0, 0.0], &theta, &[]).unwrap(), 0.0);
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let lp = TwoVarLp { a12: 4.1 };
        assert!(matches!(
            evaluate_objective(&lp, &[1.0], &[4.1]),
            Err(ClemoError::DimensionMismatch { .. })
        ));
        assert!(constraint_violation(&lp, &[1.0, 1.0], &[], &[]).is_err());
    }

    #[test]
    fn equality_rows_penalize_both_directions() {
        let [a, b] = LinearConstraint::eq(vec![(0, 1.0), (1, 1.0)], 1.0);
        for x in [[0.2, 0.3], [1.0, 0.7]] {
            let d = violation_term(a.value(&x)) + violation_term(b.value(&x));
            assert!((d - (x[0] + x[1] - 1.0).abs()).abs() < 1e-15);
        }
    }
}
