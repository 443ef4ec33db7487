use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{ClemoError, Result};
use crate::solvers::{CvrpInstance, KpInstance, SppInstance};

use super::{
    is_feasible_and_bounded, AffineObjective, LinearConstraint, ParamVector, Problem, Sense,
    SolverRecord,
};

/// One of the shipped testbeds. Serializes to
/// `{"kind": ..., "p": ..., "binary_mask": [...], <payload>}`.
#[derive(Clone, Debug, PartialEq)]
pub enum ProblemInstance {
    Spp(SppInstance),
    Kp(KpInstance),
    Cvrp(CvrpInstance),
}

#[derive(Serialize, Deserialize)]
struct Tagged<T> {
    p: usize,
    binary_mask: Vec<bool>,
    #[serde(flatten)]
    instance: T,
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
enum Document {
    Spp(Tagged<SppInstance>),
    Kp(Tagged<KpInstance>),
    Cvrp(Tagged<CvrpInstance>),
}

fn tag<T: Clone>(problem: &dyn Problem, instance: &T) -> Tagged<T> {
    Tagged {
        p: problem.num_vars(),
        binary_mask: problem.binary_mask(),
        instance: instance.clone(),
    }
}

impl ProblemInstance {
    pub fn as_problem(&self) -> &dyn Problem {
        match self {
            ProblemInstance::Spp(i) => i,
            ProblemInstance::Kp(i) => i,
            ProblemInstance::Cvrp(i) => i,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        let doc = match self {
            ProblemInstance::Spp(i) => Document::Spp(tag(i, i)),
            ProblemInstance::Kp(i) => Document::Kp(tag(i, i)),
            ProblemInstance::Cvrp(i) => Document::Cvrp(tag(i, i)),
        };
        Ok(serde_json::to_string_pretty(&doc)?)
    }

    /// Parses and validates an instance; the present problem θ⁰ must be
    /// feasible and bounded.
    pub fn from_json(text: &str) -> Result<Self> {
        let doc: Document = serde_json::from_str(text)?;
        let (instance, p, mask) = match doc {
            Document::Spp(t) => {
                t.instance.validate()?;
                (ProblemInstance::Spp(t.instance), t.p, t.binary_mask)
            }
            Document::Kp(t) => {
                KpInstance::new(t.instance.values.clone(), t.instance.weights.clone())?;
                (ProblemInstance::Kp(t.instance), t.p, t.binary_mask)
            }
            Document::Cvrp(t) => {
                t.instance.validate()?;
                (ProblemInstance::Cvrp(t.instance), t.p, t.binary_mask)
            }
        };
        let problem = instance.as_problem();
        if p != problem.num_vars() || mask != problem.binary_mask() {
            return Err(ClemoError::Data(format!(
                "declared p/binary_mask do not match the {} payload",
                problem.kind()
            )));
        }
        instance.check_present_problem()?;
        Ok(instance)
    }

    pub fn check_present_problem(&self) -> Result<()> {
        let problem = self.as_problem();
        if !is_feasible_and_bounded(problem, &problem.nominal().values) {
            return Err(ClemoError::Infeasible(format!(
                "present {} problem is infeasible or outside the solver's domain",
                problem.kind()
            )));
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }
}

impl Problem for ProblemInstance {
    fn kind(&self) -> &'static str {
        self.as_problem().kind()
    }
    fn num_vars(&self) -> usize {
        self.as_problem().num_vars()
    }
    fn binary_mask(&self) -> Vec<bool> {
        self.as_problem().binary_mask()
    }
    fn sense(&self) -> Sense {
        self.as_problem().sense()
    }
    fn var_names(&self) -> Vec<String> {
        self.as_problem().var_names()
    }
    fn nominal(&self) -> ParamVector {
        self.as_problem().nominal()
    }
    fn explained_vars(&self) -> Vec<usize> {
        self.as_problem().explained_vars()
    }
    fn objective(&self, theta: &[f64]) -> Result<AffineObjective> {
        self.as_problem().objective(theta)
    }
    fn constraints(&self, theta: &[f64], aux: &[f64]) -> Result<Vec<LinearConstraint>> {
        self.as_problem().constraints(theta, aux)
    }
    fn is_feasible_and_bounded(&self, theta: &[f64]) -> bool {
        self.as_problem().is_feasible_and_bounded(theta)
    }
    fn solve(&self, theta: &[f64]) -> Result<SolverRecord> {
        self.as_problem().solve(theta)
    }
    fn num_params(&self) -> usize {
        self.as_problem().num_params()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn json_carries_kind_and_layout() {
        let kp = ProblemInstance::Kp(KpInstance::new(vec![2.0, 1.0], vec![0.6, 0.8]).unwrap());
        let text = kp.to_json().unwrap();
        let v: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert_eq!(v["kind"], "kp");
        assert_eq!(v["p"], 2);
        assert_eq!(v["binary_mask"], serde_json::json!([false, false]));
        assert_eq!(ProblemInstance::from_json(&text).unwrap(), kp);
    }

    #[test]
    fn mismatched_layout_is_rejected() {
        let text = r#"{"kind":"kp","p":3,"binary_mask":[false,false],"values":[1,2],"weights":[0.1,0.2]}"#;
        assert!(ProblemInstance::from_json(text).is_err());
    }

    #[test]
    fn infeasible_present_problem_is_rejected() {
        let cvrp = CvrpInstance::new(1, 1.0, vec![2.0], vec![0.0, 1.0, 1.0, 0.0]);
        let cvrp = cvrp.unwrap();
        let err = ProblemInstance::Cvrp(cvrp)
            .check_present_problem()
            .unwrap_err();
        assert!(err.is_infeasible());
    }
}
