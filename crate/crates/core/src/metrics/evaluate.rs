use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{ClemoError, Result};
use crate::problem::Problem;
use crate::sampling::ExplainDataset;
use crate::surrogate::{Explainer, LambdaWeights, LossContext};

/// λ-free loss terms of one method on one dataset.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MethodRow {
    pub method: String,
    pub accuracy_objective: f64,
    pub accuracy_decisions: f64,
    pub incoherence_objective: f64,
    pub incoherence_feasibility: f64,
}

impl MethodRow {
    pub fn accuracy(&self) -> f64 {
        self.accuracy_objective + self.accuracy_decisions
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub rows: Vec<MethodRow>,
}

impl EvaluationReport {
    pub fn get(&self, method: &str) -> Option<&MethodRow> {
        self.rows.iter().find(|r| r.method == method)
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        for row in &self.rows {
            w.serialize(row)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let rows = csv::Reader::from_reader(reader)
            .deserialize()
            .collect::<std::result::Result<Vec<MethodRow>, _>>()?;
        Ok(Self { rows })
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Evaluates every named model on the dataset with unit loss weights.
pub fn evaluate(
    models: &[(&str, &dyn Explainer)],
    dataset: &ExplainDataset,
    problem: &dyn Problem,
) -> Result<EvaluationReport> {
    let Some((_, first)) = models.first() else {
        return Ok(EvaluationReport::default());
    };
    let ctx = LossContext::new(problem, dataset, first.layout())?;
    let mut rows = Vec::with_capacity(models.len());
    for (name, model) in models {
        if model.layout() != ctx.layout() {
            return Err(ClemoError::Data(format!(
                "model {name} does not share the dataset's component layout"
            )));
        }
        let b = ctx.breakdown_of(*model, LambdaWeights::ONES)?;
        rows.push(MethodRow {
            method: name.to_string(),
            accuracy_objective: b.a1_objective,
            accuracy_decisions: b.accuracy_decisions(),
            incoherence_objective: b.c1,
            incoherence_feasibility: b.c2,
        });
    }
    Ok(EvaluationReport { rows })
}
