//! Training data around the present problem: perturb θ⁰, keep feasible
//! draws, record the solver output, attach RBF proximity weights.

use std::io::{Read, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{ClemoError, Result};
use crate::problem::{is_feasible_and_bounded, DecisionVector, ParamVector, Problem, SolverRecord};

const STARVATION_DRAWS: usize = 1_000_000;
const STARVATION_RATE: f64 = 1e-3;
const BATCH: usize = 64;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Perturbation {
    /// Independent `N(θ⁰_j, (spread·|θ⁰_j|)²)` per coordinate.
    Gaussian { spread: f64 },
    /// Independent `U[lo, hi]` per coordinate.
    UniformInterval { lo: f64, hi: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SamplerConfig {
    pub samples: usize,
    pub seed: u64,
    pub perturbation: Perturbation,
}

impl SamplerConfig {
    pub fn gaussian(samples: usize, seed: u64) -> Self {
        Self {
            samples,
            seed,
            perturbation: Perturbation::Gaussian { spread: 0.2 },
        }
    }

    pub fn uniform(samples: usize, seed: u64, lo: f64, hi: f64) -> Self {
        Self {
            samples,
            seed,
            perturbation: Perturbation::UniformInterval { lo, hi },
        }
    }

    fn validate(&self) -> Result<()> {
        if self.samples == 0 {
            return Err(ClemoError::Config("sample count must be ≥ 1".into()));
        }
        match self.perturbation {
            Perturbation::Gaussian { spread } if !(spread >= 0.0) => {
                Err(ClemoError::Config("spread must be nonnegative".into()))
            }
            Perturbation::UniformInterval { lo, hi } if !(lo <= hi) => {
                Err(ClemoError::Config("uniform interval needs lo ≤ hi".into()))
            }
            _ => Ok(()),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DatasetRow {
    pub theta: Vec<f64>,
    pub record: SolverRecord,
    pub weight: f64,
}

/// `N + 1` rows; row 0 is the present problem.
#[derive(Clone, Debug, PartialEq)]
pub struct ExplainDataset {
    pub param_names: Vec<String>,
    pub var_names: Vec<String>,
    pub binary_mask: Vec<bool>,
    pub rows: Vec<DatasetRow>,
    pub kernel_width: f64,
}

impl ExplainDataset {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn num_params(&self) -> usize {
        self.param_names.len()
    }

    pub fn num_vars(&self) -> usize {
        self.var_names.len()
    }

    pub fn present(&self) -> &DatasetRow {
        &self.rows[0]
    }

    pub fn present_params(&self) -> ParamVector {
        ParamVector {
            values: self.rows[0].theta.clone(),
            names: self.param_names.clone(),
        }
    }

    pub fn total_weight(&self) -> f64 {
        self.rows.iter().map(|r| r.weight).sum()
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let aux_len = self.rows.first().map_or(0, |r| r.record.aux.len());
        let mut header: Vec<String> = self.param_names.clone();
        header.push("f".into());
        header.extend(self.var_names.iter().cloned());
        header.push("weight".into());
        header.extend((1..=aux_len).map(|k| format!("aux_{k}")));
        w.write_record(&header)?;
        for row in &self.rows {
            let mut rec: Vec<String> = row.theta.iter().map(f64::to_string).collect();
            rec.push(row.record.objective_value.to_string());
            rec.extend(row.record.decision.values.iter().map(f64::to_string));
            rec.push(row.weight.to_string());
            rec.extend(row.record.aux.iter().map(f64::to_string));
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Reads a dataset written by [`ExplainDataset::write_csv`].
    pub fn read_csv<R: Read>(reader: R, binary_mask: Vec<bool>) -> Result<Self> {
        let mut r = csv::Reader::from_reader(reader);
        let header: Vec<String> = r.headers()?.iter().map(str::to_owned).collect();
        let f_col = header
            .iter()
            .position(|h| h == "f")
            .ok_or_else(|| ClemoError::Data("missing `f` column".into()))?;
        let w_col = header
            .iter()
            .position(|h| h == "weight")
            .ok_or_else(|| ClemoError::Data("missing `weight` column".into()))?;
        if w_col <= f_col {
            return Err(ClemoError::Data("`weight` must follow `f`".into()));
        }
        let param_names = header[..f_col].to_vec();
        let var_names = header[f_col + 1..w_col].to_vec();
        if var_names.len() != binary_mask.len() {
            return Err(ClemoError::DimensionMismatch {
                what: "binary mask",
                expected: var_names.len(),
                got: binary_mask.len(),
            });
        }
        let mut rows = Vec::new();
        for rec in r.records() {
            let rec = rec?;
            let vals: Vec<f64> = rec
                .iter()
                .map(|s| {
                    s.parse::<f64>()
                        .map_err(|e| ClemoError::Data(format!("bad number `{s}`: {e}")))
                })
                .collect::<Result<_>>()?;
            rows.push(DatasetRow {
                theta: vals[..f_col].to_vec(),
                record: SolverRecord {
                    objective_value: vals[f_col],
                    decision: DecisionVector::new(
                        vals[f_col + 1..w_col].to_vec(),
                        binary_mask.clone(),
                    )?,
                    aux: vals[w_col + 1..].to_vec(),
                    routes: None,
                },
                weight: vals[w_col],
            });
        }
        if rows.is_empty() {
            return Err(ClemoError::Data("dataset has no rows".into()));
        }
        let kernel_width = mean_distance(&rows);
        Ok(Self {
            param_names,
            var_names,
            binary_mask,
            rows,
            kernel_width,
        })
    }
}

fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

fn mean_distance(rows: &[DatasetRow]) -> f64 {
    let origin = &rows[0].theta;
    // summed in sorted order so that ν does not depend on the row order
    let mut d: Vec<f64> = rows.iter().map(|r| distance(&r.theta, origin)).collect();
    d.sort_by(f64::total_cmp);
    d.iter().sum::<f64>() / rows.len() as f64
}

/// Sets `w^i = exp(−d(θⁱ, θ⁰)² / ν²)` with ν the mean distance to row 0
/// over all rows (row 0 included).
pub fn rbf_weights(dataset: &mut ExplainDataset) {
    let nu = mean_distance(&dataset.rows);
    dataset.kernel_width = nu;
    if !(nu > 0.0) {
        log::warn!("all samples coincide with the present problem; using unit weights");
        for row in &mut dataset.rows {
            row.weight = 1.0;
        }
        return;
    }
    let origin = dataset.rows[0].theta.clone();
    for row in &mut dataset.rows {
        let d = distance(&row.theta, &origin);
        row.weight = (-(d * d) / (nu * nu)).exp();
    }
}

struct Perturber {
    center: Vec<f64>,
    normals: Vec<Option<Normal<f64>>>,
    perturbation: Perturbation,
}

impl Perturber {
    fn new(center: &[f64], perturbation: Perturbation) -> Result<Self> {
        let normals = match perturbation {
            Perturbation::Gaussian { spread } => center
                .iter()
                .map(|&c| {
                    let sd = spread * c.abs();
                    if sd > 0.0 {
                        Normal::new(c, sd)
                            .map(Some)
                            .map_err(|e| ClemoError::Config(e.to_string()))
                    } else {
                        Ok(None)
                    }
                })
                .collect::<Result<_>>()?,
            Perturbation::UniformInterval { .. } => vec![None; center.len()],
        };
        Ok(Self {
            center: center.to_vec(),
            normals,
            perturbation,
        })
    }

    fn draw(&self, rng: &mut ChaCha8Rng) -> Vec<f64> {
        match self.perturbation {
            Perturbation::Gaussian { .. } => self
                .center
                .iter()
                .zip(&self.normals)
                .map(|(&c, n)| n.as_ref().map_or(c, |n| n.sample(rng)))
                .collect(),
            Perturbation::UniformInterval { lo, hi } => self
                .center
                .iter()
                .map(|_| if lo < hi { rng.random_range(lo..=hi) } else { lo })
                .collect(),
        }
    }
}

/// Builds the training set: row 0 is θ⁰, followed by `cfg.samples`
/// accepted perturbations. Draws that fail the feasibility check, or that
/// the solver reports as infeasible, are rejected.
pub fn sample_dataset(
    problem: &dyn Problem,
    present: &ParamVector,
    cfg: &SamplerConfig,
) -> Result<ExplainDataset> {
    cfg.validate()?;
    if present.len() != problem.num_params() {
        return Err(ClemoError::DimensionMismatch {
            what: "present parameter vector",
            expected: problem.num_params(),
            got: present.len(),
        });
    }
    if !is_feasible_and_bounded(problem, &present.values) {
        return Err(ClemoError::Infeasible(
            "present problem is infeasible or outside the solver's domain".into(),
        ));
    }
    let strip = |mut r: SolverRecord| {
        r.routes = None;
        r
    };

    let mut rows = vec![DatasetRow {
        theta: present.values.clone(),
        record: strip(problem.solve(&present.values)?),
        weight: 1.0,
    }];

    let perturber = Perturber::new(&present.values, cfg.perturbation)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut draws = 0usize;
    while rows.len() <= cfg.samples {
        let candidates: Vec<Vec<f64>> = (0..BATCH)
            .map(|_| perturber.draw(&mut rng))
            .collect();
        let solved: Vec<Option<Result<SolverRecord>>> = candidates
            .par_iter()
            .map(|theta| {
                is_feasible_and_bounded(problem, theta).then(|| problem.solve(theta))
            })
            .collect();
        for (theta, outcome) in candidates.into_iter().zip(solved) {
            draws += 1;
            match outcome {
                Some(Ok(record)) => rows.push(DatasetRow {
                    theta,
                    record: strip(record),
                    weight: 1.0,
                }),
                Some(Err(e)) if e.is_infeasible() => {}
                Some(Err(e)) => return Err(e),
                None => {}
            }
            if rows.len() > cfg.samples {
                break;
            }
        }
        let accepted = rows.len() - 1;
        if draws >= STARVATION_DRAWS && (accepted as f64) < STARVATION_RATE * draws as f64 {
            return Err(ClemoError::SamplerStarvation { accepted, draws });
        }
    }

    let mut dataset = ExplainDataset {
        param_names: present.names.clone(),
        var_names: problem.var_names(),
        binary_mask: problem.binary_mask(),
        rows,
        kernel_width: 0.0,
    };
    rbf_weights(&mut dataset);
    Ok(dataset)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instances::{default_spp_instance, gen_kp, KpGenConfig, KpType};
    use crate::solvers::{KpInstance, SppInstance};

    fn unit_dataset(thetas: &[f64]) -> ExplainDataset {
        let rec = SolverRecord {
            objective_value: 0.0,
            decision: DecisionVector::new(vec![0.0], vec![false]).unwrap(),
            aux: vec![],
            routes: None,
        };
        ExplainDataset {
            param_names: vec!["t".into()],
            var_names: vec!["x1".into()],
            binary_mask: vec![false],
            rows: thetas
                .iter()
                .map(|&t| DatasetRow {
                    theta: vec![t],
                    record: rec.clone(),
                    weight: 0.0,
                })
                .collect(),
            kernel_width: 0.0,
        }
    }

    #[test]
    fn rbf_kernel_values() {
        // distances 0, 1, 2 → ν = 1
        let mut ds = unit_dataset(&[0.0, 1.0, 2.0]);
        rbf_weights(&mut ds);
        assert_eq!(ds.kernel_width, 1.0);
        assert_eq!(ds.rows[0].weight, 1.0);
        assert!((ds.rows[1].weight - (-1.0f64).exp()).abs() < 1e-15);
        assert!((ds.rows[2].weight - 0.018315638888734179).abs() < 1e-15);
    }

    #[test]
    fn zero_spread_yields_identical_rows() {
        let kp = KpInstance::new(vec![2.0, 1.0], vec![0.6, 0.8]).unwrap();
        let cfg = SamplerConfig {
            samples: 20,
            seed: 1,
            perturbation: Perturbation::Gaussian { spread: 0.0 },
        };
        let ds = sample_dataset(&kp, &kp.nominal(), &cfg).unwrap();
        assert_eq!(ds.len(), 21);
        assert!(ds.rows.iter().all(|r| r.theta == ds.rows[0].theta && r.weight == 1.0));
    }

    #[test]
    fn kp_dataset_has_n_plus_one_rows() {
        let kp = gen_kp(&KpGenConfig::new(KpType::Uncorrelated, 0)).unwrap();
        let ds = sample_dataset(&kp, &kp.nominal(), &SamplerConfig::gaussian(1000, 7)).unwrap();
        assert_eq!(ds.len(), 1001);
        assert_eq!(ds.rows[0].theta, kp.nominal().values);
        assert!(ds.rows.iter().all(|r| r.weight > 0.0 && r.weight <= 1.0));
    }

    #[test]
    fn spp_uniform_samples_respect_interval_and_costs() {
        let spp = default_spp_instance();
        // stretch an edge so part of [−1, 1] yields negative costs
        let mut spp: SppInstance = spp;
        spp.base_costs[4] = 0.5;
        let ds = sample_dataset(&spp, &spp.nominal(), &SamplerConfig::uniform(300, 3, -1.0, 1.0))
            .unwrap();
        for row in &ds.rows {
            assert!(row.theta[0].abs() <= 1.0);
            assert!(spp.costs(row.theta[0]).iter().all(|&c| c >= 0.0));
        }
        assert!(ds.rows.iter().any(|r| r.theta[0] < -0.4));
    }

    #[test]
    fn sampling_is_deterministic() {
        let kp = gen_kp(&KpGenConfig::new(KpType::WeaklyCorrelated, 2)).unwrap();
        let cfg = SamplerConfig::gaussian(200, 9);
        let a = sample_dataset(&kp, &kp.nominal(), &cfg).unwrap();
        let b = sample_dataset(&kp, &kp.nominal(), &cfg).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn starvation_is_reported() {
        let spp = default_spp_instance();
        // every θ in [9, 10] makes edges 0 and 1 negative
        let cfg = SamplerConfig::uniform(10, 0, 9.0, 10.0);
        let err = sample_dataset(&spp, &spp.nominal(), &cfg).unwrap_err();
        assert!(matches!(err, ClemoError::SamplerStarvation { .. }));
    }

    #[test]
    fn csv_round_trip() {
        let kp = gen_kp(&KpGenConfig::new(KpType::Uncorrelated, 4).with_items(4)).unwrap();
        let ds = sample_dataset(&kp, &kp.nominal(), &SamplerConfig::gaussian(30, 1)).unwrap();
        let mut buf = Vec::new();
        ds.write_csv(&mut buf).unwrap();
        let back = ExplainDataset::read_csv(buf.as_slice(), kp.binary_mask()).unwrap();
        assert_eq!(back, ds);
    }

    #[test]
    fn weights_do_not_depend_on_row_order() {
        let mut a = unit_dataset(&[0.0, 0.3, 1.2, -0.7]);
        let mut b = unit_dataset(&[0.0, -0.7, 1.2, 0.3]);
        rbf_weights(&mut a);
        rbf_weights(&mut b);
        assert_eq!(a.rows[1].weight, b.rows[3].weight);
        assert_eq!(a.rows[3].weight, b.rows[1].weight);
        assert!(a.rows[1].weight > a.rows[3].weight && a.rows[3].weight > a.rows[2].weight);
    }
}
