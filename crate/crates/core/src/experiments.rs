//! End-to-end pipelines behind the command-line tool.

use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{ClemoError, Result};
use crate::instances::{default_spp_instance, gen_kp, KpGenConfig, KpType};
use crate::metrics::{
    evaluate, feature_contributions, fit_benchmark_dtr, stability, Contribution, ContributionRule,
    DtrModel, EvaluationReport, MethodRow, StabilityReport,
};
use crate::problem::{ParamVector, Problem, ProblemInstance};
use crate::sampling::{sample_dataset, ExplainDataset, SamplerConfig};
use crate::surrogate::{
    auto_balance_lambdas, fit_benchmark_lr, fit_clemo, ClemoOptions, Explainer, FitReport,
    LambdaWeights, SurrogateModel,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Dtr,
    Lr,
    Clemo,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::Dtr, Method::Lr, Method::Clemo];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::Dtr => "dtr",
            Method::Lr => "lr",
            Method::Clemo => "clemo",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = ClemoError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "dtr" => Ok(Method::Dtr),
            "lr" => Ok(Method::Lr),
            "clemo" => Ok(Method::Clemo),
            other => Err(ClemoError::Config(format!("unknown method {other:?}"))),
        }
    }
}

/// Fixed loss weights; unset entries come from auto-balancing.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LambdaOverrides {
    pub a1: Option<f64>,
    pub a2: Option<f64>,
    pub c1: Option<f64>,
    pub c2: Option<f64>,
}

impl LambdaOverrides {
    fn apply(&self, auto: LambdaWeights) -> Result<LambdaWeights> {
        LambdaWeights::from_array([
            self.a1.unwrap_or(auto.a1),
            self.a2.unwrap_or(auto.a2),
            self.c1.unwrap_or(auto.c1),
            self.c2.unwrap_or(auto.c2),
        ])
    }
}

#[derive(Clone, Debug)]
pub struct ExplainConfig {
    pub sampler: SamplerConfig,
    pub methods: Vec<Method>,
    pub lambda: LambdaOverrides,
    pub clemo: ClemoOptions,
}

impl ExplainConfig {
    pub fn new(sampler: SamplerConfig) -> Self {
        Self {
            sampler,
            methods: vec![Method::Lr, Method::Clemo],
            lambda: LambdaOverrides::default(),
            clemo: ClemoOptions::default(),
        }
    }

    fn validate(&self) -> Result<()> {
        if self.methods.is_empty() {
            return Err(ClemoError::Config("no methods selected".into()));
        }
        Ok(())
    }
}

/// Uniform θ on [−1, 1] for the shortest-path testbed (θ⁰ = 0), Gaussian
/// perturbation otherwise.
pub fn default_sampler(problem: &dyn Problem, samples: usize, seed: u64) -> SamplerConfig {
    match problem.kind() {
        "spp" => SamplerConfig::uniform(samples, seed, -1.0, 1.0),
        _ => SamplerConfig::gaussian(samples, seed),
    }
}

pub struct ExplainOutcome {
    pub dataset: ExplainDataset,
    pub lr: Option<SurrogateModel>,
    pub dtr: Option<DtrModel>,
    pub clemo: Option<FitReport>,
    pub lambda: Option<LambdaWeights>,
    pub report: EvaluationReport,
}

impl ExplainOutcome {
    /// Linear models in method order, for contribution rankings.
    pub fn linear_models(&self) -> Vec<(Method, &SurrogateModel)> {
        let mut out = Vec::new();
        if let Some(m) = &self.lr {
            out.push((Method::Lr, m));
        }
        if let Some(r) = &self.clemo {
            out.push((Method::Clemo, &r.model));
        }
        out
    }
}

struct Fits {
    lr: Option<SurrogateModel>,
    dtr: Option<DtrModel>,
    clemo: Option<FitReport>,
    lambda: Option<LambdaWeights>,
}

fn fit_methods(dataset: &ExplainDataset, problem: &dyn Problem, cfg: &ExplainConfig) -> Result<Fits> {
    let wants = |m| cfg.methods.contains(&m);
    let lr = if wants(Method::Lr) || wants(Method::Clemo) {
        Some(fit_benchmark_lr(dataset, problem)?)
    } else {
        None
    };
    let dtr = if wants(Method::Dtr) {
        Some(fit_benchmark_dtr(dataset, problem)?)
    } else {
        None
    };
    let (clemo, lambda) = if wants(Method::Clemo) {
        let init = lr.as_ref().expect("fitted above");
        let lambda = cfg.lambda.apply(auto_balance_lambdas(dataset, problem, init)?)?;
        let report = fit_clemo(dataset, problem, lambda, init, cfg.clemo)?;
        (Some(report), Some(lambda))
    } else {
        (None, None)
    };
    Ok(Fits {
        lr: lr.filter(|_| wants(Method::Lr)),
        dtr,
        clemo,
        lambda,
    })
}

fn report_for(
    fits: &Fits,
    methods: &[Method],
    dataset: &ExplainDataset,
    problem: &dyn Problem,
) -> Result<EvaluationReport> {
    let mut ordered = methods.to_vec();
    ordered.sort();
    ordered.dedup();
    let mut models: Vec<(&str, &dyn Explainer)> = Vec::new();
    for m in ordered {
        let e: &dyn Explainer = match m {
            Method::Lr => fits.lr.as_ref().expect("requested"),
            Method::Dtr => fits.dtr.as_ref().expect("requested"),
            Method::Clemo => &fits.clemo.as_ref().expect("requested").model,
        };
        models.push((m.as_str(), e));
    }
    evaluate(&models, dataset, problem)
}

pub fn run_explain(
    problem: &dyn Problem,
    present: &ParamVector,
    cfg: &ExplainConfig,
) -> Result<ExplainOutcome> {
    cfg.validate()?;
    let dataset = sample_dataset(problem, present, &cfg.sampler)?;
    let fits = fit_methods(&dataset, problem, cfg)?;
    let report = report_for(&fits, &cfg.methods, &dataset, problem)?;
    Ok(ExplainOutcome {
        dataset,
        lr: fits.lr,
        dtr: fits.dtr,
        clemo: fits.clemo,
        lambda: fits.lambda,
        report,
    })
}

/// Largest `limit` contributions per component.
pub fn top_contributions(
    model: &SurrogateModel,
    theta0: &[f64],
    limit: usize,
) -> Result<Vec<(String, Vec<Contribution>)>> {
    let all = feature_contributions(model, theta0, ContributionRule::default())?;
    Ok(model
        .component_labels
        .iter()
        .cloned()
        .zip(all.into_iter().map(|mut l| {
            l.truncate(limit);
            l
        }))
        .collect())
}

/// Weighted coefficient of determination of `pred` against `truth`.
pub fn weighted_r2(truth: &[f64], pred: &[f64], weights: &[f64]) -> f64 {
    let sw: f64 = weights.iter().sum();
    let mean = truth.iter().zip(weights).map(|(t, w)| t * w).sum::<f64>() / sw;
    let ss_tot: f64 = truth.iter().zip(weights).map(|(t, w)| w * (t - mean).powi(2)).sum();
    let ss_res: f64 = truth
        .iter()
        .zip(pred)
        .zip(weights)
        .map(|((t, p), w)| w * (t - p).powi(2))
        .sum();
    if ss_tot > 0.0 {
        1.0 - ss_res / ss_tot
    } else if ss_res == 0.0 {
        1.0
    } else {
        0.0
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub theta: f64,
    pub optimal: f64,
    pub lr: Option<f64>,
    pub clemo: Option<f64>,
}

/// Optimal value and fitted objective surrogates over an evenly spaced θ
/// grid, for one-parameter problems.
pub fn objective_curve(
    problem: &dyn Problem,
    outcome: &ExplainOutcome,
    lo: f64,
    hi: f64,
    points: usize,
) -> Result<Vec<CurvePoint>> {
    if problem.num_params() != 1 || points < 2 {
        return Err(ClemoError::Config(
            "curves need a single parameter and at least two points".into(),
        ));
    }
    (0..points)
        .map(|i| {
            let theta = lo + (hi - lo) * i as f64 / (points - 1) as f64;
            let optimal = problem.solve(&[theta])?.objective_value;
            Ok(CurvePoint {
                theta,
                optimal,
                lr: outcome.lr.as_ref().map(|m| m.predict(&[theta])[0]),
                clemo: outcome.clemo.as_ref().map(|r| r.model.predict(&[theta])[0]),
            })
        })
        .collect()
}

pub fn default_spp_problem() -> ProblemInstance {
    ProblemInstance::Spp(default_spp_instance())
}

#[derive(Clone, Debug)]
pub struct KpBenchmarkConfig {
    pub types: Vec<KpType>,
    pub instances: usize,
    pub items: usize,
    pub samples: usize,
    pub seed: u64,
    pub methods: Vec<Method>,
    pub lambda: LambdaOverrides,
    pub clemo: ClemoOptions,
    /// Count the unit box in δ (see [`KpInstance::box_rows`](crate::solvers::KpInstance)).
    pub box_rows: bool,
}

impl KpBenchmarkConfig {
    pub fn new(seed: u64) -> Self {
        Self {
            types: KpType::ALL.to_vec(),
            instances: 10,
            items: 25,
            samples: 1000,
            seed,
            methods: Method::ALL.to_vec(),
            lambda: LambdaOverrides::default(),
            clemo: ClemoOptions::default(),
            box_rows: true,
        }
    }
}

/// Instance and sampling seeds of run `index` of a knapsack type.
pub fn kp_run_seeds(seed: u64, kind: KpType, index: usize) -> (u64, u64) {
    let base = seed
        .wrapping_mul(1_000_003)
        .wrapping_add(kind.index() as u64 * 10_000 + index as u64);
    (base, base.wrapping_add(0x9e37_79b9))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KpRun {
    pub kp_type: u8,
    pub instance: usize,
    pub rows: Vec<MethodRow>,
    pub lambda: Option<LambdaWeights>,
    pub clemo_trace: Option<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub kp_type: u8,
    pub method: String,
    pub runs: usize,
    pub accuracy_objective_mean: f64,
    pub accuracy_objective_std: f64,
    pub accuracy_decisions_mean: f64,
    pub accuracy_decisions_std: f64,
    pub incoherence_objective_mean: f64,
    pub incoherence_objective_std: f64,
    pub incoherence_feasibility_mean: f64,
    pub incoherence_feasibility_std: f64,
}

fn mean_std(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    if v.iter().all(|x| *x == v[0]) {
        return (v[0], 0.0);
    }
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

pub fn summarize(runs: &[KpRun]) -> Vec<SummaryRow> {
    let mut keys: Vec<(u8, String)> = runs
        .iter()
        .flat_map(|r| r.rows.iter().map(move |row| (r.kp_type, row.method.clone())))
        .collect();
    keys.sort_by(|a, b| {
        a.0.cmp(&b.0).then_with(|| {
            let rank = |m: &str| m.parse::<Method>().map_or(usize::MAX, |m| m as usize);
            rank(&a.1).cmp(&rank(&b.1)).then(a.1.cmp(&b.1))
        })
    });
    keys.dedup();
    keys.into_iter()
        .map(|(kp_type, method)| {
            let rows: Vec<&MethodRow> = runs
                .iter()
                .filter(|r| r.kp_type == kp_type)
                .flat_map(|r| r.rows.iter().filter(|row| row.method == method))
                .collect();
            let col = |f: fn(&MethodRow) -> f64| mean_std(&rows.iter().map(|r| f(r)).collect::<Vec<_>>());
            let (aom, aos) = col(|r| r.accuracy_objective);
            let (adm, ads) = col(|r| r.accuracy_decisions);
            let (iom, ios) = col(|r| r.incoherence_objective);
            let (ifm, ifs) = col(|r| r.incoherence_feasibility);
            SummaryRow {
                kp_type,
                method,
                runs: rows.len(),
                accuracy_objective_mean: aom,
                accuracy_objective_std: aos,
                accuracy_decisions_mean: adm,
                accuracy_decisions_std: ads,
                incoherence_objective_mean: iom,
                incoherence_objective_std: ios,
                incoherence_feasibility_mean: ifm,
                incoherence_feasibility_std: ifs,
            }
        })
        .collect()
}

/// One explanation per generated knapsack instance; runs are independent
/// and execute in parallel.
pub fn benchmark_kp(cfg: &KpBenchmarkConfig) -> Result<Vec<KpRun>> {
    let jobs: Vec<(KpType, usize)> = cfg
        .types
        .iter()
        .flat_map(|&t| (0..cfg.instances).map(move |i| (t, i)))
        .collect();
    jobs.par_iter()
        .map(|&(kind, index)| {
            let (inst_seed, sample_seed) = kp_run_seeds(cfg.seed, kind, index);
            let kp = gen_kp(&KpGenConfig::new(kind, inst_seed).with_items(cfg.items))?
                .with_box_rows(cfg.box_rows);
            let explain = ExplainConfig {
                sampler: SamplerConfig::gaussian(cfg.samples, sample_seed),
                methods: cfg.methods.clone(),
                lambda: cfg.lambda,
                clemo: cfg.clemo,
            };
            let out = run_explain(&kp, &kp.nominal(), &explain)?;
            Ok(KpRun {
                kp_type: kind.index(),
                instance: index,
                rows: out.report.rows,
                lambda: out.lambda,
                clemo_trace: out.clemo.map(|r| r.loss_trace),
            })
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StabilityOutcome {
    pub method: String,
    pub report: StabilityReport,
    /// Coefficients of every resampled fit.
    pub models: Vec<SurrogateModel>,
}

/// Refits the linear methods on `resamples` datasets drawn with seeds
/// `seed + 1 ..= seed + resamples` (or all with `seed` when `same_seed`).
pub fn stability_study(
    problem: &dyn Problem,
    present: &ParamVector,
    cfg: &ExplainConfig,
    resamples: usize,
    same_seed: bool,
) -> Result<Vec<StabilityOutcome>> {
    if resamples < 2 {
        return Err(ClemoError::Config("stability needs at least two resamples".into()));
    }
    cfg.validate()?;
    let methods: Vec<Method> = [Method::Lr, Method::Clemo]
        .into_iter()
        .filter(|m| cfg.methods.contains(m))
        .collect();
    if methods.is_empty() {
        return Err(ClemoError::Config(
            "stability is defined for the linear methods (lr, clemo)".into(),
        ));
    }
    let per_resample: Vec<Fits> = (1..=resamples as u64)
        .into_par_iter()
        .map(|r| {
            let mut sampler = cfg.sampler.clone();
            if !same_seed {
                sampler.seed = cfg.sampler.seed.wrapping_add(r);
            }
            let dataset = sample_dataset(problem, present, &sampler)?;
            let sub = ExplainConfig {
                methods: methods.clone(),
                ..cfg.clone()
            };
            fit_methods(&dataset, problem, &sub)
        })
        .collect::<Result<_>>()?;
    methods
        .into_iter()
        .map(|m| {
            let models: Vec<SurrogateModel> = per_resample
                .iter()
                .map(|f| match m {
                    Method::Lr => f.lr.clone().expect("fitted"),
                    _ => f.clemo.as_ref().expect("fitted").model.clone(),
                })
                .collect();
            let report = stability(&models, &present.values, ContributionRule::default())?;
            Ok(StabilityOutcome {
                method: m.to_string(),
                report,
                models,
            })
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RuntimeRow {
    pub items: usize,
    pub features: usize,
    pub dtr_seconds: f64,
    pub lr_seconds: f64,
    pub clemo_seconds: f64,
    pub clemo_iterations: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RuntimeOutcome {
    pub rows: Vec<RuntimeRow>,
    /// CLEMO loss trace per size, aligned with `rows`.
    pub traces: Vec<Vec<f64>>,
}

/// Times the three fits on type-1 knapsacks of the given sizes. Runs
/// sequentially so the timings do not compete for cores.
pub fn runtime_study(
    sizes: &[usize],
    samples: usize,
    seed: u64,
    lambda: LambdaOverrides,
    clemo: ClemoOptions,
) -> Result<RuntimeOutcome> {
    let mut rows = Vec::new();
    let mut traces = Vec::new();
    for &items in sizes {
        let (inst_seed, sample_seed) = kp_run_seeds(seed, KpType::Uncorrelated, items);
        let kp = gen_kp(&KpGenConfig::new(KpType::Uncorrelated, inst_seed).with_items(items))?;
        let dataset = sample_dataset(&kp, &kp.nominal(), &SamplerConfig::gaussian(samples, sample_seed))?;

        let t = Instant::now();
        fit_benchmark_dtr(&dataset, &kp)?;
        let dtr_seconds = t.elapsed().as_secs_f64();

        let t = Instant::now();
        let lr = fit_benchmark_lr(&dataset, &kp)?;
        let lr_seconds = t.elapsed().as_secs_f64();

        let t = Instant::now();
        let lambda = lambda.apply(auto_balance_lambdas(&dataset, &kp, &lr)?)?;
        let report = fit_clemo(&dataset, &kp, lambda, &lr, clemo)?;
        let clemo_seconds = t.elapsed().as_secs_f64();

        rows.push(RuntimeRow {
            items,
            features: kp.num_params(),
            dtr_seconds,
            lr_seconds,
            clemo_seconds,
            clemo_iterations: report.iterations,
        });
        traces.push(report.loss_trace);
    }
    Ok(RuntimeOutcome { rows, traces })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn method_names_round_trip() {
        for m in Method::ALL {
            assert_eq!(m.as_str().parse::<Method>().unwrap(), m);
        }
        assert!("svm".parse::<Method>().is_err());
    }

    #[test]
    fn r2_of_perfect_prediction() {
        assert_eq!(weighted_r2(&[1.0, 2.0, 4.0], &[1.0, 2.0, 4.0], &[1.0, 0.5, 2.0]), 1.0);
        let r = weighted_r2(&[1.0, 2.0, 3.0], &[2.0, 2.0, 2.0], &[1.0, 1.0, 1.0]);
        assert!(r.abs() < 1e-15);
    }

    #[test]
    fn single_run_summary_has_zero_spread() {
        let row = MethodRow {
            method: "lr".into(),
            accuracy_objective: 1.0,
            accuracy_decisions: 2.0,
            incoherence_objective: 0.1,
            incoherence_feasibility: 0.3,
        };
        let run = KpRun {
            kp_type: 1,
            instance: 0,
            rows: vec![row.clone()],
            lambda: None,
            clemo_trace: None,
        };
        let s = summarize(&[run]);
        assert_eq!(s.len(), 1);
        assert_eq!(s[0].incoherence_feasibility_mean, 0.3);
        assert_eq!(s[0].incoherence_feasibility_std, 0.0);
    }
}

/// One CLEMO loss-trace entry (`loss_trace_clemo.csv`).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub iteration: usize,
    pub total_loss: f64,
}

impl TraceRow {
    pub fn from_trace(trace: &[f64]) -> Vec<TraceRow> {
        trace
            .iter()
            .enumerate()
            .map(|(iteration, &total_loss)| TraceRow {
                iteration,
                total_loss,
            })
            .collect()
    }
}

/// Loss-trace entry of the runtime study (`convergence.csv`).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRow {
    pub items: usize,
    pub iteration: usize,
    pub total_loss: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StabilityRow {
    pub method: String,
    pub std: f64,
    pub normalized_std: f64,
    pub fsi: f64,
}

impl From<&StabilityOutcome> for StabilityRow {
    fn from(o: &StabilityOutcome) -> Self {
        StabilityRow {
            method: o.method.clone(),
            std: o.report.std,
            normalized_std: o.report.normalized_std,
            fsi: o.report.fsi,
        }
    }
}

/// Writes serde rows as CSV with a header line.
pub fn write_rows<W: Write, T: Serialize>(writer: W, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_rows<R: Read, T: DeserializeOwned>(reader: R) -> Result<Vec<T>> {
    csv::Reader::from_reader(reader)
        .deserialize()
        .map(|r| r.map_err(ClemoError::from))
        .collect()
}
