use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use clemo::experiments::{
    benchmark_kp, default_sampler, default_spp_problem, objective_curve, run_explain,
    runtime_study, stability_study, summarize, top_contributions, ExplainConfig,
    ConvergenceRow, KpBenchmarkConfig, LambdaOverrides, Method, StabilityRow, TraceRow,
    write_rows,
};
use clemo::instances::{gen_cvrp, gen_kp, CvrpGenConfig, KpGenConfig, KpType};
use clemo::problem::{Problem, ProblemInstance};
use clemo::surrogate::ClemoOptions;
use clemo::ClemoError;

#[derive(Parser)]
#[command(name = "clemo", version, about = "Coherent local explanations of optimization solvers")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample around the present problem, fit the selected methods and write all artifacts.
    Explain(ExplainArgs),
    /// Explanations of generated knapsack instances for every type, aggregated per method.
    BenchmarkKp(BenchmarkArgs),
    /// Feature-contribution stability over resampled datasets.
    Stability(StabilityArgs),
    /// Fit times on knapsacks of increasing size, with CLEMO loss traces.
    Runtime(RuntimeArgs),
    /// Write a generated or shipped instance as JSON.
    Generate(GenerateArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum ProblemKind {
    Spp,
    Kp,
    Cvrp,
}

#[derive(Args, Clone)]
struct ProblemArgs {
    #[arg(long, value_enum, default_value = "kp")]
    problem: ProblemKind,
    /// Instance JSON; overrides the generator.
    #[arg(long)]
    instance: Option<PathBuf>,
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u8).range(1..=4))]
    kp_type: u8,
    /// Knapsack items of the generated instance.
    #[arg(long, default_value_t = 25)]
    items: usize,
    /// Treat the knapsack box 0 ≤ x ≤ 1 as variable bounds, outside the feasibility term.
    #[arg(long)]
    kp_box_as_bounds: bool,
}

#[derive(Args, Clone)]
struct FitArgs {
    #[arg(long, default_value_t = 1000)]
    samples: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Comma-separated subset of dtr,lr,clemo.
    #[arg(long, value_delimiter = ',', default_value = "lr,clemo")]
    methods: Vec<String>,
    #[arg(long)]
    lambda_a1: Option<f64>,
    #[arg(long)]
    lambda_a2: Option<f64>,
    #[arg(long)]
    lambda_c1: Option<f64>,
    #[arg(long)]
    lambda_c2: Option<f64>,
    #[arg(long, default_value_t = clemo::surrogate::DEFAULT_TOL)]
    tol: f64,
    #[arg(long, default_value_t = clemo::surrogate::DEFAULT_MAX_ITER)]
    max_iter: usize,
    /// Worker threads (defaults to all cores).
    #[arg(long)]
    jobs: Option<usize>,
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Args)]
struct ExplainArgs {
    #[command(flatten)]
    problem: ProblemArgs,
    #[command(flatten)]
    fit: FitArgs,
}

#[derive(Args)]
struct BenchmarkArgs {
    #[command(flatten)]
    fit: FitArgs,
    /// Knapsack types to run (default: all four).
    #[arg(long = "kp-type", value_delimiter = ',')]
    kp_types: Vec<u8>,
    /// Instances per type.
    #[arg(long, default_value_t = 10)]
    instances: usize,
    #[arg(long, default_value_t = 25)]
    items: usize,
    /// Treat the knapsack box 0 ≤ x ≤ 1 as variable bounds, outside the feasibility term.
    #[arg(long)]
    kp_box_as_bounds: bool,
}

#[derive(Args)]
struct StabilityArgs {
    #[command(flatten)]
    problem: ProblemArgs,
    #[command(flatten)]
    fit: FitArgs,
    #[arg(long, default_value_t = 10)]
    resamples: usize,
    /// Reuse the base seed for every resample (degenerate check).
    #[arg(long)]
    same_seed: bool,
}

#[derive(Args)]
struct RuntimeArgs {
    #[command(flatten)]
    fit: FitArgs,
    #[arg(long, value_delimiter = ',', default_value = "5,10,20,40")]
    sizes: Vec<usize>,
}

#[derive(Args)]
struct GenerateArgs {
    #[command(flatten)]
    problem: ProblemArgs,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

impl FitArgs {
    fn methods(&self) -> anyhow::Result<Vec<Method>> {
        let mut m = self
            .methods
            .iter()
            .map(|s| s.parse::<Method>())
            .collect::<Result<Vec<_>, _>>()?;
        m.sort();
        m.dedup();
        Ok(m)
    }

    fn lambda(&self) -> LambdaOverrides {
        LambdaOverrides {
            a1: self.lambda_a1,
            a2: self.lambda_a2,
            c1: self.lambda_c1,
            c2: self.lambda_c2,
        }
    }

    fn clemo(&self) -> ClemoOptions {
        ClemoOptions {
            max_iter: self.max_iter,
            tol: self.tol,
        }
    }

    fn explain_config(&self, problem: &dyn Problem) -> anyhow::Result<ExplainConfig> {
        Ok(ExplainConfig {
            sampler: default_sampler(problem, self.samples, self.seed),
            methods: self.methods()?,
            lambda: self.lambda(),
            clemo: self.clemo(),
        })
    }
}

fn load_problem(args: &ProblemArgs, seed: u64) -> anyhow::Result<ProblemInstance> {
    if let Some(path) = &args.instance {
        return ProblemInstance::load(path)
            .with_context(|| format!("loading instance {}", path.display()));
    }
    Ok(match args.problem {
        ProblemKind::Spp => default_spp_problem(),
        ProblemKind::Kp => {
            let kind = KpType::from_index(args.kp_type)?;
            let kp = gen_kp(&KpGenConfig::new(kind, seed).with_items(args.items))?;
            ProblemInstance::Kp(kp.with_box_rows(!args.kp_box_as_bounds))
        }
        ProblemKind::Cvrp => ProblemInstance::Cvrp(gen_cvrp(&CvrpGenConfig::new(seed))?),
    })
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> anyhow::Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    fs::write(path, text + "\n").with_context(|| format!("writing {}", path.display()))
}

fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> anyhow::Result<()> {
    let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    Ok(write_rows(BufWriter::new(file), rows)?)
}

#[derive(Serialize)]
struct Manifest<'a> {
    command: &'a str,
    problem: &'a str,
    seed: u64,
    samples: usize,
    methods: Vec<String>,
    files: Vec<String>,
}

fn cmd_explain(args: &ExplainArgs) -> anyhow::Result<()> {
    let fit = &args.fit;
    let instance = load_problem(&args.problem, fit.seed)?;
    let problem = instance.as_problem();
    let cfg = fit.explain_config(problem)?;
    let present = problem.nominal();
    let outcome = run_explain(problem, &present, &cfg)?;

    let out = &fit.out;
    fs::create_dir_all(out)?;
    let mut files = Vec::new();
    let mut record = |name: &str| {
        files.push(name.to_string());
        out.join(name)
    };

    instance.save(&record("instance.json"))?;
    outcome
        .dataset
        .write_csv(BufWriter::new(File::create(record("dataset.csv"))?))?;
    if let Some(m) = &outcome.lr {
        m.save(&record("model_lr.json"))?;
    }
    if let Some(m) = &outcome.dtr {
        write_json(&record("model_dtr.json"), m)?;
    }
    if let Some(r) = &outcome.clemo {
        r.model.save(&record("model_clemo.json"))?;
        write_csv(&record("loss_trace_clemo.csv"), &TraceRow::from_trace(&r.loss_trace))?;
    }
    if let Some(l) = &outcome.lambda {
        write_json(&record("lambda.json"), l)?;
    }
    outcome
        .report
        .write_csv(File::create(record("report.csv"))?)?;
    fs::write(record("report.json"), outcome.report.to_json()? + "\n")?;

    let mut contributions = serde_json::Map::new();
    for (method, model) in outcome.linear_models() {
        let top = top_contributions(model, &present.values, 10)?;
        let per: serde_json::Map<String, serde_json::Value> = top
            .into_iter()
            .map(|(label, list)| Ok((label, serde_json::to_value(list)?)))
            .collect::<anyhow::Result<_>>()?;
        contributions.insert(method.to_string(), serde_json::Value::Object(per));
    }
    write_json(&record("contributions.json"), &contributions)?;

    if problem.num_params() == 1 {
        if let clemo::sampling::Perturbation::UniformInterval { lo, hi } = cfg.sampler.perturbation {
            let curve = objective_curve(problem, &outcome, lo, hi, 201)?;
            write_csv(&record("objective_curve.csv"), &curve)?;
        }
    }

    files.push("manifest.json".into());
    let manifest = Manifest {
        command: "explain",
        problem: problem.kind(),
        seed: fit.seed,
        samples: fit.samples,
        methods: cfg.methods.iter().map(|m| m.to_string()).collect(),
        files,
    };
    write_json(&out.join("manifest.json"), &manifest)?;
    for row in &outcome.report.rows {
        println!(
            "{:<6} acc_f={:.6e} acc_x={:.6e} inc_f={:.6e} inc_x={:.6e}",
            row.method,
            row.accuracy_objective,
            row.accuracy_decisions,
            row.incoherence_objective,
            row.incoherence_feasibility
        );
    }
    Ok(())
}

fn cmd_benchmark(args: &BenchmarkArgs) -> anyhow::Result<()> {
    let fit = &args.fit;
    let mut cfg = KpBenchmarkConfig::new(fit.seed);
    if !args.kp_types.is_empty() {
        cfg.types = args
            .kp_types
            .iter()
            .map(|&t| KpType::from_index(t))
            .collect::<Result<_, _>>()?;
    }
    cfg.instances = args.instances;
    cfg.items = args.items;
    cfg.samples = fit.samples;
    cfg.methods = fit.methods()?;
    cfg.lambda = fit.lambda();
    cfg.clemo = fit.clemo();
    cfg.box_rows = !args.kp_box_as_bounds;
    let runs = benchmark_kp(&cfg)?;
    let summary = summarize(&runs);

    fs::create_dir_all(&fit.out)?;
    write_json(&fit.out.join("runs.json"), &runs)?;
    write_csv(&fit.out.join("summary.csv"), &summary)?;
    for row in &summary {
        println!(
            "type {} {:<6} inc_f={:.4e} inc_x={:.4e} acc={:.4e}",
            row.kp_type,
            row.method,
            row.incoherence_objective_mean,
            row.incoherence_feasibility_mean,
            row.accuracy_objective_mean + row.accuracy_decisions_mean
        );
    }
    Ok(())
}

fn cmd_stability(args: &StabilityArgs) -> anyhow::Result<()> {
    let fit = &args.fit;
    let instance = load_problem(&args.problem, fit.seed)?;
    let problem = instance.as_problem();
    let cfg = fit.explain_config(problem)?;
    let outcomes = stability_study(
        problem,
        &problem.nominal(),
        &cfg,
        args.resamples,
        args.same_seed,
    )?;
    fs::create_dir_all(&fit.out)?;
    let rows: Vec<StabilityRow> = outcomes.iter().map(StabilityRow::from).collect();
    write_csv(&fit.out.join("stability.csv"), &rows)?;
    write_json(&fit.out.join("stability.json"), &outcomes)?;
    for r in &rows {
        println!(
            "{:<6} std={:.6e} normalized_std={:.6} fsi={:.4}",
            r.method, r.std, r.normalized_std, r.fsi
        );
    }
    Ok(())
}

fn cmd_runtime(args: &RuntimeArgs) -> anyhow::Result<()> {
    let fit = &args.fit;
    let outcome = runtime_study(&args.sizes, fit.samples, fit.seed, fit.lambda(), fit.clemo())?;
    fs::create_dir_all(&fit.out)?;
    write_csv(&fit.out.join("runtime.csv"), &outcome.rows)?;
    let traces: Vec<ConvergenceRow> = outcome
        .rows
        .iter()
        .zip(&outcome.traces)
        .flat_map(|(row, trace)| {
            trace.iter().enumerate().map(|(iteration, &total_loss)| ConvergenceRow {
                items: row.items,
                iteration,
                total_loss,
            })
        })
        .collect();
    write_csv(&fit.out.join("convergence.csv"), &traces)?;
    for r in &outcome.rows {
        println!(
            "items={:<3} dtr={:.4}s lr={:.4}s clemo={:.4}s ({} iterations)",
            r.items, r.dtr_seconds, r.lr_seconds, r.clemo_seconds, r.clemo_iterations
        );
    }
    Ok(())
}

fn cmd_generate(args: &GenerateArgs) -> anyhow::Result<()> {
    let instance = load_problem(&args.problem, args.seed)?;
    instance.save(&args.out)?;
    Ok(())
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let jobs = match &cli.command {
        Command::Explain(a) => a.fit.jobs,
        Command::BenchmarkKp(a) => a.fit.jobs,
        Command::Stability(a) => a.fit.jobs,
        Command::Runtime(a) => a.fit.jobs,
        Command::Generate(_) => None,
    };
    if let Some(j) = jobs {
        rayon::ThreadPoolBuilder::new()
            .num_threads(j.max(1))
            .build_global()
            .context("configuring worker threads")?;
    }
    match &cli.command {
        Command::Explain(a) => cmd_explain(a),
        Command::BenchmarkKp(a) => cmd_benchmark(a),
        Command::Stability(a) => cmd_stability(a),
        Command::Runtime(a) => cmd_runtime(a),
        Command::Generate(a) => cmd_generate(a),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            let infeasible = e
                .chain()
                .any(|c| c.downcast_ref::<ClemoError>().is_some_and(|c| c.is_infeasible()));
            ExitCode::from(if infeasible { 2 } else { 1 })
        }
    }
}
