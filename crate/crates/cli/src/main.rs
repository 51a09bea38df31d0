use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use nmc_core::alloc::{alpha_allocation, optimal_allocation, predicted_rate};
use nmc_core::bounds::{bound_lipschitz, bound_single_exact, bound_smooth, BoundInputs, Smoothness};
use nmc_core::exec::with_workers;
use nmc_core::harness::{
    alpha_grid, bed_reference, cancer_reference, convergence_sweep, empirical_mse, model, nonincreasing_fit,
    parse_ladder, run_replicates, write_sweep_csv, write_sweep_text, ModelEntry, ModelOptions, Strategy, SweepConfig,
    Truth, DEFAULT_WINDOW,
};
use nmc_core::models::{CancerParams, DesignPoint};
use nmc_core::{make_stream, AllocationPlan, Execution, NmcError};

mod output;

use output::{fmt_float, join, sig12, write_outputs, Failure};

#[derive(Parser)]
#[command(name = "nmc", version, about = "Nested Monte Carlo estimation, MSE bounds and convergence sweeps")]
struct Cli {
    /// Worker threads (default: available cores).
    #[arg(long, global = true)]
    workers: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// One estimate of a registered model at a fixed plan.
    Estimate(EstimateArgs),
    /// Replicated convergence sweep over a budget ladder, written as CSV.
    Sweep(SweepArgs),
    /// Sample allocation for a total budget.
    Alloc(AllocArgs),
    /// Theoretical MSE bound for a plan.
    Bound(BoundArgs),
    /// Expected information gain of the delay-discounting design.
    Bed(BedArgs),
    /// Treated fraction of the tumour model against the treatment threshold.
    Cancer(CancerArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Text,
    Json,
    Csv,
}

#[derive(Args)]
struct CancerFlags {
    /// RK4 step size.
    #[arg(long)]
    t_step: Option<f64>,
    /// Simulated time horizon.
    #[arg(long)]
    t_max: Option<f64>,
    /// Operable tumour size.
    #[arg(long)]
    t_opp: Option<f64>,
    /// Initial carrying capacity.
    #[arg(long)]
    k0: Option<f64>,
}

impl CancerFlags {
    fn apply(&self, mut p: CancerParams) -> CancerParams {
        if let Some(v) = self.t_step {
            p.t_step = v;
        }
        if let Some(v) = self.t_max {
            p.t_max = v;
        }
        if let Some(v) = self.t_opp {
            p.t_opp = v;
        }
        if let Some(v) = self.k0 {
            p.k0 = v;
        }
        p
    }
}

#[derive(Args)]
struct ModelFlags {
    /// Treatment threshold for the cancer model.
    #[arg(long)]
    t_treat: Option<f64>,
    #[command(flatten)]
    cancer: CancerFlags,
    /// Design amount A for the BED models.
    #[arg(long = "A")]
    a: Option<f64>,
    /// Design amount B for the BED models.
    #[arg(long = "B")]
    b: Option<f64>,
    /// Design delay D for the BED models.
    #[arg(long = "D")]
    delay: Option<f64>,
    /// Proposal scale for the iwae model.
    #[arg(long)]
    sigma: Option<f64>,
    /// Replace the BED likelihood by a constant (the information gain is then 0).
    #[arg(long)]
    constant_likelihood: Option<f64>,
}

impl ModelFlags {
    fn options(&self) -> Result<ModelOptions, NmcError> {
        let mut o = ModelOptions::default();
        o.cancer = self.cancer.apply(o.cancer);
        if let Some(t) = self.t_treat {
            o.cancer = o.cancer.with_t_treat(t);
        }
        o.cancer.validate()?;
        o.design =
            DesignPoint::new(self.a.unwrap_or(o.design.a), self.b.unwrap_or(o.design.b), self.delay.unwrap_or(o.design.delay))?;
        if let Some(s) = self.sigma {
            o.sigma = s;
        }
        o.constant_likelihood = self.constant_likelihood;
        Ok(o)
    }
}

#[derive(Args)]
struct EstimateArgs {
    #[arg(long)]
    model: String,
    /// Counts per level, outermost first, e.g. 10000,100.
    #[arg(long, value_delimiter = ',', value_parser = parse_count, required = true)]
    plan: Vec<u64>,
    #[arg(long)]
    seed: u64,
    #[arg(long, value_enum, default_value_t = Format::Text)]
    format: Format,
    #[command(flatten)]
    flags: ModelFlags,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long)]
    model: String,
    /// equal, squared, fixed_inner(M) or alpha(a1,...); repeatable.
    #[arg(long = "strategy", required = true)]
    strategies: Vec<String>,
    /// lo:hi:ratio, ratio may be sqrt10.
    #[arg(long)]
    ladder: String,
    #[arg(long, default_value_t = 100)]
    replicates: u64,
    #[arg(long)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    /// Optional key=value report next to the CSV.
    #[arg(long)]
    text: Option<PathBuf>,
    /// Fraction of the largest ladder points used by the slope fit.
    #[arg(long, default_value_t = DEFAULT_WINDOW)]
    window: f64,
    /// Plan of the self-reference run for models without a known truth.
    #[arg(long, value_delimiter = ',', value_parser = parse_count)]
    reference: Vec<u64>,
    #[command(flatten)]
    flags: ModelFlags,
}

#[derive(Args)]
#[group(required = true, multiple = false)]
struct AllocRule {
    #[arg(long)]
    smooth: bool,
    #[arg(long)]
    lipschitz: bool,
    /// Budget exponents, one per nesting level.
    #[arg(long, value_delimiter = ',')]
    alpha: Option<Vec<f64>>,
}

#[derive(Args)]
struct AllocArgs {
    #[arg(long, value_parser = parse_count)]
    budget: u64,
    #[arg(long)]
    depth: Option<usize>,
    #[command(flatten)]
    rule: AllocRule,
    #[arg(long, value_enum, default_value_t = Format::Text)]
    format: Format,
    /// Accepted for uniformity; allocation is deterministic.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
#[group(required = true, multiple = false)]
struct SmoothnessFlag {
    #[arg(long)]
    smooth: bool,
    #[arg(long)]
    lipschitz: bool,
}

impl SmoothnessFlag {
    fn get(&self) -> Smoothness {
        if self.smooth {
            Smoothness::ContinuouslyDifferentiable
        } else {
            Smoothness::Lipschitz
        }
    }
}

#[derive(Args)]
struct BoundArgs {
    /// Lipschitz constants K_0..K_{D-1}.
    #[arg(long = "K", value_delimiter = ',', required = true)]
    k: Vec<f64>,
    /// Second-derivative bounds C_0..C_{D-1}.
    #[arg(long = "C", value_delimiter = ',')]
    c: Option<Vec<f64>>,
    /// Standard deviations sigma_0..sigma_D.
    #[arg(long, value_delimiter = ',', required = true)]
    sigma: Vec<f64>,
    #[arg(long, value_delimiter = ',', value_parser = parse_count, required = true)]
    plan: Vec<u64>,
    /// Single-nesting bound without the leading-order simplification.
    #[arg(long)]
    exact_single: bool,
    #[command(flatten)]
    smoothness: SmoothnessFlag,
    /// Accepted for uniformity; bounds are deterministic.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Clone, Copy, ValueEnum)]
enum BedEstimator {
    Naive,
    Reform,
}

#[derive(Args)]
#[group(required = true, multiple = false)]
struct DesignAxis {
    #[arg(long = "A")]
    a: Option<f64>,
    /// lo:hi:step grid of A values.
    #[arg(long = "A-grid")]
    a_grid: Option<String>,
}

#[derive(Args)]
struct BedArgs {
    #[command(flatten)]
    axis: DesignAxis,
    #[arg(long, value_enum)]
    estimator: BedEstimator,
    #[arg(long = "N", value_parser = parse_count)]
    n: u64,
    #[arg(long = "M", value_parser = parse_count)]
    m: Option<u64>,
    #[arg(long, default_value_t = 1)]
    replicates: u64,
    #[arg(long)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    #[arg(long = "B", default_value_t = 100.0)]
    b: f64,
    #[arg(long = "D", default_value_t = 50.0)]
    delay: f64,
    #[arg(long)]
    constant_likelihood: Option<f64>,
}

#[derive(Args)]
struct CancerArgs {
    #[arg(long, conflicts_with = "t_treat_grid")]
    t_treat: Option<f64>,
    /// lo:hi:step grid of thresholds in [0, 1].
    #[arg(long)]
    t_treat_grid: Option<String>,
    #[arg(long, value_delimiter = ',', value_parser = parse_count, default_value = "100,100")]
    plan: Vec<u64>,
    #[arg(long, default_value_t = 20)]
    replicates: u64,
    #[arg(long)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    /// Budget ladder; switches to a convergence sweep at a single threshold.
    #[arg(long, conflicts_with = "t_treat_grid")]
    ladder: Option<String>,
    #[arg(long = "strategy")]
    strategies: Vec<String>,
    #[arg(long, value_delimiter = ',', value_parser = parse_count)]
    reference: Vec<u64>,
    #[command(flatten)]
    flags: CancerFlags,
}

/// Counts may be written as integers or in scientific notation ("1e6").
fn parse_count(s: &str) -> Result<u64, String> {
    if let Ok(n) = s.parse::<u64>() {
        return Ok(n);
    }
    let x: f64 = s.parse().map_err(|_| format!("'{s}' is not a count"))?;
    if x >= 0.0 && x.fract() == 0.0 && x < 1.8e19 {
        Ok(x as u64)
    } else {
        Err(format!("'{s}' is not a non-negative integer"))
    }
}

fn parse_grid(s: &str) -> Result<Vec<f64>, NmcError> {
    let parts: Vec<&str> = s.split(':').collect();
    let bad = || NmcError::Parse(format!("grid '{s}' is not lo:hi:step"));
    if parts.len() != 3 {
        return Err(bad());
    }
    let v: Vec<f64> = parts.iter().map(|p| p.trim().parse::<f64>().map_err(|_| bad())).collect::<Result<_, _>>()?;
    alpha_grid(v[0], v[1], v[2])
}

fn parse_strategies(labels: &[String]) -> Result<Vec<Strategy>, NmcError> {
    labels.iter().map(|l| l.parse()).collect()
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let workers = match cli.workers {
        Some(0) => {
            eprintln!("error: --workers must be at least 1");
            return ExitCode::from(2);
        }
        Some(w) => w,
        None => std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1),
    };
    match with_workers(workers, || run(cli.command)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}

fn run(command: Command) -> Result<(), Failure> {
    match command {
        Command::Estimate(a) => estimate(a),
        Command::Sweep(a) => sweep(a),
        Command::Alloc(a) => alloc(a),
        Command::Bound(a) => bound(a),
        Command::Bed(a) => bed(a),
        Command::Cancer(a) => cancer(a),
    }
}

fn check_arity(entry: &ModelEntry, plan: &AllocationPlan) -> Result<(), NmcError> {
    let depth = entry.estimator.depth();
    if plan.counts().len() != depth + 1 {
        return Err(NmcError::Shape {
            expected: format!("{} plan counts for model '{}'", depth + 1, entry.name),
            got: plan.counts().len().to_string(),
        });
    }
    Ok(())
}

fn estimate(a: EstimateArgs) -> Result<(), Failure> {
    let entry = model(&a.model, &a.flags.options()?)?;
    let plan = AllocationPlan::manual(a.plan)?;
    check_arity(&entry, &plan)?;
    let record = entry.estimator.estimate(&plan, &mut make_stream(a.seed, &[]))?;
    match a.format {
        Format::Json => println!("{}", serde_json::to_string(&record).map_err(|e| Failure::Runtime(e.to_string()))?),
        Format::Text | Format::Csv => println!(
            "value={} plan={} effective={} seed={} model={}",
            fmt_float(record.value),
            join(record.plan.counts()),
            record.effective_budget,
            record.base_seed,
            entry.name
        ),
    }
    Ok(())
}

/// Known truth of the model, or a fixed-seed self-reference run.
fn resolve_truth(entry: &ModelEntry, options: &ModelOptions, reference: &[u64], seed: u64) -> Result<Truth, NmcError> {
    if let Some(t) = entry.truth {
        return Ok(t);
    }
    match entry.name.as_str() {
        "cancer" => {
            let (n, m) = match reference {
                [] => (1000, 1000),
                [n, m] => (*n, *m),
                _ => return Err(NmcError::Shape { expected: "--reference N,M".into(), got: join(reference) }),
            };
            cancer_reference(&options.cancer, n, m, seed, Execution::Parallel)
        }
        "bed-naive" | "bed-reform" => {
            let n = match reference {
                [] => 10_000_000,
                [n] => *n,
                _ => return Err(NmcError::Shape { expected: "--reference N".into(), got: join(reference) }),
            };
            bed_reference(&options.design, n, seed)
        }
        other => Err(NmcError::Unsupported(format!("no truth available for model '{other}'"))),
    }
}

fn run_sweep(
    entry: &ModelEntry,
    options: &ModelOptions,
    strategies: &[String],
    ladder: &str,
    replicates: u64,
    seed: u64,
    window: f64,
    reference: &[u64],
) -> Result<nmc_core::harness::SweepReport, NmcError> {
    let mut config = SweepConfig::new(parse_strategies(strategies)?, parse_ladder(ladder)?, replicates, seed)?;
    config.window = window;
    config.validate()?;
    let truth = resolve_truth(entry, options, reference, seed)?;
    convergence_sweep(&entry.name, entry.estimator.as_ref(), truth, &config)
}

fn sweep_files(report: &nmc_core::harness::SweepReport, out: &Path, text: Option<&Path>, seed: u64) -> Result<(), Failure> {
    let mut csv = Vec::new();
    write_sweep_csv(report, &mut csv).map_err(|e| Failure::Runtime(e.to_string()))?;
    let mut files = vec![(out.to_path_buf(), csv)];
    if let Some(path) = text {
        let mut doc = Vec::new();
        write_sweep_text(report, &mut doc).map_err(|e| Failure::Runtime(e.to_string()))?;
        files.push((path.to_path_buf(), doc));
    }
    write_outputs(&files, seed)
}

fn sweep(a: SweepArgs) -> Result<(), Failure> {
    let options = a.flags.options()?;
    let entry = model(&a.model, &options)?;
    let report = run_sweep(&entry, &options, &a.strategies, &a.ladder, a.replicates, a.seed, a.window, &a.reference)?;
    sweep_files(&report, &a.out, a.text.as_deref(), a.seed)?;
    for (label, fit) in &report.slopes {
        match fit {
            Some(f) => println!("{label} slope={:.4} stderr={:.4}", f.slope, f.stderr),
            None => println!("{label} slope=none"),
        }
    }
    Ok(())
}

fn alloc(a: AllocArgs) -> Result<(), Failure> {
    let (plan, rate) = match &a.rule.alpha {
        Some(alphas) => {
            if let Some(d) = a.depth.filter(|d| *d != alphas.len()) {
                return Err(Failure::Usage(format!("--depth {d} does not match {} alpha values", alphas.len())));
            }
            (alpha_allocation(a.budget, alphas)?, None)
        }
        None => {
            let depth = a.depth.ok_or_else(|| Failure::Usage("--depth is required with --smooth/--lipschitz".into()))?;
            let s = if a.rule.smooth { Smoothness::ContinuouslyDifferentiable } else { Smoothness::Lipschitz };
            (optimal_allocation(a.budget, depth, s)?, Some(predicted_rate(depth, s)))
        }
    };
    let effective = plan.effective_budget()?;
    match a.format {
        Format::Csv => {
            let n: Vec<String> = (0..plan.counts().len()).map(|i| format!("N{i}")).collect();
            println!("T,{},effective_budget,rate", n.join(","));
            let rate = rate.map(|r| r.to_string()).unwrap_or_default();
            println!("{},{},{effective},{rate}", a.budget, join(plan.counts()));
        }
        Format::Text | Format::Json => match rate {
            Some(r) => println!("{} rate={r} effective={effective}", join(plan.counts())),
            None => println!("{} effective={effective}", join(plan.counts())),
        },
    }
    Ok(())
}

fn bound(a: BoundArgs) -> Result<(), Failure> {
    let inputs = BoundInputs::new(a.k, a.c, a.sigma)?;
    let smoothness = a.smoothness.get();
    let value = if a.exact_single {
        match a.plan[..] {
            [n0, n1] => bound_single_exact(&inputs, n0, n1, smoothness)?,
            _ => return Err(Failure::Usage("--exact-single needs a plan N,M".into())),
        }
    } else {
        let plan = AllocationPlan::manual(a.plan)?;
        match smoothness {
            Smoothness::Lipschitz => bound_lipschitz(&inputs, &plan)?,
            Smoothness::ContinuouslyDifferentiable => bound_smooth(&inputs, &plan)?,
        }
    };
    println!("{}", sig12(value));
    Ok(())
}

fn bed(a: BedArgs) -> Result<(), Failure> {
    let values = match (&a.axis.a, &a.axis.a_grid) {
        (Some(v), _) => vec![*v],
        (None, Some(g)) => parse_grid(g)?,
        (None, None) => unreachable!("clap enforces the group"),
    };
    let (name, counts) = match (a.estimator, a.m) {
        (BedEstimator::Naive, Some(m)) => ("bed-naive", vec![a.n, m]),
        (BedEstimator::Naive, None) => return Err(Failure::Usage("the naive estimator needs --M".into())),
        (BedEstimator::Reform, _) => ("bed-reform", vec![a.n]),
    };
    let plan = AllocationPlan::manual(counts)?;
    let m = a.m.filter(|_| name == "bed-naive").map(|m| m.to_string()).unwrap_or_default();
    let mut csv = String::from("A,estimator,N,M,replicate,estimate\n");
    let mut failed = 0;
    for &av in &values {
        let options = ModelOptions {
            design: DesignPoint::new(av, a.b, a.delay)?,
            constant_likelihood: a.constant_likelihood,
            ..ModelOptions::default()
        };
        let entry = model(name, &options)?;
        let run = run_replicates(entry.estimator.as_ref(), &plan, a.replicates, a.seed, Execution::Parallel)?;
        failed += run.failures.len();
        for rec in &run.records {
            csv.push_str(&format!(
                "{},{},{},{m},{},{}\n",
                fmt_float(av),
                &name[4..],
                a.n,
                rec.stream_path[0],
                fmt_float(rec.value)
            ));
        }
    }
    write_outputs(&[(a.out.clone(), csv.into_bytes())], a.seed)?;
    println!("points={} replicates={} failures={failed}", values.len(), a.replicates);
    Ok(())
}

fn cancer(a: CancerArgs) -> Result<(), Failure> {
    let params = a.flags.apply(CancerParams::default());
    if let Some(ladder) = &a.ladder {
        let options = ModelOptions { cancer: params.with_t_treat(a.t_treat.unwrap_or(0.35)), ..ModelOptions::default() };
        options.cancer.validate()?;
        let entry = model("cancer", &options)?;
        let labels = if a.strategies.is_empty() { vec!["equal".to_string()] } else { a.strategies.clone() };
        let report = run_sweep(&entry, &options, &labels, ladder, a.replicates, a.seed, DEFAULT_WINDOW, &a.reference)?;
        return sweep_files(&report, &a.out, None, a.seed);
    }
    let grid = match (a.t_treat, &a.t_treat_grid) {
        (Some(t), _) => vec![t],
        (None, Some(g)) => parse_grid(g)?,
        (None, None) => vec![params.t_treat],
    };
    if let Some(t) = grid.iter().find(|t| !(0.0..=1.0).contains(*t)) {
        return Err(Failure::Usage(format!("threshold {t} is outside [0, 1]")));
    }
    let plan = AllocationPlan::manual(a.plan.clone())?;
    let mut rows = Vec::new();
    for &t in &grid {
        let options = ModelOptions { cancer: params.clone().with_t_treat(t), ..ModelOptions::default() };
        options.cancer.validate()?;
        let entry = model("cancer", &options)?;
        check_arity(&entry, &plan)?;
        let run = run_replicates(entry.estimator.as_ref(), &plan, a.replicates, a.seed, Execution::Parallel)?;
        let values = run.values();
        let stats = empirical_mse(&values, 0.0)?;
        let se = if values.len() > 1 { stats.se_mean } else { 0.0 };
        rows.push((t, run.failures.len(), stats.mean, se));
    }
    let means: Vec<f64> = rows.iter().map(|r| r.2).collect();
    let fit = nonincreasing_fit(&means);
    let mut csv = String::from("t_treat,N0,N1,replicates,failures,mean,se_mean,isotonic\n");
    let mut worst: f64 = 0.0;
    for ((t, failed, mean, se), f) in rows.iter().zip(&fit) {
        let gap = (mean - f).abs();
        worst = worst.max(if gap == 0.0 { 0.0 } else { gap / se });
        csv.push_str(&format!(
            "{},{},{},{},{failed},{},{},{}\n",
            fmt_float(*t),
            plan.counts()[0],
            plan.counts()[1],
            a.replicates,
            fmt_float(*mean),
            fmt_float(*se),
            fmt_float(*f)
        ));
    }
    write_outputs(&[(a.out.clone(), csv.into_bytes())], a.seed)?;
    println!("points={} nonincreasing={} max_gap_se={worst:.3}", grid.len(), worst <= 2.0);
    Ok(())
}
