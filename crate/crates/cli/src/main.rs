use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use bankfair_core::allocator::AllocationPlan;
use bankfair_core::domain::io::{
    load_arrivals, load_catalog, load_scores, write_arrivals, write_catalog, write_scores, DataFormat,
};
use bankfair_core::metrics::MetricSummary;
use bankfair_core::reranker::{dual_csv, run_session, run_session_with, Policy, SessionOptions};
use bankfair_core::session_log::{read_log, recompute_metrics, write_log};
use bankfair_core::synthetic::{generate_dataset, ScoreDistribution, SyntheticSpec, TrafficPattern};
use bankfair_core::{Dataset, Error, Result, RunConfig};
use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;

#[derive(Parser, Debug)]
#[command(name = "bankfair", version, about = "Two-sided fair re-ranking experiments")]
struct Cli {
    /// `key = value` file of run settings; flags override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Seed for synthetic data and the run.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,
    /// Worker threads for sweeps (0 = all cores).
    #[arg(long, global = true, default_value_t = 0)]
    jobs: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write a synthetic dataset (scores, catalog, arrivals).
    Generate(GenerateArgs),
    /// Run one session and write its log and metrics.
    Simulate(SimulateArgs),
    /// Run a lambda x delta grid and write the frontier table.
    Sweep(SweepArgs),
    /// Run one session and write the per-interval exposure plan.
    Allocate(AllocateArgs),
    /// Recompute metrics from a stored log.
    Metrics(MetricsArgs),
}

#[derive(Args, Debug)]
struct GenerateArgs {
    #[arg(long, default_value_t = 1000)]
    users: usize,
    #[arg(long, default_value_t = 500)]
    items: usize,
    #[arg(long, default_value_t = 20)]
    providers: usize,
    /// Interval count; defaults to the config's N.
    #[arg(long)]
    intervals: Option<usize>,
    /// Total arrivals; defaults to one per user.
    #[arg(long)]
    arrivals: Option<usize>,
    #[arg(long, default_value = "beta-skewed")]
    score_distribution: ScoreDistribution,
    /// Zipf exponent of provider catalog sizes.
    #[arg(long, default_value_t = 1.0)]
    skew: f64,
    #[arg(long, default_value = "sinusoidal")]
    traffic: TrafficPattern,
    #[arg(long, default_value = "csv")]
    format: DataFormat,
}

#[derive(Args, Debug, Clone)]
struct DataArgs {
    /// Directory holding scores, catalog and arrivals files (.csv or .jsonl).
    /// Without any data flag the reference synthetic dataset is generated.
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long)]
    scores: Option<PathBuf>,
    #[arg(long)]
    catalog: Option<PathBuf>,
    #[arg(long)]
    arrivals: Option<PathBuf>,
    /// Derive provider merit from relevance mass instead of catalog share.
    #[arg(long)]
    relevance_merit: bool,
}

#[derive(Args, Debug)]
struct RunArgs {
    #[arg(long, default_value = "bankfair_plus")]
    policy: Policy,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    delta: Option<f64>,
    /// Extra `key=value` settings, applied after the config file.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Args, Debug)]
struct SimulateArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    run: RunArgs,
    /// Also write the dual price trajectory.
    #[arg(long)]
    duals: bool,
}

#[derive(Args, Debug)]
struct SweepArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    run: RunArgs,
    #[arg(long, value_delimiter = ',', required = true)]
    lambdas: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_value = "1")]
    deltas: Vec<f64>,
    /// Repetition `r` uses seed + r.
    #[arg(long, default_value_t = 1)]
    repetitions: u64,
}

#[derive(Args, Debug)]
struct AllocateArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    run: RunArgs,
}

#[derive(Args, Debug)]
struct MetricsArgs {
    #[command(flatten)]
    data: DataArgs,
    /// Session log JSONL.
    #[arg(long)]
    log: PathBuf,
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_input_error() { 2 } else { 1 })
        }
    }
}

fn run(cli: &Cli) -> Result<()> {
    let config = base_config(cli)?;
    create_dir(&cli.out)?;
    match &cli.command {
        Command::Generate(args) => generate(cli, &config, args),
        Command::Simulate(args) => simulate(cli, &config, args),
        Command::Sweep(args) => sweep(cli, &config, args),
        Command::Allocate(args) => allocate(cli, &config, args),
        Command::Metrics(args) => metrics(cli, &config, args),
    }
}

/// Parses `key = value` lines; `#` starts a comment.
fn read_config(path: &Path, config: &mut RunConfig) -> Result<()> {
    let text = fs::read_to_string(path).map_err(|source| Error::Io { path: path.to_owned(), source })?;
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let parse_err = |message: String| Error::Parse { path: path.to_owned(), line: n + 1, message };
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| parse_err(format!("expected `key = value`, got `{line}`")))?;
        config.set(key, value).map_err(|e| parse_err(e.to_string()))?;
    }
    Ok(())
}

fn base_config(cli: &Cli) -> Result<RunConfig> {
    let mut config = RunConfig::default();
    if let Some(path) = &cli.config {
        read_config(path, &mut config)?;
    }
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    Ok(config)
}

fn apply_overrides(config: &RunConfig, sets: &[String], lambda: Option<f64>, delta: Option<f64>) -> Result<RunConfig> {
    let mut config = config.clone();
    for kv in sets {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| Error::Validation(format!("--set expects KEY=VALUE, got `{kv}`")))?;
        config.set(k, v)?;
    }
    if let Some(l) = lambda {
        config.lambda = l;
    }
    if let Some(d) = delta {
        config.delta = d;
    }
    config.validated()
}

fn run_config(config: &RunConfig, args: &RunArgs) -> Result<RunConfig> {
    apply_overrides(config, &args.set, args.lambda, args.delta)
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|source| Error::Io { path: dir.to_owned(), source })
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|source| Error::Io { path: path.to_owned(), source })?;
    log::info!("wrote {}", path.display());
    Ok(())
}

/// `dir/stem.csv`, or `dir/stem.jsonl` when only that exists.
fn find_file(dir: &Path, stem: &str) -> PathBuf {
    let jsonl = dir.join(format!("{stem}.jsonl"));
    let csv = dir.join(format!("{stem}.csv"));
    if !csv.exists() && jsonl.exists() {
        jsonl
    } else {
        csv
    }
}

fn load_dataset(args: &DataArgs, config: &RunConfig) -> Result<Dataset> {
    let explicit = args.data.is_some() || args.scores.is_some() || args.catalog.is_some() || args.arrivals.is_some();
    if !explicit {
        let spec = SyntheticSpec { seed: config.seed, intervals: config.intervals, ..Default::default() };
        return generate_dataset(&spec);
    }
    let dir = args.data.clone().unwrap_or_else(|| PathBuf::from("."));
    let path = |given: &Option<PathBuf>, stem| given.clone().unwrap_or_else(|| find_file(&dir, stem));
    let (scores, catalog, arrivals) =
        (path(&args.scores, "scores"), path(&args.catalog, "catalog"), path(&args.arrivals, "arrivals"));
    let store = load_scores(&scores, DataFormat::from_path(&scores))?;
    let mut catalog_data = load_catalog(&catalog, DataFormat::from_path(&catalog))?;
    if args.relevance_merit {
        catalog_data = catalog_data.with_relevance_merit(&store)?;
    }
    let schedule = load_arrivals(&arrivals, DataFormat::from_path(&arrivals), None)?;
    Dataset::new(store, catalog_data, schedule)
}

fn generate(cli: &Cli, config: &RunConfig, args: &GenerateArgs) -> Result<()> {
    let spec = SyntheticSpec {
        users: args.users,
        items: args.items,
        providers: args.providers,
        intervals: args.intervals.unwrap_or(config.intervals),
        arrivals: args.arrivals,
        score_distribution: args.score_distribution,
        provider_size_skew: args.skew,
        traffic_pattern: args.traffic,
        seed: config.seed,
        ..Default::default()
    };
    let ds = generate_dataset(&spec)?;
    let ext = match args.format {
        DataFormat::Csv => "csv",
        DataFormat::Jsonl => "jsonl",
    };
    let file = |stem: &str| cli.out.join(format!("{stem}.{ext}"));
    write_scores(&file("scores"), args.format, ds.store())?;
    write_catalog(&file("catalog"), args.format, ds.catalog())?;
    write_arrivals(&file("arrivals"), args.format, ds.schedule())?;
    println!(
        "generated {} users, {} items, {} providers, {} arrivals over {} intervals",
        ds.store().users().len(),
        ds.catalog().num_items(),
        ds.catalog().num_providers(),
        ds.schedule().len(),
        ds.schedule().interval_count()
    );
    Ok(())
}

fn print_metrics(metrics: &MetricSummary) {
    let line: Vec<String> = metrics.rows().iter().map(|(name, v)| format!("{name}={v:.6}")).collect();
    println!("{}", line.join(" "));
}

fn simulate(cli: &Cli, config: &RunConfig, args: &SimulateArgs) -> Result<()> {
    let config = run_config(config, &args.run)?;
    let ds = load_dataset(&args.data, &config)?;
    let options = SessionOptions { record_duals: args.duals };
    let log = run_session_with(&ds, &config, args.run.policy, options)?;

    let log_path = cli.out.join("log.jsonl");
    let mut out = Vec::new();
    write_log(&mut out, &log, &ds).map_err(|source| Error::Io { path: log_path.clone(), source })?;
    write_file(&log_path, &String::from_utf8(out).expect("json is utf-8"))?;
    write_file(&cli.out.join("metrics.csv"), &log.metrics.to_csv(log.k))?;
    if let Some(csv) = dual_csv(&log, &ds) {
        write_file(&cli.out.join("duals.csv"), &csv)?;
    }
    print_metrics(&log.metrics);
    Ok(())
}

fn sweep(cli: &Cli, config: &RunConfig, args: &SweepArgs) -> Result<()> {
    let base = run_config(config, &args.run)?;
    if args.repetitions == 0 {
        return Err(Error::Validation("repetitions must be at least 1".into()));
    }
    let mut lambdas = args.lambdas.clone();
    let mut deltas = args.deltas.clone();
    lambdas.sort_by(f64::total_cmp);
    deltas.sort_by(f64::total_cmp);
    let mut points = Vec::new();
    for &lambda in &lambdas {
        for &delta in &deltas {
            for r in 0..args.repetitions {
                let config = RunConfig { lambda, delta, seed: base.seed.wrapping_add(r), ..base.clone() };
                points.push(config.validated()?);
            }
        }
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cli.jobs)
        .build()
        .map_err(|e| Error::Validation(format!("cannot start {} workers: {e}", cli.jobs)))?;
    let policy = args.run.policy;
    let rows: Vec<Result<String>> = pool.install(|| {
        points
            .par_iter()
            .map(|config| {
                let ds = load_dataset(&args.data, config)?;
                let m = run_session(&ds, config, policy)?.metrics;
                log::info!("lambda={} delta={} seed={} done", config.lambda, config.delta, config.seed);
                Ok(format!(
                    "{},{},{},{},{},{},{}\n",
                    config.lambda, config.delta, m.ndcg_mean, m.esp, m.gini, m.mmr, m.var
                ))
            })
            .collect()
    });
    let mut csv = String::from("lambda,delta,ndcg_mean,esp,gini,mmr,var\n");
    for row in rows {
        csv.push_str(&row?);
    }
    write_file(&cli.out.join("frontier.csv"), &csv)?;
    println!("{} sweep points written", points.len());
    Ok(())
}

fn plan_rows(plans: &[AllocationPlan], providers: &[String]) -> String {
    let mut csv = String::from("provider_id,interval,demand,allocation,estate_before\n");
    for plan in plans {
        for (p, id) in providers.iter().enumerate() {
            let demand = plan.demand[p].first().copied().unwrap_or(0.0);
            csv.push_str(&format!(
                "{id},{},{demand},{},{}\n",
                plan.interval, plan.current_target[p], plan.estate[p]
            ));
        }
    }
    csv
}

fn allocate(cli: &Cli, config: &RunConfig, args: &AllocateArgs) -> Result<()> {
    let config = run_config(config, &args.run)?;
    let ds = load_dataset(&args.data, &config)?;
    let log = run_session(&ds, &config, args.run.policy)?;
    write_file(&cli.out.join("allocation.csv"), &plan_rows(&log.plans, ds.catalog().providers()))?;
    println!("{} intervals planned for {} providers", log.plans.len(), ds.catalog().num_providers());
    Ok(())
}

fn metrics(cli: &Cli, config: &RunConfig, args: &MetricsArgs) -> Result<()> {
    let config = apply_overrides(config, &args.set, None, None)?;
    let ds = load_dataset(&args.data, &config)?;
    let stored = read_log(&args.log)?;
    let metrics = recompute_metrics(&stored, &ds, &config)?;
    write_file(&cli.out.join("metrics.csv"), &metrics.to_csv(stored.summary.k))?;
    if metrics != stored.summary.metrics() {
        log::warn!("recomputed metrics differ from the log summary");
    }
    print_metrics(&metrics);
    Ok(())
}
