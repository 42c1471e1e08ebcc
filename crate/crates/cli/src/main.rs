use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use robust_netloc::io::InstanceDocument;
use robust_netloc::model::{
    degree_stats, validate, LossFamily, LossSpec, Measurements, Network, Positions,
};
use robust_netloc::simulate::{
    generate_network, run_monte_carlo, sweep_huber_parameter, ExperimentConfig,
    GeneratorParams, NoiseModel,
};
use robust_netloc::solver::{minimize, InitStrategy, SolverConfig};
use serde_json::json;

const THREADS_ENV: &str = "ROBUST_NETLOC_THREADS";

/// Seed of the canonical 10-sensor network shipped with the crate.
const CANONICAL_SEED: u64 = 381;

#[derive(Debug, Parser)]
#[command(name = "robust-netloc", version, about = "Robust range-based sensor network localization")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a random geometric network with anchors at the corners of a box.
    Generate(GenerateArgs),
    /// Minimize the convex cost for one measurement set.
    Solve(SolveArgs),
    /// Run the Monte Carlo comparison of loss families.
    Montecarlo(MonteCarloArgs),
    /// Sweep the Huber radius R and compare against the baselines.
    #[command(name = "sweep-r")]
    SweepR(SweepArgs),
    /// Check a network or instance file for invariant violations.
    Validate(ValidateArgs),
}

#[derive(Debug, Clone, Copy)]
enum AnchorsArg {
    Corners,
    Count(usize),
}

impl FromStr for AnchorsArg {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == "corners" {
            return Ok(AnchorsArg::Corners);
        }
        s.parse()
            .map(AnchorsArg::Count)
            .map_err(|_| format!("expected 'corners' or an anchor count, got '{s}'"))
    }
}

#[derive(Debug, Clone, Copy)]
enum OutlierArg {
    None,
    /// 1-based sensor label.
    Node(usize),
}

impl FromStr for OutlierArg {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "none" | "0" => Ok(OutlierArg::None),
            _ => s
                .parse()
                .map(OutlierArg::Node)
                .map_err(|_| format!("expected a 1-based sensor number or 'none', got '{s}'")),
        }
    }
}

#[derive(Debug, Args)]
struct GenerateArgs {
    /// Number of sensors.
    #[arg(long, default_value_t = 10)]
    sensors: usize,
    /// Side of the deployment square, km.
    #[arg(long, default_value_t = 1.0)]
    side: f64,
    /// Anchors on the box corners: 'corners' (all of them) or a count.
    #[arg(long, default_value = "4")]
    anchors: AnchorsArg,
    /// Target average degree, counting sensor neighbors and anchor links.
    #[arg(long, default_value_t = 4.3)]
    degree: f64,
    /// Spatial dimension (2 or 3).
    #[arg(long, default_value_t = 2)]
    dim: usize,
    /// Generator seed; the default reproduces the canonical network.
    #[arg(long, default_value_t = CANONICAL_SEED)]
    seed: u64,
    /// Output network + truth JSON.
    #[arg(long)]
    out: PathBuf,
    /// Also sample one measurement set and write it here.
    #[arg(long)]
    measurements_out: Option<PathBuf>,
    #[command(flatten)]
    noise: NoiseArgs,
}

#[derive(Debug, Args)]
struct NoiseArgs {
    /// Standard deviation of regular range noise, km.
    #[arg(long, default_value_t = 0.04)]
    sigma: f64,
    /// Malfunctioning sensor, numbered from 1, or 'none'.
    #[arg(long, default_value = "7")]
    outlier_node: OutlierArg,
    /// Standard deviation of the malfunctioning sensor's noise, km.
    #[arg(long, default_value_t = 4.0)]
    outlier_sigma: f64,
    /// Bias mode: the malfunctioning sensor reports this fraction of every true distance.
    #[arg(long)]
    bias: Option<f64>,
    /// In bias mode, leave the malfunctioning sensor's anchor links unbiased.
    #[arg(long)]
    bias_sensors_only: bool,
}

impl NoiseArgs {
    fn model(&self) -> NoiseModel {
        NoiseModel {
            sigma_regular: self.sigma,
            outlier_node: match self.outlier_node {
                OutlierArg::None => None,
                OutlierArg::Node(k) => Some(k.saturating_sub(1)),
            },
            sigma_outlier: self.outlier_sigma,
            bias_mode: self.bias.is_some(),
            bias_factor: self.bias.unwrap_or(0.1),
            bias_anchor_links: !self.bias_sensors_only,
        }
    }
}

fn parse_families(s: &str) -> Result<Vec<LossFamily>, String> {
    s.split(',').map(str::parse).collect()
}

fn parse_grid(s: &str) -> Result<Vec<f64>, String> {
    s.split(',')
        .map(|v| v.trim().parse::<f64>().map_err(|e| format!("bad grid value '{v}': {e}")))
        .collect()
}

#[derive(Debug, Args)]
struct ExperimentArgs {
    /// Network JSON with a `truth` field (see `generate`).
    #[arg(long)]
    network: PathBuf,
    /// Number of Monte Carlo trials.
    #[arg(long, default_value_t = 100)]
    trials: usize,
    /// Master seed of the experiment.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Worker threads (0 = all cores); overrides ROBUST_NETLOC_THREADS.
    #[arg(long)]
    threads: Option<usize>,
    #[command(flatten)]
    noise: NoiseArgs,
}

#[derive(Debug, Args)]
struct MonteCarloArgs {
    #[command(flatten)]
    experiment: ExperimentArgs,
    /// Loss families to compare: quadratic|q, absolute|l1, huber.
    #[arg(long, default_value = "q,l1,huber", value_parser = parse_families)]
    families: std::vec::Vec<LossFamily>,
    /// Huber radius R, km.
    #[arg(long = "R", default_value_t = 0.1)]
    radius: f64,
    /// Writes PREFIX.report.json and PREFIX.summary.csv.
    #[arg(long, default_value = "montecarlo")]
    out_prefix: PathBuf,
}

#[derive(Debug, Args)]
struct SweepArgs {
    #[command(flatten)]
    experiment: ExperimentArgs,
    /// Huber radii to evaluate, km.
    #[arg(long, default_value = "0.02,0.05,0.1,0.2,0.4,0.8", value_parser = parse_grid)]
    grid: std::vec::Vec<f64>,
    /// Output CSV with columns R,family,epsilon_per_sensor_m.
    #[arg(long, default_value = "sweep.csv")]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct SolveArgs {
    /// Network (or full instance) JSON.
    #[arg(long)]
    network: PathBuf,
    /// Measurements JSON; ranges are read from the network file when omitted.
    #[arg(long)]
    measurements: Option<PathBuf>,
    /// Loss family.
    #[arg(long, default_value = "huber")]
    family: LossFamily,
    /// Huber radius R, km.
    #[arg(long = "R", default_value_t = 0.1)]
    radius: f64,
    /// Solver seed.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output estimate JSON.
    #[arg(long)]
    out: PathBuf,
    /// Fail when the solver does not converge.
    #[arg(long)]
    strict: bool,
}

#[derive(Debug, Args)]
struct ValidateArgs {
    #[arg(long)]
    network: PathBuf,
    #[arg(long)]
    measurements: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let usage = e.use_stderr();
            let _ = e.print();
            return if usage { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let result = match cli.command {
        Command::Generate(args) => generate(args),
        Command::Solve(args) => solve(args),
        Command::Montecarlo(args) => montecarlo(args),
        Command::SweepR(args) => sweep(args),
        Command::Validate(args) => validate_cmd(args),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn read_document(path: &Path) -> anyhow::Result<InstanceDocument> {
    InstanceDocument::read(path).with_context(|| format!("reading {}", path.display()))
}

fn write_file(path: &Path, contents: &str) -> anyhow::Result<()> {
    std::fs::write(path, contents).with_context(|| format!("writing {}", path.display()))
}

fn generate(args: GenerateArgs) -> anyhow::Result<ExitCode> {
    let anchors = match args.anchors {
        AnchorsArg::Corners => 1 << args.dim.min(3),
        AnchorsArg::Count(k) => k,
    };
    let params = GeneratorParams {
        sensors: args.sensors,
        side: args.side,
        anchors,
        target_degree: args.degree,
        dim: args.dim,
    };
    let (network, truth) = generate_network(&params, args.seed)?;
    InstanceDocument::from_network(&network)
        .with_truth(&truth)
        .write(&args.out)
        .with_context(|| format!("writing {}", args.out.display()))?;

    let stats = degree_stats(&network);
    println!(
        "{} sensors, {} anchors, {} edges, {} anchor links",
        network.sensors,
        network.anchor_count(),
        network.edges.len(),
        network.anchor_links.len()
    );
    println!(
        "average degree: {:.2} (sensor neighbors + anchor links), {:.2} (sensor neighbors only)",
        stats.average_combined, stats.average_sensor
    );

    if let Some(path) = &args.measurements_out {
        let noise = args.noise.model();
        if let Some(node) = noise.outlier_node {
            if node >= network.sensors {
                bail!("outlier node {} does not exist", node + 1);
            }
        }
        let measurements = robust_netloc::simulate::trial_measurements(&network, &truth, &noise, args.seed);
        InstanceDocument::from_network(&network)
            .with_measurements(&measurements)
            .write(path)
            .with_context(|| format!("writing {}", path.display()))?;
        println!("measurements written to {}", path.display());
    }
    Ok(ExitCode::SUCCESS)
}

fn load_network_with_truth(path: &Path) -> anyhow::Result<(Network, Positions)> {
    let parts = read_document(path)?.to_parts()?;
    let report = robust_netloc::model::validate_network(&parts.network);
    if !report.is_empty() {
        bail!("invalid network: {report}");
    }
    let truth = parts
        .truth
        .with_context(|| format!("{} has no `truth` positions", path.display()))?;
    Ok((parts.network, truth))
}

fn threads(flag: Option<usize>) -> anyhow::Result<usize> {
    if let Some(t) = flag {
        return Ok(t);
    }
    match std::env::var(THREADS_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .with_context(|| format!("{THREADS_ENV} must be a nonnegative integer, got '{v}'")),
        Err(_) => Ok(0),
    }
}

fn experiment(args: &ExperimentArgs, losses: Vec<LossSpec>) -> anyhow::Result<ExperimentConfig> {
    let (network, truth) = load_network_with_truth(&args.network)?;
    Ok(ExperimentConfig {
        trials: args.trials,
        losses,
        noise: args.noise.model(),
        master_seed: args.seed,
        threads: threads(args.threads)?,
        ..ExperimentConfig::new(network, truth)
    })
}

fn with_suffix(prefix: &Path, suffix: &str) -> PathBuf {
    let mut s = prefix.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn montecarlo(args: MonteCarloArgs) -> anyhow::Result<ExitCode> {
    let losses = args
        .families
        .iter()
        .map(|&f| LossSpec::new(f, args.radius))
        .collect();
    let config = experiment(&args.experiment, losses)?;
    let report = run_monte_carlo(&config)?;
    write_file(&with_suffix(&args.out_prefix, ".report.json"), &report.to_json()?)?;
    write_file(&with_suffix(&args.out_prefix, ".summary.csv"), &report.summary_csv())?;
    println!("{} trials, master seed {}", config.trials, config.master_seed);
    print!("{}", report.table());
    if !report.is_complete() {
        for f in &report.failures {
            eprintln!("trial {} failed: {}", f.trial, f.message);
        }
        return Ok(ExitCode::from(2));
    }
    Ok(ExitCode::SUCCESS)
}

fn sweep(args: SweepArgs) -> anyhow::Result<ExitCode> {
    let losses = vec![LossSpec::quadratic(), LossSpec::absolute()];
    let config = experiment(&args.experiment, losses)?;
    let curve = sweep_huber_parameter(&config, &args.grid)?;
    write_file(&args.out, &curve.to_csv())?;
    println!("{:>8} {:>10} {:>16}", "R [km]", "family", "eps/sensor [m]");
    for row in &curve.rows {
        println!("{:>8} {:>10} {:>16.2}", row.radius, row.family.name(), row.epsilon_per_sensor_m);
    }
    Ok(ExitCode::SUCCESS)
}

fn solve(args: SolveArgs) -> anyhow::Result<ExitCode> {
    let network_doc = read_document(&args.network)?;
    let mut doc = network_doc.clone();
    if let Some(path) = &args.measurements {
        let meas = read_document(path)?;
        let (a, b) = (network_doc.to_parts()?, meas.to_parts()?);
        if a.network.edges != b.network.edges || a.network.anchor_links != b.network.anchor_links {
            bail!("{} does not match the topology of {}", path.display(), args.network.display());
        }
        doc.ranges = meas.ranges;
        doc.anchor_ranges = meas.anchor_ranges;
    }
    if doc.ranges.is_none() && doc.anchor_ranges.is_none() {
        if !doc.edges.is_empty() || !doc.anchor_links.is_empty() {
            bail!("{} has no ranges; pass --measurements", args.network.display());
        }
        doc = doc.with_measurements(&Measurements::default());
    }
    let loss = LossSpec::new(args.family, args.radius);
    doc.loss = None;
    let instance = doc.to_instance(Some(loss.clone()))?;
    if instance.network.edges.is_empty() && instance.network.anchor_links.is_empty() {
        eprintln!("warning: the instance has no measurements; returning the initialization");
    }
    let mut config = SolverConfig::for_family(args.family).with_seed(args.seed);
    if instance.network.anchor_count() == 0 {
        config.init = InitStrategy::Given {
            positions: vec![0.0; instance.sensors() * instance.dim()],
        };
    }
    let result = minimize(&instance, args.family, &config)?;
    let out = json!({
        "unit": "km",
        "family": args.family,
        "R": (args.family == LossFamily::Huber).then_some(args.radius),
        "estimate": result.estimate.rows().collect::<Vec<_>>(),
        "final_cost": result.final_cost,
        "iterations": result.iterations,
        "converged": result.converged,
    });
    write_file(&args.out, &(serde_json::to_string_pretty(&out)? + "\n"))?;
    println!(
        "final cost {:e} after {} iterations ({})",
        result.final_cost,
        result.iterations,
        if result.converged { "converged" } else { "not converged" }
    );
    if args.strict && !result.converged {
        eprintln!("error: solver did not converge");
        return Ok(ExitCode::from(2));
    }
    Ok(ExitCode::SUCCESS)
}

fn validate_cmd(args: ValidateArgs) -> anyhow::Result<ExitCode> {
    let mut doc = read_document(&args.network)?;
    if let Some(path) = &args.measurements {
        let meas = read_document(path)?;
        doc.ranges = meas.ranges;
        doc.anchor_ranges = meas.anchor_ranges;
    }
    let parts = doc.to_parts()?;
    let report = match parts.measurements {
        Some(measurements) => validate(&robust_netloc::model::ProblemInstance {
            network: parts.network,
            measurements,
            loss: parts.loss.unwrap_or_default(),
        }),
        None => robust_netloc::model::validate_network(&parts.network),
    };
    if report.is_empty() {
        println!("ok");
        Ok(ExitCode::SUCCESS)
    } else {
        for v in &report.violations {
            println!("{v}");
        }
        Ok(ExitCode::from(2))
    }
}
