//! Experiment networks, noise models and the Monte Carlo harness.
//!
//! A trial samples one set of range measurements from the true positions and
//! then solves the convex problem once per loss under comparison, on those
//! same measurements. Trials are independent: trial `t` draws everything from
//! its own seed, taken from a stream seeded by the experiment's master seed,
//! so a report depends only on the configuration and not on how trials are
//! scheduled across threads.
//!
//! Errors are aggregated with the average positioning error
//!
//! ```text
//! ε = (1/MC) Σ_mc ‖x̂(mc) − x*‖
//! ```
//!
//! where the norm is taken over the stacked coordinates of all sensors.

use std::fmt::Write as _;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{
    degree_stats, distance, AnchorLink, Edge, LossFamily, LossSpec, Measurements, Network,
    Positions, ProblemInstance,
};
use crate::solver::{minimize, SolveResult, SolverConfig};

/// Kilometers to meters.
pub const METERS_PER_KM: f64 = 1000.0;

/// Networks are regenerated at most this many times before giving up.
pub const MAX_GENERATION_ATTEMPTS: u64 = 100;

/// Accepted deviation of the average combined degree from its target.
pub const DEGREE_TOLERANCE: f64 = 0.3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorParams {
    pub sensors: usize,
    /// Side of the deployment box, in kilometers.
    pub side: f64,
    pub anchors: usize,
    /// Target average of sensor neighbors plus anchor links per sensor.
    pub target_degree: f64,
    pub dim: usize,
}

impl Default for GeneratorParams {
    fn default() -> Self {
        Self {
            sensors: 10,
            side: 1.0,
            anchors: 4,
            target_degree: 4.3,
            dim: 2,
        }
    }
}

/// Corners of `[0, side]^dim` in Gray-code order, so consecutive corners
/// share a face: for `dim = 2` that is (0,0), (s,0), (s,s), (0,s).
fn box_corners(dim: usize, side: f64) -> Vec<Vec<f64>> {
    (0..1usize << dim)
        .map(|k| {
            let gray = k ^ (k >> 1);
            (0..dim).map(|c| if gray >> c & 1 == 1 { side } else { 0.0 }).collect()
        })
        .collect()
}

fn sensor_graph_connected(n: usize, edges: &[Edge]) -> bool {
    if n == 0 {
        return true;
    }
    let mut adj = vec![Vec::new(); n];
    for e in edges {
        adj[e.a].push(e.b);
        adj[e.b].push(e.a);
    }
    let mut seen = vec![false; n];
    let mut stack = vec![0];
    seen[0] = true;
    while let Some(i) = stack.pop() {
        for &j in &adj[i] {
            if !seen[j] {
                seen[j] = true;
                stack.push(j);
            }
        }
    }
    seen.into_iter().all(|s| s)
}

/// Localizability screen: connected sensor graph, at least one anchor link,
/// and at least `dim + 1` measured partners per sensor.
fn passes_screen(network: &Network) -> bool {
    let stats = degree_stats(network);
    sensor_graph_connected(network.sensors, &network.edges)
        && !network.anchor_links.is_empty()
        && stats.combined_degree.iter().all(|&k| k > network.dim)
}

fn try_generate(params: &GeneratorParams, rng: &mut impl Rng) -> Result<Option<(Network, Positions)>> {
    let n = params.sensors;
    let p = params.dim;
    let anchors = Positions::from_rows(p, &box_corners(p, params.side)[..params.anchors])?;
    let mut truth = Positions::zeros(n, p);
    for v in truth.as_mut_slice() {
        *v = params.side * rng.random::<f64>();
    }

    enum Pair {
        Sensors(Edge),
        Anchor(AnchorLink),
    }
    let mut pairs = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            pairs.push((distance(truth.row(i), truth.row(j)), Pair::Sensors(Edge::new(i, j))));
        }
        for k in 0..params.anchors {
            pairs.push((distance(truth.row(i), anchors.row(k)), Pair::Anchor(AnchorLink::new(i, k))));
        }
    }
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));

    // Average combined degree after admitting the first `k` pairs; it is
    // nondecreasing in the communication radius, hence in `k`.
    let mut cumulative = Vec::with_capacity(pairs.len() + 1);
    cumulative.push(0.0);
    let mut total = 0usize;
    for (_, pair) in &pairs {
        total += match pair {
            Pair::Sensors(_) => 2,
            Pair::Anchor(_) => 1,
        };
        cumulative.push(total as f64 / n as f64);
    }
    let above = cumulative.partition_point(|&d| d < params.target_degree);
    let candidates = [above.saturating_sub(1), above.min(pairs.len())];
    let admitted = candidates
        .into_iter()
        .min_by(|&a, &b| {
            (cumulative[a] - params.target_degree)
                .abs()
                .total_cmp(&(cumulative[b] - params.target_degree).abs())
                // Prefer the larger radius on ties.
                .then(b.cmp(&a))
        })
        .expect("two candidates");
    if (cumulative[admitted] - params.target_degree).abs() > DEGREE_TOLERANCE {
        return Ok(None);
    }
    // Ties at the radius would admit more pairs than counted.
    if admitted < pairs.len() && admitted > 0 && pairs[admitted].0 == pairs[admitted - 1].0 {
        return Ok(None);
    }

    let mut edges = Vec::new();
    let mut links = Vec::new();
    for (_, pair) in &pairs[..admitted] {
        match *pair {
            Pair::Sensors(e) => edges.push(e),
            Pair::Anchor(l) => links.push(l),
        }
    }
    let network = Network::new(p, n, anchors, edges, links)?;
    Ok(passes_screen(&network).then_some((network, truth)))
}

/// Random geometric network in a box with anchors at its corners.
///
/// Sensors are uniform in `[0, side]^dim`. Pairs (sensor-sensor and
/// sensor-anchor) closer than a communication radius are measured; the radius
/// is chosen so that the average combined degree is as close as possible to
/// `target_degree` (within ±0.3). Placements failing the localizability
/// screen are redrawn from a fresh sub-stream of `seed`.
pub fn generate_network(params: &GeneratorParams, seed: u64) -> Result<(Network, Positions)> {
    if !(2..=3).contains(&params.dim) {
        return Err(Error::Generation(format!("unsupported dimension {}", params.dim)));
    }
    if params.sensors == 0 {
        return Err(Error::Generation("at least one sensor is required".into()));
    }
    if params.anchors > 1 << params.dim {
        return Err(Error::Generation(format!(
            "{} anchors do not fit on the {} corners of the box",
            params.anchors,
            1 << params.dim
        )));
    }
    if !(params.side > 0.0 && params.side.is_finite()) {
        return Err(Error::Generation("side must be positive".into()));
    }
    for attempt in 0..MAX_GENERATION_ATTEMPTS {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(attempt);
        if let Some(found) = try_generate(params, &mut rng)? {
            return Ok(found);
        }
    }
    Err(Error::Generation(format!(
        "no network passed the localizability screen in {MAX_GENERATION_ATTEMPTS} attempts"
    )))
}

/// Regular Gaussian noise, one optional malfunctioning sensor, and an
/// optional bias mode for that sensor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    pub sigma_regular: f64,
    /// 0-based sensor index.
    pub outlier_node: Option<usize>,
    pub sigma_outlier: f64,
    /// Replace the outlier's measurements by `bias_factor ×` the true distance.
    pub bias_mode: bool,
    pub bias_factor: f64,
    /// Whether bias mode also applies to the outlier's anchor links.
    pub bias_anchor_links: bool,
}

impl Default for NoiseModel {
    fn default() -> Self {
        Self {
            sigma_regular: 0.04,
            outlier_node: Some(6),
            sigma_outlier: 4.0,
            bias_mode: false,
            bias_factor: 0.1,
            bias_anchor_links: true,
        }
    }
}

impl NoiseModel {
    pub fn noiseless() -> Self {
        Self {
            sigma_regular: 0.0,
            outlier_node: None,
            ..Self::default()
        }
    }

    pub fn biased(factor: f64) -> Self {
        Self {
            bias_mode: true,
            bias_factor: factor,
            ..Self::default()
        }
    }

    fn check(&self, sensors: usize) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidExperiment(m));
        if !(self.sigma_regular >= 0.0 && self.sigma_outlier >= 0.0) {
            return bad("noise standard deviations must be nonnegative".into());
        }
        if self.bias_mode && !(self.bias_factor > 0.0 && self.bias_factor.is_finite()) {
            return bad("bias factor must be positive".into());
        }
        if let Some(node) = self.outlier_node {
            if node >= sensors {
                return bad(format!("outlier node {node} is not one of the {sensors} sensors"));
            }
        }
        Ok(())
    }
}

/// Draws one measurement set: `|‖x_i − x_j‖ + ν|` with Gaussian `ν`.
///
/// Terms touching the outlier node use `sigma_outlier`; in bias mode they are
/// instead exactly `bias_factor` times the true distance (anchor links only
/// when `bias_anchor_links` is set). Edge noise is drawn first, in canonical
/// edge order, then anchor-link noise.
pub fn sample_measurements(
    network: &Network,
    truth: &Positions,
    noise: &NoiseModel,
    rng: &mut impl Rng,
) -> Measurements {
    let touches = |i: usize| noise.outlier_node == Some(i);
    let mut draw = |true_distance: f64, outlier: bool, biased: bool| {
        if biased {
            return noise.bias_factor * true_distance;
        }
        let sigma = if outlier { noise.sigma_outlier } else { noise.sigma_regular };
        let z: f64 = rng.sample(StandardNormal);
        (true_distance + sigma * z).abs()
    };
    let ranges = network
        .edges
        .iter()
        .map(|e| {
            let outlier = touches(e.a) || touches(e.b);
            draw(distance(truth.row(e.a), truth.row(e.b)), outlier, outlier && noise.bias_mode)
        })
        .collect();
    let anchor_ranges = network
        .anchor_links
        .iter()
        .map(|l| {
            let outlier = touches(l.sensor);
            let biased = outlier && noise.bias_mode && noise.bias_anchor_links;
            draw(distance(truth.row(l.sensor), network.anchors.row(l.anchor)), outlier, biased)
        })
        .collect();
    Measurements { ranges, anchor_ranges }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PositioningError {
    pub epsilon_m: f64,
    pub epsilon_per_sensor_m: f64,
}

fn stacked_error(estimate: &Positions, truth: &Positions) -> Result<f64> {
    if estimate.dim() != truth.dim() || estimate.len() != truth.len() {
        return Err(Error::LengthMismatch {
            expected: truth.as_slice().len(),
            actual: estimate.as_slice().len(),
        });
    }
    Ok(distance(estimate.as_slice(), truth.as_slice()))
}

/// Average positioning error over trials, in meters.
pub fn positioning_error(estimates: &[Positions], truth: &Positions) -> Result<PositioningError> {
    if estimates.is_empty() {
        return Err(Error::InvalidExperiment("no estimates to score".into()));
    }
    let mut total = 0.0;
    for x in estimates {
        total += stacked_error(x, truth)?;
    }
    let epsilon_m = total / estimates.len() as f64 * METERS_PER_KM;
    Ok(PositioningError {
        epsilon_m,
        epsilon_per_sensor_m: epsilon_m / truth.len() as f64,
    })
}

/// Solver settings for the smooth families and for the absolute family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Solvers {
    pub smooth: SolverConfig,
    pub nonsmooth: SolverConfig,
}

impl Default for Solvers {
    fn default() -> Self {
        Self {
            smooth: SolverConfig::smooth(),
            nonsmooth: SolverConfig::subgradient(),
        }
    }
}

impl Solvers {
    pub fn for_family(&self, family: LossFamily) -> &SolverConfig {
        if family.is_smooth() {
            &self.smooth
        } else {
            &self.nonsmooth
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialOutcome {
    pub loss: LossSpec,
    pub result: SolveResult,
    /// `‖x̂ − x*‖` over stacked coordinates, kilometers.
    pub error_km: f64,
}

/// Seed of the solver in a trial; kept apart from the measurement stream.
fn solver_seed(trial_seed: u64, base: u64) -> u64 {
    trial_seed.rotate_left(32) ^ 0x9e37_79b9_7f4a_7c15 ^ base
}

/// Samples the measurements of trial `trial_seed`.
pub fn trial_measurements(network: &Network, truth: &Positions, noise: &NoiseModel, trial_seed: u64) -> Measurements {
    let mut rng = ChaCha8Rng::seed_from_u64(trial_seed);
    sample_measurements(network, truth, noise, &mut rng)
}

/// One Monte Carlo trial: one measurement draw, one solve per loss.
pub fn run_trial(
    network: &Network,
    truth: &Positions,
    noise: &NoiseModel,
    losses: &[LossSpec],
    solvers: &Solvers,
    trial_seed: u64,
) -> Result<Vec<TrialOutcome>> {
    let measurements = trial_measurements(network, truth, noise, trial_seed);
    let instance = ProblemInstance {
        network: network.clone(),
        measurements,
        loss: LossSpec::default(),
    };
    losses
        .iter()
        .map(|loss| {
            let instance = instance.with_loss(loss.clone());
            let config = solvers.for_family(loss.family);
            let config = config.clone().with_seed(solver_seed(trial_seed, config.seed));
            let result = minimize(&instance, loss.family, &config)?;
            let error_km = stacked_error(&result.estimate, truth)?;
            Ok(TrialOutcome {
                loss: loss.clone(),
                result,
                error_km,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub trials: usize,
    pub network: Network,
    pub truth: Positions,
    pub losses: Vec<LossSpec>,
    pub solvers: Solvers,
    pub noise: NoiseModel,
    pub master_seed: u64,
    /// Worker threads for trials; 0 lets rayon decide. Does not affect results.
    pub threads: usize,
}

impl ExperimentConfig {
    /// The outlier experiment defaults on a given network: 100 trials,
    /// quadratic, absolute and Huber (`R` = 0.1 km) losses.
    pub fn new(network: Network, truth: Positions) -> Self {
        Self {
            trials: 100,
            network,
            truth,
            losses: vec![LossSpec::quadratic(), LossSpec::absolute(), LossSpec::huber(0.1)],
            solvers: Solvers::default(),
            noise: NoiseModel::default(),
            master_seed: 0,
            threads: 0,
        }
    }

    pub fn from_params(params: &GeneratorParams, seed: u64) -> Result<Self> {
        let (network, truth) = generate_network(params, seed)?;
        Ok(Self::new(network, truth))
    }

    fn check(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::InvalidExperiment("at least one trial is required".into()));
        }
        if self.truth.len() != self.network.sensors || self.truth.dim() != self.network.dim {
            return Err(Error::InvalidExperiment("truth does not match the network".into()));
        }
        self.noise.check(self.network.sensors)?;
        for loss in &self.losses {
            if loss.family == LossFamily::Huber {
                crate::loss::Huber::new(loss.radius)?;
            }
        }
        Ok(())
    }

    /// Seeds of every trial, drawn in order from the master seed.
    pub fn trial_seeds(&self) -> Vec<u64> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.master_seed);
        (0..self.trials).map(|_| rng.next_u64()).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NetworkSummary {
    pub dim: usize,
    pub sensors: usize,
    pub anchors: usize,
    pub edges: usize,
    pub anchor_links: usize,
    pub average_sensor_degree: f64,
    pub average_combined_degree: f64,
}

impl NetworkSummary {
    pub fn of(network: &Network) -> Self {
        let stats = degree_stats(network);
        Self {
            dim: network.dim,
            sensors: network.sensors,
            anchors: network.anchor_count(),
            edges: network.edges.len(),
            anchor_links: network.anchor_links.len(),
            average_sensor_degree: stats.average_sensor,
            average_combined_degree: stats.average_combined,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LossEcho {
    pub family: LossFamily,
    #[serde(rename = "R", skip_serializing_if = "Option::is_none")]
    pub radius: Option<f64>,
}

impl From<&LossSpec> for LossEcho {
    fn from(l: &LossSpec) -> Self {
        Self {
            family: l.family,
            radius: (l.family == LossFamily::Huber).then_some(l.radius),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConfigEcho {
    pub trials: usize,
    pub master_seed: u64,
    pub network: NetworkSummary,
    pub noise: NoiseModel,
    pub losses: Vec<LossEcho>,
    pub solvers: Solvers,
}

/// Aggregates of one loss over all successful trials. Lengths in kilometers.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FamilyReport {
    pub family: LossFamily,
    #[serde(rename = "R", skip_serializing_if = "Option::is_none")]
    pub radius: Option<f64>,
    pub trials: usize,
    pub epsilon: f64,
    pub epsilon_per_sensor: f64,
    pub per_trial_error: Vec<f64>,
    pub per_sensor_mean_error: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub outlier_node_mean_error: Option<f64>,
    /// Mean per-sensor error over all sensors except the outlier node.
    pub non_outlier_mean_error: f64,
    pub converged_trials: usize,
    pub mean_iterations: f64,
    /// Stacked estimate of every successful trial.
    pub estimates: Vec<Vec<f64>>,
}

impl FamilyReport {
    pub fn epsilon_m(&self) -> f64 {
        self.epsilon * METERS_PER_KM
    }

    pub fn epsilon_per_sensor_m(&self) -> f64 {
        self.epsilon_per_sensor * METERS_PER_KM
    }

    pub fn non_outlier_mean_error_m(&self) -> f64 {
        self.non_outlier_mean_error * METERS_PER_KM
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrialFailure {
    pub trial: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MonteCarloReport {
    pub unit: &'static str,
    pub config: ConfigEcho,
    pub trial_seeds: Vec<u64>,
    pub families: Vec<FamilyReport>,
    pub failures: Vec<TrialFailure>,
}

impl MonteCarloReport {
    pub fn family(&self, family: LossFamily) -> Option<&FamilyReport> {
        self.families.iter().find(|f| f.family == family)
    }

    pub fn is_complete(&self) -> bool {
        self.failures.is_empty()
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    /// `family,R,epsilon_m,epsilon_per_sensor_m,trials,seed`, one row per loss.
    pub fn summary_csv(&self) -> String {
        let mut out = String::from("family,R,epsilon_m,epsilon_per_sensor_m,trials,seed\n");
        for f in &self.families {
            let r = f.radius.map(|r| r.to_string()).unwrap_or_default();
            let _ = writeln!(
                out,
                "{},{},{:.6},{:.6},{},{}",
                f.family,
                r,
                f.epsilon_m(),
                f.epsilon_per_sensor_m(),
                f.trials,
                self.config.master_seed
            );
        }
        out
    }

    /// Plain-text table of ε per sensor in meters.
    pub fn table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{:<10} {:>8} {:>16} {:>14}", "family", "R [km]", "eps/sensor [m]", "eps [m]");
        for f in &self.families {
            let r = f.radius.map(|r| format!("{r}")).unwrap_or_else(|| "-".into());
            let _ = writeln!(
                out,
                "{:<10} {:>8} {:>16.2} {:>14.2}",
                f.family.name(),
                r,
                f.epsilon_per_sensor_m(),
                f.epsilon_m()
            );
        }
        out
    }
}

fn with_pool<T: Send>(threads: usize, job: impl FnOnce() -> T + Send) -> Result<T> {
    if threads == 0 {
        return Ok(job());
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::InvalidExperiment(format!("cannot start {threads} worker threads: {e}")))?;
    Ok(pool.install(job))
}

/// Runs `config.trials` independent trials and aggregates each loss.
///
/// Failed trials are listed in [`MonteCarloReport::failures`] and left out of
/// every aggregate; the report is otherwise the same as for a clean run.
pub fn run_monte_carlo(config: &ExperimentConfig) -> Result<MonteCarloReport> {
    config.check()?;
    let seeds = config.trial_seeds();
    let outcomes: Vec<Result<Vec<TrialOutcome>>> = with_pool(config.threads, || {
        seeds
            .par_iter()
            .map(|&seed| {
                run_trial(&config.network, &config.truth, &config.noise, &config.losses, &config.solvers, seed)
            })
            .collect()
    })?;

    let n = config.network.sensors;
    let mut failures = Vec::new();
    let mut ok = Vec::new();
    for (trial, outcome) in outcomes.into_iter().enumerate() {
        match outcome {
            Ok(v) => ok.push(v),
            Err(e) => failures.push(TrialFailure {
                trial,
                message: e.to_string(),
            }),
        }
    }

    let outlier = config.noise.outlier_node;
    let families = config
        .losses
        .iter()
        .enumerate()
        .map(|(li, loss)| {
            let trials = ok.len();
            let per_trial_error: Vec<f64> = ok.iter().map(|t| t[li].error_km).collect();
            let mut per_sensor_mean_error = vec![0.0; n];
            for t in &ok {
                let est = &t[li].result.estimate;
                for (i, e) in per_sensor_mean_error.iter_mut().enumerate() {
                    *e += distance(est.row(i), config.truth.row(i));
                }
            }
            let denom = trials.max(1) as f64;
            per_sensor_mean_error.iter_mut().for_each(|e| *e /= denom);
            let epsilon = per_trial_error.iter().sum::<f64>() / denom;
            let rest: Vec<f64> = per_sensor_mean_error
                .iter()
                .enumerate()
                .filter(|&(i, _)| Some(i) != outlier)
                .map(|(_, &e)| e)
                .collect();
            FamilyReport {
                family: loss.family,
                radius: LossEcho::from(loss).radius,
                trials,
                epsilon,
                epsilon_per_sensor: epsilon / n as f64,
                per_trial_error,
                outlier_node_mean_error: outlier.map(|o| per_sensor_mean_error[o]),
                non_outlier_mean_error: rest.iter().sum::<f64>() / rest.len().max(1) as f64,
                per_sensor_mean_error,
                converged_trials: ok.iter().filter(|t| t[li].result.converged).count(),
                mean_iterations: ok.iter().map(|t| t[li].result.iterations as f64).sum::<f64>() / denom,
                estimates: ok.iter().map(|t| t[li].result.estimate.stack()).collect(),
            }
        })
        .collect();

    Ok(MonteCarloReport {
        unit: "km",
        config: ConfigEcho {
            trials: config.trials,
            master_seed: config.master_seed,
            network: NetworkSummary::of(&config.network),
            noise: config.noise.clone(),
            losses: config.losses.iter().map(LossEcho::from).collect(),
            solvers: config.solvers.clone(),
        },
        trial_seeds: seeds,
        families,
        failures,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    #[serde(rename = "R")]
    pub radius: f64,
    pub family: LossFamily,
    pub epsilon_per_sensor_m: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepCurve {
    /// Sorted by `R`; at each `R` the Huber row comes first, then the baselines.
    pub rows: Vec<SweepRow>,
}

impl SweepCurve {
    pub fn huber(&self) -> impl Iterator<Item = &SweepRow> {
        self.rows.iter().filter(|r| r.family == LossFamily::Huber)
    }

    pub fn baseline(&self, family: LossFamily) -> Option<f64> {
        self.rows
            .iter()
            .find(|r| r.family == family)
            .map(|r| r.epsilon_per_sensor_m)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("R,family,epsilon_per_sensor_m\n");
        for r in &self.rows {
            let _ = writeln!(out, "{},{},{:.6}", r.radius, r.family, r.epsilon_per_sensor_m);
        }
        out
    }
}

/// Reruns the Monte Carlo experiment for every Huber radius in `grid`.
///
/// Non-Huber losses of `config` are the baselines and run once; if there are
/// none, quadratic and absolute are used. All runs share the master seed, so
/// the measurements are the same at every radius.
pub fn sweep_huber_parameter(config: &ExperimentConfig, grid: &[f64]) -> Result<SweepCurve> {
    if grid.is_empty() {
        return Err(Error::InvalidExperiment("the R grid is empty".into()));
    }
    if let Some(&r) = grid.iter().find(|&&r| !(r > 0.0 && r.is_finite())) {
        return Err(Error::InvalidRadius(r));
    }
    let mut radii = grid.to_vec();
    radii.sort_by(f64::total_cmp);
    radii.dedup();

    let mut baselines: Vec<LossSpec> = config
        .losses
        .iter()
        .filter(|l| l.family != LossFamily::Huber)
        .cloned()
        .collect();
    if baselines.is_empty() {
        baselines = vec![LossSpec::quadratic(), LossSpec::absolute()];
    }
    let base = run_monte_carlo(&ExperimentConfig {
        losses: baselines,
        ..config.clone()
    })?;
    if !base.is_complete() {
        return Err(Error::InvalidExperiment(format!("{} baseline trials failed", base.failures.len())));
    }

    let mut rows = Vec::new();
    for r in radii {
        let report = run_monte_carlo(&ExperimentConfig {
            losses: vec![LossSpec::huber(r)],
            ..config.clone()
        })?;
        if !report.is_complete() {
            return Err(Error::InvalidExperiment(format!("{} trials failed at R = {r}", report.failures.len())));
        }
        rows.push(SweepRow {
            radius: r,
            family: LossFamily::Huber,
            epsilon_per_sensor_m: report.families[0].epsilon_per_sensor_m(),
        });
        for f in &base.families {
            rows.push(SweepRow {
                radius: r,
                family: f.family,
                epsilon_per_sensor_m: f.epsilon_per_sensor_m(),
            });
        }
    }
    Ok(SweepCurve { rows })
}
