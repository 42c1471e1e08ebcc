//! First-order minimization of the convex cost.
//!
//! The convexified quadratic and Huber costs are continuously differentiable
//! wherever measured ranges are positive, so they are minimized by gradient
//! descent with Armijo backtracking. The convexified absolute cost is not;
//! it gets a subgradient method with steps `α₀/√k` and keeps the best iterate.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::cost::{Form, Objective};
use crate::error::{Error, Result};
use crate::model::{LossFamily, Network, Positions, ProblemInstance};

/// Smallest step the line search tries before giving up.
pub const MIN_STEP: f64 = 1e-16;

/// Window (in iterations) over which subgradient iterates must stay put to count as converged.
pub const DISPLACEMENT_WINDOW: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "rule")]
pub enum StepRule {
    Fixed { alpha: f64 },
    Backtracking { beta: f64, c: f64 },
    Diminishing { alpha0: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "strategy")]
pub enum InitStrategy {
    /// Every sensor at the anchor centroid plus isotropic Gaussian jitter.
    AnchorCentroidJitter { sigma: f64 },
    /// Uniform in the bounding box of the anchors.
    RandomInBox,
    Given { positions: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub max_iters: usize,
    pub grad_tol: f64,
    pub step_rule: StepRule,
    pub init: InitStrategy,
    pub restarts: usize,
    pub seed: u64,
}

impl SolverConfig {
    /// Backtracking gradient descent.
    pub fn smooth() -> Self {
        Self {
            max_iters: 50_000,
            grad_tol: 1e-7,
            step_rule: StepRule::Backtracking { beta: 0.5, c: 1e-4 },
            init: InitStrategy::AnchorCentroidJitter { sigma: 0.1 },
            restarts: 3,
            seed: 0,
        }
    }

    /// Subgradient method with diminishing steps.
    pub fn subgradient() -> Self {
        Self {
            step_rule: StepRule::Diminishing { alpha0: 0.05 },
            ..Self::smooth()
        }
    }

    /// The default configuration suited to `family`.
    pub fn for_family(family: LossFamily) -> Self {
        if family.is_smooth() {
            Self::smooth()
        } else {
            Self::subgradient()
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    fn check(&self, family: LossFamily) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidConfig(msg.to_string()));
        if self.max_iters == 0 {
            return bad("max_iters must be positive");
        }
        if !(self.grad_tol > 0.0 && self.grad_tol.is_finite()) {
            return bad("grad_tol must be positive");
        }
        if self.restarts == 0 {
            return bad("restarts must be at least 1");
        }
        match self.step_rule {
            StepRule::Fixed { alpha } if !(alpha > 0.0 && alpha.is_finite()) => {
                return bad("fixed step must be positive")
            }
            StepRule::Backtracking { beta, c } if !(0.0 < beta && beta < 1.0 && 0.0 < c && c < 1.0) => {
                return bad("backtracking needs beta and c in (0, 1)")
            }
            StepRule::Diminishing { alpha0 } if !(alpha0 > 0.0 && alpha0.is_finite()) => {
                return bad("diminishing step alpha0 must be positive")
            }
            _ => {}
        }
        if !family.is_smooth() && !matches!(self.step_rule, StepRule::Diminishing { .. }) {
            return bad("the absolute family is nonsmooth and requires the diminishing step rule");
        }
        if let InitStrategy::AnchorCentroidJitter { sigma } = self.init {
            if !(sigma >= 0.0 && sigma.is_finite()) {
                return bad("init jitter must be nonnegative");
            }
        }
        Ok(())
    }
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self::smooth()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolveResult {
    pub estimate: Positions,
    pub final_cost: f64,
    pub iterations: usize,
    pub converged: bool,
    #[serde(skip)]
    pub cost_trace: Vec<f64>,
}

/// Starting positions for every sensor of `network`; deterministic in `seed`.
pub fn initialize(network: &Network, strategy: &InitStrategy, seed: u64) -> Result<Positions> {
    let n = network.sensors;
    let p = network.dim;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    match strategy {
        InitStrategy::Given { positions } => Positions::unstack(positions, n, p),
        InitStrategy::AnchorCentroidJitter { sigma } => {
            let m = network.anchor_count();
            if m == 0 {
                return Err(Error::NoAnchors);
            }
            let mut centroid = vec![0.0; p];
            for a in network.anchors.rows() {
                for (c, v) in centroid.iter_mut().zip(a) {
                    *c += v / m as f64;
                }
            }
            let mut x = Positions::zeros(n, p);
            for i in 0..n {
                for (c, v) in x.row_mut(i).iter_mut().enumerate() {
                    let z: f64 = rng.sample(StandardNormal);
                    *v = centroid[c] + sigma * z;
                }
            }
            Ok(x)
        }
        InitStrategy::RandomInBox => {
            if network.anchor_count() == 0 {
                return Err(Error::NoAnchors);
            }
            let mut lo = vec![f64::INFINITY; p];
            let mut hi = vec![f64::NEG_INFINITY; p];
            for a in network.anchors.rows() {
                for c in 0..p {
                    lo[c] = lo[c].min(a[c]);
                    hi[c] = hi[c].max(a[c]);
                }
            }
            let mut x = Positions::zeros(n, p);
            for i in 0..n {
                for (c, v) in x.row_mut(i).iter_mut().enumerate() {
                    *v = lo[c] + (hi[c] - lo[c]) * rng.random::<f64>();
                }
            }
            Ok(x)
        }
    }
}

fn norm_sq(v: &[f64]) -> f64 {
    v.iter().map(|g| g * g).sum()
}

fn armijo(
    objective: &Objective<'_>,
    x: &[f64],
    fx: f64,
    direction: &[f64],
    beta: f64,
    c: f64,
    trial: &mut [f64],
) -> Result<(f64, f64)> {
    let decrease = norm_sq(direction);
    if decrease == 0.0 {
        return Err(Error::StepUnderflow { min_step: MIN_STEP });
    }
    let mut alpha = 1.0;
    while alpha >= MIN_STEP {
        for ((t, xi), d) in trial.iter_mut().zip(x).zip(direction) {
            *t = xi + alpha * d;
        }
        let ft = objective.value(trial);
        if ft <= fx - c * alpha * decrease {
            return Ok((alpha, ft));
        }
        alpha *= beta;
    }
    Err(Error::StepUnderflow { min_step: MIN_STEP })
}

/// Armijo backtracking along `direction` (the negative gradient at `x`).
///
/// Returns the largest `α = βᵏ` with `f(x + α·d) ≤ f(x) − c·α·‖d‖²`. A zero
/// direction, or no acceptable step above [`MIN_STEP`], is reported as
/// [`Error::StepUnderflow`].
pub fn backtracking_step(
    instance: &ProblemInstance,
    family: LossFamily,
    x: &Positions,
    direction: &[f64],
    beta: f64,
    c: f64,
) -> Result<f64> {
    let objective = Objective::new(instance, family, Form::Convex)?;
    let x = x.as_slice();
    if direction.len() != x.len() {
        return Err(Error::LengthMismatch {
            expected: x.len(),
            actual: direction.len(),
        });
    }
    let fx = objective.value(x);
    let mut trial = vec![0.0; x.len()];
    armijo(&objective, x, fx, direction, beta, c, &mut trial).map(|(alpha, _)| alpha)
}

fn gradient_descent(objective: &Objective<'_>, x0: Vec<f64>, config: &SolverConfig) -> Result<SolveResult> {
    let n = x0.len();
    let mut x = x0;
    let mut grad = vec![0.0; n];
    let mut dir = vec![0.0; n];
    let mut trial = vec![0.0; n];
    let mut fx = objective.eval(&x, Some(&mut grad));
    let mut cost_trace = vec![fx];
    let mut converged = false;
    let mut iterations = 0;

    while iterations < config.max_iters {
        if !fx.is_finite() {
            return Err(Error::NonFiniteCost { iteration: iterations });
        }
        if norm_sq(&grad).sqrt() <= config.grad_tol {
            converged = true;
            break;
        }
        for (d, g) in dir.iter_mut().zip(&grad) {
            *d = -g;
        }
        match config.step_rule {
            StepRule::Backtracking { beta, c } => {
                match armijo(objective, &x, fx, &dir, beta, c, &mut trial) {
                    Ok(_) => std::mem::swap(&mut x, &mut trial),
                    // No representable decrease left along -g: stalled.
                    Err(Error::StepUnderflow { .. }) => break,
                    Err(e) => return Err(e),
                }
            }
            StepRule::Fixed { alpha } => {
                for (xi, d) in x.iter_mut().zip(&dir) {
                    *xi += alpha * d;
                }
            }
            StepRule::Diminishing { alpha0 } => {
                let alpha = alpha0 / ((iterations + 1) as f64).sqrt();
                for (xi, d) in x.iter_mut().zip(&dir) {
                    *xi += alpha * d;
                }
            }
        }
        iterations += 1;
        fx = objective.eval(&x, Some(&mut grad));
        cost_trace.push(fx);
    }
    if !fx.is_finite() {
        return Err(Error::NonFiniteCost { iteration: iterations });
    }
    if !converged {
        converged = norm_sq(&grad).sqrt() <= config.grad_tol;
    }
    Ok(SolveResult {
        estimate: Positions::unstack(&x, objective.instance().sensors(), objective.instance().dim())?,
        final_cost: fx,
        iterations,
        converged,
        cost_trace,
    })
}

fn subgradient_method(objective: &Objective<'_>, x0: Vec<f64>, config: &SolverConfig) -> Result<SolveResult> {
    let alpha0 = match config.step_rule {
        StepRule::Diminishing { alpha0 } => alpha0,
        _ => unreachable!("checked by SolverConfig::check"),
    };
    let n = x0.len();
    let mut x = x0;
    let mut grad = vec![0.0; n];
    let mut fx = objective.eval(&x, Some(&mut grad));
    let mut best = (fx, x.clone());
    let mut history: std::collections::VecDeque<Vec<f64>> = std::collections::VecDeque::new();
    let mut cost_trace = vec![fx];
    let mut converged = false;
    let mut iterations = 0;

    while iterations < config.max_iters {
        if !fx.is_finite() {
            return Err(Error::NonFiniteCost { iteration: iterations });
        }
        // A zero subgradient certifies optimality.
        if grad.iter().all(|&g| g == 0.0) {
            converged = true;
            break;
        }
        let alpha = alpha0 / ((iterations + 1) as f64).sqrt();
        for (xi, g) in x.iter_mut().zip(&grad) {
            *xi -= alpha * g;
        }
        iterations += 1;
        fx = objective.eval(&x, Some(&mut grad));
        cost_trace.push(fx);
        if fx < best.0 {
            best = (fx, x.clone());
        }
        history.push_back(x.clone());
        if history.len() > DISPLACEMENT_WINDOW {
            let old = history.pop_front().expect("window is nonempty");
            let moved = old
                .iter()
                .zip(&x)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();
            if moved <= config.grad_tol {
                converged = true;
                break;
            }
        }
    }
    if !fx.is_finite() {
        return Err(Error::NonFiniteCost { iteration: iterations });
    }
    let (final_cost, x) = best;
    Ok(SolveResult {
        estimate: Positions::unstack(&x, objective.instance().sensors(), objective.instance().dim())?,
        final_cost,
        iterations,
        converged,
        cost_trace,
    })
}

/// Minimizes the convex cost of `family` over the sensor positions.
///
/// Runs `config.restarts` independent starts (restart `r` is initialized with
/// seed `config.seed + r`) and returns the one with the lowest final cost;
/// ties go to the earliest restart.
pub fn minimize(instance: &ProblemInstance, family: LossFamily, config: &SolverConfig) -> Result<SolveResult> {
    config.check(family)?;
    let objective = Objective::new(instance, family, Form::Convex)?;
    let mut best: Option<SolveResult> = None;
    for restart in 0..config.restarts {
        let x0 = initialize(&instance.network, &config.init, config.seed.wrapping_add(restart as u64))?;
        if !x0.is_finite() {
            return Err(Error::InvalidConfig("initial positions are not finite".into()));
        }
        let x0 = x0.stack();
        let result = if !objective.has_terms() {
            SolveResult {
                estimate: Positions::unstack(&x0, instance.sensors(), instance.dim())?,
                final_cost: 0.0,
                iterations: 0,
                converged: true,
                cost_trace: vec![0.0],
            }
        } else if family.is_smooth() {
            gradient_descent(&objective, x0, config)?
        } else {
            subgradient_method(&objective, x0, config)?
        };
        if best.as_ref().is_none_or(|b| result.final_cost < b.final_cost) {
            best = Some(result);
        }
    }
    Ok(best.expect("at least one restart"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{AnchorLink, LossSpec, Measurements};

    fn single_sensor(anchors: &[[f64; 2]], ranges: &[f64], loss: LossSpec) -> ProblemInstance {
        let network = Network::new(
            2,
            1,
            Positions::from_rows(2, anchors).unwrap(),
            [],
            (0..anchors.len()).map(|k| AnchorLink::new(0, k)),
        )
        .unwrap();
        ProblemInstance::new(
            network,
            Measurements {
                ranges: vec![],
                anchor_ranges: ranges.to_vec(),
            },
            loss,
        )
        .unwrap()
    }

    #[test]
    fn centroid_init_without_jitter() {
        let inst = single_sensor(
            &[[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]],
            &[1.0; 4],
            LossSpec::huber(0.1),
        );
        let x = initialize(&inst.network, &InitStrategy::AnchorCentroidJitter { sigma: 0.0 }, 7).unwrap();
        assert_eq!(x.row(0), &[0.5, 0.5]);
    }

    #[test]
    fn given_init_is_identity_and_seeded_inits_repeat() {
        let inst = single_sensor(&[[0.0, 0.0]], &[1.0], LossSpec::huber(0.1));
        let given = InitStrategy::Given {
            positions: vec![0.3, -0.2],
        };
        assert_eq!(initialize(&inst.network, &given, 1).unwrap().stack(), vec![0.3, -0.2]);
        for strategy in [InitStrategy::AnchorCentroidJitter { sigma: 0.1 }, InitStrategy::RandomInBox] {
            let a = initialize(&inst.network, &strategy, 42).unwrap();
            let b = initialize(&inst.network, &strategy, 42).unwrap();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn centroid_init_needs_anchors() {
        let network = Network::new(2, 2, Positions::zeros(0, 2), [], []).unwrap();
        let r = initialize(&network, &InitStrategy::AnchorCentroidJitter { sigma: 0.1 }, 0);
        assert!(matches!(r, Err(Error::NoAnchors)));
    }

    #[test]
    fn armijo_hand_evaluated_chain() {
        // f(x) = ‖x‖² around an anchor at the origin with r = 0, x = (1, 0),
        // direction −2: α = 1 gives f = 1 > 1 − 0.1·1·4 = 0.6, rejected;
        // α = 0.5 gives f = 0 ≤ 1 − 0.1·0.5·4 = 0.8, accepted.
        let inst = single_sensor(&[[0.0, 0.0]], &[0.0], LossSpec::quadratic());
        let x = Positions::from_rows(2, &[[1.0, 0.0]]).unwrap();
        let alpha = backtracking_step(&inst, LossFamily::Quadratic, &x, &[-2.0, 0.0], 0.5, 0.1).unwrap();
        assert_eq!(alpha, 0.5);
    }

    #[test]
    fn armijo_full_step_in_linear_huber_region() {
        // ‖x‖ = 3 with r = 0: δ = 3 > R = 0.1, gradient 2R·u = (0.2, 0).
        // Full step moves to ‖x‖ = 2.8: f drops by 0.04 ≥ c·1·0.04 for c = 0.5.
        let inst = single_sensor(&[[0.0, 0.0]], &[0.0], LossSpec::huber(0.1));
        let x = Positions::from_rows(2, &[[3.0, 0.0]]).unwrap();
        let alpha = backtracking_step(&inst, LossFamily::Huber, &x, &[-0.2, 0.0], 0.5, 0.5).unwrap();
        assert_eq!(alpha, 1.0);
    }

    #[test]
    fn zero_direction_short_circuits() {
        let inst = single_sensor(&[[0.0, 0.0]], &[1.0], LossSpec::huber(0.1));
        let x = Positions::from_rows(2, &[[0.2, 0.0]]).unwrap();
        let r = backtracking_step(&inst, LossFamily::Huber, &x, &[0.0, 0.0], 0.5, 0.1);
        assert!(matches!(r, Err(Error::StepUnderflow { .. })));
    }

    #[test]
    fn empty_instance_returns_init() {
        let network = Network::new(
            2,
            2,
            Positions::from_rows(2, &[[0.0, 0.0], [1.0, 1.0]]).unwrap(),
            [],
            [],
        )
        .unwrap();
        let inst = ProblemInstance::new(network, Measurements::default(), LossSpec::huber(0.1)).unwrap();
        let config = SolverConfig::smooth().with_seed(3);
        let result = minimize(&inst, LossFamily::Huber, &config).unwrap();
        let init = initialize(&inst.network, &config.init, 3).unwrap();
        assert_eq!(result.estimate, init);
        assert_eq!(result.final_cost, 0.0);
        assert!(result.converged);
    }

    #[test]
    fn absolute_family_requires_diminishing_steps() {
        let inst = single_sensor(&[[0.0, 0.0]], &[1.0], LossSpec::absolute());
        let r = minimize(&inst, LossFamily::Absolute, &SolverConfig::smooth());
        assert!(matches!(r, Err(Error::InvalidConfig(_))));
        assert!(minimize(&inst, LossFamily::Absolute, &SolverConfig::subgradient()).is_ok());
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let inst = single_sensor(&[[0.0, 0.0]], &[1.0], LossSpec::huber(0.1));
        let mut c = SolverConfig::smooth();
        c.max_iters = 0;
        assert!(minimize(&inst, LossFamily::Huber, &c).is_err());
        let mut c = SolverConfig::smooth();
        c.step_rule = StepRule::Backtracking { beta: 1.5, c: 0.1 };
        assert!(minimize(&inst, LossFamily::Huber, &c).is_err());
    }

    #[test]
    fn huge_fixed_step_signals_non_finite_cost() {
        let inst = single_sensor(&[[0.0, 0.0], [1.0, 0.0]], &[0.1, 0.1], LossSpec::quadratic());
        let mut c = SolverConfig::smooth();
        c.step_rule = StepRule::Fixed { alpha: 1e300 };
        c.init = InitStrategy::Given {
            positions: vec![5.0, 5.0],
        };
        let r = minimize(&inst, LossFamily::Quadratic, &c);
        assert!(matches!(r, Err(Error::NonFiniteCost { .. })), "{r:?}");
    }

    #[test]
    fn backtracking_trace_is_nonincreasing() {
        let inst = single_sensor(
            &[[0.0, 0.0], [2.0, 0.0], [1.0, 2.0]],
            &[2f64.sqrt(), 2f64.sqrt(), 1.0],
            LossSpec::huber(0.1),
        );
        let r = minimize(&inst, LossFamily::Huber, &SolverConfig::smooth()).unwrap();
        for w in r.cost_trace.windows(2) {
            assert!(w[1] <= w[0] + 1e-12);
        }
        assert!(r.converged);
        assert!((r.estimate.row(0)[0] - 1.0).abs() < 1e-6);
        assert!((r.estimate.row(0)[1] - 1.0).abs() < 1e-6);
    }
}
