//! Cost assembly over a problem instance.
//!
//! Each measured pair contributes one term built from its residual
//! `δ = ‖x_i − x_j‖ − d_ij` (or `‖x_i − a_k‖ − r_ik` for anchor links):
//!
//! - the nonconvex cost sums `h(δ)` over all terms; for the quadratic family
//!   each term carries a factor ½ (the Gaussian maximum-likelihood cost),
//! - the convex underestimator sums `h(max{0, δ})` with no ½ factor.
//!
//! Gradients are taken with respect to the stacked sensor coordinates and
//! accumulated in a fixed order (edges, then anchor links), so results are
//! bit-reproducible. Where two points coincide the direction `u` of the norm
//! is undefined and the term contributes nothing to the gradient.

use crate::error::{Error, Result};
use crate::loss::Kernel;
use crate::model::{distance, LossFamily, Positions, ProblemInstance};

/// Residuals parallel to the network's edges and anchor links.
#[derive(Debug, Clone, PartialEq)]
pub struct Residuals {
    pub edges: Vec<f64>,
    pub anchors: Vec<f64>,
}

impl Residuals {
    pub fn iter(&self) -> impl Iterator<Item = f64> + '_ {
        self.edges.iter().chain(&self.anchors).copied()
    }

    pub fn all_nonnegative(&self) -> bool {
        self.iter().all(|d| d >= 0.0)
    }

    pub fn max_abs(&self) -> f64 {
        self.iter().fold(0.0, |m, d| m.max(d.abs()))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CostEval {
    pub value: f64,
    pub gradient: Vec<f64>,
}

/// Which version of a family's cost an [`Objective`] evaluates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Form {
    /// `Σ h(s(δ))`, no ½.
    Convex,
    /// `Σ h(δ)`, ½ per term for the quadratic family.
    Nonconvex,
    /// `Σ h(δ)` with no ½ for any family; the scaling that `Convex` underestimates.
    NonconvexUnscaled,
}

#[derive(Debug, Clone, Copy)]
enum Partner {
    Sensor(usize),
    Anchor(usize),
}

#[derive(Debug, Clone, Copy)]
struct Term {
    sensor: usize,
    partner: Partner,
    range: f64,
    kernel: Kernel,
}

/// A cost compiled from an instance for repeated evaluation.
#[derive(Debug, Clone)]
pub struct Objective<'a> {
    instance: &'a ProblemInstance,
    form: Form,
    scale: f64,
    terms: Vec<Term>,
}

impl<'a> Objective<'a> {
    /// Resolves the per-term kernels of `family`, using the radii of `instance.loss`.
    pub fn new(instance: &'a ProblemInstance, family: LossFamily, form: Form) -> Result<Self> {
        let network = &instance.network;
        let meas = &instance.measurements;
        if meas.ranges.len() != network.edges.len()
            || meas.anchor_ranges.len() != network.anchor_links.len()
        {
            return Err(Error::InvalidInstance(
                "measurement counts do not match the network".into(),
            ));
        }
        let loss = &instance.loss;
        let mut terms = Vec::with_capacity(network.edges.len() + network.anchor_links.len());
        for (edge, &range) in network.edges.iter().zip(&meas.ranges) {
            terms.push(Term {
                sensor: edge.a,
                partner: Partner::Sensor(edge.b),
                range,
                kernel: Kernel::new(family, loss.edge_radius(edge))?,
            });
        }
        for (link, &range) in network.anchor_links.iter().zip(&meas.anchor_ranges) {
            terms.push(Term {
                sensor: link.sensor,
                partner: Partner::Anchor(link.anchor),
                range,
                kernel: Kernel::new(family, loss.anchor_radius(link))?,
            });
        }
        let scale = match (form, family) {
            (Form::Nonconvex, LossFamily::Quadratic) => 0.5,
            _ => 1.0,
        };
        Ok(Self {
            instance,
            form,
            scale,
            terms,
        })
    }

    pub fn instance(&self) -> &ProblemInstance {
        self.instance
    }

    /// Length of the stacked variable.
    pub fn len(&self) -> usize {
        self.instance.sensors() * self.instance.dim()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn has_terms(&self) -> bool {
        !self.terms.is_empty()
    }

    /// Cost at the stacked point `x`; if `gradient` is given it is overwritten.
    pub fn eval(&self, x: &[f64], mut gradient: Option<&mut [f64]>) -> f64 {
        let p = self.instance.dim();
        let anchors = &self.instance.network.anchors;
        if let Some(g) = gradient.as_deref_mut() {
            g.fill(0.0);
        }
        let mut value = 0.0;
        let mut diff = [0.0f64; 3];
        for term in &self.terms {
            let xi = &x[term.sensor * p..(term.sensor + 1) * p];
            let other = match term.partner {
                Partner::Sensor(j) => &x[j * p..(j + 1) * p],
                Partner::Anchor(k) => anchors.row(k),
            };
            let mut sq = 0.0;
            for c in 0..p {
                diff[c] = xi[c] - other[c];
                sq += diff[c] * diff[c];
            }
            let dist = sq.sqrt();
            let delta = dist - term.range;
            let lv = match self.form {
                Form::Convex => term.kernel.eval_convexified(delta),
                Form::Nonconvex | Form::NonconvexUnscaled => term.kernel.eval(delta),
            };
            value += self.scale * lv.value;
            if let Some(g) = gradient.as_deref_mut() {
                if lv.derivative != 0.0 && dist > 0.0 {
                    let w = self.scale * lv.derivative / dist;
                    let i0 = term.sensor * p;
                    for c in 0..p {
                        g[i0 + c] += w * diff[c];
                    }
                    if let Partner::Sensor(j) = term.partner {
                        let j0 = j * p;
                        for c in 0..p {
                            g[j0 + c] -= w * diff[c];
                        }
                    }
                }
            }
        }
        value
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        self.eval(x, None)
    }

    pub fn eval_with_gradient(&self, x: &[f64]) -> CostEval {
        let mut gradient = vec![0.0; x.len()];
        let value = self.eval(x, Some(&mut gradient));
        CostEval { value, gradient }
    }

    /// Smallest distance from `x` to a point where this cost fails to be
    /// twice differentiable: residual at 0 or at ±R, or coincident points.
    pub fn kink_margin(&self, x: &[f64]) -> f64 {
        let p = self.instance.dim();
        let anchors = &self.instance.network.anchors;
        let mut margin = f64::INFINITY;
        for term in &self.terms {
            let xi = &x[term.sensor * p..(term.sensor + 1) * p];
            let other = match term.partner {
                Partner::Sensor(j) => &x[j * p..(j + 1) * p],
                Partner::Anchor(k) => anchors.row(k),
            };
            let dist = distance(xi, other);
            let delta = dist - term.range;
            margin = margin.min(dist).min(delta.abs());
            if let Kernel::Huber(h) = term.kernel {
                margin = margin.min((delta.abs() - h.radius()).abs());
            }
        }
        margin
    }
}

pub fn residuals(instance: &ProblemInstance, positions: &Positions) -> Residuals {
    let network = &instance.network;
    let meas = &instance.measurements;
    let edges = network
        .edges
        .iter()
        .zip(&meas.ranges)
        .map(|(e, &d)| distance(positions.row(e.a), positions.row(e.b)) - d)
        .collect();
    let anchors = network
        .anchor_links
        .iter()
        .zip(&meas.anchor_ranges)
        .map(|(l, &r)| distance(positions.row(l.sensor), network.anchors.row(l.anchor)) - r)
        .collect();
    Residuals { edges, anchors }
}

fn evaluate(
    instance: &ProblemInstance,
    positions: &Positions,
    family: LossFamily,
    form: Form,
) -> Result<CostEval> {
    let objective = Objective::new(instance, family, form)?;
    if positions.as_slice().len() != objective.len() {
        return Err(Error::LengthMismatch {
            expected: objective.len(),
            actual: positions.as_slice().len(),
        });
    }
    Ok(objective.eval_with_gradient(positions.as_slice()))
}

/// The nonconvex cost of `family` (with the ½ factor for quadratic) and its gradient.
pub fn eval_nonconvex(
    instance: &ProblemInstance,
    positions: &Positions,
    family: LossFamily,
) -> Result<CostEval> {
    evaluate(instance, positions, family, Form::Nonconvex)
}

/// The nonconvex cost without any ½ factor.
pub fn eval_nonconvex_unscaled(
    instance: &ProblemInstance,
    positions: &Positions,
    family: LossFamily,
) -> Result<CostEval> {
    evaluate(instance, positions, family, Form::NonconvexUnscaled)
}

/// The convex underestimator `f` of `family` and its gradient (a subgradient
/// for the absolute family).
pub fn eval_convex(
    instance: &ProblemInstance,
    positions: &Positions,
    family: LossFamily,
) -> Result<CostEval> {
    evaluate(instance, positions, family, Form::Convex)
}

/// Largest mismatch between the analytic gradient and central differences.
///
/// The error of each coordinate is `|g − fd| / max(1, |g|, |fd|)`. Fails with
/// [`Error::NearKink`] when `x` is within `10·step` of a kink, where central
/// differences are meaningless; callers are expected to resample.
pub fn finite_difference_error(objective: &Objective<'_>, x: &[f64], step: f64) -> Result<f64> {
    let margin = objective.kink_margin(x);
    if margin < 10.0 * step {
        return Err(Error::NearKink { margin });
    }
    let analytic = objective.eval_with_gradient(x).gradient;
    let mut probe = x.to_vec();
    let mut worst = 0.0f64;
    for (c, &g) in analytic.iter().enumerate() {
        let orig = probe[c];
        probe[c] = orig + step;
        let up = objective.value(&probe);
        probe[c] = orig - step;
        let down = objective.value(&probe);
        probe[c] = orig;
        let fd = (up - down) / (2.0 * step);
        let err = (g - fd).abs() / 1.0f64.max(g.abs()).max(fd.abs());
        worst = worst.max(err);
    }
    Ok(worst)
}

/// [`finite_difference_error`] for the convex cost of `family`.
pub fn gradient_check(
    instance: &ProblemInstance,
    positions: &Positions,
    family: LossFamily,
    step: f64,
) -> Result<f64> {
    let objective = Objective::new(instance, family, Form::Convex)?;
    finite_difference_error(&objective, positions.as_slice(), step)
}
