//! Robust range-based sensor network localization.
//!
//! Sensors with unknown positions measure noisy ranges to each other and to
//! anchors with known positions. Penalizing range residuals with the Huber
//! loss keeps the estimator close to maximum likelihood under Gaussian noise
//! while limiting the pull of outliers. The resulting cost is nonconvex;
//! clamping every residual at zero before applying the loss gives its
//! term-wise convex envelope, which this crate minimizes with a first-order
//! method.
//!
//! - [`model`]: networks, measurements, loss specification, validation.
//! - [`loss`]: scalar kernels and their convexified composites.
//! - [`cost`]: nonconvex and convex costs with gradients.
//! - [`solver`]: gradient and subgradient descent on the convex cost.
//! - [`simulate`]: network generation, noise models, Monte Carlo experiments.
//! - [`io`]: the JSON instance format and report writers.
//!
//! ```
//! use robust_netloc::model::{AnchorLink, LossFamily, LossSpec, Measurements, Network, Positions, ProblemInstance};
//! use robust_netloc::solver::{minimize, SolverConfig};
//!
//! let anchors = Positions::from_rows(2, &[[0.0, 0.0], [2.0, 0.0], [1.0, 2.0]])?;
//! let links = (0..3).map(|k| AnchorLink::new(0, k));
//! let network = Network::new(2, 1, anchors, [], links)?;
//! let ranges = Measurements { ranges: vec![], anchor_ranges: vec![2f64.sqrt(), 2f64.sqrt(), 1.0] };
//! let instance = ProblemInstance::new(network, ranges, LossSpec::huber(0.1))?;
//!
//! let result = minimize(&instance, LossFamily::Huber, &SolverConfig::smooth())?;
//! let x = result.estimate.row(0);
//! assert!((x[0] - 1.0).abs() < 1e-6 && (x[1] - 1.0).abs() < 1e-6);
//! # Ok::<(), robust_netloc::Error>(())
//! ```

pub mod cost;
mod error;
pub mod io;
pub mod loss;
pub mod model;
pub mod simulate;
pub mod solver;

pub use error::{Error, Result};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../README.md")]
    mod readme {}
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/networks.md")]
    mod networks {}
    #[doc = include_str!("../../../book/src/huber.md")]
    mod huber {}
    #[doc = include_str!("../../../book/src/underestimator.md")]
    mod underestimator {}
    #[doc = include_str!("../../../book/src/solver.md")]
    mod solver {}
    #[doc = include_str!("../../../book/src/experiments.md")]
    mod experiments {}
}
