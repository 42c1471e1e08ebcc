//! Network, measurement and problem-instance types.
//!
//! Sensors are the unknowns and form an undirected graph whose edges carry
//! sensor-to-sensor ranges. Anchors have known positions and are *not*
//! vertices of that graph; a sensor may additionally hold ranges to a subset
//! of the anchors ("anchor links"). All lengths are kilometers.
//!
//! The types here are plain data. [`validate`] reports every broken invariant
//! instead of stopping at the first, so instances loaded from files can be
//! diagnosed in one pass.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A set of points in ℝ^p stored row-major: row `i` is point `i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Positions {
    dim: usize,
    coords: Vec<f64>,
}

impl Positions {
    /// Wraps a row-major coordinate buffer. `coords.len()` must be a multiple of `dim`.
    pub fn new(dim: usize, coords: Vec<f64>) -> Result<Self> {
        if dim == 0 || !coords.len().is_multiple_of(dim) {
            return Err(Error::InvalidInstance(format!(
                "{} coordinates do not form rows of dimension {dim}",
                coords.len()
            )));
        }
        Ok(Self { dim, coords })
    }

    pub fn zeros(count: usize, dim: usize) -> Self {
        Self {
            dim,
            coords: vec![0.0; count * dim],
        }
    }

    /// Builds positions from a list of rows, all of the same length.
    pub fn from_rows<R: AsRef<[f64]>>(dim: usize, rows: &[R]) -> Result<Self> {
        let mut coords = Vec::with_capacity(rows.len() * dim);
        for row in rows {
            let row = row.as_ref();
            if row.len() != dim {
                return Err(Error::LengthMismatch {
                    expected: dim,
                    actual: row.len(),
                });
            }
            coords.extend_from_slice(row);
        }
        Ok(Self { dim, coords })
    }

    /// Inverse of [`Positions::stack`].
    pub fn unstack(stacked: &[f64], count: usize, dim: usize) -> Result<Self> {
        if stacked.len() != count * dim {
            return Err(Error::LengthMismatch {
                expected: count * dim,
                actual: stacked.len(),
            });
        }
        Ok(Self {
            dim,
            coords: stacked.to_vec(),
        })
    }

    /// The stacked vector `(x_1, x_2, …, x_n)` of length `n·p`.
    pub fn stack(&self) -> Vec<f64> {
        self.coords.clone()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of points.
    pub fn len(&self) -> usize {
        self.coords.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.coords.chunks_exact(self.dim)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.coords
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.coords
    }

    pub fn is_finite(&self) -> bool {
        self.coords.iter().all(|c| c.is_finite())
    }
}

/// Euclidean distance between two points of equal dimension.
pub fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// Undirected sensor-sensor edge, stored as `(min, max)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(from = "[usize; 2]", into = "[usize; 2]")]
pub struct Edge {
    pub a: usize,
    pub b: usize,
}

impl Edge {
    pub fn new(i: usize, j: usize) -> Self {
        Self {
            a: i.min(j),
            b: i.max(j),
        }
    }

    pub fn is_self_loop(&self) -> bool {
        self.a == self.b
    }
}

impl From<[usize; 2]> for Edge {
    fn from([i, j]: [usize; 2]) -> Self {
        Edge::new(i, j)
    }
}

impl From<Edge> for [usize; 2] {
    fn from(e: Edge) -> Self {
        [e.a, e.b]
    }
}

impl fmt::Display for Edge {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{{}, {}}}", self.a, self.b)
    }
}

/// A range measurement between sensor `sensor` and anchor `anchor`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(from = "[usize; 2]", into = "[usize; 2]")]
pub struct AnchorLink {
    pub sensor: usize,
    pub anchor: usize,
}

impl AnchorLink {
    pub fn new(sensor: usize, anchor: usize) -> Self {
        Self { sensor, anchor }
    }
}

impl From<[usize; 2]> for AnchorLink {
    fn from([sensor, anchor]: [usize; 2]) -> Self {
        AnchorLink { sensor, anchor }
    }
}

impl From<AnchorLink> for [usize; 2] {
    fn from(l: AnchorLink) -> Self {
        [l.sensor, l.anchor]
    }
}

impl fmt::Display for AnchorLink {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(sensor {}, anchor {})", self.sensor, self.anchor)
    }
}

/// Sensor graph plus anchors.
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    pub dim: usize,
    pub sensors: usize,
    pub anchors: Positions,
    pub edges: Vec<Edge>,
    pub anchor_links: Vec<AnchorLink>,
}

impl Network {
    /// Builds a network, sorting edges and anchor links into canonical order
    /// and rejecting anything [`validate_network`] would flag.
    pub fn new(
        dim: usize,
        sensors: usize,
        anchors: Positions,
        edges: impl IntoIterator<Item = Edge>,
        anchor_links: impl IntoIterator<Item = AnchorLink>,
    ) -> Result<Self> {
        let mut edges: Vec<Edge> = edges.into_iter().collect();
        edges.sort();
        let mut anchor_links: Vec<AnchorLink> = anchor_links.into_iter().collect();
        anchor_links.sort();
        let network = Self {
            dim,
            sensors,
            anchors,
            edges,
            anchor_links,
        };
        let report = validate_network(&network);
        if !report.is_empty() {
            return Err(Error::InvalidInstance(report.to_string()));
        }
        Ok(network)
    }

    pub fn anchor_count(&self) -> usize {
        self.anchors.len()
    }

    /// `N_i`: sensor neighbors of sensor `i`.
    pub fn neighbors(&self, i: usize) -> Vec<usize> {
        self.edges
            .iter()
            .filter_map(|e| {
                if e.a == i {
                    Some(e.b)
                } else if e.b == i {
                    Some(e.a)
                } else {
                    None
                }
            })
            .collect()
    }

    /// `A_i`: anchors with a measured range to sensor `i`.
    pub fn anchors_of(&self, i: usize) -> Vec<usize> {
        self.anchor_links
            .iter()
            .filter(|l| l.sensor == i)
            .map(|l| l.anchor)
            .collect()
    }
}

/// Ranges parallel to [`Network::edges`] and [`Network::anchor_links`].
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Measurements {
    pub ranges: Vec<f64>,
    pub anchor_ranges: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LossFamily {
    Quadratic,
    Absolute,
    Huber,
}

impl LossFamily {
    pub const ALL: [LossFamily; 3] = [LossFamily::Quadratic, LossFamily::Absolute, LossFamily::Huber];

    pub fn name(self) -> &'static str {
        match self {
            LossFamily::Quadratic => "quadratic",
            LossFamily::Absolute => "absolute",
            LossFamily::Huber => "huber",
        }
    }

    /// Whether the convexified cost of this family is continuously differentiable.
    pub fn is_smooth(self) -> bool {
        !matches!(self, LossFamily::Absolute)
    }
}

impl fmt::Display for LossFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for LossFamily {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "q" | "quadratic" | "l2" => Ok(LossFamily::Quadratic),
            "l1" | "abs" | "absolute" => Ok(LossFamily::Absolute),
            "h" | "huber" => Ok(LossFamily::Huber),
            other => Err(format!(
                "unknown loss family '{other}' (expected quadratic|q, absolute|l1, huber)"
            )),
        }
    }
}

/// Loss family plus Huber radii: a global default and optional per-term overrides.
#[derive(Debug, Clone, PartialEq)]
pub struct LossSpec {
    pub family: LossFamily,
    pub radius: f64,
    pub edge_radii: BTreeMap<Edge, f64>,
    pub anchor_radii: BTreeMap<AnchorLink, f64>,
}

impl LossSpec {
    /// Radius used when a spec is built for a non-Huber family. It is never
    /// read by the quadratic or absolute kernels.
    pub const DEFAULT_RADIUS: f64 = 0.1;

    pub fn new(family: LossFamily, radius: f64) -> Self {
        Self {
            family,
            radius,
            edge_radii: BTreeMap::new(),
            anchor_radii: BTreeMap::new(),
        }
    }

    pub fn huber(radius: f64) -> Self {
        Self::new(LossFamily::Huber, radius)
    }

    pub fn quadratic() -> Self {
        Self::new(LossFamily::Quadratic, Self::DEFAULT_RADIUS)
    }

    pub fn absolute() -> Self {
        Self::new(LossFamily::Absolute, Self::DEFAULT_RADIUS)
    }

    pub fn with_edge_radius(mut self, edge: Edge, radius: f64) -> Self {
        self.edge_radii.insert(edge, radius);
        self
    }

    pub fn with_anchor_radius(mut self, link: AnchorLink, radius: f64) -> Self {
        self.anchor_radii.insert(link, radius);
        self
    }

    pub fn edge_radius(&self, edge: &Edge) -> f64 {
        if self.edge_radii.is_empty() {
            return self.radius;
        }
        self.edge_radii.get(edge).copied().unwrap_or(self.radius)
    }

    pub fn anchor_radius(&self, link: &AnchorLink) -> f64 {
        if self.anchor_radii.is_empty() {
            return self.radius;
        }
        self.anchor_radii.get(link).copied().unwrap_or(self.radius)
    }
}

impl Default for LossSpec {
    fn default() -> Self {
        Self::huber(Self::DEFAULT_RADIUS)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProblemInstance {
    pub network: Network,
    pub measurements: Measurements,
    pub loss: LossSpec,
}

impl ProblemInstance {
    /// Assembles an instance and fails with the full violation list if it is malformed.
    pub fn new(network: Network, measurements: Measurements, loss: LossSpec) -> Result<Self> {
        let instance = Self {
            network,
            measurements,
            loss,
        };
        let report = validate(&instance);
        if report.is_empty() {
            Ok(instance)
        } else {
            Err(Error::InvalidInstance(report.to_string()))
        }
    }

    pub fn sensors(&self) -> usize {
        self.network.sensors
    }

    pub fn dim(&self) -> usize {
        self.network.dim
    }

    /// Same topology and ranges, different loss.
    pub fn with_loss(&self, loss: LossSpec) -> Self {
        Self {
            network: self.network.clone(),
            measurements: self.measurements.clone(),
            loss,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    UnsupportedDimension(usize),
    AnchorDimension { anchor_dim: usize, dim: usize },
    NonFiniteAnchor(usize),
    SelfLoop(Edge),
    DuplicateEdge(Edge),
    EdgeOutOfRange(Edge),
    DuplicateAnchorLink(AnchorLink),
    AnchorLinkOutOfRange(AnchorLink),
    RangeCount { expected: usize, actual: usize },
    AnchorRangeCount { expected: usize, actual: usize },
    NegativeRange { edge: Edge, value: f64 },
    NegativeAnchorRange { link: AnchorLink, value: f64 },
    NonFiniteRange(String),
    NonPositiveRadius { term: String, value: f64 },
    RadiusOverrideUnknown(String),
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::UnsupportedDimension(p) => write!(f, "unsupported dimension {p} (expected 2 or 3)"),
            Violation::AnchorDimension { anchor_dim, dim } => {
                write!(f, "anchor dimension {anchor_dim} does not match network dimension {dim}")
            }
            Violation::NonFiniteAnchor(k) => write!(f, "anchor {k} has non-finite coordinates"),
            Violation::SelfLoop(e) => write!(f, "self-loop {e}"),
            Violation::DuplicateEdge(e) => write!(f, "duplicate edge {e}"),
            Violation::EdgeOutOfRange(e) => write!(f, "edge {e} references a sensor out of range"),
            Violation::DuplicateAnchorLink(l) => write!(f, "duplicate anchor link {l}"),
            Violation::AnchorLinkOutOfRange(l) => write!(f, "anchor link {l} out of range"),
            Violation::RangeCount { expected, actual } => {
                write!(f, "expected {expected} sensor ranges, found {actual}")
            }
            Violation::AnchorRangeCount { expected, actual } => {
                write!(f, "expected {expected} anchor ranges, found {actual}")
            }
            Violation::NegativeRange { edge, value } => write!(f, "negative range {value} on edge {edge}"),
            Violation::NegativeAnchorRange { link, value } => {
                write!(f, "negative range {value} on anchor link {link}")
            }
            Violation::NonFiniteRange(term) => write!(f, "non-finite range on {term}"),
            Violation::NonPositiveRadius { term, value } => {
                write!(f, "missing or non-positive Huber radius {value} on {term}")
            }
            Violation::RadiusOverrideUnknown(term) => {
                write!(f, "radius override for {term}, which is not a measured term")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_empty(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn len(&self) -> usize {
        self.violations.len()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, v) in self.violations.iter().enumerate() {
            if i > 0 {
                f.write_str("; ")?;
            }
            write!(f, "{v}")?;
        }
        Ok(())
    }
}

/// Checks the network on its own: dimension, anchors, edge and link indices.
pub fn validate_network(network: &Network) -> ValidationReport {
    let mut violations = Vec::new();
    if !(2..=3).contains(&network.dim) {
        violations.push(Violation::UnsupportedDimension(network.dim));
    }
    if network.anchors.dim() != network.dim && !network.anchors.is_empty() {
        violations.push(Violation::AnchorDimension {
            anchor_dim: network.anchors.dim(),
            dim: network.dim,
        });
    }
    for (k, a) in network.anchors.rows().enumerate() {
        if a.iter().any(|c| !c.is_finite()) {
            violations.push(Violation::NonFiniteAnchor(k));
        }
    }

    let mut seen = BTreeSet::new();
    for &e in &network.edges {
        if e.is_self_loop() {
            violations.push(Violation::SelfLoop(e));
        } else if e.b >= network.sensors {
            violations.push(Violation::EdgeOutOfRange(e));
        } else if !seen.insert(e) {
            violations.push(Violation::DuplicateEdge(e));
        }
    }

    let m = network.anchor_count();
    let mut seen = BTreeSet::new();
    for &l in &network.anchor_links {
        if l.sensor >= network.sensors || l.anchor >= m {
            violations.push(Violation::AnchorLinkOutOfRange(l));
        } else if !seen.insert(l) {
            violations.push(Violation::DuplicateAnchorLink(l));
        }
    }
    ValidationReport { violations }
}

/// Reports every invariant violation of an instance; empty iff well formed.
pub fn validate(instance: &ProblemInstance) -> ValidationReport {
    let mut report = validate_network(&instance.network);
    let violations = &mut report.violations;
    let network = &instance.network;
    let meas = &instance.measurements;

    if meas.ranges.len() != network.edges.len() {
        violations.push(Violation::RangeCount {
            expected: network.edges.len(),
            actual: meas.ranges.len(),
        });
    }
    if meas.anchor_ranges.len() != network.anchor_links.len() {
        violations.push(Violation::AnchorRangeCount {
            expected: network.anchor_links.len(),
            actual: meas.anchor_ranges.len(),
        });
    }
    for (&edge, &value) in network.edges.iter().zip(&meas.ranges) {
        if !value.is_finite() {
            violations.push(Violation::NonFiniteRange(format!("edge {edge}")));
        } else if value < 0.0 {
            violations.push(Violation::NegativeRange { edge, value });
        }
    }
    for (&link, &value) in network.anchor_links.iter().zip(&meas.anchor_ranges) {
        if !value.is_finite() {
            violations.push(Violation::NonFiniteRange(format!("anchor link {link}")));
        } else if value < 0.0 {
            violations.push(Violation::NegativeAnchorRange { link, value });
        }
    }

    let loss = &instance.loss;
    if loss.family == LossFamily::Huber {
        let bad = |r: f64| !(r.is_finite() && r > 0.0);
        if bad(loss.radius) {
            violations.push(Violation::NonPositiveRadius {
                term: "default".into(),
                value: loss.radius,
            });
        }
        for (edge, &r) in &loss.edge_radii {
            if bad(r) {
                violations.push(Violation::NonPositiveRadius {
                    term: format!("edge {edge}"),
                    value: r,
                });
            }
        }
        for (link, &r) in &loss.anchor_radii {
            if bad(r) {
                violations.push(Violation::NonPositiveRadius {
                    term: format!("anchor link {link}"),
                    value: r,
                });
            }
        }
    }
    for edge in loss.edge_radii.keys() {
        if !network.edges.contains(edge) {
            violations.push(Violation::RadiusOverrideUnknown(format!("edge {edge}")));
        }
    }
    for link in loss.anchor_radii.keys() {
        if !network.anchor_links.contains(link) {
            violations.push(Violation::RadiusOverrideUnknown(format!("anchor link {link}")));
        }
    }
    report
}

/// Per-sensor degrees `k_i` and their averages `<k> = (1/n) Σ k_i`.
///
/// `sensor_degree` counts sensor-sensor edges only; `combined_degree`
/// also counts the sensor's anchor links.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DegreeStats {
    pub sensor_degree: Vec<usize>,
    pub combined_degree: Vec<usize>,
    pub average_sensor: f64,
    pub average_combined: f64,
}

pub fn degree_stats(network: &Network) -> DegreeStats {
    let n = network.sensors;
    let mut sensor_degree = vec![0usize; n];
    for e in &network.edges {
        sensor_degree[e.a] += 1;
        sensor_degree[e.b] += 1;
    }
    let mut combined_degree = sensor_degree.clone();
    for l in &network.anchor_links {
        combined_degree[l.sensor] += 1;
    }
    let mean = |v: &[usize]| {
        if n == 0 {
            0.0
        } else {
            v.iter().sum::<usize>() as f64 / n as f64
        }
    };
    DegreeStats {
        average_sensor: mean(&sensor_degree),
        average_combined: mean(&combined_degree),
        sensor_degree,
        combined_degree,
    }
}
