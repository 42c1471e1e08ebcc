//! JSON instance documents.
//!
//! One schema covers networks, measurement sets and full instances; every
//! part beyond the topology is optional:
//!
//! ```json
//! {
//!   "dim": 2,
//!   "sensors": 2,
//!   "anchors": [[0.0, 0.0], [1.0, 0.0]],
//!   "edges": [[0, 1]],
//!   "anchor_links": [[0, 0], [1, 1]],
//!   "ranges": [0.5],
//!   "anchor_ranges": [0.3, 0.4],
//!   "loss": {"family": "huber", "R": 0.1, "overrides": {"edges": [], "anchor_links": []}},
//!   "truth": [[0.3, 0.0], [0.8, 0.1]]
//! }
//! ```
//!
//! Indices are 0-based, lengths in kilometers, and `ranges`/`anchor_ranges`
//! are parallel to `edges`/`anchor_links`. `sensors` may be omitted when it
//! can be inferred from `truth` or from the largest index used.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{
    validate, AnchorLink, Edge, LossFamily, LossSpec, Measurements, Network, Positions,
    ProblemInstance,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadiusOverride<K> {
    #[serde(flatten)]
    pub key: K,
    #[serde(rename = "R")]
    pub radius: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeKey {
    pub edge: [usize; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnchorLinkKey {
    pub anchor_link: [usize; 2],
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Overrides {
    #[serde(default)]
    pub edges: Vec<RadiusOverride<EdgeKey>>,
    #[serde(default)]
    pub anchor_links: Vec<RadiusOverride<AnchorLinkKey>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossDocument {
    pub family: LossFamily,
    #[serde(rename = "R", default = "default_radius")]
    pub radius: f64,
    #[serde(default)]
    pub overrides: Overrides,
}

fn default_radius() -> f64 {
    LossSpec::DEFAULT_RADIUS
}

impl From<&LossSpec> for LossDocument {
    fn from(spec: &LossSpec) -> Self {
        Self {
            family: spec.family,
            radius: spec.radius,
            overrides: Overrides {
                edges: spec
                    .edge_radii
                    .iter()
                    .map(|(e, &radius)| RadiusOverride {
                        key: EdgeKey { edge: (*e).into() },
                        radius,
                    })
                    .collect(),
                anchor_links: spec
                    .anchor_radii
                    .iter()
                    .map(|(l, &radius)| RadiusOverride {
                        key: AnchorLinkKey {
                            anchor_link: (*l).into(),
                        },
                        radius,
                    })
                    .collect(),
            },
        }
    }
}

impl From<&LossDocument> for LossSpec {
    fn from(doc: &LossDocument) -> Self {
        let mut spec = LossSpec::new(doc.family, doc.radius);
        for o in &doc.overrides.edges {
            spec.edge_radii.insert(Edge::from(o.key.edge), o.radius);
        }
        for o in &doc.overrides.anchor_links {
            spec.anchor_radii.insert(AnchorLink::from(o.key.anchor_link), o.radius);
        }
        spec
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceDocument {
    pub dim: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sensors: Option<usize>,
    #[serde(default)]
    pub anchors: Vec<Vec<f64>>,
    #[serde(default)]
    pub edges: Vec<[usize; 2]>,
    #[serde(default)]
    pub anchor_links: Vec<[usize; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ranges: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub anchor_ranges: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub loss: Option<LossDocument>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub truth: Option<Vec<Vec<f64>>>,
}

/// The typed contents of a document. Nothing here has been validated.
#[derive(Debug, Clone, PartialEq)]
pub struct DocumentParts {
    pub network: Network,
    pub measurements: Option<Measurements>,
    pub loss: Option<LossSpec>,
    pub truth: Option<Positions>,
}

impl InstanceDocument {
    pub fn from_network(network: &Network) -> Self {
        Self {
            dim: network.dim,
            sensors: Some(network.sensors),
            anchors: network.anchors.rows().map(<[f64]>::to_vec).collect(),
            edges: network.edges.iter().map(|&e| e.into()).collect(),
            anchor_links: network.anchor_links.iter().map(|&l| l.into()).collect(),
            ranges: None,
            anchor_ranges: None,
            loss: None,
            truth: None,
        }
    }

    pub fn from_instance(instance: &ProblemInstance) -> Self {
        Self {
            ranges: Some(instance.measurements.ranges.clone()),
            anchor_ranges: Some(instance.measurements.anchor_ranges.clone()),
            loss: Some(LossDocument::from(&instance.loss)),
            ..Self::from_network(&instance.network)
        }
    }

    pub fn with_measurements(mut self, measurements: &Measurements) -> Self {
        self.ranges = Some(measurements.ranges.clone());
        self.anchor_ranges = Some(measurements.anchor_ranges.clone());
        self
    }

    pub fn with_truth(mut self, truth: &Positions) -> Self {
        self.truth = Some(truth.rows().map(<[f64]>::to_vec).collect());
        self
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    /// Converts into typed parts: edges become canonical and are sorted
    /// together with their ranges. Structural problems (out-of-range
    /// indices, duplicates, negative ranges) are left for [`validate`].
    pub fn to_parts(&self) -> Result<DocumentParts> {
        let dim = self.dim;
        let rows_to_positions = |rows: &[Vec<f64>], what: &str| -> Result<Positions> {
            if rows.is_empty() {
                return Ok(Positions::zeros(0, dim.max(1)));
            }
            Positions::from_rows(dim, rows)
                .map_err(|_| Error::InvalidInstance(format!("{what} rows must have length {dim}")))
        };
        let anchors = rows_to_positions(&self.anchors, "anchor")?;
        let truth = match &self.truth {
            Some(rows) => Some(rows_to_positions(rows, "truth")?),
            None => None,
        };

        let max_index = self
            .edges
            .iter()
            .flat_map(|e| e.iter().copied())
            .chain(self.anchor_links.iter().map(|l| l[0]))
            .max()
            .map(|m| m + 1)
            .unwrap_or(0);
        let sensors = self
            .sensors
            .or(truth.as_ref().map(Positions::len))
            .unwrap_or(max_index);

        let ranges = self.ranges.clone();
        let anchor_ranges = self.anchor_ranges.clone();
        let (edges, ranges) = sort_parallel(self.edges.iter().map(|&e| Edge::from(e)).collect(), ranges)?;
        let (anchor_links, anchor_ranges) = sort_parallel(
            self.anchor_links.iter().map(|&l| AnchorLink::from(l)).collect(),
            anchor_ranges,
        )?;

        let measurements = match (ranges, anchor_ranges) {
            (None, None) => None,
            (r, a) => Some(Measurements {
                ranges: r.unwrap_or_default(),
                anchor_ranges: a.unwrap_or_default(),
            }),
        };

        Ok(DocumentParts {
            network: Network {
                dim,
                sensors,
                anchors,
                edges,
                anchor_links,
            },
            measurements,
            loss: self.loss.as_ref().map(LossSpec::from),
            truth,
        })
    }

    /// A validated instance. `loss` fills in when the document carries none.
    pub fn to_instance(&self, loss: Option<LossSpec>) -> Result<ProblemInstance> {
        let parts = self.to_parts()?;
        let measurements = parts
            .measurements
            .ok_or_else(|| Error::InvalidInstance("document has no ranges".into()))?;
        let loss = parts.loss.or(loss).unwrap_or_default();
        let instance = ProblemInstance {
            network: parts.network,
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
}

fn sort_parallel<K: Ord + Copy>(keys: Vec<K>, values: Option<Vec<f64>>) -> Result<(Vec<K>, Option<Vec<f64>>)> {
    match values {
        None => {
            let mut keys = keys;
            keys.sort();
            Ok((keys, None))
        }
        Some(values) if values.len() != keys.len() => {
            // Leave the mismatch in place for the validator to report.
            let mut keys = keys;
            keys.sort();
            Ok((keys, Some(values)))
        }
        Some(values) => {
            let mut pairs: Vec<(K, f64)> = keys.into_iter().zip(values).collect();
            pairs.sort_by_key(|p| p.0);
            let (k, v) = pairs.into_iter().unzip();
            Ok((k, Some(v)))
        }
    }
}
