#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use robust_netloc::io::InstanceDocument;
use robust_netloc::model::{AnchorLink, Edge, LossSpec, Measurements, Network, Positions, ProblemInstance};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn corners() -> Positions {
    Positions::from_rows(2, &[[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]]).unwrap()
}

/// A random instance on the unit square: 2..=8 sensors, random edges and
/// anchor links, ranges perturbed from the truth by up to ±30%.
pub fn random_instance(seed: u64) -> (ProblemInstance, Positions) {
    let mut rng = rng(seed);
    let n = rng.random_range(2..=8);
    let truth = Positions::new(2, (0..2 * n).map(|_| rng.random::<f64>()).collect()).unwrap();
    let anchors = corners();
    let mut edges = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            if rng.random_bool(0.5) {
                edges.push(Edge::new(i, j));
            }
        }
    }
    let mut links = Vec::new();
    for i in 0..n {
        for k in 0..4 {
            if rng.random_bool(0.4) {
                links.push(AnchorLink::new(i, k));
            }
        }
    }
    if edges.is_empty() && links.is_empty() {
        links.push(AnchorLink::new(0, 0));
    }
    let mut perturb = |d: f64| d * rng.random_range(0.7..1.3);
    let ranges = edges
        .iter()
        .map(|e| perturb(robust_netloc::model::distance(truth.row(e.a), truth.row(e.b))))
        .collect();
    let anchor_ranges = links
        .iter()
        .map(|l| perturb(robust_netloc::model::distance(truth.row(l.sensor), anchors.row(l.anchor))))
        .collect();
    let network = Network::new(2, n, anchors, edges, links).unwrap();
    let radius = rng.random_range(0.05..0.5);
    let instance = ProblemInstance::new(network, Measurements { ranges, anchor_ranges }, LossSpec::huber(radius)).unwrap();
    (instance, truth)
}

/// Uniform positions in `[-0.5, 1.5]²` for every sensor of `instance`.
pub fn random_positions(instance: &ProblemInstance, rng: &mut ChaCha8Rng) -> Positions {
    let len = instance.sensors() * instance.dim();
    Positions::new(instance.dim(), (0..len).map(|_| rng.random_range(-0.5..1.5)).collect()).unwrap()
}

/// Single-sensor instance with exact ranges to every anchor.
pub fn single_sensor(anchors: &[[f64; 2]], ranges: &[f64], loss: LossSpec) -> ProblemInstance {
    let anchors = Positions::from_rows(2, anchors).unwrap();
    let links: Vec<_> = (0..anchors.len()).map(|k| AnchorLink::new(0, k)).collect();
    let network = Network::new(2, 1, anchors, [], links).unwrap();
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

pub fn canonical_path() -> std::path::PathBuf {
    std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("data/canonical_network.json")
}

/// The committed 10-sensor network and its true positions.
pub fn canonical_network() -> (Network, Positions) {
    let parts = InstanceDocument::read(canonical_path()).unwrap().to_parts().unwrap();
    (parts.network, parts.truth.unwrap())
}
pub mod checks;
