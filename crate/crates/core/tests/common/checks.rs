//! Criterion-sized checks shared by the acceptance runner and the suites.
#![allow(dead_code)]

use rand::Rng;
use robust_netloc::cost::{eval_convex, eval_nonconvex_unscaled, gradient_check};
use robust_netloc::model::{distance, LossFamily, LossSpec, Measurements, Positions, ProblemInstance};
use robust_netloc::solver::{minimize, InitStrategy, SolverConfig};
use robust_netloc::Error;

use super::{random_instance, random_positions, rng};

#[derive(Debug, Default)]
pub struct UnderestimatorStats {
    pub samples: usize,
    pub bound_violations: usize,
    pub equality_samples: usize,
    pub equality_violations: usize,
}

/// Measurements that make every residual at `x` nonnegative: each range is
/// a random fraction of the current distance.
pub fn ranges_below(instance: &ProblemInstance, x: &Positions, rng: &mut impl Rng) -> ProblemInstance {
    let net = &instance.network;
    let ranges = net
        .edges
        .iter()
        .map(|e| distance(x.row(e.a), x.row(e.b)) * rng.random::<f64>())
        .collect();
    let anchor_ranges = net
        .anchor_links
        .iter()
        .map(|l| distance(x.row(l.sensor), net.anchors.row(l.anchor)) * rng.random::<f64>())
        .collect();
    ProblemInstance::new(net.clone(), Measurements { ranges, anchor_ranges }, instance.loss.clone()).unwrap()
}

/// `f ≤ g` at random points, and `f = g` where every residual is nonnegative.
/// Half of each instance's samples go to each check.
pub fn underestimator(instances: u64, samples: usize) -> UnderestimatorStats {
    let per = samples / instances as usize;
    let mut stats = UnderestimatorStats::default();
    for seed in 0..instances {
        let (inst, _) = random_instance(seed);
        let mut rng = rng(1000 + seed);
        for s in 0..per {
            let x = random_positions(&inst, &mut rng);
            let (inst, equality) = if s % 2 == 0 {
                (inst.clone(), false)
            } else {
                (ranges_below(&inst, &x, &mut rng), true)
            };
            stats.samples += 1;
            stats.equality_samples += equality as usize;
            for family in LossFamily::ALL {
                let f = eval_convex(&inst, &x, family).unwrap().value;
                let g = eval_nonconvex_unscaled(&inst, &x, family).unwrap().value;
                if f > g {
                    stats.bound_violations += 1;
                }
                if equality && f != g {
                    stats.equality_violations += 1;
                }
            }
        }
    }
    stats
}

/// Worst `f((x+y)/2) − (f(x)+f(y))/2` over random pairs and every family.
pub fn convexity(instances: u64, pairs: usize) -> (usize, f64) {
    let per = pairs / instances as usize;
    let mut worst = f64::NEG_INFINITY;
    let mut count = 0;
    for seed in 0..instances {
        let (inst, _) = random_instance(seed + 500);
        let mut rng = rng(2000 + seed);
        for _ in 0..per {
            let x = random_positions(&inst, &mut rng);
            let y = random_positions(&inst, &mut rng);
            let mid: Vec<f64> = x.as_slice().iter().zip(y.as_slice()).map(|(a, b)| 0.5 * (a + b)).collect();
            let mid = Positions::new(x.dim(), mid).unwrap();
            for family in LossFamily::ALL {
                let f = |p: &Positions| eval_convex(&inst, p, family).unwrap().value;
                worst = worst.max(f(&mid) - 0.5 * (f(&x) + f(&y)));
            }
            count += 1;
        }
    }
    (count, worst)
}

/// Worst finite-difference mismatch over `points` smooth points per family.
/// Points within `10·step` of a kink are resampled.
pub fn gradient(family: LossFamily, points: usize, step: f64) -> f64 {
    let mut worst = 0.0f64;
    let mut rng = rng(3000 + family as u64);
    let mut done = 0;
    let mut seed = 0u64;
    while done < points {
        let (inst, _) = random_instance(10_000 + seed);
        seed += 1;
        for _ in 0..10 {
            let x = random_positions(&inst, &mut rng);
            match gradient_check(&inst, &x, family, step) {
                Ok(err) => {
                    worst = worst.max(err);
                    done += 1;
                }
                Err(Error::NearKink { .. }) => {}
                Err(e) => panic!("{e}"),
            }
        }
    }
    worst
}

/// Exhaustive minimization of a single-sensor cost: a `grid × grid` search
/// over the box, then repeated zooms around the best cell down to `cell`.
pub fn grid_search(instance: &ProblemInstance, family: LossFamily, lo: [f64; 2], hi: [f64; 2], grid: usize, cell: f64) -> (f64, [f64; 2]) {
    assert_eq!(instance.sensors(), 1);
    let cost = |p: [f64; 2]| eval_convex(instance, &Positions::new(2, p.to_vec()).unwrap(), family).unwrap().value;
    let mut lo = lo;
    let mut hi = hi;
    let mut steps = grid;
    let mut best = (f64::INFINITY, [0.0, 0.0]);
    loop {
        let h = [(hi[0] - lo[0]) / steps as f64, (hi[1] - lo[1]) / steps as f64];
        for i in 0..=steps {
            for j in 0..=steps {
                let p = [lo[0] + i as f64 * h[0], lo[1] + j as f64 * h[1]];
                let c = cost(p);
                if c < best.0 {
                    best = (c, p);
                }
            }
        }
        if h[0].max(h[1]) <= cell {
            return best;
        }
        let c = best.1;
        lo = [c[0] - 2.0 * h[0], c[1] - 2.0 * h[1]];
        hi = [c[0] + 2.0 * h[0], c[1] + 2.0 * h[1]];
        steps = 40;
    }
}

pub struct OracleCase {
    pub name: String,
    pub instance: ProblemInstance,
    pub truth: Option<[f64; 2]>,
    pub lo: [f64; 2],
    pub hi: [f64; 2],
}

pub fn single_sensor_case(name: &str, anchors: &[[f64; 2]], truth: [f64; 2]) -> OracleCase {
    let ranges: Vec<f64> = anchors.iter().map(|a| distance(a, &truth)).collect();
    OracleCase {
        name: name.to_string(),
        instance: super::single_sensor(anchors, &ranges, LossSpec::huber(0.1)),
        truth: Some(truth),
        lo: [0.0, 0.0],
        hi: [2.0, 2.0],
    }
}

/// The two worked examples plus random sensors inside random anchor triangles.
pub fn oracle_cases(random: u64) -> Vec<OracleCase> {
    let mut cases = vec![
        OracleCase {
            name: "tangent circles".into(),
            instance: super::single_sensor(&[[0.0, 0.0], [2.0, 0.0]], &[1.0, 1.0], LossSpec::huber(0.1)),
            truth: Some([1.0, 0.0]),
            lo: [0.0, 0.0],
            hi: [2.0, 2.0],
        },
        single_sensor_case("three anchors", &[[0.0, 0.0], [2.0, 0.0], [1.0, 2.0]], [1.0, 1.0]),
    ];
    let mut rng = rng(4000);
    for k in 0..random {
        let anchors: Vec<[f64; 2]> = (0..3).map(|_| [rng.random_range(0.0..2.0), rng.random_range(0.0..2.0)]).collect();
        let w: Vec<f64> = (0..3).map(|_| rng.random_range(0.2..1.0)).collect();
        let total: f64 = w.iter().sum();
        let truth = [0, 1].map(|c| anchors.iter().zip(&w).map(|(a, wi)| a[c] * wi / total).sum());
        cases.push(single_sensor_case(&format!("random triangle {k}"), &anchors, truth));
    }
    cases
}

pub struct OracleOutcome {
    pub name: String,
    pub family: LossFamily,
    pub solver_cost: f64,
    pub grid_cost: f64,
    pub truth_error_km: Option<f64>,
}

pub fn run_oracle(case: &OracleCase, family: LossFamily) -> OracleOutcome {
    let result = minimize(&case.instance, family, &SolverConfig::for_family(family)).unwrap();
    let (grid_cost, _) = grid_search(&case.instance, family, case.lo, case.hi, 200, 1e-4);
    OracleOutcome {
        name: case.name.clone(),
        family,
        solver_cost: result.final_cost,
        grid_cost,
        truth_error_km: case.truth.map(|t| distance(result.estimate.row(0), &t)),
    }
}

/// Largest relative spread of final costs over solver seeds `0..starts`,
/// each start drawn uniformly from the anchors' bounding box.
pub fn multistart_spread(instance: &ProblemInstance, family: LossFamily, starts: u64) -> f64 {
    let costs: Vec<f64> = (0..starts)
        .map(|s| {
            let config = SolverConfig {
                init: InitStrategy::RandomInBox,
                restarts: 1,
                ..SolverConfig::for_family(family).with_seed(s)
            };
            minimize(instance, family, &config).unwrap().final_cost
        })
        .collect();
    let lo = costs.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = costs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    assert!(lo > 0.0, "relative spread needs a positive optimum");
    (hi - lo) / lo
}
