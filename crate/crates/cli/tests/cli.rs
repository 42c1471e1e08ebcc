use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use robust_netloc::io::InstanceDocument;
use robust_netloc::model::degree_stats;
use tempfile::TempDir;

fn canonical() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/data/canonical_network.json")
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_robust-netloc"))
        .args(args)
        .env_remove("ROBUST_NETLOC_THREADS")
        .output()
        .unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn generate_defaults_reproduce_the_canonical_network() {
    let dir = TempDir::new().unwrap();
    let a = dir.path().join("a.json");
    let b = dir.path().join("b.json");
    assert_eq!(code(&run(&["generate", "--out", path_str(&a)])), 0);
    let out = run(&["generate", "--anchors", "corners", "--out", path_str(&b)]);
    assert_eq!(code(&out), 0);
    assert!(String::from_utf8_lossy(&out.stdout).contains("average degree"));
    let text = std::fs::read(&a).unwrap();
    assert_eq!(text, std::fs::read(&b).unwrap());
    assert_eq!(text, std::fs::read(canonical()).unwrap());

    let network = InstanceDocument::read(&a).unwrap().to_parts().unwrap().network;
    assert_eq!((network.sensors, network.anchor_count()), (10, 4));
    let avg = degree_stats(&network).average_combined;
    assert!((4.0..=4.6).contains(&avg), "{avg}");
}

#[test]
fn generate_single_sensor_star() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("star.json");
    assert_eq!(code(&run(&["generate", "--sensors", "1", "--seed", "3", "--out", path_str(&out)])), 0);
    let network = InstanceDocument::read(&out).unwrap().to_parts().unwrap().network;
    assert_eq!(network.sensors, 1);
    assert!(network.edges.is_empty());
    assert_eq!(network.anchor_links.len(), 4);
}

#[test]
fn generate_rejects_infeasible_parameters() {
    let dir = TempDir::new().unwrap();
    let out = run(&["generate", "--dim", "7", "--out", path_str(&dir.path().join("x.json"))]);
    assert_eq!(code(&out), 2, "{}", stderr(&out));
    assert!(stderr(&out).starts_with("error:"));
}

#[test]
fn usage_errors_exit_one_and_help_exits_zero() {
    assert_eq!(code(&run(&["frobnicate"])), 1);
    assert_eq!(code(&run(&["montecarlo", "--trials", "many"])), 1);
    let help = run(&["montecarlo", "--help"]);
    assert_eq!(code(&help), 0);
    let text = String::from_utf8_lossy(&help.stdout);
    for default in ["[default: 100]", "[default: 0.04]", "[default: 7]", "[default: 4]", "[default: 0.1]"] {
        assert!(text.contains(default), "missing {default} in\n{text}");
    }
}

#[test]
fn noiseless_montecarlo_has_near_zero_error() {
    let dir = TempDir::new().unwrap();
    let prefix = dir.path().join("mc");
    let out = run(&[
        "montecarlo",
        "--network",
        path_str(&canonical()),
        "--trials",
        "1",
        "--sigma",
        "0",
        "--outlier-node",
        "none",
        "--out-prefix",
        path_str(&prefix),
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let csv = std::fs::read_to_string(dir.path().join("mc.summary.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("family,R,epsilon_m,epsilon_per_sensor_m,trials,seed"));
    let rows: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 3);
    for row in rows {
        let per_sensor: f64 = row[3].parse().unwrap();
        assert!(per_sensor < 1.0, "{row:?}");
    }
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("mc.report.json")).unwrap()).unwrap();
    assert_eq!(report["unit"], "km");
}

#[test]
fn montecarlo_is_deterministic_across_thread_settings() {
    let dir = TempDir::new().unwrap();
    let report = |name: &str, threads: &str| {
        let prefix = dir.path().join(name);
        let out = Command::new(env!("CARGO_BIN_EXE_robust-netloc"))
            .args(["montecarlo", "--network", path_str(&canonical()), "--trials", "6", "--seed", "9"])
            .args(["--out-prefix", path_str(&prefix)])
            .env("ROBUST_NETLOC_THREADS", threads)
            .output()
            .unwrap();
        assert_eq!(code(&out), 0, "{}", stderr(&out));
        std::fs::read(dir.path().join(format!("{name}.report.json"))).unwrap()
    };
    let a = report("a", "1");
    assert_eq!(a, report("b", "1"));
    assert_eq!(a, report("c", "3"));
}

#[test]
fn bad_thread_variable_is_a_runtime_error() {
    let out = Command::new(env!("CARGO_BIN_EXE_robust-netloc"))
        .args(["montecarlo", "--network", path_str(&canonical()), "--trials", "1"])
        .env("ROBUST_NETLOC_THREADS", "lots")
        .output()
        .unwrap();
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("ROBUST_NETLOC_THREADS"));
}

#[test]
fn sweep_sorts_the_grid() {
    let dir = TempDir::new().unwrap();
    let csv = dir.path().join("sweep.csv");
    let out = run(&[
        "sweep-r",
        "--network",
        path_str(&canonical()),
        "--trials",
        "2",
        "--grid",
        "0.4,0.05",
        "--out",
        path_str(&csv),
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let text = std::fs::read_to_string(&csv).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "R,family,epsilon_per_sensor_m");
    assert_eq!(lines.len(), 7);
    assert!(lines[1].starts_with("0.05,huber,"));
    assert!(lines[4].starts_with("0.4,huber,"));

    let out = run(&["sweep-r", "--network", path_str(&canonical()), "--trials", "1", "--grid", "0.1", "--out", path_str(&csv)]);
    assert_eq!(code(&out), 0);
    assert_eq!(std::fs::read_to_string(&csv).unwrap().lines().count(), 4);

    let out = run(&["sweep-r", "--network", path_str(&canonical()), "--grid", "0.1,-2", "--out", path_str(&csv)]);
    assert_eq!(code(&out), 2);
}

fn write(dir: &TempDir, name: &str, text: &str) -> PathBuf {
    let p = dir.path().join(name);
    std::fs::write(&p, text).unwrap();
    p
}

#[test]
fn solve_noiseless_single_sensor() {
    let dir = TempDir::new().unwrap();
    let s = 2f64.sqrt();
    let network = write(
        &dir,
        "net.json",
        r#"{"dim": 2, "sensors": 1, "anchors": [[0,0],[2,0],[1,2]], "edges": [], "anchor_links": [[0,0],[0,1],[0,2]]}"#,
    );
    let meas = write(
        &dir,
        "meas.json",
        &format!(r#"{{"dim": 2, "sensors": 1, "anchors": [[0,0],[2,0],[1,2]], "anchor_links": [[0,0],[0,1],[0,2]], "anchor_ranges": [{s}, {s}, 1.0]}}"#),
    );
    let est = dir.path().join("est.json");
    let out = run(&[
        "solve",
        "--network",
        path_str(&network),
        "--measurements",
        path_str(&meas),
        "--family",
        "huber",
        "--R",
        "0.1",
        "--strict",
        "--out",
        path_str(&est),
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&est).unwrap()).unwrap();
    assert!(v["final_cost"].as_f64().unwrap() <= 1e-12);
    assert_eq!(v["converged"], true);
    let x = &v["estimate"][0];
    assert!((x[0].as_f64().unwrap() - 1.0).abs() < 1e-6 && (x[1].as_f64().unwrap() - 1.0).abs() < 1e-6, "{x}");
}

#[test]
fn solve_without_measurements_returns_the_start() {
    let dir = TempDir::new().unwrap();
    let network = write(&dir, "net.json", r#"{"dim": 2, "sensors": 2, "anchors": [[0,0],[1,1]]}"#);
    let est = dir.path().join("est.json");
    let out = run(&["solve", "--network", path_str(&network), "--out", path_str(&est)]);
    assert_eq!(code(&out), 0);
    assert!(stderr(&out).contains("warning"));
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&est).unwrap()).unwrap();
    assert_eq!(v["iterations"], 0);
    assert_eq!(v["final_cost"], 0.0);
}

#[test]
fn malformed_json_is_diagnosed() {
    let dir = TempDir::new().unwrap();
    let bad = write(&dir, "bad.json", "{\"dim\": 2,");
    let out = run(&["solve", "--network", path_str(&bad), "--out", path_str(&dir.path().join("o.json"))]);
    assert_eq!(code(&out), 2);
    let err = stderr(&out);
    assert!(err.contains("bad.json") && err.contains("line"), "{err}");
}

#[test]
fn validate_reports_violations() {
    let dir = TempDir::new().unwrap();
    let ok = run(&["validate", "--network", path_str(&canonical())]);
    assert_eq!(code(&ok), 0);
    let bad = write(
        &dir,
        "bad.json",
        r#"{"dim": 2, "sensors": 2, "anchors": [[0,0]], "edges": [[0,1]], "anchor_links": [[0,0]], "ranges": [-1.0], "anchor_ranges": [0.5]}"#,
    );
    let out = run(&["validate", "--network", path_str(&bad)]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stdout).contains("negative range"));
}
