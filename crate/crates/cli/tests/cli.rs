//! End-to-end runs of the binary on the worked three-node example.

use std::process::Command;

fn pcn() -> Command {
    Command::new(env!("CARGO_BIN_EXE_pcn"))
}

struct Fixture {
    dir: tempfile::TempDir,
}

impl Fixture {
    fn new() -> Self {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(
            dir.path().join("net.json"),
            r#"{"nodes":["x","y","z"],"channels":[{"ends":["x","y"],"cap":3},{"ends":["y","z"],"cap":7},{"ends":["x","z"],"cap":11}]}"#,
        )
        .unwrap();
        std::fs::write(dir.path().join("w_feasible.json"), r#"{"x":5,"y":6,"z":10}"#).unwrap();
        std::fs::write(dir.path().join("w_infeasible.json"), r#"{"x":15,"y":4,"z":2}"#).unwrap();
        std::fs::write(
            dir.path().join("liq.json"),
            r#"{"x:y":{"x":3,"y":0},"y:z":{"y":7,"z":0},"x:z":{"x":0,"z":11}}"#,
        )
        .unwrap();
        Fixture { dir }
    }

    fn path(&self, name: &str) -> String {
        self.dir.path().join(name).to_str().unwrap().to_string()
    }
}

#[test]
fn feasible_verdicts() {
    let fx = Fixture::new();
    let out = pcn()
        .args(["feasible", "--network", &fx.path("net.json"), "--wealth", &fx.path("w_feasible.json")])
        .output()
        .unwrap();
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["feasible"], true);
    assert!(v["witness"].is_object());

    let out = pcn()
        .args(["feasible", "--network", &fx.path("net.json"), "--wealth", &fx.path("w_infeasible.json")])
        .output()
        .unwrap();
    assert!(out.status.success(), "infeasibility is data, not an error");
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["feasible"], false);
    assert!(v["certificate_cut"].is_array());
}

#[test]
fn fiber_lists_the_worked_example_table() {
    let fx = Fixture::new();
    let out = pcn()
        .args([
            "fiber",
            "--network",
            &fx.path("net.json"),
            "--wealth",
            &fx.path("w_feasible.json"),
            "--enumerate",
        ])
        .output()
        .unwrap();
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["count"], 4);
    let states = v["states"].as_array().unwrap();
    assert_eq!(states.len(), 4);
    // lexicographically first state is (e_x, f_y, g_x) = (0, 3, 5)
    assert_eq!(states[0]["x:y"]["x"], 0);
    assert_eq!(states[0]["y:z"]["y"], 3);
    assert_eq!(states[0]["x:z"]["x"], 5);
}

#[test]
fn throughput_exact_fraction() {
    let out = pcn()
        .args(["throughput", "--zeta", "7/1", "--rho", "7/47000"])
        .output()
        .unwrap();
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["supported_payments_per_second"], 47000.0);
    assert_eq!(v["exact"], "47000/1");

    let out = pcn()
        .args(["throughput", "--zeta", "7", "--rho", "0"])
        .output()
        .unwrap();
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["supported_payments_per_second"], "unbounded");
}

#[test]
fn validation_failures_exit_nonzero() {
    let fx = Fixture::new();
    // zero samples
    let out = pcn()
        .args(["estimate-r", "--network", &fx.path("net.json"), "--samples", "0", "--seed", "1"])
        .output()
        .unwrap();
    assert!(!out.status.success());
    // missing file
    let out = pcn()
        .args(["feasible", "--network", "/nonexistent.json", "--wealth", &fx.path("w_feasible.json")])
        .output()
        .unwrap();
    assert!(!out.status.success());
    // malformed wealth (wrong total)
    std::fs::write(fx.dir.path().join("bad.json"), r#"{"x":1,"y":1,"z":1}"#).unwrap();
    let out = pcn()
        .args(["feasible", "--network", &fx.path("net.json"), "--wealth", &fx.path("bad.json")])
        .output()
        .unwrap();
    assert!(!out.status.success());
    // unknown schedule
    let out = pcn()
        .args(["convexsim", "--schedule", "cubic", "--seed", "1"])
        .output()
        .unwrap();
    assert!(!out.status.success());
}

#[test]
fn replenish_writes_bands_and_moves_liquidity() {
    let fx = Fixture::new();
    let bands = fx.path("bands.csv");
    let out = pcn()
        .args([
            "replenish",
            "--network",
            &fx.path("net.json"),
            "--liquidity",
            &fx.path("liq.json"),
            "--bands",
            &bands,
        ])
        .output()
        .unwrap();
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(v["dist_integer"].as_f64().unwrap() >= v["dist_relaxed"].as_f64().unwrap() - 1e-9);
    assert!(v["band_narrow_after"].as_f64().unwrap() >= v["band_narrow_before"].as_f64().unwrap());
    let csv = std::fs::read_to_string(&bands).unwrap();
    assert!(csv.starts_with("when,band_40_60,band_10_90\nbefore,"));
}

#[test]
fn convexsim_series_file_has_header_and_rows() {
    let fx = Fixture::new();
    let series = fx.path("series.csv");
    let out = pcn()
        .args([
            "convexsim", "--schedule", "linear", "--ppm", "50", "--steps", "600", "--seed", "3",
            "--series", &series,
        ])
        .output()
        .unwrap();
    assert!(out.status.success());
    let csv = std::fs::read_to_string(&series).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), "step,success,fee_paid,n0:n1,n1:n2,n0:n2");
    assert_eq!(lines.count(), 600);
}

#[test]
fn estimate_rho_csv_shape() {
    let fx = Fixture::new();
    let out = pcn()
        .args([
            "estimate-rho", "--network", &fx.path("net.json"), "--amount", "0,2", "--samples",
            "500", "--seed", "2",
        ])
        .output()
        .unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "amount,rho,stderr,S");
    assert!(lines[1].starts_with("0,0,0,inf"), "zero amounts are always feasible: {}", lines[1]);
    assert_eq!(lines.len(), 3);
}
