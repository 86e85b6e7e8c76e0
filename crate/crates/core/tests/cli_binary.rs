//! The `netsir` binary end to end: exit codes and reproducible outputs.

use std::fs;
use std::path::Path;
use std::process::Command;

fn netsir(args: &[&str]) -> (i32, String, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_netsir"))
        .args(args)
        .output()
        .unwrap();
    (
        out.status.code().unwrap_or(-1),
        String::from_utf8_lossy(&out.stdout).into_owned(),
        String::from_utf8_lossy(&out.stderr).into_owned(),
    )
}

fn write_config(dir: &Path, graph: &str, extra: &str) -> String {
    fs::write(dir.join("g.edgelist"), graph).unwrap();
    let cfg = format!(
        r#"{{
            "graph_path": "g.edgelist",
            "initially_infected": [0],
            "rates": {{ "beta": 0.2, "delta": 0.5 }},
            "beta_box": {{ "lo": 0.05, "hi": 1.0 }},
            "delta_box": {{ "lo": 0.05, "hi": 1.0 }},
            "monte_carlo": {{ "replicas": 20000, "seed": 1 }},
            "time_grid": {{ "t_end": 10.0, "points": 11 }},
            "out_dir": "out"{extra}
        }}"#
    );
    let path = dir.join("cfg.json");
    fs::write(&path, cfg).unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn simulate_writes_reproducible_files() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "n 2\n0 1\n", "");
    let (code, stdout, stderr) = netsir(&["simulate", "--config", &cfg]);
    assert_eq!(code, 0, "{stderr}");
    assert!(stdout.contains("lambda ="));
    let counts = fs::read(dir.path().join("out/counts.csv")).unwrap();
    let lambda = fs::read(dir.path().join("out/lambda.json")).unwrap();
    let (code, _, _) = netsir(&["simulate", "--config", &cfg]);
    assert_eq!(code, 0);
    assert_eq!(counts, fs::read(dir.path().join("out/counts.csv")).unwrap());
    assert_eq!(lambda, fs::read(dir.path().join("out/lambda.json")).unwrap());
}

#[test]
fn flags_redirect_output_and_seed() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "n 2\n0 1\n", "");
    let other = dir.path().join("elsewhere");
    let (code, _, stderr) = netsir(&[
        "simulate",
        "--config",
        &cfg,
        "--out",
        other.to_str().unwrap(),
        "--seed",
        "5",
        "--replicas",
        "100",
    ]);
    assert_eq!(code, 0, "{stderr}");
    let json: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(other.join("lambda.json")).unwrap()).unwrap();
    assert_eq!(json["seed"], 5);
    assert_eq!(json["replicas"], 100);
}

#[test]
fn edgeless_graph_has_no_infections() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "n 3\n", "");
    for cmd in ["simulate", "validate", "compare"] {
        let (code, _, stderr) = netsir(&[cmd, "--config", &cfg]);
        assert_eq!(code, 0, "{cmd}: {stderr}");
    }
    let json: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("out/lambda.json")).unwrap()).unwrap();
    assert_eq!(json["mean"], 0.0);
    let csv = fs::read_to_string(dir.path().join("out/comparison.csv")).unwrap();
    for line in csv.lines().skip(1) {
        assert_eq!(line.split(',').nth(1), Some("0"), "{line}");
    }
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    // missing config file
    let (code, _, stderr) = netsir(&["bound", "--config", "/nonexistent/cfg.json"]);
    assert_eq!(code, 4, "{stderr}");
    // no subcommand
    let (code, _, _) = netsir(&[]);
    assert_eq!(code, 4);
    // budget too small to cover fixed costs
    let cfg = write_config(
        dir.path(),
        "n 2\n0 1\n",
        r#", "cost_constants": { "prevention": { "scale": 1.0, "offset": 5.0 }, "second": { "scale": 1.0, "offset": 0.0 } }"#,
    );
    let (code, _, stderr) = netsir(&["optimize", "--config", &cfg]);
    assert_eq!(code, 2, "{stderr}");
    // isolation mode without gamma rates
    let cfg = write_config(dir.path(), "n 2\n0 1\n", "");
    let (code, _, stderr) = netsir(&["bound", "--config", &cfg, "--mode", "isolation"]);
    assert_eq!(code, 4, "{stderr}");
    assert!(stderr.contains("gamma"));
}

#[test]
fn validate_fails_with_code_3_when_monte_carlo_is_too_coarse() {
    // one replica cannot match the exact value within four standard errors
    // (its standard error is zero)
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "n 2\n0 1\n", "");
    let (code, _, stderr) = netsir(&["validate", "--config", &cfg, "--replicas", "1"]);
    assert_eq!(code, 3, "{stderr}");
    assert!(fs::read_to_string(dir.path().join("out/validation.csv"))
        .unwrap()
        .contains(",fail"));
}

#[test]
fn bound_two_node() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "n 2\n0 1\n", "");
    let (code, stdout, stderr) = netsir(&["bound", "--config", &cfg]);
    assert_eq!(code, 0, "{stderr}");
    assert!(stdout.contains("0.400000"), "{stdout}");
}
