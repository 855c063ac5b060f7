//! Exit-code and output contract of the command-line interface.

use std::fs;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_asnewton"))
}

fn scratch(name: &str) -> String {
    let dir = std::env::temp_dir().join("asnewton-cli-tests");
    fs::create_dir_all(&dir).unwrap();
    dir.join(name).to_string_lossy().into_owned()
}

fn stdout_str(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

#[test]
fn solve_disk_nlp_exits_zero_and_writes_trace() {
    let trace = scratch("disk.csv");
    let out = bin()
        .args(["solve", "--problem", "disk-nlp", "--output", &trace])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let summary: serde_json::Value = serde_json::from_str(&stdout_str(&out)).unwrap();
    assert_eq!(summary["status"], "converged");
    assert!(summary["switch_iteration"].is_u64());
    let csv = fs::read_to_string(&trace).unwrap();
    let header = csv.lines().next().unwrap();
    assert!(header.starts_with("k,phase,u_0,u_1"));
    assert!(header.ends_with("residual,active_set,dist_to_solution"));
    assert!(csv.lines().skip(1).any(|l| l.contains(",newton,")));
}

#[test]
fn solve_json_format_embeds_summary_and_trace() {
    let trace = scratch("orthant.json");
    let out = bin()
        .args([
            "solve",
            "--problem",
            "orthant-vi",
            "--format",
            "json",
            "--output",
            &trace,
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    let doc: serde_json::Value = serde_json::from_str(&fs::read_to_string(&trace).unwrap()).unwrap();
    assert_eq!(doc["summary"]["status"], "converged");
    let trace_rows = doc["trace"].as_array().unwrap();
    assert!(!trace_rows.is_empty());
    assert!(trace_rows.iter().any(|r| r["phase"] == "identify"));
    assert!(trace_rows.iter().any(|r| r["phase"] == "newton"));
    // final iterate matches the oracle solution of this instance
    let last = trace_rows.last().unwrap();
    let u = last["u"].as_array().unwrap();
    assert!((u[0].as_f64().unwrap() - 1.0).abs() <= 1e-9);
    assert!(u[1].as_f64().unwrap().abs() <= 1e-9);
}

#[test]
fn solve_singular_demo_exits_three() {
    let out = bin()
        .args([
            "solve",
            "--problem",
            "singular-demo",
            "--output",
            &scratch("singular.csv"),
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn solve_malformed_json_exits_one() {
    let path = scratch("broken.json");
    fs::write(&path, "{ not json").unwrap();
    let out = bin()
        .args(["solve", "--problem", &path, "--output", &scratch("never.csv")])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(!String::from_utf8_lossy(&out.stderr).is_empty());
}

#[test]
fn solve_accepts_problem_spec_files() {
    let path = scratch("custom-orthant.json");
    fs::write(
        &path,
        r#"{
  "name": "custom-orthant",
  "kind": {
    "type": "orthant-affine-vi",
    "a_mat": [[1.0, 0.0], [0.0, 1.0]],
    "b_vec": [-1.0, 1.0]
  }
}"#,
    )
    .unwrap();
    let out = bin()
        .args(["solve", "--problem", &path, "--output", &scratch("custom.csv")])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "stderr: {}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn solve_random_kind_is_seed_dependent_but_reproducible() {
    let path = scratch("random.json");
    fs::write(
        &path,
        r#"{ "name": "random", "kind": { "type": "random-orthant-vi", "n": 3 } }"#,
    )
    .unwrap();
    let run = |seed: &str, tag: &str| {
        let out = bin()
            .args([
                "solve", "--problem", &path, "--seed", seed, "--a", "30",
                "--max-iter", "3000", "--output", &scratch(tag),
            ])
            .output()
            .unwrap();
        assert_eq!(out.status.code(), Some(0), "stderr: {}", String::from_utf8_lossy(&out.stderr));
        stdout_str(&out)
    };
    let a = run("5", "rand-a.csv");
    let b = run("5", "rand-b.csv");
    let c = run("6", "rand-c.csv");
    assert_eq!(a, b);
    assert_ne!(a, c);
}

#[test]
fn solve_exhausted_budget_exits_two() {
    // two iterations cannot fill the three-iteration stability window
    let out = bin()
        .args([
            "solve",
            "--problem",
            "orthant-vi",
            "--max-iter",
            "2",
            "--output",
            &scratch("stall.csv"),
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    let summary: serde_json::Value = serde_json::from_str(&stdout_str(&out)).unwrap();
    assert_eq!(summary["status"], "identification-stall");
}

#[test]
fn solve_honors_explicit_start() {
    let out = bin()
        .args([
            "solve",
            "--problem",
            "scalar-root",
            "--u0",
            "12.0",
            "--output",
            &scratch("start.csv"),
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    let csv = fs::read_to_string(scratch("start.csv")).unwrap();
    let first_row = csv.lines().nth(1).unwrap();
    assert!(first_row.starts_with("0,newton,1.2000000000000000e1"));
}

#[test]
fn verify_single_suite_exits_zero() {
    let out = bin().args(["verify", "geometry", "--seed", "7"]).output().unwrap();
    assert_eq!(out.status.code(), Some(0));
    let text = stdout_str(&out);
    assert!(text.contains("geometry/bases-orthonormal-complementary"));
    assert!(!text.contains("varcalc/"));
}

#[test]
fn verify_broken_equality_exits_four_and_names_the_property() {
    let out = bin()
        .args(["verify", "varcalc", "--seed", "7", "--break-equality"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(4));
    let text = stdout_str(&out);
    assert!(text.contains("FAIL  varcalc/derivative-coderivative-equality"));
}

#[test]
fn rates_scalar_root_reports_quadratic_orders() {
    let out = bin()
        .args(["rates", "--problem", "scalar-root", "--distances", "1e-1,1e-2"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    let text = stdout_str(&out);
    let mut orders = Vec::new();
    for line in text.lines().skip(1) {
        let cols: Vec<&str> = line.split_whitespace().collect();
        if cols.len() == 4 {
            orders.push(cols[2].parse::<f64>().unwrap());
        }
    }
    assert_eq!(orders.len(), 2, "table: {text}");
    for o in orders {
        assert!((1.8..=2.2).contains(&o), "order {o} out of range");
    }
}

#[test]
fn rates_without_known_solution_exits_one() {
    // n = 12 is past the oracle limit, so no solution gets attached
    let mut a_mat = vec![vec![0.0; 12]; 12];
    for (i, row) in a_mat.iter_mut().enumerate() {
        row[i] = 1.0;
    }
    let spec = serde_json::json!({
        "name": "big-orthant",
        "kind": { "type": "orthant-affine-vi", "a_mat": a_mat, "b_vec": vec![-1.0; 12] }
    });
    let path = scratch("big-orthant.json");
    fs::write(&path, spec.to_string()).unwrap();
    let out = bin().args(["rates", "--problem", &path]).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
}
