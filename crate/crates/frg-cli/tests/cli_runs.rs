//! End-to-end runs of the `frg` binary: artifact layout, exit codes, and
//! rerun determinism.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use frg_core::algebra::{star_h, Coeff, Functional, Model, Species};
use sha2::{Digest, Sha256};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_frg"))
}

/// Fresh scratch directory per test; the tag keeps parallel tests apart.
fn scratch(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("frg-cli-{tag}-{}", std::process::id()));
    let _ = fs::remove_dir_all(&dir);
    fs::create_dir_all(&dir).unwrap();
    dir
}

fn write_config(dir: &Path, text: &str) -> PathBuf {
    let path = dir.join("run.toml");
    fs::write(&path, text).unwrap();
    path
}

fn run_ok(out: &Output) {
    assert!(
        out.status.success(),
        "run failed with {:?}\nstderr: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
}

fn manifest(dir: &Path) -> serde_json::Value {
    let text = fs::read_to_string(dir.join("manifest.json")).expect("manifest.json exists");
    serde_json::from_str(&text).expect("manifest parses")
}

fn sha256_hex(bytes: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(bytes);
    hasher.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

const MSR_FLOW: &str = r#"
command = "flow"
model = "msr"

[couplings]
m_sq = 0.1
lambda = 0.5
D = 2.0
mu_sq = 1.0

[krange]
start = 1.0
end = 2.0
"#;

#[test]
fn flow_run_writes_trajectory_and_manifest() {
    let dir = scratch("flow");
    let cfg = write_config(&dir, MSR_FLOW);
    let out_dir = dir.join("out");
    let out = bin()
        .args(["flow", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&out_dir)
        .output()
        .unwrap();
    run_ok(&out);

    let csv = fs::read_to_string(out_dir.join("trajectory.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("k,U0,m_sq,lambda,D,mu_sq"));
    let rows: Vec<Vec<f64>> = lines
        .map(|l| l.split(',').map(|c| c.parse().unwrap()).collect())
        .collect();
    assert!(rows.len() >= 2);
    assert_eq!(rows.first().unwrap()[0], 1.0);
    assert_eq!(rows.last().unwrap()[0], 2.0);
    for row in &rows {
        assert_eq!(row[4], 2.0, "noise coupling must ride along unchanged");
        assert_eq!(row[5], 1.0, "reference scale must ride along unchanged");
    }

    let m = manifest(&out_dir);
    assert_eq!(m["termination"], "reached-end");
    assert_eq!(m["exit_code"], 0);
    assert_eq!(m["config"]["model"], "msr");
    assert!(m["wall_time_seconds"].as_f64().unwrap() >= 0.0);
    let outputs = m["outputs"].as_array().unwrap();
    let entry = outputs
        .iter()
        .find(|o| o["path"] == "trajectory.csv")
        .expect("trajectory listed in the manifest");
    assert_eq!(entry["sha256"].as_str().unwrap(), sha256_hex(csv.as_bytes()));
}

#[test]
fn rerun_produces_byte_identical_data() {
    let dir = scratch("rerun");
    let cfg = write_config(&dir, MSR_FLOW);
    for sub in ["a", "b"] {
        let out = bin()
            .args(["flow", "--config"])
            .arg(&cfg)
            .arg("--out")
            .arg(dir.join(sub))
            .output()
            .unwrap();
        run_ok(&out);
    }
    let a = fs::read(dir.join("a/trajectory.csv")).unwrap();
    let b = fs::read(dir.join("b/trajectory.csv")).unwrap();
    assert_eq!(a, b);
    assert_eq!(manifest(&dir.join("a"))["outputs"], manifest(&dir.join("b"))["outputs"]);
}

#[test]
fn misplaced_coupling_is_rejected_before_running() {
    let dir = scratch("schema");
    let text = MSR_FLOW.replace("lambda = 0.5", "lambda = 0.5\nlambda3 = 0.1");
    let cfg = write_config(&dir, &text);
    let out_dir = dir.join("out");
    let out = bin()
        .args(["flow", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&out_dir)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("couplings.lambda3"), "stderr was: {stderr}");
    assert!(!out_dir.exists(), "a rejected run must not touch the output directory");
}

#[test]
fn every_violation_is_reported_at_once() {
    let dir = scratch("multi");
    let text = r#"
command = "lpa"
model = "msr"
mystery = 1

[couplings]
m_sq = 0.1
lambda3 = 0.5

[krange]
start = 1.0
end = 2.0

[grid]
bounds1 = [-0.5, 0.5]
bounds2 = [-0.5, 0.5]
points = [3, 41]
"#;
    let cfg = write_config(&dir, text);
    let out = bin().args(["lpa", "--config"]).arg(&cfg).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&out.stderr);
    for needle in ["mystery", "couplings.lambda3", "grid.points[0]"] {
        assert!(stderr.contains(needle), "missing {needle} in: {stderr}");
    }
}

#[test]
fn subcommand_must_match_the_configuration() {
    let dir = scratch("mismatch");
    let cfg = write_config(&dir, MSR_FLOW);
    let out = bin().args(["lpa", "--config"]).arg(&cfg).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("flow"), "stderr was: {stderr}");
}

#[test]
fn singular_locus_exits_3_and_keeps_partial_output() {
    let dir = scratch("singular");
    let text = r#"
command = "flow"
model = "two-scalar"

[couplings]
m1_sq = -0.5
mu_sq = 1.0

[krange]
start = 2.0
end = 0.1
"#;
    let cfg = write_config(&dir, text);
    let out_dir = dir.join("out");
    let out = bin()
        .args(["flow", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&out_dir)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(3));

    let m = manifest(&out_dir);
    assert_eq!(m["termination"], "singular-locus");
    assert_eq!(m["exit_code"], 3);

    // With the quartics zero the masses are frozen, so the locus sits at
    // k^2 + m1_sq = threshold and the march must stop just above it.
    let csv = fs::read_to_string(out_dir.join("trajectory.csv")).unwrap();
    let last_k: f64 =
        csv.lines().last().unwrap().split(',').next().unwrap().parse().unwrap();
    let k_star = (0.5f64 + 1e-8).sqrt();
    assert!(last_k >= k_star && last_k < k_star + 1e-3, "stopped at {last_k}");
}

#[test]
fn sigma_guard_exits_4_and_still_writes_the_manifest() {
    let dir = scratch("sigma");
    let text = r#"
command = "lpa"
model = "msr"

[couplings]
m_sq = 0.1
lambda = 0.2
D = 1.0
mu_sq = 25.0

[krange]
start = 1.0
end = 1.5

[grid]
bounds1 = [-0.5, 0.5]
bounds2 = [-0.5, 0.5]
points = [9, 9]

[lpa]
boundary = "frozen"
"#;
    let cfg = write_config(&dir, text);
    let out_dir = dir.join("out");
    let out = bin()
        .args(["lpa", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&out_dir)
        .output()
        .unwrap();
    assert_eq!(
        out.status.code(),
        Some(4),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );

    let m = manifest(&out_dir);
    assert_eq!(m["termination"], "sigma-non-positive");
    assert_eq!(m["exit_code"], 4);
    assert!(out_dir.join("surface_final.csv").exists());
    assert!(out_dir.join("diagnostics.jsonl").exists());
}

#[test]
fn expand_writes_the_exact_functional() {
    let dir = scratch("expand");
    let text = r#"
command = "expand"
model = "two-scalar"

[expand]
observable = "Phi1^2[f] ⋆ Phi1^2[f']"
"#;
    let cfg = write_config(&dir, text);
    let out_dir = dir.join("out");
    let out = bin()
        .args(["expand", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&out_dir)
        .output()
        .unwrap();
    run_ok(&out);

    let value: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out_dir.join("functional.json")).unwrap())
            .unwrap();
    let got = Functional::from_json(&value).unwrap();
    let left = Functional::generator(Model::TwoScalar, Species::Phi1, "f", 2).unwrap();
    let right = Functional::generator(Model::TwoScalar, Species::Phi1, "f'", 2).unwrap();
    assert_eq!(got, star_h(&left, &right).unwrap());

    let ladder: Vec<(i64, Coeff)> =
        got.terms().iter().map(|t| (t.hbar, t.coeff.clone())).collect();
    assert_eq!(
        ladder,
        vec![
            (0, Coeff::from_int(1)),
            (1, Coeff::from_int(4)),
            (2, Coeff::from_int(2)),
        ]
    );

    let m = manifest(&out_dir);
    assert_eq!(m["termination"], "completed");
}

#[test]
fn checkpoint_every_flag_adds_snapshots() {
    let dir = scratch("checkpoints");
    let text = r#"
command = "lpa"
model = "msr"

[couplings]
m_sq = 0.1
lambda = 0.2
D = 1.0
mu_sq = 1.0

[krange]
start = 1.0
end = 1.2

[grid]
bounds1 = [-0.5, 0.5]
bounds2 = [-0.5, 0.5]
points = [9, 9]

[lpa]
boundary = "frozen"
"#;
    let cfg = write_config(&dir, text);
    let out_dir = dir.join("out");
    let out = bin()
        .args(["lpa", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&out_dir)
        .args(["--checkpoint-every", "0.05"])
        .output()
        .unwrap();
    run_ok(&out);

    let expected = [1.05, 1.10, 1.15];
    for (idx, k_want) in expected.iter().enumerate() {
        let path = out_dir.join(format!("checkpoint_{idx:03}.csv"));
        let csv = fs::read_to_string(&path).unwrap_or_else(|_| panic!("missing {path:?}"));
        let k: f64 = csv.lines().nth(1).unwrap().split(',').next().unwrap().parse().unwrap();
        assert!((k - k_want).abs() < 1e-12, "checkpoint {idx} at {k}, wanted {k_want}");
    }
    assert!(!out_dir.join("checkpoint_003.csv").exists());

    let final_csv = fs::read_to_string(out_dir.join("surface_final.csv")).unwrap();
    let k: f64 = final_csv.lines().nth(1).unwrap().split(',').next().unwrap().parse().unwrap();
    assert!((k - 1.2).abs() < 1e-12);

    // Diagnostics stream one JSON object per accepted step.
    let diags = fs::read_to_string(out_dir.join("diagnostics.jsonl")).unwrap();
    assert!(!diags.trim().is_empty());
    for line in diags.lines() {
        let rec: serde_json::Value = serde_json::from_str(line).unwrap();
        assert!(rec["sigma_min"].as_f64().unwrap() > 0.0);
        assert_eq!(rec["seminorms"].as_array().unwrap().len(), 5);
    }
}
