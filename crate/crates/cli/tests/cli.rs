use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_teleport-sim"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn write_config(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.display().to_string()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn default_run_reports_half_and_unit_fidelity() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let o = run(&["run", "--out", out.to_str().unwrap(), "--seed", "5"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let report: Value = serde_json::from_str(&std::fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["schema_version"], 1);
    let rows = report["scenarios"].as_array().unwrap();
    let find = |id: &str| rows.iter().find(|r| r["scenario"] == id).unwrap();
    let three = find("threefold");
    let four = find("fourfold");
    assert!((three["leading_order_fidelity"].as_f64().unwrap() - 0.5).abs() < 1e-3);
    assert!((four["leading_order_fidelity"].as_f64().unwrap() - 1.0).abs() < 1e-3);
    assert_eq!(three["exceeds_baseline"], false);
    assert_eq!(four["exceeds_baseline"], true);
    for key in ["scenario", "fidelity", "probability", "vacuum_weight", "baseline", "exceeds_baseline"] {
        assert!(three.get(key).is_some(), "missing {key}");
    }
    assert!(!std::fs::read_to_string(out.join("report.json")).unwrap().contains("null"));
    let csv = std::fs::read_to_string(out.join("report.csv")).unwrap();
    assert!(csv.starts_with("schema_version,scenario,"));
    assert_eq!(csv.lines().count(), 3);
}

#[test]
fn repeated_runs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for out in [&a, &b] {
        let o = run(&["run", "--out", out.to_str().unwrap(), "--seed", "42"]);
        assert!(o.status.success(), "{}", stderr(&o));
    }
    for f in ["report.csv", "report.json"] {
        assert_eq!(std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap(), "{f}");
    }
    let o = run(&["tomo", "--out", a.to_str().unwrap(), "--seed", "9"]);
    assert!(o.status.success());
    let o = run(&["tomo", "--out", b.to_str().unwrap(), "--seed", "9"]);
    assert!(o.status.success());
    assert_eq!(std::fs::read(a.join("tomography.csv")).unwrap(), std::fs::read(b.join("tomography.csv")).unwrap());
}

#[test]
fn unwritable_output_fails_without_partial_files() {
    let dir = tempfile::tempdir().unwrap();
    let blocker = dir.path().join("not-a-dir");
    std::fs::write(&blocker, b"occupied").unwrap();
    let out = blocker.join("results");
    let o = run(&["run", "--out", out.to_str().unwrap()]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("cannot write"), "{}", stderr(&o));
    let entries: Vec<_> = std::fs::read_dir(dir.path()).unwrap().collect();
    assert_eq!(entries.len(), 1);
    assert_eq!(std::fs::read(&blocker).unwrap(), b"occupied");
}

#[test]
fn format_flag_selects_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("o");
    let o = run(&["run", "--out", out.to_str().unwrap(), "--format", "csv"]);
    assert!(o.status.success());
    assert!(out.join("report.csv").exists());
    assert!(!out.join("report.json").exists());
}

#[test]
fn ratio_sweep_rows_are_sorted_and_increasing() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.toml", "[sweep]\nparameter = \"coupling_ratio\"\nvalues = [4, 1, 8, 2]\n");
    let out = dir.path().join("o");
    let o = run(&["sweep", "--config", &cfg, "--out", out.to_str().unwrap(), "--format", "csv"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = std::fs::read_to_string(out.join("sweep.csv")).unwrap();
    let mut reader = csv_rows(&text);
    let header = reader.remove(0);
    let col = |name: &str| header.iter().position(|h| h == name).unwrap();
    let values: Vec<f64> = reader.iter().map(|r| r[col("value")].parse().unwrap()).collect();
    let f: Vec<f64> = reader.iter().map(|r| r[col("fidelity")].parse().unwrap()).collect();
    assert_eq!(values, vec![1.0, 2.0, 4.0, 8.0]);
    assert!(f.windows(2).all(|w| w[1] > w[0]), "{f:?}");
    assert!((f[0] - 0.5).abs() < 1e-3);
    assert!(reader.iter().all(|r| !r[col("probability")].is_empty() && !r[col("vacuum_weight")].is_empty()));
}

fn csv_rows(text: &str) -> Vec<Vec<String>> {
    text.lines().map(|l| l.split(',').map(str::to_string).collect()).collect()
}

#[test]
fn single_point_sweep_gives_one_row() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.toml", "[sweep]\nparameter = \"coupling\"\nvalues = [0.03]\n");
    let out = dir.path().join("o");
    let o = run(&["sweep", "--config", &cfg, "--out", out.to_str().unwrap(), "--format", "csv"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(std::fs::read_to_string(out.join("sweep.csv")).unwrap().lines().count(), 2);
}

#[test]
fn sweep_without_section_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["sweep", "--out", dir.path().to_str().unwrap()]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("sweep"));
}

#[test]
fn validate_passes_and_catches_a_perturbed_convention() {
    let o = run(&["validate"]);
    assert!(o.status.success(), "{}", stdout(&o));
    let text = stdout(&o);
    assert!(!text.contains("FAIL"), "{text}");
    let oracle = text.lines().find(|l| l.contains("oracle equivalence")).unwrap();
    let dev: f64 = oracle.split("max deviation ").nth(1).unwrap().split_whitespace().next().unwrap().parse().unwrap();
    assert!(dev <= 1e-10, "{oracle}");

    let o = run(&["validate", "--perturb-beamsplitter"]);
    assert!(!o.status.success());
    let text = stdout(&o);
    assert!(text.lines().any(|l| l.starts_with("PASS unitarity")), "{text}");
    assert!(text.lines().any(|l| l.starts_with("FAIL pinned beamsplitter sign")), "{text}");
}

#[test]
fn config_errors_name_the_offending_key() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "bad.toml", "[setup]\ncoupling_i = 1.5\n");
    let o = run(&["run", "--config", &cfg, "--out", dir.path().join("o").to_str().unwrap()]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("setup.coupling_i"), "{}", stderr(&o));

    let cfg = write_config(dir.path(), "typo.toml", "[setup]\ncuttoff = 6\n");
    let o = run(&["run", "--config", &cfg]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("cuttoff"), "{}", stderr(&o));

    let o = run(&["run", "--config", dir.path().join("missing.toml").to_str().unwrap()]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("cannot read"));
    assert!(!dir.path().join("o").exists());
}

#[test]
fn structurally_impossible_scenario_exits_nonzero() {
    let dir = tempfile::tempdir().unwrap();
    // reading four photons at p needs four pairs, beyond a cutoff of 6
    let cfg = write_config(dir.path(), "z.toml", "[[scenarios]]\nkind = \"threefold_number_resolved_p\"\nn = 4\n");
    let out = dir.path().join("o");
    let o = run(&["run", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("structurally zero"), "{}", stderr(&o));
    assert!(!out.exists());
}

#[test]
fn cutoff_override_is_applied_and_checked() {
    let o = run(&["run", "--cutoff", "3"]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("setup.cutoff"), "{}", stderr(&o));
}

#[test]
fn tomography_recovers_the_vacuum_admixture() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("o");
    let o = run(&["tomo", "--out", out.to_str().unwrap(), "--seed", "1"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let doc: Value = serde_json::from_str(&std::fs::read_to_string(out.join("tomography.json")).unwrap()).unwrap();
    assert!((doc["exact"]["vacuum_weight_estimate"].as_f64().unwrap() - 0.5).abs() < 1e-6);
    assert!((doc["sampled"]["vacuum_weight_estimate"].as_f64().unwrap() - 0.5).abs() < 0.01);
    let csv = std::fs::read_to_string(out.join("tomography.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 3 * 4);
}

#[test]
fn guide_config_example_parses() {
    let guide = include_str!("../../../book/src/cli.md");
    let start = guide.find("```toml\n").expect("toml block") + "```toml\n".len();
    let text = &guide[start..start + guide[start..].find("```").unwrap()];
    let config = teleport_sim_cli::config::RunConfig::from_toml(text, "guide").unwrap();
    config.validate().unwrap();
    assert_eq!(config.scenarios.len(), 2);
    assert!(config.sweep.is_some());
}
