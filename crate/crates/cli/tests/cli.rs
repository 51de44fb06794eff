use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn toposimp(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_toposimp"))
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("binary runs")
}

fn stdout_json(out: &Output) -> Value {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

fn write(dir: &TempDir, name: &str, text: &str) -> PathBuf {
    let path = dir.path().join(name);
    fs::write(&path, text).unwrap();
    path
}

fn points(diagram: &Value) -> Vec<(f64, Option<f64>)> {
    let mut pts: Vec<(f64, Option<f64>)> = diagram["points"]
        .as_array()
        .unwrap()
        .iter()
        .map(|p| (p["birth"].as_f64().unwrap(), p["death"].as_f64()))
        .collect();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    pts
}

const PATH_FIELD: &str = r#"{"vertex_count": 5, "edges": [[0,1],[1,2],[2,3],[3,4]], "values": [2,0,3,1,4]}"#;

#[test]
fn path_fixture_diagram() {
    let dir = TempDir::new().unwrap();
    let input = write(&dir, "path.json", PATH_FIELD);
    let out = toposimp(&["persistence", input.to_str().unwrap()], dir.path());
    assert_eq!(points(&stdout_json(&out)), [(0.0, None), (1.0, Some(3.0))]);
}

#[test]
fn superlevel_direction_flag() {
    let dir = TempDir::new().unwrap();
    let input = write(&dir, "path.json", PATH_FIELD);
    let out = toposimp(&["persistence", "--direction", "superlevel", input.to_str().unwrap()], dir.path());
    let json = stdout_json(&out);
    assert_eq!(json["direction"], "superlevel");
    // Maxima at v0 (2), v2 (3), v4 (4); v0 and v2 die at the minimum between them.
    assert_eq!(points(&json), [(2.0, Some(0.0)), (3.0, Some(1.0)), (4.0, None)]);
}

#[test]
fn two_components_give_two_infinite_points() {
    let dir = TempDir::new().unwrap();
    let input = write(&dir, "two.json", r#"{"vertex_count": 4, "edges": [[0,1],[2,3]], "values": [1,0,5,2]}"#);
    let out = toposimp(&["persistence", input.to_str().unwrap()], dir.path());
    assert_eq!(points(&stdout_json(&out)), [(0.0, None), (2.0, None)]);
}

#[test]
fn csv_grid_input() {
    let dir = TempDir::new().unwrap();
    let input = write(&dir, "grid.csv", "0,5,1\n5,5,5\n");
    let out = toposimp(&["persistence", input.to_str().unwrap()], dir.path());
    assert_eq!(points(&stdout_json(&out)), [(0.0, None), (1.0, Some(5.0))]);
}

#[test]
fn empty_inputs_are_data_errors() {
    let dir = TempDir::new().unwrap();
    let blank = write(&dir, "blank.json", "");
    let no_vertices = write(&dir, "none.json", r#"{"vertex_count": 0, "edges": [], "values": []}"#);
    for input in [blank, no_vertices] {
        let out = toposimp(&["persistence", input.to_str().unwrap()], dir.path());
        assert_eq!(out.status.code(), Some(2));
        assert!(out.stdout.is_empty());
        assert!(!out.stderr.is_empty());
    }
}

#[test]
fn inconsistent_field_is_a_data_error() {
    let dir = TempDir::new().unwrap();
    let input = write(&dir, "bad.json", r#"{"vertex_count": 3, "edges": [[0,1]], "values": [1,2]}"#);
    let out = toposimp(&["persistence", input.to_str().unwrap()], dir.path());
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn usage_errors_exit_with_one() {
    let dir = TempDir::new().unwrap();
    assert_eq!(toposimp(&["persistence", "--bogus", "x.json"], dir.path()).status.code(), Some(1));
    assert_eq!(toposimp(&["frobnicate"], dir.path()).status.code(), Some(1));
    let input = write(&dir, "path.json", PATH_FIELD);
    // Simplify needs a threshold rule.
    assert_eq!(toposimp(&["simplify", input.to_str().unwrap()], dir.path()).status.code(), Some(1));
}

#[test]
fn simplify_removes_small_pair() {
    let dir = TempDir::new().unwrap();
    let input = write(&dir, "path.json", PATH_FIELD);
    let out = toposimp(&["simplify", "--epsilon", "2.5", input.to_str().unwrap()], dir.path());
    let json = stdout_json(&out);
    assert_eq!(json["epsilon"], 2.5);
    assert_eq!(json["g_values"], serde_json::json!([2.0, 0.0, 3.0, 3.0, 4.0]));
    assert_eq!(json["changed"], serde_json::json!([3]));
    assert_eq!(points(&json["diagram"]), [(0.0, None)]);

    // With one essential point the cut lands halfway down the finite pair.
    let top = stdout_json(&toposimp(&["simplify", "--top-j", "1", input.to_str().unwrap()], dir.path()));
    assert_eq!(top["epsilon"], 1.0);
    assert_eq!(top["changed"], serde_json::json!([]));
}

#[test]
fn optimize_values_zero_steps_writes_initial_state() {
    let dir = TempDir::new().unwrap();
    let out = toposimp(&["--out", "run", "optimize-values", "--grid", "20", "--steps", "0"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let run = dir.path().join("run");
    let mut names: Vec<String> = fs::read_dir(&run)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    names.sort();
    assert_eq!(
        names,
        [
            "diagram_report.json",
            "diagram_step0.csv",
            "diagram_vineyard.csv",
            "pso_report.json",
            "pso_step0.csv",
            "pso_vineyard.csv"
        ]
    );
    for mode in ["pso", "diagram"] {
        let report: Value = serde_json::from_str(&fs::read_to_string(run.join(format!("{mode}_report.json"))).unwrap()).unwrap();
        assert_eq!(report["losses"].as_array().unwrap().len(), 1);
        assert_eq!(report["initial_values"], report["final_values"]);
        let grid = fs::read_to_string(run.join(format!("{mode}_step0.csv"))).unwrap();
        assert_eq!(grid.lines().count(), 20);
        assert!(grid.lines().all(|l| l.split(',').count() == 20));
    }
}

#[test]
fn optimize_values_rejects_unknown_preset() {
    let dir = TempDir::new().unwrap();
    let out = toposimp(&["optimize-values", "--preset", "nope", "--steps", "0"], dir.path());
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn optimize_values_contrasts_the_two_losses() {
    let dir = TempDir::new().unwrap();
    let out = toposimp(&["--out", "run", "optimize-values"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report = |mode: &str| -> Value {
        serde_json::from_str(&fs::read_to_string(dir.path().join("run").join(format!("{mode}_report.json"))).unwrap()).unwrap()
    };
    // The vineyard's last sample lists persistences in descending order,
    // infinite first; the low peaks follow the tall one.
    let low_peaks = |r: &Value| -> (f64, f64) {
        let samples = r["vineyard"].as_array().unwrap();
        let last = samples.last().unwrap()["persistences"].as_array().unwrap().clone();
        let finite: Vec<f64> = last.iter().filter_map(Value::as_f64).collect();
        let first = samples[0]["persistences"].as_array().unwrap();
        let initial: Vec<f64> = first.iter().filter_map(Value::as_f64).collect();
        (
            finite.iter().skip(1).cloned().fold(0.0, f64::max),
            initial[1..3].iter().cloned().fold(f64::INFINITY, f64::min),
        )
    };
    let (pso_low, _) = low_peaks(&report("pso"));
    assert!(pso_low < 1e-3, "pso low peaks {pso_low}");
    let (dgm_low, initial_low) = low_peaks(&report("diagram"));
    assert!(dgm_low >= 0.25 * initial_low, "diagram low peaks {dgm_low} of {initial_low}");
}

fn regression_table(dir: &TempDir) -> PathBuf {
    let mut text = String::from("a,b,y\n");
    for i in 0..90 {
        let a = (i as f64 * 0.37).sin();
        let b = (i as f64 * 0.11).cos();
        text.push_str(&format!("{a},{b},{}\n", 2.0 * a - b + 0.1 * (i % 7) as f64));
    }
    write(dir, "table.csv", &text)
}

const SMALL: [&str; 10] = [
    "--epochs", "4", "--hidden-layers", "1", "--hidden-width", "8", "--k", "5", "--threshold", "-1",
];

fn train(dir: &TempDir, out: &str, extra: &[&str]) -> Value {
    let table = regression_table(dir);
    let mut args = vec!["--out", out, "train", table.to_str().unwrap()];
    args.extend_from_slice(&SMALL);
    args.extend_from_slice(extra);
    let run = toposimp(&args, dir.path());
    assert!(run.status.success(), "{}", String::from_utf8_lossy(&run.stderr));
    assert!(String::from_utf8_lossy(&run.stdout).contains("test rmsd"));
    assert!(dir.path().join(out).join("vineyard.csv").exists());
    serde_json::from_str(&fs::read_to_string(dir.path().join(out).join("report.json")).unwrap()).unwrap()
}

#[test]
fn train_runs_phases_by_default() {
    let dir = TempDir::new().unwrap();
    let report = train(&dir, "run", &[]);
    assert_eq!(report["config"]["topo"], true);
    assert!(!report["phases"].as_array().unwrap().is_empty());
    assert_eq!(report["train_losses"].as_array().unwrap().len(), 4);
}

#[test]
fn no_topo_and_l2_baselines() {
    let dir = TempDir::new().unwrap();
    let plain = train(&dir, "plain", &["--no-topo"]);
    assert_eq!(plain["config"]["topo"], false);
    assert!(plain["phases"].as_array().unwrap().is_empty());
    assert_eq!(plain["domain_vertices"], 0);

    let l2 = train(&dir, "l2", &["--no-topo", "--l2", "0.01"]);
    assert_eq!(l2["config"]["weight_decay"], 0.01);
    assert_ne!(l2["train_losses"], plain["train_losses"]);
}

#[test]
fn config_file_sits_between_defaults_and_flags() {
    let dir = TempDir::new().unwrap();
    write(&dir, "run.toml", "seed = 4\n[train]\nepochs = 2\nhidden_width = 6\n");
    let table = regression_table(&dir);
    let run = |extra: &[&str]| -> Value {
        let mut args = vec!["--config", "run.toml", "--out", "cfg", "train", table.to_str().unwrap(), "--no-topo"];
        args.extend_from_slice(extra);
        let out = toposimp(&args, dir.path());
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        serde_json::from_str(&fs::read_to_string(dir.path().join("cfg/report.json")).unwrap()).unwrap()
    };
    let from_file = run(&[]);
    assert_eq!(from_file["config"]["epochs"], 2);
    assert_eq!(from_file["config"]["hidden_width"], 6);
    assert_eq!(from_file["config"]["seed"], 4);
    assert_eq!(from_file["config"]["batch_size"], 64);
    let flagged = run(&["--epochs", "3"]);
    assert_eq!(flagged["config"]["epochs"], 3);
    assert_eq!(flagged["config"]["hidden_width"], 6);
}

#[test]
fn malformed_table_is_a_data_error() {
    let dir = TempDir::new().unwrap();
    let table = write(&dir, "bad.csv", "a,b,y\n1,2,3\n4,oops,6\n");
    let out = toposimp(&["train", table.to_str().unwrap(), "--epochs", "1"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    let missing = toposimp(&["train", "missing.csv"], dir.path());
    assert_eq!(missing.status.code(), Some(2));
}

#[test]
fn outputs_are_reproducible() {
    let dir = TempDir::new().unwrap();
    let first = train(&dir, "a", &["--seed", "3"]);
    let second = train(&dir, "b", &["--seed", "3"]);
    assert_eq!(first, second);
    for name in ["report.json", "vineyard.csv"] {
        assert_eq!(
            fs::read(dir.path().join("a").join(name)).unwrap(),
            fs::read(dir.path().join("b").join(name)).unwrap()
        );
    }
    let other = train(&dir, "c", &["--seed", "4"]);
    assert_ne!(first["train_losses"], other["train_losses"]);

    for out in ["v1", "v2"] {
        let run = toposimp(&["--out", out, "optimize-values", "--grid", "24", "--steps", "3"], dir.path());
        assert!(run.status.success());
    }
    for name in ["pso_report.json", "diagram_report.json", "pso_vineyard.csv", "pso_step3.csv"] {
        assert_eq!(
            fs::read(dir.path().join("v1").join(name)).unwrap(),
            fs::read(dir.path().join("v2").join(name)).unwrap()
        );
    }
}

#[test]
fn help_documents_every_command() {
    let dir = TempDir::new().unwrap();
    let top = toposimp(&["--help"], dir.path());
    assert!(top.status.success());
    let text = String::from_utf8(top.stdout).unwrap();
    for cmd in ["persistence", "simplify", "optimize-values", "train", "blobs", "sweep"] {
        assert!(text.contains(cmd), "{cmd} missing from top-level help");
        let help = toposimp(&[cmd, "--help"], dir.path());
        assert!(help.status.success());
        let help = String::from_utf8(help.stdout).unwrap();
        for global in ["--seed", "--out", "--config"] {
            assert!(help.contains(global), "{cmd} help lacks {global}");
        }
    }
    let values = String::from_utf8(toposimp(&["optimize-values", "--help"], dir.path()).stdout).unwrap();
    for default in ["[default: 100]", "[default: 50]", "[default: 0.5]", "[default: four-gaussians]"] {
        assert!(values.contains(default), "optimize-values help lacks {default}");
    }
    let train = String::from_utf8(toposimp(&["train", "--help"], dir.path()).stdout).unwrap();
    for flag in ["--no-topo", "--l2", "--sweep", "--threshold", "--epsilon", "--label-column"] {
        assert!(train.contains(flag), "train help lacks {flag}");
    }
}

#[test]
fn sweep_writes_summary_and_best_report() {
    let dir = TempDir::new().unwrap();
    write(&dir, "grid.toml", "[sweep]\nk = [4, 6]\nthreshold = [0.01]\nn = [0]\nsigma = [0.001]\n");
    let table = regression_table(&dir);
    let out = toposimp(
        &["--config", "grid.toml", "--out", "sw", "sweep", table.to_str().unwrap(), "--epochs", "2", "--hidden-layers", "1", "--hidden-width", "6"],
        dir.path(),
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let summary = fs::read_to_string(dir.path().join("sw/sweep.csv")).unwrap();
    // Header, the phase-free baseline and one row per k.
    assert_eq!(summary.lines().count(), 4, "{summary}");
    assert!(dir.path().join("sw/best_report.json").exists());
}

#[test]
fn divergence_exits_with_three() {
    let dir = TempDir::new().unwrap();
    let out = toposimp(
        &["optimize-values", "--grid", "10", "--steps", "5", "--loss", "pso", "--learning-rate", "1e308"],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("numeric"));
}
