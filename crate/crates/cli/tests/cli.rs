use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_altupdate");

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn altupdate(args: &[&str]) -> Output {
    Command::new(BIN).args(args).env_remove("ALTUPDATE_OUTPUT_ROOT").output().unwrap()
}

fn write_config(dir: &Path, name: &str, text: &str) -> PathBuf {
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path
}

fn run_ok(args: &[&str]) -> String {
    let out = altupdate(args);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

const CONVEX_TASK: &str = r#"
[task]
function = "convex2d"
alpha = 1.0
beta = 20.0
x0 = [50.0, 50.0]
iterations = 100
"#;

fn tune_config(search: &str, grids: &str) -> String {
    format!("schema_version = 1\n{CONVEX_TASK}\n[search]\n{search}\n\n[grids]\n{grids}\n")
}

#[test]
fn missing_field_exits_2_and_names_it() {
    let dir = tempfile::tempdir().unwrap();
    let text = tune_config("family = \"sgd\"\nrule = \"additive\"", "").replace("beta = 20.0\n", "");
    let cfg = write_config(dir.path(), "bad.toml", &text);
    let out = altupdate(&["tune", "--config", cfg.to_str().unwrap(), "--out", dir.path().join("o").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("beta") && err.contains("line"), "{err}");
    assert!(!dir.path().join("o").exists());
}

#[test]
fn invalid_value_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let text = tune_config("family = \"sgd\"\nrule = \"hybrid\"\ngamma = 1.5", "");
    let cfg = write_config(dir.path(), "gamma.toml", &text);
    let out = altupdate(&["tune", "--config", cfg.to_str().unwrap(), "--out", dir.path().join("o").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("gamma"));
}

#[test]
fn single_point_grid_gives_one_row() {
    let dir = tempfile::tempdir().unwrap();
    let text = tune_config("family = \"sgd\"\nrule = \"additive\"", "eta = { lo = 1e-3, hi = 1e-3 }");
    let cfg = write_config(dir.path(), "one.toml", &text);
    let out = dir.path().join("o");
    run_ok(&["tune", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    let board = fs::read_to_string(out.join("leaderboard.csv")).unwrap();
    let lines: Vec<&str> = board.lines().collect();
    assert_eq!(lines.len(), 2, "{board}");
    assert_eq!(lines[0], "rank,eta,final_distance,diverged");
    assert!(lines[1].starts_with("1,1.000000000e-3,"));
}

#[test]
fn all_diverged_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let text = tune_config("family = \"sgd\"\nrule = \"additive\"", "eta = { lo = 1e2, hi = 5e2 }");
    let cfg = write_config(dir.path(), "blowup.toml", &text);
    let out = dir.path().join("o");
    let res = altupdate(&["tune", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(res.status.code(), Some(3), "{}", String::from_utf8_lossy(&res.stderr));
    // The leaderboard is still written so the failure can be inspected.
    let board = fs::read_to_string(out.join("leaderboard.csv")).unwrap();
    assert!(board.lines().skip(1).all(|l| l.ends_with(",true")));
}

#[test]
fn existing_output_needs_overwrite() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = configs().join("trial/convex2d-sgd-hybrid.toml");
    let out = dir.path().join("o");
    let args = ["trial", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()];
    run_ok(&args);
    let first = fs::read(out.join("trajectory.csv")).unwrap();
    let again = altupdate(&args);
    assert_eq!(again.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&again.stderr).contains("--overwrite"));
    let mut forced = args.to_vec();
    forced.push("--overwrite");
    run_ok(&forced);
    assert_eq!(fs::read(out.join("trajectory.csv")).unwrap(), first);
}

#[test]
fn output_root_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = configs().join("trial/rosenbrock-adam-hybrid.toml");
    let status = Command::new(BIN)
        .args(["trial", "--config", cfg.to_str().unwrap()])
        .env("ALTUPDATE_OUTPUT_ROOT", dir.path())
        .status()
        .unwrap();
    assert!(status.success());
    assert!(dir.path().join("trial/rosenbrock-adam-hybrid/trial.json").exists());
}

#[test]
fn trajectory_has_one_row_per_iterate() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("o");
    let cfg = configs().join("trial/convex2d-sgd-multiplicative.toml");
    run_ok(&["trial", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    let csv = fs::read_to_string(out.join("trajectory.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "iteration,distance,x1,x2");
    assert_eq!(lines.len(), 1 + 101);
    // Minimum at (1, 1), so the start is 49·√2 away.
    assert!(lines[1].starts_with("0,6.929646456e1,5.000000000e1,5.000000000e1"), "{}", lines[1]);
    assert!(!csv.contains('\r'));
}

#[test]
fn single_robustness_trial_has_zero_std() {
    let dir = tempfile::tempdir().unwrap();
    let text = r#"schema_version = 1
n = 1
seed = 5
optimizer = { family = "sgd", rule = "additive", eta = 0.001 }

[distribution]
function = "convex2d"
x0 = [{ mean = 50.0, std = 5.0 }, { mean = 50.0, std = 5.0 }]
alpha = { mean = 1.0, std = 1.0 }
beta = { mean = 20.0, std = 2.0 }
iterations = { mean = 100.0, std = 10.0 }
"#;
    let cfg = write_config(dir.path(), "one.toml", text);
    let out = dir.path().join("o");
    run_ok(&["robustness", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    let stats: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("stats.json")).unwrap()).unwrap();
    assert_eq!(stats["n"], 1);
    assert_eq!(stats["std"], 0.0);
    assert_eq!(fs::read_to_string(out.join("scores.csv")).unwrap().lines().count(), 2);
}

#[test]
fn seed_flag_overrides_config_seed() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = configs().join("robustness/convex2d-sgd-additive.toml");
    let read = |seed: &str, name: &str| {
        let out = dir.path().join(name);
        run_ok(&["robustness", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap(), "--seed", seed]);
        fs::read_to_string(out.join("scores.csv")).unwrap()
    };
    let zero = read("0", "a");
    assert_ne!(zero, read("1", "b"));
    let out = dir.path().join("c");
    run_ok(&["robustness", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(zero, fs::read_to_string(out.join("scores.csv")).unwrap());
}

#[test]
fn collapsed_scan_is_constant() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("o");
    let cfg = configs().join("scan/convex2d-sgd-hybrid.toml");
    run_ok(&[
        "scan",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "--x1-range",
        "50,50",
        "--x2-range",
        "50,50",
    ]);
    let long = fs::read_to_string(out.join("surface_long.csv")).unwrap();
    let scores: Vec<&str> = long.lines().skip(1).map(|l| l.rsplit(',').next().unwrap()).collect();
    assert_eq!(scores.len(), 625);
    assert!(scores.iter().all(|s| *s == scores[0]));
}

fn max_scan_score(cfg: &str, out: &Path) -> f64 {
    let cfg = configs().join(cfg);
    run_ok(&["scan", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap(), "--x1-range", "40,60", "--x2-range", "40,60"]);
    let meta: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("scan.json")).unwrap()).unwrap();
    meta["max_score"].as_f64().unwrap()
}

#[test]
fn scan_surface_shape_and_hybrid_dominance() {
    let dir = tempfile::tempdir().unwrap();
    let hybrid = max_scan_score("scan/convex2d-sgd-hybrid.toml", &dir.path().join("h"));
    let additive = max_scan_score("scan/convex2d-sgd-additive.toml", &dir.path().join("a"));
    assert!(hybrid <= additive, "hybrid {hybrid} vs additive {additive}");

    let surface = fs::read_to_string(dir.path().join("h/surface.csv")).unwrap();
    let rows: Vec<Vec<&str>> = surface.lines().map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 26);
    assert!(rows.iter().all(|r| r.len() == 26));
    assert_eq!(rows[0][0], "x1\\x2");
    assert_eq!(rows[0][1], "4.000000000e1");
    assert_eq!(rows[25][0], "6.000000000e1");
}

#[test]
fn toy_summary_reports_mean_std_and_flips() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("o");
    let cfg = configs().join("train-toy/sgd.toml");
    let stdout = run_ok(&["train-toy", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert!(stdout.contains("sgd-multiplicative"));
    let summary = fs::read_to_string(out.join("summary.csv")).unwrap();
    let header: Vec<&str> = summary.lines().next().unwrap().split(',').collect();
    for col in ["val_acc_epoch5_mean", "val_acc_epoch5_std", "val_acc_final_mean", "val_acc_final_std", "sign_flips"] {
        assert!(header.contains(&col), "{col}");
    }
    let mult = summary.lines().find(|l| l.starts_with("sgd-multiplicative,")).unwrap();
    assert!(mult.ends_with(",0"), "{mult}");
    for label in ["sgd-additive", "sgd-multiplicative", "sgd-hybrid"] {
        let runs = fs::read_dir(out.join("metrics").join(label)).unwrap().count();
        assert_eq!(runs, 10);
    }
}

#[test]
fn toy_duplicate_labels_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let text = fs::read_to_string(configs().join("train-toy/sgd.toml"))
        .unwrap()
        .replace("label = \"sgd-hybrid\"", "label = \"sgd-additive\"");
    let cfg = write_config(dir.path(), "dup.toml", &text);
    let out = altupdate(&["train-toy", "--config", cfg.to_str().unwrap(), "--out", dir.path().join("o").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("duplicate"));
}

#[test]
fn tuned_spec_feeds_a_trial() {
    let dir = tempfile::tempdir().unwrap();
    let tune_out = dir.path().join("tuned");
    let cfg = configs().join("tune/convex2d-sgd-hybrid.toml");
    run_ok(&["tune", "--config", cfg.to_str().unwrap(), "--out", tune_out.to_str().unwrap()]);
    let text = format!("schema_version = 1\nspec_file = \"tuned/best.json\"\n{CONVEX_TASK}");
    let trial_cfg = write_config(dir.path(), "from-file.toml", &text);
    let out = dir.path().join("t");
    run_ok(&["trial", "--config", trial_cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);

    let best: serde_json::Value = serde_json::from_str(&fs::read_to_string(tune_out.join("best.json")).unwrap()).unwrap();
    let trial: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("trial.json")).unwrap()).unwrap();
    assert_eq!(trial["spec"], best["best_spec"]);
    assert_eq!(trial["final_distance"], best["best_final_distance"]);
}
