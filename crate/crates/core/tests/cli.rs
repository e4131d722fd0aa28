use std::path::Path;
use std::process::{Command, Output};

use vimlab::experiment::{self, ExperimentConfig};

fn vimlab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_vimlab")).args(args).output().expect("binary runs")
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_string_lossy().into_owned()
}

const SIM: &str = r#"
kind = "poly_sim"
seed = 12
repetitions = 1
n = 400
sampler = "gaussian_conditional"
[predictor]
kind = "ols"
[inference]
test = "sign"
[[methods]]
id = "SobolCPI"
n_cal = 10
[[methods]]
id = "LOCO"
[[methods]]
id = "GLM"
"#;

#[test]
fn simulate_is_byte_identical_across_runs_and_jobs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "sim.toml", SIM);
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    let out = vimlab(&["simulate", "--config", &cfg, "--out", a.to_str().unwrap(), "--jobs", "1"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let out = vimlab(&["simulate", "--config", &cfg, "--out", b.to_str().unwrap(), "--jobs", "2"]);
    assert!(out.status.success());
    let (ta, tb) = (std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    assert_eq!(ta, tb);
    let text = String::from_utf8(ta).unwrap();
    assert!(text.starts_with("repetition,method,feature,raw_score,normalized_score,std_error,p_value\n"));
    // GLM has no per-sample deltas, so its standard error and p-value cells are empty.
    assert!(text.lines().filter(|l| l.contains(",GLM,")).all(|l| l.ends_with(",,")));
    let side: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("a.json")).unwrap()).unwrap();
    assert_eq!(side["noise_sd"], 0.1);
    assert_eq!(side["methods"][0]["n_cal"], 10);
}

#[test]
fn seed_flag_changes_output() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "sim.toml", SIM);
    let a = vimlab(&["simulate", "--config", &cfg]);
    let b = vimlab(&["simulate", "--config", &cfg, "--seed", "13"]);
    assert!(a.status.success() && b.status.success());
    assert_ne!(a.stdout, b.stdout);
}

#[test]
fn validation_errors_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let typo = write(dir.path(), "typo.toml", &SIM.replace("repetitions", "repetitons"));
    let out = vimlab(&["simulate", "--config", &typo]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("repetitons"));
    let no_seed = write(dir.path(), "noseed.toml", &SIM.replace("seed = 12\n", ""));
    assert_eq!(vimlab(&["simulate", "--config", &no_seed]).status.code(), Some(1));
    let bad_method = write(dir.path(), "bad.toml", &SIM.replace("\"GLM\"", "\"SHAP\""));
    assert_eq!(vimlab(&["simulate", "--config", &bad_method]).status.code(), Some(1));
    let cfg = write(dir.path(), "sim.toml", SIM);
    assert_eq!(vimlab(&["analyze", "--config", &cfg]).status.code(), Some(1));
}

#[test]
fn analyze_round_trips_a_simulated_file() {
    let dir = tempfile::tempdir().unwrap();
    let sim = ExperimentConfig::from_toml(SIM).unwrap();
    let d = experiment::generate_repetition_data(&sim, 0).unwrap();
    let csv = dir.path().join("data.csv");
    d.write_csv(&csv, "y").unwrap();
    let analyze = SIM.replace("kind = \"poly_sim\"", "kind = \"csv_analysis\"").replace("n = 400\n", "")
        + "[csv]\npath = \"data.csv\"\ntarget = \"y\"\n";
    let cfg_path = write(dir.path(), "analyze.toml", &analyze);
    let cfg = ExperimentConfig::load(Path::new(&cfg_path)).unwrap();
    let from_file = experiment::run_analyze(&cfg).unwrap();
    let in_memory = experiment::run_simulate(&sim).unwrap();
    assert_eq!(from_file.len(), in_memory.len());
    for (a, b) in from_file.iter().zip(&in_memory) {
        assert_eq!((&a.method, &a.feature), (&b.method, &b.feature));
        assert!((a.raw_score - b.raw_score).abs() < 1e-9, "{a:?} {b:?}");
    }
    let out = vimlab(&["analyze", "--config", &cfg_path]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn analyze_reports_missing_target_and_small_files() {
    let dir = tempfile::tempdir().unwrap();
    let sim = ExperimentConfig::from_toml(&SIM.replace("n = 400", "n = 20")).unwrap();
    let d = experiment::generate_repetition_data(&sim, 0).unwrap();
    d.write_csv(&dir.path().join("small.csv"), "y").unwrap();
    let base = "kind = \"csv_analysis\"\nseed = 1\n[csv]\npath = \"small.csv\"\n";
    let missing = write(dir.path(), "missing.toml", &format!("{base}target = \"label\"\n[[methods]]\nid = \"LOCO\"\n"));
    let out = vimlab(&["analyze", "--config", &missing]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("label"));
    let small = write(
        dir.path(),
        "small.toml",
        &format!("{base}target = \"y\"\n[predictor]\nkind = \"ols\"\n[[methods]]\nid = \"LOCO_W\"\n"),
    );
    let out = vimlab(&["analyze", "--config", &small]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("LOCO_W") && err.contains("rows"), "{err}");
}

#[test]
fn oracle_check_passes_and_flags_corrupted_joints() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "oracle.toml", "kind = \"oracle_check\"\nseed = 3\nn_joints = 30\n");
    let out = vimlab(&["oracle-check", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.lines().all(|l| l.starts_with("PASS")));
    assert!(text.contains("TSI(x1) = 0.000000") && text.contains("SAGEvf(x1) = 0.090000"));

    write(
        dir.path(),
        "bad.joint",
        "support a 0 1\ntarget y 0 1\n0 0 0.5\n1 1 0.499\n",
    );
    let bad = write(
        dir.path(),
        "bad.toml",
        "kind = \"oracle_check\"\nseed = 3\nn_joints = 5\njoint = \"bad.joint\"\n",
    );
    let out = vimlab(&["oracle-check", "--config", &bad]);
    assert_eq!(out.status.code(), Some(2));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.lines().last().unwrap().starts_with("FAIL joint_file"), "{text}");
}

#[test]
fn convergence_writes_grid_rows() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "conv.toml",
        "kind = \"convergence\"\nseed = 4\nrepetitions = 4\nn_grid = [200, 2000]\npopulation_model = true\n\
         [[methods]]\nid = \"SobolCPI\"\nn_cal = 20\n[[methods]]\nid = \"cSAGEvf\"\nn_draws = 50\n",
    );
    let out = vimlab(&["convergence", "--config", &cfg]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("n,method,feature,mean_score,sd_score"));
    assert_eq!(lines.count(), 8);
}
