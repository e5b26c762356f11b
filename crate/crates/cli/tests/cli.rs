use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const TINY: &str = r#"
preset = "desk"
n_seeds = 1
max_episodes = 4
eval_every_episodes = 2
eval_voyages = 2
n_profiles = 6

[td3]
hidden = [8]
batch_size = 8
warmup_steps = 20

[dp_grid]
soc_levels = 41
x_levels = 26
"#;

fn fcems(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fcems"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn tiny_config(dir: &Path) -> String {
    let p = dir.join("tiny.toml");
    fs::write(&p, TINY).unwrap();
    p.to_str().unwrap().to_string()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn generate_profiles_writes_split_and_plot() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = tiny_config(dir.path());
    let out = dir.path().join("profiles");
    let o = fcems(&["generate-profiles", "--config", &cfg, "--seed", "3", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(out.join("train").is_dir());
    assert!(out.join("validation").is_dir());
    assert!(out.join("profiles.svg").is_file());
    let csv = fs::read_dir(out.join("train")).unwrap().next().unwrap().unwrap().path();
    let text = fs::read_to_string(csv).unwrap();
    let header = text.lines().find(|l| !l.starts_with('#')).unwrap();
    assert_eq!(header, "t_s,p_dem_kw,spa");
}

#[test]
fn train_then_evaluate_checkpoint() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = tiny_config(dir.path());
    let run = dir.path().join("run");
    let o = fcems(&["train", "--config", &cfg, "--seed", "5", "--out", run.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    for f in ["learning_curves.csv", "learning_curves.svg", "best_agent.ckpt", "summary.json", "config.toml"] {
        assert!(run.join(f).is_file(), "missing {f}");
    }
    let ckpt = run.join("best_agent.ckpt");
    let eval = dir.path().join("eval");
    let o = fcems(&[
        "evaluate",
        "--config",
        &cfg,
        "--out",
        eval.to_str().unwrap(),
        "--checkpoint",
        ckpt.to_str().unwrap(),
        "--strategy",
        "zero",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let report = fs::read_to_string(eval.join("report.csv")).unwrap();
    let items: Vec<&str> = report.lines().skip(1).map(|l| l.split(',').next().unwrap()).collect();
    assert_eq!(items, ["PEMFC", "Battery", "Electricity", "H2", "Sum"]);
    assert!(report.lines().next().unwrap().contains("cost_ratio_pct"));
    assert!(eval.join("voyages.svg").is_file());
    assert!(eval.join("trajectories").is_dir());
}

#[test]
fn benchmark_compares_against_dp() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = tiny_config(dir.path());
    let out = dir.path().join("bench");
    let o = fcems(&[
        "benchmark",
        "--config",
        &cfg,
        "--out",
        out.to_str().unwrap(),
        "--strategy",
        "zero",
        "--strategy",
        "random",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let summary = fs::read_to_string(out.join("benchmark_summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 4);
    assert!(out.join("benchmark.svg").is_file());
    assert!(fs::read_dir(out.join("dp")).unwrap().any(|e| e.unwrap().path().extension().is_some_and(|x| x == "json")));
}

#[test]
fn gradcheck_passes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("gc");
    let o = fcems(&["gradcheck", "--seed", "1", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = fs::read_to_string(out.join("gradcheck.csv")).unwrap();
    assert_eq!(csv.lines().count(), 21);
}

#[test]
fn bad_config_fails_with_structured_error() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("bad.toml");
    fs::write(&p, "n_seeds = 0\n").unwrap();
    let o = fcems(&["train", "--config", p.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert!(!o.status.success());
    assert!(stderr(&o).starts_with("error[config]:"), "{}", stderr(&o));

    fs::write(&p, "no_such_key = 1\n").unwrap();
    let o = fcems(&["gradcheck", "--config", p.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert!(!o.status.success());
    assert!(stderr(&o).starts_with("error[config]:"), "{}", stderr(&o));
}

#[test]
fn unknown_strategy_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = tiny_config(dir.path());
    let o = fcems(&[
        "evaluate",
        "--config",
        &cfg,
        "--out",
        dir.path().join("e").to_str().unwrap(),
        "--strategy",
        "nope",
    ]);
    assert!(!o.status.success());
    let err = stderr(&o);
    assert!(err.starts_with("error[strategy]:"), "{err}");
    assert!(err.contains("zero"), "{err}");
}

#[test]
fn missing_checkpoint_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = tiny_config(dir.path());
    let o = fcems(&[
        "evaluate",
        "--config",
        &cfg,
        "--out",
        dir.path().join("e").to_str().unwrap(),
        "--checkpoint",
        dir.path().join("absent.ckpt").to_str().unwrap(),
    ]);
    assert!(!o.status.success());
    assert!(stderr(&o).starts_with("error["), "{}", stderr(&o));
}
