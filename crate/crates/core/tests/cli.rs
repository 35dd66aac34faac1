use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use awavo::harness::{logged_branch_is_sound, CurveRow, LearningCurve, TrainConfig};
use awavo::safe_rl::BranchDecision;

const SMALL: &str = "env = cartpole
width = 16
layers = 2
batch_size = 16
warmup = 32
num_quantiles = 8
eval_episodes = 2
updates_per_step = 2
target_update_every = 5
bounds = 5, 5
";

fn awavo(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_awavo")).args(args).output().unwrap()
}

fn train(dir: &Path, config: &Path, episodes: &str) -> Output {
    awavo(&[
        "train",
        "--config",
        config.to_str().unwrap(),
        "--seed",
        "3",
        "--episodes",
        episodes,
        "--out",
        dir.to_str().unwrap(),
    ])
}

#[test]
fn training_is_byte_for_byte_deterministic() {
    let tmp = tempfile::tempdir().unwrap();
    let config = tmp.path().join("small.txt");
    fs::write(&config, SMALL).unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    assert!(train(&a, &config, "4").status.success());
    assert!(train(&b, &config, "4").status.success());
    for file in [
        "curve.csv",
        "decisions.log",
        "config.txt",
        "summary.txt",
        "trace.csv",
        "initial_actor.txt",
        "final_actor.txt",
        "final_critic.txt",
    ] {
        assert_eq!(fs::read(a.join(file)).unwrap(), fs::read(b.join(file)).unwrap(), "{file} differs");
    }

    // the logged branch column re-derives from the logged estimates
    let cfg = TrainConfig::load(a.join("config.txt")).unwrap();
    let curve = LearningCurve::load(a.join("curve.csv")).unwrap();
    assert_eq!(curve.rows.len(), 4);
    let tau = cfg.tolerance().unwrap();
    for row in &curve.rows {
        assert!(logged_branch_is_sound(row, &cfg.bounds, tau).unwrap());
    }

    let series = tmp.path().join("interpretation.csv");
    let out = awavo(&[
        "interpret",
        "--trace",
        a.join("trace.csv").to_str().unwrap(),
        "--out",
        series.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = fs::read_to_string(series).unwrap();
    assert!(text.starts_with("t,factor,p_traj,p_factor,p_traj_given_factor,capped"));
    assert!(text.lines().count() > 1);
}

#[test]
fn zero_episodes_writes_header_and_initial_checkpoint_only() {
    let tmp = tempfile::tempdir().unwrap();
    let config = tmp.path().join("small.txt");
    fs::write(&config, SMALL).unwrap();
    let dir = tmp.path().join("run");
    let out = train(&dir, &config, "0");
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let curve = fs::read_to_string(dir.join("curve.csv")).unwrap();
    assert_eq!(curve, "episode,return,j_g1,j_g2,branch,td_error\n");
    assert!(dir.join("initial_actor.txt").exists());
    assert!(!dir.join("final_actor.txt").exists());
}

#[test]
fn verify_is_deterministic_and_passes() {
    let a = awavo(&["verify", "--seed", "7"]);
    let b = awavo(&["verify", "--seed", "7"]);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    let text = String::from_utf8(a.stdout).unwrap();
    assert!(text.lines().count() >= 20);
    assert!(text.lines().all(|l| l.ends_with(" PASS")));
}

#[test]
fn rate_recovers_inverse_square_root() {
    let tmp = tempfile::tempdir().unwrap();
    let path = tmp.path().join("curve.csv");
    let rows = (0..400)
        .map(|e| CurveRow {
            episode: e,
            cumulative_return: -200.0 / ((e + 1) as f64).sqrt(),
            constraints: vec![0.0],
            branch: BranchDecision::Reward,
            td_error: 0.0,
        })
        .collect();
    let mut f = fs::File::create(&path).unwrap();
    LearningCurve { rows }.write_csv(1, &mut f).unwrap();
    drop(f);
    let out = awavo(&["rate", "--curve", path.to_str().unwrap()]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let exponent: f64 = text.split_whitespace().nth(1).unwrap().parse().unwrap();
    assert!((exponent - 0.5).abs() <= 0.02, "{text}");
}

#[test]
fn oracle_subcommand_passes() {
    let out = awavo(&["oracle", "--trials", "200"]);
    assert!(out.status.success());
    assert_eq!(String::from_utf8(out.stdout).unwrap().lines().count(), 3);
}

#[test]
fn usage_and_config_errors_exit_with_two() {
    assert_eq!(awavo(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(awavo(&[]).status.code(), Some(2));
    let tmp = tempfile::tempdir().unwrap();
    let config = tmp.path().join("bad.txt");
    fs::write(&config, "env = cartpole\nlearning_rate = 3\n").unwrap();
    assert_eq!(train(&tmp.path().join("x"), &config, "1").status.code(), Some(2));
    fs::write(&config, "env = cartpole\ngamma = 1.5\n").unwrap();
    assert_eq!(train(&tmp.path().join("x"), &config, "1").status.code(), Some(2));
}
