//! End-to-end runs of the installed binary: exit codes, artifact layout, and
//! byte-level reproducibility.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn colson(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_colson"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary should run")
}

fn expect_code(out: &Output, code: i32) -> (String, String) {
    let stdout = String::from_utf8_lossy(&out.stdout).into_owned();
    let stderr = String::from_utf8_lossy(&out.stderr).into_owned();
    assert_eq!(out.status.code(), Some(code), "stdout:\n{stdout}\nstderr:\n{stderr}");
    (stdout, stderr)
}

/// Small model and short chain so process-level tests stay quick.
fn tiny(extra: &[&str]) -> Vec<String> {
    let mut args: Vec<String> = [
        "--set",
        "model.gat_hidden=8",
        "--set",
        "model.gat_heads=2",
        "--set",
        "model.mlp_hidden=8",
        "--set",
        "model.tau_embed_dim=4",
        "--set",
        "model.diffusion_steps=3",
        "--set",
        "scenario.pedestrians=1",
        "--set",
        "trainer.warm_start_episodes=2",
        "--set",
        "trainer.batch_size=4",
        "--set",
        "trainer.steps_per_gradient=8",
        "--set",
        "trainer.eval_every=0",
        "--set",
        "trainer.checkpoint_every=0",
        "--set",
        "trainer.eval_episodes=0",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    args.extend(extra.iter().map(|s| s.to_string()));
    args
}

fn run_tiny(dir: &Path, head: &[&str], extra: &[&str]) -> Output {
    let mut args: Vec<String> = head.iter().map(|s| s.to_string()).collect();
    args.extend(tiny(extra));
    let arg_refs: Vec<&str> = args.iter().map(|s| s.as_str()).collect();
    colson(dir, &arg_refs)
}

#[test]
fn zero_episode_training_lays_out_the_run_directory() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_tiny(
        dir.path(),
        &["train"],
        &["--episodes", "0", "--out", "run", "--set", "seed=77"],
    );
    let (stdout, _) = expect_code(&out, 0);
    assert!(stdout.contains("trained 0 episodes"), "{stdout}");

    let run = dir.path().join("run");
    assert!(run.join("config.toml").is_file());
    assert!(run.join("checkpoints/init.ndgt").is_file());
    assert!(run.join("logs/metrics.jsonl").is_file());
    assert!(run.join("reports/train.json").is_file());
    assert_eq!(fs::read_to_string(run.join("logs/metrics.jsonl")).unwrap(), "");

    let snapshot = fs::read_to_string(run.join("config.toml")).unwrap();
    assert!(snapshot.contains("seed = 77"), "{snapshot}");
    assert!(snapshot.contains("episodes = 0"), "{snapshot}");

    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(run.join("reports/train.json")).unwrap())
            .unwrap();
    assert_eq!(report["episodes"], 0);
    assert!(report["warm_transitions"].as_u64().unwrap() > 0);
}

#[test]
fn training_twice_writes_identical_metrics_and_weights() {
    let dir = tempfile::tempdir().unwrap();
    for name in ["a", "b"] {
        let out = run_tiny(dir.path(), &["train"], &["--episodes", "2", "--out", name]);
        expect_code(&out, 0);
    }
    for file in ["logs/metrics.jsonl", "checkpoints/final.ndgt"] {
        let a = fs::read(dir.path().join("a").join(file)).unwrap();
        let b = fs::read(dir.path().join("b").join(file)).unwrap();
        assert_eq!(a, b, "{file} differs between identical runs");
    }
    // The run reports differ only in the directory their paths point at.
    let read = |name: &str| -> serde_json::Value {
        serde_json::from_str(
            &fs::read_to_string(dir.path().join(name).join("reports/train.json")).unwrap(),
        )
        .unwrap()
    };
    let (a, b) = (read("a"), read("b"));
    for field in ["episodes", "warm_transitions", "buffer_len", "final_success_rate"] {
        assert_eq!(a[field], b[field], "{field} differs");
    }
}

#[test]
fn missing_config_file_names_the_path() {
    let dir = tempfile::tempdir().unwrap();
    let out = colson(dir.path(), &["eval", "--config", "nowhere.toml"]);
    let (_, stderr) = expect_code(&out, 1);
    assert!(stderr.contains("nowhere.toml"), "{stderr}");
}

#[test]
fn unknown_config_keys_are_usage_errors() {
    let dir = tempfile::tempdir().unwrap();
    let out = colson(dir.path(), &["eval", "--set", "trainer.episods=5"]);
    let (_, stderr) = expect_code(&out, 1);
    assert!(stderr.contains("episods"), "{stderr}");
}

#[test]
fn evaluation_writes_report_table_and_trajectories() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_tiny(
        dir.path(),
        &["eval", "--policy", "orca", "--episodes", "3", "--visible"],
        &[],
    );
    let (stdout, _) = expect_code(&out, 0);
    assert!(stdout.contains("orca"), "{stdout}");
    assert!(stdout.contains("success%"), "{stdout}");

    let run = dir.path().join("run");
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(run.join("reports/eval.json")).unwrap())
            .unwrap();
    assert_eq!(report["episodes"], 3);
    let table = fs::read_to_string(run.join("reports/eval.txt")).unwrap();
    assert_eq!(stdout, table);
    let lines = fs::read_to_string(run.join("logs/trajectories.jsonl")).unwrap();
    assert_eq!(lines.lines().count(), 3);
}

#[test]
fn zero_episodes_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = colson(dir.path(), &["eval", "--episodes", "0"]);
    expect_code(&out, 1);
}

#[test]
fn evaluation_artifacts_are_bitwise_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    for name in ["a", "b"] {
        let out = run_tiny(
            dir.path(),
            &["eval", "--policy", "straight", "--episodes", "3", "--out", name],
            &[],
        );
        expect_code(&out, 0);
    }
    for file in ["reports/eval.json", "logs/trajectories.jsonl", "reports/eval.txt"] {
        let a = fs::read(dir.path().join("a").join(file)).unwrap();
        let b = fs::read(dir.path().join("b").join(file)).unwrap();
        assert_eq!(a, b, "{file} differs between identical runs");
    }
}

#[test]
fn diffusion_policy_demands_weights_before_running() {
    let dir = tempfile::tempdir().unwrap();
    let out = colson(dir.path(), &["eval", "--policy", "diffusion", "--episodes", "1"]);
    let (_, stderr) = expect_code(&out, 1);
    assert!(stderr.contains("checkpoint"), "{stderr}");

    let out = colson(
        dir.path(),
        &["eval", "--policy", "diffusion", "--episodes", "1", "--checkpoint", "gone.ndgt"],
    );
    let (_, stderr) = expect_code(&out, 2);
    assert!(stderr.contains("gone.ndgt"), "{stderr}");
}

#[test]
fn fresh_weights_feed_evaluation_and_comparison() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_tiny(dir.path(), &["train"], &["--episodes", "0", "--out", "t"]);
    expect_code(&out, 0);

    let out = run_tiny(
        dir.path(),
        &["eval", "--episodes", "2", "--checkpoint", "t/checkpoints/init.ndgt"],
        &["--mode", "smooth"],
    );
    let (stdout, _) = expect_code(&out, 0);
    assert!(stdout.contains("diffusion/smoothed"), "{stdout}");

    let out = run_tiny(
        dir.path(),
        &[
            "compare",
            "--episodes",
            "2",
            "--checkpoint",
            "t/checkpoints/init.ndgt",
            "--modes",
            "plain,smooth",
        ],
        &[],
    );
    let (stdout, _) = expect_code(&out, 0);
    assert!(stdout.contains("plain"), "{stdout}");
    assert!(stdout.contains("smoothed"), "{stdout}");
    let rows: serde_json::Value = serde_json::from_str(
        &fs::read_to_string(dir.path().join("run/reports/compare.json")).unwrap(),
    )
    .unwrap();
    assert_eq!(rows.as_array().unwrap().len(), 2);
}

#[test]
fn wall_scenario_rollout_draws_the_walls() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_tiny(
        dir.path(),
        &["rollout", "--policy", "straight", "--scenario", "wall"],
        &[],
    );
    let (stdout, _) = expect_code(&out, 0);
    assert!(stdout.contains("seed 0:"), "{stdout}");

    let svg = fs::read_to_string(dir.path().join("run/reports/rollout.svg")).unwrap();
    assert!(svg.contains("class=\"wall\""), "no walls in:\n{svg}");
    assert!(svg.contains("class=\"robot\""));
    let lines = fs::read_to_string(dir.path().join("run/logs/trajectories.jsonl")).unwrap();
    assert_eq!(lines.lines().count(), 1);
}

#[test]
fn sweep_writes_table_and_curve() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_tiny(
        dir.path(),
        &["sweep", "--policy", "straight", "--episodes", "2", "--counts", "1,2"],
        &[],
    );
    let (stdout, _) = expect_code(&out, 0);
    assert!(stdout.contains("n=1"), "{stdout}");
    assert!(stdout.contains("n=2"), "{stdout}");

    let tsv = fs::read_to_string(dir.path().join("run/reports/sweep.tsv")).unwrap();
    assert_eq!(tsv.lines().count(), 3, "{tsv}");
    assert!(tsv.lines().next().unwrap().starts_with('#'));
    let svg = fs::read_to_string(dir.path().join("run/reports/sweep.svg")).unwrap();
    assert!(svg.contains("<polyline"));
}

#[test]
fn plot_renders_logs_and_rejects_garbage() {
    let dir = tempfile::tempdir().unwrap();
    let log = r#"{"seed":3,"outcome":"timeout","robot":[[0.0,0.0],[0.0,0.0]],"pedestrians":[],"rewards":[0.0],"walls":[],"goal":[0.0,4.0]}"#;
    fs::write(dir.path().join("t.jsonl"), format!("{log}\n")).unwrap();

    let out = colson(dir.path(), &["plot", "--log", "t.jsonl"]);
    let (stdout, _) = expect_code(&out, 0);
    assert!(stdout.contains("t.svg"), "{stdout}");
    let svg = fs::read_to_string(dir.path().join("t.svg")).unwrap();
    assert_eq!(svg.matches("class=\"robot\"").count(), 1);
    assert!(!svg.contains("<polyline"));

    let out = colson(dir.path(), &["plot", "--log", "t.jsonl", "--out", "again.svg"]);
    expect_code(&out, 0);
    assert_eq!(svg, fs::read_to_string(dir.path().join("again.svg")).unwrap());

    fs::write(dir.path().join("bad.jsonl"), format!("{log}\nnot json\n")).unwrap();
    let out = colson(dir.path(), &["plot", "--log", "bad.jsonl"]);
    let (_, stderr) = expect_code(&out, 1);
    assert!(stderr.contains("bad.jsonl:2"), "{stderr}");
}

#[test]
fn help_prints_usage_and_unknown_commands_fail() {
    let dir = tempfile::tempdir().unwrap();
    let (stdout, _) = expect_code(&colson(dir.path(), &["help"]), 0);
    assert!(stdout.contains("usage: colson"));
    for command in ["train", "collect", "eval", "compare", "rollout", "sweep", "plot"] {
        assert!(stdout.contains(command), "usage misses {command}");
    }
    let (_, stderr) = expect_code(&colson(dir.path(), &["frobnicate"]), 1);
    assert!(stderr.contains("frobnicate"), "{stderr}");
}

#[test]
fn collect_saves_demonstrations() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_tiny(dir.path(), &["collect", "--episodes", "2"], &[]);
    let (stdout, _) = expect_code(&out, 0);
    assert!(stdout.contains("collected 2 demonstrations"), "{stdout}");
    let lines = fs::read_to_string(dir.path().join("run/logs/demos.jsonl")).unwrap();
    assert_eq!(lines.lines().count(), 2);
}
