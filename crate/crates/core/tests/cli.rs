use std::path::Path;
use std::process::{Command, Output};

use gold_sim::harness::trace::RunTrace;

const QUAD: &str = r#"
horizon = 400
seeds = [1, 2]

[game]
kind = "quadratic"
sets = [{ kind = "box", lo = [0.0], hi = [1.0] }]
targets = [[0.3]]

[delay]
kind = "power"
scale = 2.0
exponent = 0.25
"#;

fn gold(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gold-sim"))
        .args(args)
        .current_dir(dir)
        .output()
        .unwrap()
}

fn setup(config: &str) -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("exp.toml"), config).unwrap();
    dir
}

#[test]
fn check_prints_region() {
    let dir = setup(QUAD);
    let out = gold(dir.path(), &["check", "--config", "exp.toml"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("region = LOG_BOUNDARY"), "{text}");
}

#[test]
fn invalid_region_exits_with_two() {
    let dir = setup(&format!("{QUAD}\n[schedules]\nb = 0.5\nc = 0.6\n"));
    let out = gold(dir.path(), &["check", "--config", "exp.toml"]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.contains("INVALID"), "{err}");
    let out = gold(
        dir.path(),
        &[
            "run", "--config", "exp.toml", "--seed", "1", "--out", "t.csv",
        ],
    );
    assert_eq!(out.status.code(), Some(2));
    assert!(!dir.path().join("t.csv").exists());
}

#[test]
fn unknown_key_exits_with_two() {
    let dir = setup(&QUAD.replace("horizon = 400", "horizon = 400\ncolour = 1"));
    let out = gold(dir.path(), &["check", "--config", "exp.toml"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn missing_config_exits_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = gold(dir.path(), &["check", "--config", "nope.toml"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn run_then_analyze() {
    let dir = setup(QUAD);
    let d = dir.path();
    let out = gold(
        d,
        &[
            "run",
            "--config",
            "exp.toml",
            "--seed",
            "2",
            "--out",
            "runs/t.csv",
        ],
    );
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let trace = RunTrace::read_csv(std::fs::File::open(d.join("runs/t.csv")).unwrap()).unwrap();
    assert_eq!(trace.horizon(), 400);
    trace.verify_replay().unwrap();

    let out = gold(
        d,
        &[
            "analyze",
            "--trace",
            "runs/t.csv",
            "--config",
            "exp.toml",
            "--out",
            "m.csv",
        ],
    );
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let text = std::fs::read_to_string(d.join("m.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "run_id,T,regret,final_pivot_distance,empty_rounds,max_lag,A_sum,B_sum,C_sum"
    );
    let row: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(row[0], "t-p0");
    assert_eq!(row[1], "400");
    let regret: f64 = row[2].parse().unwrap();
    assert!(regret > 0.0);
    let empty: u64 = row[4].parse().unwrap();
    let lag: u64 = row[5].parse().unwrap();
    // floor(2 * 400^0.25) = 8 bounds both
    assert!(empty <= 8 && lag <= 8, "{empty} {lag}");
    assert!(lines.next().is_none());
}

#[test]
fn analyze_rejects_thinned_trace() {
    let dir = setup(&format!("{QUAD}\n[output]\nthin = 10\n"));
    let d = dir.path();
    let out = gold(
        d,
        &[
            "run", "--config", "exp.toml", "--seed", "1", "--out", "t.csv",
        ],
    );
    assert_eq!(out.status.code(), Some(0));
    let out = gold(
        d,
        &[
            "analyze", "--trace", "t.csv", "--config", "exp.toml", "--out", "m.csv",
        ],
    );
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.contains("thinned"), "{err}");
}

#[test]
fn run_all_seeds_writes_one_trace_each_and_metrics() {
    let dir = setup(&format!(
        "{QUAD}\n[output]\nmetrics_path = \"out/metrics.csv\"\n"
    ));
    let d = dir.path();
    let out = gold(d, &["run", "--config", "exp.toml", "--out", "out"]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert!(d.join("out/trace-s1.csv").exists());
    assert!(d.join("out/trace-s2.csv").exists());
    let metrics = std::fs::read_to_string(d.join("out/metrics.csv")).unwrap();
    let ids: Vec<&str> = metrics
        .lines()
        .skip(1)
        .map(|l| l.split(',').next().unwrap())
        .collect();
    assert_eq!(ids, vec!["s1-p0", "s2-p0"]);
}

#[test]
fn sweep_writes_table() {
    let dir = setup(QUAD);
    let d = dir.path();
    std::fs::write(
        d.join("grid.csv"),
        "b,c,alpha,T\n0.25,0.75,0.25,200\n0.25,0.75,0.25,800\n",
    )
    .unwrap();
    let out = gold(
        d,
        &[
            "sweep", "--config", "exp.toml", "--grid", "grid.csv", "--out", "s.csv",
        ],
    );
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let text = std::fs::read_to_string(d.join("s.csv")).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(
        lines[0],
        "b,c,alpha,T,seeds,regret_mean,regret_stderr,distance_mean,distance_stderr,slope"
    );
    assert_eq!(lines.len(), 3);

    std::fs::write(d.join("empty.csv"), "b,c,alpha,T\n").unwrap();
    let out = gold(
        d,
        &[
            "sweep",
            "--config",
            "exp.toml",
            "--grid",
            "empty.csv",
            "--out",
            "e.csv",
        ],
    );
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(
        std::fs::read_to_string(d.join("e.csv"))
            .unwrap()
            .lines()
            .count(),
        1
    );
}

#[test]
fn figure_delays_in_trace_head_column() {
    let config = r#"
horizon = 5
seeds = [0]
[game]
kind = "quadratic"
sets = [{ kind = "box", lo = [0.0], hi = [1.0] }]
targets = [[0.5]]
[delay]
kind = "scripted_file"
path = "delays.txt"
"#;
    let dir = setup(config);
    let d = dir.path();
    std::fs::write(d.join("delays.txt"), "3\n0\n2\n0\n1\n").unwrap();
    let out = gold(
        d,
        &[
            "run", "--config", "exp.toml", "--seed", "0", "--out", "t.csv",
        ],
    );
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let text = std::fs::read_to_string(d.join("t.csv")).unwrap();
    let heads: Vec<&str> = text
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(6).unwrap())
        .collect();
    assert_eq!(heads, vec!["-1", "2", "-1", "1", "3"]);
}
