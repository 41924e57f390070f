//! End-to-end checks of the `bstlab` binary: the documented worked
//! examples, reproducibility of seeded generation, and the record
//! shapes of every subcommand.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_bstlab"));
    c.env_remove("BSTLAB_SEED");
    c
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("bstlab-cli-{name}-{}", std::process::id()));
    fs::create_dir_all(&dir).expect("scratch dir");
    dir
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stdout_of(out: &Output) -> String {
    assert!(
        out.status.success(),
        "command failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout.clone()).expect("utf8 stdout")
}

fn json_of(out: &Output) -> serde_json::Value {
    let text = stdout_of(out);
    serde_json::from_str(text.lines().next().expect("one record")).expect("json record")
}

fn write_seq(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    fs::write(&path, text).expect("write sequence");
    path.display().to_string()
}

#[test]
fn gen_examples_match_the_documented_files() {
    let out = run(&["gen", "tilted-grid", "--k", "2", "--l", "2", "--seed", "1"]);
    assert_eq!(stdout_of(&out), "4 4\n1 3 2 4\n");
    let out = run(&["gen", "sequential", "--n", "3", "--seed", "1"]);
    assert_eq!(stdout_of(&out), "3 3\n1 2 3\n");
}

#[test]
fn phase_generation_is_reproducible_byte_for_byte() {
    let args = ["gen", "phase", "--n", "100", "--k", "2", "--X", "8", "--Y", "3"];
    let a = run(&[&args[..], &["--seed", "7"]].concat());
    let b = run(&[&args[..], &["--seed", "7"]].concat());
    let text = stdout_of(&a);
    assert_eq!(text, stdout_of(&b));
    assert_eq!(text.lines().next(), Some("100 24"));

    // the seed can come from the environment or a config file instead
    let c = bin().args(args).env("BSTLAB_SEED", "7").output().expect("binary runs");
    assert_eq!(text, stdout_of(&c));
    let dir = scratch("phase-config");
    let conf = dir.join("conf");
    fs::write(&conf, "# defaults\nseed = 7\n").expect("write config");
    let d = run(&[&args[..], &["--config", conf.to_str().expect("utf8 path")]].concat());
    assert_eq!(text, stdout_of(&d));
}

#[test]
fn omitting_the_seed_prints_the_drawn_one() {
    let out = run(&["gen", "phase", "--n", "16", "--k", "1", "--X", "4", "--Y", "1"]);
    assert!(out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("seed = "), "stderr announces the seed: {err}");
}

#[test]
fn bound_examples_hit_their_documented_values() {
    let dir = scratch("bounds");
    let s1 = write_seq(&dir, "s1", "2 4\n1 2 1 2\n");
    let s2 = write_seq(&dir, "s2", "2 4\n1 1 2 2\n");
    let s3 = write_seq(&dir, "s3", "3 4\n1 3 1 3\n");

    let v = json_of(&run(&["bound", "ws", "--seq", &s1, "--seed", "1"]));
    assert_eq!(v["kind"], "ws");
    assert_eq!(v["value"], 3.0);
    assert_eq!(v["params"]["m"], 4);

    let v = json_of(&run(&["bound", "entropy", "--seq", &s2, "--seed", "1"]));
    assert_eq!(v["value"], 4.0);

    let v = json_of(&run(&[
        "bound", "lfk", "--k", "2", "--tree", "balanced", "--seq", &s3, "--seed", "1",
    ]));
    assert_eq!(v["value"], 4.0);
    assert_eq!(v["params"]["k"], 2);
}

#[test]
fn bound_rejects_unknown_kinds_and_over_limit_patterns() {
    let dir = scratch("bound-errors");
    let s = write_seq(&dir, "s", "2 2\n1 2\n");
    let out = run(&["bound", "nosuch", "--seq", &s, "--seed", "1"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("unknown bound kind"));

    let out = run(&[
        "bound", "pattern", "--pattern", "1,2,3,4,5,6,7", "--seq", &s, "--seed", "1",
    ]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("exceeds the limit"));
}

#[test]
fn a_witness_file_reproduces_the_reported_value() {
    let dir = scratch("witness");
    let s = write_seq(&dir, "s", "4 8\n1 1 1 1 2 3 4 1\n");
    let wit = dir.join("witness.json");
    let v = json_of(&run(&[
        "bound", "so", "--seq", &s, "--witness",
        wit.to_str().expect("utf8 path"), "--seed", "1",
    ]));
    let value = v["value"].as_f64().expect("value");
    let wit: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(&wit).expect("witness written")).expect("json");
    let tree = bstlab::SearchTree::parse(wit["tree"].as_str().expect("tree text")).expect("parses");
    let seq = bstlab::AccessSequence::parse(&fs::read_to_string(dir.join("s")).expect("seq"))
        .expect("sequence parses");
    let replayed = bstlab::bounds::static_cost(&seq, &tree).expect("cost evaluates");
    assert_eq!(replayed, value);
}

#[test]
fn run_mtr_charges_one_per_repeated_root_access() {
    let dir = scratch("mtr");
    let s = write_seq(&dir, "s", "3 5\n2 2 2 2 2\n");
    let v = json_of(&run(&["run", "mtr", "--seq", &s, "--seed", "1"]));
    assert_eq!(v["total"], 5);
}

#[test]
fn run_splay_on_sequential_access_is_linear() {
    let dir = scratch("splay");
    let keys: Vec<String> = (1..=64).map(|i| i.to_string()).collect();
    let s = write_seq(&dir, "s", &format!("64 64\n{}\n", keys.join(" ")));
    let trace = dir.join("trace.txt");
    let v = json_of(&run(&[
        "run", "splay", "--seq", &s, "--per-access",
        "--trace", trace.to_str().expect("utf8 path"), "--seed", "1",
    ]));
    let total = v["total"].as_u64().expect("total");
    assert!(total <= 20 * 64, "sequential splay total {total}");
    assert_eq!(v["per_access"].as_array().expect("per_access").len(), 64);

    // trace lines are `t key cost` and sum back to the total
    let text = fs::read_to_string(&trace).expect("trace written");
    let mut sum = 0;
    for (i, line) in text.lines().enumerate() {
        let fields: Vec<&str> = line.split_whitespace().collect();
        assert_eq!(fields[0], (i + 1).to_string());
        assert_eq!(fields[1], (i + 1).to_string());
        sum += fields[2].parse::<u64>().expect("cost");
    }
    assert_eq!(sum, total);
}

#[test]
fn run_greedy_emits_a_satisfied_point_set() {
    let dir = scratch("greedy");
    let s = write_seq(&dir, "s", "4 6\n3 1 4 1 2 4\n");
    let points = dir.join("points.txt");
    let v = json_of(&run(&[
        "run", "greedy", "--seq", &s, "--check",
        "--points", points.to_str().expect("utf8 path"), "--seed", "1",
    ]));
    assert_eq!(v["satisfied"], true);
    let text = fs::read_to_string(&points).expect("points written");
    assert!(text.lines().count() > 6, "prefix rows plus one row per access");
}

#[test]
fn simulate_kfinger_stays_within_budget_and_replays_saved_traces() {
    let dir = scratch("simulate");
    let trace = dir.join("trace.txt");
    let a = json_of(&run(&[
        "simulate-kfinger", "--k", "2", "--n", "32", "--random-steps", "200",
        "--save-trace", trace.to_str().expect("utf8 path"), "--seed", "5",
    ]));
    assert_eq!(a["within_budget"], true);
    let b = json_of(&run(&[
        "simulate-kfinger", "--k", "2", "--n", "32",
        "--trace", trace.to_str().expect("utf8 path"), "--seed", "5",
    ]));
    for field in ["machine_cost", "simulated_cost", "max_pseudofinger_depth"] {
        assert_eq!(a[field], b[field], "replay differs in {field}");
    }

    // an exhaustively optimal strategy run reports its machine cost
    let s = write_seq(&dir, "s", "3 4\n1 3 1 3\n");
    let v = json_of(&run(&[
        "simulate-kfinger", "--k", "2", "--tree", "balanced", "--seq", &s, "--seed", "1",
    ]));
    assert_eq!(v["strategy_cost"], 4);
    assert_eq!(v["within_budget"], true);
}

#[test]
fn compose_run_reports_parts_template_and_total() {
    let dir = scratch("compose");
    let s = write_seq(&dir, "s", "8 8\n1 5 2 6 3 7 4 8\n");
    let v = json_of(&run(&[
        "compose-run", "--seq", &s, "--parts", "1-4,5-8", "--seed", "1",
    ]));
    let parts: u64 = v["parts"]
        .as_array()
        .expect("parts")
        .iter()
        .map(|p| p.as_u64().expect("cost"))
        .sum();
    let template = v["template"].as_u64().expect("template");
    let portion = v["template_portion"].as_u64().expect("portion");
    let total = v["total"].as_u64().expect("total");
    assert_eq!(total, parts + portion);
    assert!(portion <= 3 * template);
}

#[test]
fn ki_reports_the_documented_fields() {
    let dir = scratch("ki");
    let keys: Vec<String> = (0..48).map(|i| (i % 12 + 1).to_string()).collect();
    let s = write_seq(&dir, "s", &format!("12 48\n{}\n", keys.join(" ")));
    let v = json_of(&run(&["ki", "--seq", &s, "--trials", "40", "--seed", "9"]));
    for field in ["mean", "stderr", "trials", "ws", "f_n", "ratio"] {
        assert!(v.get(field).is_some(), "missing field {field}");
    }
    assert_eq!(v["trials"], 40);
    assert_eq!(v["in_band"], true);
}

#[test]
fn unknown_experiments_list_the_registry() {
    let out = run(&["experiment", "nosuch", "--seed", "1"]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    for name in ["decomposable-lf", "ki-ratio", "kfinger-overhead"] {
        assert!(err.contains(name), "registry listing misses {name}");
    }
}

#[test]
fn experiments_pass_and_write_sorted_tables() {
    let dir = scratch("experiments");
    let out_path = dir.join("table.csv");
    let out = run(&[
        "experiment", "decomposable-lf", "--k", "2", "--n", "32",
        "--format", "csv", "--out", out_path.to_str().expect("utf8 path"), "--seed", "3",
    ]);
    assert!(out.status.success());
    let table = fs::read_to_string(&out_path).expect("table written");
    let mut lines = table.lines();
    assert_eq!(lines.next(), Some("n,k,lf_t,bound,pass"));
    let ns: Vec<u64> = lines
        .map(|l| l.split(',').next().expect("n column").parse().expect("number"))
        .collect();
    assert_eq!(ns, vec![2, 4, 8, 16, 32]);

    let out = run(&["experiment", "ki-ratio", "--n", "32", "--trials", "40", "--seed", "3"]);
    assert!(out.status.success());
    let text = String::from_utf8_lossy(&out.stdout);
    let rows: Vec<serde_json::Value> = text
        .lines()
        .map(|l| serde_json::from_str(l).expect("row"))
        .collect();
    assert_eq!(rows.len(), 3);
    assert!(rows.iter().all(|r| r["pass"] == true));

    let out = run(&["experiment", "kfinger-overhead", "--k", "2", "--n", "64", "--seed", "3"]);
    assert!(out.status.success());
}
