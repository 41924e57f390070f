//! Command line front end: sequence generation, bound evaluation,
//! algorithm runs, k-finger simulation, composed executions, the
//! key-independent estimator, and canned pass/fail experiments.
//!
//! Output is one JSON record per line by default; `--format csv` prints
//! a header row followed by data rows. Every command is deterministic
//! given an explicit `--seed`; without one the seed comes from the
//! config file, then the `BSTLAB_SEED` environment variable, and as a
//! last resort a random seed is drawn and printed to stderr.

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::Value;

use bstlab::algorithms::{greedy_run, run_mtr, run_splay};
use bstlab::bounds::{
    balance_bound, dynamic_finger, entropy_bound, fixed_finger_at, fixed_finger_opt,
    k_lazy_finger_at, kfinger_monotone_strategy, lazy_finger_at, lazy_finger_opt, static_cost,
    static_finger, static_finger_at, static_optimality, unified_at, weighted_balance,
    weighted_balance_opt, weighted_dynamic_finger, weighted_static_finger_at, working_set,
    working_set_naive, Witness, FIXED_FINGER_OPT_MAX_N, LAZY_FINGER_OPT_MAX_N,
};
use bstlab::interleave::{composed_execute, Algorithm};
use bstlab::keyindependent::ki_ratio_report;
use bstlab::kfinger::{
    format_trace, optimal_strategy, parse_trace, random_trace, simulate_with, strategy_trace,
    RebalancePolicy,
};
use bstlab::seeding::derive_seed;
use bstlab::sequences::{
    compose, contains_pattern, decomposability_parameter, gen_decomposable, gen_phase_sequence,
    gen_preorder, gen_sequential, gen_tilted_grid, monotone_parameter,
};
use bstlab::tree::build_decomposable_reference_tree;
use bstlab::{AccessSequence, CompositionTemplate, Permutation, SearchTree, WeightFunction};

const AFTER_HELP: &str = "\
seeding:
  --seed wins over the config file, which wins over BSTLAB_SEED; with
  none of the three a random seed is drawn and printed to stderr.

config file (--config):
  plain text, one `key = value` per line, `#` comments; recognized keys
  are seed, format, and trials.

files:
  sequences are `n m` on one line and m keys on the next; trees and
  k-finger traces use the formats the library prints, and every format
  round-trips through its parser.";

#[derive(Parser)]
#[command(
    name = "bstlab",
    version,
    about = "Workbench for self-adjusting binary search trees and their cost bounds",
    after_help = AFTER_HELP
)]
struct Cli {
    /// Master random seed (see seeding notes in --help).
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Output format for records and tables.
    #[arg(long, global = true, value_enum)]
    format: Option<OutFormat>,

    /// Config file with `key = value` defaults.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum OutFormat {
    Json,
    Csv,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum PolicyArg {
    /// Rebuild the hand's top only when a pseudofinger breaks the depth line.
    OnViolation,
    /// Rebuild after every step that changes the pseudofinger set.
    Eager,
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate an access sequence and write it in the sequence file format.
    Gen {
        #[command(subcommand)]
        kind: GenKind,
    },

    /// Evaluate a named cost bound on a sequence.
    ///
    /// Kinds: ws, ws-naive, balance, entropy, wb, wb-opt, sf, wsf, df,
    /// wdf, so, static, ff, ff-opt, lf, lf-opt, unified, lfk,
    /// lfk-monotone, monotone, decomposability, pattern.
    Bound {
        /// Bound kind (see long help for the list).
        kind: String,
        /// Sequence file.
        #[arg(long)]
        seq: PathBuf,
        /// Tree for tree-relative bounds: `balanced`, `random`, or a file.
        #[arg(long)]
        tree: Option<String>,
        /// Finger key for finger bounds; omit to optimize over fingers.
        #[arg(long)]
        finger: Option<usize>,
        /// Weight file (whitespace-separated positive reals, one per key).
        #[arg(long)]
        weights: Option<PathBuf>,
        /// Number of fingers for lfk / lfk-monotone.
        #[arg(long)]
        k: Option<usize>,
        /// Pattern for `bound pattern`, e.g. `1,3,2`.
        #[arg(long)]
        pattern: Option<String>,
        /// Guard for exhaustive tree minima (lf-opt, ff-opt); the library
        /// itself refuses n above 12 (lf-opt) and 10 (ff-opt).
        #[arg(long, default_value_t = 12)]
        max_exhaustive: usize,
        /// Guard for brute-force pattern containment; hard cap 6.
        #[arg(long, default_value_t = 6)]
        max_pattern: usize,
        /// Write the optimizing witness (tree/finger/weights) as JSON.
        #[arg(long)]
        witness: Option<PathBuf>,
    },

    /// Run an algorithm over a sequence and report its cost.
    Run {
        /// One of: splay, greedy, mtr.
        alg: String,
        /// Sequence file.
        #[arg(long)]
        seq: PathBuf,
        /// Initial tree: `balanced` (default), `random`, a file, or
        /// `none` for greedy without history.
        #[arg(long)]
        tree: Option<String>,
        /// Include the per-access cost vector in the record.
        #[arg(long)]
        per_access: bool,
        /// Write one `t key cost` line per access.
        #[arg(long)]
        trace: Option<PathBuf>,
        /// Greedy only: write the touched point set as `key time` lines.
        #[arg(long)]
        points: Option<PathBuf>,
        /// Greedy only: verify the point set is arborally satisfied.
        #[arg(long)]
        check: bool,
    },

    /// Simulate a k-finger machine trace with an ordinary BST.
    SimulateKfinger {
        /// Number of fingers of the simulated machine.
        #[arg(long)]
        k: usize,
        /// Initial tree: `balanced` (default), `random`, or a file.
        #[arg(long)]
        tree: Option<String>,
        /// Universe size for `balanced` / `random` trees.
        #[arg(long)]
        n: Option<usize>,
        /// Read the machine trace from a file.
        #[arg(long)]
        trace: Option<PathBuf>,
        /// Generate a random well-formed trace with this many steps.
        #[arg(long)]
        random_steps: Option<usize>,
        /// Serve this sequence with an exhaustively optimal finger
        /// assignment (guarded: k^m must stay small).
        #[arg(long)]
        seq: Option<PathBuf>,
        /// When to rebuild the balanced top over the hand.
        #[arg(long, value_enum, default_value = "on-violation")]
        policy: PolicyArg,
        /// Save the simulated trace in the trace file format.
        #[arg(long)]
        save_trace: Option<PathBuf>,
    },

    /// Execute a sequence as interleaved part executions under a
    /// template-driven skeleton and report the cost breakdown.
    ComposeRun {
        /// Sequence file.
        #[arg(long)]
        seq: PathBuf,
        /// Consecutive key blocks, e.g. `1-4,5-8`.
        #[arg(long)]
        parts: String,
        /// Algorithm for the parts: splay or mtr.
        #[arg(long, default_value = "splay")]
        sub: String,
        /// Algorithm for the template: splay or mtr.
        #[arg(long, default_value = "splay")]
        template: String,
    },

    /// Estimate key-independent move-to-root cost and compare it to the
    /// working-set yardstick.
    Ki {
        /// Sequence file.
        #[arg(long)]
        seq: PathBuf,
        /// Monte Carlo trials over uniform relabelings.
        #[arg(long)]
        trials: Option<usize>,
    },

    /// Run a registered experiment; exit status reflects its assertions.
    Experiment {
        /// Experiment name; omit to list the registry.
        name: Option<String>,
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        k: Option<usize>,
        #[arg(long)]
        trials: Option<usize>,
        #[arg(long)]
        steps: Option<usize>,
        /// Write the table here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum GenKind {
    /// Keys 1..n in order.
    Sequential {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Preorder traversal of a tree.
    Preorder {
        /// Tree: `balanced` (default), `random`, or a file.
        #[arg(long)]
        tree: Option<String>,
        /// Universe size for `balanced` / `random` trees.
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Column-major order of the tilted k-by-l grid.
    TiltedGrid {
        #[arg(long)]
        k: usize,
        #[arg(long)]
        l: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Working-set-cheap phase sequence: Y phases of X accesses, each
    /// phase drawing round-robin from 2k random phase keys.
    Phase {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        k: usize,
        #[arg(long = "X")]
        x: usize,
        #[arg(long = "Y")]
        y: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Interleave part sequences under a template sequence.
    Compose {
        /// Template sequence file over 1..k.
        #[arg(long)]
        template: PathBuf,
        /// Part sequence file; repeat once per part, in order.
        #[arg(long)]
        part: Vec<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Random k-decomposable permutation of k^depth keys.
    Decomposable {
        #[arg(long)]
        k: usize,
        #[arg(long)]
        depth: u32,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

// ---------------------------------------------------------------------------
// Config and seeding.

struct Settings {
    seed: u64,
    format: OutFormat,
    trials: Option<usize>,
}

fn parse_config(path: &Path) -> Result<HashMap<String, String>, String> {
    let text = fs::read_to_string(path)
        .map_err(|e| format!("cannot read config {}: {e}", path.display()))?;
    let mut map = HashMap::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| format!("config line {}: expected `key = value`", i + 1))?;
        let key = key.trim();
        if !matches!(key, "seed" | "format" | "trials") {
            return Err(format!("config line {}: unknown key `{key}`", i + 1));
        }
        map.insert(key.to_string(), value.trim().to_string());
    }
    Ok(map)
}

fn resolve_settings(cli: &Cli) -> Result<Settings, String> {
    let config = match &cli.config {
        Some(path) => parse_config(path)?,
        None => HashMap::new(),
    };
    let format = match cli.format {
        Some(f) => f,
        None => match config.get("format").map(String::as_str) {
            Some("json") => OutFormat::Json,
            Some("csv") => OutFormat::Csv,
            Some(other) => return Err(format!("config format `{other}` is not json or csv")),
            None => OutFormat::Json,
        },
    };
    let trials = match config.get("trials") {
        Some(t) => Some(
            t.parse::<usize>()
                .map_err(|_| format!("config trials `{t}` is not a count"))?,
        ),
        None => None,
    };
    let seed = if let Some(s) = cli.seed {
        s
    } else if let Some(s) = config.get("seed") {
        s.parse::<u64>()
            .map_err(|_| format!("config seed `{s}` is not a u64"))?
    } else if let Ok(s) = std::env::var("BSTLAB_SEED") {
        s.parse::<u64>()
            .map_err(|_| format!("BSTLAB_SEED `{s}` is not a u64"))?
    } else {
        let s = rand::random::<u64>();
        eprintln!("seed = {s}");
        s
    };
    Ok(Settings {
        seed,
        format,
        trials,
    })
}

// ---------------------------------------------------------------------------
// Record rendering. A record is an ordered list of named JSON values;
// JSON mode prints one object per line, CSV mode a header plus rows.

type Record = Vec<(&'static str, Value)>;

fn render_json(rec: &Record) -> String {
    let mut out = String::from("{");
    for (i, (name, value)) in rec.iter().enumerate() {
        if i > 0 {
            out.push(',');
        }
        out.push_str(&serde_json::to_string(name).expect("string serializes"));
        out.push(':');
        out.push_str(&value.to_string());
    }
    out.push('}');
    out
}

fn csv_cell(value: &Value) -> String {
    let raw = match value {
        Value::String(s) => s.clone(),
        other => other.to_string(),
    };
    if raw.contains(',') || raw.contains('"') || raw.contains('\n') {
        format!("\"{}\"", raw.replace('"', "\"\""))
    } else {
        raw
    }
}

fn render_table(rows: &[Record], format: OutFormat) -> Vec<String> {
    match format {
        OutFormat::Json => rows.iter().map(render_json).collect(),
        OutFormat::Csv => {
            let mut lines = Vec::with_capacity(rows.len() + 1);
            if let Some(first) = rows.first() {
                lines.push(
                    first
                        .iter()
                        .map(|(name, _)| name.to_string())
                        .collect::<Vec<_>>()
                        .join(","),
                );
            }
            for row in rows {
                lines.push(row.iter().map(|(_, v)| csv_cell(v)).collect::<Vec<_>>().join(","));
            }
            lines
        }
    }
}

fn emit(rows: &[Record], format: OutFormat, out: Option<&Path>) -> Result<(), String> {
    let mut text = render_table(rows, format).join("\n");
    text.push('\n');
    match out {
        Some(path) => fs::write(path, text)
            .map_err(|e| format!("cannot write {}: {e}", path.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

// ---------------------------------------------------------------------------
// Shared argument plumbing.

fn read_sequence(path: &Path) -> Result<AccessSequence, String> {
    let text =
        fs::read_to_string(path).map_err(|e| format!("cannot read {}: {e}", path.display()))?;
    AccessSequence::parse(&text).map_err(|e| format!("{}: {e}", path.display()))
}

fn read_weights(path: &Path) -> Result<WeightFunction, String> {
    let text =
        fs::read_to_string(path).map_err(|e| format!("cannot read {}: {e}", path.display()))?;
    let ws = text
        .split_whitespace()
        .map(|t| {
            t.parse::<f64>()
                .map_err(|_| format!("{}: weight `{t}` is not a number", path.display()))
        })
        .collect::<Result<Vec<_>, _>>()?;
    WeightFunction::new(ws).map_err(|e| e.to_string())
}

/// Materialize a `--tree` argument: a named shape or a tree file.
fn tree_arg(spec: &str, n: usize, seed: u64) -> Result<SearchTree, String> {
    match spec {
        "balanced" => {
            if n == 0 {
                return Err("tree `balanced` needs a nonempty universe".into());
            }
            Ok(SearchTree::balanced_over(n))
        }
        "random" => {
            if n == 0 {
                return Err("tree `random` needs a nonempty universe".into());
            }
            Ok(SearchTree::random_bst(n, derive_seed(seed, 0x7472)))
        }
        path => {
            let text = fs::read_to_string(path)
                .map_err(|e| format!("cannot read tree {path}: {e}"))?;
            SearchTree::parse(&text).map_err(|e| format!("{path}: {e}"))
        }
    }
}

fn alg_arg(name: &str) -> Result<Algorithm, String> {
    match name {
        "splay" => Ok(Algorithm::Splay),
        "mtr" => Ok(Algorithm::MoveToRoot),
        other => Err(format!("unknown algorithm `{other}` (expected splay or mtr)")),
    }
}

fn parse_parts(text: &str) -> Result<Vec<(usize, usize)>, String> {
    text.split(',')
        .map(|block| {
            let (a, b) = block
                .split_once('-')
                .ok_or_else(|| format!("block `{block}` is not `a-b`"))?;
            let a = a.trim().parse::<usize>().map_err(|_| format!("bad block start in `{block}`"))?;
            let b = b.trim().parse::<usize>().map_err(|_| format!("bad block end in `{block}`"))?;
            Ok((a, b))
        })
        .collect()
}

fn parse_pattern(text: &str) -> Result<Permutation, String> {
    let keys = text
        .split(|c: char| c == ',' || c.is_whitespace())
        .filter(|t| !t.is_empty())
        .map(|t| {
            t.parse::<usize>()
                .map_err(|_| format!("pattern entry `{t}` is not a key"))
        })
        .collect::<Result<Vec<_>, _>>()?;
    Permutation::new(keys).map_err(|e| e.to_string())
}

fn ceil_log2(x: usize) -> u32 {
    if x <= 1 {
        0
    } else {
        (x - 1).ilog2() + 1
    }
}

// ---------------------------------------------------------------------------
// Dispatch.

fn run(cli: Cli) -> Result<ExitCode, String> {
    let settings = resolve_settings(&cli)?;
    match cli.cmd {
        Cmd::Gen { ref kind } => cmd_gen(kind, &settings),
        Cmd::Bound { .. } => cmd_bound(&cli.cmd, &settings),
        Cmd::Run { .. } => cmd_run(&cli.cmd, &settings),
        Cmd::SimulateKfinger { .. } => cmd_simulate(&cli.cmd, &settings),
        Cmd::ComposeRun { .. } => cmd_compose_run(&cli.cmd, &settings),
        Cmd::Ki { ref seq, trials } => cmd_ki(seq, trials, &settings),
        Cmd::Experiment {
            ref name,
            n,
            k,
            trials,
            steps,
            ref out,
        } => cmd_experiment(name.as_deref(), n, k, trials, steps, out.as_deref(), &settings),
    }
}

// ---------------------------------------------------------------------------
// gen

fn cmd_gen(kind: &GenKind, settings: &Settings) -> Result<ExitCode, String> {
    let seed = settings.seed;
    let (name, seq, out): (&str, AccessSequence, &Option<PathBuf>) = match kind {
        GenKind::Sequential { n, out } => (
            "sequential",
            gen_sequential(*n).map_err(|e| e.to_string())?.into_sequence(),
            out,
        ),
        GenKind::Preorder { tree, n, out } => {
            let spec = tree.as_deref().unwrap_or("balanced");
            let n = match n {
                Some(n) => *n,
                None if !matches!(spec, "balanced" | "random") => 0,
                None => return Err("gen preorder needs --n for a named tree shape".into()),
            };
            let t = tree_arg(spec, n, seed)?;
            (
                "preorder",
                gen_preorder(&t).map_err(|e| e.to_string())?.into_sequence(),
                out,
            )
        }
        GenKind::TiltedGrid { k, l, out } => (
            "tilted-grid",
            gen_tilted_grid(*k, *l).map_err(|e| e.to_string())?.into_sequence(),
            out,
        ),
        GenKind::Phase { n, k, x, y, out } => (
            "phase",
            gen_phase_sequence(*n, *k, *x, *y, seed).map_err(|e| e.to_string())?,
            out,
        ),
        GenKind::Compose { template, part, out } => {
            let template = read_sequence(template)?;
            let parts = part.iter().map(|p| read_sequence(p)).collect::<Result<Vec<_>, _>>()?;
            let ct = CompositionTemplate::new(template, parts).map_err(|e| e.to_string())?;
            ("compose", compose(&ct), out)
        }
        GenKind::Decomposable { k, depth, out } => (
            "decomposable",
            gen_decomposable(*k, *depth, seed)
                .map_err(|e| e.to_string())?
                .into_sequence(),
            out,
        ),
    };
    let text = seq.to_text();
    match out {
        Some(path) => {
            fs::write(path, &text).map_err(|e| format!("cannot write {}: {e}", path.display()))?;
            let rec: Record = vec![
                ("kind", Value::from(name)),
                ("n", Value::from(seq.n())),
                ("m", Value::from(seq.m())),
                ("out", Value::from(path.display().to_string())),
            ];
            emit(&[rec], settings.format, None)?;
        }
        None => {
            // stdout carries the file bytes; keep the echo off it
            print!("{text}");
            eprintln!("n = {}, m = {}", seq.n(), seq.m());
        }
    }
    Ok(ExitCode::SUCCESS)
}

// ---------------------------------------------------------------------------
// bound

const BOUND_KINDS: &str = "ws, ws-naive, balance, entropy, wb, wb-opt, sf, wsf, df, wdf, so, \
                           static, ff, ff-opt, lf, lf-opt, unified, lfk, lfk-monotone, monotone, \
                           decomposability, pattern";

fn cmd_bound(cmd: &Cmd, settings: &Settings) -> Result<ExitCode, String> {
    let Cmd::Bound {
        kind,
        seq,
        tree,
        finger,
        weights,
        k,
        pattern,
        max_exhaustive,
        max_pattern,
        witness,
    } = cmd
    else {
        unreachable!()
    };
    let s = read_sequence(seq)?;
    let need_tree = || -> Result<SearchTree, String> {
        tree_arg(tree.as_deref().unwrap_or("balanced"), s.n(), settings.seed)
    };
    let need_finger = || (*finger).ok_or_else(|| format!("bound {kind} needs --finger"));
    let need_weights = || -> Result<WeightFunction, String> {
        let path = weights.as_ref().ok_or_else(|| format!("bound {kind} needs --weights"))?;
        read_weights(path)
    };
    let need_k = || (*k).ok_or_else(|| format!("bound {kind} needs --k"));
    let need_perm = || -> Result<Permutation, String> {
        Permutation::new(s.keys().to_vec()).map_err(|e| e.to_string())
    };
    let guard_exhaustive = |cap: usize| -> Result<(), String> {
        let lim = (*max_exhaustive).min(cap);
        if s.n() > lim {
            Err(format!(
                "bound {kind} enumerates all trees; n = {} exceeds the limit {lim} \
                 (flag --max-exhaustive, hard cap {cap})",
                s.n()
            ))
        } else {
            Ok(())
        }
    };

    let e = |err: bstlab::Error| err.to_string();
    let (value, wit): (f64, Option<Witness>) = match kind.as_str() {
        "ws" => (working_set(&s), None),
        "ws-naive" => (working_set_naive(&s), None),
        "balance" => (balance_bound(&s), None),
        "entropy" => (entropy_bound(&s), None),
        "wb" => (weighted_balance(&s, &need_weights()?).map_err(e)?, None),
        "wb-opt" => {
            let b = weighted_balance_opt(&s);
            (b.value, b.witness)
        }
        "sf" => match finger {
            Some(f) => (static_finger_at(&s, *f).map_err(e)?, None),
            None => {
                let b = static_finger(&s);
                (b.value, b.witness)
            }
        },
        "wsf" => (
            weighted_static_finger_at(&s, &need_weights()?, need_finger()?).map_err(e)?,
            None,
        ),
        "df" => (dynamic_finger(&s), None),
        "wdf" => (weighted_dynamic_finger(&s, &need_weights()?).map_err(e)?, None),
        "so" => {
            let b = static_optimality(&s).map_err(e)?;
            (b.value, b.witness)
        }
        "static" => (static_cost(&s, &need_tree()?).map_err(e)?, None),
        "ff" => (fixed_finger_at(&s, &need_tree()?, need_finger()?).map_err(e)?, None),
        "ff-opt" => {
            guard_exhaustive(FIXED_FINGER_OPT_MAX_N)?;
            let b = fixed_finger_opt(&s).map_err(e)?;
            (b.value, b.witness)
        }
        "lf" => (lazy_finger_at(&s, &need_tree()?).map_err(e)?, None),
        "lf-opt" => {
            guard_exhaustive(LAZY_FINGER_OPT_MAX_N)?;
            let b = lazy_finger_opt(&s).map_err(e)?;
            (b.value, b.witness)
        }
        "unified" => (unified_at(&s, &need_tree()?, need_finger()?).map_err(e)?, None),
        "lfk" => (k_lazy_finger_at(&s, &need_tree()?, need_k()?).map_err(e)?, None),
        "lfk-monotone" => (
            kfinger_monotone_strategy(&s, &need_tree()?, need_k()?).map_err(e)?,
            None,
        ),
        "monotone" => (monotone_parameter(&s) as f64, None),
        "decomposability" => (decomposability_parameter(&need_perm()?) as f64, None),
        "pattern" => {
            let text = pattern.as_ref().ok_or("bound pattern needs --pattern")?;
            let p = parse_pattern(text)?;
            let lim = (*max_pattern).min(6);
            if p.n() > lim {
                return Err(format!(
                    "pattern length {} exceeds the limit {lim} (flag --max-pattern, hard cap 6)",
                    p.n()
                ));
            }
            (
                if contains_pattern(&s, &p).map_err(e)? { 1.0 } else { 0.0 },
                None,
            )
        }
        other => return Err(format!("unknown bound kind `{other}`; kinds: {BOUND_KINDS}")),
    };

    if let Some(path) = witness {
        write_witness(path, wit.as_ref())?;
    }

    let mut params = serde_json::Map::new();
    params.insert("n".into(), Value::from(s.n()));
    params.insert("m".into(), Value::from(s.m()));
    if let Some(t) = tree {
        params.insert("tree".into(), Value::from(t.clone()));
    }
    if let Some(f) = finger {
        params.insert("finger".into(), Value::from(*f));
    }
    if let Some(k) = k {
        params.insert("k".into(), Value::from(*k));
    }
    if let Some(p) = pattern {
        params.insert("pattern".into(), Value::from(p.clone()));
    }
    let rec: Record = vec![
        ("kind", Value::from(kind.clone())),
        ("value", Value::from(value)),
        ("params", Value::Object(params)),
    ];
    emit(&[rec], settings.format, None)?;
    Ok(ExitCode::SUCCESS)
}

fn write_witness(path: &Path, wit: Option<&Witness>) -> Result<(), String> {
    let mut obj = serde_json::Map::new();
    match wit {
        None => {}
        Some(Witness::Tree(t)) => {
            obj.insert("tree".into(), Value::from(t.to_text()));
        }
        Some(Witness::Finger(f)) => {
            obj.insert("finger".into(), Value::from(*f));
        }
        Some(Witness::TreeAndFinger(t, f)) => {
            obj.insert("tree".into(), Value::from(t.to_text()));
            obj.insert("finger".into(), Value::from(*f));
        }
        Some(Witness::Weights(w)) => {
            let ws: Vec<f64> = (1..=w.n()).map(|i| w.get(i)).collect();
            obj.insert("weights".into(), Value::from(ws));
        }
    }
    let mut text = Value::Object(obj).to_string();
    text.push('\n');
    fs::write(path, text).map_err(|e| format!("cannot write {}: {e}", path.display()))
}

// ---------------------------------------------------------------------------
// run

fn cmd_run(cmd: &Cmd, settings: &Settings) -> Result<ExitCode, String> {
    let Cmd::Run {
        alg,
        seq,
        tree,
        per_access,
        trace,
        points,
        check,
    } = cmd
    else {
        unreachable!()
    };
    let s = read_sequence(seq)?;
    let spec = tree.as_deref().unwrap_or("balanced");
    let e = |err: bstlab::Error| err.to_string();

    let (ledger, satisfied) = match alg.as_str() {
        "splay" => {
            let mut t = tree_arg(spec, s.n(), settings.seed)?;
            (run_splay(&mut t, &s).map_err(e)?, None)
        }
        "mtr" => {
            let mut t = tree_arg(spec, s.n(), settings.seed)?;
            (run_mtr(&mut t, &s).map_err(e)?, None)
        }
        "greedy" => {
            let initial = if spec == "none" {
                None
            } else {
                Some(tree_arg(spec, s.n(), settings.seed)?)
            };
            let outcome = greedy_run(&s, initial.as_ref()).map_err(e)?;
            if let Some(path) = points {
                let mut text = String::new();
                for &(x, y) in outcome.point_set().points() {
                    text.push_str(&format!("{x} {y}\n"));
                }
                fs::write(path, text)
                    .map_err(|err| format!("cannot write {}: {err}", path.display()))?;
            }
            let satisfied = if *check {
                Some(outcome.point_set().is_arborally_satisfied())
            } else {
                None
            };
            (outcome.ledger, satisfied)
        }
        other => return Err(format!("unknown algorithm `{other}` (expected splay, greedy, mtr)")),
    };

    if let Some(path) = trace {
        let mut text = String::new();
        for (i, (&key, &cost)) in s.keys().iter().zip(ledger.per_access()).enumerate() {
            text.push_str(&format!("{} {key} {cost}\n", i + 1));
        }
        fs::write(path, text).map_err(|err| format!("cannot write {}: {err}", path.display()))?;
    }

    let mut rec: Record = vec![
        ("alg", Value::from(alg.clone())),
        ("n", Value::from(s.n())),
        ("m", Value::from(s.m())),
        ("total", Value::from(ledger.total())),
    ];
    if *per_access {
        rec.push(("per_access", Value::from(ledger.per_access().to_vec())));
    }
    if let Some(ok) = satisfied {
        rec.push(("satisfied", Value::from(ok)));
    }
    emit(&[rec], settings.format, None)?;
    Ok(if satisfied == Some(false) {
        ExitCode::from(1)
    } else {
        ExitCode::SUCCESS
    })
}

// ---------------------------------------------------------------------------
// simulate-kfinger

fn cmd_simulate(cmd: &Cmd, settings: &Settings) -> Result<ExitCode, String> {
    let Cmd::SimulateKfinger {
        k,
        tree,
        n,
        trace,
        random_steps,
        seq,
        policy,
        save_trace,
    } = cmd
    else {
        unreachable!()
    };
    let sources =
        trace.is_some() as usize + random_steps.is_some() as usize + seq.is_some() as usize;
    if sources != 1 {
        return Err("pick exactly one of --trace, --random-steps, --seq".into());
    }
    let sequence = seq.as_ref().map(|p| read_sequence(p)).transpose()?;

    let spec = tree.as_deref().unwrap_or("balanced");
    let named_shape = matches!(spec, "balanced" | "random");
    let n = match (n, &sequence) {
        (Some(n), _) => *n,
        (None, Some(s)) => s.n(),
        (None, None) if named_shape => {
            return Err("simulate-kfinger needs --n for a named tree shape".into())
        }
        (None, None) => 0,
    };
    let tree0 = tree_arg(spec, n, settings.seed)?;
    let e = |err: bstlab::Error| err.to_string();

    let mut strategy_cost = None;
    let instructions = if let Some(path) = trace {
        let text = fs::read_to_string(path)
            .map_err(|err| format!("cannot read {}: {err}", path.display()))?;
        parse_trace(&text).map_err(e)?
    } else if let Some(steps) = random_steps {
        random_trace(&tree0, *k, *steps, derive_seed(settings.seed, 0x6b66)).map_err(e)?
    } else {
        let s = sequence.as_ref().expect("checked above");
        let (assignment, cost) = optimal_strategy(&tree0, s, *k).map_err(e)?;
        strategy_cost = Some(cost);
        strategy_trace(&tree0, s, &assignment, *k).map_err(e)?
    };
    if let Some(path) = save_trace {
        fs::write(path, format_trace(&instructions))
            .map_err(|err| format!("cannot write {}: {err}", path.display()))?;
    }

    let policy = match policy {
        PolicyArg::OnViolation => RebalancePolicy::OnViolation,
        PolicyArg::Eager => RebalancePolicy::OnPseudofingerChange,
    };
    let (_, report) = simulate_with(&instructions, &tree0, *k, policy).map_err(e)?;

    let mut rec: Record = vec![
        ("n", Value::from(report.n)),
        ("k", Value::from(report.k)),
        ("machine_cost", Value::from(report.machine_cost)),
        ("simulated_cost", Value::from(report.simulated_cost)),
        ("ratio", Value::from(report.ratio)),
        ("budget", Value::from(report.budget)),
        ("within_budget", Value::from(report.within_budget)),
        ("max_pseudofinger_depth", Value::from(report.max_pseudofinger_depth)),
        ("depth_bound", Value::from(report.depth_bound)),
        ("rebuilds", Value::from(report.rebuilds)),
    ];
    if let Some(cost) = strategy_cost {
        rec.push(("strategy_cost", Value::from(cost)));
    }
    emit(&[rec], settings.format, None)?;
    Ok(ExitCode::SUCCESS)
}

// ---------------------------------------------------------------------------
// compose-run

fn cmd_compose_run(cmd: &Cmd, settings: &Settings) -> Result<ExitCode, String> {
    let Cmd::ComposeRun {
        seq,
        parts,
        sub,
        template,
    } = cmd
    else {
        unreachable!()
    };
    let s = read_sequence(seq)?;
    let partition = parse_parts(parts)?;
    let sub = alg_arg(sub)?;
    let template = alg_arg(template)?;
    let (_, breakdown) =
        composed_execute(&s, &partition, sub, template).map_err(|e| e.to_string())?;
    let rec: Record = vec![
        ("n", Value::from(s.n())),
        ("m", Value::from(s.m())),
        ("parts", Value::from(breakdown.parts.clone())),
        ("template", Value::from(breakdown.template)),
        ("template_portion", Value::from(breakdown.template_portion)),
        ("total", Value::from(breakdown.total)),
    ];
    emit(&[rec], settings.format, None)?;
    Ok(ExitCode::SUCCESS)
}

// ---------------------------------------------------------------------------
// ki

fn cmd_ki(seq: &Path, trials: Option<usize>, settings: &Settings) -> Result<ExitCode, String> {
    let s = read_sequence(seq)?;
    let trials = trials.or(settings.trials).unwrap_or(200);
    let report = ki_ratio_report(&s, trials, settings.seed).map_err(|e| e.to_string())?;
    let rec: Record = vec![
        ("mean", Value::from(report.estimate.mean)),
        ("stderr", Value::from(report.estimate.stderr)),
        ("trials", Value::from(report.estimate.trials)),
        ("ws", Value::from(report.ws)),
        ("f_n", Value::from(report.f_n)),
        ("ratio", Value::from(report.ratio)),
        ("in_band", Value::from(report.in_band)),
    ];
    emit(&[rec], settings.format, None)?;
    Ok(ExitCode::SUCCESS)
}

// ---------------------------------------------------------------------------
// experiment

const EXPERIMENTS: [(&str, &str); 3] = [
    (
        "decomposable-lf",
        "lazy finger on the reference tree of a decomposable permutation vs 4(n-1)ceil(log2 k)",
    ),
    (
        "ki-ratio",
        "key-independent move-to-root against its working-set yardstick, three access families",
    ),
    (
        "kfinger-overhead",
        "simulated k-finger machine cost against 16 log2(k+1) per step plus 16n",
    ),
];

fn list_experiments() {
    eprintln!("registered experiments:");
    for (name, what) in EXPERIMENTS {
        eprintln!("  {name:<18} {what}");
    }
}

struct ExperimentRow {
    fields: Record,
    pass: bool,
}

fn cmd_experiment(
    name: Option<&str>,
    n: Option<usize>,
    k: Option<usize>,
    trials: Option<usize>,
    steps: Option<usize>,
    out: Option<&Path>,
    settings: &Settings,
) -> Result<ExitCode, String> {
    let Some(name) = name else {
        list_experiments();
        return Ok(ExitCode::from(2));
    };
    let trials = trials.or(settings.trials);
    let rows = match name {
        "decomposable-lf" => experiment_decomposable_lf(n, k, settings.seed)?,
        "ki-ratio" => experiment_ki_ratio(n, trials, settings.seed)?,
        "kfinger-overhead" => experiment_kfinger_overhead(n, k, steps, settings.seed)?,
        other => {
            eprintln!("unknown experiment `{other}`");
            list_experiments();
            return Ok(ExitCode::from(2));
        }
    };
    let all_pass = rows.iter().all(|r| r.pass);
    let table: Vec<Record> = rows.into_iter().map(|r| r.fields).collect();
    emit(&table, settings.format, out)?;
    Ok(if all_pass { ExitCode::SUCCESS } else { ExitCode::from(1) })
}

/// Run independent row jobs on worker threads; rows come back in the
/// (already parameter-sorted) order the jobs were listed in.
fn fan_out<J, F>(jobs: Vec<J>, f: F) -> Result<Vec<ExperimentRow>, String>
where
    J: Send,
    F: Fn(J) -> Result<ExperimentRow, String> + Sync,
{
    let f = &f;
    std::thread::scope(|scope| {
        let handles: Vec<_> = jobs
            .into_iter()
            .map(|job| scope.spawn(move || f(job)))
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().map_err(|_| "worker panicked".to_string())?)
            .collect()
    })
}

fn experiment_decomposable_lf(
    n: Option<usize>,
    k: Option<usize>,
    seed: u64,
) -> Result<Vec<ExperimentRow>, String> {
    let k = k.unwrap_or(4);
    let n_max = n.unwrap_or(1024);
    if k < 2 {
        return Err("decomposable-lf needs --k at least 2".into());
    }
    let mut jobs = Vec::new();
    let mut size = k;
    let mut depth = 1u32;
    while size <= n_max {
        jobs.push((depth, size, derive_seed(seed, depth as u64)));
        match size.checked_mul(k) {
            Some(next) => size = next,
            None => break,
        }
        depth += 1;
    }
    if jobs.is_empty() {
        return Err(format!("decomposable-lf needs --n at least --k ({k})"));
    }
    fan_out(jobs, |(depth, size, row_seed)| {
        let e = |err: bstlab::Error| err.to_string();
        let perm = gen_decomposable(k, depth, row_seed).map_err(e)?;
        let tree = build_decomposable_reference_tree(&perm, k).map_err(e)?;
        let lf = lazy_finger_at(perm.as_sequence(), &tree).map_err(e)?;
        let bound = 4.0 * (size as f64 - 1.0) * ceil_log2(k) as f64;
        let pass = lf <= bound + 1e-9;
        Ok(ExperimentRow {
            fields: vec![
                ("n", Value::from(size)),
                ("k", Value::from(k)),
                ("lf_t", Value::from(lf)),
                ("bound", Value::from(bound)),
                ("pass", Value::from(pass)),
            ],
            pass,
        })
    })
}

fn experiment_ki_ratio(
    n: Option<usize>,
    trials: Option<usize>,
    seed: u64,
) -> Result<Vec<ExperimentRow>, String> {
    use rand::Rng;
    let n = n.unwrap_or(128);
    let trials = trials.unwrap_or(200);
    if n < 8 {
        return Err("ki-ratio needs --n at least 8".into());
    }
    let m = (n as f64 * (n as f64).log2()).round() as usize;

    // three access families over [n], each of length m = n log2 n
    let round_robin: Vec<usize> = (0..m).map(|i| (i % 8) * (n / 8) + 1).collect();
    let sequential: Vec<usize> = (0..m).map(|i| i % n + 1).collect();
    let uniform: Vec<usize> = {
        let mut r = bstlab::seeding::rng(derive_seed(seed, 0x756e));
        (0..m).map(|_| r.gen_range(1..=n)).collect()
    };
    let jobs = vec![
        ("round-robin-8", round_robin, derive_seed(seed, 1)),
        ("sequential", sequential, derive_seed(seed, 2)),
        ("uniform", uniform, derive_seed(seed, 3)),
    ];
    fan_out(jobs, |(family, keys, row_seed)| {
        let e = |err: bstlab::Error| err.to_string();
        let s = AccessSequence::new(n, keys).map_err(e)?;
        let report = ki_ratio_report(&s, trials, row_seed).map_err(e)?;
        Ok(ExperimentRow {
            pass: report.in_band,
            fields: vec![
                ("family", Value::from(family)),
                ("n", Value::from(n)),
                ("m", Value::from(m)),
                ("trials", Value::from(trials)),
                ("mean", Value::from(report.estimate.mean)),
                ("stderr", Value::from(report.estimate.stderr)),
                ("ws", Value::from(report.ws)),
                ("f_n", Value::from(report.f_n)),
                ("ratio", Value::from(report.ratio)),
                ("pass", Value::from(report.in_band)),
            ],
        })
    })
}

fn experiment_kfinger_overhead(
    n: Option<usize>,
    k: Option<usize>,
    steps: Option<usize>,
    seed: u64,
) -> Result<Vec<ExperimentRow>, String> {
    let k = k.unwrap_or(4);
    let n_max = n.unwrap_or(512);
    if n_max < 16 {
        return Err("kfinger-overhead needs --n at least 16".into());
    }
    let mut sizes = vec![n_max / 4, n_max / 2, n_max];
    sizes.dedup();
    let jobs: Vec<(usize, usize, u64)> = sizes
        .into_iter()
        .enumerate()
        .map(|(i, n)| (n, steps.unwrap_or(8 * n), derive_seed(seed, i as u64)))
        .collect();
    fan_out(jobs, |(n, steps, row_seed)| {
        let e = |err: bstlab::Error| err.to_string();
        let tree0 = SearchTree::balanced_over(n);
        let trace = random_trace(&tree0, k, steps, row_seed).map_err(e)?;
        let (_, report) =
            simulate_with(&trace, &tree0, k, RebalancePolicy::OnViolation).map_err(e)?;
        Ok(ExperimentRow {
            pass: report.within_budget,
            fields: vec![
                ("n", Value::from(n)),
                ("k", Value::from(k)),
                ("steps", Value::from(steps)),
                ("machine_cost", Value::from(report.machine_cost)),
                ("simulated_cost", Value::from(report.simulated_cost)),
                ("ratio", Value::from(report.ratio)),
                ("overhead", Value::from(16.0 * ((k + 1) as f64).log2())),
                ("pass", Value::from(report.within_budget)),
            ],
        })
    })
}
