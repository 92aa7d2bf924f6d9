//! Command-line front end.
//!
//! Exit codes: 0 success or convergence, 2 mining stopped at `max_iters`, 3 invalid
//! input, 4 I/O failure.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::energy::node_energy;
use crate::error::{Error, Result};
use crate::eval::{detection_score, evaluate, MetricsRow};
use crate::io::{load_arg, load_arg_dir, load_config, load_pattern, save_arg, save_pattern, write_json};
use crate::matcher::match_one;
use crate::miner::{mine, IterationRecord};
use crate::model::{parse_ext_float, Arg, Label, MatchParams, MinDegree, MiningConfig, NodeId};
use crate::serde_ext::ext_float;
use crate::synth::{generate, initial_template, load_spec, save_ground_truth};

pub const EXIT_OK: i32 = 0;
pub const EXIT_MAX_ITERS: i32 = 2;
pub const EXIT_INVALID: i32 = 3;
pub const EXIT_IO: i32 = 4;

#[derive(Debug, Parser)]
#[command(name = "mvap", version, about = "Mine maximal-size attributed patterns from ARG collections")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic data set with a planted pattern.
    Generate {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Mine a pattern from positive and negative ARGs.
    Mine(MineArgs),
    /// Match a pattern to one ARG and print the energy breakdown.
    Match {
        #[arg(long)]
        pattern: PathBuf,
        #[arg(long)]
        arg: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Evaluate a pattern on test ARGs.
    Eval {
        #[arg(long)]
        pattern: PathBuf,
        #[arg(long)]
        pos: PathBuf,
        #[arg(long)]
        neg: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Also write the metrics row as CSV.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Mine and evaluate over a grid of `tau` and `d` values.
    Sweep(SweepArgs),
}

#[derive(Debug, Args)]
pub struct MineArgs {
    #[arg(long)]
    pub pos: PathBuf,
    #[arg(long)]
    pub neg: PathBuf,
    #[arg(long)]
    pub init: PathBuf,
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub report: PathBuf,
    #[arg(long, value_parser = parse_tau)]
    pub tau: Option<f64>,
    #[arg(long, value_parser = parse_degree)]
    pub d: Option<MinDegree>,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, value_delimiter = ',', required = true, value_parser = parse_tau)]
    pub tau: Vec<f64>,
    #[arg(long, value_delimiter = ',', required = true, value_parser = parse_degree)]
    pub d: Vec<MinDegree>,
    #[arg(long)]
    pub pos: PathBuf,
    #[arg(long)]
    pub neg: PathBuf,
    #[arg(long)]
    pub init: PathBuf,
    #[arg(long)]
    pub pos_test: PathBuf,
    #[arg(long)]
    pub neg_test: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
}

fn parse_tau(s: &str) -> std::result::Result<f64, String> {
    parse_ext_float(s).map_err(|e| e.to_string())
}

fn parse_degree(s: &str) -> std::result::Result<MinDegree, String> {
    s.parse::<MinDegree>().map_err(|e| e.to_string())
}

pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Io { .. } => EXIT_IO,
        _ => EXIT_INVALID,
    }
}

/// Hex SHA-256 of the config's canonical JSON form.
pub fn config_hash(cfg: &MiningConfig) -> String {
    let json = serde_json::to_string(cfg).expect("config serializes");
    hex::encode(Sha256::digest(json.as_bytes()))
}

fn load_config_or_default(path: Option<&Path>) -> Result<MiningConfig> {
    match path {
        Some(p) => load_config(p),
        None => Ok(MiningConfig::default()),
    }
}

/// Runs a parsed command and returns the process exit code.
pub fn run(cli: Cli) -> Result<i32> {
    match cli.command {
        Command::Generate { spec, out } => cmd_generate(&spec, &out).map(|_| EXIT_OK),
        Command::Mine(args) => cmd_mine(&args),
        Command::Match { pattern, arg, config } => {
            let report = cmd_match(&pattern, &arg, config.as_deref())?;
            println!("{}", serde_json::to_string_pretty(&report).expect("report serializes"));
            Ok(EXIT_OK)
        }
        Command::Eval {
            pattern,
            pos,
            neg,
            config,
            out,
        } => {
            let row = cmd_eval(&pattern, &pos, &neg, config.as_deref())?;
            let table = metrics_csv(std::slice::from_ref(&row))?;
            print!("{table}");
            if let Some(out) = out {
                fs::write(&out, table).map_err(|e| Error::io(&out, e))?;
            }
            Ok(EXIT_OK)
        }
        Command::Sweep(args) => cmd_sweep(&args).map(|_| EXIT_OK),
    }
}

#[derive(Serialize)]
struct GenerateManifest {
    spec_hash: String,
    positives: Vec<String>,
    negatives: Vec<String>,
    truth: String,
    init: String,
}

fn save_args(dir: &Path, args: &[Arg<f64>]) -> Result<Vec<String>> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut names = Vec::with_capacity(args.len());
    for g in args {
        let name = format!("{}.json", g.id());
        save_arg(g, dir.join(&name))?;
        names.push(name);
    }
    Ok(names)
}

/// Writes `pos/`, `neg/`, `truth.json`, `init.json` and `manifest.json` under `out`.
pub fn cmd_generate(spec_path: &Path, out: &Path) -> Result<()> {
    let spec = load_spec(spec_path)?;
    let data = generate::<f64>(&spec)?;
    let init = initial_template(&spec, &data)?;
    fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let positives = save_args(&out.join("pos"), &data.pos)?;
    let negatives = save_args(&out.join("neg"), &data.neg)?;
    save_ground_truth(&data.truth, out.join("truth.json"))?;
    save_pattern(&init, out.join("init.json"))?;
    let spec_json = serde_json::to_string(&spec).expect("spec serializes");
    write_json(
        out.join("manifest.json"),
        &GenerateManifest {
            spec_hash: hex::encode(Sha256::digest(spec_json.as_bytes())),
            positives,
            negatives,
            truth: "truth.json".into(),
            init: "init.json".into(),
        },
    )
}

#[derive(Serialize)]
pub struct MiningReport {
    pub config_hash: String,
    pub config: MiningConfig,
    pub converged: bool,
    pub stop_reason: &'static str,
    pub iterations: usize,
    pub n_nodes: usize,
    pub edges: Vec<(NodeId, NodeId)>,
    pub final_params: MatchParams<f64>,
    pub history: Vec<IterationRecord>,
}

fn mine_config(args: &MineArgs) -> Result<MiningConfig> {
    let mut cfg = load_config_or_default(args.config.as_deref())?;
    if let Some(tau) = args.tau {
        cfg.tau = tau;
    }
    if let Some(d) = args.d {
        cfg.d = d;
    }
    if let Some(seed) = args.seed {
        cfg.rng_seed = seed;
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Mines, writes the pattern and the report, and returns 0 on convergence or 2 when
/// the iteration budget ran out.
pub fn cmd_mine(args: &MineArgs) -> Result<i32> {
    let cfg = mine_config(args)?;
    let pos = load_arg_dir::<f64>(&args.pos)?;
    let neg = load_arg_dir::<f64>(&args.neg)?;
    let init = load_pattern::<f64>(&args.init)?;
    let outcome = mine(&init, &pos, &neg, &cfg)?;
    save_pattern(&outcome.pattern, &args.out)?;
    let report = MiningReport {
        config_hash: config_hash(&cfg),
        config: cfg.clone(),
        converged: outcome.converged,
        stop_reason: if outcome.converged { "converged" } else { "max_iters" },
        iterations: outcome.state.iteration,
        n_nodes: outcome.pattern.len(),
        edges: outcome.pattern.edges().iter().copied().collect(),
        final_params: outcome.pattern.params.clone(),
        history: outcome.state.history,
    };
    write_json(&args.report, &report)?;
    Ok(if outcome.converged { EXIT_OK } else { EXIT_MAX_ITERS })
}

#[derive(Debug, Serialize)]
pub struct NodeReport {
    pub node: NodeId,
    pub label: Label,
    #[serde(with = "ext_float")]
    pub unary: f64,
    #[serde(with = "ext_float")]
    pub pairwise: f64,
    #[serde(with = "ext_float")]
    pub total: f64,
}

#[derive(Debug, Serialize)]
pub struct MatchReport {
    pub arg_id: String,
    pub exact: bool,
    #[serde(with = "ext_float")]
    pub energy: f64,
    #[serde(with = "ext_float")]
    pub detection_score: f64,
    pub nodes: Vec<NodeReport>,
}

pub fn cmd_match(pattern: &Path, arg: &Path, config: Option<&Path>) -> Result<MatchReport> {
    let cfg = load_config_or_default(config)?;
    let pattern = load_pattern::<f64>(pattern)?;
    let arg = load_arg::<f64>(arg)?;
    let result = match_one(&pattern, &arg, &cfg)?;
    let nodes = pattern
        .node_ids()
        .map(|s| {
            let e = node_energy(&pattern, s, &arg, &result.assignment)?;
            Ok(NodeReport {
                node: s,
                label: result.assignment.get(s)?,
                unary: e.unary,
                pairwise: e.pairwise,
                total: e.total,
            })
        })
        .collect::<Result<_>>()?;
    Ok(MatchReport {
        arg_id: arg.id().to_string(),
        exact: result.exact,
        energy: result.energy,
        detection_score: detection_score(&pattern, &arg, &result.assignment, cfg.zeta)?,
        nodes,
    })
}

pub fn cmd_eval(pattern: &Path, pos: &Path, neg: &Path, config: Option<&Path>) -> Result<MetricsRow> {
    let started = Instant::now();
    let cfg = load_config_or_default(config)?;
    let pattern = load_pattern::<f64>(pattern)?;
    let pos = load_arg_dir::<f64>(pos)?;
    let neg = load_arg_dir::<f64>(neg)?;
    let metrics = evaluate(&pattern, &pos.iter().collect::<Vec<_>>(), &neg.iter().collect::<Vec<_>>(), &cfg)?;
    Ok(MetricsRow::new(&cfg, &metrics, started.elapsed().as_secs_f64()))
}

pub fn metrics_csv(rows: &[MetricsRow]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for row in rows {
        w.serialize(row).map_err(|e| Error::Value(e.to_string()))?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Value(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

/// Mines and evaluates every `(tau, d)` grid point, `tau` varying slowest. Rows keep
/// grid order regardless of `--jobs`.
pub fn cmd_sweep(args: &SweepArgs) -> Result<Vec<MetricsRow>> {
    if args.jobs == 0 {
        return Err(Error::Parameter("--jobs must be >= 1".into()));
    }
    let base = load_config_or_default(args.config.as_deref())?;
    let pos = load_arg_dir::<f64>(&args.pos)?;
    let neg = load_arg_dir::<f64>(&args.neg)?;
    let init = load_pattern::<f64>(&args.init)?;
    let pos_test = load_arg_dir::<f64>(&args.pos_test)?;
    let neg_test = load_arg_dir::<f64>(&args.neg_test)?;
    let pos_test: Vec<&Arg<f64>> = pos_test.iter().collect();
    let neg_test: Vec<&Arg<f64>> = neg_test.iter().collect();

    let mut grid = Vec::new();
    for &tau in &args.tau {
        for &d in &args.d {
            let cfg = MiningConfig { tau, d, ..base.clone() };
            cfg.validate()?;
            grid.push(cfg);
        }
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(args.jobs)
        .build()
        .map_err(|e| Error::Parameter(e.to_string()))?;
    let rows: Vec<MetricsRow> = pool.install(|| {
        grid.par_iter()
            .map(|cfg| {
                let started = Instant::now();
                let outcome = mine(&init, &pos, &neg, cfg)?;
                let metrics = evaluate(&outcome.pattern, &pos_test, &neg_test, cfg)?;
                Ok(MetricsRow::new(cfg, &metrics, started.elapsed().as_secs_f64()))
            })
            .collect::<Result<_>>()
    })?;
    let table = metrics_csv(&rows)?;
    fs::write(&args.out, table).map_err(|e| Error::io(&args.out, e))?;
    Ok(rows)
}
