//! Command-line front end: validate models, run query files, write JSON
//! results and CSV data.
//!
//! Exit codes: 0 success, 1 validation errors, 2 I/O or usage, 3 parse or
//! engine failure, 4 a query missed its expected verdict.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use serde_json::json;

use stasmc::avmodel::{av_source, r16_source, requirements_source, AvConfig};
use stasmc::engine::EngineConfig;
use stasmc::monitors::{compose, WhConstraint};
use stasmc::network::{instantiate, Network};
use stasmc::query::{NamedQuery, PathFormula, Query};
use stasmc::smc::{Checker, SmcResult, StatConfig, Trajectories, Verdict};
use stasmc::{parse_model, parse_query, parse_query_file, validate_model, Model};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INVALID: i32 = 1;
pub const EXIT_IO: i32 = 2;
pub const EXIT_FAILURE: i32 = 3;
pub const EXIT_MISMATCH: i32 = 4;

#[derive(Parser, Debug)]
#[command(name = "stasmc", version, about = "Statistical model checking of stochastic timed automata")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Parse and validate a model file.
    Validate { model: PathBuf },
    /// Run every query of a query file and write results.json.
    Check {
        model: PathBuf,
        queries: PathBuf,
        #[command(flatten)]
        opts: RunArgs,
    },
    /// Run simulate queries, and expected-value queries with --histogram.
    Simulate {
        model: PathBuf,
        /// Query file; its constraints are composed onto the model.
        queries: Option<PathBuf>,
        /// Inline query, repeatable.
        #[arg(long = "query")]
        query: Vec<String>,
        /// Also run expected-value queries and write their histograms.
        #[arg(long)]
        histogram: bool,
        #[command(flatten)]
        opts: RunArgs,
    },
    /// Write the vehicle models and requirement files.
    ExportAv {
        /// TOML file overriding vehicle parameters.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
}

#[derive(Args, Clone, Debug)]
pub struct RunArgs {
    #[arg(long, default_value_t = StatConfig::default().seed)]
    pub seed: u64,
    #[arg(long, default_value_t = StatConfig::default().alpha)]
    pub alpha: f64,
    #[arg(long, default_value_t = StatConfig::default().epsilon)]
    pub epsilon: f64,
    /// Half-width of the indifference region of hypothesis tests.
    #[arg(long, default_value_t = StatConfig::default().delta)]
    pub indifference: f64,
    #[arg(long, default_value_t = StatConfig::default().max_runs)]
    pub max_runs: u64,
    /// Replaces the time bound of every query.
    #[arg(long)]
    pub bound_override: Option<f64>,
    /// Grid spacing of simulate trajectories.
    #[arg(long)]
    pub sample_step: Option<f64>,
    /// Worker threads; 0 uses every core. Results do not depend on it.
    #[arg(long, default_value_t = 0)]
    pub workers: usize,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
}

impl Default for RunArgs {
    fn default() -> Self {
        let s = StatConfig::default();
        RunArgs {
            seed: s.seed,
            alpha: s.alpha,
            epsilon: s.epsilon,
            indifference: s.delta,
            max_runs: s.max_runs,
            bound_override: None,
            sample_step: None,
            workers: 0,
            out: PathBuf::from("out"),
        }
    }
}

impl RunArgs {
    fn stats(&self) -> StatConfig {
        StatConfig {
            alpha: self.alpha,
            epsilon: self.epsilon,
            delta: self.indifference,
            max_runs: self.max_runs,
            seed: self.seed,
        }
    }
}

/// Everything needed to replay a run; embedded in every output file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub model: String,
    /// Query file path, or the inline queries.
    pub queries: Vec<String>,
    pub seed: u64,
    pub alpha: f64,
    pub epsilon: f64,
    pub indifference: f64,
    pub max_runs: u64,
    pub bound_override: Option<f64>,
    pub sample_step: Option<f64>,
    pub out: String,
}

impl RunManifest {
    fn new(command: &str, model: &Path, queries: Vec<String>, o: &RunArgs) -> Self {
        RunManifest {
            command: command.into(),
            model: model.display().to_string(),
            queries,
            seed: o.seed,
            alpha: o.alpha,
            epsilon: o.epsilon,
            indifference: o.indifference,
            max_runs: o.max_runs,
            bound_override: o.bound_override,
            sample_step: o.sample_step,
            out: o.out.display().to_string(),
        }
    }

    fn csv_header(&self) -> String {
        format!("# manifest: {}\n", serde_json::to_string(self).unwrap())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    fn new(code: i32, message: impl Into<String>) -> Self {
        CliError {
            code,
            message: message.into(),
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.message)
    }
}

fn read(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError::new(EXIT_IO, format!("{}: {e}", path.display())))
}

fn write(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text).map_err(|e| CliError::new(EXIT_IO, format!("{}: {e}", path.display())))
}

fn failure(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::new(EXIT_FAILURE, format!("{}: {e}", path.display()))
}

fn load_model(path: &Path) -> Result<Model, CliError> {
    let model = parse_model(&read(path)?).map_err(|e| failure(path, e))?;
    let report = validate_model(&model);
    if !report.is_ok() {
        return Err(CliError::new(EXIT_INVALID, format!("{}:\n{report}", path.display())));
    }
    Ok(model)
}

fn network(model: &Model, constraints: &[WhConstraint], path: &Path) -> Result<Network, CliError> {
    let composed = compose(model, constraints).map_err(|e| failure(path, e))?;
    instantiate(&composed).map_err(|e| failure(path, e))
}

pub fn cmd_validate(model: &Path) -> Result<String, CliError> {
    let m = parse_model(&read(model)?).map_err(|e| failure(model, e))?;
    let report = validate_model(&m);
    let text = format!("{}: {report}", model.display());
    if report.is_ok() {
        Ok(text)
    } else {
        Err(CliError::new(EXIT_INVALID, text))
    }
}

#[derive(Serialize)]
struct ResultsFile<'a> {
    manifest: &'a RunManifest,
    results: &'a [SmcResult],
}

#[derive(Debug)]
pub struct CheckOutcome {
    pub results: Vec<SmcResult>,
    pub exit_code: i32,
    pub table: String,
}

fn table_header() -> String {
    format!(
        "{:<12} {:<22} {:>10} {:>24} {:>8} {:>9}",
        "Req", "Result", "p̂", "CI", "runs", "wall-time"
    )
}

fn table_row(r: &SmcResult) -> String {
    let verdict = match r.verdict {
        Verdict::Valid => "valid",
        Verdict::Invalid => "invalid",
        Verdict::EstimateOnly => "estimate",
        Verdict::Undecided => "undecided",
    };
    let result = match r.matches {
        Some(false) => format!("{verdict} (MISMATCH)"),
        _ => verdict.to_string(),
    };
    let p = r.p_hat.map(|p| format!("{p:.4}")).unwrap_or_else(|| "-".into());
    let ci = r
        .ci
        .map(|(lo, hi)| format!("[{lo:.4}, {hi:.4}]"))
        .unwrap_or_else(|| "-".into());
    format!(
        "{:<12} {:<22} {:>10} {:>24} {:>8} {:>8.1}s",
        r.name,
        result,
        p,
        ci,
        r.runs,
        r.wall_ms as f64 / 1000.0
    )
}

fn prepare(q: &NamedQuery, o: &RunArgs) -> NamedQuery {
    let mut q = q.clone();
    if let Some(b) = o.bound_override {
        q.query = q.query.with_bound(b);
    }
    q
}

fn check_bound(o: &RunArgs) -> Result<(), CliError> {
    match o.bound_override {
        Some(b) if !(b.is_finite() && b > 0.0) => Err(CliError::new(EXIT_IO, "usage: --bound-override must be positive")),
        _ => Ok(()),
    }
}

fn checker<'n>(net: &'n Network, o: &RunArgs) -> Result<Checker<'n>, CliError> {
    Checker::new(net, EngineConfig::default(), o.stats(), o.workers)
        .map_err(|e| CliError::new(EXIT_IO, format!("usage: {e}")))
}

fn mkdir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::new(EXIT_IO, format!("{}: {e}", dir.display())))
}

/// Runs every query and writes `results.json` plus per-query data files.
/// `progress` receives each table line as soon as it is known.
pub fn cmd_check(
    model_path: &Path,
    query_path: &Path,
    o: &RunArgs,
    progress: &mut dyn FnMut(&str),
) -> Result<CheckOutcome, CliError> {
    check_bound(o)?;
    let model = load_model(model_path)?;
    let file = parse_query_file(&read(query_path)?).map_err(|e| failure(query_path, e))?;
    let net = network(&model, &file.constraints, query_path)?;
    let checker = checker(&net, o)?;
    mkdir(&o.out)?;
    let manifest = RunManifest::new("check", model_path, vec![query_path.display().to_string()], o);
    let mut table = table_header();
    progress(&table);
    let mut results = Vec::new();
    for q in &file.queries {
        let q = prepare(q, o);
        let (res, traj) = checker
            .run_query(&q, o.sample_step)
            .map_err(|e| CliError::new(EXIT_FAILURE, format!("{}: {e}", q.name)))?;
        write_extras(&checker, &net, &q, &res, traj.as_ref(), &manifest, &o.out, &format!("{}.", q.name))?;
        let row = table_row(&res);
        progress(&row);
        table.push('\n');
        table.push_str(&row);
        results.push(res);
    }
    let json = serde_json::to_string_pretty(&ResultsFile {
        manifest: &manifest,
        results: &results,
    })
    .unwrap();
    write(&o.out.join("results.json"), &(json + "\n"))?;
    let exit_code = if results.iter().any(|r| r.matches == Some(false)) {
        EXIT_MISMATCH
    } else {
        EXIT_OK
    };
    Ok(CheckOutcome {
        results,
        exit_code,
        table,
    })
}

#[allow(clippy::too_many_arguments)]
fn write_extras(
    checker: &Checker,
    net: &Network,
    q: &NamedQuery,
    res: &SmcResult,
    traj: Option<&Trajectories>,
    manifest: &RunManifest,
    dir: &Path,
    prefix: &str,
) -> Result<(), CliError> {
    if let Some(h) = &res.histogram {
        write(
            &dir.join(format!("{prefix}hist.csv")),
            &(manifest.csv_header() + &h.to_csv()),
        )?;
    }
    if let Some(t) = traj {
        write(
            &dir.join(format!("{prefix}trajectories.csv")),
            &(manifest.csv_header() + &t.to_csv()),
        )?;
    }
    if let (Some(run), Some((formula, bound))) = (res.witness_run, witness_formula(&q.query)) {
        let text = witness_jsonl(checker, net, q, formula, bound, run, manifest)?;
        write(&dir.join(format!("{prefix}witness.jsonl")), &text)?;
    }
    Ok(())
}

fn witness_formula(q: &Query) -> Option<(&PathFormula, f64)> {
    match q {
        Query::Estimate { formula, bound } | Query::Hypothesis { formula, bound, .. } => Some((formula, *bound)),
        _ => None,
    }
}

/// The witness run as JSON lines: manifest, a header, then one line per event.
fn witness_jsonl(
    checker: &Checker,
    net: &Network,
    q: &NamedQuery,
    formula: &PathFormula,
    bound: f64,
    run: u64,
    manifest: &RunManifest,
) -> Result<String, CliError> {
    let watch = formula.state_expr().clone();
    let tr = checker
        .trace(bound, run, std::slice::from_ref(&watch))
        .map_err(|e| CliError::new(EXIT_FAILURE, format!("{}: {e}", q.name)))?;
    let watch_name = watch.to_string();
    let mut out = String::new();
    writeln!(out, "{}", json!({ "manifest": manifest })).unwrap();
    writeln!(
        out,
        "{}",
        json!({ "query": q.name, "formula": formula.to_string(), "run": run })
    )
    .unwrap();
    for e in &tr.events {
        let comp = &net.components[e.component];
        let receivers: Vec<String> = e
            .receivers
            .iter()
            .map(|(c, ed)| format!("{}: {}", net.components[*c].name, net.components[*c].edges[*ed].label))
            .collect();
        let line = json!({
            "t": e.time,
            "comp": comp.name,
            "edge": comp.edges[e.edge].label,
            "channel": e.channel.map(|c| net.channels[c].name.clone()),
            "receivers": receivers,
            "watch": { watch_name.as_str(): e.watch.first() },
        });
        writeln!(out, "{line}").unwrap();
    }
    Ok(out)
}

#[derive(Debug)]
pub struct SimulateOutcome {
    pub results: Vec<SmcResult>,
    pub files: Vec<PathBuf>,
}

/// Runs simulate queries (and expected-value queries when `histogram`).
/// A single inline query writes `trajectories.csv` / `hist.csv`; otherwise
/// file names are prefixed with the query name.
pub fn cmd_simulate(
    model_path: &Path,
    query_path: Option<&Path>,
    inline: &[String],
    histogram: bool,
    o: &RunArgs,
) -> Result<SimulateOutcome, CliError> {
    check_bound(o)?;
    let model = load_model(model_path)?;
    let mut queries = Vec::new();
    let mut constraints = Vec::new();
    let mut sources = Vec::new();
    if let Some(p) = query_path {
        let f = parse_query_file(&read(p)?).map_err(|e| failure(p, e))?;
        queries.extend(f.queries);
        constraints = f.constraints;
        sources.push(p.display().to_string());
    }
    for (i, text) in inline.iter().enumerate() {
        // a bad inline query is a usage error, unlike a bad query file
        let query = parse_query(text).map_err(|e| CliError::new(EXIT_IO, format!("usage: --query {text:?}: {e}")))?;
        queries.push(NamedQuery {
            name: format!("Q{}", i + 1),
            query,
            expected: None,
            span: Default::default(),
        });
        sources.push(text.clone());
    }
    if queries.is_empty() {
        return Err(CliError::new(EXIT_IO, "usage: give a query file or --query"));
    }
    let wanted = |q: &Query| matches!(q, Query::Simulate { .. }) || (histogram && matches!(q, Query::Expected { .. }));
    if !queries.iter().any(|q| wanted(&q.query)) {
        return Err(CliError::new(
            EXIT_IO,
            "usage: no simulate queries (expected-value queries need --histogram)",
        ));
    }
    let net = network(&model, &constraints, query_path.unwrap_or(model_path))?;
    let checker = checker(&net, o)?;
    mkdir(&o.out)?;
    let manifest = RunManifest::new("simulate", model_path, sources, o);
    let bare = query_path.is_none() && queries.len() == 1;
    let mut results = Vec::new();
    let mut files = Vec::new();
    for q in queries.iter().filter(|q| wanted(&q.query)) {
        let q = prepare(q, o);
        let (res, traj) = checker
            .run_query(&q, o.sample_step)
            .map_err(|e| CliError::new(EXIT_FAILURE, format!("{}: {e}", q.name)))?;
        let prefix = if bare { String::new() } else { format!("{}.", q.name) };
        if let Some(t) = &traj {
            let p = o.out.join(format!("{prefix}trajectories.csv"));
            write(&p, &(manifest.csv_header() + &t.to_csv()))?;
            files.push(p);
        }
        if let Some(h) = &res.histogram {
            let p = o.out.join(format!("{prefix}hist.csv"));
            write(&p, &(manifest.csv_header() + &h.to_csv()))?;
            files.push(p);
        }
        results.push(res);
    }
    Ok(SimulateOutcome { results, files })
}

pub fn cmd_export_av(config: Option<&Path>, out: &Path) -> Result<Vec<PathBuf>, CliError> {
    let cfg = match config {
        Some(p) => AvConfig::from_toml(&read(p)?).map_err(|e| CliError::new(EXIT_INVALID, format!("{}: {e}", p.display())))?,
        None => AvConfig::default(),
    };
    mkdir(out)?;
    let unrefined = AvConfig {
        refined: false,
        ..cfg.clone()
    };
    let files = [
        ("av.sta", av_source(&cfg)),
        ("av_unrefined.sta", av_source(&unrefined)),
        ("requirements.q", requirements_source(&cfg)),
        ("r16.q", r16_source()),
    ];
    let mut paths = Vec::new();
    for (name, text) in files {
        let p = out.join(name);
        write(&p, &text)?;
        paths.push(p);
    }
    Ok(paths)
}

/// Runs a parsed command line; returns the process exit code.
pub fn run(cli: Cli) -> i32 {
    let res = match cli.command {
        Command::Validate { model } => cmd_validate(&model).map(|t| {
            println!("{t}");
            EXIT_OK
        }),
        Command::Check { model, queries, opts } => {
            cmd_check(&model, &queries, &opts, &mut |line| println!("{line}")).map(|o| {
                let mismatches: Vec<&str> = o
                    .results
                    .iter()
                    .filter(|r| r.matches == Some(false))
                    .map(|r| r.name.as_str())
                    .collect();
                if !mismatches.is_empty() {
                    eprintln!("mismatch: {}", mismatches.join(", "));
                }
                println!("results written to {}", opts.out.join("results.json").display());
                o.exit_code
            })
        }
        Command::Simulate {
            model,
            queries,
            query,
            histogram,
            opts,
        } => cmd_simulate(&model, queries.as_deref(), &query, histogram, &opts).map(|o| {
            for f in &o.files {
                println!("wrote {}", f.display());
            }
            EXIT_OK
        }),
        Command::ExportAv { config, out } => cmd_export_av(config.as_deref(), &out).map(|files| {
            for f in &files {
                println!("wrote {}", f.display());
            }
            EXIT_OK
        }),
    };
    match res {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.code
        }
    }
}
