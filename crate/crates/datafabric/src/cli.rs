//! Command-line front end. Three subcommands: `run` executes a request
//! script against a freshly built fabric, `evolve` gossips digests and
//! emits the relation graph, `check` parses and compiles a script without
//! touching any data.
//!
//! Exit codes: 0 success, 1 for configuration, file, parse, or compile
//! faults (diagnostic on standard error, positioned as `file:line:col:`
//! for script faults), 2 for protocol violations inside the simulation.

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use std::fs;
use std::io::{self, BufWriter};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::dpu::{Evolution, RelationEdge, Registry};
use crate::fabric::{
    build_fabric, load_dataset, place_records, ExtractionPolicy, Fabric, PlacementPolicy,
    Topology,
};
use crate::lang::{parse_program, Compiler};
use crate::noc::trace::write_trace;
use crate::noc::RoutingPolicy;
use crate::orchestrator::{run_script, RunError};

#[derive(Parser)]
#[command(name = "datafabric", version, about = "Mesh-of-DPUs data fabric simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build a fabric from a dataset and execute a request script
    Run(SharedArgs),
    /// Gossip knowledge digests for some epochs and emit the relation graph
    Evolve(SharedArgs),
    /// Parse and compile a script, printing one summary line per request
    Check(CheckArgs),
}

#[derive(Args)]
struct SharedArgs {
    /// Mesh extents, e.g. 4x4 or 2x2x2
    #[arg(long)]
    topology: Option<String>,
    /// round-robin, keyword-hash, or affinity
    #[arg(long)]
    placement: Option<String>,
    /// walk, flood, or multicast
    #[arg(long)]
    routing: Option<String>,
    /// tags, or tags+text
    #[arg(long)]
    extraction: Option<String>,
    /// Dataset as JSON Lines, one record per line
    #[arg(long)]
    dataset: Option<PathBuf>,
    /// Request script (.atm)
    #[arg(long)]
    script: Option<PathBuf>,
    /// Where to write the trace (JSON Lines); omitted = no trace file
    #[arg(long)]
    trace: Option<PathBuf>,
    /// Where to write the report; omitted = standard output
    #[arg(long)]
    metrics: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Jaccard threshold for relation formation, in (0, 1]
    #[arg(long)]
    theta: Option<f64>,
    /// Gossip epochs to run; defaults to the mesh diameter
    #[arg(long)]
    epochs: Option<u32>,
    /// JSON file with the same keys as the flags; explicit flags win
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct CheckArgs {
    /// Request script to check
    script: PathBuf,
}

/// File form of the configuration, all keys optional.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    topology: Option<String>,
    placement: Option<String>,
    routing: Option<String>,
    extraction: Option<String>,
    dataset: Option<PathBuf>,
    script: Option<PathBuf>,
    trace: Option<PathBuf>,
    metrics: Option<PathBuf>,
    seed: Option<u64>,
    theta: Option<f64>,
    epochs: Option<u32>,
}

/// Fully resolved configuration: flags over config file over defaults.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub topology: Topology,
    pub placement: PlacementPolicy,
    pub routing: RoutingPolicy,
    pub extraction: ExtractionPolicy,
    pub dataset: Option<PathBuf>,
    pub script: Option<PathBuf>,
    pub trace: Option<PathBuf>,
    pub metrics: Option<PathBuf>,
    pub seed: u64,
    pub theta: f64,
    pub epochs: Option<u32>,
}

struct Failure {
    code: i32,
    message: String,
}

fn fault(message: impl Into<String>) -> Failure {
    Failure { code: 1, message: message.into() }
}

fn read_file(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| {
        let reason = match e.kind() {
            io::ErrorKind::NotFound => "file not found".to_string(),
            _ => e.to_string(),
        };
        fault(format!("{}: {reason}", path.display()))
    })
}

fn parse_flag<T: FromStr>(name: &str, value: &str) -> Result<T, Failure>
where
    T::Err: std::fmt::Display,
{
    value.parse().map_err(|e| fault(format!("--{name}: {e}")))
}

impl RunConfig {
    fn resolve(args: &SharedArgs) -> Result<Self, Failure> {
        let file = match &args.config {
            Some(path) => {
                let text = read_file(path)?;
                serde_json::from_str::<ConfigFile>(&text)
                    .map_err(|e| fault(format!("{}: {e}", path.display())))?
            }
            None => ConfigFile::default(),
        };
        let pick = |flag: &Option<String>, from_file: Option<String>, fallback: &str| {
            flag.clone().or(from_file).unwrap_or_else(|| fallback.to_string())
        };
        Ok(RunConfig {
            topology: parse_flag("topology", &pick(&args.topology, file.topology, "2x2"))?,
            placement: parse_flag(
                "placement",
                &pick(&args.placement, file.placement, "round-robin"),
            )?,
            routing: parse_flag("routing", &pick(&args.routing, file.routing, "walk"))?,
            extraction: parse_flag(
                "extraction",
                &pick(&args.extraction, file.extraction, "tags"),
            )?,
            dataset: args.dataset.clone().or(file.dataset),
            script: args.script.clone().or(file.script),
            trace: args.trace.clone().or(file.trace),
            metrics: args.metrics.clone().or(file.metrics),
            seed: args.seed.or(file.seed).unwrap_or(0),
            theta: args.theta.or(file.theta).unwrap_or(0.25),
            epochs: args.epochs.or(file.epochs),
        })
    }
}

fn build_placed_fabric(config: &RunConfig) -> Result<Fabric, Failure> {
    let dataset = config
        .dataset
        .as_deref()
        .ok_or_else(|| fault("no dataset given (--dataset or config file)"))?;
    let text = read_file(dataset)?;
    let records = load_dataset(text.as_bytes(), config.extraction)
        .map_err(|e| fault(format!("{}: {e}", dataset.display())))?;
    let mut fabric = build_fabric(config.topology.clone(), config.seed)
        .map_err(|e| fault(e.to_string()))?;
    place_records(&mut fabric, &records, config.placement)
        .map_err(|e| fault(e.to_string()))?;
    Ok(fabric)
}

fn write_output(path: Option<&Path>, content: &str) -> Result<(), Failure> {
    match path {
        Some(path) => fs::write(path, content)
            .map_err(|e| fault(format!("{}: {e}", path.display()))),
        None => {
            print!("{content}");
            Ok(())
        }
    }
}

fn cmd_run(args: &SharedArgs) -> Result<(), Failure> {
    let config = RunConfig::resolve(args)?;
    let mut fabric = build_placed_fabric(&config)?;
    let script_path = config
        .script
        .as_deref()
        .ok_or_else(|| fault("no script given (--script or config file)"))?;
    let script_text = read_file(script_path)?;
    let run = run_script(&mut fabric, &script_text, config.routing).map_err(|e| match e {
        RunError::Lang(lang) => fault(format!("{}:{lang}", script_path.display())),
        RunError::Protocol(violation) => Failure { code: 2, message: violation.to_string() },
    })?;
    if let Some(trace_path) = config.trace.as_deref() {
        let file = fs::File::create(trace_path)
            .map_err(|e| fault(format!("{}: {e}", trace_path.display())))?;
        write_trace(&run.events, BufWriter::new(file))
            .map_err(|e| fault(format!("{}: {e}", trace_path.display())))?;
    }
    write_output(config.metrics.as_deref(), &run.report.to_json())
}

#[derive(Serialize)]
struct EvolveReport {
    topology: String,
    theta: f64,
    epochs: u32,
    edges: Vec<RelationEdge>,
}

fn cmd_evolve(args: &SharedArgs) -> Result<(), Failure> {
    let config = RunConfig::resolve(args)?;
    let mut fabric = build_placed_fabric(&config)?;
    let mut evolution = Evolution::new(config.theta).map_err(|e| fault(e.to_string()))?;
    let epochs = config.epochs.unwrap_or(fabric.topology().diameter() as u32);
    for _ in 0..epochs {
        evolution.step(&mut fabric);
    }
    let report = EvolveReport {
        topology: fabric.topology().to_string(),
        theta: config.theta,
        epochs,
        edges: evolution.graph().edges(),
    };
    let mut json = serde_json::to_string_pretty(&report).expect("edge list serializes");
    json.push('\n');
    write_output(config.metrics.as_deref(), &json)
}

fn cmd_check(args: &CheckArgs) -> Result<(), Failure> {
    let text = read_file(&args.script)?;
    let asts = parse_program(&text)
        .map_err(|e| fault(format!("{}:{e}", args.script.display())))?;
    let mut compiler = Compiler::new(Registry::standard());
    for ast in &asts {
        let request = compiler
            .compile(ast)
            .map_err(|e| fault(format!("{}:{e}", args.script.display())))?;
        println!(
            "{}: {} [mode {}, {} keyword(s), {} condition(s), {}]",
            request.request_id,
            ast.pretty(),
            ast.mode,
            request.keywords.len(),
            request.conditions.len(),
            request.op,
        );
    }
    println!("{} requests", asts.len());
    Ok(())
}

/// Parses process arguments, dispatches, and returns the exit code.
pub fn run() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let outcome = match &cli.command {
        Command::Run(args) => cmd_run(args),
        Command::Evolve(args) => cmd_evolve(args),
        Command::Check(args) => cmd_check(args),
    };
    match outcome {
        Ok(()) => 0,
        Err(failure) => {
            eprintln!("{}", failure.message);
            failure.code
        }
    }
}
