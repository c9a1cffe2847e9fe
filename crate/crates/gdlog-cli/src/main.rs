//! `gdlog`: check, sample, query and estimate over generative Datalog
//! programs and probabilistic tables.
//!
//! Every subcommand is deterministic given identical flags and input files.
//! Randomized subcommands take `--seed` and default to a fixed constant
//! rather than wall-clock entropy, so an unseeded rerun reproduces its output
//! byte for byte.
//!
//! Exit codes are a stable contract: 0 success, 1 validation error (bad
//! program, schema, query, event or data content), 2 I/O error, 3 estimation
//! impossible (every sampled world was censored or failed, or a deterministic
//! run exceeded its budget).

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value as Json};

use gdlog::io::{instance_to_json, load_edb, load_schema, load_table, IoError};
use gdlog::{
    estimate_event, estimate_group_moments, eval_query, parse_event, parse_program, parse_query,
    run_chase_traced, run_deterministic_datalog, sample_world, validate_program, DatalogError,
    Estimate, EventEstimate, Instance, McError, MomentsReport, Policy, Program, Query, RelationKind,
    Schema, TraceRecord, WorldSource, WorldStatus,
};
use gdlog::query::QueryPlan;

const FORMAT_VERSION: u64 = 1;
const DEFAULT_SEED: u64 = 1;

#[derive(Parser)]
#[command(name = "gdlog", version, about = "Generative Datalog sampler and Monte Carlo estimator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse and validate a program against a schema.
    Check(CheckArgs),
    /// Sample possible worlds and write them as JSON lines.
    Sample(SampleArgs),
    /// Estimate an event probability or per-group aggregate moments.
    Estimate(EstimateArgs),
    /// Evaluate a query against one concrete instance.
    Query(QueryArgs),
    /// Run a deterministic program to fixpoint.
    Datalog(DatalogArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum PolicyName {
    First,
    Last,
    Shuffled,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Text,
}

#[derive(Args)]
struct CheckArgs {
    /// Schema JSON file.
    #[arg(long)]
    schema: PathBuf,
    /// Program file.
    #[arg(long)]
    program: PathBuf,
    #[arg(long, value_enum, default_value_t = Format::Text)]
    format: Format,
}

#[derive(Args)]
struct SourceArgs {
    /// Schema JSON file.
    #[arg(long)]
    schema: PathBuf,
    /// Program file; alone or with --table for a generative source.
    #[arg(long)]
    program: Option<PathBuf>,
    /// Extensional facts (JSON file, CSV file, or directory of CSVs).
    #[arg(long)]
    edb: Option<PathBuf>,
    /// Probabilistic table JSON file.
    #[arg(long)]
    table: Option<PathBuf>,
    /// Firing budget per world before a world counts as censored.
    #[arg(long, default_value_t = 1_000_000)]
    budget: u64,
    /// Chase scheduling policy; any choice yields the same worlds.
    #[arg(long, value_enum, default_value_t = PolicyName::First)]
    policy: PolicyName,
}

#[derive(Args)]
struct SampleArgs {
    #[command(flatten)]
    source: SourceArgs,
    /// Number of worlds.
    #[arg(long, default_value_t = 10)]
    samples: u64,
    /// Global seed for all randomness.
    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,
    /// Write chase trace records to stderr as JSON lines.
    #[arg(long)]
    trace: bool,
    /// Output path; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
}

#[derive(Args)]
struct EstimateArgs {
    #[command(flatten)]
    source: SourceArgs,
    /// Query file; the per-world view to estimate over.
    #[arg(long)]
    query: Option<PathBuf>,
    /// Event file; its presence selects event-probability mode.
    #[arg(long)]
    event: Option<PathBuf>,
    /// Number of worlds.
    #[arg(long, default_value_t = 10_000)]
    samples: u64,
    /// Global seed for all randomness.
    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,
    /// Confidence level for all intervals.
    #[arg(long, default_value_t = 0.95)]
    confidence: f64,
    /// Output path; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
}

#[derive(Args)]
struct QueryArgs {
    /// Schema JSON file.
    #[arg(long)]
    schema: PathBuf,
    /// Instance to query (JSON file, CSV file, or directory of CSVs).
    #[arg(long)]
    edb: PathBuf,
    /// Query file.
    #[arg(long)]
    query: PathBuf,
    /// Output path; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
}

#[derive(Args)]
struct DatalogArgs {
    /// Schema JSON file.
    #[arg(long)]
    schema: PathBuf,
    /// Program file; must contain no distribution terms.
    #[arg(long)]
    program: PathBuf,
    /// Extensional facts (JSON file, CSV file, or directory of CSVs).
    #[arg(long)]
    edb: PathBuf,
    /// Firing budget before the run aborts as censored.
    #[arg(long, default_value_t = 1_000_000)]
    budget: u64,
    /// Output path; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
}

enum CliError {
    Validation(String),
    Io(String),
    Estimation(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Validation(_) => 1,
            CliError::Io(_) => 2,
            CliError::Estimation(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Validation(m) | CliError::Io(m) | CliError::Estimation(m) => m,
        }
    }
}

fn validation(e: impl std::fmt::Display) -> CliError {
    CliError::Validation(e.to_string())
}

fn from_io(e: IoError) -> CliError {
    match e {
        IoError::Read { .. } => CliError::Io(e.to_string()),
        other => CliError::Validation(other.to_string()),
    }
}

fn from_mc(e: McError) -> CliError {
    match e {
        McError::AllWorldsCensored { .. } | McError::TooFewEffectiveWorlds { .. } => {
            CliError::Estimation(e.to_string())
        }
        other => CliError::Validation(other.to_string()),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Check(args) => cmd_check(args),
        Command::Sample(args) => cmd_sample(args),
        Command::Estimate(args) => cmd_estimate(args),
        Command::Query(args) => cmd_query(args),
        Command::Datalog(args) => cmd_datalog(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message());
            ExitCode::from(e.code())
        }
    }
}

fn read_text(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path)
        .map_err(|e| CliError::Io(format!("cannot read {}: {e}", path.display())))
}

fn load_program(schema: &Schema, path: &Path) -> Result<Program, CliError> {
    let text = read_text(path)?;
    let raw = parse_program(&text)
        .map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))?;
    validate_program(&raw, schema)
        .map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))
}

fn write_output(out: &Option<PathBuf>, content: &str) -> Result<(), CliError> {
    match out {
        Some(path) => fs::write(path, content)
            .map_err(|e| CliError::Io(format!("cannot write {}: {e}", path.display()))),
        None => {
            print!("{content}");
            std::io::stdout()
                .flush()
                .map_err(|e| CliError::Io(format!("cannot write stdout: {e}")))
        }
    }
}

fn plural(n: u64, noun: &str) -> String {
    if n == 1 {
        format!("{n} {noun}")
    } else {
        format!("{n} {noun}s")
    }
}

fn cmd_check(args: CheckArgs) -> Result<(), CliError> {
    let schema = load_schema(&args.schema).map_err(from_io)?;
    let program = load_program(&schema, &args.program)?;
    let extensional = schema
        .relations
        .iter()
        .filter(|r| r.kind == RelationKind::Extensional)
        .count();
    let intensional = schema.relations.len() - extensional;
    match args.format {
        Format::Json => {
            let report = json!({
                "format_version": FORMAT_VERSION,
                "relations": schema.relations.len(),
                "extensional": extensional,
                "intensional": intensional,
                "rule_occurrences": program.occurrences.len(),
                "distribution_sites": program.dist_site_count(),
                "deterministic": program.is_deterministic(),
            });
            println!("{report}");
        }
        Format::Text => {
            println!(
                "schema: {} ({extensional} extensional, {intensional} intensional)",
                plural(schema.relations.len() as u64, "relation")
            );
            println!(
                "program: {}, {}{}",
                plural(program.occurrences.len() as u64, "rule occurrence"),
                plural(program.dist_site_count(), "distribution site"),
                if program.is_deterministic() { " (deterministic)" } else { "" }
            );
        }
    }
    Ok(())
}

fn build_source(args: &SourceArgs) -> Result<WorldSource, CliError> {
    let schema = load_schema(&args.schema).map_err(from_io)?;
    let policy = match args.policy {
        PolicyName::First => Policy::First,
        PolicyName::Last => Policy::Last,
        PolicyName::Shuffled => Policy::Shuffled(DEFAULT_SEED),
    };
    match (&args.program, &args.table) {
        (Some(program_path), Some(table_path)) => {
            if args.edb.is_some() {
                return Err(CliError::Validation(
                    "--edb cannot be combined with --table; put certain rows in the table".into(),
                ));
            }
            let program = load_program(&schema, program_path)?;
            let table = load_table(table_path).map_err(from_io)?;
            WorldSource::composed(program, table, args.budget, policy).map_err(validation)
        }
        (Some(program_path), None) => {
            let program = load_program(&schema, program_path)?;
            let edb = match &args.edb {
                Some(path) => load_edb(path, &schema).map_err(from_io)?,
                None => Instance::bag(),
            };
            Ok(WorldSource::generative(program, edb, args.budget, policy))
        }
        (None, Some(table_path)) => {
            let table = load_table(table_path).map_err(from_io)?;
            WorldSource::table(schema, table).map_err(validation)
        }
        (None, None) => Err(CliError::Validation(
            "a world source needs --program, --table, or both".into(),
        )),
    }
}

fn world_facts_json(source: &WorldSource, instance: &Instance) -> Json {
    instance_to_json(instance, &source.schema)
}

fn cmd_sample(args: SampleArgs) -> Result<(), CliError> {
    let source = build_source(&args.source)?;
    let mut lines = String::new();
    for world_index in 0..args.samples {
        let result = match (&source.kind, args.trace) {
            (gdlog::SourceKind::Generative { program, edb }, true) => {
                let mut emit = |r: TraceRecord| {
                    let line = json!({
                        "world": r.world,
                        "step": r.step,
                        "occurrence": r.occurrence,
                        "signature": r.signature_hex,
                        "fact": r.fact.to_string(),
                        "new": r.new,
                    });
                    eprintln!("{line}");
                };
                run_chase_traced(
                    program,
                    edb,
                    args.seed,
                    world_index,
                    source.budget,
                    source.policy,
                    Some(&mut emit),
                )
                .map_err(validation)?
            }
            _ => sample_world(&source, args.seed, world_index).map_err(from_mc)?,
        };
        let line = match &result.status {
            WorldStatus::Failed(e) => json!({
                "world": world_index,
                "status": result.status.as_str(),
                "error": e.to_string(),
                "firings": result.firings,
                "facts": world_facts_json(&source, &result.instance),
            }),
            _ => json!({
                "world": world_index,
                "status": result.status.as_str(),
                "firings": result.firings,
                "facts": world_facts_json(&source, &result.instance),
            }),
        };
        match args.format {
            Format::Json => {
                lines.push_str(&line.to_string());
                lines.push('\n');
            }
            Format::Text => {
                let mut facts: Vec<String> =
                    result.instance.support().map(|f| f.to_string()).collect();
                facts.sort();
                lines.push_str(&format!(
                    "world {world_index} [{}] {}\n",
                    result.status.as_str(),
                    facts.join(" ")
                ));
            }
        }
    }
    write_output(&args.out, &lines)
}

fn estimate_json(e: &Estimate) -> Json {
    json!({
        "point": e.point,
        "ci_low": e.ci_low,
        "ci_high": e.ci_high,
    })
}

fn event_report(est: &EventEstimate, seed: u64, confidence: f64) -> Json {
    json!({
        "format_version": FORMAT_VERSION,
        "kind": "event",
        "seed": seed,
        "n": est.n,
        "n_effective": est.conditional.n_effective,
        "censored_fraction": est.conditional.censored_fraction,
        "failed_fraction": est.conditional.failed_fraction,
        "confidence": confidence,
        "point": est.conditional.point,
        "ci_low": est.conditional.ci_low,
        "ci_high": est.conditional.ci_high,
        "bounds": {
            "pessimistic": estimate_json(&est.pessimistic),
            "optimistic": estimate_json(&est.optimistic),
        },
    })
}

fn moments_report(rep: &MomentsReport, value_attr: &str, group_attrs: &[String], seed: u64, confidence: f64) -> Json {
    let groups: Vec<Json> = rep
        .groups
        .iter()
        .map(|g| {
            let key: serde_json::Map<String, Json> = group_attrs
                .iter()
                .zip(&g.group)
                .map(|(name, v)| (name.clone(), serde_json::to_value(v).unwrap()))
                .collect();
            json!({
                "group": key,
                "count": g.count,
                "mean": estimate_json(&g.mean),
                "variance": estimate_json(&g.variance),
            })
        })
        .collect();
    json!({
        "format_version": FORMAT_VERSION,
        "kind": "moments",
        "seed": seed,
        "n": rep.n,
        "n_effective": rep.n_effective,
        "censored_fraction": rep.censored_fraction,
        "failed_fraction": rep.failed_fraction,
        "confidence": confidence,
        "value_attribute": value_attr,
        "groups": groups,
    })
}

fn censored_report(e: &McError, n: u64, seed: u64) -> Option<Json> {
    match e {
        McError::AllWorldsCensored { censored, failed, .. } => Some(json!({
            "format_version": FORMAT_VERSION,
            "kind": "censored",
            "seed": seed,
            "n": n,
            "n_effective": 0,
            "censored_fraction": *censored as f64 / n as f64,
            "failed_fraction": *failed as f64 / n as f64,
        })),
        McError::TooFewEffectiveWorlds { n_effective, .. } => Some(json!({
            "format_version": FORMAT_VERSION,
            "kind": "censored",
            "seed": seed,
            "n": n,
            "n_effective": n_effective,
        })),
        _ => None,
    }
}

fn aggregate_value_attr(query: &Query) -> Option<String> {
    match &query.plan {
        QueryPlan::GroupAggregate { agg: Some(_), .. } => {
            query.output.attrs.last().map(|a| a.name.clone())
        }
        _ => None,
    }
}

fn render_estimate_text(report: &Json) -> String {
    let mut out = String::new();
    let kind = report["kind"].as_str().unwrap_or("?");
    match kind {
        "event" => {
            out.push_str(&format!(
                "P(event) = {} (CI [{}, {}], n_effective {})\n",
                report["point"], report["ci_low"], report["ci_high"], report["n_effective"]
            ));
            out.push_str(&format!(
                "bounds: pessimistic {} optimistic {}\n",
                report["bounds"]["pessimistic"]["point"], report["bounds"]["optimistic"]["point"]
            ));
            out.push_str(&format!(
                "censored {} failed {}\n",
                report["censored_fraction"], report["failed_fraction"]
            ));
        }
        "moments" => {
            for g in report["groups"].as_array().into_iter().flatten() {
                out.push_str(&format!(
                    "group {}: mean {} (CI [{}, {}]), variance {} (CI [{}, {}]), count {}\n",
                    g["group"],
                    g["mean"]["point"],
                    g["mean"]["ci_low"],
                    g["mean"]["ci_high"],
                    g["variance"]["point"],
                    g["variance"]["ci_low"],
                    g["variance"]["ci_high"],
                    g["count"]
                ));
            }
            out.push_str(&format!(
                "n_effective {} censored {} failed {}\n",
                report["n_effective"], report["censored_fraction"], report["failed_fraction"]
            ));
        }
        _ => out.push_str(&report.to_string()),
    }
    out
}

fn cmd_estimate(args: EstimateArgs) -> Result<(), CliError> {
    if args.samples < 1 {
        return Err(CliError::Validation("--samples must be at least 1".into()));
    }
    if !(args.confidence > 0.0 && args.confidence < 1.0) {
        return Err(CliError::Validation("--confidence must lie strictly between 0 and 1".into()));
    }
    let source = build_source(&args.source)?;
    let view = match &args.query {
        Some(path) => {
            let text = read_text(path)?;
            Some(parse_query(&text, &source.schema).map_err(validation)?)
        }
        None => None,
    };

    let report = if let Some(event_path) = &args.event {
        let text = read_text(event_path)?;
        let event_schema = match &view {
            Some(q) => q.output_schema(),
            None => source.schema.clone(),
        };
        let event = parse_event(&text, &event_schema).map_err(validation)?;
        match estimate_event(&source, view.as_ref(), &event, args.samples, args.seed, args.confidence)
        {
            Ok(est) => event_report(&est, args.seed, args.confidence),
            Err(e) => {
                if let Some(report) = censored_report(&e, args.samples, args.seed) {
                    let content = format!("{}\n", serde_json::to_string_pretty(&report).unwrap());
                    write_output(&args.out, &content)?;
                }
                return Err(from_mc(e));
            }
        }
    } else {
        let view = view.ok_or_else(|| {
            CliError::Validation("estimate needs --event, or --query with an aggregate".into())
        })?;
        let value_attr = aggregate_value_attr(&view).ok_or_else(|| {
            CliError::Validation(
                "estimate without --event needs an aggregate query (AVG, SUM, COUNT, MIN or MAX)"
                    .into(),
            )
        })?;
        let group_attrs: Vec<String> = view.output.attrs[..view.output.attrs.len() - 1]
            .iter()
            .map(|a| a.name.clone())
            .collect();
        match estimate_group_moments(
            &source,
            &view,
            &value_attr,
            args.samples,
            args.seed,
            args.confidence,
        ) {
            Ok(rep) => moments_report(&rep, &value_attr, &group_attrs, args.seed, args.confidence),
            Err(e) => {
                if let Some(report) = censored_report(&e, args.samples, args.seed) {
                    let content = format!("{}\n", serde_json::to_string_pretty(&report).unwrap());
                    write_output(&args.out, &content)?;
                }
                return Err(from_mc(e));
            }
        }
    };

    let content = match args.format {
        Format::Json => format!("{}\n", serde_json::to_string_pretty(&report).unwrap()),
        Format::Text => render_estimate_text(&report),
    };
    write_output(&args.out, &content)
}

fn render_instance(instance: &Instance, schema: &Schema, format: Format) -> String {
    match format {
        Format::Json => {
            format!("{}\n", serde_json::to_string_pretty(&instance_to_json(instance, schema)).unwrap())
        }
        Format::Text => {
            let mut facts: Vec<String> = Vec::new();
            for fact in instance.support() {
                let count = instance.count_of(fact);
                for _ in 0..count {
                    facts.push(fact.to_string());
                }
            }
            facts.sort();
            let mut out = facts.join("\n");
            if !out.is_empty() {
                out.push('\n');
            }
            out
        }
    }
}

fn cmd_query(args: QueryArgs) -> Result<(), CliError> {
    let schema = load_schema(&args.schema).map_err(from_io)?;
    let instance = load_edb(&args.edb, &schema).map_err(from_io)?;
    let text = read_text(&args.query)?;
    let query = parse_query(&text, &schema).map_err(validation)?;
    let result = eval_query(&query, &instance).map_err(validation)?;
    let out_schema = query.output_schema();
    write_output(&args.out, &render_instance(&result, &out_schema, args.format))
}

fn cmd_datalog(args: DatalogArgs) -> Result<(), CliError> {
    let schema = load_schema(&args.schema).map_err(from_io)?;
    let program = load_program(&schema, &args.program)?;
    let edb = load_edb(&args.edb, &schema).map_err(from_io)?;
    let result = run_deterministic_datalog(&program, &edb, args.budget).map_err(|e| match e {
        DatalogError::Censored { .. } => CliError::Estimation(e.to_string()),
        other => CliError::Validation(other.to_string()),
    })?;
    write_output(&args.out, &render_instance(&result, &schema, args.format))
}
