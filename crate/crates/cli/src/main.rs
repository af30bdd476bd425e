//! `sandpile`: JSON-first command line over `sandpile-core`.
//!
//! Exit codes: 0 success, 1 input error, 2 resource or bounds limit,
//! 3 invariant violation.

mod commands;
mod render;

use std::io::Write;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};

use crate::commands::Failure;

#[derive(Parser, Debug)]
#[command(
    name = "sandpile",
    version,
    about = "Stochastic sandpile model on multigraphs"
)]
struct Cli {
    /// Print a human-readable rendering instead of JSON.
    #[arg(long, global = true)]
    human: bool,
    /// Largest edge count for orientation enumeration.
    #[arg(long, global = true, default_value_t = 24)]
    enum_max_edges: usize,
    /// Largest state space a configuration walk may visit.
    #[arg(long, global = true, default_value_t = 1 << 24)]
    enum_max_states: u128,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Check a graph file and summarise it.
    Validate { graph: String },
    /// List or count recurrent configurations.
    Recurrent(RecurrentArgs),
    /// Test one configuration for recurrence.
    Member(MemberArgs),
    /// Lacking polynomial.
    Poly(PolyArgs),
    /// Run the stochastic sandpile Markov chain.
    Simulate(SimulateArgs),
    /// Run the invariant suite on a graph or on seeded random graphs.
    Verify(VerifyArgs),
    /// Number of spanning trees.
    CountTrees { graph: String },
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Model {
    Det,
    Sto,
}

#[derive(Args, Debug)]
pub struct RecurrentArgs {
    pub graph: String,
    #[arg(long, value_enum, default_value = "sto")]
    pub model: Model,
    /// Print the sorted configurations (default).
    #[arg(long, conflicts_with = "count")]
    pub list: bool,
    /// Print only the number of configurations.
    #[arg(long)]
    pub count: bool,
}

#[derive(Args, Debug)]
pub struct MemberArgs {
    pub graph: String,
    /// Comma-separated grain counts in non-sink label order.
    #[arg(long)]
    pub config: String,
    #[arg(long, value_enum, default_value = "sto")]
    pub model: Model,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum PolyMethod {
    Recurrence,
    Enumerate,
    Both,
}

#[derive(Args, Debug)]
pub struct PolyArgs {
    pub graph: String,
    #[arg(long, value_enum, default_value = "both")]
    pub method: PolyMethod,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum Policy {
    Fifo,
    RandomEligible,
}

#[derive(Args, Debug)]
pub struct SimulateArgs {
    pub graph: String,
    /// Probability that each edge copy carries a grain in a toppling.
    #[arg(long)]
    pub p: f64,
    /// Recorded steps after burn-in.
    #[arg(long)]
    pub steps: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// `uniform`, or comma-separated positive weights in non-sink label order.
    #[arg(long, default_value = "uniform")]
    pub mu: String,
    #[arg(long, default_value_t = 0)]
    pub burnin: u64,
    #[arg(long, value_enum, default_value = "fifo")]
    pub policy: Policy,
    /// Starting configuration; defaults to the maximal stable one.
    #[arg(long)]
    pub start: Option<String>,
}

#[derive(Args, Debug)]
pub struct VerifyArgs {
    #[arg(required_unless_present = "random", conflicts_with = "random")]
    pub graph: Option<String>,
    /// Number of seeded random graphs to check.
    #[arg(long)]
    pub random: Option<usize>,
    #[arg(long, default_value_t = 7)]
    pub max_edges: usize,
    #[arg(long, default_value_t = 5)]
    pub max_vertices: usize,
    #[arg(long, default_value_t = 3)]
    pub max_multiplicity: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, hide = true)]
    pub corrupt_oracle: bool,
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Validate { .. } => "validate",
            Command::Recurrent(_) => "recurrent",
            Command::Member(_) => "member",
            Command::Poly(_) => "poly",
            Command::Simulate(_) => "simulate",
            Command::Verify(_) => "verify",
            Command::CountTrees { .. } => "count-trees",
        }
    }
}

#[derive(Serialize)]
struct Report {
    command: &'static str,
    input_digest: Option<String>,
    params: Value,
    result: Value,
    timing_ms: f64,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let ctx = commands::Context {
        limits: sandpile_core::Limits {
            max_edges: cli.enum_max_edges,
            max_states: cli.enum_max_states,
        },
    };
    let name = cli.command.name();
    let started = Instant::now();
    let outcome = match &cli.command {
        Command::Validate { graph } => commands::validate(&ctx, graph),
        Command::Recurrent(a) => commands::recurrent(&ctx, a),
        Command::Member(a) => commands::member(&ctx, a),
        Command::Poly(a) => commands::poly(&ctx, a),
        Command::Simulate(a) => commands::simulate(&ctx, a),
        Command::Verify(a) => commands::verify(&ctx, a),
        Command::CountTrees { graph } => commands::count_trees(&ctx, graph),
    };
    let timing_ms = started.elapsed().as_secs_f64() * 1e3;

    let (body, code) = match outcome {
        Ok(out) => {
            let code = match &out.violation {
                Some(msg) => {
                    eprintln!("sandpile {name}: invariant violation: {msg}");
                    3
                }
                None => 0,
            };
            let report = Report {
                command: name,
                input_digest: out.digest,
                params: out.params,
                result: out.result,
                timing_ms,
            };
            (
                serde_json::to_value(report).expect("reports serialise"),
                code,
            )
        }
        Err(failure) => {
            let code = failure.exit_code();
            eprintln!("sandpile {name}: {}", failure.message());
            let body = json!({
                "command": name,
                "error": { "kind": failure.kind(), "message": failure.message() },
                "exit_code": code,
            });
            (body, code)
        }
    };
    let text = if cli.human {
        render::human(&body)
    } else {
        serde_json::to_string_pretty(&body).expect("reports serialise") + "\n"
    };
    // A closed pipe downstream is not an error worth reporting.
    let _ = std::io::stdout().lock().write_all(text.as_bytes());
    ExitCode::from(code)
}

impl Failure {
    fn exit_code(&self) -> u8 {
        match self {
            Failure::Input { .. } => 1,
            Failure::Core(e) if e.is_resource_limit() => 2,
            Failure::Core(sandpile_core::Error::IrreducibleComponent) => 3,
            Failure::Core(_) => 1,
        }
    }
}
