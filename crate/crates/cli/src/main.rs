//! `emm`: build question hierarchies, elicit monotone tables, evaluate and
//! compare expert models.
//!
//! Failures print one line, `error[<category>]: <message>`, and exit with
//! 2 (usage / not found), 3 (validation), 4 (conflict), 5 (io) or
//! 6 (oracle).

mod elicit;
mod io;
mod models;
mod spec;

use std::net::{IpAddr, SocketAddr};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use emm_core::elicitation::CompletionPolicy;
use emm_core::hierarchy::EvalPolicy;
use emm_core::persistence::SpecForm;
use emm_core::scheduler::Strategy;
use emm_core::Error;

#[derive(Parser)]
#[command(name = "emm", version, about = "Expert mental models: hierarchy building, monotone elicitation, evaluation")]
struct Cli {
    /// Machine-readable JSON output.
    #[arg(long, global = true)]
    json: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Create, edit and validate spec documents.
    #[command(subcommand)]
    Spec(SpecCommand),
    /// Run an elicitation session for one node.
    Elicit(ElicitArgs),
    /// Evaluate a model on leaf answers.
    Eval(EvalArgs),
    /// Evaluate several experts' models and combine their root values.
    Group(GroupArgs),
    /// Scenarios where two models' tables for a node disagree.
    Diff(DiffArgs),
    /// Render a binary node's table as Hansel-chain bars (SVG).
    Viz(VizArgs),
    /// Security-categorization preset.
    #[command(subcommand)]
    Fisma(FismaCommand),
    /// Start the HTTP API.
    Serve(ServeArgs),
    /// Draft factor lists and hierarchies with an LLM.
    #[command(subcommand)]
    Llm(LlmCommand),
}

#[derive(Subcommand)]
enum SpecCommand {
    /// Start a spec. Prompts for the tree on stdin with --interactive.
    New(spec::NewArgs),
    /// Add a factor under an existing node.
    Add(spec::AddArgs),
    /// Bind an aggregation rule to an internal node.
    Bind(spec::BindArgs),
    /// Freeze a fully bound spec into an expert model.
    Freeze(spec::FreezeArgs),
    /// Report structural problems and unresolved nodes.
    Validate(spec::ValidateArgs),
}

#[derive(Args)]
struct ElicitArgs {
    #[arg(long)]
    spec: PathBuf,
    #[arg(long)]
    node: String,
    #[arg(long)]
    expert: String,
    /// `scripted:<file>` (JSON table or {"closed_form": ..}), `scripted:<rule>`
    /// (constant:<v>, max, min, majority, projection:<i>), `human` or `llm`.
    #[arg(long, default_value = "human")]
    oracle: String,
    /// Defaults to hansel for binary nodes, greedy otherwise.
    #[arg(long)]
    strategy: Option<Strategy>,
    /// How to fill scenarios left open when stopping early.
    #[arg(long, default_value = "require-complete", value_parser = parse_policy)]
    policy: CompletionPolicy,
    /// Stop after this many questions.
    #[arg(long)]
    max_questions: Option<usize>,
    /// Write the spec (or model) with the elicited table bound here.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Write the session event log here (JSON lines).
    #[arg(long)]
    log: Option<PathBuf>,
    #[command(flatten)]
    llm: LlmFlags,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    model: PathBuf,
    /// A JSON file, inline JSON object, or `leaf=value,leaf=value`.
    #[arg(long)]
    answers: String,
    #[arg(long, default_value = "full", value_parser = parse_eval_policy)]
    policy: EvalPolicy,
    /// Print the explanation trace this many levels deep.
    #[arg(long)]
    explain_depth: Option<usize>,
}

#[derive(Args)]
struct GroupArgs {
    #[arg(long, num_args = 1.., required = true)]
    models: Vec<PathBuf>,
    #[arg(long)]
    answers: String,
    #[arg(long, default_value = "majority")]
    rule: String,
}

#[derive(Args)]
struct DiffArgs {
    #[arg(long, num_args = 2, required = true)]
    models: Vec<PathBuf>,
    #[arg(long)]
    node: String,
}

#[derive(Args)]
struct VizArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    node: String,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Subcommand)]
enum FismaCommand {
    /// Evaluate the worked example and print its trace.
    Demo,
}

#[derive(Args)]
struct ServeArgs {
    #[arg(long, default_value_t = 8080)]
    port: u16,
    #[arg(long, default_value = "127.0.0.1")]
    bind: IpAddr,
    /// Persist specs, models and session logs here.
    #[arg(long)]
    data_dir: Option<PathBuf>,
    /// Allowed browser origin (any when unset).
    #[arg(long)]
    cors_origin: Option<String>,
}

#[derive(Subcommand)]
enum LlmCommand {
    /// Propose factor questions for a decision.
    Factors {
        #[arg(long)]
        decision: String,
        #[command(flatten)]
        llm: LlmFlags,
    },
    /// Group a factor list into a question hierarchy.
    Hierarchy {
        /// File with one factor per line (or a JSON list).
        #[arg(long)]
        factors: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        llm: LlmFlags,
    },
}

#[derive(Args, Clone)]
struct LlmFlags {
    /// Use bundled responses; no network.
    #[arg(long)]
    offline: bool,
    /// Chat-completions URL.
    #[arg(long, env = "EMM_LLM_ENDPOINT")]
    llm_endpoint: Option<String>,
    #[arg(long, env = "EMM_LLM_MODEL")]
    llm_model: Option<String>,
}

impl LlmFlags {
    fn binding(&self) -> Result<emm_core::oracle::LlmBinding, Error> {
        use emm_core::oracle::LlmBinding;
        if self.offline {
            return Ok(LlmBinding::offline());
        }
        match (&self.llm_endpoint, &self.llm_model) {
            (Some(e), Some(m)) => Ok(LlmBinding::online(e, m)),
            _ => Err(Error::Usage("LLM use needs --llm-endpoint and --llm-model (or --offline)".into())),
        }
    }
}

fn parse_policy(s: &str) -> Result<CompletionPolicy, String> {
    s.parse()
}

fn parse_eval_policy(s: &str) -> Result<EvalPolicy, String> {
    s.parse()
}

pub(crate) fn parse_form(s: &str) -> Result<SpecForm, String> {
    s.parse()
}

fn run(cli: Cli) -> Result<(), Error> {
    let json = cli.json;
    match cli.command {
        Command::Spec(c) => match c {
            SpecCommand::New(a) => spec::new(a, json),
            SpecCommand::Add(a) => spec::add(a, json),
            SpecCommand::Bind(a) => spec::bind(a, json),
            SpecCommand::Freeze(a) => spec::freeze(a, json),
            SpecCommand::Validate(a) => spec::validate(a, json),
        },
        Command::Elicit(a) => elicit::run(a, json),
        Command::Eval(a) => models::eval(a, json),
        Command::Group(a) => models::group(a, json),
        Command::Diff(a) => models::diff(a, json),
        Command::Viz(a) => models::viz(a, json),
        Command::Fisma(FismaCommand::Demo) => models::fisma_demo(json),
        Command::Serve(a) => {
            let addr = SocketAddr::new(a.bind, a.port);
            eprintln!("WARNING: the API has no authentication; anyone who can reach {addr} can read and modify all data");
            eprintln!("listening on http://{addr}");
            let config = emm_service::ServiceConfig { data_dir: a.data_dir, cors_origin: a.cors_origin };
            emm_service::serve_blocking(addr, config).map_err(|e| match e {
                emm_service::ServiceError::Store(e) => e,
                other => Error::Io(other.to_string()),
            })
        }
        Command::Llm(c) => match c {
            LlmCommand::Factors { decision, llm } => models::llm_factors(&decision, &llm.binding()?, json),
            LlmCommand::Hierarchy { factors, out, llm } => {
                models::llm_hierarchy(&factors, out.as_deref(), &llm.binding()?, json)
            }
        },
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let category = e.category();
            let message = e.to_string().replace('\n', " ");
            eprintln!("error[{category}]: {message}");
            ExitCode::from(category.exit_code() as u8)
        }
    }
}
