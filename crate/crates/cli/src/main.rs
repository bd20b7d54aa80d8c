//! `catforge`: batch entry points for the task synthesis pipeline.

mod commands;
mod config;
mod error;
mod io;

use std::path::PathBuf;
use std::process::ExitCode;

use catforge::cat::Variant;
use catforge::envs::{EnvKind, Scale};
use clap::{Args, Parser, Subcommand};

use crate::config::RunConfig;
use crate::error::{CliError, CliResult};

#[derive(Parser, Debug)]
#[command(name = "catforge", version, about = "Synthesize, filter, roll out and evaluate code-as-task bundles")]
struct Cli {
    /// TOML run configuration. Flags override its values.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    /// CI mode: every command must be given an explicit seed.
    #[arg(long, global = true)]
    ci: bool,
    /// Worker threads [default: number of CPUs].
    #[arg(long, global = true, value_name = "N")]
    workers: Option<usize>,
    /// More log output; repeat for debug.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a world and write its canonical snapshot.
    GenEnv(GenEnvArgs),
    /// Run a challenger and write task bundles as JSONL.
    Challenge(ChallengeArgs),
    /// Filter bundles by execution; write the accepted subset and statistics.
    Validate(ValidateArgs),
    /// Run executor policies on bundles; write trajectories as JSONL.
    Rollout(RolloutArgs),
    /// Turn trajectories into a training dataset.
    Export(ExportArgs),
    /// Aggregate trajectories, filter statistics and audits into a report.
    Eval(EvalArgs),
    /// Measure verifier quality against scripted agents with known outcomes.
    Audit(AuditArgs),
    /// Flag bundles whose verifier names ids the instruction never mentions.
    Lint(LintArgs),
}

#[derive(Args, Debug)]
pub struct GenEnvArgs {
    /// Environment: retail, airline, calc or web.
    #[arg(long)]
    pub env: Option<EnvKind>,
    /// World seed [default: 0; required in CI mode].
    #[arg(long)]
    pub seed: Option<u64>,
    /// World size: small or medium [default: small].
    #[arg(long)]
    pub scale: Option<Scale>,
    /// Write the executor tool schemas instead of a snapshot.
    #[arg(long)]
    pub dump_schema: bool,
    /// Output file [default: <out_dir>/<env>-<seed>.snapshot, or <env>-tools.json with --dump-schema].
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct ChallengeArgs {
    /// Environment: retail, airline, calc or web.
    #[arg(long)]
    pub env: Option<EnvKind>,
    /// Number of bundles [default: 100].
    #[arg(long)]
    pub n: Option<usize>,
    /// template, noisy or remote [default: template].
    #[arg(long)]
    pub challenger: Option<String>,
    /// Base seed [default: 0; required in CI mode].
    #[arg(long)]
    pub seed: Option<u64>,
    /// World size: small or medium [default: small].
    #[arg(long)]
    pub scale: Option<Scale>,
    /// Worlds tried per slot before giving up [default: 4].
    #[arg(long)]
    pub attempts: Option<u32>,
    /// Output file [default: <out_dir>/bundles.jsonl].
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct ValidateArgs {
    /// Bundle files, validated as one batch in the order given.
    #[arg(long = "in", value_name = "FILE", num_args = 1.., required = true)]
    pub input: Vec<PathBuf>,
    /// verify_only, verify_solution or full [default: full].
    #[arg(long)]
    pub variant: Option<Variant>,
    /// Accepted bundles [default: <out_dir>/accepted.jsonl].
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Filter statistics [default: <out_dir>/filter_stats.json].
    #[arg(long)]
    pub stats: Option<PathBuf>,
    /// Also write one verdict per input bundle.
    #[arg(long, value_name = "FILE")]
    pub verdicts: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct RolloutArgs {
    #[arg(long = "in", value_name = "FILE")]
    pub input: PathBuf,
    /// Comma list of oracle, random, greedy, immediate, remote [default: oracle].
    #[arg(long, value_delimiter = ',')]
    pub policy: Option<Vec<String>>,
    /// Trials per task, the k of pass@k [default: 4].
    #[arg(long)]
    pub trials: Option<usize>,
    /// Base seed for policy seeds [default: 0; required in CI mode].
    #[arg(long)]
    pub seed: Option<u64>,
    /// Executor turns per episode [default: 15].
    #[arg(long)]
    pub max_steps: Option<u32>,
    /// Trajectories [default: <out_dir>/trajectories.jsonl].
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct ExportArgs {
    #[arg(long = "in", value_name = "FILE")]
    pub input: PathBuf,
    /// rft, distill or dpo [default: rft].
    #[arg(long)]
    pub mode: Option<String>,
    /// Distill mode: keep only reward-1 trajectories.
    #[arg(long)]
    pub only_success: bool,
    /// DPO mode: pairs per task [default: 4].
    #[arg(long)]
    pub max_pairs: Option<usize>,
    /// DPO mode: pair sampling seed [default: 0; required in CI mode].
    #[arg(long)]
    pub seed: Option<u64>,
    /// Drop samples over this many estimated tokens [default: 16192].
    #[arg(long)]
    pub max_tokens: Option<usize>,
    /// Dataset [default: <out_dir>/<mode>.jsonl].
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct EvalArgs {
    /// Trajectories from `rollout`.
    #[arg(long = "in", value_name = "FILE")]
    pub input: Option<PathBuf>,
    /// Filter statistics from `validate`.
    #[arg(long)]
    pub stats: Option<PathBuf>,
    /// Audit results from `audit`.
    #[arg(long)]
    pub audit: Option<PathBuf>,
    /// Report [default: <out_dir>/report.json].
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct AuditArgs {
    /// Environment [default: all four].
    #[arg(long)]
    pub env: Option<EnvKind>,
    /// Noisy tasks per environment [default: 40].
    #[arg(long)]
    pub n: Option<usize>,
    /// Seed [default: 0; required in CI mode].
    #[arg(long)]
    pub seed: Option<u64>,
    /// World size: small or medium [default: small].
    #[arg(long)]
    pub scale: Option<Scale>,
    /// Audit results [default: <out_dir>/audit.json].
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct LintArgs {
    #[arg(long = "in", value_name = "FILE")]
    pub input: PathBuf,
    /// Lint findings as JSON; printed to stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn run(cli: Cli) -> CliResult<()> {
    let mut config = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    config.ci |= cli.ci;
    if let Some(n) = cli.workers.or(config.workers) {
        if n == 0 {
            return Err(CliError::Config("--workers must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(|e| CliError::Config(e.to_string()))?;
    }
    match cli.command {
        Command::GenEnv(a) => commands::gen_env(&config, a),
        Command::Challenge(a) => commands::challenge(&config, a),
        Command::Validate(a) => commands::validate(&config, a),
        Command::Rollout(a) => commands::rollout(&config, a),
        Command::Export(a) => commands::export(&config, a),
        Command::Eval(a) => commands::eval(&config, a),
        Command::Audit(a) => commands::audit(&config, a),
        Command::Lint(a) => commands::lint(a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let err = CliError::Config(e.to_string().trim_end().to_string());
            eprintln!("{}", err.to_json());
            return ExitCode::from(err.exit_code() as u8);
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).format_timestamp(None).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.to_json());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
