//! `bonsai` command-line tool: offline planning and pipeline runs over
//! fixture corpora, the feed service, and admin calls against a running
//! service.

pub mod error;
pub mod feeds;
pub mod offline;

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use chrono::{DateTime, Utc};
use clap::{Args, Parser, Subcommand, ValueEnum};

pub use error::CliError;

#[derive(Debug, Parser)]
#[command(name = "bonsai", version, about = "Build, run and administer intentional feeds")]
pub struct Cli {
    /// Log line format on stderr.
    #[arg(long, value_enum, global = true, default_value_t = LogFormat::Text)]
    pub log_format: LogFormat,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum LogFormat {
    Text,
    Json,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Draft a feed config from a plain-language description.
    Plan(PlanArgs),
    /// Source, curate and rank a fixture corpus offline.
    Run(RunArgs),
    /// Start the feed service.
    Serve(ServeArgs),
    /// Administer feeds on a running service.
    Feeds(feeds::FeedsArgs),
}

/// Language model selection shared by `plan` and `run`.
#[derive(Debug, Clone, Args)]
pub struct LmArgs {
    /// Keyword rules for the offline mock provider.
    #[arg(long)]
    pub mock_rules: Option<PathBuf>,
    /// Use an OpenAI-compatible endpoint instead of the mock provider. The
    /// API key is read from BONSAI_LM_API_KEY.
    #[arg(long)]
    pub lm_base_url: Option<String>,
    #[arg(long, default_value = "gpt-4o-mini")]
    pub lm_model: String,
    #[arg(long, default_value_t = 3)]
    pub lm_max_retries: u32,
    #[arg(long, default_value_t = 30_000)]
    pub lm_timeout_ms: u64,
}

#[derive(Debug, Args)]
pub struct PlanArgs {
    #[arg(long)]
    pub description: String,
    /// Source catalog (JSON lines). Without it the planner only proposes
    /// searches and hashtags.
    #[arg(long)]
    pub catalog: Option<PathBuf>,
    #[arg(long, default_value = "did:plc:local")]
    pub owner: String,
    /// Timestamp stamped on the draft; defaults to the current time.
    #[arg(long)]
    pub now: Option<DateTime<Utc>>,
    #[command(flatten)]
    pub lm: LmArgs,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// Feed config JSON, e.g. the output of `bonsai plan`.
    #[arg(long)]
    pub config: PathBuf,
    /// JSON-lines corpus keyed by source identifier.
    #[arg(long)]
    pub corpus: PathBuf,
    /// Preset name (focused, fresh, balanced, trending) or `w_r,w_p,w_c`.
    /// Defaults to the config's ranking style.
    #[arg(long)]
    pub weights: Option<String>,
    /// Reference time for the fetch window; defaults to the newest post in
    /// the corpus.
    #[arg(long)]
    pub now: Option<DateTime<Utc>>,
    /// Print a JSON document instead of the text table.
    #[arg(long)]
    pub json: bool,
    #[command(flatten)]
    pub lm: LmArgs,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    /// Service config (TOML). BONSAI__SECTION__KEY variables override it.
    #[arg(long)]
    pub config: PathBuf,
}

pub fn init_logging(format: LogFormat, default_level: &str) {
    let filter = tracing_subscriber::EnvFilter::try_from_default_env()
        .unwrap_or_else(|_| tracing_subscriber::EnvFilter::new(default_level));
    let builder = tracing_subscriber::fmt().with_env_filter(filter).with_writer(std::io::stderr);
    let _ = match format {
        LogFormat::Text => builder.try_init(),
        LogFormat::Json => builder.json().try_init(),
    };
}

/// Runs a parsed command line and returns the process exit code.
pub fn execute(cli: Cli) -> ExitCode {
    let default_level = if matches!(cli.command, Command::Serve(_)) { "info" } else { "warn" };
    init_logging(cli.log_format, default_level);
    let runtime = match tokio::runtime::Builder::new_multi_thread().enable_all().build() {
        Ok(rt) => rt,
        Err(e) => {
            eprintln!("error: cannot start runtime: {e}");
            return ExitCode::from(1);
        }
    };
    let result = runtime.block_on(async {
        match cli.command {
            Command::Plan(args) => offline::plan(&args).await.map(emit),
            Command::Run(args) => offline::run(&args).await.map(emit),
            Command::Serve(args) => serve(&args).await,
            Command::Feeds(args) => feeds::execute(&args).await.map(emit),
        }
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.exit_code())
        }
    }
}

/// Writes command output to stdout; a closed pipe is not an error.
fn emit(out: String) {
    let mut stdout = std::io::stdout().lock();
    let _ = stdout.write_all(out.as_bytes()).and_then(|()| stdout.flush());
}

async fn serve(args: &ServeArgs) -> Result<(), CliError> {
    let config =
        bonsai_service::config::ServiceConfig::load(&args.config).map_err(|e| CliError::Invalid(e.to_string()))?;
    bonsai_service::run(config).await.map_err(CliError::from)
}
