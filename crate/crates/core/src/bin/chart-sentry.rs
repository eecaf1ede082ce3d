use std::net::SocketAddr;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};

use chart_sentry::analysis::Tool;
use chart_sentry::catalog::HUB_URL_ENV;
use chart_sentry::orchestrator::{pipeline_run, run_stage, serve_review, ReviewOptions, RunConfig, Stage};

#[derive(Parser)]
#[command(name = "chart-sentry", version, about = "Scan Helm charts, refactor findings with an LLM, report outcomes")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    flags: RunFlags,
}

#[derive(Subcommand)]
enum Command {
    /// List charts on the hub and download their archives
    Mine,
    /// Render charts and drop ineligible ones
    Render,
    /// Run the analyzers and draw the validation sample
    Scan,
    /// Ask the provider to refactor every finding
    Remediate,
    /// Re-scan the patched charts
    Verify,
    /// Write report.json, report.csv and report.md
    Report,
    /// Run every pending stage
    Run,
    /// Serve the labeling UI for the validation sample
    Review {
        #[arg(long, default_value = "127.0.0.1:8080")]
        bind: SocketAddr,
        /// Hide which tool reported each finding
        #[arg(long)]
        blind: bool,
    },
}

/// Flags left unset keep the value stored in the run directory.
#[derive(Args)]
struct RunFlags {
    #[arg(long, global = true, default_value = "run")]
    run_dir: PathBuf,
    #[arg(long, global = true, env = HUB_URL_ENV)]
    hub_url: Option<String>,
    /// Never touch the network; requires a local hub directory
    #[arg(long, global = true)]
    offline: bool,
    #[arg(long, global = true)]
    cache_dir: Option<PathBuf>,
    #[arg(long, global = true)]
    max_charts: Option<usize>,
    /// Comma-separated, e.g. builtin,checkov,kube-linter
    #[arg(long, global = true, value_delimiter = ',')]
    tools: Option<Vec<Tool>>,
    #[arg(long, global = true)]
    tool_timeout: Option<u64>,
    #[arg(long, global = true)]
    helm: Option<PathBuf>,
    /// mock, mock:<fix|break|echo|prose|fail>, openai or gemini
    #[arg(long, global = true)]
    provider: Option<String>,
    /// TOML file with [openai] / [gemini] settings
    #[arg(long, global = true)]
    provider_config: Option<PathBuf>,
    #[arg(long, global = true)]
    skip_llm: bool,
    #[arg(long, global = true)]
    confidence: Option<f64>,
    #[arg(long, global = true)]
    sample_size: Option<usize>,
    #[arg(long, global = true)]
    seed: Option<u64>,
}

impl RunFlags {
    fn config(self) -> anyhow::Result<RunConfig> {
        let mut c = RunConfig::load(&self.run_dir)?.unwrap_or_default();
        c.run_dir = self.run_dir;
        macro_rules! set {
            ($($field:ident <- $flag:expr),* $(,)?) => { $(if let Some(v) = $flag { c.$field = v; })* };
        }
        set!(
            hub_url <- self.hub_url,
            max_charts <- self.max_charts.map(Some),
            cache_dir <- self.cache_dir.map(Some),
            tools <- self.tools,
            tool_timeout_secs <- self.tool_timeout,
            helm <- self.helm,
            provider <- self.provider,
            provider_config <- self.provider_config.map(Some),
            confidence <- self.confidence,
            sample_size <- self.sample_size,
            seed <- self.seed,
        );
        c.offline |= self.offline;
        c.skip_llm |= self.skip_llm;
        Ok(c)
    }
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "info".into()),
        )
        .with_writer(std::io::stderr)
        .init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let config = cli.flags.config()?;
    let stage = match cli.command {
        Command::Review { bind, blind } => {
            return serve_review(config.run_dir.clone(), bind, ReviewOptions { blind })
                .with_context(|| format!("review service for {}", config.run_dir.display()));
        }
        Command::Run => {
            let summary = pipeline_run(&config)?;
            eprintln!("ran {} stage(s), {} already complete", summary.executed.len(), summary.skipped.len());
            return Ok(());
        }
        Command::Mine => Stage::Mine,
        Command::Render => Stage::Render,
        Command::Scan => Stage::Scan,
        Command::Remediate => Stage::Remediate,
        Command::Verify => Stage::Verify,
        Command::Report => Stage::Report,
    };
    run_stage(&config, stage)?;
    if stage == Stage::Report {
        println!("{}", config.run_dir.join("report.md").display());
    }
    Ok(())
}
