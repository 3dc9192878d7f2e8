use std::io::Write;
use std::path::PathBuf;
use std::sync::Arc;
use std::time::Duration;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use copilot_core::app::assets_dir;
use copilot_core::config::OstiMode;
use copilot_core::{App, CopilotConfig};
use copilot_eval::bench::load_questions;
use copilot_eval::{
    ambiguous_suite, display_name, generate_case_suite, load_cases, run_benchmark, run_suite,
    save_cases, score_outcomes, unambiguous_suite, ApiClient, EvalOutcome, RunOptions,
};

#[derive(Parser)]
#[command(
    name = "copilot",
    version,
    about = "Multi-agent catalysis copilot: server and evaluation tools"
)]
struct Cli {
    /// tracing filter, e.g. `info` or `copilot_core=debug`
    #[arg(long, global = true, default_value = "info")]
    log: String,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum OstiArg {
    Fixtures,
    Live,
}

#[derive(Args)]
struct ApiArgs {
    #[arg(long, default_value = "http://127.0.0.1:8080")]
    endpoint: String,
    /// Per-request wall clock limit.
    #[arg(long, default_value_t = 60)]
    timeout_secs: u64,
    /// Use the ten-minute per-case limit instead of --timeout-secs.
    #[arg(long)]
    long_timeout: bool,
    #[arg(long, default_value_t = 4)]
    parallelism: usize,
    #[arg(long, default_value = "X-Auth-User")]
    identity_header: String,
    #[arg(long, default_value = "eval-harness")]
    user: String,
}

impl ApiArgs {
    fn client(&self) -> ApiClient {
        ApiClient::new(&self.endpoint).with_identity(&self.identity_header, &self.user)
    }

    fn options(&self) -> RunOptions {
        let base = if self.long_timeout {
            RunOptions::long_running()
        } else {
            RunOptions {
                timeout: Duration::from_secs(self.timeout_secs),
                ..RunOptions::default()
            }
        };
        RunOptions {
            parallelism: self.parallelism,
            ..base
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Start the HTTP API.
    Serve {
        /// Configuration file; defaults to the bundled desk configuration.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        bind: Option<String>,
        /// Override where literature search records come from.
        #[arg(long, value_enum)]
        osti: Option<OstiArg>,
    },
    /// Send a case suite to a running API and report routing results.
    RunSuite {
        #[command(flatten)]
        api: ApiArgs,
        /// `unambiguous`, `ambiguous`, or a path to a JSONL suite.
        #[arg(long, default_value = "unambiguous")]
        suite: String,
        /// Send prompts without the agent/tool listing request.
        #[arg(long)]
        no_addendum: bool,
        /// Write per-case outcomes as JSONL.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        json: bool,
    },
    /// Re-score a JSONL outcomes file.
    Score {
        outcomes: PathBuf,
        #[arg(long)]
        json: bool,
    },
    /// Ask a model backend for test prompts targeting one agent.
    GenCases {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        agent: String,
        #[arg(long, default_value_t = 20)]
        count: usize,
        /// Backend id; defaults to the agent's own backend.
        #[arg(long)]
        backend: Option<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a JSONL question file and report completion and correctness.
    RunBenchmark {
        #[command(flatten)]
        api: ApiArgs,
        questions: PathBuf,
        #[arg(long)]
        json: bool,
    },
}

fn load_config(path: Option<PathBuf>) -> Result<CopilotConfig> {
    let path = path.unwrap_or_else(|| assets_dir().join("config.toml"));
    CopilotConfig::load(&path).with_context(|| format!("loading {}", path.display()))
}

fn print_report(outcomes: &[EvalOutcome], json: bool) {
    let report = score_outcomes(outcomes);
    if json {
        println!(
            "{}",
            serde_json::to_string_pretty(&report.to_json()).expect("report serializes")
        );
    } else {
        print!("{}", report.to_table());
        for (category, n) in &report.categories {
            println!("  {category}: {n}");
        }
        if !report.self_report_mismatches.is_empty() {
            println!(
                "self-report differs from trace: {}",
                report.self_report_mismatches.join(", ")
            );
        }
    }
}

async fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Serve { config, bind, osti } => {
            let mut config = load_config(config)?;
            match osti {
                Some(OstiArg::Live) => config.osti.mode = OstiMode::Live,
                Some(OstiArg::Fixtures) => config.osti.mode = OstiMode::Fixtures,
                None => {}
            }
            let addr = bind.unwrap_or_else(|| config.server.bind.clone());
            let app = Arc::new(App::build(config)?);
            let _background = app.spawn_background();
            copilot_server::serve(app, &addr).await?;
        }
        Command::RunSuite {
            api,
            suite,
            no_addendum,
            out,
            json,
        } => {
            let cases = match suite.as_str() {
                "unambiguous" => unambiguous_suite(),
                "ambiguous" => ambiguous_suite(),
                path => load_cases(path.as_ref())?,
            };
            let mut opts = api.options();
            opts.append_addendum = !no_addendum;
            let run = run_suite(&api.client(), &cases, &opts).await;
            if let Some(path) = out {
                let mut f = std::fs::File::create(&path)
                    .with_context(|| format!("creating {}", path.display()))?;
                for o in &run.outcomes {
                    writeln!(f, "{}", serde_json::to_string(o)?)?;
                }
            }
            print_report(&run.outcomes, json);
            if let Some(reason) = run.aborted {
                bail!(
                    "suite aborted after {} of {} cases: {reason}",
                    run.outcomes.len(),
                    cases.len()
                );
            }
        }
        Command::Score { outcomes, json } => {
            let text = std::fs::read_to_string(&outcomes)
                .with_context(|| format!("reading {}", outcomes.display()))?;
            let parsed = text
                .lines()
                .enumerate()
                .filter(|(_, l)| !l.trim().is_empty())
                .map(|(i, l)| {
                    serde_json::from_str::<EvalOutcome>(l)
                        .with_context(|| format!("line {}", i + 1))
                })
                .collect::<Result<Vec<_>>>()?;
            print_report(&parsed, json);
        }
        Command::GenCases {
            config,
            agent,
            count,
            backend,
            out,
        } => {
            let config = load_config(config)?;
            let spec = config
                .agents
                .iter()
                .find(|a| a.name == agent)
                .with_context(|| format!("no agent named {agent:?}"))?
                .clone();
            let app = App::build(config)?;
            let backend = backend.unwrap_or_else(|| spec.model_binding.clone());
            let title = format!(
                "{} Agent",
                spec.display_name
                    .clone()
                    .unwrap_or_else(|| display_name(&agent))
            );
            let cases = generate_case_suite(
                &app.gateway,
                &backend,
                &agent,
                &title,
                &spec.system_prompt,
                count,
            )
            .await?;
            match out {
                Some(path) => save_cases(&path, &cases)?,
                None => {
                    for c in &cases {
                        println!("{}", serde_json::to_string(c)?);
                    }
                }
            }
        }
        Command::RunBenchmark {
            api,
            questions,
            json,
        } => {
            let qs = load_questions(&questions)?;
            let opts = api.options();
            let report = run_benchmark(&api.client(), &qs, opts.timeout, opts.parallelism).await;
            if json {
                println!("{}", serde_json::to_string_pretty(&report)?);
            } else {
                print!("{}", report.to_table());
            }
            if let Some(reason) = report.aborted {
                bail!("benchmark aborted: {reason}");
            }
        }
    }
    Ok(())
}

#[tokio::main]
async fn main() -> Result<()> {
    let cli = Cli::parse();
    tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_new(&cli.log).unwrap_or_else(|_| "info".into()),
        )
        .with_writer(std::io::stderr)
        .init();
    run(cli).await
}
