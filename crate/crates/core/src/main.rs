use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;
use std::time::Duration;

use clap::{Args, Parser, Subcommand, ValueEnum};
use tracing::{error, info};

use trafficmon::camera::Camera;
use trafficmon::corpus;
use trafficmon::gateway::{ErrorRates, Responder, VlmClient};
use trafficmon::perception::Corruption;
use trafficmon::pipeline::{self, BuildOptions, DirSink, HighlightOptions, PipelineError};
use trafficmon::scene::{load_scenario_dir, ScenarioConfig};
use trafficmon::service::{self, ServiceConfig};

#[derive(Parser)]
#[command(
    name = "trafficmon",
    version,
    about = "Simulated traffic monitoring with grounded scene descriptions"
)]
struct Cli {
    /// Service config; defaults to the shipped demo config.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run scenarios and write raw frames with annotation sidecars.
    Simulate {
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        select: Select,
    },
    /// Build the instruction-tuning corpus (frames, dataset.jsonl, manifest.json).
    ExportDataset {
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        select: Select,
        #[command(flatten)]
        highlight: HighlightArgs,
        /// Query pool assigned round-robin; repeat the flag for more.
        #[arg(long = "query")]
        queries: Vec<String>,
        #[arg(long, default_value = "1970-01-01T00:00:00Z")]
        created_at: String,
    },
    /// Query a responder on every captured frame and score the answers.
    Evaluate {
        #[command(flatten)]
        select: Select,
        #[command(flatten)]
        highlight: HighlightArgs,
        #[arg(long, value_enum, default_value_t = ResponderArg::Oracle)]
        responder: ResponderArg,
        #[arg(long, default_value_t = 0.0)]
        p_loc: f64,
        #[arg(long, default_value_t = 0.0)]
        p_dir: f64,
        #[arg(long, default_value_t = 0.0)]
        p_col: f64,
        /// Seed of the scripted responder.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = trafficmon::dataset::DEFAULT_QUERY)]
        prompt: String,
        /// Write the full report here; a summary always goes to stdout.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Serve the HTTP API.
    Serve {
        #[arg(long, default_value = "127.0.0.1:8080")]
        addr: SocketAddr,
    },
    /// Check the config, every alias table and every scenario.
    Validate,
}

#[derive(Args)]
struct Select {
    /// Scenario ids to use; all scenarios when omitted.
    #[arg(long = "scenario")]
    scenarios: Vec<String>,
}

#[derive(Args)]
struct HighlightArgs {
    #[arg(long, default_value_t = 0.0)]
    drop_rate: f64,
    #[arg(long, default_value_t = 0.0)]
    mislabel_rate: f64,
    /// Seed of the highlighting detector.
    #[arg(long, default_value_t = 0)]
    detector_seed: u64,
}

impl HighlightArgs {
    fn options(&self) -> Result<HighlightOptions, Failure> {
        for (name, p) in [("drop-rate", self.drop_rate), ("mislabel-rate", self.mislabel_rate)] {
            probability(name, p)?;
        }
        Ok(HighlightOptions {
            corruption: Corruption {
                drop_rate: self.drop_rate,
                mislabel_rate: self.mislabel_rate,
            },
            seed: self.detector_seed,
        })
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum ResponderArg {
    Oracle,
    Remote,
}

/// Failure classes, each with its own exit code.
#[derive(Debug)]
enum Failure {
    /// 3: config, scenario or argument rejected.
    Input(String),
    /// 4: validation found problems.
    Invalid(usize),
    /// 5: reading or writing artifacts failed.
    Io(String),
    /// 6: a responder or detector call failed.
    Upstream(String),
    /// 7: the server stopped with an error.
    Server(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Input(_) => 3,
            Failure::Invalid(_) => 4,
            Failure::Io(_) => 5,
            Failure::Upstream(_) => 6,
            Failure::Server(_) => 7,
        }
    }
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Failure::Input(m) | Failure::Io(m) | Failure::Upstream(m) | Failure::Server(m) => f.write_str(m),
            Failure::Invalid(n) => write!(f, "{n} problem(s) found"),
        }
    }
}

impl From<PipelineError> for Failure {
    fn from(e: PipelineError) -> Self {
        match e {
            PipelineError::Io { .. } | PipelineError::Dataset(_) => Failure::Io(e.to_string()),
            PipelineError::UnknownCamera(_) => Failure::Input(e.to_string()),
            _ => Failure::Upstream(e.to_string()),
        }
    }
}

fn probability(name: &str, p: f64) -> Result<(), Failure> {
    if (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(Failure::Input(format!("--{name} must be within [0, 1], got {p}")))
    }
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "warn".into()))
        .with_writer(std::io::stderr)
        .init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code())
        }
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    let config_path = cli.config.unwrap_or_else(|| corpus::shipped_dir().join("demo.json"));
    let config = ServiceConfig::load(&config_path).map_err(|e| Failure::Input(e.to_string()))?;
    match cli.command {
        Command::Validate => validate(&config),
        Command::Simulate { out, select } => {
            let (cameras, scenarios) = inputs(&config, &select)?;
            let frames = pipeline::simulate(&scenarios, &cameras, &DirSink::new(&out))?;
            println!(
                "{frames} frames from {} scenarios written to {}",
                scenarios.len(),
                out.display()
            );
            Ok(())
        }
        Command::ExportDataset {
            out,
            select,
            highlight,
            queries,
            created_at,
        } => {
            let (cameras, scenarios) = inputs(&config, &select)?;
            let mut options = BuildOptions {
                highlight: highlight.options()?,
                created_at,
                ..BuildOptions::default()
            };
            if !queries.is_empty() {
                options.queries = queries;
            }
            let (records, manifest) = pipeline::export_corpus(&scenarios, &cameras, &options, &DirSink::new(&out))?;
            println!(
                "{} records ({} collision frames) written to {}",
                records.len(),
                manifest.collision_count,
                out.display()
            );
            Ok(())
        }
        Command::Evaluate {
            select,
            highlight,
            responder,
            p_loc,
            p_dir,
            p_col,
            seed,
            prompt,
            report,
        } => {
            let (cameras, scenarios) = inputs(&config, &select)?;
            for (name, p) in [("p-loc", p_loc), ("p-dir", p_dir), ("p-col", p_col)] {
                probability(name, p)?;
            }
            let responder = match responder {
                ResponderArg::Oracle => Responder::Oracle {
                    rates: ErrorRates { p_loc, p_dir, p_col },
                    seed,
                },
                ResponderArg::Remote => {
                    let url = config
                        .endpoints
                        .vlm
                        .clone()
                        .ok_or_else(|| Failure::Input("config has no `endpoints.vlm`".into()))?;
                    let limits = &config.limits;
                    Responder::Remote(
                        VlmClient::new(
                            url,
                            Duration::from_millis(limits.request_timeout_ms),
                            limits.retries,
                            limits.max_in_flight,
                        )
                        .with_backoff_base(Duration::from_millis(limits.backoff_base_ms)),
                    )
                }
            };
            let highlight = highlight.options()?;
            let result = runtime()?.block_on(pipeline::evaluate(
                &scenarios,
                Arc::new(cameras),
                Arc::new(responder),
                highlight,
                &prompt,
            ))?;
            println!(
                "frames {}  vehicles {}  location {:.4}  steering {:.4}  collision {:.4}",
                result.frames_scored,
                result.vehicles,
                result.location_accuracy,
                result.steering_accuracy,
                result.collision_accuracy
            );
            if let Some(path) = report {
                write_json(&path, &result)?;
            }
            Ok(())
        }
        Command::Serve { addr } => {
            info!(%addr, config = %config_path.display(), "starting server");
            runtime()?
                .block_on(service::serve(config, addr))
                .map_err(|e| Failure::Server(e.to_string()))
        }
    }
}

fn runtime() -> Result<tokio::runtime::Runtime, Failure> {
    tokio::runtime::Runtime::new().map_err(|e| Failure::Io(format!("cannot start runtime: {e}")))
}

fn inputs(config: &ServiceConfig, select: &Select) -> Result<(Vec<Camera>, Vec<ScenarioConfig>), Failure> {
    let cameras = config.load_cameras().map_err(|e| Failure::Input(e.to_string()))?;
    let mut scenarios = load_scenario_dir(&config.scenario_dir).map_err(|e| Failure::Input(e.to_string()))?;
    if !select.scenarios.is_empty() {
        if let Some(missing) = select
            .scenarios
            .iter()
            .find(|id| !scenarios.iter().any(|s| &s.id == *id))
        {
            return Err(Failure::Input(format!("no scenario `{missing}`")));
        }
        scenarios.retain(|s| select.scenarios.contains(&s.id));
    }
    Ok((cameras, scenarios))
}

fn write_json(path: &Path, value: &impl serde::Serialize) -> Result<(), Failure> {
    let mut text = serde_json::to_vec_pretty(value).map_err(|e| Failure::Io(e.to_string()))?;
    text.push(b'\n');
    std::fs::write(path, text).map_err(|e| Failure::Io(format!("cannot write {}: {e}", path.display())))
}

fn validate(config: &ServiceConfig) -> Result<(), Failure> {
    let mut problems = 0;
    for camera in &config.cameras {
        match trafficmon::grounding::AliasDb::load(&camera.alias_db) {
            Ok(db) => {
                if db.camera_id != camera.id {
                    println!("{}: alias table belongs to `{}`", camera.id, db.camera_id);
                    problems += 1;
                }
                for v in db.violations() {
                    println!("{}: {v}", camera.id);
                    problems += 1;
                }
            }
            Err(e) => {
                println!("{}: {e}", camera.id);
                problems += 1;
            }
        }
        if let Err(e) = camera.validate() {
            println!("{}: {e}", camera.id);
            problems += 1;
        }
    }
    match load_scenario_dir(&config.scenario_dir) {
        Ok(scenarios) => println!("{} scenarios ok", scenarios.len()),
        Err(e) => {
            println!("{e}");
            problems += 1;
        }
    }
    if problems > 0 {
        error!(problems, "validation failed");
        return Err(Failure::Invalid(problems));
    }
    println!("{} cameras ok", config.cameras.len());
    Ok(())
}
