use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use visionweb::agents::{
    Agent, CorrectingOracleAgent, NoisyOracleAgent, OracleAgent, PrematureClickerAgent, RemoteEndpointConfig,
    RemoteVlmAgent,
};
use visionweb::backend::PageBackend;
use visionweb::cdp::{BrowserSession, CdpBackend};
use visionweb::distill::{collect_stage2, export_jsonl, gen_stage1_samples, Stage1Config, Stage2Config};
use visionweb::env::{PageRef, TaskSpec, Viewport};
use visionweb::jsonl::{read_jsonl, write_jsonl, JsonlWriter};
use visionweb::protocol::{Formulation, RunConfig};
use visionweb::runner::{emit_report, load_run, run_benchmark, EXCLUSIONS_FILE, RECORDS_FILE};
use visionweb::synthetic::{generate_tasks, GenSpec, SpanF, SyntheticBackend};

type CliResult<T> = Result<T, Box<dyn std::error::Error>>;

#[derive(Parser)]
#[command(name = "visionweb", version, about = "Vision-only single-click web agent benchmark")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a benchmark over a task manifest.
    Run(RunArgs),
    /// Generate a synthetic task manifest (one task per line).
    GenTasks(GenArgs),
    /// Rebuild the report of a finished run.
    Report {
        /// Run directory holding records.jsonl and exclusions.jsonl.
        #[arg(long)]
        run: PathBuf,
        /// Where to write the report; defaults to the run directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Export self-distillation samples as JSONL with PNG sidecars.
    DistillExport(DistillArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum BackendKind {
    Synthetic,
    Cdp,
}

#[derive(Clone, Copy, ValueEnum)]
enum AgentKind {
    Oracle,
    Noisy,
    Correcting,
    Premature,
    Remote,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum OnOff {
    On,
    Off,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormulationArg {
    Simplified,
    Humanlike,
}

impl From<FormulationArg> for Formulation {
    fn from(f: FormulationArg) -> Self {
        match f {
            FormulationArg::Simplified => Formulation::Simplified,
            FormulationArg::Humanlike => Formulation::HumanLike,
        }
    }
}

#[derive(Args)]
struct AgentArgs {
    #[arg(long, value_enum, default_value = "oracle")]
    agent: AgentKind,
    /// Gaussian noise of the first move for noisy/correcting agents, in pixels.
    #[arg(long, default_value_t = 5.0)]
    sigma: f64,
    #[arg(long, default_value_t = 0)]
    agent_seed: u64,
    /// TOML endpoint file for the remote agent; VISIONWEB_* variables otherwise.
    #[arg(long)]
    endpoint_config: Option<PathBuf>,
}

#[derive(Args)]
struct BackendArgs {
    #[arg(long, value_enum, default_value = "synthetic")]
    backend: BackendKind,
    /// DevTools endpoint (ws:// or http://host:port); a headless browser is launched if absent.
    #[arg(long)]
    cdp_endpoint: Option<String>,
    #[arg(long, default_value_t = 1280)]
    width: u32,
    #[arg(long, default_value_t = 800)]
    height: u32,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    tasks: PathBuf,
    #[command(flatten)]
    backend: BackendArgs,
    #[command(flatten)]
    agent: AgentArgs,
    #[arg(long, value_enum, default_value = "off")]
    trace: OnOff,
    #[arg(long, value_enum, default_value = "on")]
    guidance: OnOff,
    #[arg(long, value_enum, default_value = "simplified")]
    formulation: FormulationArg,
    #[arg(long, default_value_t = 5)]
    quota: u32,
    #[arg(long, default_value_t = 5)]
    reps: u32,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct GenArgs {
    #[arg(long)]
    count: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// GenSpec JSON; `--seed` overrides its seed.
    #[arg(long)]
    spec: Option<PathBuf>,
    /// Cursor distance range "MIN,MAX" in pixels.
    #[arg(long, value_parser = parse_span)]
    distance: Option<SpanF>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct DistillArgs {
    #[arg(long, value_parser = clap::value_parser!(u8).range(1..=2))]
    stage: u8,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value = "simplified")]
    formulation: FormulationArg,
    /// Stage 1: number of samples.
    #[arg(long, default_value_t = 1000)]
    count: u64,
    /// Stage 1: share of click cases; negative to let the distance range decide.
    #[arg(long, default_value_t = 0.5)]
    click_fraction: f64,
    /// Stage 1: cursor distance range "MIN,MAX".
    #[arg(long, value_parser = parse_span)]
    distance: Option<SpanF>,
    /// Stage 2: task manifest.
    #[arg(long)]
    tasks: Option<PathBuf>,
    #[arg(long, default_value_t = 5)]
    quota: u32,
    #[arg(long, default_value_t = 1)]
    reps: u32,
    #[command(flatten)]
    backend: BackendArgs,
    #[command(flatten)]
    agent: AgentArgs,
}

fn parse_span(s: &str) -> Result<SpanF, String> {
    let (a, b) = s.split_once(',').ok_or("expected MIN,MAX")?;
    let min: f64 = a.trim().parse().map_err(|e| format!("{e}"))?;
    let max: f64 = b.trim().parse().map_err(|e| format!("{e}"))?;
    if !(min.is_finite() && max.is_finite() && 0.0 <= min && min <= max) {
        return Err("need 0 <= MIN <= MAX".into());
    }
    Ok(SpanF::new(min, max))
}

/// Reads a manifest; relative snapshot paths are taken relative to it.
fn load_tasks(path: &Path) -> CliResult<Vec<TaskSpec>> {
    let base = path.parent().unwrap_or(Path::new(""));
    let mut tasks: Vec<TaskSpec> = read_jsonl(path)?;
    for t in &mut tasks {
        if let PageRef::Snapshot { path: p } = &mut t.page {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
    }
    Ok(tasks)
}

fn make_backend(args: &BackendArgs) -> CliResult<Box<dyn PageBackend>> {
    let viewport = Viewport::new(args.width, args.height)?;
    Ok(match args.backend {
        BackendKind::Synthetic => Box::new(SyntheticBackend::new(viewport)),
        BackendKind::Cdp => match &args.cdp_endpoint {
            Some(ep) => Box::new(CdpBackend::new(BrowserSession::connect(ep, viewport)?)),
            None => Box::new(CdpBackend::launch(viewport)?),
        },
    })
}

fn make_agent(args: &AgentArgs) -> CliResult<Box<dyn Agent>> {
    Ok(match args.agent {
        AgentKind::Oracle => Box::new(OracleAgent::new()),
        AgentKind::Noisy => Box::new(NoisyOracleAgent::new(args.sigma, args.agent_seed)),
        AgentKind::Correcting => Box::new(CorrectingOracleAgent::new(args.sigma, args.agent_seed)),
        AgentKind::Premature => Box::new(PrematureClickerAgent::new()),
        AgentKind::Remote => {
            let config = match &args.endpoint_config {
                Some(p) => RemoteEndpointConfig::from_toml_file(p)?,
                None => RemoteEndpointConfig::from_env()?,
            };
            Box::new(RemoteVlmAgent::new(config)?)
        }
    })
}

fn run(args: RunArgs) -> CliResult<ExitCode> {
    let config = RunConfig {
        trace_visible: args.trace == OnOff::On,
        guidance_present: args.guidance == OnOff::On,
        formulation: args.formulation.into(),
        step_quota: args.quota,
        repetitions: args.reps,
        seed: args.seed,
    };
    config.validate()?;
    let tasks = load_tasks(&args.tasks)?;
    let mut backend = make_backend(&args.backend)?;
    let mut agent = make_agent(&args.agent)?;
    std::fs::create_dir_all(&args.out)?;
    let mut sink = JsonlWriter::create(&args.out.join(RECORDS_FILE))?;
    let result = run_benchmark(&mut backend, &mut agent, &tasks, &config, Some(&mut sink))?;
    write_jsonl(&args.out.join(EXCLUSIONS_FILE), &result.exclusions)?;
    let files = emit_report(&result.records, &result.exclusions, &args.out)?;
    let failures = result.n_infra_failures();
    println!(
        "{} episodes over {} tasks ({} excluded); report: {}",
        result.records.len(),
        result.n_tasks,
        result.exclusions.len(),
        files.markdown.display()
    );
    if failures > 0 {
        eprintln!("{failures} episode(s) hit infrastructure failures");
        return Ok(ExitCode::FAILURE);
    }
    Ok(ExitCode::SUCCESS)
}

fn gen_tasks(args: GenArgs) -> CliResult<ExitCode> {
    let mut spec: GenSpec = match &args.spec {
        Some(p) => serde_json::from_str(&std::fs::read_to_string(p)?)?,
        None => GenSpec::default(),
    };
    spec.seed = args.seed;
    if let Some(d) = args.distance {
        spec.cursor_distance = d;
    }
    let tasks: Vec<TaskSpec> = generate_tasks(&spec, args.count)?.into_iter().map(|g| g.task).collect();
    write_jsonl(&args.out, &tasks)?;
    println!("wrote {} tasks to {}", tasks.len(), args.out.display());
    Ok(ExitCode::SUCCESS)
}

fn report(run: PathBuf, out: Option<PathBuf>) -> CliResult<ExitCode> {
    let (records, exclusions) = load_run(&run)?;
    let files = emit_report(&records, &exclusions, out.as_deref().unwrap_or(&run))?;
    println!("{}", std::fs::read_to_string(&files.markdown)?);
    Ok(ExitCode::SUCCESS)
}

fn distill_export(args: DistillArgs) -> CliResult<ExitCode> {
    let samples = if args.stage == 1 {
        let mut gen = GenSpec {
            seed: args.seed,
            ..GenSpec::default()
        };
        if let Some(d) = args.distance {
            gen.cursor_distance = d;
        }
        let mut cfg = Stage1Config::new(gen);
        cfg.click_fraction = (args.click_fraction >= 0.0).then_some(args.click_fraction.min(1.0));
        cfg.formulation = args.formulation.into();
        gen_stage1_samples(&cfg, args.count)?
    } else {
        let manifest = args.tasks.as_ref().ok_or("stage 2 needs --tasks")?;
        let tasks = load_tasks(manifest)?;
        let mut backend = make_backend(&args.backend)?;
        let mut agent = make_agent(&args.agent)?;
        let cfg = Stage2Config {
            formulation: args.formulation.into(),
            step_quota: args.quota,
            repetitions: args.reps,
            seed: args.seed,
        };
        collect_stage2(&mut backend, &mut agent, &tasks, &cfg)?
    };
    if let Some(dir) = args.out.parent() {
        std::fs::create_dir_all(dir)?;
    }
    export_jsonl(&samples, &args.out)?;
    println!("wrote {} stage-{} samples to {}", samples.len(), args.stage, args.out.display());
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(a) => run(a),
        Command::GenTasks(a) => gen_tasks(a),
        Command::Report { run, out } => report(run, out),
        Command::DistillExport(a) => distill_export(a),
    };
    result.unwrap_or_else(|e| {
        eprintln!("error: {e}");
        ExitCode::from(2)
    })
}
