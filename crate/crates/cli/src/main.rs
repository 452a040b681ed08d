//! `dgui` command-line tool.
//!
//! Exit codes: 0 success, 1 validation error (bad arguments or input
//! files), 2 runtime fault.

use std::fs::File;
use std::io::{self, BufReader, BufWriter, Write};
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use dgui::bench::{run_oracle, BenchOptions, OracleConfig, OraclePolicy, Phase};
use dgui::latency::measure_latency;
use dgui::registry::Registry;
use dgui::runtime::{ClosedLoop, GazeInput};
use dgui::session::{replay, replay_events, write_event_log, Recorder, SessionError};
use dgui::sim::{load_pipeline_config, parse_json, NoiseConfig, SceneConfig, World};
use dgui_service::{serve, ServeError, ServeOptions};

#[derive(Parser)]
#[command(name = "dgui", version, about = "Gaze-driven diegetic robot interface runtime")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a benchmark with the scripted oracle.
    Bench {
        #[command(subcommand)]
        which: Bench,
    },
    /// Re-run a recorded session and print the input event log.
    Replay {
        #[arg(long = "in")]
        input: PathBuf,
        /// Directory with markers.csv, buttons.csv, offsets.csv and pipeline.json.
        #[arg(long)]
        registry: PathBuf,
    },
    /// Record a session driven by a policy.
    Record {
        #[arg(long)]
        scene: PathBuf,
        #[arg(long, value_enum, default_value_t = PolicyKind::Oracle)]
        policy: PolicyKind,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        /// Stop after this much simulated time even if the task is unfinished.
        #[arg(long, default_value_t = 300)]
        max_seconds: u64,
    },
    /// Per-stage latency of the frame pipeline.
    Latency {
        #[arg(long)]
        scene: PathBuf,
        #[arg(long, default_value_t = 60)]
        seconds: u64,
        #[arg(long)]
        json: bool,
    },
    /// Serve the live session over WebSocket at /session.
    Serve {
        #[arg(long)]
        scene: PathBuf,
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: std::net::IpAddr,
    },
}

#[derive(Subcommand)]
enum Bench {
    /// Eight-block pick and place onto the stencil.
    Ycb(YcbArgs),
}

#[derive(Args)]
struct YcbArgs {
    #[arg(long)]
    scene: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    /// JSON file overriding the scene's noise settings.
    #[arg(long)]
    noise: Option<PathBuf>,
    #[arg(long, conflicts_with = "table")]
    json: bool,
    #[arg(long)]
    table: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum PolicyKind {
    Oracle,
}

/// Failure split by exit code.
enum Failure {
    Validation(String),
    Runtime(String),
}

impl Failure {
    fn validation(e: impl std::fmt::Display) -> Self {
        Failure::Validation(e.to_string())
    }
    fn runtime(e: impl std::fmt::Display) -> Self {
        Failure::Runtime(e.to_string())
    }
}

fn load_scene(path: &Path, seed: Option<u64>) -> Result<SceneConfig, Failure> {
    let scene = SceneConfig::load(path).map_err(Failure::validation)?;
    Ok(match seed {
        Some(s) => scene.with_seed(s),
        None => scene,
    })
}

fn bench_ycb(args: YcbArgs) -> Result<(), Failure> {
    let mut scene = load_scene(&args.scene, args.seed)?;
    if let Some(path) = &args.noise {
        let text = std::fs::read_to_string(path).map_err(|e| Failure::Validation(format!("reading {}: {e}", path.display())))?;
        let noise: NoiseConfig = parse_json(path, &text).map_err(Failure::validation)?;
        scene = scene.with_noise(noise).map_err(Failure::validation)?;
    }
    let report = run_oracle(&scene, &BenchOptions::default()).map_err(Failure::runtime)?;
    if args.json {
        println!("{}", report.to_json());
    } else {
        print!("{}", report.to_table());
    }
    Ok(())
}

fn replay_cmd(input: &Path, registry_dir: &Path) -> Result<(), Failure> {
    let registry = Registry::load_dir(registry_dir).map_err(Failure::validation)?;
    let config = load_pipeline_config(registry_dir).map_err(Failure::validation)?;
    let file = File::open(input).map_err(|e| Failure::Validation(format!("reading {}: {e}", input.display())))?;
    let events = replay_events(replay(BufReader::new(file)), &registry, &config).map_err(|e| match e {
        SessionError::Input(_) => Failure::runtime(e),
        _ => Failure::Validation(format!("{}: {e}", input.display())),
    })?;
    let mut out = BufWriter::new(io::stdout().lock());
    write_event_log(&mut out, &events)
        .and_then(|_| out.flush())
        .map_err(Failure::runtime)
}

fn record_cmd(scene: &Path, out: &Path, seed: Option<u64>, max_seconds: u64) -> Result<(), Failure> {
    let scene = load_scene(scene, seed)?;
    let mut policy = OraclePolicy::new(&scene.registry, OracleConfig::default()).map_err(Failure::validation)?;
    let mut lp = ClosedLoop::new(World::new(scene)).map_err(Failure::validation)?;
    let file = File::create(out).map_err(|e| Failure::Validation(format!("creating {}: {e}", out.display())))?;
    let mut rec = Recorder::new(BufWriter::new(file));
    let limit = max_seconds * 1000;
    let mut frames = 0u64;
    while lp.state.t < limit {
        let gaze = policy.decide(&lp).map_err(Failure::runtime)?;
        let step = lp.frame(GazeInput::Target(gaze)).map_err(Failure::runtime)?;
        rec.write(&step.record).map_err(Failure::runtime)?;
        frames += 1;
        if policy.phase == Phase::Done && lp.pipeline.snapshot().iter().all(|a| a.a == 0.0) {
            break;
        }
    }
    rec.into_inner().flush().map_err(Failure::runtime)?;
    eprintln!("recorded {frames} frames ({:.2} s) to {}", lp.state.t as f64 / 1000.0, out.display());
    Ok(())
}

fn latency_cmd(scene: &Path, seconds: u64, json: bool) -> Result<(), Failure> {
    let scene = load_scene(scene, None)?;
    let report = measure_latency(&scene, seconds).map_err(Failure::runtime)?;
    if json {
        println!("{}", serde_json::to_string_pretty(&report).map_err(Failure::runtime)?);
    } else {
        print!("{}", report.to_table());
    }
    Ok(())
}

fn serve_cmd(scene: &Path, host: std::net::IpAddr, port: u16) -> Result<(), Failure> {
    let scene = load_scene(scene, None)?;
    let addr = SocketAddr::new(host, port);
    let runtime = tokio::runtime::Runtime::new().map_err(Failure::runtime)?;
    eprintln!("serving ws://{addr}/session");
    runtime.block_on(serve(addr, scene, ServeOptions::default())).map_err(|e| match e {
        ServeError::Bind(_) | ServeError::Servo(_) => Failure::validation(e),
        _ => Failure::runtime(e),
    })
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Bench { which: Bench::Ycb(args) } => bench_ycb(args),
        Command::Replay { input, registry } => replay_cmd(&input, &registry),
        Command::Record {
            scene,
            policy: PolicyKind::Oracle,
            out,
            seed,
            max_seconds,
        } => record_cmd(&scene, &out, seed, max_seconds),
        Command::Latency { scene, seconds, json } => latency_cmd(&scene, seconds, json),
        Command::Serve { scene, port, host } => serve_cmd(&scene, host, port),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Validation(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("fault: {msg}");
            ExitCode::from(2)
        }
    }
}
