//! Console front end: an interactive loop and a batch transcript runner.

use std::io::{BufRead, IsTerminal, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;
use std::time::Duration;

use clap::Parser;
use psa_core::interpreter::Pacing;
use psa_core::meta::MetaOutput;
use psa_core::service::{EventRecord, RunState, ServerEvent, SessionManager};
use psa_core::transcript::{run_transcript, Transcript};
use psa_core::world::{DoorStatus, EntityId, WorldModel, DEFAULT_CONFIG};

#[derive(Debug, Parser)]
#[command(name = "psa", version, about = "Talk to the simulated personal satellite assistant")]
pub struct Args {
    /// World configuration (TOML). Defaults to the shipped Shuttle model.
    #[arg(long, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Print each pipeline stage and its meta-outputs.
    #[arg(long)]
    pub trace: bool,
    /// Replay a transcript and diff it against the system's behaviour.
    #[arg(long, value_name = "PATH")]
    pub transcript: Option<PathBuf>,
    /// `instant` or `scaled:<rate>`. Transcripts always run instant.
    #[arg(long, value_parser = parse_pacing)]
    pub pacing: Option<Pacing>,
}

fn parse_pacing(s: &str) -> Result<Pacing, String> {
    Pacing::parse(s).map_err(|e| e.to_string())
}

const USAGE_ERROR: u8 = 2;

fn fail(message: impl std::fmt::Display) -> ExitCode {
    eprintln!("error: {message}");
    ExitCode::from(USAGE_ERROR)
}

fn read(path: &Path) -> Result<String, String> {
    std::fs::read_to_string(path).map_err(|e| format!("cannot read {}: {e}", path.display()))
}

pub fn run(args: Args) -> ExitCode {
    let config = match &args.config {
        Some(path) => match read(path) {
            Ok(text) => text,
            Err(e) => return fail(e),
        },
        None => DEFAULT_CONFIG.to_string(),
    };
    let model = match WorldModel::from_toml(&config) {
        Ok(m) => Arc::new(m),
        Err(e) => return fail(format!("invalid config at `{}`: {}", e.path, e.detail)),
    };
    match &args.transcript {
        Some(path) => batch(path, &config),
        None => {
            let stdin = std::io::stdin();
            let interactive = stdin.is_terminal();
            repl(&args, &config, model, stdin.lock(), interactive)
        }
    }
}

fn batch(path: &Path, config: &str) -> ExitCode {
    let text = match read(path) {
        Ok(t) => t,
        Err(e) => return fail(e),
    };
    let transcript = match Transcript::parse(&text) {
        Ok(t) => t,
        Err(e) => return fail(format!("{}: {e}", path.display())),
    };
    let report = match run_transcript(&transcript, Some(config)) {
        Ok(r) => r,
        Err(e) => return fail(format!("{}: {e}", path.display())),
    };
    if report.passed() {
        println!("ok: {} turns match ({:.3}s)", transcript.turns().len(), report.elapsed.as_secs_f64());
        ExitCode::SUCCESS
    } else {
        print!("{}", report.diff());
        ExitCode::from(1)
    }
}

/// Turns session events into console lines.
#[derive(Debug, Default)]
pub struct Printer {
    pub trace: bool,
    moving_to: Option<EntityId>,
}

impl Printer {
    pub fn new(trace: bool) -> Printer {
        Printer { trace, moving_to: None }
    }

    pub fn lines(&mut self, record: &EventRecord, model: &WorldModel) -> Vec<String> {
        match &record.event {
            ServerEvent::SystemUtterance { text } => vec![format!("PSA: {text}")],
            ServerEvent::RobotMoved { arrived: true, label, .. } => {
                self.moving_to = None;
                vec![format!("[PSA moves to {label}]")]
            }
            ServerEvent::RobotMoved { arrived: false, destination, .. } => {
                if self.moving_to.as_ref() == Some(destination) {
                    return Vec::new();
                }
                self.moving_to = Some(destination.clone());
                vec![format!("[PSA starts moving to {}]", model.label(destination))]
            }
            ServerEvent::DoorChanged { door, status } => {
                let verb = if *status == DoorStatus::Closed { "closes" } else { "opens" };
                vec![format!("[PSA {verb} {}]", model.label(door))]
            }
            ServerEvent::ExecutionStatus { status: RunState::Interrupted } => {
                self.moving_to = None;
                vec!["[PSA stops]".to_string()]
            }
            ServerEvent::TraceRecord { stage, summary, meta } if self.trace => trace_lines(stage, summary, meta),
            _ => Vec::new(),
        }
    }
}

/// `--trace` output for one stage.
pub fn trace_lines(stage: &str, summary: &str, meta: &[MetaOutput]) -> Vec<String> {
    let mut out = Vec::new();
    if stage != "resolve" || meta.is_empty() {
        out.push(format!("{stage}: {summary}"));
    }
    for m in meta {
        match m {
            MetaOutput::Resolution(note) => out.push(format!("{stage}: {note}")),
            MetaOutput::PresupFailure(f) => out.push(format!("{stage}: {f}")),
            MetaOutput::Cost(_) => {}
        }
    }
    out
}

/// Reads utterances from `input` until end of input, printing everything
/// the session emits to stdout.
pub fn repl(args: &Args, config: &str, model: Arc<WorldModel>, input: impl BufRead, interactive: bool) -> ExitCode {
    let manager = match SessionManager::with_config(config) {
        Ok(m) => m,
        Err(e) => return fail(e),
    };
    let manager = match args.pacing {
        Some(p) => manager.with_pacing(p),
        None => manager,
    };
    let session = match manager.create_session() {
        Ok(s) => s,
        Err(e) => return fail(e),
    };
    let events = manager.subscribe(&session).expect("session just created");
    let mut printer = Printer::new(args.trace);
    let printer_model = model.clone();
    let printing = std::thread::spawn(move || {
        let stdout = std::io::stdout();
        for record in events {
            let mut out = stdout.lock();
            for line in printer.lines(&record, &printer_model) {
                let _ = writeln!(out, "{line}");
            }
            let _ = out.flush();
        }
    });
    if interactive {
        println!("PSA ready at the {}. Ctrl-D to quit.", model.label(model.start()));
    }
    for line in input.lines() {
        let Ok(line) = line else { break };
        if line.trim().is_empty() {
            continue;
        }
        if let Err(e) = manager.post_utterance(&session, &line) {
            eprintln!("error: {e}");
        }
    }
    while !manager.wait_idle(&session, Duration::from_secs(60)).unwrap_or(true) {}
    drop(manager);
    let _ = printing.join();
    ExitCode::SUCCESS
}
