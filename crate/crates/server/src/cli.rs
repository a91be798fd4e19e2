//! Command-line front end. Exit codes: 0 success, 1 domain violation,
//! 2 I/O or parse failure (clap usage errors also exit 2).

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use plmflow::model::{validate_process_model, ProcessModel};
use plmflow::scenario::run_scenario;
use plmflow::store::{StoreError, Workspace};
use plmflow::Timestamp;

use crate::{router_with, AppState, ServerOptions};

#[derive(Debug, Parser)]
#[command(name = "plmflow", version, about = "Lifecycle-bound process engine")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Validate a model document and print the violation report.
    Validate { model: PathBuf },
    /// Serve the HTTP API over a workspace.
    Serve {
        #[arg(long)]
        workspace: PathBuf,
        #[arg(long, default_value_t = 8080)]
        port: u16,
        /// Origin allowed by CORS, e.g. http://localhost:5173
        #[arg(long)]
        ui_origin: Option<String>,
        /// Directory of built UI assets to serve at /
        #[arg(long)]
        ui_dir: Option<PathBuf>,
    },
    /// Replay the event log and print a summary of every instance.
    Replay {
        #[arg(long)]
        workspace: PathBuf,
    },
    /// Run a scenario file into a fresh workspace.
    RunScenario {
        scenario: PathBuf,
        #[arg(long)]
        workspace: PathBuf,
    },
    /// Evaluate every installed indicator.
    Indicators {
        #[arg(long)]
        workspace: PathBuf,
        /// RFC 3339 timestamp; defaults to now
        #[arg(long, value_parser = parse_ts)]
        as_of: Option<Timestamp>,
        #[arg(long, value_enum, default_value_t = Format::Csv)]
        format: Format,
    },
    /// Write snapshot.json for the current state of a workspace.
    Snapshot {
        #[arg(long)]
        workspace: PathBuf,
    },
}

fn parse_ts(s: &str) -> Result<Timestamp, String> {
    Timestamp::parse(s).map_err(|e| e.to_string())
}

fn store_failure(e: &StoreError) -> ExitCode {
    eprintln!("error: {e}");
    if e.is_io_or_parse() {
        ExitCode::from(2)
    } else {
        ExitCode::from(1)
    }
}

/// Runs one command, writing its report to `out`.
pub fn run(cli: Cli, out: &mut dyn Write) -> ExitCode {
    match cli.command {
        Command::Validate { model } => validate(model, out),
        Command::Serve { workspace, port, ui_origin, ui_dir } => {
            serve(workspace, port, ServerOptions { ui_origin, ui_dir })
        }
        Command::Replay { workspace } => match Workspace::open(&workspace) {
            Ok(ws) => {
                let _ = out.write_all(summary(&ws).as_bytes());
                ExitCode::SUCCESS
            }
            Err(e) => store_failure(&e),
        },
        Command::RunScenario { scenario, workspace } => match run_scenario(&scenario, &workspace) {
            Ok(report) => {
                let _ = writeln!(
                    out,
                    "{} steps, {} events, {} instances written to {}",
                    report.steps,
                    report.events,
                    report.instances.len(),
                    workspace.display()
                );
                ExitCode::SUCCESS
            }
            Err(e) => {
                eprintln!("error: {e}");
                ExitCode::from(if e.is_domain() { 1 } else { 2 })
            }
        },
        Command::Indicators { workspace, as_of, format } => match Workspace::open(&workspace) {
            Ok(ws) => {
                let card = ws.engine().scorecard(as_of.unwrap_or_else(Timestamp::now));
                let text = match format {
                    Format::Csv => card.to_csv(),
                    Format::Json => card.to_json_pretty() + "\n",
                };
                let _ = out.write_all(text.as_bytes());
                ExitCode::SUCCESS
            }
            Err(e) => store_failure(&e),
        },
        Command::Snapshot { workspace } => match Workspace::open_writer(&workspace).and_then(|ws| ws.snapshot()) {
            Ok(path) => {
                let _ = writeln!(out, "wrote {}", path.display());
                ExitCode::SUCCESS
            }
            Err(e) => store_failure(&e),
        },
    }
}

fn validate(path: PathBuf, out: &mut dyn Write) -> ExitCode {
    let text = match std::fs::read_to_string(&path) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: {}: {e}", path.display());
            return ExitCode::from(2);
        }
    };
    let model = match ProcessModel::from_json(&text) {
        Ok(m) => m,
        Err(e) => {
            eprintln!("error: {}: {e}", path.display());
            return ExitCode::from(2);
        }
    };
    let violations = validate_process_model(&model);
    if violations.is_empty() {
        let _ = writeln!(out, "{} v{}: valid", model.name, model.version);
        return ExitCode::SUCCESS;
    }
    let _ = writeln!(out, "{} v{}: {} violation(s)", model.name, model.version, violations.len());
    for v in &violations {
        let _ = writeln!(out, "  {v}");
    }
    ExitCode::from(1)
}

/// One line per instance: id, model, status, then each context entity's state.
pub fn summary(ws: &Workspace) -> String {
    let engine = ws.engine();
    let state = engine.state();
    let running = state.instances.values().filter(|i| i.is_running()).count();
    let mut text = format!(
        "{} instances ({} running, {} completed), {} events\n",
        state.instances.len(),
        running,
        state.instances.len() - running,
        engine.events().len()
    );
    for inst in state.instances.values() {
        let status = serde_json::to_value(inst.status).ok();
        let status = status.as_ref().and_then(|v| v.as_str()).unwrap_or("?");
        let entities: Vec<String> = state.entities_of(inst).map(|e| format!("{}={}", e.entity_type, e.state)).collect();
        text.push_str(&format!("{} {} {} {}\n", inst.id, inst.model, status, entities.join(" ")));
    }
    text
}

fn serve(workspace: PathBuf, port: u16, options: ServerOptions) -> ExitCode {
    let ws = match Workspace::open_writer(&workspace) {
        Ok(ws) => ws,
        Err(e) => return store_failure(&e),
    };
    let runtime = match tokio::runtime::Runtime::new() {
        Ok(rt) => rt,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    let app = router_with(AppState::new(ws), &options);
    let result = runtime.block_on(async move {
        let listener = tokio::net::TcpListener::bind(("0.0.0.0", port)).await?;
        eprintln!("listening on {}", listener.local_addr()?);
        axum::serve(listener, app).with_graceful_shutdown(shutdown()).await
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

async fn shutdown() {
    let _ = tokio::signal::ctrl_c().await;
}
