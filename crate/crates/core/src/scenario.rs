//! Scripted runs against a fresh workspace.
//!
//! A scenario is a JSON array of steps `{"op", "args", "at"}`. File paths in
//! `args` are resolved against the scenario file's directory. See
//! `docs/scenario.md` for the operations.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::engine::Attributes;
use crate::ids::InstanceId;
use crate::indicators::IndicatorDef;
use crate::model::ProcessModel;
use crate::store::{StoreError, Workspace, LOG_FILE, MODELS_DIR};
use crate::time::Timestamp;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Op {
    Publish,
    InstallIndicators,
    Instantiate,
    Perform,
    Attest,
    Evaluate,
    Migrate,
    Snapshot,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Step {
    pub op: Op,
    #[serde(default)]
    pub args: Value,
    #[serde(default)]
    pub at: Option<Timestamp>,
    /// Error code the step must fail with; the run continues afterwards.
    #[serde(default)]
    pub expect_error: Option<String>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct PublishArgs {
    model_file: PathBuf,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct InstallArgs {
    file: PathBuf,
    #[serde(default)]
    pack: Option<String>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct InstantiateArgs {
    #[serde(default)]
    label: Option<String>,
    model: String,
    #[serde(default)]
    version: Option<u32>,
    #[serde(default)]
    attributes: Attributes,
    #[serde(default)]
    actor: Option<String>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct PerformArgs {
    instance: String,
    activity: String,
    actor: String,
    #[serde(default)]
    parameters: Attributes,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct AttestArgs {
    instance: String,
    objective: String,
    actor: String,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct EvaluateArgs {
    instance: String,
    objective: String,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct MigrateArgs {
    instance: String,
    to_version: u32,
    actor: String,
}

#[derive(Debug, thiserror::Error)]
pub enum ScenarioError {
    #[error("cannot read scenario {}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("scenario {}: {reason}", path.display())]
    Parse { path: PathBuf, reason: String },
    #[error("step {step} ({op:?}): {reason}")]
    BadStep { step: usize, op: Op, reason: String },
    #[error("workspace {} is not fresh (it already has models or events)", .0.display())]
    NotFresh(PathBuf),
    #[error("step {step} ({op:?}): {source}")]
    Failed { step: usize, op: Op, source: StoreError },
    #[error("step {step} ({op:?}): expected error {expected} but got {actual}")]
    UnexpectedOutcome { step: usize, op: Op, expected: String, actual: String },
    #[error(transparent)]
    Workspace(#[from] StoreError),
}

impl ScenarioError {
    /// True when the failure is a domain rule rather than I/O or parsing.
    pub fn is_domain(&self) -> bool {
        match self {
            ScenarioError::Failed { source, .. } | ScenarioError::Workspace(source) => !source.is_io_or_parse(),
            ScenarioError::UnexpectedOutcome { .. } => true,
            _ => false,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ScenarioReport {
    pub steps: usize,
    pub events: usize,
    pub instances: BTreeMap<String, InstanceId>,
}

pub fn load_steps(path: &Path) -> Result<Vec<Step>, ScenarioError> {
    let text =
        std::fs::read_to_string(path).map_err(|source| ScenarioError::Io { path: path.to_path_buf(), source })?;
    serde_json::from_str(&text).map_err(|e| ScenarioError::Parse { path: path.to_path_buf(), reason: e.to_string() })
}

/// Runs the scenario file into `workspace`, which is created if missing and
/// must not already hold models or events.
pub fn run_scenario(path: &Path, workspace: &Path) -> Result<ScenarioReport, ScenarioError> {
    let steps = load_steps(path)?;
    std::fs::create_dir_all(workspace).map_err(|source| ScenarioError::Io { path: workspace.to_path_buf(), source })?;
    let has_models = std::fs::read_dir(workspace.join(MODELS_DIR)).is_ok_and(|mut d| d.next().is_some());
    let has_events = std::fs::metadata(workspace.join(LOG_FILE)).is_ok_and(|m| m.len() > 0);
    if has_models || has_events {
        return Err(ScenarioError::NotFresh(workspace.to_path_buf()));
    }
    let mut ws = Workspace::open_writer(workspace)?;
    let base = path.parent().unwrap_or(Path::new("."));
    run_steps(&mut ws, &steps, base)
}

/// Executes steps against an open writer workspace.
pub fn run_steps(ws: &mut Workspace, steps: &[Step], base: &Path) -> Result<ScenarioReport, ScenarioError> {
    let mut report = ScenarioReport::default();
    for (idx, step) in steps.iter().enumerate() {
        let number = idx + 1;
        let outcome = run_step(ws, step, base, &mut report.instances, number)?;
        match (&step.expect_error, outcome) {
            (None, Ok(())) => {}
            (None, Err(source)) => return Err(ScenarioError::Failed { step: number, op: step.op, source }),
            (Some(expected), Ok(())) => {
                return Err(ScenarioError::UnexpectedOutcome {
                    step: number,
                    op: step.op,
                    expected: expected.clone(),
                    actual: "success".into(),
                })
            }
            (Some(expected), Err(err)) => {
                let actual = match &err {
                    StoreError::Engine(e) => e.code().to_string(),
                    other => other.to_string(),
                };
                if &actual != expected {
                    return Err(ScenarioError::UnexpectedOutcome {
                        step: number,
                        op: step.op,
                        expected: expected.clone(),
                        actual,
                    });
                }
            }
        }
        report.steps += 1;
    }
    report.events = ws.engine().events().len();
    Ok(report)
}

fn args<T: DeserializeOwned>(step: &Step, number: usize) -> Result<T, ScenarioError> {
    let value = if step.args.is_null() { Value::Object(Default::default()) } else { step.args.clone() };
    serde_json::from_value(value).map_err(|e| ScenarioError::BadStep {
        step: number,
        op: step.op,
        reason: e.to_string(),
    })
}

fn at(step: &Step, number: usize) -> Result<Timestamp, ScenarioError> {
    step.at.ok_or_else(|| ScenarioError::BadStep { step: number, op: step.op, reason: "missing \"at\"".into() })
}

fn read_json<T: DeserializeOwned>(path: &Path, step: &Step, number: usize) -> Result<T, ScenarioError> {
    let text =
        std::fs::read_to_string(path).map_err(|source| ScenarioError::Io { path: path.to_path_buf(), source })?;
    serde_json::from_str(&text).map_err(|e| ScenarioError::BadStep {
        step: number,
        op: step.op,
        reason: format!("{}: {e}", path.display()),
    })
}

fn instance_id(labels: &BTreeMap<String, InstanceId>, key: &str) -> InstanceId {
    labels.get(key).cloned().unwrap_or_else(|| InstanceId::new(key))
}

/// Outer error: the step itself is malformed. Inner error: the operation failed.
fn run_step(
    ws: &mut Workspace,
    step: &Step,
    base: &Path,
    labels: &mut BTreeMap<String, InstanceId>,
    number: usize,
) -> Result<Result<(), StoreError>, ScenarioError> {
    Ok(match step.op {
        Op::Publish => {
            let a: PublishArgs = args(step, number)?;
            let model: ProcessModel = read_json(&base.join(a.model_file), step, number)?;
            ws.publish_model(model).map(|_| ())
        }
        Op::InstallIndicators => {
            let a: InstallArgs = args(step, number)?;
            let path = base.join(&a.file);
            let defs: Vec<IndicatorDef> = read_json(&path, step, number)?;
            let pack = a.pack.unwrap_or_else(|| {
                path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "indicators".into())
            });
            ws.install_indicators(&pack, defs)
        }
        Op::Instantiate => {
            let a: InstantiateArgs = args(step, number)?;
            let at = at(step, number)?;
            let result = ws.engine_mut().and_then(|e| {
                e.instantiate(&a.model, a.version, a.attributes, a.actor.as_deref(), at).map_err(Into::into)
            });
            result.map(|view| {
                if let Some(label) = a.label {
                    labels.insert(label, view.instance.id);
                }
            })
        }
        Op::Perform => {
            let a: PerformArgs = args(step, number)?;
            let at = at(step, number)?;
            let id = instance_id(labels, &a.instance);
            ws.engine_mut().and_then(|e| {
                let actor = e.actor(&a.actor);
                e.perform_activity(&id, &a.activity, &actor, a.parameters, at).map(|_| ()).map_err(Into::into)
            })
        }
        Op::Attest => {
            let a: AttestArgs = args(step, number)?;
            let at = at(step, number)?;
            let id = instance_id(labels, &a.instance);
            ws.engine_mut().and_then(|e| {
                let actor = e.actor(&a.actor);
                e.attest_objective(&a.objective, &id, &actor, at).map(|_| ()).map_err(Into::into)
            })
        }
        Op::Evaluate => {
            let a: EvaluateArgs = args(step, number)?;
            let at = at(step, number)?;
            let id = instance_id(labels, &a.instance);
            ws.engine_mut().and_then(|e| e.evaluate_objective(&a.objective, &id, at).map(|_| ()).map_err(Into::into))
        }
        Op::Migrate => {
            let a: MigrateArgs = args(step, number)?;
            let at = at(step, number)?;
            let id = instance_id(labels, &a.instance);
            ws.engine_mut()
                .and_then(|e| e.migrate_instance(&id, a.to_version, &a.actor, at).map(|_| ()).map_err(Into::into))
        }
        Op::Snapshot => ws.snapshot().map(|_| ()),
    })
}
