//! On-disk workspace.
//!
//! ```text
//! <root>/models/*.json        published model versions
//! <root>/indicators/*.json    indicator packs (JSON arrays of definitions)
//! <root>/events.ndjson        the trace log
//! <root>/snapshot.json        optional derived state at some seq
//! <root>/LOCK                 present while a writer holds the workspace
//! ```

use std::fs::{self, File, OpenOptions};
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::engine::{Engine, EngineError, EngineState};
use crate::indicators::{IndicatorDef, IndicatorSet};
use crate::model::{validate_process_model, ModelRef, ModelRegistry, ProcessModel, Violation};
use crate::trace::{parse_ndjson, EventSink, TraceError, TraceEvent};

pub const MODELS_DIR: &str = "models";
pub const INDICATORS_DIR: &str = "indicators";
pub const LOG_FILE: &str = "events.ndjson";
pub const SNAPSHOT_FILE: &str = "snapshot.json";
pub const LOCK_FILE: &str = "LOCK";

#[derive(Debug, thiserror::Error)]
pub enum StoreError {
    #[error("workspace root {0} does not exist")]
    MissingRoot(PathBuf),
    #[error("corrupt log at line {line}: {reason}")]
    CorruptLog { line: usize, reason: String },
    #[error("{}: model failed validation: {}", path.display(), violations.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; "))]
    ValidationFailed { path: PathBuf, violations: Vec<Violation> },
    #[error("snapshot covers seq {snapshot_seq} but the log ends at {log_seq}")]
    StaleSnapshot { snapshot_seq: u64, log_seq: u64 },
    #[error("workspace {0} is locked by another writer")]
    Locked(PathBuf),
    #[error("workspace was opened read-only")]
    ReadOnly,
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: io::Error },
    #[error("{}: {reason}", path.display())]
    Parse { path: PathBuf, reason: String },
    #[error(transparent)]
    Engine(#[from] EngineError),
}

impl StoreError {
    fn io(path: &Path, source: io::Error) -> Self {
        StoreError::Io { path: path.to_path_buf(), source }
    }

    /// True for I/O and parse problems, as opposed to domain violations.
    pub fn is_io_or_parse(&self) -> bool {
        matches!(
            self,
            StoreError::MissingRoot(_)
                | StoreError::Io { .. }
                | StoreError::Parse { .. }
                | StoreError::CorruptLog { .. }
        )
    }
}

impl From<TraceError> for StoreError {
    fn from(e: TraceError) -> Self {
        match e {
            TraceError::CorruptLog { line, seq, reason } => {
                StoreError::CorruptLog { line: line.or(seq.map(|s| s as usize)).unwrap_or(0), reason }
            }
            other => StoreError::Engine(other.into()),
        }
    }
}

#[derive(Serialize, Deserialize)]
struct Snapshot {
    seq: u64,
    state: EngineState,
}

/// Appends events to `events.ndjson`, syncing each batch. A failed write is
/// rolled back by truncating to the previous length.
struct FileSink {
    path: PathBuf,
    file: File,
}

impl EventSink for FileSink {
    fn persist(&mut self, events: &[TraceEvent]) -> io::Result<()> {
        let mut buf = String::new();
        for e in events {
            buf.push_str(&e.to_line());
            buf.push('\n');
        }
        let before = self.file.metadata()?.len();
        let written = self.file.write_all(buf.as_bytes()).and_then(|_| self.file.sync_data());
        if let Err(e) = written {
            let _ = self.file.set_len(before);
            return Err(io::Error::new(e.kind(), format!("{}: {e}", self.path.display())));
        }
        Ok(())
    }
}

struct Lock(PathBuf);

impl Drop for Lock {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.0);
    }
}

pub struct Workspace {
    root: PathBuf,
    engine: Engine,
    lock: Option<Lock>,
}

impl std::fmt::Debug for Workspace {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Workspace")
            .field("root", &self.root)
            .field("writer", &self.lock.is_some())
            .field("engine", &self.engine)
            .finish()
    }
}

impl Workspace {
    /// Opens a workspace for reading. No lock is taken and the engine
    /// cannot be mutated.
    pub fn open(root: impl AsRef<Path>) -> Result<Self, StoreError> {
        let root = root.as_ref().to_path_buf();
        let engine = load(&root)?;
        Ok(Workspace { root, engine, lock: None })
    }

    /// Opens a workspace for writing, creating its directories if needed.
    /// Fails with `Locked` while another writer holds it.
    pub fn open_writer(root: impl AsRef<Path>) -> Result<Self, StoreError> {
        let root = root.as_ref().to_path_buf();
        if !root.is_dir() {
            return Err(StoreError::MissingRoot(root));
        }
        let lock_path = root.join(LOCK_FILE);
        match OpenOptions::new().write(true).create_new(true).open(&lock_path) {
            Ok(mut f) => {
                let _ = writeln!(f, "{}", std::process::id());
            }
            Err(e) if e.kind() == io::ErrorKind::AlreadyExists => return Err(StoreError::Locked(root)),
            Err(e) => return Err(StoreError::io(&lock_path, e)),
        }
        let lock = Lock(lock_path);
        for dir in [MODELS_DIR, INDICATORS_DIR] {
            let p = root.join(dir);
            fs::create_dir_all(&p).map_err(|e| StoreError::io(&p, e))?;
        }
        let mut engine = load(&root)?;
        let log_path = root.join(LOG_FILE);
        let file =
            OpenOptions::new().create(true).append(true).open(&log_path).map_err(|e| StoreError::io(&log_path, e))?;
        engine.set_sink(Box::new(FileSink { path: log_path, file }));
        Ok(Workspace { root, engine, lock: Some(lock) })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn is_writer(&self) -> bool {
        self.lock.is_some()
    }

    pub fn engine(&self) -> &Engine {
        &self.engine
    }

    /// Mutable engine; every committed event goes to `events.ndjson` first.
    pub fn engine_mut(&mut self) -> Result<&mut Engine, StoreError> {
        if self.lock.is_none() {
            return Err(StoreError::ReadOnly);
        }
        Ok(&mut self.engine)
    }

    /// Publishes a model version and writes it to `models/{name}-v{version}.json`.
    pub fn publish_model(&mut self, model: ProcessModel) -> Result<ModelRef, StoreError> {
        let path = self.root.join(MODELS_DIR).join(format!("{}-v{}.json", model.name, model.version));
        let text = model.to_json_pretty();
        let reference = self.engine_mut()?.publish_model(model)?;
        write_file(&path, &text)?;
        Ok(reference)
    }

    /// Installs an indicator pack and writes it to `indicators/{pack}.json`.
    pub fn install_indicators(&mut self, pack: &str, defs: Vec<IndicatorDef>) -> Result<(), StoreError> {
        let path = self.root.join(INDICATORS_DIR).join(format!("{pack}.json"));
        let text = serde_json::to_string_pretty(&defs).expect("indicator definitions serialize");
        self.engine_mut()?.install_indicators(defs)?;
        write_file(&path, &format!("{text}\n"))
    }

    /// Writes the current state to `snapshot.json`.
    pub fn snapshot(&self) -> Result<PathBuf, StoreError> {
        let path = self.root.join(SNAPSHOT_FILE);
        let snap = Snapshot { seq: self.engine.state().last_seq, state: self.engine.state().clone() };
        let text = serde_json::to_string(&snap).expect("state serializes");
        write_file(&path, &text)?;
        Ok(path)
    }

    /// Reads `snapshot.json`, if any, checking it against the log length.
    pub fn load_snapshot(&self) -> Result<Option<EngineState>, StoreError> {
        read_snapshot(&self.root, self.engine.log().last_seq())
    }
}

fn write_file(path: &Path, text: &str) -> Result<(), StoreError> {
    // Write to a sibling and rename so readers never see a partial document.
    let tmp = path.with_extension("json.tmp");
    fs::write(&tmp, text).map_err(|e| StoreError::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| StoreError::io(path, e))
}

fn json_files(dir: &Path) -> Result<Vec<PathBuf>, StoreError> {
    if !dir.is_dir() {
        return Ok(Vec::new());
    }
    let mut files: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| StoreError::io(dir, e))?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    files.sort();
    Ok(files)
}

fn read(path: &Path) -> Result<String, StoreError> {
    fs::read_to_string(path).map_err(|e| StoreError::io(path, e))
}

fn read_snapshot(root: &Path, log_seq: u64) -> Result<Option<EngineState>, StoreError> {
    let path = root.join(SNAPSHOT_FILE);
    if !path.exists() {
        return Ok(None);
    }
    let snap: Snapshot =
        serde_json::from_str(&read(&path)?).map_err(|e| StoreError::Parse { path, reason: e.to_string() })?;
    if snap.seq > log_seq {
        return Err(StoreError::StaleSnapshot { snapshot_seq: snap.seq, log_seq });
    }
    Ok(Some(snap.state))
}

fn load(root: &Path) -> Result<Engine, StoreError> {
    if !root.is_dir() {
        return Err(StoreError::MissingRoot(root.to_path_buf()));
    }
    let mut models = Vec::new();
    for path in json_files(&root.join(MODELS_DIR))? {
        let model = ProcessModel::from_json(&read(&path)?)
            .map_err(|e| StoreError::Parse { path: path.clone(), reason: e.to_string() })?;
        let violations = validate_process_model(&model);
        if !violations.is_empty() {
            return Err(StoreError::ValidationFailed { path, violations });
        }
        models.push((path, model));
    }
    models.sort_by(|(_, a), (_, b)| (&a.name, a.version).cmp(&(&b.name, b.version)));
    let mut registry = ModelRegistry::new();
    for (path, model) in models {
        registry.insert(model).map_err(|c| StoreError::Parse { path, reason: c.to_string() })?;
    }

    let mut indicators = IndicatorSet::default();
    for path in json_files(&root.join(INDICATORS_DIR))? {
        let defs: Vec<IndicatorDef> = serde_json::from_str(&read(&path)?)
            .map_err(|e| StoreError::Parse { path: path.clone(), reason: e.to_string() })?;
        indicators =
            indicators.merged(defs).map_err(|e| StoreError::Parse { path: path.clone(), reason: e.to_string() })?;
    }

    let log_path = root.join(LOG_FILE);
    let events = if log_path.exists() { parse_ndjson(&read(&log_path)?)? } else { Vec::new() };
    let log_seq = events.last().map_or(0, |e| e.seq);
    let engine = match read_snapshot(root, log_seq)? {
        Some(state) => Engine::restore_from(registry, indicators, events, state)?,
        None => Engine::restore(registry, indicators, events)?,
    };
    Ok(engine)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_directory_is_an_empty_workspace() {
        let dir = tempfile::tempdir().unwrap();
        let ws = Workspace::open(dir.path()).unwrap();
        assert!(ws.engine().registry().is_empty());
        assert!(ws.engine().events().is_empty());
        assert!(matches!(Workspace::open(dir.path()).unwrap().engine_mut(), Err(StoreError::ReadOnly)));
    }

    #[test]
    fn missing_root() {
        let dir = tempfile::tempdir().unwrap();
        let err = Workspace::open(dir.path().join("nope")).unwrap_err();
        assert!(matches!(err, StoreError::MissingRoot(_)));
    }

    #[test]
    fn second_writer_is_refused_until_the_first_drops() {
        let dir = tempfile::tempdir().unwrap();
        let first = Workspace::open_writer(dir.path()).unwrap();
        assert!(matches!(Workspace::open_writer(dir.path()), Err(StoreError::Locked(_))));
        Workspace::open(dir.path()).expect("readers are not blocked");
        drop(first);
        Workspace::open_writer(dir.path()).unwrap();
    }

    #[test]
    fn snapshot_beyond_log_is_stale() {
        let dir = tempfile::tempdir().unwrap();
        let state = EngineState { last_seq: 3, ..Default::default() };
        fs::write(dir.path().join(SNAPSHOT_FILE), serde_json::to_string(&Snapshot { seq: 3, state }).unwrap()).unwrap();
        let err = Workspace::open(dir.path()).unwrap_err();
        assert!(matches!(err, StoreError::StaleSnapshot { snapshot_seq: 3, log_seq: 0 }));
    }
}
