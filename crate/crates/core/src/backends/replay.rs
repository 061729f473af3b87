//! Record/replay fixtures keyed by trimmed prompt text.

use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use super::{excerpt, Backend, BackendError, Completion};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReplayMode {
    /// Forward to the inner backend and append new pairs to the fixture.
    Record,
    /// Answer from the fixture; misses go to the fallback backend if any.
    Replay,
    /// Answer from the fixture; misses are errors.
    ReplayStrict,
}

#[derive(Serialize, Deserialize)]
struct FixtureLine {
    prompt: String,
    response: String,
}

/// A fixture-backed backend.
///
/// Lookups are exact matches on the prompt with surrounding whitespace removed.
pub struct ReplayStore {
    mode: ReplayMode,
    path: PathBuf,
    entries: Mutex<HashMap<String, String>>,
    inner: Option<Box<dyn Backend>>,
    writer: Option<Mutex<BufWriter<File>>>,
}

impl ReplayStore {
    /// Loads a fixture for replay. Any JSON Lines file whose records carry
    /// string `prompt` and `response` fields is accepted; other lines are ignored.
    pub fn open(path: impl AsRef<Path>, mode: ReplayMode) -> Result<Self, BackendError> {
        let path = path.as_ref().to_path_buf();
        let text = std::fs::read_to_string(&path).map_err(|e| BackendError::Io(format!("{}: {e}", path.display())))?;
        let mut entries = HashMap::new();
        for line in text.lines().filter(|l| !l.trim().is_empty()) {
            let Ok(value) = serde_json::from_str::<serde_json::Value>(line) else { continue };
            if value.get("error").is_some_and(|e| !e.is_null()) {
                continue;
            }
            if let (Some(p), Some(r)) = (value["prompt"].as_str(), value["response"].as_str()) {
                entries.entry(p.trim().to_string()).or_insert_with(|| r.to_string());
            }
        }
        Ok(Self { mode, path, entries: Mutex::new(entries), inner: None, writer: None })
    }

    /// Replays `path`, sending misses to `fallback`.
    pub fn with_fallback(path: impl AsRef<Path>, fallback: Box<dyn Backend>) -> Result<Self, BackendError> {
        let mut store = Self::open(path, ReplayMode::Replay)?;
        store.inner = Some(fallback);
        Ok(store)
    }

    /// Records every new prompt answered by `inner` into a fresh file at `path`.
    pub fn record(path: impl AsRef<Path>, inner: Box<dyn Backend>) -> Result<Self, BackendError> {
        let path = path.as_ref().to_path_buf();
        let file = OpenOptions::new()
            .create(true)
            .write(true)
            .truncate(true)
            .open(&path)
            .map_err(|e| BackendError::Io(format!("{}: {e}", path.display())))?;
        Ok(Self {
            mode: ReplayMode::Record,
            path,
            entries: Mutex::new(HashMap::new()),
            inner: Some(inner),
            writer: Some(Mutex::new(BufWriter::new(file))),
        })
    }

    pub fn mode(&self) -> ReplayMode {
        self.mode
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn len(&self) -> usize {
        self.entries.lock().expect("replay store poisoned").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn lookup(&self, key: &str) -> Option<String> {
        self.entries.lock().expect("replay store poisoned").get(key).cloned()
    }

    fn persist(&self, key: &str, response: &str) -> Result<(), BackendError> {
        let mut entries = self.entries.lock().expect("replay store poisoned");
        if entries.contains_key(key) {
            return Ok(());
        }
        entries.insert(key.to_string(), response.to_string());
        let writer = self.writer.as_ref().expect("record mode has a writer");
        let mut w = writer.lock().expect("fixture writer poisoned");
        let line = serde_json::to_string(&FixtureLine { prompt: key.to_string(), response: response.to_string() })
            .expect("fixture line serializes");
        writeln!(w, "{line}").and_then(|_| w.flush()).map_err(|e| BackendError::Io(e.to_string()))
    }
}

impl Backend for ReplayStore {
    fn infer(&self, prompt: &str) -> Result<Completion, BackendError> {
        let key = prompt.trim();
        match self.mode {
            ReplayMode::Record => {
                let inner = self.inner.as_ref().expect("record mode has an inner backend");
                let completion = inner.infer(prompt)?;
                self.persist(key, &completion.text)?;
                Ok(completion)
            }
            ReplayMode::Replay | ReplayMode::ReplayStrict => {
                if let Some(response) = self.lookup(key) {
                    return Ok(Completion::estimated(prompt, response));
                }
                match (&self.inner, self.mode) {
                    (Some(fallback), ReplayMode::Replay) => fallback.infer(prompt),
                    _ => Err(BackendError::FixtureMiss(excerpt(prompt))),
                }
            }
        }
    }

    fn label(&self) -> String {
        match self.mode {
            ReplayMode::Record => format!("record:{}", self.path.display()),
            _ => format!("replay:{}", self.path.display()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backends::{FnBackend, OracleBackend};

    #[test]
    fn replays_recorded_pair() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("f.jsonl");
        std::fs::write(&path, "{\"prompt\":\"p\",\"response\":\"r\"}\n").unwrap();
        let store = ReplayStore::open(&path, ReplayMode::ReplayStrict).unwrap();
        assert_eq!(store.infer("  p\n").unwrap().text, "r");
        assert!(matches!(store.infer("q"), Err(BackendError::FixtureMiss(_))));
    }

    #[test]
    fn lenient_replay_falls_back() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("f.jsonl");
        std::fs::write(&path, "{\"prompt\":\"p\",\"response\":\"r\"}\nnot json\n").unwrap();
        let fallback = FnBackend::new("echo", |p: &str| Ok(format!("echo {p}")));
        let store = ReplayStore::with_fallback(&path, Box::new(fallback)).unwrap();
        assert_eq!(store.infer("p").unwrap().text, "r");
        assert_eq!(store.infer("q").unwrap().text, "echo q");
    }

    #[test]
    fn record_then_replay() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("rec.jsonl");
        let prompt = "Add(2, 3). Only output number. If contains floating point, round to two decimal places.";
        {
            let rec = ReplayStore::record(&path, Box::new(OracleBackend::new())).unwrap();
            assert_eq!(rec.infer(prompt).unwrap().text, "5");
            rec.infer(prompt).unwrap();
            assert_eq!(rec.len(), 1);
        }
        assert_eq!(std::fs::read_to_string(&path).unwrap().lines().count(), 1);
        let replay = ReplayStore::open(&path, ReplayMode::ReplayStrict).unwrap();
        assert_eq!(replay.infer(prompt).unwrap().text, "5");
    }

    #[test]
    fn missing_fixture_is_io_error() {
        assert!(matches!(ReplayStore::open("/nonexistent/x.jsonl", ReplayMode::Replay), Err(BackendError::Io(_))));
    }
}
