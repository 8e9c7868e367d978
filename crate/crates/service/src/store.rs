//! In-memory stores for specs, models and sessions, optionally mirrored to a
//! data directory:
//!
//! ```text
//! <dir>/specs/<id>.json        extended-form spec document
//! <dir>/models/<id>.json       extended-form model document
//! <dir>/sessions/<id>.jsonl    session event log, one record per line
//! <dir>/sessions/<id>.spec     id of the spec the session elicits for
//! ```
//!
//! On open, every log is replayed to rebuild its session.

use std::collections::{BTreeMap, HashMap};
use std::fs::{self, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, RwLock};

use emm_core::elicitation::Session;
use emm_core::hierarchy::{ExpertModel, ModelSpecTree};
use emm_core::persistence::{load_model, load_spec, log_line, parse_log, save_extended, save_model};
use emm_core::Error;

pub struct SessionSlot {
    pub session: Session,
    pub spec_id: String,
    persisted: usize,
}

pub type SharedSlot = Arc<Mutex<SessionSlot>>;

#[derive(Default)]
pub struct Store {
    dir: Option<PathBuf>,
    specs: RwLock<BTreeMap<String, ModelSpecTree>>,
    models: RwLock<BTreeMap<String, ExpertModel>>,
    sessions: RwLock<HashMap<String, SharedSlot>>,
}

pub fn new_id(prefix: &str) -> String {
    format!("{prefix}-{}", uuid::Uuid::new_v4().simple())
}

fn io_err(path: &Path, e: std::io::Error) -> Error {
    Error::Io(format!("{}: {e}", path.display()))
}

/// Write to a sibling temp file, then rename over the target.
fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), Error> {
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, bytes).map_err(|e| io_err(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| io_err(path, e))
}

fn files_with_ext(dir: &Path, ext: &str) -> Result<Vec<(String, PathBuf)>, Error> {
    let mut out = Vec::new();
    for entry in fs::read_dir(dir).map_err(|e| io_err(dir, e))? {
        let path = entry.map_err(|e| io_err(dir, e))?.path();
        if path.extension().and_then(|e| e.to_str()) == Some(ext) {
            if let Some(stem) = path.file_stem().and_then(|s| s.to_str()) {
                out.push((stem.to_string(), path.clone()));
            }
        }
    }
    out.sort();
    Ok(out)
}

impl Store {
    pub fn in_memory() -> Self {
        Self::default()
    }

    /// Opens (creating if needed) a data directory and replays its contents.
    pub fn open(dir: impl Into<PathBuf>) -> Result<Self, Error> {
        let dir = dir.into();
        for sub in ["specs", "models", "sessions"] {
            let p = dir.join(sub);
            fs::create_dir_all(&p).map_err(|e| io_err(&p, e))?;
        }
        let store = Store { dir: Some(dir.clone()), ..Default::default() };
        {
            let mut specs = store.specs.write().expect("lock");
            for (id, path) in files_with_ext(&dir.join("specs"), "json")? {
                let bytes = fs::read(&path).map_err(|e| io_err(&path, e))?;
                specs.insert(id, load_spec(&bytes)?);
            }
            let mut models = store.models.write().expect("lock");
            for (id, path) in files_with_ext(&dir.join("models"), "json")? {
                let bytes = fs::read(&path).map_err(|e| io_err(&path, e))?;
                models.insert(id, load_model(&bytes)?);
            }
            let mut sessions = store.sessions.write().expect("lock");
            for (id, path) in files_with_ext(&dir.join("sessions"), "jsonl")? {
                let text = fs::read_to_string(&path).map_err(|e| io_err(&path, e))?;
                let records = parse_log(&text)?;
                let session = Session::from_log(&records)?;
                let spec_path = path.with_extension("spec");
                let spec_id = fs::read_to_string(&spec_path).map_err(|e| io_err(&spec_path, e))?.trim().to_string();
                let slot = SessionSlot { session, spec_id, persisted: records.len() };
                sessions.insert(id, Arc::new(Mutex::new(slot)));
            }
        }
        Ok(store)
    }

    pub fn put_spec(&self, id: &str, tree: ModelSpecTree) -> Result<(), Error> {
        if let Some(dir) = &self.dir {
            write_atomic(&dir.join("specs").join(format!("{id}.json")), &save_extended(&tree))?;
        }
        self.specs.write().expect("lock").insert(id.to_string(), tree);
        Ok(())
    }

    pub fn spec(&self, id: &str) -> Result<ModelSpecTree, Error> {
        self.specs.read().expect("lock").get(id).cloned().ok_or_else(|| Error::NotFound(format!("no spec {id:?}")))
    }

    pub fn specs(&self) -> Vec<(String, ModelSpecTree)> {
        self.specs.read().expect("lock").iter().map(|(k, v)| (k.clone(), v.clone())).collect()
    }

    /// Applies `edit` to a spec under the write lock and persists the result.
    pub fn update_spec<T>(
        &self,
        id: &str,
        edit: impl FnOnce(&mut ModelSpecTree) -> Result<T, Error>,
    ) -> Result<T, Error> {
        let mut specs = self.specs.write().expect("lock");
        let tree = specs.get_mut(id).ok_or_else(|| Error::NotFound(format!("no spec {id:?}")))?;
        let mut draft = tree.clone();
        let out = edit(&mut draft)?;
        if let Some(dir) = &self.dir {
            write_atomic(&dir.join("specs").join(format!("{id}.json")), &save_extended(&draft))?;
        }
        *tree = draft;
        Ok(out)
    }

    pub fn put_model(&self, id: &str, model: ExpertModel) -> Result<(), Error> {
        if let Some(dir) = &self.dir {
            write_atomic(&dir.join("models").join(format!("{id}.json")), &save_model(&model))?;
        }
        self.models.write().expect("lock").insert(id.to_string(), model);
        Ok(())
    }

    pub fn model(&self, id: &str) -> Result<ExpertModel, Error> {
        self.models.read().expect("lock").get(id).cloned().ok_or_else(|| Error::NotFound(format!("no model {id:?}")))
    }

    pub fn models(&self) -> Vec<(String, ExpertModel)> {
        self.models.read().expect("lock").iter().map(|(k, v)| (k.clone(), v.clone())).collect()
    }

    pub fn insert_session(&self, session: Session, spec_id: &str) -> Result<SharedSlot, Error> {
        let id = session.id().to_string();
        let mut slot = SessionSlot { session, spec_id: spec_id.to_string(), persisted: 0 };
        if let Some(dir) = &self.dir {
            let p = dir.join("sessions").join(format!("{id}.spec"));
            write_atomic(&p, spec_id.as_bytes())?;
        }
        self.flush(&mut slot)?;
        let shared = Arc::new(Mutex::new(slot));
        self.sessions.write().expect("lock").insert(id, shared.clone());
        Ok(shared)
    }

    pub fn session(&self, id: &str) -> Result<SharedSlot, Error> {
        self.sessions.read().expect("lock").get(id).cloned().ok_or_else(|| Error::NotFound(format!("no session {id:?}")))
    }

    pub fn session_ids(&self) -> Vec<String> {
        let mut ids: Vec<String> = self.sessions.read().expect("lock").keys().cloned().collect();
        ids.sort();
        ids
    }

    /// Appends log records not yet on disk.
    pub fn flush(&self, slot: &mut SessionSlot) -> Result<(), Error> {
        let log = slot.session.log();
        if let Some(dir) = &self.dir {
            if slot.persisted < log.len() {
                let path = dir.join("sessions").join(format!("{}.jsonl", slot.session.id()));
                let mut file = OpenOptions::new().create(true).append(true).open(&path).map_err(|e| io_err(&path, e))?;
                let text: String = log[slot.persisted..].iter().map(log_line).collect();
                file.write_all(text.as_bytes()).map_err(|e| io_err(&path, e))?;
                file.sync_data().map_err(|e| io_err(&path, e))?;
            }
        }
        slot.persisted = log.len();
        Ok(())
    }
}
