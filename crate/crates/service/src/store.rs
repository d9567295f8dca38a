//! In-memory sessions with a JSON file per session on disk.

use std::collections::{HashMap, VecDeque};
use std::path::{Path, PathBuf};
use std::sync::{Arc, RwLock};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use tokio::sync::Mutex;

use ii20_core::engine::{Dataset, Engine, EngineConfig, EngineState};

use crate::error::ApiError;

pub const SESSION_DOC_VERSION: u32 = 1;
/// Replies remembered per session for request-id retries.
pub const REPLY_CACHE: usize = 256;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StoredReply {
    pub request_id: String,
    /// Method and path the id was first used with.
    pub route: String,
    pub status: u16,
    pub body: serde_json::Value,
}

pub struct SessionInner {
    pub engine: Engine,
    pub created: u64,
    pub updated: u64,
    pub replies: VecDeque<StoredReply>,
}

impl SessionInner {
    pub fn reply_for(&self, request_id: &str) -> Option<&StoredReply> {
        self.replies.iter().find(|r| r.request_id == request_id)
    }

    pub fn remember(&mut self, reply: StoredReply) {
        if self.replies.len() == REPLY_CACHE {
            self.replies.pop_front();
        }
        self.replies.push_back(reply);
    }
}

pub struct Session {
    pub id: String,
    pub inner: Arc<Mutex<SessionInner>>,
}

#[derive(Serialize, Deserialize)]
struct SessionDoc {
    version: u32,
    id: String,
    dataset: String,
    created: u64,
    updated: u64,
    engine: EngineState,
    #[serde(default)]
    replies: VecDeque<StoredReply>,
}

pub fn now_secs() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0)
}

/// All live sessions over one dataset.
pub struct SessionStore {
    data: Dataset,
    dir: Option<PathBuf>,
    sessions: RwLock<HashMap<String, Arc<Session>>>,
    /// Replies to session-creating requests, keyed by request id.
    created: std::sync::Mutex<VecDeque<StoredReply>>,
}

impl SessionStore {
    /// A store persisting to `dir` when given, reloading any sessions found there.
    pub fn open(data: Dataset, dir: Option<PathBuf>) -> anyhow::Result<Self> {
        let store = SessionStore {
            data,
            dir,
            sessions: RwLock::new(HashMap::new()),
            created: std::sync::Mutex::new(VecDeque::new()),
        };
        if let Some(dir) = &store.dir {
            std::fs::create_dir_all(dir)?;
            let mut loaded = 0;
            for entry in std::fs::read_dir(dir)? {
                let path = entry?.path();
                if path.extension().is_some_and(|e| e == "json") {
                    let session = store.load(&path)?;
                    store.sessions.write().expect("session map").insert(session.id.clone(), Arc::new(session));
                    loaded += 1;
                }
            }
            log::info!("reloaded {loaded} sessions from {}", dir.display());
        }
        Ok(store)
    }

    fn load(&self, path: &Path) -> anyhow::Result<Session> {
        let text = std::fs::read_to_string(path)?;
        let doc: SessionDoc = serde_json::from_str(&text)?;
        anyhow::ensure!(doc.version == SESSION_DOC_VERSION, "{}: unsupported version {}", path.display(), doc.version);
        anyhow::ensure!(
            doc.dataset == self.dataset_name(),
            "{}: session belongs to dataset {:?}, serving {:?}",
            path.display(),
            doc.dataset,
            self.dataset_name()
        );
        let engine = Engine::restore(self.data.clone(), doc.engine)?;
        Ok(Session {
            id: doc.id,
            inner: Arc::new(Mutex::new(SessionInner {
                engine,
                created: doc.created,
                updated: doc.updated,
                replies: doc.replies,
            })),
        })
    }

    pub fn data(&self) -> &Dataset {
        &self.data
    }

    pub fn dataset_name(&self) -> &str {
        self.data.collection.name()
    }

    pub fn get(&self, id: &str) -> Result<Arc<Session>, ApiError> {
        self.sessions
            .read()
            .expect("session map")
            .get(id)
            .cloned()
            .ok_or_else(|| ApiError::UnknownSession(id.to_owned()))
    }

    pub fn create(&self, config: EngineConfig) -> Result<Arc<Session>, ApiError> {
        let engine = Engine::new(self.data.clone(), config)?;
        let id = loop {
            let id = format!("{:016x}", rand::random::<u64>());
            if !self.sessions.read().expect("session map").contains_key(&id) {
                break id;
            }
        };
        let now = now_secs();
        let inner = SessionInner {
            engine,
            created: now,
            updated: now,
            replies: VecDeque::new(),
        };
        self.persist(&id, &inner)?;
        let session = Arc::new(Session {
            id: id.clone(),
            inner: Arc::new(Mutex::new(inner)),
        });
        self.sessions.write().expect("session map").insert(id, session.clone());
        Ok(session)
    }

    pub fn creation_reply(&self, request_id: &str) -> Option<StoredReply> {
        self.created.lock().expect("reply cache").iter().find(|r| r.request_id == request_id).cloned()
    }

    pub fn remember_creation(&self, reply: StoredReply) {
        let mut c = self.created.lock().expect("reply cache");
        if c.len() == REPLY_CACHE {
            c.pop_front();
        }
        c.push_back(reply);
    }

    /// Write the session document, atomically replacing the previous one.
    pub fn persist(&self, id: &str, inner: &SessionInner) -> Result<(), ApiError> {
        let Some(dir) = &self.dir else {
            return Ok(());
        };
        let doc = SessionDoc {
            version: SESSION_DOC_VERSION,
            id: id.to_owned(),
            dataset: self.dataset_name().to_owned(),
            created: inner.created,
            updated: inner.updated,
            engine: inner.engine.state().clone(),
            replies: inner.replies.clone(),
        };
        let tmp = dir.join(format!("{id}.json.tmp"));
        std::fs::write(&tmp, serde_json::to_vec(&doc)?)?;
        std::fs::rename(&tmp, dir.join(format!("{id}.json")))?;
        Ok(())
    }
}
