use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::EpbError;
use crate::dsl::{DataType, MAX_JITTER_MS};
use crate::op::OpKind;
use crate::topology::NodeId;

/// Environment variable naming the directory that holds the persisted file.
pub const CONFIG_DIR_ENV: &str = "FLIP_CONFIG_DIR";
pub const CONFIG_FILE_NAME: &str = "engine_config.json";

/// What an engine does with an epoch whose sources did not all arrive.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TimeoutPolicy {
    /// Compute over the sources present (never for sub/mul).
    #[default]
    Partial,
    /// Drop the epoch.
    Reject,
}

impl TimeoutPolicy {
    fn is_default(&self) -> bool {
        *self == TimeoutPolicy::Partial
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EngineConfig {
    pub engine: NodeId,
    pub user: String,
    pub compute: OpKind,
    /// Operand order for sub/mul.
    pub sources: Vec<NodeId>,
    pub destination: NodeId,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rate_ms: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub jitter_ms: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub data_type: Option<DataType>,
    #[serde(default, skip_serializing_if = "TimeoutPolicy::is_default")]
    pub on_timeout: TimeoutPolicy,
}

impl EngineConfig {
    pub fn new(engine: NodeId, user: &str, compute: OpKind, sources: Vec<NodeId>, destination: NodeId) -> Self {
        EngineConfig {
            engine,
            user: user.to_owned(),
            compute,
            sources,
            destination,
            rate_ms: None,
            jitter_ms: None,
            data_type: None,
            on_timeout: TimeoutPolicy::Partial,
        }
    }

    /// The (engine, user, destination) identity of a config.
    pub fn key(&self) -> (&NodeId, &str, &NodeId) {
        (&self.engine, &self.user, &self.destination)
    }

    pub fn validate(&self) -> Result<(), EpbError> {
        let bad = |m: String| Err(EpbError::Validation(m));
        if self.sources.is_empty() {
            return bad(format!("config on {} has no sources", self.engine));
        }
        let mut seen = std::collections::BTreeSet::new();
        if let Some(dup) = self.sources.iter().find(|s| !seen.insert(*s)) {
            return bad(format!("source {dup} listed twice"));
        }
        if self.user.is_empty() {
            return bad("empty user".into());
        }
        if let Some(r) = self.rate_ms {
            if !(r > 0.0 && r.is_finite()) {
                return bad(format!("rate must be positive, got {r}"));
            }
        }
        if let Some(j) = self.jitter_ms {
            if !(0.0..=MAX_JITTER_MS).contains(&j) {
                return bad(format!("jitter must be within 0..={MAX_JITTER_MS} ms, got {j}"));
            }
        }
        if self.compute == OpKind::Sub && self.sources.len() < 2 {
            return bad("sub needs at least two sources".into());
        }
        Ok(())
    }

    pub fn matches(&self, user: &str, source: &NodeId) -> bool {
        self.user == user && self.sources.contains(source)
    }
}

/// One entry of the on-disk file, which is keyed engine -> user -> [entry].
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileEntry {
    compute: OpKind,
    source: Vec<NodeId>,
    destination: NodeId,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    rate: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    jitter: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    datatype: Option<DataType>,
    #[serde(default, skip_serializing_if = "TimeoutPolicy::is_default")]
    on_timeout: TimeoutPolicy,
}

type FileShape = BTreeMap<NodeId, BTreeMap<String, Vec<FileEntry>>>;

/// Per-engine, per-user configuration, optionally mirrored to a JSON file.
#[derive(Debug, Clone, Default)]
pub struct ConfigStore {
    configs: BTreeMap<NodeId, BTreeMap<String, Vec<EngineConfig>>>,
    path: Option<PathBuf>,
}

impl ConfigStore {
    /// In-memory store.
    pub fn new() -> Self {
        Self::default()
    }

    /// Store persisted under `dir`, loading any existing file.
    pub fn open(dir: impl AsRef<Path>) -> Result<Self, EpbError> {
        let mut store = ConfigStore {
            configs: BTreeMap::new(),
            path: Some(dir.as_ref().join(CONFIG_FILE_NAME)),
        };
        store.reload()?;
        Ok(store)
    }

    /// Persisted under `$FLIP_CONFIG_DIR` when set, otherwise in memory.
    pub fn from_env() -> Result<Self, EpbError> {
        match std::env::var_os(CONFIG_DIR_ENV) {
            Some(dir) => {
                std::fs::create_dir_all(&dir)?;
                Self::open(dir)
            }
            None => Ok(Self::new()),
        }
    }

    pub fn path(&self) -> Option<&Path> {
        self.path.as_deref()
    }

    /// Re-reads the backing file, replacing in-memory state.
    pub fn reload(&mut self) -> Result<(), EpbError> {
        let Some(path) = &self.path else { return Ok(()) };
        if !path.exists() {
            self.configs.clear();
            return Ok(());
        }
        let shape: FileShape = serde_json::from_str(&std::fs::read_to_string(path)?)
            .map_err(|e| EpbError::Validation(format!("{}: {e}", path.display())))?;
        let mut configs: BTreeMap<NodeId, BTreeMap<String, Vec<EngineConfig>>> = BTreeMap::new();
        for (engine, users) in shape {
            for (user, entries) in users {
                for e in entries {
                    let cfg = EngineConfig {
                        engine: engine.clone(),
                        user: user.clone(),
                        compute: e.compute,
                        sources: e.source,
                        destination: e.destination,
                        rate_ms: e.rate,
                        jitter_ms: e.jitter,
                        data_type: e.datatype,
                        on_timeout: e.on_timeout,
                    };
                    cfg.validate()?;
                    configs
                        .entry(engine.clone())
                        .or_default()
                        .entry(user.clone())
                        .or_default()
                        .push(cfg);
                }
            }
        }
        self.configs = configs;
        Ok(())
    }

    /// Adds `cfg`, replacing any config with the same (engine, user,
    /// destination). Returns the replaced config.
    pub fn set(&mut self, cfg: EngineConfig) -> Result<Option<EngineConfig>, EpbError> {
        cfg.validate()?;
        let list = self
            .configs
            .entry(cfg.engine.clone())
            .or_default()
            .entry(cfg.user.clone())
            .or_default();
        let old = match list.iter_mut().find(|c| c.destination == cfg.destination) {
            Some(slot) => Some(std::mem::replace(slot, cfg)),
            None => {
                list.push(cfg);
                None
            }
        };
        self.persist()?;
        Ok(old)
    }

    /// Updates one field group of an existing config. `destination` picks
    /// the entry when the user has several on this engine.
    pub fn set_module(
        &mut self,
        engine: &str,
        user: &str,
        destination: Option<&str>,
        module: &str,
        value: &Value,
    ) -> Result<EngineConfig, EpbError> {
        let current = {
            let list = self.get_user(engine, user);
            let mut hits = list
                .iter()
                .filter(|c| destination.is_none_or(|d| c.destination.as_str() == d));
            match (hits.next(), hits.next()) {
                (Some(c), None) => c.clone(),
                (None, _) => return Err(EpbError::NotFound(format!("config for {user} on {engine}"))),
                (Some(_), Some(_)) => {
                    return Err(EpbError::Validation(format!(
                        "{user} has several configs on {engine}; name the destination"
                    )))
                }
            }
        };
        let mut next = current;
        let invalid = |m: &str| EpbError::Validation(format!("module {module}: {m}"));
        let duration = |v: &Value| -> Result<Option<f64>, EpbError> {
            match v {
                Value::Null => Ok(None),
                v => v.as_f64().map(Some).ok_or_else(|| invalid("expected milliseconds")),
            }
        };
        match module {
            "compute" => {
                next.compute = value
                    .as_str()
                    .and_then(|s| s.parse().ok())
                    .ok_or_else(|| invalid("expected an operation name"))?
            }
            "rate" => next.rate_ms = duration(value)?,
            "jitter" => next.jitter_ms = duration(value)?,
            "datatype" => {
                next.data_type = serde_json::from_value(value.clone()).map_err(|_| invalid("expected scalar, vector or matrix"))?
            }
            "on_timeout" => {
                next.on_timeout = serde_json::from_value(value.clone()).map_err(|_| invalid("expected partial or reject"))?
            }
            other => return Err(EpbError::Validation(format!("unknown module {other:?}"))),
        }
        self.set(next.clone())?;
        Ok(next)
    }

    pub fn get(&self, engine: &str) -> Vec<&EngineConfig> {
        self.configs
            .get(engine)
            .map(|users| users.values().flatten().collect())
            .unwrap_or_default()
    }

    pub fn get_user(&self, engine: &str, user: &str) -> &[EngineConfig] {
        self.configs
            .get(engine)
            .and_then(|u| u.get(user))
            .map(Vec::as_slice)
            .unwrap_or(&[])
    }

    pub fn all(&self) -> impl Iterator<Item = &EngineConfig> {
        self.configs.values().flat_map(|u| u.values().flatten())
    }

    pub fn len(&self) -> usize {
        self.all().count()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn remove(&mut self, engine: &str, user: &str, destination: &str) -> Result<Option<EngineConfig>, EpbError> {
        let removed = self
            .configs
            .get_mut(engine)
            .and_then(|u| u.get_mut(user))
            .and_then(|list| {
                let i = list.iter().position(|c| c.destination.as_str() == destination)?;
                Some(list.remove(i))
            });
        self.prune();
        self.persist()?;
        Ok(removed)
    }

    pub fn clear(&mut self) -> Result<(), EpbError> {
        self.configs.clear();
        self.persist()
    }

    fn prune(&mut self) {
        for users in self.configs.values_mut() {
            users.retain(|_, list| !list.is_empty());
        }
        self.configs.retain(|_, users| !users.is_empty());
    }

    /// The file shape: engine -> user -> [{compute, source, destination, rate, jitter}].
    pub fn to_document(&self) -> Value {
        serde_json::to_value(self.file_shape()).expect("serializable")
    }

    fn file_shape(&self) -> FileShape {
        self.configs
            .iter()
            .map(|(engine, users)| {
                let users = users
                    .iter()
                    .map(|(user, list)| {
                        let entries = list
                            .iter()
                            .map(|c| FileEntry {
                                compute: c.compute,
                                source: c.sources.clone(),
                                destination: c.destination.clone(),
                                rate: c.rate_ms,
                                jitter: c.jitter_ms,
                                datatype: c.data_type,
                                on_timeout: c.on_timeout,
                            })
                            .collect();
                        (user.clone(), entries)
                    })
                    .collect();
                (engine.clone(), users)
            })
            .collect()
    }

    fn persist(&self) -> Result<(), EpbError> {
        let Some(path) = &self.path else { return Ok(()) };
        let text = serde_json::to_string_pretty(&self.file_shape()).expect("serializable");
        let tmp = path.with_extension("json.tmp");
        std::fs::write(&tmp, text + "\n")?;
        std::fs::rename(&tmp, path)?;
        Ok(())
    }
}
