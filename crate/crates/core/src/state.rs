//! Serializable emulator state and the versioned snapshot file.
//!
//! Snapshot JSON has the top-level shape `{"version":1,"projects":{...}}`.
//! Every resource, token and ledger entry lives under its owning project.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::deploy::DeploymentRecord;
use crate::iam::{AccessToken, IamPolicy, Project, ServiceAccount};
use crate::progress::Progress;
use crate::services::compute::{Instance, InstanceSession};
use crate::services::functions::FunctionDef;
use crate::services::logging::LogEntry;
use crate::services::registry::ContainerImage;
use crate::services::repo::Repo;
use crate::services::storage::Bucket;

pub const SNAPSHOT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum SnapshotError {
    #[error("unsupported snapshot version {0}")]
    UnsupportedVersion(u32),
    #[error("snapshot json: {0}")]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProjectState {
    pub project: Project,
    #[serde(default)]
    pub service_accounts: BTreeMap<String, ServiceAccount>,
    pub policy: IamPolicy,
    #[serde(default)]
    pub tokens: BTreeMap<String, AccessToken>,
    #[serde(default)]
    pub buckets: BTreeMap<String, Bucket>,
    #[serde(default)]
    pub instances: BTreeMap<String, Instance>,
    #[serde(default)]
    pub sessions: BTreeMap<String, InstanceSession>,
    #[serde(default)]
    pub functions: BTreeMap<String, FunctionDef>,
    #[serde(default)]
    pub logs: Vec<LogEntry>,
    #[serde(default)]
    pub next_log_id: u64,
    #[serde(default)]
    pub repos: BTreeMap<String, Repo>,
    #[serde(default)]
    pub images: BTreeMap<String, ContainerImage>,
    #[serde(default)]
    pub deployment: Option<DeploymentRecord>,
    #[serde(default)]
    pub progress: Progress,
}

impl ProjectState {
    pub(crate) fn new(project: Project) -> ProjectState {
        let policy = IamPolicy::empty(&project.project_id);
        ProjectState {
            project,
            service_accounts: BTreeMap::new(),
            policy,
            tokens: BTreeMap::new(),
            buckets: BTreeMap::new(),
            instances: BTreeMap::new(),
            sessions: BTreeMap::new(),
            functions: BTreeMap::new(),
            logs: Vec::new(),
            next_log_id: 0,
            repos: BTreeMap::new(),
            images: BTreeMap::new(),
            deployment: None,
            progress: Progress::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub version: u32,
    pub projects: BTreeMap<String, ProjectState>,
}

impl Snapshot {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("snapshot serializes")
    }

    pub fn from_json(text: &str) -> Result<Snapshot, SnapshotError> {
        let snapshot: Snapshot = serde_json::from_str(text)?;
        if snapshot.version != SNAPSHOT_VERSION {
            return Err(SnapshotError::UnsupportedVersion(snapshot.version));
        }
        Ok(snapshot)
    }

    /// The snapshot with play-time bookkeeping cleared: logs, tokens,
    /// sessions, policy etags, deployment records and progress ledgers.
    /// What remains is the set of provisioned resources and grants.
    pub fn resources_view(&self) -> Snapshot {
        let mut view = self.clone();
        for state in view.projects.values_mut() {
            state.logs.clear();
            state.next_log_id = 0;
            state.tokens.clear();
            state.sessions.clear();
            state.policy.etag.clear();
            state.deployment = None;
            state.progress = Progress::default();
        }
        view
    }
}

/// Serde helper for byte payloads: valid UTF-8 is stored as `{"text": ...}`,
/// anything else as `{"base64": ...}`.
pub(crate) mod content {
    use base64::Engine;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    #[derive(Serialize, Deserialize)]
    #[serde(rename_all = "lowercase")]
    enum Repr {
        Text(String),
        Base64(String),
    }

    pub fn serialize<S: Serializer>(bytes: &[u8], ser: S) -> Result<S::Ok, S::Error> {
        match std::str::from_utf8(bytes) {
            Ok(text) => Repr::Text(text.to_string()),
            Err(_) => Repr::Base64(base64::engine::general_purpose::STANDARD.encode(bytes)),
        }
        .serialize(ser)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(de: D) -> Result<Vec<u8>, D::Error> {
        match Repr::deserialize(de)? {
            Repr::Text(text) => Ok(text.into_bytes()),
            Repr::Base64(b64) => base64::engine::general_purpose::STANDARD
                .decode(b64)
                .map_err(serde::de::Error::custom),
        }
    }

    pub mod map {
        use std::collections::BTreeMap;

        use serde::ser::SerializeMap;
        use serde::{Deserialize, Deserializer, Serializer};

        #[derive(serde::Serialize, serde::Deserialize)]
        struct Wrapped(#[serde(with = "super")] Vec<u8>);

        pub fn serialize<S: Serializer>(map: &BTreeMap<String, Vec<u8>>, ser: S) -> Result<S::Ok, S::Error> {
            let mut out = ser.serialize_map(Some(map.len()))?;
            for (k, v) in map {
                out.serialize_entry(k, &Wrapped(v.clone()))?;
            }
            out.end()
        }

        pub fn deserialize<'de, D: Deserializer<'de>>(de: D) -> Result<BTreeMap<String, Vec<u8>>, D::Error> {
            let raw: BTreeMap<String, Wrapped> = BTreeMap::deserialize(de)?;
            Ok(raw.into_iter().map(|(k, v)| (k, v.0)).collect())
        }
    }
}
