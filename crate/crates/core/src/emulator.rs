use std::collections::BTreeMap;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::clock::{Clock, SystemClock, Timestamp};
use crate::iam::{RoleCatalog, DEFAULT_TOKEN_TTL_SECS};
use crate::state::{ProjectState, Snapshot, SnapshotError, SNAPSHOT_VERSION};

/// How strictly the metadata server checks request headers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MetadataMode {
    /// `Metadata-Flavor: Google` is enough.
    #[default]
    Default,
    /// Additionally requires `X-EmuCloud-Metadata-Request: true`.
    StrictHeader,
}

impl std::str::FromStr for MetadataMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "default" => Ok(MetadataMode::Default),
            "strict-header" => Ok(MetadataMode::StrictHeader),
            other => Err(format!(
                "unknown metadata mode `{other}` (expected default|strict-header)"
            )),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Settings {
    pub metadata_mode: MetadataMode,
    pub token_ttl_secs: u64,
    /// Host names (with optional port) that handler `fetch` treats as the API base.
    pub api_hosts: Vec<String>,
}

impl Default for Settings {
    fn default() -> Self {
        Settings {
            metadata_mode: MetadataMode::Default,
            token_ttl_secs: DEFAULT_TOKEN_TTL_SECS,
            api_hosts: vec![
                "api.emucloud.internal".into(),
                "127.0.0.1:8085".into(),
                "localhost:8085".into(),
            ],
        }
    }
}

/// The whole emulated cloud. Owns all state; callers serialize access.
#[derive(Debug, Clone)]
pub struct Emulator {
    pub(crate) projects: BTreeMap<String, ProjectState>,
    pub(crate) catalog: Arc<RoleCatalog>,
    pub(crate) clock: Arc<dyn Clock>,
    pub(crate) rng: ChaCha20Rng,
    pub(crate) settings: Settings,
}

impl Default for Emulator {
    fn default() -> Self {
        Emulator::builder().build()
    }
}

#[derive(Debug, Default)]
pub struct EmulatorBuilder {
    clock: Option<Arc<dyn Clock>>,
    seed: Option<u64>,
    catalog: Option<RoleCatalog>,
    settings: Settings,
}

impl EmulatorBuilder {
    pub fn clock(mut self, clock: Arc<dyn Clock>) -> Self {
        self.clock = Some(clock);
        self
    }

    /// Fixes the random stream. Only for tests; production seeds from the OS.
    pub fn seed(mut self, seed: u64) -> Self {
        self.seed = Some(seed);
        self
    }

    pub fn catalog(mut self, catalog: RoleCatalog) -> Self {
        self.catalog = Some(catalog);
        self
    }

    pub fn metadata_mode(mut self, mode: MetadataMode) -> Self {
        self.settings.metadata_mode = mode;
        self
    }

    pub fn api_host(mut self, host: impl Into<String>) -> Self {
        self.settings.api_hosts.push(host.into());
        self
    }

    pub fn build(self) -> Emulator {
        let rng = match self.seed {
            Some(seed) => ChaCha20Rng::seed_from_u64(seed),
            None => ChaCha20Rng::from_entropy(),
        };
        Emulator {
            projects: BTreeMap::new(),
            catalog: Arc::new(self.catalog.unwrap_or_else(RoleCatalog::shipped)),
            clock: self.clock.unwrap_or_else(|| Arc::new(SystemClock::default())),
            rng,
            settings: self.settings,
        }
    }
}

impl Emulator {
    pub fn new() -> Emulator {
        Emulator::default()
    }

    pub fn builder() -> EmulatorBuilder {
        EmulatorBuilder::default()
    }

    pub fn now(&self) -> Timestamp {
        self.clock.now()
    }

    pub fn settings(&self) -> &Settings {
        &self.settings
    }

    pub fn set_metadata_mode(&mut self, mode: MetadataMode) {
        self.settings.metadata_mode = mode;
    }

    pub(crate) fn random_hex(&mut self, bytes: usize) -> String {
        let buf: Vec<u8> = (0..bytes).map(|_| self.rng.gen()).collect();
        hex::encode(buf)
    }

    pub fn project_ids(&self) -> impl Iterator<Item = &str> {
        self.projects.keys().map(String::as_str)
    }

    pub fn project_state(&self, project_id: &str) -> Option<&ProjectState> {
        self.projects.get(project_id)
    }

    pub fn snapshot(&self) -> Snapshot {
        Snapshot {
            version: SNAPSHOT_VERSION,
            projects: self.projects.clone(),
        }
    }

    /// Replaces all state with the snapshot's contents.
    pub fn restore(&mut self, snapshot: Snapshot) -> Result<(), SnapshotError> {
        if snapshot.version != SNAPSHOT_VERSION {
            return Err(SnapshotError::UnsupportedVersion(snapshot.version));
        }
        self.projects = snapshot.projects;
        Ok(())
    }
}
