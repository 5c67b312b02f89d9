//! The CLI's persisted settings, kept in `config.json` under the thunder
//! home directory. The file holds a bearer token, so it is created
//! readable by its owner only.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::CliError;

pub const DEFAULT_ADDR: &str = "127.0.0.1:8085";
pub const DEFAULT_PROJECT: &str = "thunder-player";

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputMode {
    #[default]
    Text,
    Json,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CliConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub api_address: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub project: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub account: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub token: Option<String>,
    #[serde(default)]
    pub output: OutputMode,
}

impl CliConfig {
    pub fn path(home: &Path) -> PathBuf {
        home.join("config.json")
    }

    /// Missing file means defaults.
    pub fn load(home: &Path) -> Result<CliConfig, CliError> {
        let path = CliConfig::path(home);
        match fs::read_to_string(&path) {
            Ok(text) => serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display()))),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(CliConfig::default()),
            Err(e) => Err(CliError::File { path, source: e }),
        }
    }

    pub fn save(&self, home: &Path) -> Result<(), CliError> {
        fs::create_dir_all(home).map_err(CliError::file(home))?;
        let path = CliConfig::path(home);
        let text = serde_json::to_string_pretty(self).expect("config serializes");
        write_private(&path, text.as_bytes())
    }
}

/// Writes a file that only its owner may read.
pub fn write_private(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let mut options = fs::OpenOptions::new();
    options.write(true).create(true).truncate(true);
    #[cfg(unix)]
    {
        use std::os::unix::fs::OpenOptionsExt;
        options.mode(0o600);
    }
    let mut file = options.open(path).map_err(CliError::file(path))?;
    #[cfg(unix)]
    {
        use std::os::unix::fs::PermissionsExt;
        file.set_permissions(fs::Permissions::from_mode(0o600))
            .map_err(CliError::file(path))?;
    }
    file.write_all(bytes).map_err(CliError::file(path))
}
