#![allow(dead_code)]

pub mod solvers;

use std::path::PathBuf;
use std::sync::{Arc, Mutex};

use serde_json::Value;
use tempfile::TempDir;
use thunder_cli::{run, server, Connector, Env, ExitCode};
use thunder_core::clock::{ManualClock, Timestamp};
use thunder_core::{Emulator, LevelRegistry, MetadataMode, Platform};

pub const PROJECT: &str = "proj-solver1";

pub struct Out {
    pub code: ExitCode,
    pub stdout: Vec<u8>,
    pub stderr: String,
}

impl Out {
    pub fn text(&self) -> String {
        String::from_utf8_lossy(&self.stdout).into_owned()
    }
}

/// One player: a private thunder home and working directory, talking to a
/// server either in-process or over HTTP.
pub struct Player {
    home: TempDir,
    work: TempDir,
    connector: Connector,
    addr: Option<String>,
    pub shared: Arc<Mutex<Platform>>,
}

pub fn platform(mode: MetadataMode) -> Platform {
    let emu = Emulator::builder()
        .seed(20261016)
        .metadata_mode(mode)
        .clock(ManualClock::new(Timestamp(1_700_000_000_000)))
        .build();
    Platform::new(emu, LevelRegistry::shipped())
}

impl Player {
    pub fn local(mode: MetadataMode) -> Player {
        let shared = Arc::new(Mutex::new(platform(mode)));
        Player {
            home: TempDir::new().unwrap(),
            work: TempDir::new().unwrap(),
            connector: Connector::Local(shared.clone()),
            addr: None,
            shared,
        }
    }

    /// A real HTTP server on an ephemeral port.
    pub fn http(mode: MetadataMode) -> Player {
        let shared = Arc::new(Mutex::new(platform(mode)));
        let bound = server::spawn("127.0.0.1:0", shared.clone()).unwrap();
        Player {
            home: TempDir::new().unwrap(),
            work: TempDir::new().unwrap(),
            connector: Connector::Http,
            addr: Some(bound.to_string()),
            shared,
        }
    }

    pub fn env(&self) -> Env {
        Env {
            home: self.home.path().to_path_buf(),
            addr: self.addr.clone(),
            cwd: self.work.path().to_path_buf(),
        }
    }

    pub fn home(&self) -> PathBuf {
        self.home.path().to_path_buf()
    }

    /// Writes a file into the player's working directory.
    pub fn write(&self, name: &str, contents: &str) -> Result<(), String> {
        std::fs::write(self.work.path().join(name), contents).map_err(|e| format!("{name}: {e}"))
    }

    pub fn read(&self, name: &str) -> Result<String, String> {
        std::fs::read_to_string(self.work.path().join(name)).map_err(|e| format!("{name}: {e}"))
    }

    pub fn run(&self, args: &[&str]) -> Out {
        let mut stdout = Vec::new();
        let mut stderr = Vec::new();
        let argv = std::iter::once("thunder").chain(args.iter().copied());
        let code = run(argv, &self.env(), &self.connector, &mut stdout, &mut stderr);
        Out {
            code,
            stdout,
            stderr: String::from_utf8_lossy(&stderr).into_owned(),
        }
    }

    /// Runs a verb that must succeed; returns stdout.
    pub fn ok(&self, args: &[&str]) -> Result<String, String> {
        let out = self.run(args);
        if out.code != ExitCode::Success {
            return Err(format!(
                "thunder {} -> {:?}: {}",
                args.join(" "),
                out.code,
                out.stderr.trim()
            ));
        }
        Ok(out.text())
    }

    /// Runs a verb in json mode and parses stdout.
    pub fn json(&self, args: &[&str]) -> Result<Value, String> {
        let mut all = vec!["--json"];
        all.extend_from_slice(args);
        let text = self.ok(&all)?;
        serde_json::from_str(&text).map_err(|e| format!("thunder {}: not json ({e}): {text}", args.join(" ")))
    }

    /// Runs a verb that must fail with `code`; returns stderr.
    pub fn fails(&self, args: &[&str], code: ExitCode) -> Result<String, String> {
        let out = self.run(args);
        if out.code != code {
            return Err(format!(
                "thunder {} -> {:?}, wanted {code:?}: {}",
                args.join(" "),
                out.code,
                out.text()
            ));
        }
        Ok(out.stderr)
    }
}

/// The first `CTF{...}` in `text`.
pub fn find_flag(text: &str) -> Option<String> {
    let start = text.find("CTF{")?;
    let end = start + text[start..].find('}')?;
    Some(text[start..=end].to_string())
}
