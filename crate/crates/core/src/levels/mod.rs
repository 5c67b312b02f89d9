//! Level modules, the namespace registry, polymorphic flags and flag
//! validation.
//!
//! A level lives in `levels/<namespace>/<name>/` as four files:
//! `level.yaml` (metadata, seed, handout and setup hook), `config.yaml`
//! (the deployment template), `hints.yaml` and `writeup.md`.

mod setup;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use subtle::ConstantTimeEq;
use thiserror::Error;

pub use setup::{CommitSpec, SetupStep};

use crate::deploy::{
    placeholders, render, Action, DeployError, DeployRequest, DeploymentConfig, DeploymentRecord, TemplateContext,
};
use crate::emulator::Emulator;
use crate::hints::{parse_hint_file, HintDeck, HintError};
use crate::iam::service_account_email;
use crate::progress::{Submission, Verdict};
use crate::services::compute::KeyPair;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LevelError {
    #[error("level `{0}` is already registered")]
    DuplicateLevel(String),
    #[error("unknown level `{0}`")]
    UnknownLevel(String),
    #[error("level `{level}` is malformed: {reason}")]
    BadLevel { level: String, reason: String },
    #[error(transparent)]
    Deploy(#[from] DeployError),
    #[error(transparent)]
    Hints(#[from] HintError),
}

/// `CTF{` + first 16 hex chars of SHA-256(`seed:project_id`) + `}`.
pub fn generate_flag(level_seed: &str, project_id: &str) -> String {
    let digest = Sha256::digest(format!("{level_seed}:{project_id}").as_bytes());
    format!("CTF{{{}}}", &hex::encode(digest)[..16])
}

/// Exact, constant-time comparison. No trimming.
pub fn flag_matches(expected: &str, submitted: &str) -> bool {
    expected.as_bytes().ct_eq(submitted.as_bytes()).into()
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Generate {
    /// Each name `n` yields `n_private_key` and `n_public_key`.
    #[serde(default)]
    pub keypairs: Vec<String>,
    /// Each name yields a random 16-hex-char value.
    #[serde(default)]
    pub secrets: Vec<String>,
}

impl Generate {
    fn keys(&self) -> Vec<String> {
        let mut keys = Vec::new();
        for k in &self.keypairs {
            keys.push(format!("{k}_private_key"));
            keys.push(format!("{k}_public_key"));
        }
        keys.extend(self.secrets.iter().cloned());
        keys
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LevelFile {
    namespace: String,
    name: String,
    seed: String,
    title: String,
    intro: String,
    /// Short name of the service account whose key is handed out; absent
    /// for levels played anonymously.
    #[serde(default)]
    handout: Option<String>,
    #[serde(default)]
    generate: Generate,
    #[serde(default)]
    setup: serde_yaml::Value,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LevelModule {
    pub namespace: String,
    pub name: String,
    pub level_seed: String,
    pub title: String,
    pub intro: String,
    pub handout: Option<String>,
    pub generate: Generate,
    pub config_template: String,
    /// The setup hook before templating.
    pub setup_template: serde_yaml::Value,
    pub hints: HintDeck,
    pub writeup: String,
    /// Resources in the config plus setup steps.
    pub step_count: usize,
}

/// What a player needs to start a level.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StartInfo {
    pub level: String,
    pub project_id: String,
    pub title: String,
    pub intro: String,
    pub handout_account: Option<String>,
    /// The key file of the handout account.
    pub handout_key: Option<String>,
    pub hints_url: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LevelSummary {
    pub level: String,
    pub namespace: String,
    pub name: String,
    pub title: String,
    pub hints: usize,
}

const BASE_KEYS: &[&str] = &["project_id", "nonce", "level_name"];

fn render_value(value: &serde_yaml::Value, ctx: &TemplateContext) -> Result<serde_yaml::Value, DeployError> {
    use serde_yaml::Value;
    Ok(match value {
        Value::String(s) => Value::String(render(s, ctx)?),
        Value::Sequence(items) => {
            Value::Sequence(items.iter().map(|v| render_value(v, ctx)).collect::<Result<_, _>>()?)
        }
        Value::Mapping(map) => {
            let mut out = serde_yaml::Mapping::new();
            for (k, v) in map {
                out.insert(render_value(k, ctx)?, render_value(v, ctx)?);
            }
            Value::Mapping(out)
        }
        other => other.clone(),
    })
}

impl LevelModule {
    pub fn from_files(
        level_yaml: &str,
        config_yaml: &str,
        hints_yaml: &str,
        writeup: &str,
    ) -> Result<LevelModule, LevelError> {
        let file: LevelFile = serde_yaml::from_str(level_yaml).map_err(|e| LevelError::BadLevel {
            level: "<unknown>".into(),
            reason: e.to_string(),
        })?;
        let reference = format!("{}/{}", file.namespace, file.name);
        let bad = |reason: String| LevelError::BadLevel {
            level: reference.clone(),
            reason,
        };
        let ident_ok = |s: &str| {
            !s.is_empty()
                && s.bytes()
                    .all(|b| b.is_ascii_lowercase() || b.is_ascii_digit() || b == b'-')
        };
        if !ident_ok(&file.namespace) || !ident_ok(&file.name) {
            return Err(bad("namespace and name must be lowercase identifiers".into()));
        }
        if file.seed.is_empty() {
            return Err(bad("seed must be non-empty".into()));
        }

        let mut allowed: Vec<String> = BASE_KEYS.iter().map(|s| s.to_string()).collect();
        allowed.extend(file.generate.keys());
        let config_keys = placeholders(config_yaml).map_err(|e| bad(e.to_string()))?;
        if let Some(k) = config_keys.iter().find(|k| !allowed.contains(k)) {
            return Err(bad(format!("config.yaml uses unknown placeholder `{k}`")));
        }
        let probe = TemplateContext {
            project_id: "probe-project".into(),
            nonce: "00000000".into(),
            level_name: file.name.clone(),
            extra: file
                .generate
                .keys()
                .into_iter()
                .map(|k| (k, "probe".to_string()))
                .collect(),
        };
        let config = DeploymentConfig::parse(&render(config_yaml, &probe).map_err(|e| bad(e.to_string()))?)
            .map_err(|e| bad(format!("config.yaml: {e}")))?;
        let mut setup_probe = probe.clone();
        setup_probe.extra.insert("flag".into(), "CTF{0000000000000000}".into());
        let steps = Self::setup_steps(&file.setup, &setup_probe).map_err(|e| bad(format!("setup: {e}")))?;

        let hints = parse_hint_file(&reference, hints_yaml)?;
        Ok(LevelModule {
            namespace: file.namespace,
            name: file.name,
            level_seed: file.seed,
            title: file.title,
            intro: file.intro,
            handout: file.handout,
            generate: file.generate,
            config_template: config_yaml.to_string(),
            setup_template: file.setup,
            hints,
            writeup: writeup.to_string(),
            step_count: config.resources.len() + steps.len(),
        })
    }

    fn setup_steps(template: &serde_yaml::Value, ctx: &TemplateContext) -> Result<Vec<SetupStep>, DeployError> {
        if template.is_null() {
            return Ok(Vec::new());
        }
        let rendered = render_value(template, ctx)?;
        let json = serde_json::to_value(rendered).map_err(|e| DeployError::Validation(e.to_string()))?;
        serde_json::from_value(json).map_err(|e| DeployError::Validation(e.to_string()))
    }

    pub fn reference(&self) -> String {
        format!("{}/{}", self.namespace, self.name)
    }

    pub fn flag_for(&self, project_id: &str) -> String {
        generate_flag(&self.level_seed, project_id)
    }

    pub fn summary(&self) -> LevelSummary {
        LevelSummary {
            level: self.reference(),
            namespace: self.namespace.clone(),
            name: self.name.clone(),
            title: self.title.clone(),
            hints: self.hints.len(),
        }
    }
}

macro_rules! shipped_level {
    ($name:literal) => {
        LevelModule::from_files(
            include_str!(concat!("../../levels/thunder/", $name, "/level.yaml")),
            include_str!(concat!("../../levels/thunder/", $name, "/config.yaml")),
            include_str!(concat!("../../levels/thunder/", $name, "/hints.yaml")),
            include_str!(concat!("../../levels/thunder/", $name, "/writeup.md")),
        )
    };
}

/// The levels a platform can deploy, addressed as `namespace/name`.
#[derive(Debug, Clone, Default)]
pub struct LevelRegistry {
    levels: BTreeMap<String, LevelModule>,
}

impl LevelRegistry {
    pub fn new() -> LevelRegistry {
        LevelRegistry::default()
    }

    /// The six `thunder/*` levels.
    pub fn shipped() -> LevelRegistry {
        let mut reg = LevelRegistry::new();
        for level in [
            shipped_level!("a1openbucket"),
            shipped_level!("a2finance"),
            shipped_level!("a3password"),
            shipped_level!("a4error"),
            shipped_level!("a5power"),
            shipped_level!("a6container"),
        ] {
            reg.register(level.expect("shipped level is well-formed"))
                .expect("shipped levels are unique");
        }
        reg
    }

    pub fn register(&mut self, level: LevelModule) -> Result<(), LevelError> {
        let key = level.reference();
        if self.levels.contains_key(&key) {
            return Err(LevelError::DuplicateLevel(key));
        }
        self.levels.insert(key, level);
        Ok(())
    }

    pub fn list(&self, namespace: Option<&str>) -> Vec<(String, String)> {
        self.levels
            .values()
            .filter(|l| namespace.is_none_or(|ns| l.namespace == ns))
            .map(|l| (l.namespace.clone(), l.name.clone()))
            .collect()
    }

    pub fn get(&self, reference: &str) -> Result<&LevelModule, LevelError> {
        self.levels
            .get(reference)
            .ok_or_else(|| LevelError::UnknownLevel(reference.to_string()))
    }

    pub fn iter(&self) -> impl Iterator<Item = &LevelModule> {
        self.levels.values()
    }
}

impl Emulator {
    /// Renders and deploys the level into `project_id`, runs its setup
    /// hook and returns the starting handout. `fail_at` injects a failure
    /// at that step (see [`LevelModule::step_count`]).
    pub fn create_level(
        &mut self,
        level: &LevelModule,
        project_id: &str,
        fail_at: Option<usize>,
    ) -> Result<StartInfo, LevelError> {
        if let Some(active) = self.active_deployment() {
            return Err(DeployError::ActiveDeploymentExists(active.level_name.clone()).into());
        }
        if self.project(project_id).is_none() {
            return Err(DeployError::UnknownProject(project_id.to_string()).into());
        }
        let mut extra = BTreeMap::new();
        for name in &level.generate.keypairs {
            let kp = KeyPair::generate(&mut self.rng);
            extra.insert(format!("{name}_private_key"), kp.private_key);
            extra.insert(format!("{name}_public_key"), kp.public_key);
        }
        for name in &level.generate.secrets {
            extra.insert(name.clone(), self.random_hex(8));
        }
        let context = TemplateContext {
            project_id: project_id.to_string(),
            nonce: self.random_hex(4),
            level_name: level.name.clone(),
            extra,
        };
        let rendered = render(&level.config_template, &context)?;
        let config = DeploymentConfig::parse(&rendered)?;
        let mut setup_ctx = context.clone();
        setup_ctx.extra.insert("flag".into(), level.flag_for(project_id));
        let steps = LevelModule::setup_steps(&level.setup_template, &setup_ctx)?;
        let reference = level.reference();
        self.deploy(DeployRequest {
            project_id,
            level_name: &reference,
            context,
            rendered_config: rendered,
            config: &config,
            setup: steps.iter().map(|s| s as &dyn Action).collect(),
            fail_at,
        })?;

        let handout_account = level.handout.as_ref().map(|n| service_account_email(n, project_id));
        let handout_key = handout_account
            .as_ref()
            .and_then(|email| self.find_service_account(email))
            .map(|sa| sa.key_file());
        Ok(StartInfo {
            level: reference.clone(),
            project_id: project_id.to_string(),
            title: level.title.clone(),
            intro: level.intro.clone(),
            handout_account,
            handout_key,
            hints_url: format!("/ctf/v1/hints?level={reference}&project={project_id}"),
        })
    }

    pub fn destroy_level(&mut self) -> Result<DeploymentRecord, LevelError> {
        Ok(self.destroy_deployment()?)
    }

    /// Checks a submission and records the verdict in the project's
    /// progress ledger.
    pub fn validate_flag(&mut self, level: &LevelModule, project_id: &str, submitted: &str) -> Verdict {
        let verdict = if flag_matches(&level.flag_for(project_id), submitted) {
            Verdict::Correct
        } else {
            Verdict::Incorrect
        };
        let at = self.now();
        if let Some(state) = self.projects.get_mut(project_id) {
            state
                .progress
                .level_mut(&level.reference())
                .submissions
                .push(Submission { at, verdict });
        }
        verdict
    }
}
