//! Setup hook helpers. A level's hook is a list of these steps, written as
//! data in `level.yaml` and run after its config's resources exist. Each
//! step returns the handles that undo it.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::deploy::{self, Action, ResourceHandle};
use crate::emulator::Emulator;
use crate::services::logging::Severity;
use crate::services::registry::parse_registry_path;
use crate::services::ServiceError;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CommitSpec {
    pub message: String,
    pub files: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum SetupStep {
    UploadObject {
        bucket: String,
        name: String,
        content: String,
        #[serde(default = "text_plain")]
        content_type: String,
    },
    AddBinding {
        role: String,
        member: String,
    },
    SeedLogEntries {
        logger: String,
        #[serde(default = "info")]
        severity: Severity,
        messages: Vec<String>,
    },
    SeedRepo {
        repo: String,
        commits: Vec<CommitSpec>,
    },
    PushImage {
        path: String,
        files: BTreeMap<String, String>,
    },
    SetInstanceMetadata {
        instance: String,
        key: String,
        value: String,
    },
    SetFunctionEnv {
        function: String,
        key: String,
        value: String,
    },
}

fn text_plain() -> String {
    "text/plain".into()
}

fn info() -> Severity {
    Severity::Info
}

impl SetupStep {
    pub fn helper_name(&self) -> &'static str {
        match self {
            SetupStep::UploadObject { .. } => "upload_object",
            SetupStep::AddBinding { .. } => "add_binding",
            SetupStep::SeedLogEntries { .. } => "seed_log_entries",
            SetupStep::SeedRepo { .. } => "seed_repo",
            SetupStep::PushImage { .. } => "push_image",
            SetupStep::SetInstanceMetadata { .. } => "set_instance_metadata",
            SetupStep::SetFunctionEnv { .. } => "set_function_env",
        }
    }
}

fn unknown(what: String) -> ServiceError {
    ServiceError::NotFound(what)
}

impl Action for SetupStep {
    fn label(&self) -> String {
        format!("setup {}", self.helper_name())
    }

    fn apply(&self, emu: &mut Emulator, project_id: &str) -> Result<Vec<ResourceHandle>, ServiceError> {
        let handle = match self {
            SetupStep::UploadObject {
                bucket,
                name,
                content,
                content_type,
            } => {
                if !emu.bucket(bucket).is_some_and(|b| b.project_id == project_id) {
                    return Err(unknown(format!("bucket `{bucket}`")));
                }
                let previous = emu.put_object(bucket, name, content.as_bytes().to_vec(), content_type)?;
                ResourceHandle::Object {
                    bucket: bucket.clone(),
                    name: name.clone(),
                    previous,
                }
            }
            SetupStep::AddBinding { role, member } => {
                deploy::add_binding(emu, project_id, role, std::slice::from_ref(member))?
            }
            SetupStep::SeedLogEntries {
                logger,
                severity,
                messages,
            } => deploy::seed_logs(emu, project_id, logger, *severity, messages)?,
            SetupStep::SeedRepo { repo, commits } => {
                let previous_len = emu
                    .repo_len(project_id, repo)
                    .ok_or_else(|| unknown(format!("repo `{repo}`")))?;
                for c in commits {
                    let files = c
                        .files
                        .iter()
                        .map(|(k, v)| (k.clone(), v.as_bytes().to_vec()))
                        .collect();
                    if let Err(e) = emu.push_commit(project_id, repo, &c.message, files) {
                        emu.truncate_repo(project_id, repo, previous_len);
                        return Err(e);
                    }
                }
                ResourceHandle::RepoCommits {
                    repo: repo.clone(),
                    previous_len,
                }
            }
            SetupStep::PushImage { path, files } => {
                if parse_registry_path(path).map(|(p, _, _)| p) != Some(project_id) {
                    return Err(ServiceError::InvalidArgument(format!(
                        "image `{path}` is not in project `{project_id}`"
                    )));
                }
                let files = files.iter().map(|(k, v)| (k.clone(), v.as_bytes().to_vec())).collect();
                emu.push_image(path, files)?;
                ResourceHandle::Image { path: path.clone() }
            }
            SetupStep::SetInstanceMetadata { instance, key, value } => {
                let previous = emu.put_instance_metadata(project_id, instance, key, Some(value.clone()))?;
                ResourceHandle::InstanceMetadata {
                    instance: instance.clone(),
                    key: key.clone(),
                    previous,
                }
            }
            SetupStep::SetFunctionEnv { function, key, value } => {
                let previous = emu.put_function_env(project_id, function, key, Some(value.clone()))?;
                ResourceHandle::FunctionEnv {
                    function: function.clone(),
                    key: key.clone(),
                    previous,
                }
            }
        };
        Ok(vec![handle])
    }
}
