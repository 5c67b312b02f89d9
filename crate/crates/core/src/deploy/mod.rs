//! The deployment engine: renders a level's templated configuration,
//! creates its resources in dependency order and tears them down again.
//!
//! Every applied step yields [`ResourceHandle`]s that know how to undo
//! themselves. A failing step rolls back everything applied so far, in
//! reverse order; destroy replays the same undo list.

mod config;
mod template;

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use config::{
    BindingProps, BucketProps, DeploymentConfig, FunctionProps, ImageProps, InstanceProps, LogEntriesProps,
    ObjectProps, RepoProps, ResourceDecl, ResourceSpec, ServiceAccountProps, RESOURCE_TYPES,
};
pub use template::{placeholders, render, TemplateContext};

use crate::emulator::Emulator;
use crate::iam::Binding;
use crate::services::compute::Instance;
use crate::services::logging::Severity;
use crate::services::storage::StoredObject;
use crate::services::ServiceError;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DeployError {
    #[error("template references unknown placeholder `{0}`")]
    UnknownPlaceholder(String),
    #[error("template syntax error at byte {offset}: {message}")]
    TemplateSyntax { offset: usize, message: String },
    #[error("config is not valid YAML: {0}")]
    Yaml(String),
    #[error("invalid config: {0}")]
    Validation(String),
    #[error("deployment of `{0}` is already active")]
    ActiveDeploymentExists(String),
    #[error("creating `{name}` failed: {cause}")]
    ResourceCreate { name: String, cause: String },
    #[error("no active deployment")]
    NotActive,
    #[error("unknown project `{0}`")]
    UnknownProject(String),
}

/// A created resource or applied change, with what is needed to undo it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ResourceHandle {
    ServiceAccount {
        email: String,
    },
    Bucket {
        name: String,
    },
    Object {
        bucket: String,
        name: String,
        #[serde(default)]
        previous: Option<StoredObject>,
    },
    Instance {
        name: String,
    },
    Function {
        name: String,
    },
    Binding {
        role: String,
        added: Vec<String>,
    },
    Repo {
        name: String,
    },
    RepoCommits {
        repo: String,
        previous_len: usize,
    },
    Image {
        path: String,
    },
    Logs {
        ids: Vec<u64>,
    },
    InstanceMetadata {
        instance: String,
        key: String,
        previous: Option<String>,
    },
    FunctionEnv {
        function: String,
        key: String,
        previous: Option<String>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DeploymentStatus {
    Active,
    Destroyed,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DeploymentRecord {
    pub level_name: String,
    pub project_id: String,
    pub context: TemplateContext,
    /// Creation order.
    pub created: Vec<ResourceHandle>,
    pub status: DeploymentStatus,
    /// Audit copy of the configuration as rendered.
    pub rendered_config: String,
}

/// One unit of deployment work.
pub trait Action {
    fn label(&self) -> String;
    fn apply(&self, emu: &mut Emulator, project_id: &str) -> Result<Vec<ResourceHandle>, ServiceError>;
}

pub struct DeployRequest<'a> {
    pub project_id: &'a str,
    pub level_name: &'a str,
    pub context: TemplateContext,
    pub rendered_config: String,
    pub config: &'a DeploymentConfig,
    /// Run after the config's resources, in order.
    pub setup: Vec<&'a dyn Action>,
    /// Test hook: fail instead of running the step with this index.
    pub fail_at: Option<usize>,
}

fn parse_severity(s: &str) -> Result<Severity, ServiceError> {
    match s {
        "DEBUG" => Ok(Severity::Debug),
        "INFO" => Ok(Severity::Info),
        "ERROR" => Ok(Severity::Error),
        other => Err(ServiceError::InvalidArgument(format!("unknown severity `{other}`"))),
    }
}

impl Action for ResourceDecl {
    fn label(&self) -> String {
        format!("{} ({})", self.name, self.spec.type_name())
    }

    fn apply(&self, emu: &mut Emulator, project_id: &str) -> Result<Vec<ResourceHandle>, ServiceError> {
        let handle = match &self.spec {
            ResourceSpec::ServiceAccount(p) => {
                let sa = emu.create_service_account(project_id, &p.name, &p.description)?;
                ResourceHandle::ServiceAccount { email: sa.email }
            }
            ResourceSpec::Bucket(p) => {
                emu.create_bucket(project_id, &p.name)?;
                ResourceHandle::Bucket { name: p.name.clone() }
            }
            ResourceSpec::Object(p) => {
                let owned = emu.bucket(&p.bucket).is_some_and(|b| b.project_id == project_id);
                if !owned {
                    return Err(ServiceError::NotFound(format!("bucket `{}`", p.bucket)));
                }
                let previous = emu.put_object(&p.bucket, &p.name, p.content.as_bytes().to_vec(), &p.content_type)?;
                ResourceHandle::Object {
                    bucket: p.bucket.clone(),
                    name: p.name.clone(),
                    previous,
                }
            }
            ResourceSpec::Instance(p) => {
                emu.create_instance(Instance {
                    name: p.name.clone(),
                    project_id: project_id.to_string(),
                    zone: p.zone.clone(),
                    metadata: p.metadata.clone(),
                    attached_service_account: p.service_account.clone(),
                    container_image: p.container_image.clone(),
                    serving_port: p.serving_port,
                })?;
                ResourceHandle::Instance { name: p.name.clone() }
            }
            ResourceSpec::Function(p) => {
                emu.create_function(
                    project_id,
                    &p.name,
                    &p.source,
                    p.env.clone(),
                    p.require_auth,
                    &p.runtime_account,
                )?;
                ResourceHandle::Function { name: p.name.clone() }
            }
            ResourceSpec::Binding(p) => add_binding(emu, project_id, &p.role, &p.members)?,
            ResourceSpec::Repo(p) => {
                emu.create_repo(project_id, &p.name)?;
                ResourceHandle::Repo { name: p.name.clone() }
            }
            ResourceSpec::Image(p) => {
                let files = p
                    .files
                    .iter()
                    .map(|(k, v)| (k.clone(), v.as_bytes().to_vec()))
                    .collect();
                emu.push_image(&p.path, files)?;
                ResourceHandle::Image { path: p.path.clone() }
            }
            ResourceSpec::LogEntries(p) => {
                let severity = parse_severity(&p.severity)?;
                seed_logs(emu, project_id, &p.logger, severity, &p.messages)?
            }
        };
        Ok(vec![handle])
    }
}

/// Adds `members` to `role`, recording only the members that were new.
pub(crate) fn add_binding(
    emu: &mut Emulator,
    project_id: &str,
    role: &str,
    members: &[String],
) -> Result<ResourceHandle, ServiceError> {
    let policy = emu
        .projects
        .get(project_id)
        .ok_or_else(|| ServiceError::NotFound(format!("project `{project_id}`")))?
        .policy
        .clone();
    let existing: BTreeSet<String> = policy.members_of(role).cloned().unwrap_or_default();
    let added: Vec<String> = members
        .iter()
        .filter(|m| !existing.contains(*m))
        .cloned()
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let mut bindings = policy.bindings;
    bindings.push(Binding {
        role: role.to_string(),
        members: added.iter().cloned().collect(),
    });
    emu.write_policy(project_id, bindings, None)?;
    Ok(ResourceHandle::Binding {
        role: role.to_string(),
        added,
    })
}

pub(crate) fn seed_logs(
    emu: &mut Emulator,
    project_id: &str,
    logger: &str,
    severity: Severity,
    messages: &[String],
) -> Result<ResourceHandle, ServiceError> {
    let mut ids = Vec::with_capacity(messages.len());
    for m in messages {
        let id = emu
            .append_log(project_id, severity, logger, m)
            .ok_or_else(|| ServiceError::NotFound(format!("project `{project_id}`")))?;
        ids.push(id);
    }
    Ok(ResourceHandle::Logs { ids })
}

impl Emulator {
    /// Undoes one handle. Missing resources are skipped, so undo is
    /// idempotent and tolerates manual deletion.
    pub(crate) fn undo(&mut self, project_id: &str, handle: &ResourceHandle) {
        match handle {
            ResourceHandle::ServiceAccount { email } => {
                self.delete_service_account(email);
            }
            ResourceHandle::Bucket { name } => {
                self.delete_bucket(name);
            }
            ResourceHandle::Object { bucket, name, previous } => {
                self.restore_object(bucket, name, previous.clone());
            }
            ResourceHandle::Instance { name } => {
                self.delete_instance(project_id, name);
            }
            ResourceHandle::Function { name } => {
                self.delete_function(project_id, name);
            }
            ResourceHandle::Binding { role, added } => {
                let Some(policy) = self.projects.get(project_id).map(|p| p.policy.clone()) else {
                    return;
                };
                if !policy
                    .bindings
                    .iter()
                    .any(|b| b.role == *role && added.iter().any(|m| b.members.contains(m)))
                {
                    return;
                }
                let bindings = policy
                    .bindings
                    .into_iter()
                    .map(|mut b| {
                        if b.role == *role {
                            for m in added {
                                b.members.remove(m);
                            }
                        }
                        b
                    })
                    .collect();
                let _ = self.write_policy(project_id, bindings, None);
            }
            ResourceHandle::Repo { name } => {
                self.delete_repo(project_id, name);
            }
            ResourceHandle::RepoCommits { repo, previous_len } => {
                self.truncate_repo(project_id, repo, *previous_len);
            }
            ResourceHandle::Image { path } => {
                self.delete_image(path);
            }
            ResourceHandle::Logs { ids } => self.remove_logs(project_id, ids),
            ResourceHandle::InstanceMetadata {
                instance,
                key,
                previous,
            } => {
                let _ = self.put_instance_metadata(project_id, instance, key, previous.clone());
            }
            ResourceHandle::FunctionEnv {
                function,
                key,
                previous,
            } => {
                let _ = self.put_function_env(project_id, function, key, previous.clone());
            }
        }
    }

    pub fn active_deployment(&self) -> Option<&DeploymentRecord> {
        self.projects
            .values()
            .filter_map(|p| p.deployment.as_ref())
            .find(|d| d.status == DeploymentStatus::Active)
    }

    /// The project's deployment record, active or destroyed.
    pub fn deployment(&self, project_id: &str) -> Option<&DeploymentRecord> {
        self.projects.get(project_id)?.deployment.as_ref()
    }

    /// Creates the config's resources in dependency order and then runs the
    /// setup steps. On any failure everything applied is rolled back and
    /// state is left as it was.
    pub fn deploy(&mut self, req: DeployRequest<'_>) -> Result<DeploymentRecord, DeployError> {
        if let Some(active) = self.active_deployment() {
            return Err(DeployError::ActiveDeploymentExists(active.level_name.clone()));
        }
        if !self.projects.contains_key(req.project_id) {
            return Err(DeployError::UnknownProject(req.project_id.to_string()));
        }
        let order = req.config.creation_order()?;
        let mut steps: Vec<&dyn Action> = order.iter().map(|&i| &req.config.resources[i] as &dyn Action).collect();
        steps.extend(req.setup.iter().copied());

        let mut created: Vec<ResourceHandle> = Vec::new();
        for (index, step) in steps.iter().enumerate() {
            let result = if req.fail_at == Some(index) {
                Err(ServiceError::InvalidArgument(format!("injected fault at step {index}")))
            } else {
                step.apply(self, req.project_id)
            };
            match result {
                Ok(handles) => created.extend(handles),
                Err(cause) => {
                    for h in created.iter().rev() {
                        self.undo(req.project_id, h);
                    }
                    return Err(DeployError::ResourceCreate {
                        name: step.label(),
                        cause: cause.to_string(),
                    });
                }
            }
        }
        let record = DeploymentRecord {
            level_name: req.level_name.to_string(),
            project_id: req.project_id.to_string(),
            context: req.context,
            created,
            status: DeploymentStatus::Active,
            rendered_config: req.rendered_config,
        };
        self.projects.get_mut(req.project_id).expect("checked above").deployment = Some(record.clone());
        Ok(record)
    }

    /// Removes everything the active deployment created, newest first.
    pub fn destroy_deployment(&mut self) -> Result<DeploymentRecord, DeployError> {
        let record = self.active_deployment().cloned().ok_or(DeployError::NotActive)?;
        for h in record.created.iter().rev() {
            self.undo(&record.project_id, h);
        }
        let state = self
            .projects
            .get_mut(&record.project_id)
            .expect("deployment project exists");
        let stored = state.deployment.as_mut().expect("record present");
        stored.status = DeploymentStatus::Destroyed;
        Ok(stored.clone())
    }

    /// Number of steps a deployment of `config` plus `setup_len` hook steps
    /// runs; valid `fail_at` values are `0..steps`.
    pub fn deployment_steps(config: &DeploymentConfig, setup_len: usize) -> usize {
        config.resources.len() + setup_len
    }
}
