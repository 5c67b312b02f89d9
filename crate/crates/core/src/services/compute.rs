//! Compute instances, ssh key placement and instance sessions.
//!
//! Key pairs are opaque: the public key is `emu-ed <sha256(private)>`. What
//! the levels exercise is where keys are placed, not the cryptography.

use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{ServiceError, ServiceResult};
use crate::emulator::Emulator;
use crate::iam::{perms, AccessToken, TokenKind};

pub const SSH_KEYS: &str = "ssh-keys";
const PRIVATE_PREFIX: &str = "emu-ed-private ";
const PUBLIC_PREFIX: &str = "emu-ed ";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Instance {
    pub name: String,
    pub project_id: String,
    pub zone: String,
    #[serde(default)]
    pub metadata: BTreeMap<String, String>,
    pub attached_service_account: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub container_image: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub serving_port: Option<u16>,
}

impl Instance {
    /// Path under the API base where the instance's web server answers.
    pub fn web_path(&self) -> Option<String> {
        self.container_image
            .as_ref()
            .map(|_| format!("/vm/{}/{}/", self.project_id, self.name))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InstanceSession {
    pub session_id: String,
    pub project_id: String,
    pub instance: String,
    pub user: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KeyPair {
    pub private_key: String,
    pub public_key: String,
}

impl KeyPair {
    pub fn generate<R: Rng + ?Sized>(rng: &mut R) -> KeyPair {
        let secret: [u8; 32] = rng.gen();
        let private_key = format!("{PRIVATE_PREFIX}{}", hex::encode(secret));
        let public_key = public_key_for(&private_key);
        KeyPair {
            private_key,
            public_key,
        }
    }
}

/// Derives the public half from a private key file's contents.
pub fn public_key_for(private_key: &str) -> String {
    let digest = Sha256::digest(private_key.trim().as_bytes());
    format!("{PUBLIC_PREFIX}{}", hex::encode(digest))
}

/// Parses an `ssh-keys` metadata value: newline-separated `user:<public-key>`.
pub fn authorized_keys(value: &str) -> Vec<(&str, &str)> {
    value
        .lines()
        .filter_map(|line| line.trim().split_once(':'))
        .map(|(user, key)| (user.trim(), key.trim()))
        .collect()
}

impl Emulator {
    pub(crate) fn instance(&self, project_id: &str, name: &str) -> Option<&Instance> {
        self.projects.get(project_id)?.instances.get(name)
    }

    pub fn create_instance(&mut self, instance: Instance) -> ServiceResult<()> {
        let state = self
            .projects
            .get(&instance.project_id)
            .ok_or_else(|| ServiceError::NotFound(format!("project `{}`", instance.project_id)))?;
        if !state.service_accounts.contains_key(&instance.attached_service_account) {
            return Err(ServiceError::InvalidArgument(format!(
                "service account `{}` is not in project `{}`",
                instance.attached_service_account, instance.project_id
            )));
        }
        if state.instances.contains_key(&instance.name) {
            return Err(ServiceError::AlreadyExists(format!("instance `{}`", instance.name)));
        }
        if instance.container_image.is_some() && instance.serving_port.is_none() {
            return Err(ServiceError::InvalidArgument(
                "an instance running a container needs a serving_port".into(),
            ));
        }
        self.projects
            .get_mut(&instance.project_id)
            .expect("checked above")
            .instances
            .insert(instance.name.clone(), instance);
        Ok(())
    }

    pub fn delete_instance(&mut self, project_id: &str, name: &str) -> bool {
        let Some(state) = self.projects.get_mut(project_id) else {
            return false;
        };
        state.sessions.retain(|_, s| s.instance != name);
        state.instances.remove(name).is_some()
    }

    /// Unchecked upsert; returns the previous value.
    pub(crate) fn put_instance_metadata(
        &mut self,
        project_id: &str,
        name: &str,
        key: &str,
        value: Option<String>,
    ) -> ServiceResult<Option<String>> {
        let inst = self
            .projects
            .get_mut(project_id)
            .and_then(|p| p.instances.get_mut(name))
            .ok_or_else(|| ServiceError::UnknownInstance(name.to_string()))?;
        Ok(match value {
            Some(v) => inst.metadata.insert(key.to_string(), v),
            None => inst.metadata.remove(key),
        })
    }

    pub fn instances_list(&self, token: Option<&str>, project_id: &str) -> ServiceResult<Vec<Instance>> {
        self.require(token, perms::COMPUTE_INSTANCES_LIST, project_id)?;
        let state = self
            .projects
            .get(project_id)
            .ok_or_else(|| ServiceError::NotFound(format!("project `{project_id}`")))?;
        Ok(state.instances.values().cloned().collect())
    }

    pub fn instance_set_metadata(
        &mut self,
        token: Option<&str>,
        project_id: &str,
        name: &str,
        key: &str,
        value: &str,
    ) -> ServiceResult<()> {
        self.require(token, perms::COMPUTE_INSTANCES_SET_METADATA, project_id)?;
        if key.is_empty() {
            return Err(ServiceError::InvalidArgument("metadata key must be non-empty".into()));
        }
        self.put_instance_metadata(project_id, name, key, Some(value.to_string()))
            .map(|_| ())
    }

    /// Opens a session when the key's public half is listed in `ssh-keys`.
    pub fn ssh_connect(&mut self, project_id: &str, name: &str, private_key: &str) -> ServiceResult<InstanceSession> {
        let inst = self
            .instance(project_id, name)
            .ok_or_else(|| ServiceError::UnknownInstance(name.to_string()))?;
        let public = public_key_for(private_key);
        let listed = inst.metadata.get(SSH_KEYS).map(String::as_str).unwrap_or("");
        let user = authorized_keys(listed)
            .into_iter()
            .find(|(_, key)| *key == public)
            .map(|(user, _)| user.to_string())
            .ok_or(ServiceError::KeyRejected)?;
        let session = InstanceSession {
            session_id: format!("ses.{}", self.random_hex(16)),
            project_id: project_id.to_string(),
            instance: name.to_string(),
            user,
        };
        self.projects
            .get_mut(project_id)
            .expect("instance exists")
            .sessions
            .insert(session.session_id.clone(), session.clone());
        Ok(session)
    }

    pub fn session(&self, session_id: &str) -> Option<&InstanceSession> {
        self.projects.values().find_map(|p| p.sessions.get(session_id))
    }

    /// Fresh access token for the session instance's attached account.
    pub fn session_token(&mut self, session_id: &str) -> ServiceResult<AccessToken> {
        let session = self
            .session(session_id)
            .cloned()
            .ok_or_else(|| ServiceError::NotFound("session".into()))?;
        let account = self
            .instance(&session.project_id, &session.instance)
            .map(|i| i.attached_service_account.clone())
            .ok_or_else(|| ServiceError::UnknownInstance(session.instance.clone()))?;
        Ok(self.issue_token(&account, &session.project_id, TokenKind::Access, None))
    }
}
