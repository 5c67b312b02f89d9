//! Projects, principals, tokens, roles and the IAM policy evaluator.
//!
//! Every gated operation in the emulator funnels through
//! [`Emulator::check_permission`]. Policies live at project scope only; the
//! public-bucket pattern is an ordinary binding whose member is `allUsers`.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::clock::Timestamp;
use crate::emulator::Emulator;
use crate::state::ProjectState;

pub const ALL_USERS: &str = "allUsers";
pub const ANONYMOUS: &str = "anonymous";
pub const SERVICE_ACCOUNT_DOMAIN: &str = "iam.emucloud";
pub const DEFAULT_TOKEN_TTL_SECS: u64 = 3600;

const SHIPPED_ROLES: &str = include_str!("../data/roles.yaml");

/// Permission strings the services gate on.
pub mod perms {
    pub const STORAGE_BUCKETS_LIST: &str = "storage.buckets.list";
    pub const STORAGE_OBJECTS_LIST: &str = "storage.objects.list";
    pub const STORAGE_OBJECTS_GET: &str = "storage.objects.get";
    pub const STORAGE_OBJECTS_CREATE: &str = "storage.objects.create";
    pub const COMPUTE_INSTANCES_LIST: &str = "compute.instances.list";
    pub const COMPUTE_INSTANCES_SET_METADATA: &str = "compute.instances.setMetadata";
    pub const LOGGING_ENTRIES_LIST: &str = "logging.logEntries.list";
    pub const FUNCTIONS_LIST: &str = "cloudfunctions.functions.list";
    pub const FUNCTIONS_GET: &str = "cloudfunctions.functions.get";
    pub const FUNCTIONS_SOURCE_GET: &str = "cloudfunctions.functions.sourceCodeGet";
    pub const FUNCTIONS_UPDATE: &str = "cloudfunctions.functions.update";
    pub const REPOS_LIST: &str = "sourcerepo.repos.list";
    pub const REPOS_GET: &str = "sourcerepo.repos.get";
    pub const IMAGES_LIST: &str = "containerregistry.images.list";
    pub const IMAGES_PULL: &str = "containerregistry.images.pull";
    pub const GET_IAM_POLICY: &str = "resourcemanager.projects.getIamPolicy";
    pub const SET_IAM_POLICY: &str = "resourcemanager.projects.setIamPolicy";
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum IamError {
    #[error("project `{0}` already exists")]
    DuplicateProject(String),
    #[error("malformed project id `{0}`")]
    MalformedProjectId(String),
    #[error("unknown project `{0}`")]
    UnknownProject(String),
    #[error("malformed service account name `{0}`")]
    MalformedAccountName(String),
    #[error("service account `{0}` already exists")]
    DuplicateAccount(String),
    // UnknownAccount and BadKey render identically so callers cannot
    // enumerate accounts.
    #[error("invalid service account credentials")]
    UnknownAccount,
    #[error("invalid service account credentials")]
    BadKey,
    #[error("token is missing, unknown or expired")]
    InvalidToken,
    #[error("identity tokens require a non-empty audience URL")]
    MissingAudience,
    #[error("permission `{0}` denied")]
    PermissionDenied(String),
    #[error("policy etag `{given}` is stale (current `{current}`)")]
    StaleEtag { given: String, current: String },
    #[error("unknown role `{0}`")]
    UnknownRole(String),
    #[error("unknown member `{0}`")]
    UnknownMember(String),
    #[error("role catalog: {0}")]
    Catalog(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Project {
    pub project_id: String,
    pub display_name: String,
    pub created_at: Timestamp,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ServiceAccount {
    pub email: String,
    pub project_id: String,
    pub key_material: String,
    pub description: String,
}

impl ServiceAccount {
    /// The downloadable key file handed to players.
    pub fn key_file(&self) -> String {
        let doc = serde_json::json!({
            "type": "service_account",
            "project_id": self.project_id,
            "client_email": self.email,
            "private_key": self.key_material,
        });
        serde_json::to_string_pretty(&doc).expect("key file serializes")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TokenKind {
    Access,
    Identity,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AccessToken {
    pub token_id: String,
    pub principal: String,
    pub project_id: String,
    pub expires_at: Timestamp,
    pub kind: TokenKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub audience: Option<String>,
}

impl AccessToken {
    pub fn is_live(&self, now: Timestamp) -> bool {
        now < self.expires_at
    }

    pub fn expires_in_secs(&self, now: Timestamp) -> u64 {
        self.expires_at.0.saturating_sub(now.0) / 1000
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Role {
    #[serde(rename = "role")]
    pub role_name: String,
    pub permissions: BTreeSet<String>,
}

/// Closed set of roles known to the emulator.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RoleCatalog {
    roles: BTreeMap<String, Role>,
}

impl RoleCatalog {
    pub fn shipped() -> RoleCatalog {
        RoleCatalog::from_yaml(SHIPPED_ROLES).expect("shipped role catalog is valid")
    }

    pub fn from_yaml(text: &str) -> Result<RoleCatalog, IamError> {
        let roles: Vec<Role> = serde_yaml::from_str(text).map_err(|e| IamError::Catalog(e.to_string()))?;
        let mut map = BTreeMap::new();
        for role in roles {
            if !role.role_name.starts_with("roles/") || role.role_name.len() <= "roles/".len() {
                return Err(IamError::Catalog(format!(
                    "role name `{}` must look like roles/<name>",
                    role.role_name
                )));
            }
            if map.insert(role.role_name.clone(), role).is_some() {
                return Err(IamError::Catalog("duplicate role".into()));
            }
        }
        Ok(RoleCatalog { roles: map })
    }

    pub fn get(&self, role_name: &str) -> Option<&Role> {
        self.roles.get(role_name)
    }

    pub fn roles(&self) -> impl Iterator<Item = &Role> {
        self.roles.values()
    }

    /// Union of every permission named by any role, sorted.
    pub fn all_permissions(&self) -> Vec<String> {
        let set: BTreeSet<&String> = self.roles.values().flat_map(|r| &r.permissions).collect();
        set.into_iter().cloned().collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Binding {
    pub role: String,
    pub members: BTreeSet<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IamPolicy {
    pub project_id: String,
    pub bindings: Vec<Binding>,
    pub etag: String,
}

impl IamPolicy {
    pub(crate) fn empty(project_id: &str) -> IamPolicy {
        IamPolicy {
            project_id: project_id.to_string(),
            bindings: Vec::new(),
            etag: etag_for(0),
        }
    }

    pub fn members_of(&self, role: &str) -> Option<&BTreeSet<String>> {
        self.bindings.iter().find(|b| b.role == role).map(|b| &b.members)
    }

    /// Merges duplicate roles, drops empty bindings and sorts by role.
    pub(crate) fn normalize(bindings: Vec<Binding>) -> Vec<Binding> {
        let mut merged: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
        for b in bindings {
            merged.entry(b.role).or_default().extend(b.members);
        }
        merged
            .into_iter()
            .filter(|(_, members)| !members.is_empty())
            .map(|(role, members)| Binding { role, members })
            .collect()
    }
}

pub(crate) fn etag_for(version: u64) -> String {
    format!("BwE{version:012x}")
}

fn etag_version(etag: &str) -> u64 {
    etag.strip_prefix("BwE")
        .and_then(|hex| u64::from_str_radix(hex, 16).ok())
        .unwrap_or(0)
}

/// `[a-z][a-z0-9-]{4,28}`, full match.
pub fn is_valid_project_id(id: &str) -> bool {
    let bytes = id.as_bytes();
    (5..=29).contains(&bytes.len())
        && bytes[0].is_ascii_lowercase()
        && bytes[1..]
            .iter()
            .all(|b| b.is_ascii_lowercase() || b.is_ascii_digit() || *b == b'-')
}

/// `[a-z][a-z0-9-]{2,30}`, full match.
pub fn is_valid_account_name(name: &str) -> bool {
    let bytes = name.as_bytes();
    (3..=31).contains(&bytes.len())
        && bytes[0].is_ascii_lowercase()
        && bytes[1..]
            .iter()
            .all(|b| b.is_ascii_lowercase() || b.is_ascii_digit() || *b == b'-')
}

pub fn service_account_email(name: &str, project_id: &str) -> String {
    format!("{name}@{project_id}.{SERVICE_ACCOUNT_DOMAIN}")
}

/// Tokens are `at.`/`id.` followed by 64 hex chars. Anything else is treated
/// as no credential at all.
pub fn is_well_formed_token(token: &str) -> bool {
    let body = token.strip_prefix("at.").or_else(|| token.strip_prefix("id."));
    matches!(body, Some(hex) if hex.len() == 64 && hex.bytes().all(|b| b.is_ascii_hexdigit()))
}

/// Who a request is acting as after token resolution.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Caller {
    Anonymous,
    Principal(AccessToken),
    /// A well-formed token that is unknown or expired.
    Invalid,
}

impl Emulator {
    pub fn create_project(&mut self, project_id: &str, display_name: &str) -> Result<Project, IamError> {
        if !is_valid_project_id(project_id) {
            return Err(IamError::MalformedProjectId(project_id.to_string()));
        }
        if self.projects.contains_key(project_id) {
            return Err(IamError::DuplicateProject(project_id.to_string()));
        }
        let project = Project {
            project_id: project_id.to_string(),
            display_name: display_name.to_string(),
            created_at: self.now(),
        };
        self.projects
            .insert(project_id.to_string(), ProjectState::new(project.clone()));
        Ok(project)
    }

    pub fn project(&self, project_id: &str) -> Option<&crate::iam::Project> {
        self.projects.get(project_id).map(|p| &p.project)
    }

    pub fn create_service_account(
        &mut self,
        project_id: &str,
        name: &str,
        description: &str,
    ) -> Result<ServiceAccount, IamError> {
        if !is_valid_account_name(name) {
            return Err(IamError::MalformedAccountName(name.to_string()));
        }
        let email = service_account_email(name, project_id);
        if !self.projects.contains_key(project_id) {
            return Err(IamError::UnknownProject(project_id.to_string()));
        }
        if self.find_service_account(&email).is_some() {
            return Err(IamError::DuplicateAccount(email));
        }
        let account = ServiceAccount {
            email: email.clone(),
            project_id: project_id.to_string(),
            key_material: format!("emukey-{}", self.random_hex(32)),
            description: description.to_string(),
        };
        self.projects
            .get_mut(project_id)
            .expect("checked above")
            .service_accounts
            .insert(email, account.clone());
        Ok(account)
    }

    /// Removes the account, its tokens, and every binding membership naming it.
    pub fn delete_service_account(&mut self, email: &str) -> bool {
        let Some(project_id) = self.find_service_account(email).map(|a| a.project_id.clone()) else {
            return false;
        };
        let state = self.projects.get_mut(&project_id).expect("owner exists");
        state.service_accounts.remove(email);
        for p in self.projects.values_mut() {
            p.tokens.retain(|_, t| t.principal != email);
            let had = p.policy.bindings.iter().any(|b| b.members.contains(email));
            if had {
                let bindings = p
                    .policy
                    .bindings
                    .drain(..)
                    .map(|mut b| {
                        b.members.remove(email);
                        b
                    })
                    .collect();
                p.policy.bindings = IamPolicy::normalize(bindings);
                p.policy.etag = etag_for(etag_version(&p.policy.etag) + 1);
            }
        }
        true
    }

    pub fn find_service_account(&self, email: &str) -> Option<&ServiceAccount> {
        self.projects.values().find_map(|p| p.service_accounts.get(email))
    }

    pub(crate) fn issue_token(
        &mut self,
        principal: &str,
        project_id: &str,
        kind: TokenKind,
        audience: Option<String>,
    ) -> AccessToken {
        let prefix = match kind {
            TokenKind::Access => "at.",
            TokenKind::Identity => "id.",
        };
        let token = AccessToken {
            token_id: format!("{prefix}{}", self.random_hex(32)),
            principal: principal.to_string(),
            project_id: project_id.to_string(),
            expires_at: self.now().plus_secs(self.settings.token_ttl_secs),
            kind,
            audience,
        };
        if let Some(state) = self.projects.get_mut(project_id) {
            state.tokens.insert(token.token_id.clone(), token.clone());
        }
        token
    }

    pub fn mint_access_token(&mut self, email: &str, key_material: &str) -> Result<AccessToken, IamError> {
        let account = self.find_service_account(email).ok_or(IamError::UnknownAccount)?;
        let matches: bool =
            subtle::ConstantTimeEq::ct_eq(account.key_material.as_bytes(), key_material.trim().as_bytes()).into();
        if !matches {
            return Err(IamError::BadKey);
        }
        let project_id = account.project_id.clone();
        Ok(self.issue_token(email, &project_id, TokenKind::Access, None))
    }

    pub fn mint_identity_token(&mut self, access_token: &str, audience: &str) -> Result<AccessToken, IamError> {
        let token = match self.resolve(Some(access_token)) {
            Caller::Principal(t) if t.kind == TokenKind::Access => t,
            _ => return Err(IamError::InvalidToken),
        };
        if audience.trim().is_empty() {
            return Err(IamError::MissingAudience);
        }
        Ok(self.issue_token(
            &token.principal,
            &token.project_id,
            TokenKind::Identity,
            Some(audience.to_string()),
        ))
    }

    pub fn lookup_token(&self, token_id: &str) -> Option<&AccessToken> {
        self.projects.values().find_map(|p| p.tokens.get(token_id))
    }

    /// Classifies a bearer string into a caller.
    pub fn resolve(&self, token: Option<&str>) -> Caller {
        match token {
            None => Caller::Anonymous,
            Some(t) if !is_well_formed_token(t) => Caller::Anonymous,
            Some(t) => match self.lookup_token(t) {
                Some(tok) if tok.is_live(self.now()) => Caller::Principal(tok.clone()),
                _ => Caller::Invalid,
            },
        }
    }

    /// Total permission check. Allows iff the caller is anonymous or holds a
    /// live access token, and some binding in the project's policy that
    /// includes the caller (or `allUsers`) maps to a role granting
    /// `permission`.
    pub fn check_permission(&self, token: Option<&str>, permission: &str, project_id: &str) -> bool {
        let principal = match self.resolve(token) {
            Caller::Anonymous => None,
            Caller::Principal(t) if t.kind == TokenKind::Access => Some(t.principal),
            _ => return false,
        };
        let Some(state) = self.projects.get(project_id) else {
            return false;
        };
        state.policy.bindings.iter().any(|binding| {
            let member = binding.members.contains(ALL_USERS)
                || principal.as_deref().is_some_and(|p| binding.members.contains(p));
            member
                && self
                    .catalog
                    .get(&binding.role)
                    .is_some_and(|role| role.permissions.contains(permission))
        })
    }

    pub(crate) fn require(&self, token: Option<&str>, permission: &str, project_id: &str) -> Result<(), IamError> {
        if self.check_permission(token, permission, project_id) {
            Ok(())
        } else {
            Err(IamError::PermissionDenied(permission.to_string()))
        }
    }

    /// The subset of `permissions` the caller holds on the project, in input
    /// order. The project defaults to the token's own project.
    pub fn test_iam_permissions(
        &self,
        token: Option<&str>,
        project_id: Option<&str>,
        permissions: &[String],
    ) -> Vec<String> {
        let project = match project_id {
            Some(p) => p.to_string(),
            None => match self.resolve(token) {
                Caller::Principal(t) => t.project_id,
                _ => return Vec::new(),
            },
        };
        permissions
            .iter()
            .filter(|p| self.check_permission(token, p, &project))
            .cloned()
            .collect()
    }

    pub fn get_iam_policy(&self, token: Option<&str>, project_id: &str) -> Result<IamPolicy, IamError> {
        self.require(token, perms::GET_IAM_POLICY, project_id)?;
        self.projects
            .get(project_id)
            .map(|p| p.policy.clone())
            .ok_or_else(|| IamError::UnknownProject(project_id.to_string()))
    }

    /// Wholesale replace with optimistic concurrency on `etag`.
    pub fn set_iam_policy(
        &mut self,
        token: Option<&str>,
        project_id: &str,
        bindings: Vec<Binding>,
        etag: &str,
    ) -> Result<IamPolicy, IamError> {
        self.require(token, perms::SET_IAM_POLICY, project_id)?;
        self.write_policy(project_id, bindings, Some(etag))
    }

    /// Policy write without an authorization check, for provisioning.
    pub fn write_policy(
        &mut self,
        project_id: &str,
        bindings: Vec<Binding>,
        etag: Option<&str>,
    ) -> Result<IamPolicy, IamError> {
        let current = self
            .projects
            .get(project_id)
            .ok_or_else(|| IamError::UnknownProject(project_id.to_string()))?
            .policy
            .etag
            .clone();
        if let Some(given) = etag {
            if given != current {
                return Err(IamError::StaleEtag {
                    given: given.to_string(),
                    current,
                });
            }
        }
        for binding in &bindings {
            if self.catalog.get(&binding.role).is_none() {
                return Err(IamError::UnknownRole(binding.role.clone()));
            }
            for member in &binding.members {
                if member != ALL_USERS && self.find_service_account(member).is_none() {
                    return Err(IamError::UnknownMember(member.clone()));
                }
            }
        }
        let state = self.projects.get_mut(project_id).expect("checked above");
        state.policy.bindings = IamPolicy::normalize(bindings);
        state.policy.etag = etag_for(etag_version(&current) + 1);
        Ok(state.policy.clone())
    }

    pub fn catalog(&self) -> &RoleCatalog {
        &self.catalog
    }
}
