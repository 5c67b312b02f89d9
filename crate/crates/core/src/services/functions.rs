use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::metadata::MetadataContext;
use super::runtime::RuntimeHost;
use super::{ServiceError, ServiceResult};
use crate::emulator::Emulator;
use crate::handler::{self, EvalError, Request};
use crate::iam::{perms, Caller, TokenKind};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FunctionDef {
    pub name: String,
    pub project_id: String,
    pub url: String,
    #[serde(default)]
    pub env: BTreeMap<String, String>,
    pub source: String,
    #[serde(default)]
    pub require_auth: bool,
    pub runtime_account: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FunctionSummary {
    pub name: String,
    pub url: String,
    pub require_auth: bool,
    pub runtime_account: String,
}

/// Everything but the source.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FunctionDescription {
    pub name: String,
    pub url: String,
    pub require_auth: bool,
    pub runtime_account: String,
    pub env: BTreeMap<String, String>,
}

pub fn function_url(project_id: &str, name: &str) -> String {
    format!("/fn/{project_id}/{name}")
}

/// The path part of an audience, which may be a full URL or a bare path.
fn audience_path(audience: &str) -> Option<String> {
    if audience.starts_with('/') {
        return Some(audience.split(['?', '#']).next().unwrap_or("").to_string());
    }
    url::Url::parse(audience).ok().map(|u| u.path().to_string())
}

impl Emulator {
    fn function(&self, project_id: &str, name: &str) -> ServiceResult<&FunctionDef> {
        self.projects
            .get(project_id)
            .and_then(|p| p.functions.get(name))
            .ok_or_else(|| ServiceError::NotFound(format!("function `{name}`")))
    }

    /// Deploys a function. The source must parse and the runtime account
    /// must belong to the project.
    #[allow(clippy::too_many_arguments)]
    pub fn create_function(
        &mut self,
        project_id: &str,
        name: &str,
        source: &str,
        env: BTreeMap<String, String>,
        require_auth: bool,
        runtime_account: &str,
    ) -> ServiceResult<FunctionDef> {
        handler::parse(source)?;
        let state = self
            .projects
            .get(project_id)
            .ok_or_else(|| ServiceError::NotFound(format!("project `{project_id}`")))?;
        if !state.service_accounts.contains_key(runtime_account) {
            return Err(ServiceError::InvalidArgument(format!(
                "service account `{runtime_account}` is not in project `{project_id}`"
            )));
        }
        if state.functions.contains_key(name) {
            return Err(ServiceError::AlreadyExists(format!("function `{name}`")));
        }
        let def = FunctionDef {
            name: name.to_string(),
            project_id: project_id.to_string(),
            url: function_url(project_id, name),
            env,
            source: source.to_string(),
            require_auth,
            runtime_account: runtime_account.to_string(),
        };
        self.projects
            .get_mut(project_id)
            .expect("checked above")
            .functions
            .insert(name.to_string(), def.clone());
        Ok(def)
    }

    pub fn delete_function(&mut self, project_id: &str, name: &str) -> bool {
        self.projects
            .get_mut(project_id)
            .is_some_and(|p| p.functions.remove(name).is_some())
    }

    /// Unchecked env upsert or removal; returns the previous value.
    pub(crate) fn put_function_env(
        &mut self,
        project_id: &str,
        name: &str,
        key: &str,
        value: Option<String>,
    ) -> ServiceResult<Option<String>> {
        let f = self
            .projects
            .get_mut(project_id)
            .and_then(|p| p.functions.get_mut(name))
            .ok_or_else(|| ServiceError::NotFound(format!("function `{name}`")))?;
        Ok(match value {
            Some(v) => f.env.insert(key.to_string(), v),
            None => f.env.remove(key),
        })
    }

    pub(crate) fn replace_function_source(&mut self, project_id: &str, name: &str, source: String) {
        if let Some(f) = self
            .projects
            .get_mut(project_id)
            .and_then(|p| p.functions.get_mut(name))
        {
            f.source = source;
        }
    }

    pub fn functions_list(&self, token: Option<&str>, project_id: &str) -> ServiceResult<Vec<FunctionSummary>> {
        self.require(token, perms::FUNCTIONS_LIST, project_id)?;
        Ok(self
            .projects
            .get(project_id)
            .map(|p| {
                p.functions
                    .values()
                    .map(|f| FunctionSummary {
                        name: f.name.clone(),
                        url: f.url.clone(),
                        require_auth: f.require_auth,
                        runtime_account: f.runtime_account.clone(),
                    })
                    .collect()
            })
            .unwrap_or_default())
    }

    pub fn function_get(
        &self,
        token: Option<&str>,
        project_id: &str,
        name: &str,
    ) -> ServiceResult<FunctionDescription> {
        self.require(token, perms::FUNCTIONS_GET, project_id)?;
        let f = self.function(project_id, name)?;
        Ok(FunctionDescription {
            name: f.name.clone(),
            url: f.url.clone(),
            require_auth: f.require_auth,
            runtime_account: f.runtime_account.clone(),
            env: f.env.clone(),
        })
    }

    pub fn function_source_get(&self, token: Option<&str>, project_id: &str, name: &str) -> ServiceResult<String> {
        self.require(token, perms::FUNCTIONS_SOURCE_GET, project_id)?;
        Ok(self.function(project_id, name)?.source.clone())
    }

    pub fn function_update(
        &mut self,
        token: Option<&str>,
        project_id: &str,
        name: &str,
        source: &str,
    ) -> ServiceResult<()> {
        self.require(token, perms::FUNCTIONS_UPDATE, project_id)?;
        self.function(project_id, name)?;
        handler::parse(source)?;
        self.replace_function_source(project_id, name, source.to_string());
        Ok(())
    }

    /// Runs the function's handler under its runtime account. Functions that
    /// require auth accept only an identity token whose audience is the
    /// function's URL.
    pub fn function_invoke(
        &mut self,
        token: Option<&str>,
        project_id: &str,
        name: &str,
        request: &Request,
    ) -> ServiceResult<String> {
        let f = self.function(project_id, name)?.clone();
        if f.require_auth {
            let authorized = match self.resolve(token) {
                Caller::Principal(t) => {
                    t.kind == TokenKind::Identity
                        && t.audience.as_deref().and_then(audience_path).as_deref() == Some(f.url.as_str())
                }
                _ => false,
            };
            if !authorized {
                return Err(ServiceError::AuthRequired);
            }
        }
        let program = handler::parse(&f.source)?;
        let ctx = MetadataContext::Function {
            project_id: project_id.to_string(),
            function: name.to_string(),
        };
        let mut host = RuntimeHost::new(self, ctx, name);
        handler::run(&program, request, &f.env, &mut host).map_err(eval_to_service)
    }
}

pub(crate) fn eval_to_service(e: EvalError) -> ServiceError {
    match e {
        EvalError::LimitExceeded(m) => ServiceError::LimitExceeded(m),
        EvalError::Raised(_) | EvalError::Runtime(_) => ServiceError::Handler,
    }
}
