//! Per-runtime metadata server.
//!
//! There is no network routing: the caller names the context (an instance
//! or a function runtime) whose metadata it is talking to. Only handler
//! code running in that context and ssh sessions on that instance get a
//! [`MetadataContext`]; the public API never constructs one from a request.

use serde_json::json;

use super::{ServiceError, ServiceResult};
use crate::emulator::{Emulator, MetadataMode};
use crate::iam::TokenKind;

pub const FLAVOR_HEADER: &str = "Metadata-Flavor";
pub const FLAVOR_VALUE: &str = "Google";
pub const STRICT_HEADER: &str = "X-EmuCloud-Metadata-Request";
pub const STRICT_VALUE: &str = "true";
pub const METADATA_HOSTS: &[&str] = &["metadata.google.internal", "metadata", "169.254.169.254"];

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum MetadataContext {
    Instance { project_id: String, instance: String },
    Function { project_id: String, function: String },
}

impl MetadataContext {
    pub fn project_id(&self) -> &str {
        match self {
            MetadataContext::Instance { project_id, .. } | MetadataContext::Function { project_id, .. } => project_id,
        }
    }
}

fn header<'a>(headers: &'a [(String, String)], name: &str) -> Option<&'a str> {
    headers
        .iter()
        .find(|(k, _)| k.eq_ignore_ascii_case(name))
        .map(|(_, v)| v.as_str())
}

/// Strips the optional `/computeMetadata/v1/` prefix and splits off the query.
fn normalize(path_and_query: &str) -> (String, Vec<(String, String)>) {
    let (path, query) = path_and_query.split_once('?').unwrap_or((path_and_query, ""));
    let path = path.trim_start_matches('/');
    let path = path.strip_prefix("computeMetadata/v1").unwrap_or(path);
    let path = path.trim_start_matches('/').to_string();
    let query = url::form_urlencoded::parse(query.as_bytes())
        .map(|(k, v)| (k.into_owned(), v.into_owned()))
        .collect();
    (path, query)
}

impl Emulator {
    fn context_identity(&self, ctx: &MetadataContext) -> ServiceResult<(String, String, String)> {
        match ctx {
            MetadataContext::Instance { project_id, instance } => {
                let inst = self
                    .instance(project_id, instance)
                    .ok_or_else(|| ServiceError::UnknownInstance(instance.clone()))?;
                Ok((
                    inst.attached_service_account.clone(),
                    inst.name.clone(),
                    inst.zone.clone(),
                ))
            }
            MetadataContext::Function { project_id, function } => {
                let f = self
                    .projects
                    .get(project_id)
                    .and_then(|p| p.functions.get(function))
                    .ok_or_else(|| ServiceError::NotFound(format!("function `{function}`")))?;
                Ok((f.runtime_account.clone(), f.name.clone(), "us-central1-fn".to_string()))
            }
        }
    }

    /// Answers a metadata request. Header checks come before path lookup.
    pub fn metadata_get(
        &mut self,
        ctx: &MetadataContext,
        path_and_query: &str,
        headers: &[(String, String)],
    ) -> ServiceResult<String> {
        if header(headers, FLAVOR_HEADER) != Some(FLAVOR_VALUE) {
            return Err(ServiceError::MissingHeader(FLAVOR_HEADER.to_string()));
        }
        if self.settings.metadata_mode == MetadataMode::StrictHeader
            && header(headers, STRICT_HEADER) != Some(STRICT_VALUE)
        {
            return Err(ServiceError::MissingHeader(STRICT_HEADER.to_string()));
        }

        let (account, name, zone) = self.context_identity(ctx)?;
        let project_id = ctx.project_id().to_string();
        let (path, query) = normalize(path_and_query);
        let query_get = |key: &str| query.iter().find(|(k, _)| k == key).map(|(_, v)| v.clone());
        let unknown = || ServiceError::UnknownPath(path_and_query.to_string());

        let sa_rest = path.strip_prefix("instance/service-accounts/").map(|rest| {
            let (who, tail) = rest.split_once('/').unwrap_or((rest, ""));
            (who.to_string(), tail.to_string())
        });
        if let Some((who, tail)) = sa_rest {
            if who.is_empty() {
                return Ok(format!("default/\n{account}/\n"));
            }
            if who != "default" && who != account {
                return Err(unknown());
            }
            return match tail.as_str() {
                "" => Ok("email\nidentity\nscopes\ntoken\n".to_string()),
                "email" => Ok(account),
                "scopes" => Ok("https://www.googleapis.com/auth/cloud-platform\n".to_string()),
                "token" => {
                    let now = self.now();
                    let token = self.issue_token(&account, &project_id, TokenKind::Access, None);
                    if query_get("format").as_deref() == Some("text") {
                        Ok(token.token_id)
                    } else {
                        Ok(json!({
                            "access_token": token.token_id,
                            "expires_in": token.expires_in_secs(now),
                            "token_type": "Bearer",
                        })
                        .to_string())
                    }
                }
                "identity" => {
                    let audience = query_get("audience").filter(|a| !a.is_empty()).ok_or_else(unknown)?;
                    Ok(self
                        .issue_token(&account, &project_id, TokenKind::Identity, Some(audience))
                        .token_id)
                }
                _ => Err(unknown()),
            };
        }

        match (path.as_str(), ctx) {
            ("project/project-id", _) => Ok(project_id),
            ("instance/name", _) => Ok(name),
            ("instance/zone", _) => Ok(zone),
            ("instance/attributes/" | "instance/attributes", MetadataContext::Instance { project_id, instance }) => {
                let inst = self.instance(project_id, instance).ok_or_else(unknown)?;
                Ok(inst.metadata.keys().map(|k| format!("{k}\n")).collect())
            }
            (p, MetadataContext::Instance { project_id, instance }) if p.starts_with("instance/attributes/") => {
                let key = &p["instance/attributes/".len()..];
                self.instance(project_id, instance)
                    .and_then(|i| i.metadata.get(key).cloned())
                    .ok_or_else(unknown)
            }
            _ => Err(unknown()),
        }
    }
}
