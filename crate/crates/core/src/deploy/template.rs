//! Substitution-only templates: `{{ key }}` is replaced by the context
//! value for `key`. There are no loops, conditionals or filters.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::DeployError;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TemplateContext {
    pub project_id: String,
    pub nonce: String,
    pub level_name: String,
    #[serde(default)]
    pub extra: BTreeMap<String, String>,
}

impl TemplateContext {
    pub fn get(&self, key: &str) -> Option<&str> {
        match key {
            "project_id" => Some(&self.project_id),
            "nonce" => Some(&self.nonce),
            "level_name" => Some(&self.level_name),
            other => self.extra.get(other).map(String::as_str),
        }
    }
}

fn is_ident(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic() || c == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

/// Keys referenced by the template, in order of first appearance.
pub fn placeholders(text: &str) -> Result<Vec<String>, DeployError> {
    let mut keys: Vec<String> = Vec::new();
    scan(text, |key| {
        if !keys.iter().any(|k| k == key) {
            keys.push(key.to_string());
        }
        Ok(String::new())
    })?;
    Ok(keys)
}

pub fn render(text: &str, ctx: &TemplateContext) -> Result<String, DeployError> {
    scan(text, |key| {
        ctx.get(key)
            .map(str::to_string)
            .ok_or_else(|| DeployError::UnknownPlaceholder(key.to_string()))
    })
}

fn scan(text: &str, mut replace: impl FnMut(&str) -> Result<String, DeployError>) -> Result<String, DeployError> {
    let mut out = String::with_capacity(text.len());
    let mut rest = text;
    while let Some(start) = rest.find("{{") {
        out.push_str(&rest[..start]);
        let after = &rest[start + 2..];
        let end = after.find("}}").ok_or_else(|| DeployError::TemplateSyntax {
            offset: text.len() - rest.len() + start,
            message: "unterminated `{{`".into(),
        })?;
        let key = after[..end].trim();
        if !is_ident(key) {
            return Err(DeployError::TemplateSyntax {
                offset: text.len() - rest.len() + start,
                message: format!("`{key}` is not a placeholder name"),
            });
        }
        out.push_str(&replace(key)?);
        rest = &after[end + 2..];
    }
    out.push_str(rest);
    Ok(out)
}
