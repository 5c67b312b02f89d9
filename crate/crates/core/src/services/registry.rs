use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{ServiceError, ServiceResult};
use crate::archive;
use crate::emulator::Emulator;
use crate::iam::perms;
use crate::state::content;

/// Where a container image keeps its web handler.
pub const HANDLER_PATH: &str = "/app/server.dsl";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContainerImage {
    pub registry_path: String,
    pub project_id: String,
    #[serde(with = "content::map")]
    pub files: BTreeMap<String, Vec<u8>>,
}

/// Splits `<project_id>/<name>:<tag>` into its parts.
pub fn parse_registry_path(path: &str) -> Option<(&str, &str, &str)> {
    let (project, rest) = path.split_once('/')?;
    let (name, tag) = rest.split_once(':')?;
    let ok = |s: &str| {
        !s.is_empty()
            && s.bytes()
                .all(|b| b.is_ascii_lowercase() || b.is_ascii_digit() || matches!(b, b'-' | b'_' | b'.'))
    };
    (ok(project) && ok(name) && ok(tag)).then_some((project, name, tag))
}

impl Emulator {
    pub(crate) fn image(&self, registry_path: &str) -> Option<&ContainerImage> {
        let (project, _, _) = parse_registry_path(registry_path)?;
        self.projects.get(project)?.images.get(registry_path)
    }

    pub fn push_image(&mut self, registry_path: &str, files: BTreeMap<String, Vec<u8>>) -> ServiceResult<()> {
        let (project, _, _) = parse_registry_path(registry_path)
            .ok_or_else(|| ServiceError::InvalidArgument(format!("bad registry path `{registry_path}`")))?;
        let state = self
            .projects
            .get_mut(project)
            .ok_or_else(|| ServiceError::NotFound(format!("project `{project}`")))?;
        if state.images.contains_key(registry_path) {
            return Err(ServiceError::AlreadyExists(format!("image `{registry_path}`")));
        }
        state.images.insert(
            registry_path.to_string(),
            ContainerImage {
                registry_path: registry_path.to_string(),
                project_id: project.to_string(),
                files,
            },
        );
        Ok(())
    }

    pub fn delete_image(&mut self, registry_path: &str) -> bool {
        let Some((project, _, _)) = parse_registry_path(registry_path) else {
            return false;
        };
        self.projects
            .get_mut(project)
            .is_some_and(|p| p.images.remove(registry_path).is_some())
    }

    pub fn images_list(&self, token: Option<&str>, project_id: &str) -> ServiceResult<Vec<String>> {
        self.require(token, perms::IMAGES_LIST, project_id)?;
        Ok(self
            .projects
            .get(project_id)
            .map(|p| p.images.keys().cloned().collect())
            .unwrap_or_default())
    }

    /// The image's files as an archive stream (see [`crate::archive`]).
    pub fn image_pull(&self, token: Option<&str>, registry_path: &str) -> ServiceResult<Vec<u8>> {
        let project = parse_registry_path(registry_path)
            .map(|(p, _, _)| p)
            .ok_or_else(|| ServiceError::UnknownImage(registry_path.to_string()))?;
        self.require(token, perms::IMAGES_PULL, project)?;
        self.image(registry_path)
            .map(|img| archive::pack(&img.files))
            .ok_or_else(|| ServiceError::UnknownImage(registry_path.to_string()))
    }
}
