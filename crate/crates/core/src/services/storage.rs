use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{ServiceError, ServiceResult};
use crate::clock::Timestamp;
use crate::emulator::Emulator;
use crate::iam::{perms, Caller};
use crate::state::content;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StoredObject {
    #[serde(with = "content")]
    pub content: Vec<u8>,
    pub content_type: String,
    pub updated_at: Timestamp,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Bucket {
    pub name: String,
    pub project_id: String,
    #[serde(default)]
    pub objects: BTreeMap<String, StoredObject>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ObjectSummary {
    pub name: String,
    pub size: usize,
    pub content_type: String,
    pub updated: Timestamp,
}

/// `[a-z0-9][a-z0-9._-]{2,62}`
pub fn is_valid_bucket_name(name: &str) -> bool {
    let b = name.as_bytes();
    (3..=63).contains(&b.len())
        && (b[0].is_ascii_lowercase() || b[0].is_ascii_digit())
        && b.iter()
            .all(|c| c.is_ascii_lowercase() || c.is_ascii_digit() || matches!(c, b'.' | b'_' | b'-'))
}

pub fn is_valid_object_name(name: &str) -> bool {
    !name.is_empty() && name.split('/').all(|seg| seg != "..")
}

impl Emulator {
    pub(crate) fn bucket(&self, name: &str) -> Option<&Bucket> {
        self.projects.values().find_map(|p| p.buckets.get(name))
    }

    fn bucket_mut(&mut self, name: &str) -> Option<&mut Bucket> {
        self.projects.values_mut().find_map(|p| p.buckets.get_mut(name))
    }

    /// Checks `permission` on the bucket's project. For a bucket that does
    /// not exist the check runs against the caller's own project, so a
    /// caller without the permission sees a denial either way.
    fn gate_bucket(&self, token: Option<&str>, bucket: &str, permission: &str) -> ServiceResult<&Bucket> {
        if let Some(b) = self.bucket(bucket) {
            self.require(token, permission, &b.project_id)?;
            return Ok(b);
        }
        let fallback = match self.resolve(token) {
            Caller::Principal(t) => Some(t.project_id),
            _ => None,
        };
        match fallback {
            Some(p) if self.check_permission(token, permission, &p) => {
                Err(ServiceError::NotFound(format!("bucket `{bucket}`")))
            }
            _ => Err(crate::iam::IamError::PermissionDenied(permission.to_string()).into()),
        }
    }

    pub fn create_bucket(&mut self, project_id: &str, name: &str) -> ServiceResult<()> {
        if !is_valid_bucket_name(name) {
            return Err(ServiceError::InvalidArgument(format!("bad bucket name `{name}`")));
        }
        if self.bucket(name).is_some() {
            return Err(ServiceError::AlreadyExists(format!("bucket `{name}`")));
        }
        let state = self
            .projects
            .get_mut(project_id)
            .ok_or_else(|| ServiceError::NotFound(format!("project `{project_id}`")))?;
        state.buckets.insert(
            name.to_string(),
            Bucket {
                name: name.to_string(),
                project_id: project_id.to_string(),
                objects: BTreeMap::new(),
            },
        );
        Ok(())
    }

    pub fn delete_bucket(&mut self, name: &str) -> bool {
        self.projects.values_mut().any(|p| p.buckets.remove(name).is_some())
    }

    /// Unchecked write; returns the object it replaced.
    pub(crate) fn put_object(
        &mut self,
        bucket: &str,
        name: &str,
        content: Vec<u8>,
        content_type: &str,
    ) -> ServiceResult<Option<StoredObject>> {
        if !is_valid_object_name(name) {
            return Err(ServiceError::InvalidArgument(format!("bad object name `{name}`")));
        }
        let now = self.now();
        let b = self
            .bucket_mut(bucket)
            .ok_or_else(|| ServiceError::NotFound(format!("bucket `{bucket}`")))?;
        Ok(b.objects.insert(
            name.to_string(),
            StoredObject {
                content,
                content_type: content_type.to_string(),
                updated_at: now,
            },
        ))
    }

    /// Puts back `previous` (or removes the object when `None`).
    pub(crate) fn restore_object(&mut self, bucket: &str, name: &str, previous: Option<StoredObject>) {
        if let Some(b) = self.bucket_mut(bucket) {
            match previous {
                Some(obj) => {
                    b.objects.insert(name.to_string(), obj);
                }
                None => {
                    b.objects.remove(name);
                }
            }
        }
    }

    pub fn buckets_list(&self, token: Option<&str>, project_id: &str) -> ServiceResult<Vec<String>> {
        self.require(token, perms::STORAGE_BUCKETS_LIST, project_id)?;
        let state = self
            .projects
            .get(project_id)
            .ok_or_else(|| ServiceError::NotFound(format!("project `{project_id}`")))?;
        Ok(state.buckets.keys().cloned().collect())
    }

    pub fn objects_list(&self, token: Option<&str>, bucket: &str) -> ServiceResult<Vec<ObjectSummary>> {
        let b = self.gate_bucket(token, bucket, perms::STORAGE_OBJECTS_LIST)?;
        Ok(b.objects
            .iter()
            .map(|(name, o)| ObjectSummary {
                name: name.clone(),
                size: o.content.len(),
                content_type: o.content_type.clone(),
                updated: o.updated_at,
            })
            .collect())
    }

    pub fn object_get(&self, token: Option<&str>, bucket: &str, name: &str) -> ServiceResult<StoredObject> {
        let b = self.gate_bucket(token, bucket, perms::STORAGE_OBJECTS_GET)?;
        b.objects
            .get(name)
            .cloned()
            .ok_or_else(|| ServiceError::NotFound(format!("object `{bucket}/{name}`")))
    }

    pub fn object_put(
        &mut self,
        token: Option<&str>,
        bucket: &str,
        name: &str,
        content: Vec<u8>,
        content_type: &str,
    ) -> ServiceResult<()> {
        self.gate_bucket(token, bucket, perms::STORAGE_OBJECTS_CREATE)?;
        self.put_object(bucket, name, content, content_type).map(|_| ())
    }
}
