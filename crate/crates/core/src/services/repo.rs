//! Source repositories: content-addressed linear commit chains.
//!
//! A commit id is the hex SHA-256 of:
//!
//! ```text
//! "parent " <parent id or empty> "\n"
//! "message " <byte length> "\n" <message> "\n"
//! for each file, in path order:
//!     "file " <path byte length> " " <data byte length> "\n" <path> "\n" <data> "\n"
//! ```

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{ServiceError, ServiceResult};
use crate::emulator::Emulator;
use crate::iam::perms;
use crate::state::content;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Commit {
    pub repo_name: String,
    pub commit_id: String,
    #[serde(default)]
    pub parent_id: Option<String>,
    pub message: String,
    #[serde(with = "content::map")]
    pub files: BTreeMap<String, Vec<u8>>,
}

impl Commit {
    pub fn recompute_id(&self) -> String {
        commit_id(self.parent_id.as_deref(), &self.message, &self.files)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Repo {
    pub name: String,
    pub project_id: String,
    /// Oldest first.
    #[serde(default)]
    pub commits: Vec<Commit>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CommitSummary {
    pub commit_id: String,
    pub parent_id: Option<String>,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CommitDetail {
    pub commit_id: String,
    pub parent_id: Option<String>,
    pub message: String,
    pub files: Vec<String>,
}

pub fn commit_id(parent: Option<&str>, message: &str, files: &BTreeMap<String, Vec<u8>>) -> String {
    let mut h = Sha256::new();
    h.update(b"parent ");
    h.update(parent.unwrap_or("").as_bytes());
    h.update(b"\n");
    h.update(format!("message {}\n", message.len()).as_bytes());
    h.update(message.as_bytes());
    h.update(b"\n");
    for (path, data) in files {
        h.update(format!("file {} {}\n", path.len(), data.len()).as_bytes());
        h.update(path.as_bytes());
        h.update(b"\n");
        h.update(data);
        h.update(b"\n");
    }
    hex::encode(h.finalize())
}

impl Emulator {
    fn repo(&self, project_id: &str, name: &str) -> ServiceResult<&Repo> {
        self.projects
            .get(project_id)
            .and_then(|p| p.repos.get(name))
            .ok_or_else(|| ServiceError::NotFound(format!("repo `{name}`")))
    }

    pub fn create_repo(&mut self, project_id: &str, name: &str) -> ServiceResult<()> {
        let state = self
            .projects
            .get_mut(project_id)
            .ok_or_else(|| ServiceError::NotFound(format!("project `{project_id}`")))?;
        if state.repos.contains_key(name) {
            return Err(ServiceError::AlreadyExists(format!("repo `{name}`")));
        }
        state.repos.insert(
            name.to_string(),
            Repo {
                name: name.to_string(),
                project_id: project_id.to_string(),
                commits: Vec::new(),
            },
        );
        Ok(())
    }

    pub fn delete_repo(&mut self, project_id: &str, name: &str) -> bool {
        self.projects
            .get_mut(project_id)
            .is_some_and(|p| p.repos.remove(name).is_some())
    }

    /// Appends a commit on top of the current head and returns its id.
    pub fn push_commit(
        &mut self,
        project_id: &str,
        repo: &str,
        message: &str,
        files: BTreeMap<String, Vec<u8>>,
    ) -> ServiceResult<String> {
        let r = self
            .projects
            .get_mut(project_id)
            .and_then(|p| p.repos.get_mut(repo))
            .ok_or_else(|| ServiceError::NotFound(format!("repo `{repo}`")))?;
        let parent_id = r.commits.last().map(|c| c.commit_id.clone());
        let id = commit_id(parent_id.as_deref(), message, &files);
        r.commits.push(Commit {
            repo_name: repo.to_string(),
            commit_id: id.clone(),
            parent_id,
            message: message.to_string(),
            files,
        });
        Ok(id)
    }

    pub(crate) fn truncate_repo(&mut self, project_id: &str, repo: &str, len: usize) {
        if let Some(r) = self.projects.get_mut(project_id).and_then(|p| p.repos.get_mut(repo)) {
            r.commits.truncate(len);
        }
    }

    pub(crate) fn repo_len(&self, project_id: &str, repo: &str) -> Option<usize> {
        self.repo(project_id, repo).ok().map(|r| r.commits.len())
    }

    pub fn repos_list(&self, token: Option<&str>, project_id: &str) -> ServiceResult<Vec<String>> {
        self.require(token, perms::REPOS_LIST, project_id)?;
        Ok(self
            .projects
            .get(project_id)
            .map(|p| p.repos.keys().cloned().collect())
            .unwrap_or_default())
    }

    /// Newest first.
    pub fn repo_log(&self, token: Option<&str>, project_id: &str, repo: &str) -> ServiceResult<Vec<CommitSummary>> {
        self.require(token, perms::REPOS_GET, project_id)?;
        let r = self.repo(project_id, repo)?;
        Ok(r.commits
            .iter()
            .rev()
            .map(|c| CommitSummary {
                commit_id: c.commit_id.clone(),
                parent_id: c.parent_id.clone(),
                message: c.message.clone(),
            })
            .collect())
    }

    /// Resolves a full id, a unique prefix of at least 4 chars, or `HEAD`.
    fn find_commit<'a>(r: &'a Repo, reference: &str) -> ServiceResult<&'a Commit> {
        if reference == "HEAD" {
            return r
                .commits
                .last()
                .ok_or_else(|| ServiceError::UnknownCommit(reference.into()));
        }
        if reference.len() < 4 {
            return Err(ServiceError::UnknownCommit(reference.into()));
        }
        let mut hits = r.commits.iter().filter(|c| c.commit_id.starts_with(reference));
        match (hits.next(), hits.next()) {
            (Some(c), None) => Ok(c),
            _ => Err(ServiceError::UnknownCommit(reference.into())),
        }
    }

    pub fn repo_commit(
        &self,
        token: Option<&str>,
        project_id: &str,
        repo: &str,
        reference: &str,
    ) -> ServiceResult<CommitDetail> {
        self.require(token, perms::REPOS_GET, project_id)?;
        let c = Self::find_commit(self.repo(project_id, repo)?, reference)?;
        Ok(CommitDetail {
            commit_id: c.commit_id.clone(),
            parent_id: c.parent_id.clone(),
            message: c.message.clone(),
            files: c.files.keys().cloned().collect(),
        })
    }

    pub fn repo_show(
        &self,
        token: Option<&str>,
        project_id: &str,
        repo: &str,
        reference: &str,
        path: &str,
    ) -> ServiceResult<Vec<u8>> {
        self.require(token, perms::REPOS_GET, project_id)?;
        let c = Self::find_commit(self.repo(project_id, repo)?, reference)?;
        c.files
            .get(path)
            .cloned()
            .ok_or_else(|| ServiceError::PathNotInCommit(path.to_string()))
    }
}
