use serde::{Deserialize, Serialize};

use super::{ServiceError, ServiceResult};
use crate::clock::Timestamp;
use crate::emulator::Emulator;
use crate::iam::perms;

/// Upper bound on entries returned by a single list call.
pub const LIST_CAP: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Severity {
    Debug,
    Info,
    Error,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LogEntry {
    pub id: u64,
    pub project_id: String,
    pub timestamp: Timestamp,
    pub severity: Severity,
    pub logger: String,
    pub message: String,
}

impl Emulator {
    /// Appends an entry and returns its id. Ids are per-project and increasing.
    pub(crate) fn append_log(
        &mut self,
        project_id: &str,
        severity: Severity,
        logger: &str,
        message: &str,
    ) -> Option<u64> {
        let now = self.now();
        let state = self.projects.get_mut(project_id)?;
        let id = state.next_log_id;
        state.next_log_id += 1;
        state.logs.push(LogEntry {
            id,
            project_id: project_id.to_string(),
            timestamp: now,
            severity,
            logger: logger.to_string(),
            message: message.to_string(),
        });
        Some(id)
    }

    /// Removes entries the deployment engine itself seeded. Player-visible
    /// operations never delete log entries.
    pub(crate) fn remove_logs(&mut self, project_id: &str, ids: &[u64]) {
        let (Some(&min), Some(&max)) = (ids.iter().min(), ids.iter().max()) else {
            return;
        };
        if let Some(state) = self.projects.get_mut(project_id) {
            state.logs.retain(|e| !ids.contains(&e.id));
            // Rewind the id counter when the removed ids were the newest ones.
            if max + 1 == state.next_log_id && state.logs.iter().all(|e| e.id < min) {
                state.next_log_id = min;
            }
        }
    }

    pub fn logs_list(
        &self,
        token: Option<&str>,
        project_id: &str,
        logger: Option<&str>,
    ) -> ServiceResult<Vec<LogEntry>> {
        self.require(token, perms::LOGGING_ENTRIES_LIST, project_id)?;
        let state = self
            .projects
            .get(project_id)
            .ok_or_else(|| ServiceError::NotFound(format!("project `{project_id}`")))?;
        let mut entries: Vec<LogEntry> = state
            .logs
            .iter()
            .filter(|e| logger.is_none_or(|l| e.logger == l))
            .cloned()
            .collect();
        entries.sort_by_key(|e| (e.timestamp, e.id));
        entries.truncate(LIST_CAP);
        Ok(entries)
    }
}
