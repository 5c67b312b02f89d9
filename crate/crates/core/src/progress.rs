//! Per-project progress ledger: hint reveals and flag submissions, keyed by
//! level reference (`namespace/name`).

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::clock::Timestamp;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Correct,
    Incorrect,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Submission {
    pub at: Timestamp,
    pub verdict: Verdict,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LevelProgress {
    pub hints_revealed: usize,
    #[serde(default)]
    pub submissions: Vec<Submission>,
}

impl LevelProgress {
    pub fn solved(&self) -> bool {
        self.submissions.iter().any(|s| s.verdict == Verdict::Correct)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Progress {
    #[serde(default)]
    pub levels: BTreeMap<String, LevelProgress>,
}

impl Progress {
    pub fn level(&self, level_ref: &str) -> LevelProgress {
        self.levels.get(level_ref).cloned().unwrap_or_default()
    }

    pub(crate) fn level_mut(&mut self, level_ref: &str) -> &mut LevelProgress {
        self.levels.entry(level_ref.to_string()).or_default()
    }
}
