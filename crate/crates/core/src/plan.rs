//! Action plans: ordered task lists drawn from a closed vocabulary.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use serde_json::{Map, Value as Json};

/// Continuous-integration tasks in their fixed execution order.
pub const CI_ORDER: [TaskId; 14] = [
    TaskId::Cca,
    TaskId::Format,
    TaskId::CodeAnalysis,
    TaskId::DataValidation,
    TaskId::Refactor,
    TaskId::DependencyReview,
    TaskId::Build,
    TaskId::Containerize,
    TaskId::Test,
    TaskId::WebsiteBuild,
    TaskId::ChangelogUpdate,
    TaskId::DraftUpdate,
    TaskId::ProgressTrack,
    TaskId::Report,
];

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum TaskId {
    Cca,
    Format,
    CodeAnalysis,
    DataValidation,
    Refactor,
    DependencyReview,
    Build,
    Containerize,
    Test,
    WebsiteBuild,
    ChangelogUpdate,
    DraftUpdate,
    ProgressTrack,
    Report,
    ProcessSubmission,
    CreateBranch,
    OpenDraftPr,
    ChangelogBootstrap,
    CloseTicket,
    ProtocolUpdate,
    UpdateStatus,
    Merge,
    Tag,
    DevRelease,
    ChangelogFinalize,
    NotesRender,
    Publish(String),
    DependencyRefreshCheck,
    Cleanup,
    CreatePr,
    CommentReply,
    RunCommand,
}

const FIXED: &[(TaskId, &str)] = &[
    (TaskId::Cca, "cca"),
    (TaskId::Format, "format"),
    (TaskId::CodeAnalysis, "code-analysis"),
    (TaskId::DataValidation, "data-validation"),
    (TaskId::Refactor, "refactor"),
    (TaskId::DependencyReview, "dependency-review"),
    (TaskId::Build, "build"),
    (TaskId::Containerize, "containerize"),
    (TaskId::Test, "test"),
    (TaskId::WebsiteBuild, "website-build"),
    (TaskId::ChangelogUpdate, "changelog-update"),
    (TaskId::DraftUpdate, "draft-update"),
    (TaskId::ProgressTrack, "progress-track"),
    (TaskId::Report, "report"),
    (TaskId::ProcessSubmission, "process-submission"),
    (TaskId::CreateBranch, "create-branch"),
    (TaskId::OpenDraftPr, "open-draft-pr"),
    (TaskId::ChangelogBootstrap, "changelog-bootstrap"),
    (TaskId::CloseTicket, "close-ticket"),
    (TaskId::ProtocolUpdate, "protocol-update"),
    (TaskId::UpdateStatus, "update-status"),
    (TaskId::Merge, "merge"),
    (TaskId::Tag, "tag"),
    (TaskId::DevRelease, "dev-release"),
    (TaskId::ChangelogFinalize, "changelog-finalize"),
    (TaskId::NotesRender, "notes-render"),
    (TaskId::DependencyRefreshCheck, "dependency-refresh-check"),
    (TaskId::Cleanup, "cleanup"),
    (TaskId::CreatePr, "create-pr"),
    (TaskId::CommentReply, "comment-reply"),
    (TaskId::RunCommand, "run-command"),
];

impl TaskId {
    /// Every fixed id; `publish:<target>` is open over target names.
    pub fn fixed() -> impl Iterator<Item = &'static TaskId> {
        FIXED.iter().map(|(id, _)| id)
    }

    pub fn as_str(&self) -> String {
        match self {
            TaskId::Publish(target) => format!("publish:{target}"),
            other => FIXED
                .iter()
                .find(|(id, _)| id == other)
                .map(|(_, s)| s.to_string())
                .expect("every fixed id has a name"),
        }
    }
}

impl fmt::Display for TaskId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.as_str())
    }
}

fn valid_target(t: &str) -> bool {
    let mut chars = t.chars();
    chars
        .next()
        .is_some_and(|c| c.is_ascii_lowercase() || c.is_ascii_digit())
        && chars.all(|c| c.is_ascii_lowercase() || c.is_ascii_digit() || c == '-')
}

impl FromStr for TaskId {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if let Some(target) = s.strip_prefix("publish:") {
            return if valid_target(target) {
                Ok(TaskId::Publish(target.to_string()))
            } else {
                Err(format!("invalid publish target {target:?}"))
            };
        }
        FIXED
            .iter()
            .find(|(_, name)| *name == s)
            .map(|(id, _)| id.clone())
            .ok_or_else(|| format!("unknown task id {s:?}"))
    }
}

impl Serialize for TaskId {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.as_str())
    }
}

impl<'de> Deserialize<'de> for TaskId {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Task {
    pub id: TaskId,
    pub params: Map<String, Json>,
}

impl Task {
    pub fn new(id: TaskId) -> Self {
        Self {
            id,
            params: Map::new(),
        }
    }

    pub fn with(mut self, key: &str, value: impl Into<Json>) -> Self {
        self.params.insert(key.to_string(), value.into());
        self
    }

    pub fn param_str(&self, key: &str) -> Option<&str> {
        self.params.get(key).and_then(Json::as_str)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub event: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub branch: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActionPlan {
    pub tasks: Vec<Task>,
    pub provenance: Provenance,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

impl ActionPlan {
    pub fn new(event: &str, branch: Option<&str>) -> Self {
        Self {
            tasks: Vec::new(),
            provenance: Provenance {
                event: event.to_string(),
                branch: branch.map(str::to_string),
            },
            warnings: Vec::new(),
        }
    }

    pub fn push(&mut self, task: Task) {
        self.tasks.push(task);
    }

    pub fn ids(&self) -> Vec<String> {
        self.tasks.iter().map(|t| t.id.as_str()).collect()
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string(self).expect("plan serializes")
    }
}
