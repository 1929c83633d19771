//! Maps repository events to action plans.

mod ci;
mod replay;

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value as Json};
use thiserror::Error;

pub use ci::{default_triggers, plan_cd, plan_ci, publish_targets, release_classes, PathClass};
pub use replay::{parse_event_log, replay, ReplayOutcome};

use crate::config::{ConfigNode, ConfigTree};
use crate::issue::{
    apply_status_transition, change_type_for, parse_command_comment, IssueError, Ticket,
};
use crate::plan::{ActionPlan, Task, TaskId};
use crate::vcs::{
    classify_branch, plan_merge, plan_release_branch_split, tag_for, BranchKind, MergeRequest,
    RepoState, VcsError, VcsTemplates, VersionAction,
};
use crate::version::{
    next_dev_version, parse_version, ChangeType, Phase, PublicVersion, VersionError,
};

/// Default maintenance sequence for scheduled runs.
pub const SCHEDULED_TASKS: &[TaskId] = &[
    TaskId::DependencyRefreshCheck,
    TaskId::Cca,
    TaskId::CodeAnalysis,
    TaskId::Refactor,
    TaskId::Format,
    TaskId::Cleanup,
    TaskId::CreatePr,
];

#[derive(Debug, Error, PartialEq)]
pub enum DispatchError {
    #[error("unknown event kind {0:?}")]
    UnknownKind(String),
    #[error("malformed event: {0}")]
    Malformed(String),
    #[error("{kind} event is missing payload key {key:?}")]
    MissingKey { kind: EventKind, key: &'static str },
    #[error("{kind} event has an invalid {key:?}: {message}")]
    InvalidKey {
        kind: EventKind,
        key: &'static str,
        message: String,
    },
    #[error("{kind} event requires a branch")]
    MissingBranch { kind: EventKind },
    #[error("unknown task id in workflows.schedule.tasks: {0}")]
    UnknownTask(String),
    #[error(transparent)]
    Vcs(#[from] VcsError),
    #[error(transparent)]
    Issue(#[from] IssueError),
    #[error(transparent)]
    Version(#[from] VersionError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    IssueOpened,
    IssueLabeled,
    CommentPosted,
    CommitPushed,
    PrApproved,
    Merged,
    Scheduled,
}

impl EventKind {
    pub const ALL: [EventKind; 7] = [
        EventKind::IssueOpened,
        EventKind::IssueLabeled,
        EventKind::CommentPosted,
        EventKind::CommitPushed,
        EventKind::PrApproved,
        EventKind::Merged,
        EventKind::Scheduled,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            EventKind::IssueOpened => "issue_opened",
            EventKind::IssueLabeled => "issue_labeled",
            EventKind::CommentPosted => "comment_posted",
            EventKind::CommitPushed => "commit_pushed",
            EventKind::PrApproved => "pr_approved",
            EventKind::Merged => "merged",
            EventKind::Scheduled => "scheduled",
        }
    }
}

impl fmt::Display for EventKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for EventKind {
    type Err = DispatchError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        EventKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| DispatchError::UnknownKind(s.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RepoEvent {
    pub kind: EventKind,
    pub payload: Map<String, Json>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub branch: Option<String>,
}

impl RepoEvent {
    pub fn new(kind: EventKind, payload: Json, branch: Option<&str>) -> Self {
        Self {
            kind,
            payload: match payload {
                Json::Object(map) => map,
                _ => Map::new(),
            },
            branch: branch.map(str::to_string),
        }
    }

    pub fn from_json(value: &Json) -> Result<Self, DispatchError> {
        let obj = value
            .as_object()
            .ok_or_else(|| DispatchError::Malformed("event must be an object".into()))?;
        let kind: EventKind = obj
            .get("kind")
            .and_then(Json::as_str)
            .ok_or_else(|| DispatchError::Malformed("event has no kind".into()))?
            .parse()?;
        let payload = match obj.get("payload") {
            None | Some(Json::Null) => Map::new(),
            Some(Json::Object(map)) => map.clone(),
            Some(_) => return Err(DispatchError::Malformed("payload must be an object".into())),
        };
        let branch = match obj.get("branch") {
            None | Some(Json::Null) => None,
            Some(Json::String(b)) => Some(b.clone()),
            Some(_) => return Err(DispatchError::Malformed("branch must be a string".into())),
        };
        Ok(Self {
            kind,
            payload,
            branch,
        })
    }

    pub fn from_json_str(text: &str) -> Result<Self, DispatchError> {
        let value: Json =
            serde_json::from_str(text).map_err(|e| DispatchError::Malformed(e.to_string()))?;
        Self::from_json(&value)
    }

    fn get(&self, key: &'static str) -> Result<&Json, DispatchError> {
        self.payload
            .get(key)
            .filter(|v| !v.is_null())
            .ok_or(DispatchError::MissingKey {
                kind: self.kind,
                key,
            })
    }

    fn str_key(&self, key: &'static str) -> Result<&str, DispatchError> {
        self.get(key)?
            .as_str()
            .ok_or_else(|| self.invalid(key, "expected a string"))
    }

    fn opt_str(&self, key: &'static str) -> Result<Option<&str>, DispatchError> {
        match self.payload.get(key) {
            None | Some(Json::Null) => Ok(None),
            Some(Json::String(s)) => Ok(Some(s)),
            Some(_) => Err(self.invalid(key, "expected a string")),
        }
    }

    fn u64_key(&self, key: &'static str) -> Result<u64, DispatchError> {
        self.get(key)?
            .as_u64()
            .ok_or_else(|| self.invalid(key, "expected a non-negative integer"))
    }

    fn opt_u64(&self, key: &'static str) -> Result<Option<u64>, DispatchError> {
        match self.payload.get(key) {
            None | Some(Json::Null) => Ok(None),
            Some(v) => v
                .as_u64()
                .map(Some)
                .ok_or_else(|| self.invalid(key, "expected a non-negative integer")),
        }
    }

    fn invalid(&self, key: &'static str, message: impl Into<String>) -> DispatchError {
        DispatchError::InvalidKey {
            kind: self.kind,
            key,
            message: message.into(),
        }
    }

    fn branch(&self) -> Result<&str, DispatchError> {
        self.branch
            .as_deref()
            .ok_or(DispatchError::MissingBranch { kind: self.kind })
    }

    /// Change type from `change`, or from `issue_type` via the control center.
    fn change(&self, tree: &ConfigTree) -> Result<ChangeType, DispatchError> {
        if let Some(c) = self.opt_str("change")? {
            return c
                .parse()
                .map_err(|e: VersionError| self.invalid("change", e.to_string()));
        }
        if let Some(t) = self.opt_str("issue_type")? {
            return change_type_for(tree, t)
                .ok_or_else(|| self.invalid("issue_type", format!("{t} has no change type")));
        }
        Err(DispatchError::MissingKey {
            kind: self.kind,
            key: "change",
        })
    }

    fn merge_request(&self, tree: &ConfigTree) -> Result<MergeRequest, DispatchError> {
        let phase = match self.opt_str("phase")? {
            Some(p) => Some(
                p.parse::<Phase>()
                    .map_err(|e| self.invalid("phase", e.to_string()))?,
            ),
            None => None,
        };
        Ok(MergeRequest {
            source: self.str_key("source")?.to_string(),
            target: self.str_key("target")?.to_string(),
            issue: self.opt_u64("issue")?,
            title: self.opt_str("title")?.unwrap_or("").to_string(),
            type_id: self.opt_str("issue_type")?.unwrap_or("change").to_string(),
            change: self.change(tree)?,
            phase,
        })
    }
}

fn changed_classes(event: &RepoEvent) -> Result<BTreeSet<PathClass>, DispatchError> {
    let list = match event.payload.get("changes") {
        None | Some(Json::Null) => return Ok(BTreeSet::new()),
        Some(Json::Array(items)) => items,
        Some(_) => return Err(event.invalid("changes", "expected a list of path classes")),
    };
    list.iter()
        .map(|v| {
            v.as_str()
                .ok_or_else(|| event.invalid("changes", "expected strings"))?
                .parse()
                .map_err(|e: String| event.invalid("changes", e))
        })
        .collect()
}

fn scheduled_tasks(tree: &ConfigTree) -> Result<Vec<TaskId>, DispatchError> {
    match tree
        .get("workflows.schedule.tasks")
        .and_then(ConfigNode::as_sequence)
    {
        None => Ok(SCHEDULED_TASKS.to_vec()),
        Some(items) => items
            .iter()
            .map(|n| {
                let s = n.to_embedded_string();
                s.parse().map_err(|_| DispatchError::UnknownTask(s))
            })
            .collect(),
    }
}

/// The plan for one event. Pure: equal inputs give equal plans.
pub fn dispatch(
    event: &RepoEvent,
    state: &RepoState,
    tree: &ConfigTree,
) -> Result<ActionPlan, DispatchError> {
    let mut plan = ActionPlan::new(event.kind.as_str(), event.branch.as_deref());
    match event.kind {
        EventKind::IssueOpened => {
            plan.push(
                Task::new(TaskId::ProcessSubmission)
                    .with("form_id", event.str_key("form_id")?)
                    .with("number", event.u64_key("number")?),
            );
        }
        EventKind::IssueLabeled => {
            let label = event.str_key("label")?;
            let ticket: Ticket = serde_json::from_value(event.get("ticket")?.clone())
                .map_err(|e| event.invalid("ticket", e.to_string()))?;
            let (_, transition) = apply_status_transition(&ticket, label, state, tree)?;
            plan.tasks = transition.tasks;
        }
        EventKind::CommentPosted => {
            let issue = event.u64_key("issue")?;
            match parse_command_comment(event.str_key("body")?) {
                Ok(commands) => {
                    for c in commands {
                        plan.push(
                            Task::new(TaskId::RunCommand)
                                .with("issue", issue)
                                .with("verb", c.verb.as_str())
                                .with("args", json!(c.args)),
                        );
                    }
                }
                Err(e) => plan.push(
                    Task::new(TaskId::CommentReply)
                        .with("issue", issue)
                        .with("message", e.to_string()),
                ),
            }
        }
        EventKind::CommitPushed => plan_push(event, state, tree, &mut plan)?,
        EventKind::PrApproved => {
            let req = event.merge_request(tree)?;
            let merge = plan_merge(&req, state, &VcsTemplates::from_tree(tree))?;
            if classify_branch(&req.target)? == BranchKind::Main {
                if let Some(split) = plan_release_branch_split(state, req.change) {
                    plan.push(
                        Task::new(TaskId::CreateBranch)
                            .with("branch", split.name.as_str())
                            .with("source", split.source.as_str())
                            .with("message", split.message.as_str()),
                    );
                }
            }
            if let Some(create) = &merge.create_target {
                plan.push(
                    Task::new(TaskId::CreateBranch)
                        .with("branch", create.name.as_str())
                        .with("source", create.source.as_str())
                        .with("message", create.message.as_str()),
                );
            }
            let mut task = Task::new(TaskId::Merge)
                .with("source", merge.source.as_str())
                .with("target", merge.target.as_str())
                .with("strategy", "squash")
                .with("message", merge.message.as_str())
                .with("version_action", merge.version_action.to_string());
            if let Some(v) = merge.version {
                task = task.with("version", v.to_string());
            }
            plan.push(task);
        }
        EventKind::Merged => {
            let target = event.str_key("target")?.to_string();
            let target_kind = classify_branch(&target)?;
            let version = match event.opt_str("version")? {
                Some(v) => {
                    Some(parse_version(v).map_err(|e| event.invalid("version", e.to_string()))?)
                }
                None => {
                    let req = event.merge_request(tree)?;
                    let merge = plan_merge(&req, state, &VcsTemplates::from_tree(tree))?;
                    (merge.version_action != VersionAction::None)
                        .then_some(merge.version)
                        .flatten()
                }
            };
            match version {
                Some(v) => {
                    let (tasks, warnings) = plan_cd(&v, &target, tree);
                    plan.tasks.extend(tasks);
                    plan.warnings.extend(warnings);
                }
                None => plan
                    .warnings
                    .push("merge carries no release content; nothing to deploy".into()),
            }
            if target_kind == BranchKind::Main {
                plan.push(Task::new(TaskId::Cca));
            }
        }
        EventKind::Scheduled => {
            for id in scheduled_tasks(tree)? {
                plan.push(Task::new(id));
            }
        }
    }
    Ok(plan)
}

fn plan_push(
    event: &RepoEvent,
    state: &RepoState,
    tree: &ConfigTree,
    plan: &mut ActionPlan,
) -> Result<(), DispatchError> {
    let branch_name = event.branch()?;
    let kind = classify_branch(branch_name)?;
    let branch = state
        .branch(branch_name)
        .ok_or_else(|| VcsError::UnknownBranch(branch_name.to_string()))?;
    let changed = changed_classes(event)?;
    let message = event
        .payload
        .get("commit")
        .and_then(|c| c.get("message"))
        .and_then(Json::as_str);
    for id in plan_ci(&changed, tree) {
        let mut task = Task::new(id.clone());
        if id == TaskId::ProgressTrack {
            if let BranchKind::Development { issue, .. } = &kind {
                task = task.with("issue", *issue);
            }
            if let Some(m) = message {
                task = task.with("message", m);
            }
        }
        plan.push(task);
    }
    let release_related = !release_classes(tree).is_disjoint(&changed);
    if let (BranchKind::Development { issue, target }, true) = (&kind, release_related) {
        let target_tags = state.tags_of(target);
        let version: PublicVersion =
            next_dev_version(&branch.tags, &target_tags, event.change(tree)?, *issue)?;
        plan.push(
            Task::new(TaskId::DevRelease)
                .with("version", version.to_string())
                .with("tag", tag_for(&version))
                .with("branch", branch_name),
        );
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::merge_documents;

    fn tree() -> ConfigTree {
        merge_documents([("w.yaml", "workflows:\n  cd:\n    targets: [releases]\n")]).unwrap()
    }

    fn state() -> RepoState {
        let mut s = RepoState::single_main("c0", &["1.0.0"]);
        s.create_branch("dev/2/main", "main").unwrap();
        s
    }

    fn event(kind: EventKind, payload: Json, branch: Option<&str>) -> RepoEvent {
        RepoEvent::new(kind, payload, branch)
    }

    #[test]
    fn issue_opened() {
        let e = event(
            EventKind::IssueOpened,
            json!({"form_id": "bug-report", "number": 4}),
            None,
        );
        assert_eq!(
            dispatch(&e, &state(), &tree()).unwrap().ids(),
            ["process-submission"]
        );
        let bad = event(EventKind::IssueOpened, json!({}), None);
        assert!(matches!(
            dispatch(&bad, &state(), &tree()),
            Err(DispatchError::MissingKey { .. })
        ));
    }

    #[test]
    fn push_on_development_branch() {
        let e = event(
            EventKind::CommitPushed,
            json!({"changes": ["source"], "change": "minor"}),
            Some("dev/2/main"),
        );
        let plan = dispatch(&e, &state(), &tree()).unwrap();
        assert_eq!(
            plan.ids(),
            [
                "cca",
                "format",
                "code-analysis",
                "data-validation",
                "refactor",
                "dependency-review",
                "test",
                "changelog-update",
                "progress-track",
                "report",
                "dev-release"
            ]
        );
        assert_eq!(
            plan.tasks.last().unwrap().param_str("tag"),
            Some("v1.1.0a2.dev1")
        );

        let docs = event(
            EventKind::CommitPushed,
            json!({"changes": ["docs"]}),
            Some("dev/2/main"),
        );
        assert!(!dispatch(&docs, &state(), &tree())
            .unwrap()
            .ids()
            .contains(&"dev-release".to_string()));
    }

    #[test]
    fn scheduled_maintenance() {
        let plan = dispatch(
            &event(EventKind::Scheduled, json!({}), None),
            &state(),
            &tree(),
        )
        .unwrap();
        let ids = plan.ids();
        for required in [
            "dependency-refresh-check",
            "cca",
            "refactor",
            "cleanup",
            "create-pr",
        ] {
            assert!(ids.contains(&required.to_string()), "{required}");
        }
        assert_eq!(ids.last().map(String::as_str), Some("create-pr"));
    }

    #[test]
    fn comments() {
        let e = event(
            EventKind::CommentPosted,
            json!({"issue": 3, "body": "/test version=1.0.0"}),
            None,
        );
        assert_eq!(
            dispatch(&e, &state(), &tree()).unwrap().ids(),
            ["run-command"]
        );
        let bad = event(
            EventKind::CommentPosted,
            json!({"issue": 3, "body": "/test version=x"}),
            None,
        );
        assert_eq!(
            dispatch(&bad, &state(), &tree()).unwrap().ids(),
            ["comment-reply"]
        );
        let chat = event(
            EventKind::CommentPosted,
            json!({"issue": 3, "body": "thanks!"}),
            None,
        );
        assert!(dispatch(&chat, &state(), &tree()).unwrap().tasks.is_empty());
    }

    #[test]
    fn unknown_kind() {
        assert_eq!(
            RepoEvent::from_json_str(r#"{"kind": "deploy", "payload": {}}"#),
            Err(DispatchError::UnknownKind("deploy".into()))
        );
    }

    #[test]
    fn major_approval_splits_first() {
        let mut s = RepoState::single_main("c0", &["1.0.0", "1.4.0"]);
        s.create_branch("dev/9/main", "main").unwrap();
        s.add_tag("dev/9/main", parse_version("2.0.0a9.dev1").unwrap())
            .unwrap();
        let approve = |change: &str| {
            event(
                EventKind::PrApproved,
                json!({"source": "dev/9/main", "target": "main", "change": change, "title": "Drop py2"}),
                Some("main"),
            )
        };
        let plan = dispatch(&approve("major"), &s, &tree()).unwrap();
        assert_eq!(plan.ids(), ["create-branch", "merge"]);
        assert_eq!(plan.tasks[0].param_str("branch"), Some("release-1"));
        assert_eq!(plan.tasks[1].param_str("version"), Some("2.0.0"));
        assert_eq!(
            dispatch(&approve("minor"), &s, &tree()).unwrap().ids(),
            ["merge"]
        );
    }
}
