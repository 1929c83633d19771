//! Issue forms, ticket processing and the ticket status machine.

mod command;
mod forms;
mod protocol;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::json;
use thiserror::Error;

pub use command::{parse_command_comment, Command, CommandError, SIGIL};
pub use forms::{
    compile_forms, refresh_form_choices, ChoiceSource, FieldKind, FormDefinition, FormField,
};
pub use protocol::{ActivityEntry, ProtocolDoc, TaskItem, DEFAULT_TASKS, DEFAULT_TEMPLATE};

use crate::config::{ConfigNode, ConfigTree};
use crate::markers;
use crate::plan::{ActionPlan, Task, TaskId};
use crate::vcs::{plan_issue_branches, RepoState, VcsError, VcsTemplates};
use crate::version::ChangeType;

/// Version-dropdown sentinel used before the first final release.
pub const UNRELEASED: &str = "unreleased";

/// Change type per issue type when the control center declares none.
pub const DEFAULT_CHANGE_TYPES: &[(&str, ChangeType)] = &[
    ("breaking", ChangeType::Major),
    ("feature", ChangeType::Minor),
    ("bugfix", ChangeType::Patch),
    ("bug", ChangeType::Patch),
];

#[derive(Debug, Error, PartialEq)]
pub enum IssueError {
    #[error("issue type {type_id}: {message}")]
    InvalidForm { type_id: String, message: String },
    #[error("issue type {0} declares no fields")]
    MissingFieldDeclaration(String),
    #[error("duplicate form id {0}")]
    DuplicateForm(String),
    #[error("submission is for form {submitted}, not {expected}")]
    FormMismatch { expected: String, submitted: String },
    #[error("ticket number must be positive")]
    ZeroTicketNumber,
    #[error("unknown field {0}")]
    UnknownField(String),
    #[error("missing required field: {}", .0.join(", "))]
    MissingRequired(Vec<String>),
    #[error("{field}: {value:?} is not one of the offered options")]
    UnknownChoice { field: String, value: String },
    #[error("{field}: expected a single value")]
    NotSingle { field: String },
    #[error("issue type {0} has no change type mapping")]
    NoChangeType(String),
    #[error("template references unknown field {0:?}")]
    UnknownMarker(String),
    #[error("malformed protocol document: {0}")]
    MalformedProtocol(String),
    #[error("unknown status {0:?}")]
    UnknownStatus(String),
    #[error("illegal transition {from} -> {to}")]
    IllegalTransition { from: Status, to: Status },
    #[error(transparent)]
    Vcs(#[from] VcsError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Status {
    Triage,
    Rejected,
    Ready,
    InProgress,
    Review,
    Done,
}

impl Status {
    pub const ALL: [Status; 6] = [
        Status::Triage,
        Status::Rejected,
        Status::Ready,
        Status::InProgress,
        Status::Review,
        Status::Done,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Status::Triage => "triage",
            Status::Rejected => "rejected",
            Status::Ready => "ready",
            Status::InProgress => "in-progress",
            Status::Review => "review",
            Status::Done => "done",
        }
    }

    pub fn can_become(self, next: Status) -> bool {
        use Status::*;
        matches!(
            (self, next),
            (Triage, Rejected)
                | (Triage, Ready)
                | (Ready, InProgress)
                | (InProgress, Review)
                | (Review, InProgress)
                | (Review, Done)
        )
    }
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Status {
    type Err = IssueError;

    /// Accepts `ready` as well as the label form `status/ready`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bare = s.strip_prefix("status/").unwrap_or(s);
        Status::ALL
            .into_iter()
            .find(|st| st.as_str() == bare)
            .ok_or_else(|| IssueError::UnknownStatus(s.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum InputValue {
    Text(String),
    List(Vec<String>),
}

impl InputValue {
    pub fn values(&self) -> Vec<&str> {
        match self {
            InputValue::Text(s) => vec![s.as_str()],
            InputValue::List(items) => items.iter().map(String::as_str).collect(),
        }
    }

    fn is_blank(&self) -> bool {
        self.values().iter().all(|v| v.trim().is_empty())
    }

    fn joined(&self) -> String {
        self.values().join(", ")
    }
}

/// A filled-in issue form.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Submission {
    pub form_id: String,
    pub number: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub title: Option<String>,
    pub inputs: BTreeMap<String, InputValue>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub submitted_at: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Ticket {
    pub number: u64,
    #[serde(rename = "type")]
    pub type_id: String,
    pub title: String,
    pub change: ChangeType,
    #[serde(default)]
    pub inputs: BTreeMap<String, InputValue>,
    #[serde(default)]
    pub labels: BTreeSet<String>,
    #[serde(default)]
    pub assignees: Vec<String>,
    pub status: Status,
    /// Affected versions, as chosen on the form.
    #[serde(default)]
    pub versions: Vec<String>,
}

impl Ticket {
    pub fn new(number: u64, type_id: &str, title: &str, change: ChangeType) -> Self {
        Self {
            number,
            type_id: type_id.to_string(),
            title: title.to_string(),
            change,
            inputs: BTreeMap::new(),
            labels: BTreeSet::from([format!("type/{type_id}")]),
            assignees: Vec::new(),
            status: Status::Triage,
            versions: Vec::new(),
        }
    }
}

/// Change type of an issue type, from `version_scheme.change_types` or the defaults.
pub fn change_type_for(tree: &ConfigTree, type_id: &str) -> Option<ChangeType> {
    match tree
        .get("version_scheme.change_types")
        .and_then(ConfigNode::as_mapping)
    {
        Some(map) => map
            .get(type_id)
            .and_then(ConfigNode::as_str)
            .and_then(|s| s.parse().ok()),
        None => DEFAULT_CHANGE_TYPES
            .iter()
            .find(|(id, _)| *id == type_id)
            .map(|(_, c)| *c),
    }
}

pub fn protocol_template(tree: &ConfigTree) -> String {
    tree.str_at("issues.protocol.template")
        .unwrap_or(DEFAULT_TEMPLATE)
        .to_string()
}

fn protocol_tasks(tree: &ConfigTree) -> Vec<String> {
    match tree
        .get("issues.protocol.tasks")
        .and_then(ConfigNode::as_sequence)
    {
        Some(items) => items.iter().map(ConfigNode::to_embedded_string).collect(),
        None => DEFAULT_TASKS.iter().map(|s| s.to_string()).collect(),
    }
}

/// Labels reconstructible from the ticket type and its inputs alone.
pub fn derive_labels(
    form: &FormDefinition,
    inputs: &BTreeMap<String, InputValue>,
) -> BTreeSet<String> {
    let mut labels = BTreeSet::from([format!("type/{}", form.type_id)]);
    for field in &form.fields {
        let (Some(ns), Some(value)) = (field.label_namespace(), inputs.get(&field.key)) else {
            continue;
        };
        for v in value.values() {
            if !v.trim().is_empty() {
                labels.insert(format!("{ns}/{}", v.trim()));
            }
        }
    }
    labels
}

fn format_urd(form: &FormDefinition, inputs: &BTreeMap<String, InputValue>) -> String {
    let mut parts = Vec::new();
    for field in &form.fields {
        let Some(value) = inputs.get(&field.key).filter(|v| !v.is_blank()) else {
            continue;
        };
        let body = match (field.kind, value) {
            (FieldKind::Checkboxes, v) => v
                .values()
                .iter()
                .map(|o| format!("- [x] {o}"))
                .collect::<Vec<_>>()
                .join("\n"),
            (_, InputValue::List(items)) => items
                .iter()
                .map(|o| format!("- {o}"))
                .collect::<Vec<_>>()
                .join("\n"),
            (_, InputValue::Text(text)) => text.trim_end().to_string(),
        };
        parts.push(format!("### {}\n\n{}", field.label, body));
    }
    parts.join("\n\n")
}

/// Turns a submission into a labeled ticket and its protocol document.
pub fn process_submission(
    form: &FormDefinition,
    submission: &Submission,
    tree: &ConfigTree,
) -> Result<(Ticket, ProtocolDoc), IssueError> {
    if submission.form_id != form.id {
        return Err(IssueError::FormMismatch {
            expected: form.id.clone(),
            submitted: submission.form_id.clone(),
        });
    }
    if submission.number == 0 {
        return Err(IssueError::ZeroTicketNumber);
    }
    if let Some(key) = submission.inputs.keys().find(|k| form.field(k).is_none()) {
        return Err(IssueError::UnknownField(key.clone()));
    }
    let missing: Vec<String> = form
        .fields
        .iter()
        .filter(|f| {
            f.required
                && submission
                    .inputs
                    .get(&f.key)
                    .map_or(true, InputValue::is_blank)
        })
        .map(|f| f.key.clone())
        .collect();
    if !missing.is_empty() {
        return Err(IssueError::MissingRequired(missing));
    }
    for field in &form.fields {
        let Some(value) = submission.inputs.get(&field.key) else {
            continue;
        };
        if field.kind == FieldKind::Dropdown
            && !field.multiple
            && matches!(value, InputValue::List(v) if v.len() > 1)
        {
            return Err(IssueError::NotSingle {
                field: field.key.clone(),
            });
        }
        if field.kind.has_options() {
            if let Some(bad) = value
                .values()
                .into_iter()
                .find(|v| !field.options.iter().any(|o| o == v))
            {
                return Err(IssueError::UnknownChoice {
                    field: field.key.clone(),
                    value: bad.to_string(),
                });
            }
        }
    }

    let change = change_type_for(tree, &form.type_id)
        .ok_or_else(|| IssueError::NoChangeType(form.type_id.clone()))?;
    let title = match (&submission.title, &form.title) {
        (Some(title), _) => title.clone(),
        (None, Some(template)) => markers::render(template, |name| {
            submission.inputs.get(name).map(InputValue::joined)
        })
        .map_err(IssueError::UnknownMarker)?,
        (None, None) => format!("{} #{}", form.name, submission.number),
    };
    let versions: Vec<String> = form
        .fields
        .iter()
        .filter(|f| f.source == Some(ChoiceSource::Versions))
        .filter_map(|f| submission.inputs.get(&f.key))
        .flat_map(|v| v.values().into_iter().map(str::to_string))
        .collect();
    let assignees = tree
        .get("issues.governance")
        .and_then(|g| g.get(&form.type_id))
        .and_then(ConfigNode::as_sequence)
        .map(|ids| ids.iter().map(ConfigNode::to_embedded_string).collect())
        .unwrap_or_default();

    let ticket = Ticket {
        number: submission.number,
        type_id: form.type_id.clone(),
        title: title.clone(),
        change,
        inputs: submission.inputs.clone(),
        labels: derive_labels(form, &submission.inputs),
        assignees,
        status: Status::Triage,
        versions,
    };
    let mut protocol = ProtocolDoc::new(
        submission.number,
        &title,
        format_urd(form, &submission.inputs),
        &protocol_tasks(tree),
    );
    protocol.log(
        submission.submitted_at.as_deref(),
        format!("Submitted via form {}", form.id),
    );
    Ok((ticket, protocol))
}

/// Moves a ticket to the status named by `label` and plans the follow-up work.
pub fn apply_status_transition(
    ticket: &Ticket,
    label: &str,
    state: &RepoState,
    tree: &ConfigTree,
) -> Result<(Ticket, ActionPlan), IssueError> {
    let next: Status = label.parse()?;
    if !ticket.status.can_become(next) {
        return Err(IssueError::IllegalTransition {
            from: ticket.status,
            to: next,
        });
    }
    let mut updated = ticket.clone();
    updated.status = next;
    updated.labels.retain(|l| !l.starts_with("status/"));
    updated.labels.insert(format!("status/{next}"));

    let mut plan = ActionPlan::new("issue_labeled", None);
    plan.push(
        Task::new(TaskId::UpdateStatus)
            .with("issue", ticket.number)
            .with("status", next.as_str()),
    );
    match next {
        Status::Rejected => {
            plan.push(Task::new(TaskId::CloseTicket).with("issue", ticket.number));
            plan.push(
                Task::new(TaskId::ProtocolUpdate)
                    .with("issue", ticket.number)
                    .with("note", "Rejected during triage; ticket closed."),
            );
        }
        Status::Ready => {
            let branches = plan_issue_branches(&updated, state, &VcsTemplates::from_tree(tree))?;
            for b in &branches {
                plan.push(
                    Task::new(TaskId::CreateBranch)
                        .with("branch", b.name.as_str())
                        .with("source", b.source.as_str())
                        .with("message", b.message.as_str())
                        .with("dev_notice", b.dev_notice.clone().unwrap_or_default()),
                );
            }
            for b in &branches {
                plan.push(
                    Task::new(TaskId::OpenDraftPr)
                        .with("head", b.name.as_str())
                        .with("base", b.source.as_str())
                        .with("issue", ticket.number)
                        .with("title", ticket.title.as_str()),
                );
            }
            for b in &branches {
                plan.push(
                    Task::new(TaskId::ChangelogBootstrap)
                        .with("branch", b.name.as_str())
                        .with("entry", json!(b.changelog_bootstrap)),
                );
            }
        }
        _ => {
            plan.push(
                Task::new(TaskId::ProtocolUpdate)
                    .with("issue", ticket.number)
                    .with("note", format!("Status changed to {next}.")),
            );
        }
    }
    Ok((updated, plan))
}
