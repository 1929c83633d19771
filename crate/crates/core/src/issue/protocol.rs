//! Per-ticket protocol documents.
//!
//! The Markdown body is for people; the trailing HTML comment carries the
//! JSON state that tools read back.

use serde::{Deserialize, Serialize};

use super::IssueError;
use crate::markers;

const STATE_OPEN: &str = "<!-- relforge:protocol";
const STATE_CLOSE: &str = "-->";

pub const DEFAULT_TEMPLATE: &str = "# {{ title }} (#{{ number }})

## User Requirements Document (URD)

{{ urd }}

## Software Requirements Document (SRD)

{{ srd }}

## Software Design Document (SDD)

{{ sdd }}

## Tasks

{{ tasks }}

## Activity

{{ activity }}
";

pub const DEFAULT_TASKS: &[&str] = &[
    "Specify software requirements",
    "Design the change",
    "Implement",
    "Add tests",
    "Update documentation",
];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskItem {
    pub text: String,
    pub done: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActivityEntry {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub at: Option<String>,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProtocolDoc {
    pub number: u64,
    pub title: String,
    pub urd: String,
    pub srd: String,
    pub sdd: String,
    pub tasks: Vec<TaskItem>,
    pub activity: Vec<ActivityEntry>,
    #[serde(default)]
    pub pull_requests: Vec<u64>,
}

impl ProtocolDoc {
    pub fn new(number: u64, title: &str, urd: String, tasks: &[String]) -> Self {
        Self {
            number,
            title: title.to_string(),
            urd,
            srd: String::new(),
            sdd: String::new(),
            tasks: tasks
                .iter()
                .map(|t| TaskItem {
                    text: t.clone(),
                    done: false,
                })
                .collect(),
            activity: Vec::new(),
            pull_requests: Vec::new(),
        }
    }

    pub fn log(&mut self, at: Option<&str>, text: impl Into<String>) {
        self.activity.push(ActivityEntry {
            at: at.map(str::to_string),
            text: text.into(),
        });
    }

    /// Marks the 1-based task `k` done. Returns false if there is no such task.
    pub fn complete_task(&mut self, k: usize) -> bool {
        match k.checked_sub(1).and_then(|i| self.tasks.get_mut(i)) {
            Some(task) => {
                task.done = true;
                true
            }
            None => false,
        }
    }

    pub fn done_count(&self) -> usize {
        self.tasks.iter().filter(|t| t.done).count()
    }

    pub fn remaining(&self) -> usize {
        self.tasks.len() - self.done_count()
    }

    pub fn link_pr(&mut self, pr: u64) {
        if !self.pull_requests.contains(&pr) {
            self.pull_requests.push(pr);
        }
    }

    fn section(text: &str) -> String {
        if text.trim().is_empty() {
            "_Not yet written._".to_string()
        } else {
            text.trim_end().to_string()
        }
    }

    pub fn render(&self, template: &str) -> Result<String, IssueError> {
        let tasks = if self.tasks.is_empty() {
            "_No tasks._".to_string()
        } else {
            self.tasks
                .iter()
                .map(|t| format!("- [{}] {}", if t.done { "x" } else { " " }, t.text))
                .collect::<Vec<_>>()
                .join("\n")
        };
        let activity = if self.activity.is_empty() {
            "_No activity._".to_string()
        } else {
            self.activity
                .iter()
                .map(|e| match &e.at {
                    Some(at) => format!("- {at}: {}", e.text),
                    None => format!("- {}", e.text),
                })
                .collect::<Vec<_>>()
                .join("\n")
        };
        let prs = self
            .pull_requests
            .iter()
            .map(|n| format!("#{n}"))
            .collect::<Vec<_>>()
            .join(", ");
        let mut body = markers::render(template, |name| match name {
            "title" => Some(self.title.clone()),
            "number" => Some(self.number.to_string()),
            "urd" => Some(Self::section(&self.urd)),
            "srd" => Some(Self::section(&self.srd)),
            "sdd" => Some(Self::section(&self.sdd)),
            "tasks" => Some(tasks.clone()),
            "activity" => Some(activity.clone()),
            "pull_requests" => Some(prs.clone()),
            "done" => Some(self.done_count().to_string()),
            "remaining" => Some(self.remaining().to_string()),
            _ => None,
        })
        .map_err(IssueError::UnknownMarker)?;
        if !body.ends_with('\n') {
            body.push('\n');
        }
        let state = serde_json::to_string(self).expect("protocol serializes");
        body.push('\n');
        body.push_str(STATE_OPEN);
        body.push('\n');
        // `--` cannot appear inside an HTML comment
        body.push_str(&state.replace("--", "-\\u002d"));
        body.push('\n');
        body.push_str(STATE_CLOSE);
        body.push('\n');
        Ok(body)
    }

    /// Reads the machine section back out of a rendered document.
    pub fn parse(markdown: &str) -> Result<Self, IssueError> {
        let start = markdown
            .rfind(STATE_OPEN)
            .ok_or_else(|| IssueError::MalformedProtocol("no state section".into()))?;
        let rest = &markdown[start + STATE_OPEN.len()..];
        let end = rest
            .find(STATE_CLOSE)
            .ok_or_else(|| IssueError::MalformedProtocol("unterminated state section".into()))?;
        serde_json::from_str(rest[..end].trim())
            .map_err(|e| IssueError::MalformedProtocol(e.to_string()))
    }
}
