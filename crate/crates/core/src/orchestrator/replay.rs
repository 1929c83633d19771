//! Sequential replay of an event log against a repository snapshot.

use serde::Serialize;
use serde_json::Value as Json;
use sha2::{Digest, Sha256};

use super::{dispatch, DispatchError, EventKind, RepoEvent};
use crate::config::ConfigTree;
use crate::plan::{ActionPlan, TaskId};
use crate::vcs::{tag_for, CommitMeta, RepoState, VcsError};
use crate::version::parse_version;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReplayOutcome {
    #[serde(serialize_with = "state_json")]
    pub state: RepoState,
    /// Tags created during replay, in creation order.
    pub tags: Vec<String>,
    pub plans: Vec<ActionPlan>,
}

fn state_json<S: serde::Serializer>(state: &RepoState, s: S) -> Result<S::Ok, S::Error> {
    state.to_json_value().serialize(s)
}

/// Parses JSON lines; blank lines are skipped.
pub fn parse_event_log(text: &str) -> Result<Vec<RepoEvent>, (usize, DispatchError)> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| RepoEvent::from_json_str(l).map_err(|e| (i + 1, e)))
        .collect()
}

fn synthetic_head(previous: &str, event: &RepoEvent) -> String {
    let body = serde_json::to_string(&event.payload).expect("payload serializes");
    let digest = Sha256::digest(format!("{previous}\0{body}"));
    hex::encode(&digest[..20])
}

fn param<'a>(task: &'a crate::plan::Task, key: &str) -> Result<&'a str, DispatchError> {
    task.param_str(key)
        .ok_or_else(|| DispatchError::Malformed(format!("{} task without {key}", task.id)))
}

fn record_push(state: &mut RepoState, event: &RepoEvent) -> Result<(), DispatchError> {
    let branch = event.branch()?;
    let previous = state
        .branch(branch)
        .ok_or_else(|| VcsError::UnknownBranch(branch.to_string()))?
        .head
        .clone();
    let commit = event.payload.get("commit");
    let head = commit
        .and_then(|c| c.get("id"))
        .and_then(Json::as_str)
        .map(str::to_string)
        .unwrap_or_else(|| synthetic_head(&previous, event));
    let meta = commit
        .and_then(|c| c.get("author"))
        .and_then(Json::as_str)
        .map(|author| CommitMeta {
            author: author.to_string(),
            date: commit
                .and_then(|c| c.get("date"))
                .and_then(Json::as_str)
                .map(str::to_string),
            message: commit
                .and_then(|c| c.get("message"))
                .and_then(Json::as_str)
                .map(str::to_string),
        });
    state.record_commit(branch, &head, meta)?;
    Ok(())
}

/// Applies the repository-visible parts of a plan: branches, merges and tags.
fn apply(
    plan: &ActionPlan,
    state: &mut RepoState,
    tags: &mut Vec<String>,
) -> Result<(), DispatchError> {
    for task in &plan.tasks {
        match task.id {
            TaskId::CreateBranch => {
                state.create_branch(param(task, "branch")?, param(task, "source")?)?
            }
            TaskId::Merge => {
                state.squash_merge(param(task, "source")?, param(task, "target")?)?;
            }
            TaskId::DevRelease | TaskId::Tag => {
                let version = parse_version(param(task, "version")?)?;
                state.add_tag(param(task, "branch")?, version)?;
                tags.push(tag_for(&version));
            }
            _ => {}
        }
    }
    Ok(())
}

pub fn replay(
    initial: &RepoState,
    events: &[RepoEvent],
    tree: &ConfigTree,
) -> Result<ReplayOutcome, (usize, DispatchError)> {
    let mut state = initial.clone();
    let mut tags = Vec::new();
    let mut plans = Vec::with_capacity(events.len());
    for (i, event) in events.iter().enumerate() {
        let step =
            |state: &mut RepoState, tags: &mut Vec<String>| -> Result<ActionPlan, DispatchError> {
                if event.kind == EventKind::CommitPushed {
                    record_push(state, event)?;
                }
                let plan = dispatch(event, state, tree)?;
                apply(&plan, state, tags)?;
                Ok(plan)
            };
        plans.push(step(&mut state, &mut tags).map_err(|e| (i + 1, e))?);
    }
    Ok(ReplayOutcome { state, tags, plans })
}
