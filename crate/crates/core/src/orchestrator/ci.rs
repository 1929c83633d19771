//! CI and CD task planning.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::config::{ConfigNode, ConfigTree};
use crate::plan::{Task, TaskId, CI_ORDER};
use crate::vcs::tag_for;
use crate::version::PublicVersion;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PathClass {
    Source,
    Config,
    Docs,
    Tests,
}

impl PathClass {
    pub const ALL: [PathClass; 4] = [
        PathClass::Source,
        PathClass::Config,
        PathClass::Docs,
        PathClass::Tests,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            PathClass::Source => "source",
            PathClass::Config => "config",
            PathClass::Docs => "docs",
            PathClass::Tests => "tests",
        }
    }
}

impl fmt::Display for PathClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PathClass {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        PathClass::ALL
            .into_iter()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| format!("unknown path class {s:?}"))
    }
}

/// Classes that trigger each CI task unless the control center overrides
/// them under `workflows.ci.tasks`. `report` always runs. Build-type tasks
/// are off until a project opts in.
pub fn default_triggers(task: &TaskId) -> &'static [PathClass] {
    use PathClass::*;
    match task {
        TaskId::Cca | TaskId::ChangelogUpdate => &[Source, Config, Docs, Tests],
        TaskId::Format | TaskId::CodeAnalysis | TaskId::Refactor | TaskId::Test => &[Source, Tests],
        TaskId::DataValidation => &[Source, Config, Tests],
        TaskId::DependencyReview => &[Source],
        TaskId::ProgressTrack => &[Source, Docs, Tests],
        _ => &[],
    }
}

fn class_list(node: &ConfigNode) -> BTreeSet<PathClass> {
    node.as_sequence()
        .unwrap_or(&[])
        .iter()
        .filter_map(|n| n.as_str().and_then(|s| s.parse().ok()))
        .collect()
}

fn triggers(tree: &ConfigTree, task: &TaskId) -> BTreeSet<PathClass> {
    match tree
        .get("workflows.ci.tasks")
        .and_then(|t| t.get(&task.as_str()))
    {
        Some(node) => class_list(node),
        None => default_triggers(task).iter().copied().collect(),
    }
}

/// Classes whose changes make a push release-related.
pub fn release_classes(tree: &ConfigTree) -> BTreeSet<PathClass> {
    tree.get("workflows.ci.release_classes")
        .map(class_list)
        .unwrap_or_else(|| BTreeSet::from([PathClass::Source]))
}

/// CI tasks for a change touching `changed`, in the fixed task order.
pub fn plan_ci(changed: &BTreeSet<PathClass>, tree: &ConfigTree) -> Vec<TaskId> {
    CI_ORDER
        .iter()
        .filter(|task| **task == TaskId::Report || !triggers(tree, task).is_disjoint(changed))
        .cloned()
        .collect()
}

pub fn publish_targets(tree: &ConfigTree) -> Vec<String> {
    tree.get("workflows.cd.targets")
        .and_then(ConfigNode::as_sequence)
        .unwrap_or(&[])
        .iter()
        .map(ConfigNode::to_embedded_string)
        .collect()
}

/// Tag, changelog and publishing tasks for a released version. The second
/// element carries warnings.
pub fn plan_cd(
    version: &PublicVersion,
    branch: &str,
    tree: &ConfigTree,
) -> (Vec<Task>, Vec<String>) {
    let tag = tag_for(version);
    let version = version.to_string();
    let mut tasks = vec![
        Task::new(TaskId::Tag)
            .with("tag", tag.as_str())
            .with("version", version.as_str())
            .with("branch", branch),
        Task::new(TaskId::ChangelogFinalize)
            .with("version", version.as_str())
            .with("branch", branch),
        Task::new(TaskId::NotesRender).with("version", version.as_str()),
    ];
    let targets = publish_targets(tree);
    let mut warnings = Vec::new();
    if targets.is_empty() {
        warnings.push("no deployment targets configured; nothing will be published".to_string());
    }
    for target in targets {
        tasks.push(Task::new(TaskId::Publish(target)).with("version", version.as_str()));
    }
    (tasks, warnings)
}
