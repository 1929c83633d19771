//! Branching model over an abstract repository snapshot.
//!
//! Branch names follow a fixed scheme: `main`, `release-<major>`,
//! `dev/<issue>/<target>` and `pre/<version>`. Planners never mutate a
//! repository; they return plans that a thin adapter applies.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::config::ConfigTree;
use crate::issue::{Status, Ticket};
use crate::markers;
use crate::version::{
    finalize_version, next_prerelease_version, parse_version, ChangeType, Phase, PublicVersion,
    TagHistory, VersionError,
};

pub const MAIN_BRANCH: &str = "main";

#[derive(Debug, Error, PartialEq)]
pub enum VcsError {
    #[error("unrecognized branch name {0:?}")]
    UnrecognizedBranch(String),
    #[error("branch {name} declared as {declared} but named as {actual}")]
    KindMismatch {
        name: String,
        declared: String,
        actual: String,
    },
    #[error("repository must have exactly one main branch, found {0}")]
    MainCount(usize),
    #[error("duplicate branch {0}")]
    DuplicateBranch(String),
    #[error("unknown branch {0}")]
    UnknownBranch(String),
    #[error("default branch {0} does not exist")]
    MissingDefault(String),
    #[error("tag {tag} on {branch} is not a version tag")]
    BadTag { branch: String, tag: String },
    #[error("tag {tag} appears on both {first} and {second}")]
    SharedTag {
        tag: String,
        first: String,
        second: String,
    },
    #[error("affected version {0} maps to no existing branch")]
    NoBranchForVersion(String),
    #[error("ticket #{number} is {status}, not ready for implementation")]
    NotReady { number: u64, status: Status },
    #[error("ticket #{0} lists no affected version")]
    NoAffectedVersion(u64),
    #[error("cannot merge {source_kind} branch {branch} into {target_kind} branch {target}")]
    MergeDirection {
        branch: String,
        source_kind: &'static str,
        target: String,
        target_kind: &'static str,
    },
    #[error("development branch {branch} targets {expected}, not {actual}")]
    TargetMismatch {
        branch: String,
        expected: String,
        actual: String,
    },
    #[error("template references unknown field {0:?}")]
    Template(String),
    #[error(transparent)]
    Version(#[from] VersionError),
    #[error("invalid repository snapshot: {0}")]
    Snapshot(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum BranchKind {
    Main,
    Release { major: u64 },
    Development { issue: u64, target: String },
    Prerelease { version: PublicVersion },
}

impl BranchKind {
    pub fn label(&self) -> &'static str {
        match self {
            BranchKind::Main => "main",
            BranchKind::Release { .. } => "release",
            BranchKind::Development { .. } => "development",
            BranchKind::Prerelease { .. } => "prerelease",
        }
    }

    pub fn is_release_line(&self) -> bool {
        matches!(self, BranchKind::Main | BranchKind::Release { .. })
    }
}

fn number(s: &str) -> Option<u64> {
    if s.is_empty() || !s.bytes().all(|b| b.is_ascii_digit()) || (s.len() > 1 && s.starts_with('0'))
    {
        return None;
    }
    s.parse().ok()
}

pub fn classify_branch(name: &str) -> Result<BranchKind, VcsError> {
    let unrecognized = || VcsError::UnrecognizedBranch(name.to_string());
    if name == MAIN_BRANCH {
        return Ok(BranchKind::Main);
    }
    if let Some(major) = name.strip_prefix("release-") {
        return number(major)
            .map(|major| BranchKind::Release { major })
            .ok_or_else(unrecognized);
    }
    if let Some(rest) = name.strip_prefix("dev/") {
        let (issue, target) = rest.split_once('/').ok_or_else(unrecognized)?;
        let issue = number(issue).filter(|n| *n > 0).ok_or_else(unrecognized)?;
        return match classify_branch(target) {
            Ok(kind) if kind.is_release_line() => Ok(BranchKind::Development {
                issue,
                target: target.to_string(),
            }),
            _ => Err(unrecognized()),
        };
    }
    if let Some(version) = name.strip_prefix("pre/") {
        let version = parse_version(version).map_err(|_| unrecognized())?;
        if version.pre.is_none() {
            return Err(unrecognized());
        }
        return Ok(BranchKind::Prerelease { version });
    }
    Err(unrecognized())
}

pub fn tag_for(v: &PublicVersion) -> String {
    format!("v{v}")
}

pub fn parse_tag(tag: &str) -> Option<PublicVersion> {
    tag.strip_prefix('v').and_then(|t| parse_version(t).ok())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CommitMeta {
    pub author: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub date: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub message: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Branch {
    pub name: String,
    pub kind: BranchKind,
    pub head: String,
    pub tags: TagHistory,
    pub latest_commit: Option<CommitMeta>,
}

#[derive(Serialize, Deserialize)]
struct RawBranch {
    name: String,
    kind: String,
    head: String,
    #[serde(default)]
    tags: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    latest_commit: Option<CommitMeta>,
}

#[derive(Serialize, Deserialize)]
struct RawState {
    branches: Vec<RawBranch>,
    default_branch: String,
}

/// Snapshot of a repository: branches with their kinds, heads and tags.
#[derive(Debug, Clone, PartialEq)]
pub struct RepoState {
    branches: BTreeMap<String, Branch>,
    default_branch: String,
}

impl RepoState {
    /// A repository with only `main`, tagged with the given final versions.
    pub fn single_main(head: &str, finals: &[&str]) -> Self {
        let tags = finals
            .iter()
            .map(|v| parse_version(v).expect("valid version literal"))
            .collect();
        let main = Branch {
            name: MAIN_BRANCH.to_string(),
            kind: BranchKind::Main,
            head: head.to_string(),
            tags,
            latest_commit: None,
        };
        Self {
            branches: BTreeMap::from([(MAIN_BRANCH.to_string(), main)]),
            default_branch: MAIN_BRANCH.to_string(),
        }
    }

    pub fn from_json_str(text: &str) -> Result<Self, VcsError> {
        let raw: RawState =
            serde_json::from_str(text).map_err(|e| VcsError::Snapshot(e.to_string()))?;
        let mut branches = BTreeMap::new();
        let mut tag_owner: BTreeMap<String, String> = BTreeMap::new();
        for b in raw.branches {
            let kind = classify_branch(&b.name)?;
            if kind.label() != b.kind {
                return Err(VcsError::KindMismatch {
                    name: b.name,
                    declared: b.kind,
                    actual: kind.label().to_string(),
                });
            }
            let mut tags = TagHistory::new();
            for tag in b.tags {
                let version = parse_tag(&tag).ok_or_else(|| VcsError::BadTag {
                    branch: b.name.clone(),
                    tag: tag.clone(),
                })?;
                let canonical = tag_for(&version);
                if let Some(first) = tag_owner.insert(canonical.clone(), b.name.clone()) {
                    if first != b.name {
                        return Err(VcsError::SharedTag {
                            tag: canonical,
                            first,
                            second: b.name,
                        });
                    }
                }
                tags.insert(version);
            }
            let branch = Branch {
                name: b.name.clone(),
                kind,
                head: b.head,
                tags,
                latest_commit: b.latest_commit,
            };
            if branches.insert(b.name.clone(), branch).is_some() {
                return Err(VcsError::DuplicateBranch(b.name));
            }
        }
        let mains = branches
            .values()
            .filter(|b| b.kind == BranchKind::Main)
            .count();
        if mains != 1 {
            return Err(VcsError::MainCount(mains));
        }
        if !branches.contains_key(&raw.default_branch) {
            return Err(VcsError::MissingDefault(raw.default_branch));
        }
        Ok(Self {
            branches,
            default_branch: raw.default_branch,
        })
    }

    pub fn to_json_value(&self) -> serde_json::Value {
        let raw = RawState {
            branches: self
                .branches
                .values()
                .map(|b| RawBranch {
                    name: b.name.clone(),
                    kind: b.kind.label().to_string(),
                    head: b.head.clone(),
                    tags: b.tags.iter().map(tag_for).collect(),
                    latest_commit: b.latest_commit.clone(),
                })
                .collect(),
            default_branch: self.default_branch.clone(),
        };
        serde_json::to_value(raw).expect("snapshot serializes")
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(&self.to_json_value()).expect("snapshot serializes")
    }

    pub fn default_branch(&self) -> &str {
        &self.default_branch
    }

    pub fn branches(&self) -> impl Iterator<Item = &Branch> {
        self.branches.values()
    }

    pub fn branch(&self, name: &str) -> Option<&Branch> {
        self.branches.get(name)
    }

    pub fn main(&self) -> &Branch {
        self.branches
            .values()
            .find(|b| b.kind == BranchKind::Main)
            .expect("snapshot invariant: one main branch")
    }

    pub fn tags_of(&self, name: &str) -> TagHistory {
        self.branch(name)
            .map(|b| b.tags.clone())
            .unwrap_or_default()
    }

    /// Major version line hosted on `main`.
    pub fn main_major(&self) -> u64 {
        self.main()
            .tags
            .latest_final()
            .map(|r| r.major)
            .unwrap_or(0)
    }

    /// Every final release tagged anywhere, newest first.
    pub fn final_releases(&self) -> Vec<PublicVersion> {
        let mut all: Vec<PublicVersion> = self
            .branches
            .values()
            .flat_map(|b| b.tags.iter().filter(|v| v.is_final()).copied())
            .collect();
        all.sort();
        all.dedup();
        all.reverse();
        all
    }

    pub fn has_tag(&self, v: &PublicVersion) -> bool {
        self.branches.values().any(|b| b.tags.contains(v))
    }

    /// Development branch of an issue, if one exists.
    pub fn development_branch(&self, issue: u64) -> Option<&Branch> {
        self.branches
            .values()
            .find(|b| matches!(&b.kind, BranchKind::Development { issue: i, .. } if *i == issue))
    }

    pub fn create_branch(&mut self, name: &str, source: &str) -> Result<(), VcsError> {
        let kind = classify_branch(name)?;
        if kind == BranchKind::Main {
            return Err(VcsError::DuplicateBranch(name.to_string()));
        }
        if self.branches.contains_key(name) {
            return Err(VcsError::DuplicateBranch(name.to_string()));
        }
        let head = self
            .branch(source)
            .ok_or_else(|| VcsError::UnknownBranch(source.to_string()))?
            .head
            .clone();
        self.branches.insert(
            name.to_string(),
            Branch {
                name: name.to_string(),
                kind,
                head,
                tags: TagHistory::new(),
                latest_commit: None,
            },
        );
        Ok(())
    }

    pub fn add_tag(&mut self, branch: &str, v: PublicVersion) -> Result<(), VcsError> {
        if let Some(owner) = self.branches.values().find(|b| b.tags.contains(&v)) {
            return Err(VcsError::SharedTag {
                tag: tag_for(&v),
                first: owner.name.clone(),
                second: branch.to_string(),
            });
        }
        self.branches
            .get_mut(branch)
            .ok_or_else(|| VcsError::UnknownBranch(branch.to_string()))?
            .tags
            .insert(v);
        Ok(())
    }

    pub fn record_commit(
        &mut self,
        branch: &str,
        head: &str,
        meta: Option<CommitMeta>,
    ) -> Result<(), VcsError> {
        let b = self
            .branches
            .get_mut(branch)
            .ok_or_else(|| VcsError::UnknownBranch(branch.to_string()))?;
        b.head = head.to_string();
        if meta.is_some() {
            b.latest_commit = meta;
        }
        Ok(())
    }

    /// Applies a squash merge: the target gets one synthesized commit.
    pub fn squash_merge(&mut self, source: &str, target: &str) -> Result<String, VcsError> {
        let source_head = self
            .branch(source)
            .ok_or_else(|| VcsError::UnknownBranch(source.to_string()))?
            .head
            .clone();
        let tgt = self
            .branches
            .get_mut(target)
            .ok_or_else(|| VcsError::UnknownBranch(target.to_string()))?;
        let digest = Sha256::digest(format!("{}\0{}", tgt.head, source_head));
        tgt.head = hex::encode(&digest[..20]);
        Ok(tgt.head.clone())
    }
}

/// Message templates for planned commits, with `{{ field }}` markers over
/// `type`, `title` and `issue`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VcsTemplates {
    pub commit: String,
    pub initial_commit: String,
    pub dev_notice: String,
}

impl Default for VcsTemplates {
    fn default() -> Self {
        Self {
            commit: "{{ type }}: {{ title }} (#{{ issue }})\n\nIssue: #{{ issue }}".to_string(),
            initial_commit:
                "{{ type }}: start work on {{ title }} (#{{ issue }})\n\nIssue: #{{ issue }}"
                    .to_string(),
            dev_notice: "Development of #{{ issue }} ({{ title }}) is in progress on this branch."
                .to_string(),
        }
    }
}

impl VcsTemplates {
    pub fn from_tree(tree: &ConfigTree) -> Self {
        let d = Self::default();
        let pick = |path: &str, fallback: String| {
            tree.str_at(path).map(str::to_string).unwrap_or(fallback)
        };
        Self {
            commit: pick("vcs.commit_template", d.commit),
            initial_commit: pick("vcs.initial_commit_template", d.initial_commit),
            dev_notice: pick("vcs.dev_notice", d.dev_notice),
        }
    }

    fn fill(template: &str, type_id: &str, title: &str, issue: u64) -> Result<String, VcsError> {
        markers::render(template, |name| match name {
            "type" => Some(type_id.to_string()),
            "title" => Some(title.to_string()),
            "issue" => Some(issue.to_string()),
            _ => None,
        })
        .map_err(VcsError::Template)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ChangelogBootstrap {
    pub issue: u64,
    pub title: String,
    #[serde(rename = "type")]
    pub change: ChangeType,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct BranchPlan {
    pub name: String,
    pub source: String,
    pub message: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub changelog_bootstrap: Option<ChangelogBootstrap>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dev_notice: Option<String>,
}

/// One development branch per affected release line.
pub fn plan_issue_branches(
    ticket: &Ticket,
    state: &RepoState,
    templates: &VcsTemplates,
) -> Result<Vec<BranchPlan>, VcsError> {
    if ticket.status != Status::Ready {
        return Err(VcsError::NotReady {
            number: ticket.number,
            status: ticket.status,
        });
    }
    if ticket.versions.is_empty() {
        return Err(VcsError::NoAffectedVersion(ticket.number));
    }
    let main_major = state.main_major();
    let mut targets: BTreeMap<u64, String> = BTreeMap::new();
    for affected in &ticket.versions {
        let major = if affected == crate::issue::UNRELEASED {
            main_major
        } else {
            parse_version(affected)
                .map_err(|_| VcsError::NoBranchForVersion(affected.clone()))?
                .release
                .major
        };
        let branch = if major == main_major {
            MAIN_BRANCH.to_string()
        } else {
            let name = format!("release-{major}");
            if state.branch(&name).is_none() {
                return Err(VcsError::NoBranchForVersion(affected.clone()));
            }
            name
        };
        targets.insert(major, branch);
    }
    let mut plans = Vec::new();
    for target in targets.into_values() {
        let name = format!("dev/{}/{}", ticket.number, target);
        if state.branch(&name).is_some() {
            continue;
        }
        plans.push(BranchPlan {
            message: VcsTemplates::fill(
                &templates.initial_commit,
                &ticket.type_id,
                &ticket.title,
                ticket.number,
            )?,
            changelog_bootstrap: Some(ChangelogBootstrap {
                issue: ticket.number,
                title: ticket.title.clone(),
                change: ticket.change,
            }),
            dev_notice: Some(VcsTemplates::fill(
                &templates.dev_notice,
                &ticket.type_id,
                &ticket.title,
                ticket.number,
            )?),
            name,
            source: target,
        });
    }
    Ok(plans)
}

/// Plans `release-<major>` off `main` ahead of a breaking change.
pub fn plan_release_branch_split(state: &RepoState, change: ChangeType) -> Option<BranchPlan> {
    if change != ChangeType::Major {
        return None;
    }
    let major = state.main_major();
    let name = format!("release-{major}");
    if state.branch(&name).is_some() {
        return None;
    }
    Some(BranchPlan {
        message: format!("chore: preserve the {major}.x release line"),
        name,
        source: MAIN_BRANCH.to_string(),
        changelog_bootstrap: None,
        dev_notice: None,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum MergeStrategy {
    Squash,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum VersionAction {
    None,
    Finalize,
    DevRelease,
    Prerelease,
}

impl fmt::Display for VersionAction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            VersionAction::None => "none",
            VersionAction::Finalize => "finalize",
            VersionAction::DevRelease => "dev-release",
            VersionAction::Prerelease => "prerelease",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MergeRequest {
    pub source: String,
    pub target: String,
    pub issue: Option<u64>,
    pub title: String,
    pub type_id: String,
    pub change: ChangeType,
    /// Requested phase for merges into a prerelease branch.
    pub phase: Option<Phase>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct MergePlan {
    pub source: String,
    pub target: String,
    pub strategy: MergeStrategy,
    pub message: String,
    pub version_action: VersionAction,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub version: Option<PublicVersion>,
    /// Set when the target prerelease branch must be created first.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub create_target: Option<BranchPlan>,
}

fn current_phase(history: &TagHistory, issue: u64) -> Phase {
    history
        .for_issue(issue)
        .filter(|v| v.dev().is_none())
        .filter_map(|v| v.pre.map(|p| p.phase))
        .max()
        .unwrap_or(Phase::Alpha)
}

pub fn plan_merge(
    req: &MergeRequest,
    state: &RepoState,
    templates: &VcsTemplates,
) -> Result<MergePlan, VcsError> {
    let source_kind = classify_branch(&req.source)?;
    let target_kind = classify_branch(&req.target)?;
    let source = state
        .branch(&req.source)
        .ok_or_else(|| VcsError::UnknownBranch(req.source.clone()))?;
    let direction = || VcsError::MergeDirection {
        branch: req.source.clone(),
        source_kind: source_kind.label(),
        target: req.target.clone(),
        target_kind: target_kind.label(),
    };
    let target_exists = state.branch(&req.target).is_some();
    if target_kind.is_release_line() && !target_exists {
        return Err(VcsError::UnknownBranch(req.target.clone()));
    }
    let issue = match &source_kind {
        BranchKind::Development { issue, .. } => *issue,
        BranchKind::Prerelease { version } => version.pre.map(|p| p.number).unwrap_or(0),
        _ => req.issue.unwrap_or(0),
    };
    let issue = req.issue.unwrap_or(issue);
    let message = VcsTemplates::fill(&templates.commit, &req.type_id, &req.title, issue)?;
    let target_history = state.tags_of(&req.target);

    let (version_action, version, create_target) = match (&source_kind, &target_kind) {
        (BranchKind::Development { target, .. }, t) if t.is_release_line() => {
            if *target != req.target {
                return Err(VcsError::TargetMismatch {
                    branch: req.source.clone(),
                    expected: target.clone(),
                    actual: req.target.clone(),
                });
            }
            finalize_from(source.tags.latest(), &target_history, req.change)?
        }
        (BranchKind::Prerelease { .. }, t) if t.is_release_line() => {
            finalize_from(source.tags.latest(), &target_history, req.change)?
        }
        (BranchKind::Development { .. }, BranchKind::Prerelease { .. }) => {
            let history = source.tags.union(&target_history);
            let phase = req.phase.unwrap_or_else(|| current_phase(&history, issue));
            let version = next_prerelease_version(&history, issue, phase)?;
            let create = (!target_exists).then(|| BranchPlan {
                name: req.target.clone(),
                source: req.source.clone(),
                message: format!("chore: open prerelease line for #{issue}"),
                changelog_bootstrap: None,
                dev_notice: None,
            });
            (VersionAction::Prerelease, Some(version), create)
        }
        _ => return Err(direction()),
    };
    Ok(MergePlan {
        source: req.source.clone(),
        target: req.target.clone(),
        strategy: MergeStrategy::Squash,
        message,
        version_action,
        version,
        create_target,
    })
}

type VersionDecision = (VersionAction, Option<PublicVersion>, Option<BranchPlan>);

fn finalize_from(
    candidate: Option<&PublicVersion>,
    target_history: &TagHistory,
    change: ChangeType,
) -> Result<VersionDecision, VcsError> {
    match candidate.filter(|v| v.pre.is_some()) {
        Some(candidate) => {
            let release = finalize_version(candidate, target_history, change)?;
            Ok((
                VersionAction::Finalize,
                Some(PublicVersion::final_release(release)),
                None,
            ))
        }
        None => Ok((VersionAction::None, None, None)),
    }
}
