//! Built-in augmentation providers.

use std::collections::BTreeSet;

use serde_json::json;

use crate::config::{AugmentationProvider, ConfigNode, ConfigPath, ConfigTree, Origin};
use crate::vcs::RepoState;

/// `team.contributors` from the authors of each branch's latest commit.
pub struct ContributorList;

impl AugmentationProvider for ContributorList {
    fn name(&self) -> &str {
        "contributor-list"
    }

    fn fills(&self) -> Vec<ConfigPath> {
        vec![ConfigPath::parse("team.contributors").expect("static path")]
    }

    fn provide(
        &self,
        _: &ConfigTree,
        repo: &RepoState,
        wanted: &[ConfigPath],
    ) -> Vec<(ConfigPath, ConfigNode)> {
        let authors: BTreeSet<&str> = repo
            .branches()
            .filter_map(|b| b.latest_commit.as_ref())
            .map(|c| c.author.as_str())
            .collect();
        if authors.is_empty() {
            return Vec::new();
        }
        let origin = Origin::new("augment:contributor-list", 0);
        wanted
            .iter()
            .map(|p| (p.clone(), ConfigNode::from_json(&json!(authors), &origin)))
            .collect()
    }
}

/// `citation.version` from the latest final release on `main`.
pub struct LatestRelease;

impl AugmentationProvider for LatestRelease {
    fn name(&self) -> &str {
        "latest-release"
    }

    fn fills(&self) -> Vec<ConfigPath> {
        vec![ConfigPath::parse("citation.version").expect("static path")]
    }

    fn provide(
        &self,
        _: &ConfigTree,
        repo: &RepoState,
        wanted: &[ConfigPath],
    ) -> Vec<(ConfigPath, ConfigNode)> {
        let Some(latest) = repo.main().tags.latest_final() else {
            return Vec::new();
        };
        let origin = Origin::new("augment:latest-release", 0);
        wanted
            .iter()
            .map(|p| {
                (
                    p.clone(),
                    ConfigNode::from_json(&json!(latest.to_string()), &origin),
                )
            })
            .collect()
    }
}
