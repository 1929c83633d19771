use indexmap::IndexMap;

use super::node::{ConfigNode, ConfigPath, ConfigTree, Value};
use super::ConfigError;
use crate::vcs::RepoState;

/// Fills control-center paths from repository analysis.
///
/// Implementations must be pure functions of the tree and repository
/// snapshot, and write only to the paths they are asked for.
pub trait AugmentationProvider {
    fn name(&self) -> &str;

    /// Paths this provider is able to fill.
    fn fills(&self) -> Vec<ConfigPath>;

    /// Produces values for `wanted`, a subset of [`fills`](Self::fills)
    /// that is absent from the tree.
    fn provide(
        &self,
        tree: &ConfigTree,
        repo: &RepoState,
        wanted: &[ConfigPath],
    ) -> Vec<(ConfigPath, ConfigNode)>;
}

fn insert_absent(
    root: &mut ConfigNode,
    path: &ConfigPath,
    node: ConfigNode,
    provider: &str,
) -> Result<(), ConfigError> {
    let overwrite = || ConfigError::ProviderOverwrite {
        provider: provider.to_string(),
        path: path.clone(),
    };
    let Some((last, parents)) = path.segments().split_last() else {
        return Err(overwrite());
    };
    let mut current = root;
    for seg in parents {
        let Value::Mapping(map) = &mut current.value else {
            return Err(overwrite());
        };
        current = map.entry(seg.clone()).or_insert_with(|| {
            ConfigNode::new(Value::Mapping(IndexMap::new()), node.origin.clone())
        });
    }
    let Value::Mapping(map) = &mut current.value else {
        return Err(overwrite());
    };
    if map.contains_key(last) {
        return Err(overwrite());
    }
    map.insert(last.clone(), node);
    Ok(())
}

/// Runs providers in order; values already present in the tree always win.
pub fn augment(
    tree: &ConfigTree,
    providers: &[&dyn AugmentationProvider],
    repo: &RepoState,
) -> Result<ConfigTree, ConfigError> {
    let mut out = tree.clone();
    for provider in providers {
        let declared = provider.fills();
        let wanted: Vec<ConfigPath> = declared
            .iter()
            .filter(|p| !out.contains(p))
            .cloned()
            .collect();
        if wanted.is_empty() {
            continue;
        }
        for (path, node) in provider.provide(&out, repo, &wanted) {
            if out.contains(&path) {
                return Err(ConfigError::ProviderOverwrite {
                    provider: provider.name().to_string(),
                    path,
                });
            }
            if !wanted.contains(&path) {
                return Err(ConfigError::ProviderUndeclared {
                    provider: provider.name().to_string(),
                    path,
                });
            }
            insert_absent(&mut out.root, &path, node, provider.name())?;
        }
    }
    Ok(out)
}
