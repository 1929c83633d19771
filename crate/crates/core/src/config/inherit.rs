//! Inheritance of control-center fragments from other documents.
//!
//! Directives live in a top-level `inherit` sequence:
//!
//! ```yaml
//! inherit:
//!   - source: https://example.org/org-defaults.yaml
//!     path: license          # optional, selects a subtree of the fetched document
//!     target: license        # optional, defaults to the root
//!     policy: replace        # replace | deep-merge | fill-missing (default deep-merge)
//!     retention: 3600        # optional cache retention in seconds
//! ```

use std::collections::BTreeMap;
use std::path::PathBuf;

use indexmap::IndexMap;

use super::cache::{cache_key, CacheEntry, CacheLookup, CacheStore, DEFAULT_RETENTION_SECS};
use super::node::{ConfigNode, ConfigPath, ConfigTree, Origin, Value};
use super::{yaml, ConfigError};

pub const MAX_INHERITANCE_DEPTH: usize = 10;

const DIRECTIVES_KEY: &str = "inherit";

/// Retrieves source documents by URI.
pub trait DocumentFetcher {
    fn fetch(&self, uri: &str) -> Result<String, String>;
}

/// Serves documents from memory.
#[derive(Debug, Clone, Default)]
pub struct MapFetcher {
    docs: BTreeMap<String, String>,
}

impl MapFetcher {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, uri: impl Into<String>, text: impl Into<String>) -> Self {
        self.docs.insert(uri.into(), text.into());
        self
    }
}

impl DocumentFetcher for MapFetcher {
    fn fetch(&self, uri: &str) -> Result<String, String> {
        self.docs
            .get(uri)
            .cloned()
            .ok_or_else(|| format!("{uri} not available"))
    }
}

/// Reads local files; `file://` URIs and relative paths resolve against `base`.
#[derive(Debug, Clone)]
pub struct FileFetcher {
    base: PathBuf,
}

impl FileFetcher {
    pub fn new(base: impl Into<PathBuf>) -> Self {
        Self { base: base.into() }
    }
}

impl DocumentFetcher for FileFetcher {
    fn fetch(&self, uri: &str) -> Result<String, String> {
        if uri.contains("://") && !uri.starts_with("file://") {
            return Err(format!("unsupported scheme in {uri}"));
        }
        let path = self.base.join(uri.trim_start_matches("file://"));
        std::fs::read_to_string(&path).map_err(|e| format!("{}: {e}", path.display()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MergePolicy {
    /// Incoming value replaces the target.
    Replace,
    /// Mappings merge recursively with incoming values winning; anything
    /// else is replaced.
    DeepMerge,
    /// Only keys absent from the target are added.
    FillMissing,
}

impl MergePolicy {
    fn parse(s: &str) -> Option<Self> {
        match s {
            "replace" => Some(Self::Replace),
            "deep-merge" => Some(Self::DeepMerge),
            "fill-missing" => Some(Self::FillMissing),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct InheritanceDirective {
    pub source: String,
    pub source_path: ConfigPath,
    pub target: ConfigPath,
    pub policy: MergePolicy,
    pub retention: Option<u64>,
    pub origin: Origin,
}

impl InheritanceDirective {
    pub fn key(&self) -> String {
        cache_key(&self.source, &self.source_path.segments().join("."))
    }

    pub fn from_node(node: &ConfigNode) -> Result<Self, ConfigError> {
        let bad = |message: String| ConfigError::BadDirective {
            origin: node.origin.clone(),
            message,
        };
        let map = node
            .as_mapping()
            .ok_or_else(|| bad("directive must be a mapping".into()))?;
        for key in map.keys() {
            if !matches!(
                key.as_str(),
                "source" | "path" | "target" | "policy" | "retention"
            ) {
                return Err(bad(format!("unknown key {key:?}")));
            }
        }
        let text = |key: &str| -> Result<Option<&str>, ConfigError> {
            match map.get(key) {
                None => Ok(None),
                Some(n) => n
                    .as_str()
                    .map(Some)
                    .ok_or_else(|| bad(format!("{key} must be a string"))),
            }
        };
        let source = text("source")?
            .filter(|s| !s.trim().is_empty())
            .ok_or_else(|| bad("missing source".into()))?
            .to_string();
        let parse_path = |key: &str| -> Result<ConfigPath, ConfigError> {
            let raw = text(key)?.unwrap_or("");
            ConfigPath::parse(raw).ok_or_else(|| bad(format!("invalid {key} path {raw:?}")))
        };
        let source_path = parse_path("path")?;
        let target = parse_path("target")?;
        let policy = match text("policy")? {
            None => MergePolicy::DeepMerge,
            Some(p) => MergePolicy::parse(p).ok_or_else(|| {
                bad(format!(
                    "policy {p:?} is not one of replace|deep-merge|fill-missing"
                ))
            })?,
        };
        let retention = match map.get("retention") {
            None => None,
            Some(n) => Some(
                n.as_i64()
                    .and_then(|i| u64::try_from(i).ok())
                    .ok_or_else(|| bad("retention must be a non-negative integer".into()))?,
            ),
        };
        Ok(Self {
            source,
            source_path,
            target,
            policy,
            retention,
            origin: node.origin.clone(),
        })
    }
}

struct Resolver<'a> {
    fetcher: Option<&'a dyn DocumentFetcher>,
    cache: Option<&'a CacheStore>,
    now: u64,
}

impl Resolver<'_> {
    fn obtain(&self, directive: &InheritanceDirective, key: &str) -> Result<String, ConfigError> {
        let mut stale = false;
        if let Some(cache) = self.cache {
            match cache.lookup(key, self.now) {
                CacheLookup::Hit(payload) => return Ok(payload),
                CacheLookup::Stale(_) => stale = true,
                CacheLookup::Miss { .. } => {}
            }
        }
        let failure = |message: String| ConfigError::FetchFailed {
            uri: directive.source.clone(),
            key: key.to_string(),
            message: if stale {
                format!("{message}; cached copy is stale")
            } else {
                message
            },
        };
        let fetcher = self
            .fetcher
            .ok_or_else(|| failure("no fetcher available".into()))?;
        let text = fetcher.fetch(&directive.source).map_err(failure)?;
        if let Some(cache) = self.cache {
            let entry = CacheEntry {
                key: key.to_string(),
                fetched_at: self.now,
                retention: directive.retention.unwrap_or(DEFAULT_RETENTION_SECS),
                payload: text.clone(),
            };
            if let Err(e) = cache.store(&entry) {
                log::warn!("could not cache {key}: {e}");
            }
        }
        Ok(text)
    }

    fn resolve(
        &self,
        mut doc: ConfigNode,
        chain: &mut Vec<String>,
    ) -> Result<ConfigNode, ConfigError> {
        let directives = match &mut doc.value {
            Value::Mapping(map) => map.shift_remove(DIRECTIVES_KEY),
            _ => None,
        };
        let Some(directives) = directives else {
            return Ok(doc);
        };
        let items = match directives.value {
            Value::Sequence(items) => items,
            Value::Null => Vec::new(),
            _ => {
                return Err(ConfigError::BadDirective {
                    origin: directives.origin,
                    message: "inherit must be a sequence".into(),
                })
            }
        };
        for item in &items {
            let directive = InheritanceDirective::from_node(item)?;
            let key = directive.key();
            if chain.contains(&key) {
                let mut cycle = chain.clone();
                cycle.push(key);
                return Err(ConfigError::InheritanceCycle { chain: cycle });
            }
            if chain.len() >= MAX_INHERITANCE_DEPTH {
                return Err(ConfigError::DepthExceeded {
                    limit: MAX_INHERITANCE_DEPTH,
                    key,
                });
            }
            let text = self.obtain(&directive, &key)?;
            let fetched = yaml::parse_document(&text, &directive.source)?.unwrap_or_else(|| {
                ConfigNode::new(
                    Value::Mapping(IndexMap::new()),
                    Origin::new(directive.source.clone(), 1),
                )
            });
            chain.push(key);
            let fetched = self.resolve(fetched, chain)?;
            chain.pop();
            let selected = fetched
                .lookup(&directive.source_path)
                .cloned()
                .ok_or_else(|| ConfigError::SourcePathMissing {
                    uri: directive.source.clone(),
                    path: directive.source_path.to_string(),
                })?;
            merge_at(&mut doc, &directive, selected)?;
        }
        Ok(doc)
    }
}

fn merge_at(
    doc: &mut ConfigNode,
    directive: &InheritanceDirective,
    incoming: ConfigNode,
) -> Result<(), ConfigError> {
    let conflict = |message: &str| ConfigError::MergeConflict {
        target: directive.target.clone(),
        origin: directive.origin.clone(),
        message: message.to_string(),
    };
    let segments = directive.target.segments();
    let Some((last, parents)) = segments.split_last() else {
        if incoming.as_mapping().is_none() {
            return Err(conflict("the root can only receive a mapping"));
        }
        apply_policy(doc, incoming, directive.policy);
        return Ok(());
    };
    let mut node = doc;
    for seg in parents {
        let Value::Mapping(map) = &mut node.value else {
            return Err(conflict("intermediate node is not a mapping"));
        };
        node = map.entry(seg.clone()).or_insert_with(|| {
            ConfigNode::new(Value::Mapping(IndexMap::new()), incoming.origin.clone())
        });
    }
    let Value::Mapping(map) = &mut node.value else {
        return Err(conflict("parent of target is not a mapping"));
    };
    match map.get_mut(last) {
        Some(existing) => apply_policy(existing, incoming, directive.policy),
        None => {
            map.insert(last.clone(), incoming);
        }
    }
    Ok(())
}

fn apply_policy(existing: &mut ConfigNode, incoming: ConfigNode, policy: MergePolicy) {
    match policy {
        MergePolicy::Replace => *existing = incoming,
        MergePolicy::DeepMerge => deep_merge(existing, incoming),
        MergePolicy::FillMissing => fill_missing(existing, incoming),
    }
}

fn deep_merge(existing: &mut ConfigNode, incoming: ConfigNode) {
    match (&mut existing.value, incoming.value) {
        (Value::Mapping(dst), Value::Mapping(src)) => {
            for (k, v) in src {
                match dst.get_mut(&k) {
                    Some(slot) => deep_merge(slot, v),
                    None => {
                        dst.insert(k, v);
                    }
                }
            }
        }
        (_, value) => {
            *existing = ConfigNode::new(value, incoming.origin);
        }
    }
}

fn fill_missing(existing: &mut ConfigNode, incoming: ConfigNode) {
    if let (Value::Mapping(dst), Value::Mapping(src)) = (&mut existing.value, incoming.value) {
        for (k, v) in src {
            match dst.get_mut(&k) {
                Some(slot) => fill_missing(slot, v),
                None => {
                    dst.insert(k, v);
                }
            }
        }
    }
}

/// Resolves every `inherit` directive, recursively, and removes them.
///
/// A fresh cache entry is used without consulting the fetcher. Stale or
/// missing entries require a successful fetch.
pub fn resolve_inheritance(
    tree: &ConfigTree,
    fetcher: Option<&dyn DocumentFetcher>,
    cache: Option<&CacheStore>,
    now: u64,
) -> Result<ConfigTree, ConfigError> {
    let resolver = Resolver {
        fetcher,
        cache,
        now,
    };
    let root = resolver.resolve(tree.root.clone(), &mut Vec::new())?;
    Ok(ConfigTree { root })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::merge_documents;
    use serde_json::json;

    fn tree(text: &str) -> ConfigTree {
        merge_documents([("local.yaml", text)]).unwrap()
    }

    #[test]
    fn replace_at_target() {
        let t = tree("name: X\nlicense: {expr: GPL-3.0-only, holder: me}\ninherit:\n  - {source: S, target: license, policy: replace}\n");
        let fetcher = MapFetcher::new().with("S", "expr: MIT\n");
        let out = resolve_inheritance(&t, Some(&fetcher), None, 0).unwrap();
        assert_eq!(
            out.to_json(),
            json!({"name": "X", "license": {"expr": "MIT"}})
        );
        assert_eq!(out.get("license.expr").unwrap().origin, Origin::new("S", 1));
    }

    #[test]
    fn deep_merge_and_fill_missing() {
        let t = tree("a: {x: 1, y: {p: 1}}\ninherit:\n  - {source: S, target: a}\n");
        let fetcher = MapFetcher::new().with("S", "y: {q: 2}\nx: 9\nz: [1]\n");
        let out = resolve_inheritance(&t, Some(&fetcher), None, 0).unwrap();
        assert_eq!(
            out.to_json(),
            json!({"a": {"x": 9, "y": {"p": 1, "q": 2}, "z": [1]}})
        );

        let t = tree(
            "a: {x: 1, y: {p: 1}}\ninherit:\n  - {source: S, target: a, policy: fill-missing}\n",
        );
        let out = resolve_inheritance(&t, Some(&fetcher), None, 0).unwrap();
        assert_eq!(
            out.to_json(),
            json!({"a": {"x": 1, "y": {"p": 1, "q": 2}, "z": [1]}})
        );
    }

    #[test]
    fn source_path_selects_subtree_and_target_is_created() {
        let t = tree("inherit:\n  - {source: S, path: org.license, target: meta.license}\n");
        let fetcher = MapFetcher::new().with("S", "org:\n  license: {expr: MIT}\n");
        let out = resolve_inheritance(&t, Some(&fetcher), None, 0).unwrap();
        assert_eq!(out.to_json(), json!({"meta": {"license": {"expr": "MIT"}}}));
    }

    #[test]
    fn missing_source_path_is_an_error() {
        let t = tree("inherit:\n  - {source: S, path: nope}\n");
        let fetcher = MapFetcher::new().with("S", "a: 1\n");
        assert!(matches!(
            resolve_inheritance(&t, Some(&fetcher), None, 0),
            Err(ConfigError::SourcePathMissing { .. })
        ));
    }

    #[test]
    fn nested_directives_resolve() {
        let t = tree("inherit:\n  - {source: A}\n");
        let fetcher = MapFetcher::new()
            .with(
                "A",
                "a: 1\ninherit:\n  - {source: B, policy: fill-missing}\n",
            )
            .with("B", "a: 2\nb: 2\n");
        let out = resolve_inheritance(&t, Some(&fetcher), None, 0).unwrap();
        assert_eq!(out.to_json(), json!({"a": 1, "b": 2}));
    }

    #[test]
    fn self_inheritance_is_a_cycle() {
        let t = tree("inherit:\n  - {source: S}\n");
        let fetcher = MapFetcher::new().with("S", "inherit:\n  - {source: S}\n");
        match resolve_inheritance(&t, Some(&fetcher), None, 0) {
            Err(ConfigError::InheritanceCycle { chain }) => assert_eq!(chain, vec!["S#", "S#"]),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn same_source_twice_on_separate_chains_is_fine() {
        let t = tree("inherit:\n  - {source: S, target: a}\n  - {source: S, target: b}\n");
        let fetcher = MapFetcher::new().with("S", "v: 1\n");
        let out = resolve_inheritance(&t, Some(&fetcher), None, 0).unwrap();
        assert_eq!(out.to_json(), json!({"a": {"v": 1}, "b": {"v": 1}}));
    }

    #[test]
    fn depth_limit() {
        let mut fetcher = MapFetcher::new();
        for i in 0..12 {
            fetcher = fetcher.with(
                format!("d{i}"),
                format!("inherit:\n  - {{source: d{}}}\n", i + 1),
            );
        }
        fetcher = fetcher.with("d12", "leaf: true\n");
        let t = tree("inherit:\n  - {source: d0}\n");
        assert!(matches!(
            resolve_inheritance(&t, Some(&fetcher), None, 0),
            Err(ConfigError::DepthExceeded { limit: 10, .. })
        ));

        let t = tree("inherit:\n  - {source: d3}\n");
        let out = resolve_inheritance(&t, Some(&fetcher), None, 0).unwrap();
        assert_eq!(out.to_json(), json!({"leaf": true}));
    }

    #[test]
    fn malformed_directives() {
        for text in [
            "inherit:\n  - {target: a}\n",
            "inherit:\n  - {source: S, policy: overwrite}\n",
            "inherit:\n  - {source: S, target: 'a b'}\n",
            "inherit:\n  - {source: S, extra: 1}\n",
            "inherit: S\n",
        ] {
            let err = resolve_inheritance(&tree(text), None, None, 0).unwrap_err();
            assert!(
                matches!(err, ConfigError::BadDirective { .. }),
                "{text}: {err}"
            );
        }
    }

    #[test]
    fn fresh_cache_serves_without_fetcher() {
        let tmp = tempfile::tempdir().unwrap();
        let cache = CacheStore::new(tmp.path());
        let t = tree("inherit:\n  - {source: S, target: license, retention: 100}\n");
        let fetcher = MapFetcher::new().with("S", "expr: MIT\n");
        resolve_inheritance(&t, Some(&fetcher), Some(&cache), 1_000).unwrap();

        let out = resolve_inheritance(&t, None, Some(&cache), 1_050).unwrap();
        assert_eq!(out.str_at("license.expr"), Some("MIT"));

        let err = resolve_inheritance(&t, None, Some(&cache), 1_101).unwrap_err();
        match err {
            ConfigError::FetchFailed { uri, message, .. } => {
                assert_eq!(uri, "S");
                assert!(message.contains("stale"));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn fetch_failure_without_cache() {
        let t = tree("inherit:\n  - {source: S}\n");
        let err = resolve_inheritance(&t, Some(&MapFetcher::new()), None, 0).unwrap_err();
        assert!(matches!(err, ConfigError::FetchFailed { .. }));
    }
}
