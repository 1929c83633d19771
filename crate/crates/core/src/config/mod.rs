//! The control center: a directory of YAML documents merged into one tree,
//! then inherited, templated, augmented, validated and synchronized into
//! generated project files.

mod augment;
mod cache;
mod inherit;
mod node;
mod schema;
mod sync;
mod template;
pub mod yaml;

use std::fs;
use std::path::{Path, PathBuf};

use indexmap::IndexMap;
use thiserror::Error;

pub use augment::{augment, AugmentationProvider};
pub use cache::{
    cache_key, cache_lookup, CacheEntry, CacheLookup, CacheStore, DEFAULT_RETENTION_SECS,
};
pub use inherit::{
    resolve_inheritance, DocumentFetcher, FileFetcher, InheritanceDirective, MapFetcher,
    MergePolicy, MAX_INHERITANCE_DEPTH,
};
pub use node::{ConfigNode, ConfigPath, ConfigTree, Origin, Value};
pub use schema::{validate, Schema, SchemaSet};
pub use sync::{synchronize, FileGenerator, GeneratedFile, SyncReport, GENERATED_HEADER};
pub use template::{has_markers, render_templates, TemplateExpr};

/// Conventional location of the control center inside a repository.
pub const CONTROL_DIR: &str = ".control";

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("control-center directory {0} does not exist")]
    MissingDirectory(PathBuf),
    #[error("no control-center documents in {0}")]
    NoDocuments(PathBuf),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{file}:{line}: {message}")]
    Parse {
        file: String,
        line: usize,
        message: String,
    },
    #[error("{file}: top-level document must be a mapping")]
    NotAMapping { file: String },
    #[error("duplicate key {key:?} defined at {first} and {second}")]
    DuplicateKey {
        key: String,
        first: Origin,
        second: Origin,
    },
    #[error("{origin}: invalid inheritance directive: {message}")]
    BadDirective { origin: Origin, message: String },
    #[error("failed to fetch {uri} and no usable cache entry for {key}: {message}")]
    FetchFailed {
        uri: String,
        key: String,
        message: String,
    },
    #[error("inheritance cycle: {}", chain.join(" -> "))]
    InheritanceCycle { chain: Vec<String> },
    #[error("inheritance depth limit of {limit} exceeded at {key}")]
    DepthExceeded { limit: usize, key: String },
    #[error("{uri}: path {path} not found in fetched document")]
    SourcePathMissing { uri: String, path: String },
    #[error("{origin}: cannot merge at {target}: {message}")]
    MergeConflict {
        target: ConfigPath,
        origin: Origin,
        message: String,
    },
    #[error("{origin}: template at {path} references missing path {reference}")]
    UnknownReference {
        path: ConfigPath,
        reference: String,
        origin: Origin,
    },
    #[error("{origin}: malformed template marker at {path}")]
    MalformedMarker { path: ConfigPath, origin: Origin },
    #[error("cyclic template dependency among {}", paths.iter().map(ToString::to_string).collect::<Vec<_>>().join(", "))]
    TemplateCycle { paths: Vec<ConfigPath> },
    #[error("provider {provider} attempted to overwrite existing path {path}")]
    ProviderOverwrite { provider: String, path: ConfigPath },
    #[error("provider {provider} wrote undeclared path {path}")]
    ProviderUndeclared { provider: String, path: ConfigPath },
    #[error("invalid schema {name}: {message}")]
    InvalidSchema { name: String, message: String },
    #[error("generators {first} and {second} both claim {path}")]
    GeneratorCollision {
        path: String,
        first: String,
        second: String,
    },
    #[error("generator {generator} failed: {message}")]
    GeneratorFailed { generator: String, message: String },
    #[error("workspace {path} is not writable: {source}")]
    NotWritable {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> ConfigError + '_ {
    move |source| ConfigError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Lists control-center documents in name order.
fn document_files(dir: &Path) -> Result<Vec<PathBuf>, ConfigError> {
    let mut files = Vec::new();
    for entry in fs::read_dir(dir).map_err(io_err(dir))? {
        let path = entry.map_err(io_err(dir))?.path();
        let is_yaml = path
            .extension()
            .and_then(|e| e.to_str())
            .is_some_and(|e| e == "yaml" || e == "yml");
        if is_yaml && path.is_file() {
            files.push(path);
        }
    }
    files.sort();
    Ok(files)
}

/// Merges named documents into one tree. Top-level keys must be disjoint.
pub fn merge_documents<'a, I>(docs: I) -> Result<ConfigTree, ConfigError>
where
    I: IntoIterator<Item = (&'a str, &'a str)>,
{
    let mut merged: IndexMap<String, ConfigNode> = IndexMap::new();
    let mut root_origin = None;
    for (name, text) in docs {
        root_origin.get_or_insert_with(|| Origin::new(name, 1));
        let Some(doc) = yaml::parse_document(text, name)? else {
            continue;
        };
        let Value::Mapping(entries) = doc.value else {
            return Err(ConfigError::NotAMapping {
                file: name.to_string(),
            });
        };
        for (key, node) in entries {
            if let Some(existing) = merged.get(&key) {
                return Err(ConfigError::DuplicateKey {
                    key,
                    first: existing.origin.clone(),
                    second: node.origin.clone(),
                });
            }
            merged.insert(key, node);
        }
    }
    let origin = root_origin.unwrap_or_else(|| Origin::new("<empty>", 0));
    Ok(ConfigTree {
        root: ConfigNode::new(Value::Mapping(merged), origin),
    })
}

/// Loads every `*.yaml` document in `dir` into one tree.
pub fn load_tree(dir: &Path) -> Result<ConfigTree, ConfigError> {
    if !dir.is_dir() {
        return Err(ConfigError::MissingDirectory(dir.to_path_buf()));
    }
    let files = document_files(dir)?;
    if files.is_empty() {
        return Err(ConfigError::NoDocuments(dir.to_path_buf()));
    }
    let mut docs = Vec::with_capacity(files.len());
    for path in &files {
        let text = fs::read_to_string(path).map_err(io_err(path))?;
        docs.push((path.display().to_string(), text));
    }
    merge_documents(docs.iter().map(|(n, t)| (n.as_str(), t.as_str())))
}
