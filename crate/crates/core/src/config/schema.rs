//! Validation of the control center against JSON Schema documents.

use std::collections::BTreeSet;
use std::path::Path;

use jsonschema::error::ValidationErrorKind;
use jsonschema::Validator;
use serde_json::Value as Json;

use super::node::{ConfigPath, ConfigTree};
use super::ConfigError;
use crate::report::{Severity, ValidationReport};

const BUNDLED: &[(&str, &str)] = &[
    ("project", include_str!("../../assets/schemas/project.json")),
    (
        "metadata",
        include_str!("../../assets/schemas/metadata.json"),
    ),
    ("package", include_str!("../../assets/schemas/package.json")),
    (
        "documentation",
        include_str!("../../assets/schemas/documentation.json"),
    ),
    ("issues", include_str!("../../assets/schemas/issues.json")),
    (
        "version-control",
        include_str!("../../assets/schemas/version_control.json"),
    ),
    (
        "workflows",
        include_str!("../../assets/schemas/workflows.json"),
    ),
];

pub struct Schema {
    pub name: String,
    pub document: Json,
    validator: Validator,
}

impl std::fmt::Debug for Schema {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Schema").field("name", &self.name).finish()
    }
}

impl Schema {
    pub fn new(name: impl Into<String>, document: Json) -> Result<Self, ConfigError> {
        let name = name.into();
        let validator =
            jsonschema::validator_for(&document).map_err(|e| ConfigError::InvalidSchema {
                name: name.clone(),
                message: e.to_string(),
            })?;
        Ok(Self {
            name,
            document,
            validator,
        })
    }

    fn top_level_keys(&self) -> impl Iterator<Item = &str> {
        self.document
            .get("properties")
            .and_then(Json::as_object)
            .into_iter()
            .flat_map(|m| m.keys().map(String::as_str))
    }
}

#[derive(Debug, Default)]
pub struct SchemaSet {
    schemas: Vec<Schema>,
}

impl SchemaSet {
    pub fn new(schemas: Vec<Schema>) -> Self {
        Self { schemas }
    }

    /// Schemas covering every control-center category.
    pub fn bundled() -> Self {
        let schemas = BUNDLED
            .iter()
            .map(|(name, text)| {
                let doc: Json = serde_json::from_str(text).expect("bundled schema is valid JSON");
                Schema::new(*name, doc).expect("bundled schema compiles")
            })
            .collect();
        Self { schemas }
    }

    /// The bundled set, compiled on first use and shared by the process.
    pub fn shared() -> &'static SchemaSet {
        static SHARED: std::sync::OnceLock<SchemaSet> = std::sync::OnceLock::new();
        SHARED.get_or_init(SchemaSet::bundled)
    }

    /// Loads every `*.json` file in `dir`, in name order.
    pub fn from_dir(dir: &Path) -> Result<Self, ConfigError> {
        let io = |source| ConfigError::Io {
            path: dir.to_path_buf(),
            source,
        };
        let mut paths: Vec<_> = std::fs::read_dir(dir)
            .map_err(io)?
            .filter_map(Result::ok)
            .map(|e| e.path())
            .filter(|p| p.extension().is_some_and(|e| e == "json"))
            .collect();
        paths.sort();
        let mut schemas = Vec::new();
        for path in paths {
            let text = std::fs::read_to_string(&path).map_err(|source| ConfigError::Io {
                path: path.clone(),
                source,
            })?;
            let name = path
                .file_stem()
                .and_then(|s| s.to_str())
                .unwrap_or("schema")
                .to_string();
            let doc = serde_json::from_str(&text).map_err(|e| ConfigError::InvalidSchema {
                name: name.clone(),
                message: e.to_string(),
            })?;
            schemas.push(Schema::new(name, doc)?);
        }
        Ok(Self { schemas })
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.schemas.iter().map(|s| s.name.as_str())
    }
}

fn pointer_to_path(pointer: &str) -> ConfigPath {
    ConfigPath::from_segments(
        pointer
            .split('/')
            .skip(1)
            .map(|s| s.replace("~1", "/").replace("~0", "~")),
    )
}

fn describe(kind: &ValidationErrorKind, fallback: String) -> (Option<String>, String) {
    match kind {
        ValidationErrorKind::Required { property } => {
            let name = property
                .as_str()
                .map(str::to_string)
                .unwrap_or_else(|| property.to_string());
            (
                Some(name.clone()),
                format!("missing required field `{name}`"),
            )
        }
        ValidationErrorKind::Enum { options } => {
            let choices: Vec<String> = options
                .as_array()
                .map(|a| {
                    a.iter()
                        .map(|v| {
                            v.as_str()
                                .map(str::to_string)
                                .unwrap_or_else(|| v.to_string())
                        })
                        .collect()
                })
                .unwrap_or_default();
            (None, format!("not one of {}", choices.join("|")))
        }
        ValidationErrorKind::AdditionalProperties { unexpected } => {
            (None, format!("unexpected keys: {}", unexpected.join(", ")))
        }
        _ => (None, fallback),
    }
}

/// Checks `tree` against every schema. Violations are reported as
/// findings ordered by origin.
pub fn validate(tree: &ConfigTree, schemas: &SchemaSet) -> ValidationReport {
    let instance = tree.to_json();
    let mut seen = BTreeSet::new();
    let mut report = ValidationReport::default();
    for schema in &schemas.schemas {
        for error in schema.validator.iter_errors(&instance) {
            let path = pointer_to_path(error.instance_path.as_str());
            let (_, message) = describe(&error.kind, error.to_string());
            if !seen.insert((path.clone(), message.clone())) {
                continue;
            }
            let origin = tree.nearest_origin(&path);
            report.push(Severity::Error, path.to_string(), message, Some(origin));
        }
    }

    let known: BTreeSet<&str> = schemas
        .schemas
        .iter()
        .flat_map(Schema::top_level_keys)
        .collect();
    if !known.is_empty() {
        if let Some(map) = tree.root.as_mapping() {
            for (key, node) in map {
                if !known.contains(key.as_str()) {
                    report.push(
                        Severity::Warning,
                        key.clone(),
                        "key is not covered by any schema",
                        Some(node.origin.clone()),
                    );
                }
            }
        }
    }

    report.findings.sort_by(|a, b| {
        let key = |f: &crate::report::Finding| {
            let o = f
                .origin
                .clone()
                .unwrap_or_else(|| super::Origin::new("", 0));
            (o.file, o.line, f.path.clone(), f.message.clone())
        };
        key(a).cmp(&key(b))
    });
    report
}
