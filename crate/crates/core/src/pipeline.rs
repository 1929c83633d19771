//! The full control-center pipeline: inherit, augment, render, validate and
//! synchronize.

use std::path::Path;

use serde::Serialize;

use crate::config::{
    augment, render_templates, resolve_inheritance, synchronize, validate, CacheStore, ConfigError,
    ConfigNode, ConfigPath, ConfigTree, DocumentFetcher, FileGenerator, SchemaSet, SyncReport,
};
use crate::generators::{CitationFile, IssueForms, LicenseFiles};
use crate::issue::compile_forms;
use crate::license::{parse_license_expr, validate_license_expr, LicenseRegistry};
use crate::providers::{ContributorList, LatestRelease};
use crate::report::{Severity, ValidationReport};
use crate::vcs::RepoState;

pub struct PipelineContext<'a> {
    pub state: RepoState,
    pub fetcher: Option<&'a dyn DocumentFetcher>,
    pub cache: Option<&'a CacheStore>,
    /// Seconds since the Unix epoch, for cache freshness.
    pub now: u64,
    /// `None` selects the bundled schemas.
    pub schemas: Option<&'a SchemaSet>,
}

impl PipelineContext<'_> {
    /// No fetcher, no cache, bundled schemas and a bare `main`.
    pub fn offline() -> Self {
        Self {
            state: RepoState::single_main("HEAD", &[]),
            fetcher: None,
            cache: None,
            now: 0,
            schemas: None,
        }
    }
}

#[derive(Debug, Serialize)]
pub struct PipelineOutcome {
    #[serde(skip)]
    pub tree: ConfigTree,
    pub report: ValidationReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sync: Option<SyncReport>,
}

/// Inheritance, augmentation and template rendering, in that order.
pub fn prepare_tree(
    raw: &ConfigTree,
    ctx: &PipelineContext<'_>,
) -> Result<ConfigTree, ConfigError> {
    let inherited = resolve_inheritance(raw, ctx.fetcher, ctx.cache, ctx.now)?;
    let augmented = augment(&inherited, &[&ContributorList, &LatestRelease], &ctx.state)?;
    render_templates(&augmented)
}

/// Schema validation plus checks that need domain knowledge: the license
/// expression and the issue-form declarations.
pub fn check_tree(tree: &ConfigTree, schemas: &SchemaSet) -> ValidationReport {
    let mut report = validate(tree, schemas);
    if let Some(node) = tree.get("license.expression") {
        let origin = Some(node.origin.clone());
        match node.as_str().map(parse_license_expr) {
            Some(Ok(expr)) => {
                let mut registry = LicenseRegistry::bundled();
                for custom in tree
                    .get("license.custom")
                    .and_then(ConfigNode::as_sequence)
                    .unwrap_or(&[])
                {
                    let field = |k: &str| custom.get(k).and_then(ConfigNode::as_str).unwrap_or("");
                    // malformed ids are already reported by the schema
                    let _ = registry.add_custom(field("id"), field("name"), field("text"));
                }
                for mut finding in validate_license_expr(&expr, &registry).findings {
                    finding.path = "license.expression".into();
                    finding.origin = origin.clone();
                    report.findings.push(finding);
                }
            }
            Some(Err(e)) => {
                report.push(Severity::Error, "license.expression", e.to_string(), origin)
            }
            None => {}
        }
    }
    if tree.get("issues").is_some() {
        if let Err(e) = compile_forms(tree) {
            let origin =
                tree.nearest_origin(&ConfigPath::parse("issues.types").expect("static path"));
            report.push(Severity::Error, "issues.types", e.to_string(), Some(origin));
        }
    }
    report
}

pub fn default_generators(state: &RepoState) -> Vec<Box<dyn FileGenerator>> {
    vec![
        Box::new(CitationFile),
        Box::new(IssueForms {
            state: state.clone(),
        }),
        Box::new(LicenseFiles),
    ]
}

/// Prepares and validates `raw`; when `workspace` is given and validation
/// found no errors, synchronizes generated files into it.
pub fn run_pipeline(
    raw: &ConfigTree,
    workspace: Option<&Path>,
    ctx: &PipelineContext<'_>,
) -> Result<PipelineOutcome, ConfigError> {
    let tree = prepare_tree(raw, ctx)?;
    let report = check_tree(&tree, ctx.schemas.unwrap_or(SchemaSet::shared()));
    let sync = match workspace {
        Some(ws) if !report.has_errors() => {
            let generators = default_generators(&ctx.state);
            let refs: Vec<&dyn FileGenerator> = generators.iter().map(|g| g.as_ref()).collect();
            Some(synchronize(&tree, &refs, ws)?)
        }
        _ => None,
    };
    Ok(PipelineOutcome { tree, report, sync })
}
