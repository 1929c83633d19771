//! Built-in generators for files derived from the control center.

use std::collections::BTreeMap;

use serde_json::{json, Map, Value as Json};

use crate::config::{yaml::to_yaml_string, ConfigNode, ConfigTree, FileGenerator, GeneratedFile};
use crate::issue::{compile_forms, refresh_form_choices};
use crate::license::{generate_license_docs, parse_license_expr, LicenseRegistry};
use crate::vcs::RepoState;

fn string_at(tree: &ConfigTree, path: &str) -> Option<String> {
    tree.get(path)
        .filter(|n| n.as_sequence().is_none() && n.as_mapping().is_none())
        .map(ConfigNode::to_embedded_string)
}

fn strings_at(tree: &ConfigTree, path: &str) -> Vec<String> {
    tree.get(path)
        .and_then(ConfigNode::as_sequence)
        .unwrap_or(&[])
        .iter()
        .map(ConfigNode::to_embedded_string)
        .collect()
}

/// `CITATION.cff` in Citation File Format 1.2.0.
pub struct CitationFile;

impl FileGenerator for CitationFile {
    fn name(&self) -> &str {
        "citation"
    }

    fn generate(&self, tree: &ConfigTree) -> Result<Vec<GeneratedFile>, String> {
        let title = string_at(tree, "title")
            .or_else(|| string_at(tree, "name"))
            .ok_or("project has no name")?;
        let mut doc = Map::new();
        doc.insert("cff-version".into(), json!("1.2.0"));
        doc.insert(
            "message".into(),
            json!(string_at(tree, "citation.message")
                .unwrap_or_else(|| "Please cite this software using these metadata.".into())),
        );
        doc.insert("title".into(), json!(title));
        let authors: Vec<Json> = tree
            .get("team.members")
            .and_then(ConfigNode::as_sequence)
            .unwrap_or(&[])
            .iter()
            .map(|m| {
                let mut a = Map::new();
                if let Some(name) = m.get("name").and_then(ConfigNode::as_str) {
                    a.insert("name".into(), json!(name));
                }
                for key in ["email", "orcid"] {
                    if let Some(v) = m.get(key).and_then(ConfigNode::as_str) {
                        a.insert(key.into(), json!(v));
                    }
                }
                Json::Object(a)
            })
            .collect();
        if authors.is_empty() {
            return Err("citation needs at least one team member".into());
        }
        doc.insert("authors".into(), Json::Array(authors));
        let optional = [
            ("abstract", "description"),
            ("license", "license.expression"),
            ("version", "citation.version"),
            ("date-released", "citation.date_released"),
            ("doi", "citation.doi"),
            ("repository-code", "urls.repository"),
            ("url", "urls.documentation"),
        ];
        for (key, path) in optional {
            if let Some(v) = string_at(tree, path) {
                doc.insert(key.into(), json!(v));
            }
        }
        let keywords = strings_at(tree, "keywords");
        if !keywords.is_empty() {
            doc.insert("keywords".into(), json!(keywords));
        }
        Ok(vec![GeneratedFile::new(
            "CITATION.cff",
            to_yaml_string(&Json::Object(doc)),
        )])
    }
}

/// `LICENSE` and, for compound expressions, `LICENSES/<id>.txt`.
pub struct LicenseFiles;

impl FileGenerator for LicenseFiles {
    fn name(&self) -> &str {
        "license"
    }

    fn generate(&self, tree: &ConfigTree) -> Result<Vec<GeneratedFile>, String> {
        let Some(text) = string_at(tree, "license.expression") else {
            return Ok(Vec::new());
        };
        let expr = parse_license_expr(&text).map_err(|e| e.to_string())?;
        let mut registry = LicenseRegistry::bundled();
        for custom in tree
            .get("license.custom")
            .and_then(ConfigNode::as_sequence)
            .unwrap_or(&[])
        {
            let field = |k: &str| custom.get(k).and_then(ConfigNode::as_str).unwrap_or("");
            registry.add_custom(field("id"), field("name"), field("text"))?;
        }
        let mut fields = BTreeMap::new();
        for (key, path) in [
            ("year", "license.year"),
            ("holder", "license.holder"),
            ("name", "name"),
            ("title", "title"),
        ] {
            if let Some(v) = string_at(tree, path) {
                fields.insert(key.to_string(), v);
            }
        }
        let files = generate_license_docs(&expr, &registry, &fields).map_err(|e| e.to_string())?;
        Ok(files
            .into_iter()
            .map(|(p, c)| GeneratedFile::new(p, c))
            .collect())
    }
}

/// Issue forms under `.github/ISSUE_TEMPLATE/`, with version and endpoint
/// choices refreshed from the repository and `package.api`.
pub struct IssueForms {
    pub state: RepoState,
}

impl FileGenerator for IssueForms {
    fn name(&self) -> &str {
        "issue-forms"
    }

    fn generate(&self, tree: &ConfigTree) -> Result<Vec<GeneratedFile>, String> {
        let (forms, _) = compile_forms(tree).map_err(|e| e.to_string())?;
        let api = strings_at(tree, "package.api");
        Ok(refresh_form_choices(&forms, &self.state, &api)
            .iter()
            .map(|f| GeneratedFile::new(f.file_name(), f.to_yaml()))
            .collect())
    }
}
