//! Issue forms compiled from `issues.types`.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value as Json};

use super::{IssueError, UNRELEASED};
use crate::config::{yaml::to_yaml_string, ConfigNode, ConfigTree};
use crate::report::{Severity, ValidationReport};
use crate::vcs::RepoState;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FieldKind {
    Dropdown,
    Text,
    Textarea,
    Checkboxes,
}

impl FieldKind {
    fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "dropdown" => FieldKind::Dropdown,
            "text" => FieldKind::Text,
            "textarea" => FieldKind::Textarea,
            "checkboxes" => FieldKind::Checkboxes,
            _ => return None,
        })
    }

    /// Body item type in the hosting platform's form syntax.
    fn form_type(self) -> &'static str {
        match self {
            FieldKind::Dropdown => "dropdown",
            FieldKind::Text => "input",
            FieldKind::Textarea => "textarea",
            FieldKind::Checkboxes => "checkboxes",
        }
    }

    pub fn has_options(self) -> bool {
        matches!(self, FieldKind::Dropdown | FieldKind::Checkboxes)
    }
}

/// Where a dropdown's options come from when refreshed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ChoiceSource {
    Versions,
    Api,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FormField {
    pub key: String,
    pub label: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
    pub kind: FieldKind,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub options: Vec<String>,
    #[serde(default)]
    pub required: bool,
    #[serde(default)]
    pub multiple: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source: Option<ChoiceSource>,
    /// Derives `<prefix>/<value>` labels from this field.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label_prefix: Option<String>,
}

impl FormField {
    /// Prefix of labels derived from this field's values.
    pub fn label_namespace(&self) -> Option<&str> {
        match self.source {
            Some(ChoiceSource::Versions) => Some("version"),
            Some(ChoiceSource::Api) => Some("api"),
            None => self.label_prefix.as_deref(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FormDefinition {
    pub id: String,
    pub type_id: String,
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
    /// Ticket title template; `{{ key }}` markers refer to field values.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub title: Option<String>,
    pub fields: Vec<FormField>,
}

impl FormDefinition {
    pub fn field(&self, key: &str) -> Option<&FormField> {
        self.fields.iter().find(|f| f.key == key)
    }

    pub fn file_name(&self) -> String {
        format!(".github/ISSUE_TEMPLATE/{}.yaml", self.id)
    }

    /// The form as an issue-form document.
    pub fn to_issue_form(&self) -> Json {
        let mut doc = serde_json::Map::new();
        doc.insert("name".into(), json!(self.name));
        doc.insert(
            "description".into(),
            json!(self
                .description
                .clone()
                .unwrap_or_else(|| self.name.clone())),
        );
        if let Some(title) = &self.title {
            doc.insert("title".into(), json!(title));
        }
        doc.insert("labels".into(), json!([format!("type/{}", self.type_id)]));
        let body: Vec<Json> = self
            .fields
            .iter()
            .filter(|f| !f.kind.has_options() || !f.options.is_empty())
            .map(|f| {
                let mut attributes = serde_json::Map::new();
                attributes.insert("label".into(), json!(f.label));
                if let Some(d) = &f.description {
                    attributes.insert("description".into(), json!(d));
                }
                match f.kind {
                    FieldKind::Dropdown => {
                        attributes.insert("options".into(), json!(f.options));
                        if f.multiple {
                            attributes.insert("multiple".into(), json!(true));
                        }
                    }
                    FieldKind::Checkboxes => {
                        let opts: Vec<Json> =
                            f.options.iter().map(|o| json!({"label": o})).collect();
                        attributes.insert("options".into(), Json::Array(opts));
                    }
                    FieldKind::Text | FieldKind::Textarea => {}
                }
                json!({
                    "type": f.kind.form_type(),
                    "id": f.key,
                    "attributes": attributes,
                    "validations": {"required": f.required},
                })
            })
            .collect();
        doc.insert("body".into(), Json::Array(body));
        Json::Object(doc)
    }

    pub fn to_yaml(&self) -> String {
        to_yaml_string(&self.to_issue_form())
    }
}

fn field_error(type_id: &str, message: String) -> IssueError {
    IssueError::InvalidForm {
        type_id: type_id.to_string(),
        message,
    }
}

fn string_list(node: Option<&ConfigNode>) -> Vec<String> {
    node.and_then(ConfigNode::as_sequence)
        .map(|items| items.iter().map(ConfigNode::to_embedded_string).collect())
        .unwrap_or_default()
}

fn compile_field(type_id: &str, node: &ConfigNode) -> Result<FormField, IssueError> {
    let key = node
        .get("key")
        .and_then(ConfigNode::as_str)
        .ok_or_else(|| field_error(type_id, "field without a key".into()))?
        .to_string();
    let kind = node
        .get("kind")
        .and_then(ConfigNode::as_str)
        .and_then(FieldKind::parse)
        .ok_or_else(|| field_error(type_id, format!("field {key} has no valid kind")))?;
    let source = match node.get("source").and_then(ConfigNode::as_str) {
        None => None,
        Some("versions") => Some(ChoiceSource::Versions),
        Some("api") => Some(ChoiceSource::Api),
        Some(other) => {
            return Err(field_error(
                type_id,
                format!("field {key} has unknown source {other}"),
            ))
        }
    };
    if source.is_some() && kind != FieldKind::Dropdown {
        return Err(field_error(
            type_id,
            format!("field {key} has a source but is not a dropdown"),
        ));
    }
    let mut options = string_list(node.get("options"));
    if kind.has_options() && options.is_empty() {
        match source {
            Some(ChoiceSource::Versions) => options.push(UNRELEASED.to_string()),
            Some(ChoiceSource::Api) => {}
            None => {
                return Err(field_error(
                    type_id,
                    format!("field {key} declares no options"),
                ))
            }
        }
    }
    Ok(FormField {
        label: node
            .get("label")
            .and_then(ConfigNode::as_str)
            .map(str::to_string)
            .unwrap_or_else(|| key.clone()),
        description: node
            .get("description")
            .and_then(ConfigNode::as_str)
            .map(str::to_string),
        kind,
        options,
        required: node
            .get("required")
            .and_then(ConfigNode::as_bool)
            .unwrap_or(false),
        multiple: node
            .get("multiple")
            .and_then(ConfigNode::as_bool)
            .unwrap_or(false),
        source,
        label_prefix: node
            .get("label_prefix")
            .and_then(ConfigNode::as_str)
            .map(str::to_string),
        key,
    })
}

/// One form per configured issue type, ordered by form id.
pub fn compile_forms(
    tree: &ConfigTree,
) -> Result<(Vec<FormDefinition>, ValidationReport), IssueError> {
    let mut report = ValidationReport::default();
    let types = tree
        .get("issues.types")
        .and_then(ConfigNode::as_sequence)
        .unwrap_or(&[]);
    if types.is_empty() {
        report.push(
            Severity::Warning,
            "issues.types",
            "no issue types configured; no forms generated",
            tree.get("issues").map(|n| n.origin.clone()),
        );
        return Ok((Vec::new(), report));
    }
    let mut forms: Vec<FormDefinition> = Vec::new();
    for node in types {
        let type_id = node
            .get("id")
            .and_then(ConfigNode::as_str)
            .ok_or_else(|| field_error("?", format!("issue type at {} has no id", node.origin)))?
            .to_string();
        let fields_node = node
            .get("fields")
            .and_then(ConfigNode::as_sequence)
            .ok_or_else(|| IssueError::MissingFieldDeclaration(type_id.clone()))?;
        let mut fields = Vec::new();
        let mut keys = BTreeSet::new();
        for f in fields_node {
            let field = compile_field(&type_id, f)?;
            if !keys.insert(field.key.clone()) {
                return Err(field_error(
                    &type_id,
                    format!("duplicate field key {}", field.key),
                ));
            }
            fields.push(field);
        }
        let id = node
            .get("form")
            .and_then(ConfigNode::as_str)
            .unwrap_or(&type_id)
            .to_string();
        if forms.iter().any(|f| f.id == id) {
            return Err(IssueError::DuplicateForm(id));
        }
        forms.push(FormDefinition {
            id,
            name: node
                .get("name")
                .and_then(ConfigNode::as_str)
                .map(str::to_string)
                .unwrap_or_else(|| type_id.clone()),
            description: node
                .get("description")
                .and_then(ConfigNode::as_str)
                .map(str::to_string),
            title: node
                .get("title")
                .and_then(ConfigNode::as_str)
                .map(str::to_string),
            type_id,
            fields,
        });
    }
    forms.sort_by(|a, b| a.id.cmp(&b.id));
    Ok((forms, report))
}

/// Repopulates sourced dropdowns. Version lists come from final-release
/// tags, newest first; an empty endpoint index drops the api field.
pub fn refresh_form_choices(
    forms: &[FormDefinition],
    state: &RepoState,
    api_index: &[String],
) -> Vec<FormDefinition> {
    let mut versions: Vec<String> = state
        .final_releases()
        .iter()
        .map(ToString::to_string)
        .collect();
    if versions.is_empty() {
        versions.push(UNRELEASED.to_string());
    }
    forms
        .iter()
        .map(|form| {
            let mut form = form.clone();
            form.fields.retain_mut(|field| match field.source {
                Some(ChoiceSource::Versions) => {
                    field.options = versions.clone();
                    true
                }
                Some(ChoiceSource::Api) => {
                    field.options = api_index.to_vec();
                    !api_index.is_empty()
                }
                None => true,
            });
            form
        })
        .collect()
}
