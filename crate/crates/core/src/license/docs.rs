//! License documents, placeholder filling and source annotation.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::OnceLock;

use regex::Regex;

use super::expr::LicenseExpr;
use super::registry::{validate_license_expr, LicenseRecord, LicenseRegistry};
use super::LicenseError;

pub const IDENTIFIER_TAG: &str = "SPDX-License-Identifier:";

fn placeholder_regex() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"<<\s*([A-Za-z0-9_]+)\s*>>").expect("static regex"))
}

fn record_text(record: &LicenseRecord) -> String {
    match &record.text {
        Some(text) => text.clone(),
        None => format!(
            "{}\n\nThe full text is available at https://spdx.org/licenses/{}.html\n",
            record.header, record.id
        ),
    }
}

/// Substitutes every `<<field>>` placeholder from `fields`.
pub fn customize_license_text(
    record: &LicenseRecord,
    fields: &BTreeMap<String, String>,
) -> Result<String, LicenseError> {
    let text = record_text(record);
    let re = placeholder_regex();
    if let Some(missing) = re
        .captures_iter(&text)
        .map(|c| c[1].to_string())
        .find(|k| !fields.contains_key(k))
    {
        return Err(LicenseError::MissingField {
            license: record.id.clone(),
            field: missing,
        });
    }
    Ok(re
        .replace_all(&text, |c: &regex::Captures| fields[&c[1]].clone())
        .into_owned())
}

fn normalized(text: String) -> String {
    let mut out = text.trim_end().to_string();
    out.push('\n');
    out
}

/// `LICENSE` for a single id; otherwise one `LICENSES/<id>.txt` per component
/// and a `LICENSE` stating the expression.
pub fn generate_license_docs(
    expr: &LicenseExpr,
    registry: &LicenseRegistry,
    fields: &BTreeMap<String, String>,
) -> Result<Vec<(String, String)>, LicenseError> {
    let report = validate_license_expr(expr, registry);
    if report.has_errors() {
        return Err(LicenseError::Invalid(report));
    }
    if let LicenseExpr::Id(id) = expr {
        let record = registry.license(&id.id).expect("validated id");
        return Ok(vec![(
            "LICENSE".to_string(),
            normalized(customize_license_text(record, fields)?),
        )]);
    }

    let mut files: BTreeMap<String, String> = BTreeMap::new();
    for id in expr.licenses() {
        let record = registry.license(&id.id).expect("validated id");
        files.insert(
            format!("LICENSES/{}.txt", record.id),
            normalized(customize_license_text(record, fields)?),
        );
    }
    let exceptions: BTreeSet<&str> = expr.exceptions().into_iter().collect();
    for exception in exceptions {
        let record = registry.exception(exception).expect("validated exception");
        let text = record.text.clone().unwrap_or_else(|| {
            format!(
                "{}\n\nThe full text is available at https://spdx.org/licenses/{}.html\n",
                record.id, record.id
            )
        });
        files.insert(format!("LICENSES/{}.txt", record.id), normalized(text));
    }
    let mut index =
        format!("This project is licensed under the SPDX license expression\n\n    {expr}\n\n");
    index.push_str("The license texts are in the LICENSES directory:\n\n");
    for path in files.keys() {
        index.push_str(&format!("- {path}\n"));
    }
    let mut out = vec![("LICENSE".to_string(), index)];
    out.extend(files);
    Ok(out)
}

/// Ensures `content` starts with an identifier comment for `expr`, after any
/// shebang line. An existing identifier line is replaced in place.
pub fn annotate_source(content: &str, prefix: &str, expr: &LicenseExpr) -> String {
    let line = format!("{prefix} {IDENTIFIER_TAG} {expr}");
    let mut lines: Vec<&str> = content.split_inclusive('\n').collect();
    if let Some(i) = lines.iter().position(|l| l.contains(IDENTIFIER_TAG)) {
        let ending = if lines[i].ends_with("\r\n") {
            "\r\n"
        } else if lines[i].ends_with('\n') {
            "\n"
        } else {
            ""
        };
        let replacement = format!("{line}{ending}");
        lines[i] = &replacement;
        return lines.concat();
    }
    let at = usize::from(lines.first().is_some_and(|l| l.starts_with("#!")));
    let mut out = String::with_capacity(content.len() + line.len() + 1);
    for l in &lines[..at] {
        out.push_str(l);
        if !l.ends_with('\n') {
            out.push('\n');
        }
    }
    out.push_str(&line);
    out.push('\n');
    for l in &lines[at..] {
        out.push_str(l);
    }
    out
}

/// Project license id → dependency ids known to be compatible with it.
#[derive(Debug, Clone, Default, PartialEq, Eq, serde::Deserialize, serde::Serialize)]
pub struct CompatibilityMatrix(pub BTreeMap<String, BTreeSet<String>>);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Compatibility {
    Compatible,
    Incompatible,
    Unknown,
}

impl CompatibilityMatrix {
    fn pair(&self, project: &str, dependency: &str) -> Compatibility {
        if project == dependency {
            return Compatibility::Compatible;
        }
        match self.0.get(project) {
            Some(allowed) if allowed.contains(dependency) => Compatibility::Compatible,
            Some(_) => Compatibility::Incompatible,
            None => Compatibility::Unknown,
        }
    }

    /// A dependency may be used if some choice among its `OR` branches is
    /// compatible with every license of the project.
    pub fn check(&self, project: &LicenseExpr, dependency: &LicenseExpr) -> Compatibility {
        let project_ids: BTreeSet<&str> = project
            .licenses()
            .into_iter()
            .map(|l| l.id.as_str())
            .collect();
        self.eval(&project_ids, dependency)
    }

    fn eval(&self, project: &BTreeSet<&str>, dep: &LicenseExpr) -> Compatibility {
        use Compatibility::*;
        match dep {
            LicenseExpr::Id(l) | LicenseExpr::With { license: l, .. } => {
                let results: Vec<Compatibility> =
                    project.iter().map(|p| self.pair(p, &l.id)).collect();
                if results.contains(&Incompatible) {
                    Incompatible
                } else if results.contains(&Unknown) {
                    Unknown
                } else {
                    Compatible
                }
            }
            LicenseExpr::And(a, b) => match (self.eval(project, a), self.eval(project, b)) {
                (Incompatible, _) | (_, Incompatible) => Incompatible,
                (Compatible, Compatible) => Compatible,
                _ => Unknown,
            },
            LicenseExpr::Or(a, b) => match (self.eval(project, a), self.eval(project, b)) {
                (Compatible, _) | (_, Compatible) => Compatible,
                (Incompatible, Incompatible) => Incompatible,
                _ => Unknown,
            },
        }
    }
}
