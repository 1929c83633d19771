//! Bundled snapshot of the SPDX License List plus project-defined licenses.

use std::collections::HashMap;
use std::sync::OnceLock;

use serde::Deserialize;

use super::expr::LicenseExpr;
use crate::report::{Severity, ValidationReport};

const SNAPSHOT: &str = include_str!("../../assets/spdx-licenses.json");

#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
pub struct LicenseRecord {
    pub id: String,
    pub name: String,
    /// Full text with `<<field>>` placeholders, when bundled.
    #[serde(default)]
    pub text: Option<String>,
    #[serde(default)]
    pub osi_approved: bool,
    #[serde(default)]
    pub fsf_libre: bool,
    #[serde(default)]
    pub deprecated: bool,
    pub header: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
pub struct ExceptionRecord {
    pub id: String,
    #[serde(default)]
    pub deprecated: bool,
    #[serde(default)]
    pub text: Option<String>,
}

#[derive(Deserialize)]
struct Snapshot {
    list_version: String,
    licenses: Vec<LicenseRecord>,
    exceptions: Vec<ExceptionRecord>,
}

#[derive(Debug, Clone)]
pub struct LicenseRegistry {
    list_version: String,
    licenses: Vec<LicenseRecord>,
    exceptions: Vec<ExceptionRecord>,
    license_index: HashMap<String, usize>,
    exception_index: HashMap<String, usize>,
}

fn bundled_snapshot() -> &'static LicenseRegistry {
    static REGISTRY: OnceLock<LicenseRegistry> = OnceLock::new();
    REGISTRY.get_or_init(|| {
        let snap: Snapshot = serde_json::from_str(SNAPSHOT).expect("bundled SPDX snapshot parses");
        LicenseRegistry::from_parts(snap.list_version, snap.licenses, snap.exceptions)
    })
}

impl LicenseRegistry {
    fn from_parts(
        list_version: String,
        licenses: Vec<LicenseRecord>,
        exceptions: Vec<ExceptionRecord>,
    ) -> Self {
        let license_index = licenses
            .iter()
            .enumerate()
            .map(|(i, r)| (r.id.to_ascii_lowercase(), i))
            .collect();
        let exception_index = exceptions
            .iter()
            .enumerate()
            .map(|(i, r)| (r.id.to_ascii_lowercase(), i))
            .collect();
        Self {
            list_version,
            licenses,
            exceptions,
            license_index,
            exception_index,
        }
    }

    pub fn bundled() -> Self {
        bundled_snapshot().clone()
    }

    pub fn list_version(&self) -> &str {
        &self.list_version
    }

    pub fn license(&self, id: &str) -> Option<&LicenseRecord> {
        self.license_index
            .get(&id.to_ascii_lowercase())
            .map(|&i| &self.licenses[i])
    }

    pub fn exception(&self, id: &str) -> Option<&ExceptionRecord> {
        self.exception_index
            .get(&id.to_ascii_lowercase())
            .map(|&i| &self.exceptions[i])
    }

    pub fn licenses(&self) -> impl Iterator<Item = &LicenseRecord> {
        self.licenses.iter()
    }

    /// Adds or replaces a project-defined `LicenseRef-` license.
    pub fn add_custom(&mut self, id: &str, name: &str, text: &str) -> Result<(), String> {
        let suffix = id.strip_prefix("LicenseRef-").unwrap_or("");
        if suffix.is_empty()
            || !suffix
                .chars()
                .all(|c| c.is_ascii_alphanumeric() || c == '.' || c == '-')
        {
            return Err(format!(
                "custom license id {id:?} must look like LicenseRef-<name>"
            ));
        }
        let record = LicenseRecord {
            id: id.to_string(),
            name: name.to_string(),
            text: Some(text.to_string()),
            osi_approved: false,
            fsf_libre: false,
            deprecated: false,
            header: format!("Licensed under the {name} ({id})."),
        };
        match self.license_index.get(&id.to_ascii_lowercase()) {
            Some(&i) => self.licenses[i] = record,
            None => {
                self.license_index
                    .insert(id.to_ascii_lowercase(), self.licenses.len());
                self.licenses.push(record);
            }
        }
        Ok(())
    }
}

/// Unknown ids are errors, deprecated ids warnings.
pub fn validate_license_expr(expr: &LicenseExpr, registry: &LicenseRegistry) -> ValidationReport {
    let mut report = ValidationReport::default();
    let mut seen = std::collections::BTreeSet::new();
    for license in expr
        .licenses()
        .into_iter()
        .filter(|l| seen.insert(l.id.as_str()))
    {
        match registry.license(&license.id) {
            None => report.push(
                Severity::Error,
                &license.id,
                format!("unknown id {}", license.id),
                None,
            ),
            Some(r) if r.deprecated => report.push(
                Severity::Warning,
                &license.id,
                format!(
                    "{} is deprecated in SPDX License List {}",
                    r.id,
                    registry.list_version()
                ),
                None,
            ),
            Some(_) => {}
        }
    }
    let mut seen = std::collections::BTreeSet::new();
    for exception in expr.exceptions().into_iter().filter(|e| seen.insert(*e)) {
        match registry.exception(exception) {
            None => report.push(
                Severity::Error,
                exception,
                format!("unknown exception {exception}"),
                None,
            ),
            Some(r) if r.deprecated => report.push(
                Severity::Warning,
                exception,
                format!("{} is deprecated", r.id),
                None,
            ),
            Some(_) => {}
        }
    }
    report
}
