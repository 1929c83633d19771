//! SPDX license expressions, the license registry and license documents.

mod docs;
mod expr;
mod registry;

use thiserror::Error;

pub use docs::{
    annotate_source, customize_license_text, generate_license_docs, Compatibility,
    CompatibilityMatrix, IDENTIFIER_TAG,
};
pub use expr::{parse_license_expr, ExprError, LicenseExpr, LicenseId};
pub use registry::{validate_license_expr, ExceptionRecord, LicenseRecord, LicenseRegistry};

use crate::report::ValidationReport;

#[derive(Debug, Error, PartialEq)]
pub enum LicenseError {
    #[error(transparent)]
    Parse(#[from] ExprError),
    #[error("license {license} needs a value for placeholder {field:?}")]
    MissingField { license: String, field: String },
    #[error("license expression is invalid: {}", .0.errors().map(|f| f.message.as_str()).collect::<Vec<_>>().join("; "))]
    Invalid(ValidationReport),
}
