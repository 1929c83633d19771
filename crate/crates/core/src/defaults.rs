//! The bundled default control center.

use crate::config::{merge_documents, ConfigTree};

pub const DEFAULT_CONTROL: &[(&str, &str)] = &[
    (
        "documentation.yaml",
        include_str!("../assets/control/documentation.yaml"),
    ),
    ("issues.yaml", include_str!("../assets/control/issues.yaml")),
    (
        "metadata.yaml",
        include_str!("../assets/control/metadata.yaml"),
    ),
    (
        "package.yaml",
        include_str!("../assets/control/package.yaml"),
    ),
    (
        "project.yaml",
        include_str!("../assets/control/project.yaml"),
    ),
    (
        "version_control.yaml",
        include_str!("../assets/control/version_control.yaml"),
    ),
    (
        "workflows.yaml",
        include_str!("../assets/control/workflows.yaml"),
    ),
];

/// The default control center as an unprocessed tree.
pub fn default_tree() -> ConfigTree {
    merge_documents(DEFAULT_CONTROL.iter().copied()).expect("bundled control center is well-formed")
}

/// Writes the default documents into `dir`, e.g. to bootstrap `.control/`.
pub fn write_default_control(dir: &std::path::Path) -> std::io::Result<()> {
    std::fs::create_dir_all(dir)?;
    for (name, text) in DEFAULT_CONTROL {
        std::fs::write(dir.join(name), text)?;
    }
    Ok(())
}
