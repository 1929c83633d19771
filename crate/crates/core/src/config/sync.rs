//! Propagation of the control center into generated project files.

use std::collections::BTreeMap;
use std::fs;
use std::io::Read;
use std::path::{Component, Path, PathBuf};

use serde::Serialize;
use walkdir::WalkDir;

use super::node::ConfigTree;
use super::ConfigError;

/// Marker carried on the first line of every generated file.
pub const GENERATED_HEADER: &str = "generated by relforge — do not edit";

const SKIPPED_DIRS: &[&str] = &[".git", ".control", ".relforge", "target", "node_modules"];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GeneratedFile {
    /// Workspace-relative path with `/` separators.
    pub path: String,
    pub content: String,
}

impl GeneratedFile {
    pub fn new(path: impl Into<String>, content: impl Into<String>) -> Self {
        Self {
            path: path.into(),
            content: content.into(),
        }
    }
}

pub trait FileGenerator {
    fn name(&self) -> &str;
    fn generate(&self, tree: &ConfigTree) -> Result<Vec<GeneratedFile>, String>;
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct SyncReport {
    pub created: Vec<String>,
    pub updated: Vec<String>,
    pub unchanged: Vec<String>,
    pub deleted: Vec<String>,
}

impl SyncReport {
    pub fn changed(&self) -> usize {
        self.created.len() + self.updated.len() + self.deleted.len()
    }
}

/// First line stamped on a generated file, in the comment syntax of its type.
pub fn header_line(path: &str) -> String {
    let ext = path.rsplit_once('.').map(|(_, e)| e.to_ascii_lowercase());
    match ext.as_deref() {
        Some("md" | "html" | "xml") => format!("<!-- {GENERATED_HEADER} -->"),
        _ => format!("# {GENERATED_HEADER}"),
    }
}

fn with_header(file: &GeneratedFile) -> String {
    let mut out = header_line(&file.path);
    out.push('\n');
    out.push_str(&file.content);
    if !out.ends_with('\n') {
        out.push('\n');
    }
    out
}

fn is_safe_relative(path: &str) -> bool {
    let p = Path::new(path);
    !path.is_empty() && p.components().all(|c| matches!(c, Component::Normal(_)))
}

fn is_generated(path: &Path) -> bool {
    let Ok(mut file) = fs::File::open(path) else {
        return false;
    };
    let mut buf = [0u8; 512];
    let n = file.read(&mut buf).unwrap_or(0);
    let head = String::from_utf8_lossy(&buf[..n]);
    head.lines()
        .next()
        .is_some_and(|l| l.contains(GENERATED_HEADER))
}

fn previously_generated(workspace: &Path) -> Vec<String> {
    let mut found = Vec::new();
    let walker = WalkDir::new(workspace)
        .sort_by_file_name()
        .into_iter()
        .filter_entry(|e| {
            e.depth() == 0
                || !e.file_type().is_dir()
                || !SKIPPED_DIRS.contains(&e.file_name().to_string_lossy().as_ref())
        });
    for entry in walker.filter_map(Result::ok) {
        if entry.file_type().is_file() && is_generated(entry.path()) {
            if let Ok(rel) = entry.path().strip_prefix(workspace) {
                let rel: Vec<String> = rel
                    .components()
                    .map(|c| c.as_os_str().to_string_lossy().into_owned())
                    .collect();
                found.push(rel.join("/"));
            }
        }
    }
    found
}

/// Writes generator output into `workspace`, touching only files whose
/// content differs, and removes generated files no generator claims anymore.
pub fn synchronize(
    tree: &ConfigTree,
    generators: &[&dyn FileGenerator],
    workspace: &Path,
) -> Result<SyncReport, ConfigError> {
    let not_writable = |path: PathBuf| move |source| ConfigError::NotWritable { path, source };
    if !workspace.is_dir() {
        return Err(ConfigError::NotWritable {
            path: workspace.to_path_buf(),
            source: std::io::Error::new(std::io::ErrorKind::NotFound, "workspace does not exist"),
        });
    }

    let mut outputs: BTreeMap<String, (String, String)> = BTreeMap::new();
    for generator in generators {
        let files = generator
            .generate(tree)
            .map_err(|message| ConfigError::GeneratorFailed {
                generator: generator.name().to_string(),
                message,
            })?;
        for file in files {
            if !is_safe_relative(&file.path) {
                return Err(ConfigError::GeneratorFailed {
                    generator: generator.name().to_string(),
                    message: format!("unsafe output path {:?}", file.path),
                });
            }
            if let Some((owner, _)) = outputs.get(&file.path) {
                return Err(ConfigError::GeneratorCollision {
                    path: file.path,
                    first: owner.clone(),
                    second: generator.name().to_string(),
                });
            }
            let content = with_header(&file);
            outputs.insert(file.path, (generator.name().to_string(), content));
        }
    }

    let mut report = SyncReport::default();
    for (rel, (_, content)) in &outputs {
        let path = workspace.join(rel);
        match fs::read_to_string(&path) {
            Ok(existing) if existing == *content => {
                report.unchanged.push(rel.clone());
                continue;
            }
            Ok(_) => report.updated.push(rel.clone()),
            Err(_) => report.created.push(rel.clone()),
        }
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).map_err(not_writable(parent.to_path_buf()))?;
        }
        fs::write(&path, content).map_err(not_writable(path.clone()))?;
    }

    for rel in previously_generated(workspace) {
        if !outputs.contains_key(&rel) {
            let path = workspace.join(&rel);
            fs::remove_file(&path).map_err(not_writable(path))?;
            report.deleted.push(rel);
        }
    }
    Ok(report)
}
