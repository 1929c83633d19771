//! `{{ name }}` substitution for commit, protocol and release-notes templates.

use std::sync::OnceLock;

use regex::Regex;

fn marker_regex() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"\{\{\s*([^{}]*?)\s*\}\}").expect("static regex"))
}

/// Marker names in order of first appearance.
pub fn marker_names(template: &str) -> Vec<String> {
    let mut names: Vec<String> = Vec::new();
    for cap in marker_regex().captures_iter(template) {
        if !names.iter().any(|n| n == &cap[1]) {
            names.push(cap[1].to_string());
        }
    }
    names
}

/// Replaces each marker with `lookup(name)`. The error carries the first
/// name `lookup` could not resolve.
pub fn render(template: &str, lookup: impl Fn(&str) -> Option<String>) -> Result<String, String> {
    let mut out = String::with_capacity(template.len());
    let mut last = 0;
    for cap in marker_regex().captures_iter(template) {
        let m = cap.get(0).expect("whole match");
        let name = &cap[1];
        let value = lookup(name).ok_or_else(|| name.to_string())?;
        out.push_str(&template[last..m.start()]);
        out.push_str(&value);
        last = m.end();
    }
    out.push_str(&template[last..]);
    Ok(out)
}
