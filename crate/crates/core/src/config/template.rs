//! `${{ dotted.path }}` substitution across the tree.
//!
//! A marker that spans a whole scalar is replaced by the referenced node,
//! type included. Markers embedded in longer text are stringified.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::OnceLock;

use petgraph::algo::{tarjan_scc, toposort};
use petgraph::graph::{DiGraph, NodeIndex};
use regex::Regex;

use super::node::{ConfigNode, ConfigPath, ConfigTree, Value};
use super::ConfigError;

fn marker_regex() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"\$\{\{\s*([^{}]*?)\s*\}\}").expect("static regex"))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TemplateExpr {
    pub raw: String,
    pub references: BTreeSet<String>,
}

impl TemplateExpr {
    /// Returns `None` when `raw` has no marker, and `Err(())` when a marker
    /// is malformed.
    pub fn parse(raw: &str) -> Result<Option<Self>, ()> {
        if !raw.contains("${{") {
            return Ok(None);
        }
        let mut references = BTreeSet::new();
        for cap in marker_regex().captures_iter(raw) {
            let inner = &cap[1];
            if ConfigPath::parse(inner).filter(|p| !p.is_root()).is_none() {
                return Err(());
            }
            references.insert(inner.to_string());
        }
        if marker_regex().replace_all(raw, "").contains("${{") {
            return Err(());
        }
        Ok(Some(Self {
            raw: raw.to_string(),
            references,
        }))
    }

    /// The referenced path when the marker is the entire scalar.
    pub fn whole_reference(&self) -> Option<&str> {
        let cap = marker_regex().captures(&self.raw)?;
        let m = cap.get(0)?;
        (m.start() == 0 && m.end() == self.raw.len()).then(|| cap.get(1).map(|g| g.as_str()))?
    }
}

fn dependent(reference: &ConfigPath, templated: &ConfigPath) -> bool {
    templated.starts_with(reference) || reference.starts_with(templated)
}

/// Renders every marker in dependency order.
pub fn render_templates(tree: &ConfigTree) -> Result<ConfigTree, ConfigError> {
    let mut templated: BTreeMap<ConfigPath, TemplateExpr> = BTreeMap::new();
    let mut failure = None;
    tree.root.walk(&mut ConfigPath::root(), &mut |path, node| {
        if failure.is_some() {
            return;
        }
        if let Value::String(s) = &node.value {
            match TemplateExpr::parse(s) {
                Ok(Some(expr)) => {
                    templated.insert(path.clone(), expr);
                }
                Ok(None) => {}
                Err(()) => {
                    failure = Some(ConfigError::MalformedMarker {
                        path: path.clone(),
                        origin: node.origin.clone(),
                    })
                }
            }
        }
    });
    if let Some(err) = failure {
        return Err(err);
    }

    let mut graph: DiGraph<ConfigPath, ()> = DiGraph::new();
    let index: BTreeMap<ConfigPath, NodeIndex> = templated
        .keys()
        .map(|p| (p.clone(), graph.add_node(p.clone())))
        .collect();
    for (path, expr) in &templated {
        for reference in &expr.references {
            let reference = ConfigPath::parse(reference).expect("validated in parse");
            for other in templated.keys() {
                if dependent(&reference, other) {
                    // Edge points from dependency to dependent.
                    graph.add_edge(index[other], index[path], ());
                }
            }
        }
    }
    let order = toposort(&graph, None).map_err(|_| {
        let mut paths: Vec<ConfigPath> = tarjan_scc(&graph)
            .into_iter()
            .filter(|scc| scc.len() > 1 || graph.contains_edge(scc[0], scc[0]))
            .flatten()
            .map(|ix| graph[ix].clone())
            .collect();
        paths.sort();
        ConfigError::TemplateCycle { paths }
    })?;

    let mut root = tree.root.clone();
    for ix in order {
        let path = &graph[ix];
        let expr = &templated[path];
        let origin = tree
            .lookup(path)
            .map(|n| n.origin.clone())
            .expect("templated path exists");
        let resolve = |root: &ConfigNode, reference: &str| -> Result<ConfigNode, ConfigError> {
            ConfigPath::parse(reference)
                .and_then(|p| root.lookup(&p).cloned())
                .ok_or_else(|| ConfigError::UnknownReference {
                    path: path.clone(),
                    reference: reference.to_string(),
                    origin: origin.clone(),
                })
        };
        let rendered = match expr.whole_reference() {
            Some(reference) => {
                let target = resolve(&root, reference)?;
                ConfigNode::new(target.value, origin.clone())
            }
            None => {
                let mut out = String::with_capacity(expr.raw.len());
                let mut last = 0;
                for cap in marker_regex().captures_iter(&expr.raw) {
                    let m = cap.get(0).expect("whole match");
                    out.push_str(&expr.raw[last..m.start()]);
                    out.push_str(&resolve(&root, &cap[1])?.to_embedded_string());
                    last = m.end();
                }
                out.push_str(&expr.raw[last..]);
                ConfigNode::new(Value::String(out), origin.clone())
            }
        };
        *root.lookup_mut(path).expect("templated path exists") = rendered;
    }
    Ok(ConfigTree { root })
}

/// True when any scalar string still carries a marker.
pub fn has_markers(tree: &ConfigTree) -> bool {
    let mut found = false;
    tree.root.walk(&mut ConfigPath::root(), &mut |_, node| {
        if node.as_str().is_some_and(|s| s.contains("${{")) {
            found = true;
        }
    });
    found
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::merge_documents;
    use serde_json::json;

    fn tree(text: &str) -> ConfigTree {
        merge_documents([("t.yaml", text)]).unwrap()
    }

    #[test]
    fn single_substitution() {
        let out = render_templates(&tree("name: X\ntitle: \"${{ name }} tool\"\n")).unwrap();
        assert_eq!(out.str_at("title"), Some("X tool"));
    }

    #[test]
    fn whole_marker_preserves_type() {
        let out = render_templates(&tree("a: \"${{ b }}\"\nb: 3\n")).unwrap();
        assert_eq!(out.get("a").unwrap().value, Value::Integer(3));
        let out = render_templates(&tree("a: \"${{b}}\"\nb: {x: [1]}\n")).unwrap();
        assert_eq!(out.get("a").unwrap().to_json(), json!({"x": [1]}));
    }

    #[test]
    fn embedded_markers_stringify() {
        let out = render_templates(&tree("v: 2\nok: true\ns: \"v${{ v }}-${{ ok }}\"\n")).unwrap();
        assert_eq!(out.str_at("s"), Some("v2-true"));
    }

    #[test]
    fn chains_render_in_dependency_order() {
        let out = render_templates(&tree(
            "c: \"${{ b }}!\"\nb: \"${{ a.name }} and more\"\na: {name: base}\n",
        ))
        .unwrap();
        assert_eq!(out.str_at("c"), Some("base and more!"));
    }

    #[test]
    fn references_into_substituted_subtrees() {
        let out = render_templates(&tree(
            "src: {x: 1}\ncopy: \"${{ src }}\"\nuse: \"${{ copy.x }}\"\n",
        ))
        .unwrap();
        assert_eq!(out.get("use").unwrap().value, Value::Integer(1));
    }

    #[test]
    fn cycle_is_reported() {
        match render_templates(&tree("a: \"${{ b }}\"\nb: \"${{ a }}\"\n")) {
            Err(ConfigError::TemplateCycle { paths }) => {
                let names: Vec<String> = paths.iter().map(ToString::to_string).collect();
                assert_eq!(names, ["a", "b"]);
            }
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(
            render_templates(&tree("a: {b: \"${{ a }}\"}\n")),
            Err(ConfigError::TemplateCycle { .. })
        ));
    }

    #[test]
    fn missing_reference_lists_path_and_origin() {
        match render_templates(&tree("x: 1\ny: \"${{ nope.here }}\"\n")) {
            Err(ConfigError::UnknownReference {
                path,
                reference,
                origin,
            }) => {
                assert_eq!(path.to_string(), "y");
                assert_eq!(reference, "nope.here");
                assert_eq!(origin.line, 2);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn malformed_markers() {
        for text in ["a: \"${{ b\"\n", "a: \"${{ }}\"\n", "a: \"${{ b c }}\"\n"] {
            assert!(matches!(
                render_templates(&tree(text)),
                Err(ConfigError::MalformedMarker { .. })
            ));
        }
    }

    #[test]
    fn sequences_are_addressable() {
        let out = render_templates(&tree("team: [ada, bob]\nlead: \"${{ team.1 }}\"\n")).unwrap();
        assert_eq!(out.str_at("lead"), Some("bob"));
        assert!(!has_markers(&out));
    }

    #[test]
    fn expression_references() {
        let e = TemplateExpr::parse("${{ a.b }} and ${{c}}")
            .unwrap()
            .unwrap();
        assert_eq!(
            e.references,
            ["a.b", "c"].iter().map(|s| s.to_string()).collect()
        );
        assert_eq!(e.whole_reference(), None);
        assert_eq!(
            TemplateExpr::parse("${{ a }}")
                .unwrap()
                .unwrap()
                .whole_reference(),
            Some("a")
        );
        assert_eq!(TemplateExpr::parse("plain").unwrap(), None);
    }
}
