use std::collections::BTreeMap;
use std::fmt;

use indexmap::IndexMap;
use serde_json::{Map, Number, Value as Json};

/// Where a node was defined.
#[derive(
    Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, serde::Serialize, serde::Deserialize,
)]
pub struct Origin {
    pub file: String,
    pub line: usize,
}

impl Origin {
    pub fn new(file: impl Into<String>, line: usize) -> Self {
        Self {
            file: file.into(),
            line,
        }
    }
}

impl fmt::Display for Origin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.file, self.line)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Mapping(IndexMap<String, ConfigNode>),
    Sequence(Vec<ConfigNode>),
    String(String),
    Integer(i64),
    Float(f64),
    Boolean(bool),
    Null,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConfigNode {
    pub value: Value,
    pub origin: Origin,
}

impl ConfigNode {
    pub fn new(value: Value, origin: Origin) -> Self {
        Self { value, origin }
    }

    pub fn kind(&self) -> &'static str {
        match self.value {
            Value::Mapping(_) => "mapping",
            Value::Sequence(_) => "sequence",
            Value::String(_) => "string",
            Value::Integer(_) => "integer",
            Value::Float(_) => "float",
            Value::Boolean(_) => "boolean",
            Value::Null => "null",
        }
    }

    pub fn as_str(&self) -> Option<&str> {
        match &self.value {
            Value::String(s) => Some(s),
            _ => None,
        }
    }

    pub fn as_i64(&self) -> Option<i64> {
        match self.value {
            Value::Integer(i) => Some(i),
            _ => None,
        }
    }

    pub fn as_bool(&self) -> Option<bool> {
        match self.value {
            Value::Boolean(b) => Some(b),
            _ => None,
        }
    }

    pub fn as_mapping(&self) -> Option<&IndexMap<String, ConfigNode>> {
        match &self.value {
            Value::Mapping(m) => Some(m),
            _ => None,
        }
    }

    pub fn as_sequence(&self) -> Option<&[ConfigNode]> {
        match &self.value {
            Value::Sequence(s) => Some(s),
            _ => None,
        }
    }

    pub fn get(&self, key: &str) -> Option<&ConfigNode> {
        self.as_mapping().and_then(|m| m.get(key))
    }

    fn child(&self, segment: &str) -> Option<&ConfigNode> {
        match &self.value {
            Value::Mapping(m) => m.get(segment),
            Value::Sequence(items) => segment.parse::<usize>().ok().and_then(|i| items.get(i)),
            _ => None,
        }
    }

    fn child_mut(&mut self, segment: &str) -> Option<&mut ConfigNode> {
        match &mut self.value {
            Value::Mapping(m) => m.get_mut(segment),
            Value::Sequence(items) => segment
                .parse::<usize>()
                .ok()
                .and_then(move |i| items.get_mut(i)),
            _ => None,
        }
    }

    pub fn lookup(&self, path: &ConfigPath) -> Option<&ConfigNode> {
        path.segments()
            .iter()
            .try_fold(self, |node, seg| node.child(seg))
    }

    pub fn lookup_mut(&mut self, path: &ConfigPath) -> Option<&mut ConfigNode> {
        let mut node = self;
        for seg in path.segments() {
            node = node.child_mut(seg)?;
        }
        Some(node)
    }

    /// Scalar text used when a value is embedded inside a larger string.
    pub fn to_embedded_string(&self) -> String {
        match &self.value {
            Value::String(s) => s.clone(),
            Value::Integer(i) => i.to_string(),
            Value::Float(f) => f.to_string(),
            Value::Boolean(b) => b.to_string(),
            Value::Null => "null".to_string(),
            Value::Mapping(_) | Value::Sequence(_) => self.to_json().to_string(),
        }
    }

    /// Visits every node depth-first, parents before children.
    pub fn walk<'a>(
        &'a self,
        path: &mut ConfigPath,
        visit: &mut dyn FnMut(&ConfigPath, &'a ConfigNode),
    ) {
        visit(path, self);
        match &self.value {
            Value::Mapping(m) => {
                for (k, child) in m {
                    path.push(k.clone());
                    child.walk(path, visit);
                    path.pop();
                }
            }
            Value::Sequence(items) => {
                for (i, child) in items.iter().enumerate() {
                    path.push(i.to_string());
                    child.walk(path, visit);
                    path.pop();
                }
            }
            _ => {}
        }
    }

    pub fn to_json(&self) -> Json {
        match &self.value {
            Value::Mapping(m) => Json::Object(
                m.iter()
                    .map(|(k, v)| (k.clone(), v.to_json()))
                    .collect::<Map<_, _>>(),
            ),
            Value::Sequence(items) => Json::Array(items.iter().map(ConfigNode::to_json).collect()),
            Value::String(s) => Json::String(s.clone()),
            Value::Integer(i) => Json::Number((*i).into()),
            Value::Float(f) => Number::from_f64(*f).map(Json::Number).unwrap_or(Json::Null),
            Value::Boolean(b) => Json::Bool(*b),
            Value::Null => Json::Null,
        }
    }

    /// Builds a node tree from JSON, stamping every node with `origin`.
    pub fn from_json(json: &Json, origin: &Origin) -> ConfigNode {
        let value = match json {
            Json::Object(map) => Value::Mapping(
                map.iter()
                    .map(|(k, v)| (k.clone(), ConfigNode::from_json(v, origin)))
                    .collect(),
            ),
            Json::Array(items) => Value::Sequence(
                items
                    .iter()
                    .map(|v| ConfigNode::from_json(v, origin))
                    .collect(),
            ),
            Json::String(s) => Value::String(s.clone()),
            Json::Number(n) => match n.as_i64() {
                Some(i) => Value::Integer(i),
                None => Value::Float(n.as_f64().unwrap_or(0.0)),
            },
            Json::Bool(b) => Value::Boolean(*b),
            Json::Null => Value::Null,
        };
        ConfigNode::new(value, origin.clone())
    }
}

/// Dotted address into a tree; numeric segments index sequences.
#[derive(Debug, Clone, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ConfigPath(Vec<String>);

impl ConfigPath {
    pub fn root() -> Self {
        Self(Vec::new())
    }

    /// Parses `a.b.0.c`. The empty string is the root.
    pub fn parse(text: &str) -> Option<Self> {
        let text = text.trim();
        if text.is_empty() {
            return Some(Self::root());
        }
        let segments: Vec<String> = text.split('.').map(str::to_string).collect();
        if segments.iter().any(|s| {
            s.is_empty()
                || !s
                    .chars()
                    .all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-')
        }) {
            return None;
        }
        Some(Self(segments))
    }

    pub fn from_segments<I, S>(segments: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Self(segments.into_iter().map(Into::into).collect())
    }

    pub fn segments(&self) -> &[String] {
        &self.0
    }

    pub fn is_root(&self) -> bool {
        self.0.is_empty()
    }

    pub fn push(&mut self, seg: String) {
        self.0.push(seg);
    }

    pub fn pop(&mut self) -> Option<String> {
        self.0.pop()
    }

    pub fn parent(&self) -> Option<ConfigPath> {
        if self.0.is_empty() {
            None
        } else {
            Some(Self(self.0[..self.0.len() - 1].to_vec()))
        }
    }

    pub fn join(&self, seg: impl Into<String>) -> ConfigPath {
        let mut next = self.clone();
        next.0.push(seg.into());
        next
    }

    /// True when `self` equals `other` or lies beneath it.
    pub fn starts_with(&self, other: &ConfigPath) -> bool {
        self.0.len() >= other.0.len() && self.0[..other.0.len()] == other.0[..]
    }
}

impl fmt::Display for ConfigPath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            f.write_str("<root>")
        } else {
            f.write_str(&self.0.join("."))
        }
    }
}

/// The merged control center.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigTree {
    pub root: ConfigNode,
}

impl ConfigTree {
    /// Wraps a mapping node. Returns `None` for any other kind.
    pub fn new(root: ConfigNode) -> Option<Self> {
        root.as_mapping()?;
        Some(Self { root })
    }

    pub fn empty(origin: Origin) -> Self {
        Self {
            root: ConfigNode::new(Value::Mapping(IndexMap::new()), origin),
        }
    }

    pub fn get(&self, path: &str) -> Option<&ConfigNode> {
        self.root.lookup(&ConfigPath::parse(path)?)
    }

    pub fn lookup(&self, path: &ConfigPath) -> Option<&ConfigNode> {
        self.root.lookup(path)
    }

    pub fn contains(&self, path: &ConfigPath) -> bool {
        self.lookup(path).is_some()
    }

    pub fn str_at(&self, path: &str) -> Option<&str> {
        self.get(path).and_then(ConfigNode::as_str)
    }

    /// Origin of every addressable path.
    pub fn provenance(&self) -> BTreeMap<ConfigPath, Origin> {
        let mut out = BTreeMap::new();
        self.root.walk(&mut ConfigPath::root(), &mut |path, node| {
            out.insert(path.clone(), node.origin.clone());
        });
        out
    }

    /// Origin of the deepest existing node along `path`.
    pub fn nearest_origin(&self, path: &ConfigPath) -> Origin {
        let mut node = &self.root;
        for seg in path.segments() {
            match node.child(seg) {
                Some(next) => node = next,
                None => break,
            }
        }
        node.origin.clone()
    }

    pub fn to_json(&self) -> Json {
        self.root.to_json()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn path_parsing() {
        assert_eq!(ConfigPath::parse("").unwrap(), ConfigPath::root());
        assert_eq!(
            ConfigPath::parse("team.members.0").unwrap().segments(),
            ["team", "members", "0"]
        );
        assert!(ConfigPath::parse("a..b").is_none());
        assert!(ConfigPath::parse("a.b c").is_none());
    }

    #[test]
    fn lookup_through_sequences() {
        let o = Origin::new("t.yaml", 1);
        let tree = ConfigTree::new(ConfigNode::from_json(
            &json!({"team": {"members": [{"id": "ada"}, {"id": "bob"}]}}),
            &o,
        ))
        .unwrap();
        assert_eq!(tree.str_at("team.members.1.id"), Some("bob"));
        assert!(tree.get("team.members.2").is_none());
        assert!(tree.get("team.members.x").is_none());
    }

    #[test]
    fn embedded_strings() {
        let o = Origin::new("t", 1);
        assert_eq!(
            ConfigNode::from_json(&json!(3), &o).to_embedded_string(),
            "3"
        );
        assert_eq!(
            ConfigNode::from_json(&json!(true), &o).to_embedded_string(),
            "true"
        );
        assert_eq!(
            ConfigNode::from_json(&json!([1, "a"]), &o).to_embedded_string(),
            "[1,\"a\"]"
        );
    }
}
