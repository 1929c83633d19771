//! YAML reading with line tracking, and deterministic YAML writing.

use std::collections::HashMap;

use indexmap::IndexMap;
use serde_json::Value as Json;
use yaml_rust2::parser::{Event, MarkedEventReceiver, Parser};
use yaml_rust2::scanner::{Marker, TScalarStyle};
use yaml_rust2::yaml::Hash;
use yaml_rust2::{Yaml, YamlEmitter};

use super::node::{ConfigNode, Origin, Value};
use super::ConfigError;

enum Frame {
    Sequence {
        anchor: usize,
        line: usize,
        items: Vec<ConfigNode>,
    },
    Mapping {
        anchor: usize,
        line: usize,
        entries: IndexMap<String, ConfigNode>,
        pending_key: Option<(String, usize)>,
    },
}

struct Builder<'a> {
    file: &'a str,
    stack: Vec<Frame>,
    anchors: HashMap<usize, ConfigNode>,
    documents: Vec<ConfigNode>,
    error: Option<ConfigError>,
}

impl Builder<'_> {
    fn origin(&self, line: usize) -> Origin {
        Origin::new(self.file, line)
    }

    fn fail(&mut self, line: usize, message: impl Into<String>) {
        if self.error.is_none() {
            self.error = Some(ConfigError::Parse {
                file: self.file.to_string(),
                line,
                message: message.into(),
            });
        }
    }

    fn scalar(text: String, style: TScalarStyle) -> Value {
        if style != TScalarStyle::Plain {
            return Value::String(text);
        }
        match Yaml::from_str(&text) {
            Yaml::Integer(i) => Value::Integer(i),
            Yaml::Real(r) => match r.parse::<f64>() {
                Ok(f) => Value::Float(f),
                Err(_) => Value::String(text),
            },
            Yaml::Boolean(b) => Value::Boolean(b),
            Yaml::Null => Value::Null,
            _ => Value::String(text),
        }
    }

    fn complete(&mut self, node: ConfigNode, anchor: usize) {
        if anchor > 0 {
            self.anchors.insert(anchor, node.clone());
        }
        match self.stack.last_mut() {
            None => self.documents.push(node),
            Some(Frame::Sequence { items, .. }) => items.push(node),
            Some(Frame::Mapping {
                entries,
                pending_key,
                ..
            }) => match pending_key.take() {
                None => {
                    let key = match &node.value {
                        Value::String(s) => s.clone(),
                        Value::Integer(_) | Value::Float(_) | Value::Boolean(_) => {
                            node.to_embedded_string()
                        }
                        Value::Null => "null".to_string(),
                        _ => {
                            let line = node.origin.line;
                            self.fail(line, "mapping keys must be scalars");
                            return;
                        }
                    };
                    if let Some(existing) = entries.get(&key) {
                        let first = existing.origin.line;
                        let line = node.origin.line;
                        self.fail(
                            line,
                            format!("duplicate key {key:?} (first defined at line {first})"),
                        );
                        return;
                    }
                    *pending_key = Some((key, node.origin.line));
                }
                Some((key, _)) => {
                    entries.insert(key, node);
                }
            },
        }
    }
}

impl MarkedEventReceiver for Builder<'_> {
    fn on_event(&mut self, ev: Event, mark: Marker) {
        if self.error.is_some() {
            return;
        }
        let line = mark.line();
        match ev {
            Event::Scalar(text, style, anchor, _) => {
                let node = ConfigNode::new(Self::scalar(text, style), self.origin(line));
                self.complete(node, anchor);
            }
            Event::SequenceStart(anchor, _) => self.stack.push(Frame::Sequence {
                anchor,
                line,
                items: Vec::new(),
            }),
            Event::MappingStart(anchor, _) => self.stack.push(Frame::Mapping {
                anchor,
                line,
                entries: IndexMap::new(),
                pending_key: None,
            }),
            Event::SequenceEnd => {
                if let Some(Frame::Sequence {
                    anchor,
                    line,
                    items,
                }) = self.stack.pop()
                {
                    let node = ConfigNode::new(Value::Sequence(items), self.origin(line));
                    self.complete(node, anchor);
                }
            }
            Event::MappingEnd => {
                if let Some(Frame::Mapping {
                    anchor,
                    line,
                    entries,
                    ..
                }) = self.stack.pop()
                {
                    let node = ConfigNode::new(Value::Mapping(entries), self.origin(line));
                    self.complete(node, anchor);
                }
            }
            Event::Alias(id) => match self.anchors.get(&id).cloned() {
                Some(node) => self.complete(node, 0),
                None => self.fail(line, format!("unknown alias {id}")),
            },
            _ => {}
        }
    }
}

/// Parses a single YAML document. An empty document yields `None`.
pub fn parse_document(text: &str, file: &str) -> Result<Option<ConfigNode>, ConfigError> {
    let mut builder = Builder {
        file,
        stack: Vec::new(),
        anchors: HashMap::new(),
        documents: Vec::new(),
        error: None,
    };
    let mut parser = Parser::new_from_str(text);
    parser
        .load(&mut builder, true)
        .map_err(|e| ConfigError::Parse {
            file: file.to_string(),
            line: e.marker().line(),
            message: e.info().to_string(),
        })?;
    if let Some(err) = builder.error {
        return Err(err);
    }
    if builder.documents.len() > 1 {
        return Err(ConfigError::Parse {
            file: file.to_string(),
            line: builder.documents[1].origin.line,
            message: "multiple YAML documents in one file".to_string(),
        });
    }
    Ok(builder.documents.pop())
}

fn json_to_yaml(json: &Json) -> Yaml {
    match json {
        Json::Null => Yaml::Null,
        Json::Bool(b) => Yaml::Boolean(*b),
        Json::Number(n) => match n.as_i64() {
            Some(i) => Yaml::Integer(i),
            None => Yaml::Real(n.to_string()),
        },
        Json::String(s) => Yaml::String(s.clone()),
        Json::Array(items) => Yaml::Array(items.iter().map(json_to_yaml).collect()),
        Json::Object(map) => {
            let mut hash = Hash::new();
            for (k, v) in map {
                hash.insert(Yaml::String(k.clone()), json_to_yaml(v));
            }
            Yaml::Hash(hash)
        }
    }
}

/// Renders JSON-shaped data as block YAML, keeping key order.
pub fn to_yaml_string(json: &Json) -> String {
    let mut out = String::new();
    {
        let mut emitter = YamlEmitter::new(&mut out);
        emitter.multiline_strings(true);
        // Writing into a String cannot fail.
        emitter
            .dump(&json_to_yaml(json))
            .expect("yaml emission into a string");
    }
    let body = out.strip_prefix("---\n").unwrap_or(&out);
    let mut body = body.to_string();
    body.push('\n');
    body
}
