//! `/verb key=value` commands posted as ticket comments.

use std::collections::BTreeMap;

use serde::Serialize;
use thiserror::Error;

use crate::version::parse_version;

pub const SIGIL: char = '/';

struct VerbSpec {
    verb: &'static str,
    required: &'static [&'static str],
    optional: &'static [&'static str],
}

const REGISTRY: &[VerbSpec] = &[VerbSpec {
    verb: "test",
    required: &["version"],
    optional: &["env", "cases"],
}];

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Command {
    pub verb: String,
    pub args: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("/{verb}: {problem} (expected keys: {})", expected.join(", "))]
pub struct CommandError {
    pub verb: String,
    pub problem: String,
    pub expected: Vec<String>,
}

impl VerbSpec {
    fn expected(&self) -> Vec<String> {
        self.required
            .iter()
            .chain(self.optional)
            .map(|s| s.to_string())
            .collect()
    }

    fn error(&self, problem: String) -> CommandError {
        CommandError {
            verb: self.verb.to_string(),
            problem,
            expected: self.expected(),
        }
    }

    fn parse(&self, args: &str) -> Result<Command, CommandError> {
        let mut map = BTreeMap::new();
        for token in args.split_whitespace() {
            let (key, value) = token
                .split_once('=')
                .ok_or_else(|| self.error(format!("argument {token:?} is not key=value")))?;
            if !self.required.contains(&key) && !self.optional.contains(&key) {
                return Err(self.error(format!("unknown key {key:?}")));
            }
            if value.is_empty() {
                return Err(self.error(format!("empty value for {key}")));
            }
            if map.insert(key.to_string(), value.to_string()).is_some() {
                return Err(self.error(format!("repeated key {key}")));
            }
        }
        for key in self.required {
            if !map.contains_key(*key) {
                return Err(self.error(format!("missing {key}")));
            }
        }
        if let Some(v) = map.get("version") {
            if let Err(e) = parse_version(v) {
                return Err(self.error(format!("version {v:?} is invalid: {e}")));
            }
        }
        Ok(Command {
            verb: self.verb.to_string(),
            args: map,
        })
    }
}

/// Commands found in a comment, one per sigil line. Lines with an
/// unregistered verb are ordinary text.
pub fn parse_command_comment(text: &str) -> Result<Vec<Command>, CommandError> {
    let mut commands = Vec::new();
    for line in text.lines() {
        let Some(rest) = line.trim().strip_prefix(SIGIL) else {
            continue;
        };
        let (verb, args) = rest.split_once(char::is_whitespace).unwrap_or((rest, ""));
        if let Some(spec) = REGISTRY.iter().find(|s| s.verb == verb) {
            commands.push(spec.parse(args)?);
        }
    }
    Ok(commands)
}
