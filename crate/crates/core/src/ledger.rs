//! Machine-readable changelog, release notes and task progress.

use std::collections::BTreeSet;

use chrono::{DateTime, NaiveDate, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::{ConfigNode, ConfigTree};
use crate::issue::{ProtocolDoc, Ticket};
use crate::markers;
use crate::version::{ChangeType, PublicVersion};

pub const LEDGER_FILE: &str = "changelog.json";

/// JSON Schema of the serialized ledger.
pub const LEDGER_SCHEMA: &str = include_str!("../assets/changelog.schema.json");

#[derive(Debug, Error, PartialEq)]
pub enum LedgerError {
    #[error("entry has no version")]
    MissingVersion,
    #[error("entry has no commit id")]
    MissingCommit,
    #[error("unparseable date {0:?}")]
    BadDate(String),
    #[error("ledger already has an entry for version {version} at commit {commit}")]
    Duplicate {
        version: PublicVersion,
        commit: String,
    },
    #[error("no entries to render")]
    EmptySlice,
    #[error("template references unknown field {0:?}")]
    UnknownMarker(String),
    #[error("invalid ledger document: {0}")]
    Malformed(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChangelogEntry {
    pub id: String,
    pub issue: u64,
    pub pr: u64,
    #[serde(rename = "type")]
    pub change: ChangeType,
    pub title: String,
    pub description: String,
    pub contributors: Vec<String>,
    pub version: PublicVersion,
    pub commit: String,
    pub date: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub doi: Option<String>,
}

/// Accepts RFC 3339 timestamps and plain dates (midnight UTC).
pub fn parse_date(text: &str) -> Result<DateTime<Utc>, LedgerError> {
    if let Ok(dt) = DateTime::parse_from_rfc3339(text) {
        return Ok(dt.with_timezone(&Utc));
    }
    NaiveDate::parse_from_str(text, "%Y-%m-%d")
        .ok()
        .and_then(|d| d.and_hms_opt(0, 0, 0))
        .map(|dt| dt.and_utc())
        .ok_or_else(|| LedgerError::BadDate(text.to_string()))
}

impl ChangelogEntry {
    fn sort_key(&self) -> Result<(DateTime<Utc>, &str), LedgerError> {
        Ok((parse_date(&self.date)?, self.id.as_str()))
    }

    fn check(&self) -> Result<(), LedgerError> {
        if self.commit.trim().is_empty() {
            return Err(LedgerError::MissingCommit);
        }
        parse_date(&self.date).map(|_| ())
    }

    fn short_commit(&self) -> &str {
        &self.commit[..self.commit.len().min(7)]
    }

    fn field(&self, name: &str) -> Option<String> {
        Some(match name {
            "id" => self.id.clone(),
            "issue" => self.issue.to_string(),
            "pr" => self.pr.to_string(),
            "type" => self.change.to_string(),
            "title" => self.title.clone(),
            "description" => self.description.clone(),
            "contributors" => self.contributors.join(", "),
            "version" => self.version.to_string(),
            "commit" => self.commit.clone(),
            "short_commit" => self.short_commit().to_string(),
            "date" => self.date.clone(),
            "doi" => self.doi.clone().unwrap_or_default(),
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct PullRequestMeta {
    pub number: u64,
    #[serde(default)]
    pub description: String,
    #[serde(default)]
    pub participants: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EntryIds {
    pub commit: String,
    pub date: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub doi: Option<String>,
}

/// Builds an entry from the ticket, its pull request and the squashed commits'
/// authors.
pub fn derive_entry(
    ticket: &Ticket,
    pr: &PullRequestMeta,
    commit_authors: &[String],
    version: Option<PublicVersion>,
    ids: &EntryIds,
) -> Result<ChangelogEntry, LedgerError> {
    let version = version.ok_or(LedgerError::MissingVersion)?;
    let contributors: BTreeSet<String> = commit_authors
        .iter()
        .chain(&pr.participants)
        .map(|s| s.trim().to_string())
        .filter(|s| !s.is_empty())
        .collect();
    let entry = ChangelogEntry {
        id: format!("{}-{}", version, &ids.commit[..ids.commit.len().min(7)]),
        issue: ticket.number,
        pr: pr.number,
        change: ticket.change,
        title: ticket.title.clone(),
        description: pr.description.clone(),
        contributors: contributors.into_iter().collect(),
        version,
        commit: ids.commit.clone(),
        date: ids.date.clone(),
        doi: ids.doi.clone(),
    };
    entry.check()?;
    Ok(entry)
}

/// Entries in chronological order; ties broken by entry id.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize)]
pub struct Ledger {
    entries: Vec<ChangelogEntry>,
}

impl Ledger {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn entries(&self) -> &[ChangelogEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Entries released as `version`.
    pub fn for_version(&self, version: &PublicVersion) -> Vec<ChangelogEntry> {
        self.entries
            .iter()
            .filter(|e| e.version == *version)
            .cloned()
            .collect()
    }

    pub fn from_json_str(text: &str) -> Result<Self, LedgerError> {
        #[derive(Deserialize)]
        struct Raw {
            entries: Vec<ChangelogEntry>,
        }
        let raw: Raw =
            serde_json::from_str(text).map_err(|e| LedgerError::Malformed(e.to_string()))?;
        raw.entries
            .into_iter()
            .try_fold(Ledger::new(), append_entry)
    }

    pub fn to_json_string(&self) -> String {
        let mut text = serde_json::to_string_pretty(self).expect("ledger serializes");
        text.push('\n');
        text
    }
}

pub fn append_entry(mut ledger: Ledger, entry: ChangelogEntry) -> Result<Ledger, LedgerError> {
    entry.check()?;
    if ledger
        .entries
        .iter()
        .any(|e| e.version == entry.version && e.commit == entry.commit)
    {
        return Err(LedgerError::Duplicate {
            version: entry.version,
            commit: entry.commit,
        });
    }
    let key = entry.sort_key()?;
    // existing entries passed `check`, so their keys parse
    let at = ledger
        .entries
        .partition_point(|e| e.sort_key().map(|k| k <= key).unwrap_or(true));
    ledger.entries.insert(at, entry);
    Ok(ledger)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NotesTemplate {
    /// Markers: `version`, `date`, `sections`, `count`.
    pub document: String,
    /// Markers: `heading`, `type`, `entries`.
    pub section: String,
    /// Markers: any entry field, plus `short_commit`.
    pub entry: String,
    pub headings: [(ChangeType, String); 3],
}

const DOCUMENT_MARKERS: &[&str] = &["version", "date", "sections", "count"];
const SECTION_MARKERS: &[&str] = &["heading", "type", "entries"];
const ENTRY_MARKERS: &[&str] = &[
    "id",
    "issue",
    "pr",
    "type",
    "title",
    "description",
    "contributors",
    "version",
    "commit",
    "short_commit",
    "date",
    "doi",
];

impl Default for NotesTemplate {
    fn default() -> Self {
        Self {
            document: "## {{ version }} ({{ date }})\n\n{{ sections }}".to_string(),
            section: "### {{ heading }}\n\n{{ entries }}".to_string(),
            entry: "- {{ title }} (#{{ issue }}, PR #{{ pr }}, commit {{ short_commit }})"
                .to_string(),
            headings: [
                (ChangeType::Major, "Breaking changes".to_string()),
                (ChangeType::Minor, "Features".to_string()),
                (ChangeType::Patch, "Fixes".to_string()),
            ],
        }
    }
}

impl NotesTemplate {
    /// Defaults overridden by `changelog.notes.*` and `changelog.headings.*`.
    pub fn from_tree(tree: &ConfigTree) -> Self {
        let mut t = Self::default();
        let pick = |path: &str, into: &mut String| {
            if let Some(s) = tree.get(path).and_then(ConfigNode::as_str) {
                *into = s.to_string();
            }
        };
        pick("changelog.notes.document", &mut t.document);
        pick("changelog.notes.section", &mut t.section);
        pick("changelog.notes.entry", &mut t.entry);
        for (change, heading) in t.headings.iter_mut() {
            pick(&format!("changelog.headings.{change}"), heading);
        }
        t
    }

    fn check(&self) -> Result<(), LedgerError> {
        for (template, known) in [
            (&self.document, DOCUMENT_MARKERS),
            (&self.section, SECTION_MARKERS),
            (&self.entry, ENTRY_MARKERS),
        ] {
            if let Some(bad) = markers::marker_names(template)
                .into_iter()
                .find(|m| !known.contains(&m.as_str()))
            {
                return Err(LedgerError::UnknownMarker(bad));
            }
        }
        Ok(())
    }
}

fn render(template: &str, lookup: impl Fn(&str) -> Option<String>) -> Result<String, LedgerError> {
    markers::render(template, lookup).map_err(LedgerError::UnknownMarker)
}

/// Markdown notes for a set of entries, grouped by change type.
pub fn render_release_notes(
    entries: &[ChangelogEntry],
    template: &NotesTemplate,
) -> Result<String, LedgerError> {
    template.check()?;
    let latest = entries
        .iter()
        .max_by(|a, b| a.version.cmp(&b.version).then_with(|| a.date.cmp(&b.date)))
        .ok_or(LedgerError::EmptySlice)?;
    let mut sections = Vec::new();
    for (change, heading) in &template.headings {
        let group: Vec<&ChangelogEntry> = entries.iter().filter(|e| e.change == *change).collect();
        if group.is_empty() {
            continue;
        }
        let lines = group
            .iter()
            .map(|e| render(&template.entry, |m| e.field(m)))
            .collect::<Result<Vec<_>, _>>()?;
        let joined = lines.join("\n");
        sections.push(render(&template.section, |m| match m {
            "heading" => Some(heading.clone()),
            "type" => Some(change.to_string()),
            "entries" => Some(joined.clone()),
            _ => None,
        })?);
    }
    let sections = sections.join("\n\n");
    let mut notes = render(&template.document, |m| match m {
        "version" => Some(latest.version.to_string()),
        "date" => Some(latest.date.clone()),
        "sections" => Some(sections.clone()),
        "count" => Some(entries.len().to_string()),
        _ => None,
    })?;
    if !notes.ends_with('\n') {
        notes.push('\n');
    }
    Ok(notes)
}

/// Applies `Task: <k>` trailers from a commit message. Indices are 1-based;
/// out-of-range references produce warnings and change nothing.
pub fn mark_progress(protocol: &ProtocolDoc, message: &str) -> (ProtocolDoc, Vec<String>) {
    let mut updated = protocol.clone();
    let mut warnings = Vec::new();
    for line in message.lines() {
        let Some(rest) = line.trim().strip_prefix("Task:") else {
            continue;
        };
        match rest.trim().parse::<usize>() {
            Ok(k) if updated.complete_task(k) => {}
            Ok(k) => warnings.push(format!(
                "task {k} does not exist; the protocol has {} tasks",
                updated.tasks.len()
            )),
            Err(_) => warnings.push(format!("ignoring malformed trailer {:?}", line.trim())),
        }
    }
    (updated, warnings)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::version::parse_version;

    fn entry(
        id: &str,
        change: ChangeType,
        version: &str,
        commit: &str,
        date: &str,
    ) -> ChangelogEntry {
        ChangelogEntry {
            id: id.into(),
            issue: 2,
            pr: 10,
            change,
            title: format!("Change {id}"),
            description: String::new(),
            contributors: vec![],
            version: parse_version(version).unwrap(),
            commit: commit.into(),
            date: date.into(),
            doi: None,
        }
    }

    #[test]
    fn derive_maps_fields() {
        let mut ticket = Ticket::new(2, "feature", "Faster solver", ChangeType::Minor);
        ticket.status = crate::issue::Status::Done;
        let pr = PullRequestMeta {
            number: 10,
            description: "Speeds up".into(),
            participants: vec!["bo".into()],
        };
        let ids = EntryIds {
            commit: "abcdef123".into(),
            date: "2025-03-01".into(),
            doi: None,
        };
        let e = derive_entry(
            &ticket,
            &pr,
            &["ana".into(), "ana".into()],
            parse_version("1.1.0").ok(),
            &ids,
        )
        .unwrap();
        assert_eq!(
            (e.issue, e.pr, e.version.to_string()),
            (2, 10, "1.1.0".to_string())
        );
        assert_eq!(e.contributors, ["ana", "bo"]);
        assert!(e.doi.is_none());
        assert!(!serde_json::to_string(&e).unwrap().contains("doi"));

        assert_eq!(
            derive_entry(&ticket, &pr, &[], None, &ids),
            Err(LedgerError::MissingVersion)
        );
        let no_commit = EntryIds {
            commit: String::new(),
            ..ids
        };
        assert_eq!(
            derive_entry(&ticket, &pr, &[], parse_version("1.1.0").ok(), &no_commit),
            Err(LedgerError::MissingCommit)
        );
    }

    #[test]
    fn append_keeps_order_and_rejects_duplicates() {
        let l = append_entry(
            Ledger::new(),
            entry("b", ChangeType::Minor, "1.1.0", "c2", "2025-02-01"),
        )
        .unwrap();
        assert_eq!(l.len(), 1);
        let l = append_entry(
            l,
            entry(
                "a",
                ChangeType::Patch,
                "1.0.1",
                "c1",
                "2025-01-01T12:00:00Z",
            ),
        )
        .unwrap();
        let ids: Vec<&str> = l.entries().iter().map(|e| e.id.as_str()).collect();
        assert_eq!(ids, ["a", "b"]);
        let dup = entry("z", ChangeType::Minor, "1.1.0", "c2", "2026-01-01");
        assert!(matches!(
            append_entry(l.clone(), dup),
            Err(LedgerError::Duplicate { .. })
        ));
        assert!(matches!(
            append_entry(l, entry("q", ChangeType::Minor, "1.2.0", "c3", "yesterday")),
            Err(LedgerError::BadDate(_))
        ));
    }

    #[test]
    fn json_round_trip() {
        let l = append_entry(
            Ledger::new(),
            entry("b", ChangeType::Minor, "1.1.0", "c2", "2025-02-01"),
        )
        .unwrap();
        let text = l.to_json_string();
        assert_eq!(Ledger::from_json_str(&text).unwrap(), l);
    }

    #[test]
    fn notes_grouped_major_minor_patch() {
        let entries = [
            entry("p", ChangeType::Patch, "2.0.0", "c1", "2025-01-01"),
            entry("n", ChangeType::Minor, "2.0.0", "c2", "2025-01-02"),
            entry("m", ChangeType::Major, "2.0.0", "c3", "2025-01-03"),
        ];
        let notes = render_release_notes(&entries, &NotesTemplate::default()).unwrap();
        let pos = |s: &str| notes.find(s).unwrap();
        assert!(pos("Breaking changes") < pos("Features"));
        assert!(pos("Features") < pos("Fixes"));
        assert!(notes.starts_with("## 2.0.0 (2025-01-03)"));
    }

    #[test]
    fn unknown_marker_fails_even_without_matching_entries() {
        let template = NotesTemplate {
            entry: "- {{ nope }}".into(),
            ..NotesTemplate::default()
        };
        let entries = [entry("a", ChangeType::Minor, "1.1.0", "c", "2025-01-01")];
        assert_eq!(
            render_release_notes(&entries, &template),
            Err(LedgerError::UnknownMarker("nope".into()))
        );
        assert_eq!(
            render_release_notes(&[], &NotesTemplate::default()),
            Err(LedgerError::EmptySlice)
        );
    }

    #[test]
    fn progress_trailers() {
        let doc = ProtocolDoc::new(
            1,
            "t",
            String::new(),
            &["t1".into(), "t2".into(), "t3".into()],
        );
        let (marked, warnings) = mark_progress(&doc, "fix: x\n\nTask: 2\n");
        assert!(warnings.is_empty());
        assert_eq!(
            marked.tasks.iter().map(|t| t.done).collect::<Vec<_>>(),
            [false, true, false]
        );
        assert_eq!(mark_progress(&doc, "no trailer").0, doc);
        let (same, warnings) = mark_progress(&doc, "Task: 9");
        assert_eq!(same, doc);
        assert_eq!(warnings.len(), 1);
    }
}
