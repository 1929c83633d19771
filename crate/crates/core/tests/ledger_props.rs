use proptest::prelude::*;
use relforge::issue::ProtocolDoc;
use relforge::ledger::{
    append_entry, mark_progress, parse_date, render_release_notes, ChangelogEntry, Ledger,
    LedgerError, NotesTemplate, LEDGER_SCHEMA,
};
use relforge::version::{parse_version, ChangeType};

fn entry(n: u64, day: u32, hour: u32, version: &str, commit: &str) -> ChangelogEntry {
    ChangelogEntry {
        id: format!("{version}-{commit}"),
        issue: n,
        pr: n + 100,
        change: [ChangeType::Major, ChangeType::Minor, ChangeType::Patch][(n % 3) as usize],
        title: format!("Change {n}"),
        description: String::new(),
        contributors: vec!["ana".into()],
        version: parse_version(version).unwrap(),
        commit: commit.into(),
        date: format!("2025-01-{day:02}T{hour:02}:00:00Z"),
        doi: None,
    }
}

fn random_entry() -> impl Strategy<Value = ChangelogEntry> {
    (1u64..50, 1u32..29, 0u32..24, 0usize..4, "[0-9a-f]{10}").prop_map(
        |(n, day, hour, v, commit)| {
            let version = ["1.0.0", "1.1.0", "1.1.0a2.dev1", "2.0.0"][v];
            entry(n, day, hour, version, &commit)
        },
    )
}

fn is_chronological(ledger: &Ledger) -> bool {
    ledger
        .entries()
        .windows(2)
        .all(|w| parse_date(&w[0].date).unwrap() <= parse_date(&w[1].date).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn appends_keep_chronological_order(entries in prop::collection::vec(random_entry(), 0..60)) {
        let mut ledger = Ledger::new();
        let mut accepted = 0;
        for e in entries {
            match append_entry(ledger.clone(), e) {
                Ok(next) => {
                    ledger = next;
                    accepted += 1;
                }
                Err(err) => prop_assert!(matches!(err, LedgerError::Duplicate { .. }), "{err}"),
            }
            prop_assert!(is_chronological(&ledger));
        }
        prop_assert_eq!(ledger.len(), accepted);
        let reread = Ledger::from_json_str(&ledger.to_json_string()).unwrap();
        prop_assert_eq!(reread, ledger);
    }

    #[test]
    fn progress_never_decreases(trailers in prop::collection::vec((0usize..8, any::<bool>()), 0..30)) {
        let tasks: Vec<String> = (1..=5).map(|i| format!("task {i}")).collect();
        let mut doc = ProtocolDoc::new(3, "t", String::new(), &tasks);
        for (k, malformed) in trailers {
            let message = if malformed {
                format!("fix\n\nTask: x{k}")
            } else {
                format!("fix\n\nTask: {k}")
            };
            let before = doc.done_count();
            let (next, warnings) = mark_progress(&doc, &message);
            prop_assert!(next.done_count() >= before);
            prop_assert_eq!(warnings.is_empty(), !malformed && (1..=5).contains(&k));
            doc = next;
        }
    }
}

#[test]
fn duplicate_version_and_commit_rejected() {
    let ledger = append_entry(Ledger::new(), entry(1, 1, 0, "1.1.0", "abc1234")).unwrap();
    let mut dup = entry(2, 5, 0, "1.1.0", "abc1234");
    dup.id = "other".into();
    assert_eq!(
        append_entry(ledger.clone(), dup),
        Err(LedgerError::Duplicate {
            version: parse_version("1.1.0").unwrap(),
            commit: "abc1234".into()
        })
    );
    assert!(append_entry(ledger, entry(2, 5, 0, "1.2.0", "abc1234")).is_ok());
}

#[test]
fn ledger_document_matches_schema() {
    let schema: serde_json::Value = serde_json::from_str(LEDGER_SCHEMA).unwrap();
    let validator = jsonschema::validator_for(&schema).unwrap();
    let mut ledger = Ledger::new();
    for (i, v) in ["1.0.0", "1.1.0a2.dev1", "1.1.0rc1.post2", "1.2.0"]
        .iter()
        .enumerate()
    {
        ledger = append_entry(
            ledger,
            entry(i as u64, 3, i as u32, v, &format!("c{i}ffee00")),
        )
        .unwrap();
    }
    let doc: serde_json::Value = serde_json::from_str(&ledger.to_json_string()).unwrap();
    assert!(validator.is_valid(&doc));
    let mut broken = doc.clone();
    broken["entries"][0]["type"] = "huge".into();
    assert!(!validator.is_valid(&broken));
}

#[test]
fn notes_group_by_change_type() {
    let entries = vec![
        entry(1, 1, 0, "1.2.0", "aaaaaaa1"),
        entry(2, 2, 0, "1.2.0", "bbbbbbb2"),
    ];
    let notes = render_release_notes(&entries, &NotesTemplate::default()).unwrap();
    assert!(
        notes.starts_with("## 1.2.0 (2025-01-02T00:00:00Z)\n"),
        "{notes}"
    );
    let features = notes.find("### Features").unwrap();
    let fixes = notes.find("### Fixes").unwrap();
    assert!(features < fixes);
    assert!(notes.contains("- Change 1 (#1, PR #101, commit aaaaaaa)"));
    assert_eq!(
        render_release_notes(&[], &NotesTemplate::default()),
        Err(LedgerError::EmptySlice)
    );
}
