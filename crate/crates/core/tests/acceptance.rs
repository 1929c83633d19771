//! Acceptance criteria 1-10. Prints one PASS/FAIL line per criterion and
//! exits non-zero if any criterion fails.

mod common;

use std::collections::BTreeSet;
use std::fs;
use std::path::Path;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use relforge::config::{cache_key, merge_documents, CacheEntry, CacheStore, ConfigError, ConfigTree};
use relforge::defaults::default_tree;
use relforge::issue::{
    apply_status_transition, compile_forms, process_submission, protocol_template, refresh_form_choices, ProtocolDoc,
    Submission,
};
use relforge::ledger::{append_entry, mark_progress, parse_date, ChangelogEntry, Ledger, LedgerError};
use relforge::license::{parse_license_expr, validate_license_expr, LicenseRegistry};
use relforge::orchestrator::{dispatch, parse_event_log, replay, RepoEvent};
use relforge::pipeline::{prepare_tree, run_pipeline, PipelineContext};
use relforge::vcs::{plan_issue_branches, RepoState, VcsTemplates};
use relforge::version::{bump, compare, parse_version, ChangeType, ReleaseVersion};
use serde_json::json;

const SEED: u64 = 20_250_301;
const AC1_LIMIT: Duration = Duration::from_secs(1);
const AC2_LIMIT: Duration = Duration::from_secs(1);
const AC3_LIMIT: Duration = Duration::from_secs(5);
const AC7_LIMIT: Duration = Duration::from_secs(1);

type Outcome = Result<String, String>;

fn ensure(cond: bool, message: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(message())
    }
}

fn within(limit: Duration, elapsed: Duration) -> Result<(), String> {
    ensure(elapsed < limit, || format!("took {elapsed:?}, limit {limit:?}"))
}

fn control_tree() -> ConfigTree {
    prepare_tree(&default_tree(), &PipelineContext::offline()).expect("default control center prepares")
}

fn replay_two_features() -> Result<relforge::orchestrator::ReplayOutcome, String> {
    let initial = RepoState::from_json_str(&common::fixture("initial_state.json")).map_err(|e| e.to_string())?;
    let events = parse_event_log(&common::fixture("two_features.jsonl")).map_err(|(l, e)| format!("line {l}: {e}"))?;
    replay(&initial, &events, &control_tree()).map_err(|(i, e)| format!("event {i}: {e}"))
}

fn ac1() -> Outcome {
    let start = Instant::now();
    let out = replay_two_features()?;
    let elapsed = start.elapsed();
    ensure(out.tags == common::TWO_FEATURES_TAGS, || {
        format!("tags {:?} != expected {:?}", out.tags, common::TWO_FEATURES_TAGS)
    })?;
    let i2_dev = out.tags.iter().filter(|t| t.starts_with("v1.1.0a2.dev")).count();
    let pos = |t: &str| out.tags.iter().position(|x| x == t);
    ensure(pos("v1.1.0") > pos("v1.1.0a2.dev3"), || "v1.1.0 must follow issue 2's dev releases".into())?;
    ensure(pos("v1.2.0") > pos("v1.1.0rc1.post2"), || "v1.2.0 must follow the last post-release".into())?;
    let main_final = out.state.main().tags.latest_final().map(|r| r.to_string());
    ensure(main_final.as_deref() == Some("1.2.0"), || format!("main ends at {main_final:?}"))?;
    within(AC1_LIMIT, elapsed)?;
    Ok(format!("{} tags, {i2_dev} dev releases of #2 became 1.1.0, #1 rc1.post2 became 1.2.0, {elapsed:?}", out.tags.len()))
}

fn ac2() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let start = Instant::now();
    let mut checked = 0;
    for _ in 0..1_000 {
        let r = [rng.gen_range(0..10_000u64), rng.gen_range(0..10_000), rng.gen_range(0..10_000)];
        for (idx, c) in [ChangeType::Major, ChangeType::Minor, ChangeType::Patch].into_iter().enumerate() {
            let got = bump(ReleaseVersion::new(r[0], r[1], r[2]), c);
            let want = common::bump_oracle(r, idx);
            ensure([got.major, got.minor, got.patch] == want, || format!("bump({r:?}, {c}) = {got}, want {want:?}"))?;
            checked += 1;
        }
    }
    let elapsed = start.elapsed();
    within(AC2_LIMIT, elapsed)?;
    Ok(format!("{checked} bumps match the reference rule, {elapsed:?}"))
}

fn ac3() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED + 3);
    let start = Instant::now();
    for _ in 0..10_000 {
        let text = common::random_parts(&mut rng, true).text();
        let v = parse_version(&text).map_err(|e| format!("{text}: {e}"))?;
        ensure(v.to_string() == text, || format!("format(parse({text})) = {v}"))?;
        let again = parse_version(&v.to_string()).map_err(|e| e.to_string())?;
        ensure(again == v, || format!("parse(format({v:?})) differs"))?;
    }
    for _ in 0..1_000 {
        let parts: Vec<_> = (0..3).map(|_| common::random_parts(&mut rng, false)).collect();
        let vs: Vec<_> = parts.iter().map(|p| parse_version(&p.text()).unwrap()).collect();
        for i in 0..3 {
            for j in 0..3 {
                let ord = compare(&vs[i], &vs[j]);
                ensure(ord == parts[i].key().cmp(&parts[j].key()), || {
                    format!("compare({}, {}) disagrees with the reference order", vs[i], vs[j])
                })?;
                ensure(ord == compare(&vs[j], &vs[i]).reverse(), || format!("antisymmetry fails for {} {}", vs[i], vs[j]))?;
                ensure(ord.is_eq() == (vs[i] == vs[j]), || format!("equality inconsistent for {} {}", vs[i], vs[j]))?;
                for k in 0..3 {
                    if compare(&vs[i], &vs[j]).is_le() && compare(&vs[j], &vs[k]).is_le() {
                        ensure(compare(&vs[i], &vs[k]).is_le(), || {
                            format!("transitivity fails for {} {} {}", vs[i], vs[j], vs[k])
                        })?;
                    }
                }
            }
        }
    }
    let elapsed = start.elapsed();
    within(AC3_LIMIT, elapsed)?;
    Ok(format!("10000 round-trips, 1000 triples ordered consistently, {elapsed:?}"))
}

fn ac4() -> Outcome {
    let mut state = RepoState::single_main("c0", &["1.0.0", "1.2.0", "1.4.0"]);
    state.create_branch("dev/5/main", "main").map_err(|e| e.to_string())?;
    let tree = control_tree();
    let approve = |change: &str| {
        let ev = RepoEvent::from_json(&json!({
            "kind": "pr_approved", "branch": "main",
            "payload": {"source": "dev/5/main", "target": "main", "issue": 5, "title": "t", "change": change}
        }))
        .unwrap();
        dispatch(&ev, &state, &tree).map_err(|e| e.to_string())
    };
    let major = approve("major")?;
    ensure(major.ids() == ["create-branch", "merge"], || format!("major plan {:?}", major.ids()))?;
    let split = &major.tasks[0];
    ensure(split.param_str("branch") == Some("release-1") && split.param_str("source") == Some("main"), || {
        format!("split task {:?}", split.params)
    })?;
    for change in ["minor", "patch"] {
        let plan = approve(change)?;
        ensure(plan.ids() == ["merge"], || format!("{change} plan {:?}", plan.ids()))?;
    }
    Ok("major merge preceded by create-branch release-1 from main; minor and patch unsplit".into())
}

fn snapshot(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out: Vec<(String, Vec<u8>)> = walkdir::WalkDir::new(dir)
        .into_iter()
        .filter_map(Result::ok)
        .filter(|e| e.file_type().is_file())
        .map(|e| {
            let rel = e.path().strip_prefix(dir).unwrap().to_string_lossy().into_owned();
            (rel, fs::read(e.path()).unwrap())
        })
        .collect();
    out.sort();
    out
}

fn ac5() -> Outcome {
    let ctx = PipelineContext::offline();
    let mut reference: Option<Vec<(String, Vec<u8>)>> = None;
    for run in 0..10 {
        let ws = tempfile::tempdir().map_err(|e| e.to_string())?;
        let first = run_pipeline(&default_tree(), Some(ws.path()), &ctx).map_err(|e| e.to_string())?;
        ensure(first.report.is_empty(), || format!("default control center has findings: {:?}", first.report))?;
        let second = run_pipeline(&default_tree(), Some(ws.path()), &ctx)
            .map_err(|e| e.to_string())?
            .sync
            .ok_or("second run did not sync")?;
        ensure(second.created.is_empty() && second.updated.is_empty() && second.deleted.is_empty(), || {
            format!("run {run}: second sync changed files: {second:?}")
        })?;
        let files = snapshot(ws.path());
        match &reference {
            None => reference = Some(files),
            Some(r) => ensure(*r == files, || format!("run {run} output differs from run 0"))?,
        }
    }
    let n = reference.map(|r| r.len()).unwrap_or(0);
    Ok(format!("{n} files, second sync changes nothing, 10 runs byte-identical"))
}

fn ac6() -> Outcome {
    const URI: &str = "https://example.org/org-defaults.yaml";
    let tree = merge_documents([(
        "project.yaml",
        "name: child\ninherit:\n  - source: https://example.org/org-defaults.yaml\n    path: license\n    target: license\n",
    )])
    .map_err(|e| e.to_string())?;
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let cache = CacheStore::new(dir.path());
    cache
        .store(&CacheEntry {
            key: cache_key(URI, "license"),
            fetched_at: 1_000,
            retention: 600,
            payload: "license:\n  expression: MIT\n".into(),
        })
        .map_err(|e| e.to_string())?;
    let mut ctx = PipelineContext::offline();
    ctx.cache = Some(&cache);
    ctx.now = 1_300;
    let fresh = run_pipeline(&tree, None, &ctx).map_err(|e| format!("fresh entry: {e}"))?;
    ensure(fresh.tree.str_at("license.expression") == Some("MIT"), || "fresh entry not applied".into())?;
    ctx.now = 1_601;
    match run_pipeline(&tree, None, &ctx) {
        Err(ConfigError::FetchFailed { uri, .. }) if uri == URI => {}
        Err(other) => return Err(format!("stale entry gave {other}")),
        Ok(_) => return Err("stale entry without a fetcher resolved".into()),
    }
    Ok("fresh entry resolves offline; stale entry fails with FetchFailed".into())
}

fn ac7() -> Outcome {
    let start = Instant::now();
    let cases = common::three_id_expressions();
    ensure(cases.len() == 108, || format!("{} cases", cases.len()))?;
    for text in &cases {
        let parsed = parse_license_expr(text).map_err(|e| format!("{text}: {e}"))?;
        let (got, want) = (common::parenthesize(&parsed), common::shunting_yard(text));
        ensure(got == want, || format!("{text}: parser {got}, oracle {want}"))?;
    }
    let elapsed = start.elapsed();
    let registry = LicenseRegistry::bundled();
    let deprecated = registry
        .licenses()
        .find(|r| r.deprecated)
        .map(|r| r.id.clone())
        .ok_or("bundled snapshot has no deprecated license")?;
    let report = validate_license_expr(&parse_license_expr(&deprecated).unwrap(), &registry);
    ensure(report.warnings().any(|f| f.message.contains("deprecated")), || format!("{deprecated} not flagged"))?;
    within(AC7_LIMIT, elapsed)?;
    Ok(format!("108/108 agree with the reference; {deprecated} flagged deprecated, {elapsed:?}"))
}

fn ac8() -> Outcome {
    let tree = control_tree();
    let state = RepoState::from_json_str(
        r#"{"default_branch": "main", "branches": [
            {"name": "main", "kind": "main", "head": "c3", "tags": ["v1.0.0", "v1.1.0", "v2.0.0"]},
            {"name": "release-1", "kind": "release", "head": "c2", "tags": ["v1.1.1"]}
        ]}"#,
    )
    .map_err(|e| e.to_string())?;
    let (forms, _) = compile_forms(&tree).map_err(|e| e.to_string())?;
    let forms = refresh_form_choices(&forms, &state, &["run".to_string()]);
    let form = forms.iter().find(|f| f.id == "bug-report").ok_or("no bug-report form")?;
    let submission: Submission = serde_json::from_str(&common::fixture("bug_report.json")).map_err(|e| e.to_string())?;
    let (ticket, protocol) = process_submission(form, &submission, &tree).map_err(|e| e.to_string())?;
    let want: BTreeSet<String> = ["type/bug", "version/1.1.0", "api/run"].iter().map(|s| s.to_string()).collect();
    ensure(ticket.labels == want, || format!("labels {:?}", ticket.labels))?;
    let doc = protocol.render(&protocol_template(&tree)).map_err(|e| e.to_string())?;
    for heading in ["(URD)", "(SRD)", "(SDD)"] {
        ensure(doc.contains(heading), || format!("protocol lacks {heading}"))?;
    }
    ProtocolDoc::parse(&doc).map_err(|e| e.to_string())?;

    let mut ticket = ticket;
    ticket.versions = vec!["1.1.0".into(), "2.0.0".into()];
    let (ready, plan) = apply_status_transition(&ticket, "status/ready", &state, &tree).map_err(|e| e.to_string())?;
    let branches = plan_issue_branches(&ready, &state, &VcsTemplates::from_tree(&tree)).map_err(|e| e.to_string())?;
    let names: Vec<&str> = branches.iter().map(|b| b.name.as_str()).collect();
    ensure(names == ["dev/7/release-1", "dev/7/main"], || format!("branch plans {names:?}"))?;
    let created: Vec<&str> = plan
        .tasks
        .iter()
        .filter(|t| t.id.as_str() == "create-branch")
        .filter_map(|t| t.param_str("branch"))
        .collect();
    ensure(created == names, || format!("create-branch tasks {created:?}"))?;
    Ok("labels {type/bug, version/1.1.0, api/run}; URD/SRD/SDD present; 2 release lines, 2 branch plans".into())
}

fn random_entry(rng: &mut ChaCha8Rng, n: usize) -> ChangelogEntry {
    let version = ["1.0.0", "1.1.0", "1.1.0a2.dev1", "1.2.0"][rng.gen_range(0..4)];
    ChangelogEntry {
        id: format!("e{n}"),
        issue: rng.gen_range(1..40),
        pr: rng.gen_range(1..90),
        change: [ChangeType::Major, ChangeType::Minor, ChangeType::Patch][rng.gen_range(0..3)],
        title: format!("entry {n}"),
        description: String::new(),
        contributors: vec![],
        version: parse_version(version).unwrap(),
        commit: format!("{:010x}", rng.gen_range(0..400u64)),
        date: format!(
            "2025-{:02}-{:02}T{:02}:{:02}:00Z",
            rng.gen_range(1..13),
            rng.gen_range(1..29),
            rng.gen_range(0..24),
            rng.gen_range(0..60)
        ),
        doi: None,
    }
}

fn ac9() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED + 9);
    let mut ledger = Ledger::new();
    let mut seen = BTreeSet::new();
    let mut duplicates = 0;
    for n in 0..1_000 {
        let e = random_entry(&mut rng, n);
        let key = (e.version.to_string(), e.commit.clone());
        match append_entry(ledger.clone(), e) {
            Ok(next) => {
                ensure(seen.insert(key.clone()), || format!("duplicate {key:?} accepted"))?;
                ledger = next;
            }
            Err(LedgerError::Duplicate { .. }) => {
                ensure(seen.contains(&key), || format!("{key:?} wrongly rejected"))?;
                duplicates += 1;
            }
            Err(other) => return Err(other.to_string()),
        }
    }
    let dates: Vec<_> = ledger.entries().iter().map(|e| parse_date(&e.date).unwrap()).collect();
    ensure(dates.windows(2).all(|w| w[0] <= w[1]), || "ledger out of chronological order".into())?;

    let tasks: Vec<String> = (1..=6).map(|i| format!("task {i}")).collect();
    for _ in 0..200 {
        let mut doc = ProtocolDoc::new(1, "t", String::new(), &tasks);
        for _ in 0..rng.gen_range(0..15) {
            let message = match rng.gen_range(0..3) {
                0 => format!("Task: {}", rng.gen_range(0..9)),
                1 => format!("Task: x{}", rng.gen_range(0..9)),
                _ => "no trailer".to_string(),
            };
            let before = doc.done_count();
            doc = mark_progress(&doc, &message).0;
            ensure(doc.done_count() >= before, || format!("progress decreased on {message:?}"))?;
        }
    }
    Ok(format!("{} entries ordered, {duplicates} duplicates rejected, progress monotone over 200 sequences", ledger.len()))
}

fn ac10() -> Outcome {
    let tree = control_tree();
    let mut rng = ChaCha8Rng::seed_from_u64(SEED + 10);
    for i in 0..100 {
        let (ev, state) = common::random_event_state(&mut rng);
        let a = dispatch(&ev, &state, &tree).map(|p| p.to_json_string()).map_err(|e| e.to_string());
        let b = dispatch(&ev, &state, &tree).map(|p| p.to_json_string()).map_err(|e| e.to_string());
        ensure(a == b, || format!("pair {i} dispatched differently"))?;
    }
    let first = replay_two_features()?;
    let second = replay_two_features()?;
    ensure(first.state.to_json_string() == second.state.to_json_string(), || "replay final states differ".into())?;
    ensure(first.tags == second.tags, || "replay tag sets differ".into())?;
    Ok("100 random pairs byte-identical; two replays give identical final state".into())
}

fn main() {
    let criteria: [(&str, &str, fn() -> Outcome); 10] = [
        ("AC1", "two-feature replay", ac1),
        ("AC2", "release bump table", ac2),
        ("AC3", "version grammar round-trip and order", ac3),
        ("AC4", "release-branch split", ac4),
        ("AC5", "sync idempotence", ac5),
        ("AC6", "inheritance cache", ac6),
        ("AC7", "license expression oracle", ac7),
        ("AC8", "issue processing", ac8),
        ("AC9", "ledger properties", ac9),
        ("AC10", "dispatch determinism and replay", ac10),
    ];
    let mut failed = 0;
    for (id, name, check) in criteria {
        match std::panic::catch_unwind(check) {
            Ok(Ok(detail)) => println!("{id:<5} PASS  {name}: {detail}"),
            Ok(Err(reason)) => {
                failed += 1;
                println!("{id:<5} FAIL  {name}: {reason}");
            }
            Err(_) => {
                failed += 1;
                println!("{id:<5} FAIL  {name}: panicked");
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
