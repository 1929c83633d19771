//! Reference implementations used as test oracles. They deliberately share
//! no code with the library.

#![allow(dead_code)]

use std::path::PathBuf;

use rand::Rng;
use relforge::license::LicenseExpr;

pub fn fixture_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(name)
}

pub fn fixture(name: &str) -> String {
    std::fs::read_to_string(fixture_path(name)).unwrap_or_else(|e| panic!("fixture {name}: {e}"))
}

/// Tags produced by two concurrent minor features starting from 1.0.0: issue
/// 2 ships straight to main, issue 1 goes through alpha, beta and release
/// candidate with post-releases before shipping.
pub const TWO_FEATURES_TAGS: &[&str] = &[
    "v1.1.0a1.dev1",
    "v1.1.0a1.dev2",
    "v1.1.0a2.dev1",
    "v1.1.0a2.dev2",
    "v1.1.0a2.dev3",
    "v1.1.0a1",
    "v1.1.0",
    "v1.1.0a1.post1",
    "v1.1.0b1",
    "v1.1.0b1.post1",
    "v1.1.0rc1",
    "v1.1.0rc1.post1",
    "v1.1.0rc1.post2",
    "v1.2.0",
];

// Version oracle

/// A version described component by component.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct VersionParts {
    pub release: [u64; 3],
    /// Phase rank (0 = a, 1 = b, 2 = rc) and issue number.
    pub pre: Option<(u8, u64)>,
    /// `(true, n)` for `.postN`, `(false, n)` for `.devN`. Needs `pre`.
    pub suffix: Option<(bool, u64)>,
}

impl VersionParts {
    pub fn text(&self) -> String {
        let [x, y, z] = self.release;
        let mut s = format!("{x}.{y}.{z}");
        if let Some((phase, n)) = self.pre {
            s += ["a", "b", "rc"][phase as usize];
            s += &n.to_string();
        }
        match self.suffix {
            Some((true, n)) => s += &format!(".post{n}"),
            Some((false, n)) => s += &format!(".dev{n}"),
            None => {}
        }
        s
    }

    /// Sort key: finals after every prerelease of the same triple; within a
    /// prerelease, dev < bare < post.
    pub fn key(&self) -> (u64, u64, u64, u8, u8, u64, u8, u64) {
        let [x, y, z] = self.release;
        let (is_final, phase, number) = match self.pre {
            None => (1, 0, 0),
            Some((p, n)) => (0, p, n),
        };
        let (kind, n) = match self.suffix {
            Some((false, n)) => (0, n),
            None => (1, 0),
            Some((true, n)) => (2, n),
        };
        (x, y, z, is_final, phase, number, kind, n)
    }
}

/// Small ranges so that random triples collide often.
pub fn random_parts<R: Rng>(rng: &mut R, wide: bool) -> VersionParts {
    let hi = if wide { 100_000 } else { 3 };
    let release = [
        rng.gen_range(0..hi),
        rng.gen_range(0..hi),
        rng.gen_range(0..hi),
    ];
    let pre = rng.gen_bool(0.6).then(|| {
        (
            rng.gen_range(0..3u8),
            rng.gen_range(1..if wide { 10_000 } else { 3 }),
        )
    });
    let suffix = pre.and_then(|_| {
        rng.gen_bool(0.6).then(|| {
            (
                rng.gen_bool(0.5),
                rng.gen_range(1..if wide { 10_000 } else { 3 }),
            )
        })
    });
    VersionParts {
        release,
        pre,
        suffix,
    }
}

/// Increment the component at `index` by one and zero everything after it.
pub fn bump_oracle(release: [u64; 3], index: usize) -> [u64; 3] {
    let mut out = release;
    out[index] += 1;
    for c in out.iter_mut().skip(index + 1) {
        *c = 0;
    }
    out
}

// License-expression oracle

/// Rewrites an expression in fully parenthesized form with a shunting-yard
/// pass: every binary operation and WITH clause gets its own parentheses.
pub fn shunting_yard(text: &str) -> String {
    fn prec(op: &str) -> u8 {
        match op {
            "OR" => 1,
            "AND" => 2,
            "WITH" => 3,
            _ => 0,
        }
    }
    fn reduce(out: &mut Vec<String>, op: &str) {
        let r = out.pop().expect("right operand");
        let l = out.pop().expect("left operand");
        out.push(format!("({l} {op} {r})"));
    }
    let spaced = text.replace('(', " ( ").replace(')', " ) ");
    let mut out: Vec<String> = Vec::new();
    let mut ops: Vec<&str> = Vec::new();
    for tok in spaced.split_whitespace() {
        match tok {
            "(" => ops.push(tok),
            ")" => {
                while let Some(op) = ops.pop() {
                    if op == "(" {
                        break;
                    }
                    reduce(&mut out, op);
                }
            }
            "AND" | "OR" | "WITH" => {
                while let Some(&top) = ops.last() {
                    if top != "(" && prec(top) >= prec(tok) {
                        reduce(&mut out, top);
                        ops.pop();
                    } else {
                        break;
                    }
                }
                ops.push(tok);
            }
            id => out.push(id.to_string()),
        }
    }
    while let Some(op) = ops.pop() {
        reduce(&mut out, op);
    }
    assert_eq!(out.len(), 1, "oracle input {text:?} is malformed");
    out.pop().unwrap()
}

/// The same fully parenthesized form, read off a parsed tree.
pub fn parenthesize(expr: &LicenseExpr) -> String {
    match expr {
        LicenseExpr::Id(id) => id.to_string(),
        LicenseExpr::With { license, exception } => format!("({license} WITH {exception})"),
        LicenseExpr::And(l, r) => format!("({} AND {})", parenthesize(l), parenthesize(r)),
        LicenseExpr::Or(l, r) => format!("({} OR {})", parenthesize(l), parenthesize(r)),
    }
}

pub const ORACLE_IDS: [&str; 3] = ["MIT", "Apache-2.0", "BSD-3-Clause"];
pub const ORACLE_OPS: [&str; 2] = ["AND", "OR"];

/// Every `id op id op id` expression over the three oracle identifiers.
pub fn three_id_expressions() -> Vec<String> {
    let mut out = Vec::new();
    for a in ORACLE_IDS {
        for b in ORACLE_IDS {
            for c in ORACLE_IDS {
                for op1 in ORACLE_OPS {
                    for op2 in ORACLE_OPS {
                        out.push(format!("{a} {op1} {b} {op2} {c}"));
                    }
                }
            }
        }
    }
    out
}

/// Single identifiers and `id op id`.
pub fn smaller_expressions() -> Vec<String> {
    let mut out: Vec<String> = ORACLE_IDS.iter().map(|s| s.to_string()).collect();
    for a in ORACLE_IDS {
        for b in ORACLE_IDS {
            for op in ORACLE_OPS {
                out.push(format!("{a} {op} {b}"));
            }
        }
    }
    out
}

// Random repository events

/// A repository at 1.0.0 or later with a few development branches, and an
/// event drawn from every kind with plausible payloads.
pub fn random_event_state<R: Rng>(rng: &mut R) -> (relforge::orchestrator::RepoEvent, relforge::vcs::RepoState) {
    use relforge::orchestrator::RepoEvent;
    use relforge::vcs::RepoState;
    use serde_json::json;

    let minor = rng.gen_range(0..3);
    let finals: Vec<String> = (0..=minor).map(|m| format!("1.{m}.0")).collect();
    let finals: Vec<&str> = finals.iter().map(String::as_str).collect();
    let mut state = RepoState::single_main("c0", &finals);
    let issues: Vec<u64> = (1..=rng.gen_range(1..4)).collect();
    for &issue in &issues {
        let name = format!("dev/{issue}/main");
        state.create_branch(&name, "main").unwrap();
        for d in 1..=rng.gen_range(0..3) {
            let tag = format!("1.{}.0a{issue}.dev{d}", minor + 1);
            state.add_tag(&name, tag.parse().unwrap()).unwrap();
        }
    }
    let issue = issues[rng.gen_range(0..issues.len())];
    let dev = format!("dev/{issue}/main");
    let change = ["major", "minor", "patch"][rng.gen_range(0..3)];
    let classes = ["source", "config", "docs", "tests"];
    let changes: Vec<&str> = classes.iter().copied().filter(|_| rng.gen_bool(0.5)).collect();
    let ticket = json!({
        "number": issue, "type": "feature", "title": "t", "change": change,
        "status": "triage", "versions": ["1.0.0"]
    });
    let (kind, payload, branch) = match rng.gen_range(0..8) {
        0 => ("issue_opened", json!({"form_id": "bug-report", "number": issue}), None),
        1 => {
            let label = ["status/ready", "status/rejected", "status/review"][rng.gen_range(0..3)];
            ("issue_labeled", json!({"label": label, "ticket": ticket}), None)
        }
        2 => {
            let body = ["/test version=1.0.0", "/test env=ci", "thanks"][rng.gen_range(0..3)];
            ("comment_posted", json!({"issue": issue, "body": body}), None)
        }
        3 => ("commit_pushed", json!({"changes": changes, "change": change}), Some(dev.clone())),
        4 => ("commit_pushed", json!({"changes": changes}), Some("main".to_string())),
        5 => (
            "pr_approved",
            json!({"source": dev, "target": "main", "issue": issue, "title": "t", "change": change}),
            Some("main".to_string()),
        ),
        6 => (
            "merged",
            json!({"source": dev, "target": "main", "issue": issue, "title": "t", "change": change}),
            Some("main".to_string()),
        ),
        _ => ("scheduled", json!({}), None),
    };
    let event = RepoEvent::from_json(&json!({"kind": kind, "payload": payload, "branch": branch})).unwrap();
    (event, state)
}
