//! Public version identifiers: parsing, ordering and the release lifecycle.
//!
//! The accepted grammar is a strict subset of the Python version-specifier
//! format:
//!
//! ```text
//! version = release [pre] ["." post] ["." dev]
//! release = int "." int "." int
//! pre     = ("a" | "b" | "rc") int
//! post    = "post" int
//! dev     = "dev" int
//! int     = "0" | nonzero-digit *digit
//! ```
//!
//! Prerelease numbers carry the issue ticket that produced them, so two
//! features developed at the same time get distinct identifiers
//! (`1.1.0a1.dev3` and `1.1.0a2.dev3`).

use std::cmp::Ordering;
use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum VersionError {
    #[error("invalid version {text:?} at offset {offset}: {reason}")]
    Parse {
        text: String,
        offset: usize,
        reason: String,
    },
    #[error("target history contains no final release")]
    NoFinalRelease,
    #[error("no tagged history for issue #{0}")]
    NoIssueHistory(u64),
    #[error("phase regression for issue #{issue}: {current} -> {requested}")]
    PhaseRegression {
        issue: u64,
        current: Phase,
        requested: Phase,
    },
    #[error("{0} already has a published prerelease; iterate with post-releases instead")]
    PrereleasePublished(PublicVersion),
    #[error("{0} is not a prerelease")]
    NotPrerelease(PublicVersion),
    #[error("issue number must be positive")]
    ZeroIssue,
    #[error("unknown change type {0:?}")]
    UnknownChangeType(String),
    #[error("unknown phase {0:?}")]
    UnknownPhase(String),
}

/// The `X.Y.Z` triple.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct ReleaseVersion {
    pub major: u64,
    pub minor: u64,
    pub patch: u64,
}

impl ReleaseVersion {
    pub const fn new(major: u64, minor: u64, patch: u64) -> Self {
        Self {
            major,
            minor,
            patch,
        }
    }
}

impl fmt::Display for ReleaseVersion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{}.{}", self.major, self.minor, self.patch)
    }
}

/// Prerelease phase. Declaration order is the phase order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Phase {
    Alpha,
    Beta,
    ReleaseCandidate,
}

impl Phase {
    pub const ALL: [Phase; 3] = [Phase::Alpha, Phase::Beta, Phase::ReleaseCandidate];

    pub fn as_str(self) -> &'static str {
        match self {
            Phase::Alpha => "a",
            Phase::Beta => "b",
            Phase::ReleaseCandidate => "rc",
        }
    }
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Phase {
    type Err = VersionError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "a" | "alpha" => Ok(Phase::Alpha),
            "b" | "beta" => Ok(Phase::Beta),
            "rc" => Ok(Phase::ReleaseCandidate),
            other => Err(VersionError::UnknownPhase(other.to_string())),
        }
    }
}

impl Serialize for Phase {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.as_str())
    }
}

impl<'de> Deserialize<'de> for Phase {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Phase letter plus the correlated issue number.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PrereleaseSegment {
    pub phase: Phase,
    pub number: u64,
}

/// Trailing segment that follows a prerelease.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Suffix {
    Dev(u64),
    Post(u64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct PublicVersion {
    pub release: ReleaseVersion,
    pub pre: Option<PrereleaseSegment>,
    /// Only present together with `pre`.
    pub suffix: Option<Suffix>,
}

impl PublicVersion {
    pub const fn final_release(release: ReleaseVersion) -> Self {
        Self {
            release,
            pre: None,
            suffix: None,
        }
    }

    pub const fn prerelease(release: ReleaseVersion, phase: Phase, number: u64) -> Self {
        Self {
            release,
            pre: Some(PrereleaseSegment { phase, number }),
            suffix: None,
        }
    }

    pub const fn with_suffix(self, suffix: Suffix) -> Self {
        Self {
            suffix: Some(suffix),
            ..self
        }
    }

    pub fn is_final(&self) -> bool {
        self.pre.is_none()
    }

    pub fn dev(&self) -> Option<u64> {
        match self.suffix {
            Some(Suffix::Dev(n)) => Some(n),
            _ => None,
        }
    }

    pub fn post(&self) -> Option<u64> {
        match self.suffix {
            Some(Suffix::Post(n)) => Some(n),
            _ => None,
        }
    }

    /// Checks the structural invariants the grammar cannot express by itself.
    pub fn is_valid(&self) -> bool {
        match (self.pre, self.suffix) {
            (None, Some(_)) => false,
            (Some(p), _) if p.number == 0 => false,
            (_, Some(Suffix::Dev(0) | Suffix::Post(0))) => false,
            _ => true,
        }
    }

    fn order_key(&self) -> (ReleaseVersion, u8, Option<PrereleaseSegment>, u8, u64) {
        let (has_final, pre) = match self.pre {
            None => (1, None),
            Some(p) => (0, Some(p)),
        };
        let (kind, n) = match self.suffix {
            Some(Suffix::Dev(n)) => (0, n),
            None => (1, 0),
            Some(Suffix::Post(n)) => (2, n),
        };
        (self.release, has_final, pre, kind, n)
    }
}

impl Ord for PublicVersion {
    fn cmp(&self, other: &Self) -> Ordering {
        self.order_key().cmp(&other.order_key())
    }
}

impl PartialOrd for PublicVersion {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for PublicVersion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.release)?;
        if let Some(pre) = self.pre {
            write!(f, "{}{}", pre.phase, pre.number)?;
        }
        match self.suffix {
            Some(Suffix::Post(n)) => write!(f, ".post{n}"),
            Some(Suffix::Dev(n)) => write!(f, ".dev{n}"),
            None => Ok(()),
        }
    }
}

impl FromStr for PublicVersion {
    type Err = VersionError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_version(s)
    }
}

impl Serialize for PublicVersion {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for PublicVersion {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        parse_version(&s).map_err(serde::de::Error::custom)
    }
}

/// Compares two versions under the engine's total order.
pub fn compare(a: &PublicVersion, b: &PublicVersion) -> Ordering {
    a.cmp(b)
}

struct Cursor<'a> {
    text: &'a str,
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn error(&self, reason: impl Into<String>) -> VersionError {
        VersionError::Parse {
            text: self.text.to_string(),
            offset: self.pos,
            reason: reason.into(),
        }
    }

    fn rest(&self) -> &'a str {
        &self.text[self.pos..]
    }

    fn eat(&mut self, lit: &str) -> bool {
        if self.rest().starts_with(lit) {
            self.pos += lit.len();
            true
        } else {
            false
        }
    }

    fn expect(&mut self, lit: &str) -> Result<(), VersionError> {
        if self.eat(lit) {
            Ok(())
        } else {
            Err(self.error(format!("expected {lit:?}")))
        }
    }

    fn int(&mut self) -> Result<u64, VersionError> {
        let digits = self
            .rest()
            .bytes()
            .take_while(|b| b.is_ascii_digit())
            .count();
        if digits == 0 {
            return Err(self.error("expected digit"));
        }
        let lexeme = &self.rest()[..digits];
        if digits > 1 && lexeme.starts_with('0') {
            return Err(self.error("leading zero"));
        }
        let value = lexeme
            .parse::<u64>()
            .map_err(|_| self.error("number out of range"))?;
        self.pos += digits;
        Ok(value)
    }

    fn positive(&mut self) -> Result<u64, VersionError> {
        let start = self.pos;
        let n = self.int()?;
        if n == 0 {
            self.pos = start;
            return Err(self.error("segment number must be positive"));
        }
        Ok(n)
    }
}

/// Parses canonical version text; errors report the byte offset where the
/// grammar stopped matching.
pub fn parse_version(text: &str) -> Result<PublicVersion, VersionError> {
    let mut cur = Cursor { text, pos: 0 };
    let major = cur.int()?;
    cur.expect(".")?;
    let minor = cur.int()?;
    cur.expect(".")?;
    let patch = cur.int()?;
    let release = ReleaseVersion::new(major, minor, patch);

    let phase = if cur.eat("rc") {
        Some(Phase::ReleaseCandidate)
    } else if cur.eat("a") {
        Some(Phase::Alpha)
    } else if cur.eat("b") {
        Some(Phase::Beta)
    } else {
        None
    };
    let pre = match phase {
        Some(phase) => Some(PrereleaseSegment {
            phase,
            number: cur.positive()?,
        }),
        None => None,
    };

    let mut suffix = None;
    if pre.is_some() {
        if cur.eat(".post") {
            suffix = Some(Suffix::Post(cur.positive()?));
        } else if cur.eat(".dev") {
            suffix = Some(Suffix::Dev(cur.positive()?));
        }
    }
    if !cur.rest().is_empty() {
        let reason = if pre.is_none()
            && (cur.rest().starts_with(".post") || cur.rest().starts_with(".dev"))
        {
            "post and dev segments require a prerelease"
        } else {
            "unexpected trailing text"
        };
        return Err(cur.error(reason));
    }
    Ok(PublicVersion {
        release,
        pre,
        suffix,
    })
}

pub fn format_version(v: &PublicVersion) -> String {
    v.to_string()
}

/// Backward-compatibility level of a change.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ChangeType {
    Major,
    Minor,
    Patch,
}

impl ChangeType {
    pub const ALL: [ChangeType; 3] = [ChangeType::Major, ChangeType::Minor, ChangeType::Patch];

    pub fn as_str(self) -> &'static str {
        match self {
            ChangeType::Major => "major",
            ChangeType::Minor => "minor",
            ChangeType::Patch => "patch",
        }
    }
}

impl fmt::Display for ChangeType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ChangeType {
    type Err = VersionError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "major" => Ok(ChangeType::Major),
            "minor" => Ok(ChangeType::Minor),
            "patch" => Ok(ChangeType::Patch),
            other => Err(VersionError::UnknownChangeType(other.to_string())),
        }
    }
}

/// Increments one component and zeroes everything to its right.
pub fn bump(r: ReleaseVersion, c: ChangeType) -> ReleaseVersion {
    match c {
        ChangeType::Major => ReleaseVersion::new(r.major + 1, 0, 0),
        ChangeType::Minor => ReleaseVersion::new(r.major, r.minor + 1, 0),
        ChangeType::Patch => ReleaseVersion::new(r.major, r.minor, r.patch + 1),
    }
}

/// Ordered, duplicate-free set of versions tagged along one branch lineage.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TagHistory {
    versions: BTreeSet<PublicVersion>,
}

impl TagHistory {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, v: PublicVersion) -> bool {
        self.versions.insert(v)
    }

    pub fn contains(&self, v: &PublicVersion) -> bool {
        self.versions.contains(v)
    }

    pub fn iter(&self) -> impl DoubleEndedIterator<Item = &PublicVersion> {
        self.versions.iter()
    }

    pub fn len(&self) -> usize {
        self.versions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.versions.is_empty()
    }

    pub fn latest(&self) -> Option<&PublicVersion> {
        self.versions.iter().next_back()
    }

    pub fn latest_final(&self) -> Option<ReleaseVersion> {
        self.versions
            .iter()
            .rev()
            .find(|v| v.is_final())
            .map(|v| v.release)
    }

    pub fn finals(&self) -> impl DoubleEndedIterator<Item = ReleaseVersion> + '_ {
        self.versions
            .iter()
            .filter(|v| v.is_final())
            .map(|v| v.release)
    }

    /// Tags whose prerelease segment carries `issue`.
    pub fn for_issue(&self, issue: u64) -> impl Iterator<Item = &PublicVersion> + '_ {
        self.versions
            .iter()
            .filter(move |v| v.pre.is_some_and(|p| p.number == issue))
    }

    pub fn union(&self, other: &TagHistory) -> TagHistory {
        TagHistory {
            versions: self.versions.union(&other.versions).copied().collect(),
        }
    }
}

impl FromIterator<PublicVersion> for TagHistory {
    fn from_iter<I: IntoIterator<Item = PublicVersion>>(iter: I) -> Self {
        Self {
            versions: iter.into_iter().collect(),
        }
    }
}

impl<'a> IntoIterator for &'a TagHistory {
    type Item = &'a PublicVersion;
    type IntoIter = std::collections::btree_set::Iter<'a, PublicVersion>;

    fn into_iter(self) -> Self::IntoIter {
        self.versions.iter()
    }
}

/// Computes the next developmental release for an issue branch.
///
/// The base is the bump of the latest final in the target lineage. The
/// phase continues whatever the issue has already reached on this base, and
/// the dev counter starts at 1.
pub fn next_dev_version(
    dev_history: &TagHistory,
    target_history: &TagHistory,
    change: ChangeType,
    issue: u64,
) -> Result<PublicVersion, VersionError> {
    if issue == 0 {
        return Err(VersionError::ZeroIssue);
    }
    let latest = target_history
        .latest_final()
        .ok_or(VersionError::NoFinalRelease)?;
    let base = bump(latest, change);
    let lineage: Vec<&PublicVersion> = dev_history
        .for_issue(issue)
        .filter(|v| v.release == base)
        .collect();
    let phase = lineage
        .iter()
        .filter_map(|v| v.pre.map(|p| p.phase))
        .max()
        .unwrap_or(Phase::Alpha);
    let pre_version = PublicVersion::prerelease(base, phase, issue);
    if let Some(published) = lineage
        .iter()
        .find(|v| v.pre == pre_version.pre && v.dev().is_none())
    {
        return Err(VersionError::PrereleasePublished(**published));
    }
    let last_dev = lineage
        .iter()
        .filter(|v| v.pre == pre_version.pre)
        .filter_map(|v| v.dev())
        .max()
        .unwrap_or(0);
    Ok(pre_version.with_suffix(Suffix::Dev(last_dev + 1)))
}

/// Computes the next published prerelease for an issue.
///
/// Advancing the phase emits the bare phase version; repeating the current
/// phase emits the next post-release.
pub fn next_prerelease_version(
    history: &TagHistory,
    issue: u64,
    requested: Phase,
) -> Result<PublicVersion, VersionError> {
    if issue == 0 {
        return Err(VersionError::ZeroIssue);
    }
    let base = history
        .for_issue(issue)
        .map(|v| v.release)
        .max()
        .ok_or(VersionError::NoIssueHistory(issue))?;
    let published: Vec<&PublicVersion> = history
        .for_issue(issue)
        .filter(|v| v.release == base && v.dev().is_none())
        .collect();
    let current = published
        .iter()
        .filter_map(|v| v.pre.map(|p| p.phase))
        .max();
    match current {
        Some(current) if requested < current => Err(VersionError::PhaseRegression {
            issue,
            current,
            requested,
        }),
        Some(current) if requested == current => {
            let last_post = published
                .iter()
                .filter(|v| v.pre.is_some_and(|p| p.phase == current))
                .map(|v| v.post().unwrap_or(0))
                .max()
                .unwrap_or(0);
            Ok(PublicVersion::prerelease(base, current, issue)
                .with_suffix(Suffix::Post(last_post + 1)))
        }
        _ => Ok(PublicVersion::prerelease(base, requested, issue)),
    }
}

/// Redetermines the final release for a candidate at merge time.
pub fn finalize_version(
    candidate: &PublicVersion,
    target_history: &TagHistory,
    change: ChangeType,
) -> Result<ReleaseVersion, VersionError> {
    if candidate.pre.is_none() {
        return Err(VersionError::NotPrerelease(*candidate));
    }
    let latest = target_history
        .latest_final()
        .ok_or(VersionError::NoFinalRelease)?;
    Ok(bump(latest, change))
}
