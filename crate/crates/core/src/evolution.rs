//! Security-fix commit classification and smell persistence across the
//! snapshot history of one file.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::advisory::AdvisoryDb;
use crate::frontends::{detect_tool, parse, Diagnostic, ToolKind};
use crate::predicates::{Lexicons, PredicateContext};
use crate::rules::{evaluate_with, RuleId, RuleSet};

#[derive(Debug, Error)]
pub enum EvolutionError {
    #[error("snapshot series for `{0}` is empty")]
    Empty(String),
    #[error("timestamps decrease at commit `{0}`")]
    Unordered(String),
    #[error("duplicate commit id `{0}`")]
    DuplicateCommit(String),
    #[error("bad snapshot file name `{0}` (expected NNN_<commit>_<epoch>.snap)")]
    BadFixtureName(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// Result of matching a commit message against the security keywords.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FixClassification {
    pub is_security_fix: bool,
    /// Security keywords found, in message order.
    pub keywords: Vec<String>,
    /// Tool or script-type names found (informational).
    pub scope: Vec<String>,
}

/// A message is a security fix when it contains a security keyword.
pub fn classify_security_fix(message: &str, lexicons: &Lexicons) -> FixClassification {
    let mut hits: Vec<(usize, String)> = Vec::new();
    for p in lexicons.security_keywords.patterns() {
        let Ok(re) = regex::RegexBuilder::new(p).case_insensitive(true).build() else {
            continue;
        };
        for m in re.find_iter(message) {
            hits.push((m.start(), m.as_str().to_string()));
        }
    }
    hits.sort();
    let mut keywords: Vec<String> = Vec::new();
    for (_, k) in hits {
        if !keywords.iter().any(|x| x.eq_ignore_ascii_case(&k)) {
            keywords.push(k);
        }
    }
    let scope = message
        .split(|c: char| !c.is_alphanumeric() && c != '_' && c != '-')
        .filter(|w| !w.is_empty() && lexicons.scope_terms.contains(w))
        .map(str::to_lowercase)
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    FixClassification {
        is_security_fix: !keywords.is_empty(),
        keywords,
        scope,
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Snapshot {
    pub commit: String,
    /// Seconds since the Unix epoch.
    pub timestamp: i64,
    pub content: String,
}

/// The versions of one file, oldest first.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SnapshotSeries {
    pub repo: String,
    pub path: String,
    snapshots: Vec<Snapshot>,
}

impl SnapshotSeries {
    pub fn new(repo: impl Into<String>, path: impl Into<String>, snapshots: Vec<Snapshot>) -> Result<Self, EvolutionError> {
        let path = path.into();
        if snapshots.is_empty() {
            return Err(EvolutionError::Empty(path));
        }
        let mut seen = BTreeSet::new();
        for (i, s) in snapshots.iter().enumerate() {
            if !seen.insert(s.commit.as_str()) {
                return Err(EvolutionError::DuplicateCommit(s.commit.clone()));
            }
            if i > 0 && s.timestamp < snapshots[i - 1].timestamp {
                return Err(EvolutionError::Unordered(s.commit.clone()));
            }
        }
        Ok(SnapshotSeries {
            repo: repo.into(),
            path,
            snapshots,
        })
    }

    pub fn snapshots(&self) -> &[Snapshot] {
        &self.snapshots
    }

    pub fn len(&self) -> usize {
        self.snapshots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.snapshots.is_empty()
    }

    /// Read a fixture directory of `NNN_<commit>_<epoch>.snap` files.
    /// `path` is the logical file name used for tool detection and fingerprints.
    pub fn from_fixture_dir(dir: &Path, path: &str) -> Result<Self, EvolutionError> {
        let io = |e| EvolutionError::Io {
            path: dir.display().to_string(),
            source: e,
        };
        let mut found = Vec::new();
        for entry in std::fs::read_dir(dir).map_err(io)? {
            let entry = entry.map_err(io)?;
            let name = entry.file_name().to_string_lossy().into_owned();
            let Some(stem) = name.strip_suffix(".snap") else {
                continue;
            };
            let bad = || EvolutionError::BadFixtureName(name.clone());
            let mut parts = stem.splitn(2, '_');
            let seq: u64 = parts.next().and_then(|s| s.parse().ok()).ok_or_else(bad)?;
            let rest = parts.next().ok_or_else(bad)?;
            let (commit, epoch) = rest.rsplit_once('_').ok_or_else(bad)?;
            let timestamp: i64 = epoch.parse().map_err(|_| bad())?;
            if commit.is_empty() {
                return Err(bad());
            }
            let bytes = std::fs::read(entry.path()).map_err(|e| EvolutionError::Io {
                path: entry.path().display().to_string(),
                source: e,
            })?;
            let (content, _) = crate::frontends::decode_source(&bytes);
            found.push((seq, Snapshot {
                commit: commit.to_string(),
                timestamp,
                content,
            }));
        }
        found.sort_by_key(|(seq, _)| *seq);
        let repo = dir.display().to_string();
        SnapshotSeries::new(repo, path, found.into_iter().map(|(_, s)| s).collect())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Persistent,
    Fixed,
    Reintroduced,
}

impl Status {
    pub fn as_str(self) -> &'static str {
        match self {
            Status::Persistent => "persistent",
            Status::Fixed => "fixed",
            Status::Reintroduced => "reintroduced",
        }
    }
}

/// One continuous presence of a smell instance in a series.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PersistenceRecord {
    pub fingerprint: String,
    pub rule_id: RuleId,
    pub path: String,
    pub first_seen: String,
    pub last_seen: String,
    pub fixed_at: Option<String>,
    /// 1-based snapshot positions of the commits above.
    pub first_index: usize,
    pub last_index: usize,
    pub fixed_index: Option<usize>,
    pub lifespan_commits: usize,
    pub lifespan_seconds: i64,
    pub status: Status,
}

/// Records plus per-snapshot diagnostics.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct TrackResult {
    pub records: Vec<PersistenceRecord>,
    pub diagnostics: Vec<(String, Diagnostic)>,
}

/// What one snapshot contributes.
struct Observed {
    findings: BTreeMap<String, RuleId>,
    unparseable: bool,
}

fn observe(series: &SnapshotSeries, snap: &Snapshot, tool: Option<ToolKind>, advisory: &AdvisoryDb, lexicons: &Lexicons, rules: &RuleSet, diags: &mut Vec<(String, Diagnostic)>) -> Observed {
    let tool = match tool.map(Ok).unwrap_or_else(|| detect_tool(&series.path, &snap.content)) {
        Ok(t) => t,
        Err(e) => {
            diags.push((snap.commit.clone(), Diagnostic::new(None, e.to_string())));
            return Observed {
                findings: BTreeMap::new(),
                unparseable: true,
            };
        }
    };
    let file = parse(&series.path, &snap.content, tool);
    if file.degraded() {
        diags.push((snap.commit.clone(), Diagnostic::new(None, "snapshot does not parse; no findings recorded")));
        diags.extend(file.diagnostics.iter().map(|d| (snap.commit.clone(), d.clone())));
        return Observed {
            findings: BTreeMap::new(),
            unparseable: true,
        };
    }
    let ctx = PredicateContext::new(&file, advisory, lexicons);
    let findings = evaluate_with(&file, &ctx, rules)
        .findings
        .into_iter()
        .map(|f| (f.fingerprint, f.rule_id))
        .collect();
    Observed {
        findings,
        unparseable: false,
    }
}

/// Follow every finding fingerprint through the series.
///
/// A chain continues while the fingerprint is present in consecutive
/// snapshots. It bridges one missing snapshot only when that snapshot
/// failed to parse. A chain that ends and is followed by a later chain
/// with the same fingerprint is marked `reintroduced`.
pub fn track(series: &SnapshotSeries, tool: Option<ToolKind>, advisory: &AdvisoryDb, lexicons: &Lexicons, rules: &RuleSet) -> TrackResult {
    let mut out = TrackResult::default();
    let observed: Vec<Observed> = series
        .snapshots
        .iter()
        .map(|s| observe(series, s, tool, advisory, lexicons, rules, &mut out.diagnostics))
        .collect();
    let n = observed.len();

    let mut all: BTreeMap<&str, RuleId> = BTreeMap::new();
    for o in &observed {
        for (fp, r) in &o.findings {
            all.insert(fp, *r);
        }
    }

    for (fp, rule) in all {
        // (first, last) indices, 0-based.
        let mut chains: Vec<(usize, usize)> = Vec::new();
        let mut i = 0;
        while i < n {
            if !observed[i].findings.contains_key(fp) {
                i += 1;
                continue;
            }
            let first = i;
            let mut last = i;
            let mut j = i + 1;
            while j < n {
                if observed[j].findings.contains_key(fp) {
                    last = j;
                    j += 1;
                } else if observed[j].unparseable && j + 1 < n && observed[j + 1].findings.contains_key(fp) {
                    last = j + 1;
                    j += 2;
                } else {
                    break;
                }
            }
            chains.push((first, last));
            i = last + 1;
        }
        let count = chains.len();
        for (k, (first, last)) in chains.into_iter().enumerate() {
            let fixed = (last + 1 < n).then_some(last + 1);
            let status = match fixed {
                None => Status::Persistent,
                Some(_) if k + 1 < count => Status::Reintroduced,
                Some(_) => Status::Fixed,
            };
            let snaps = &series.snapshots;
            let end_ts = snaps[fixed.unwrap_or(last)].timestamp;
            out.records.push(PersistenceRecord {
                fingerprint: fp.to_string(),
                rule_id: rule,
                path: series.path.clone(),
                first_seen: snaps[first].commit.clone(),
                last_seen: snaps[last].commit.clone(),
                fixed_at: fixed.map(|f| snaps[f].commit.clone()),
                first_index: first + 1,
                last_index: last + 1,
                fixed_index: fixed.map(|f| f + 1),
                lifespan_commits: last - first + 1,
                lifespan_seconds: end_ts - snaps[first].timestamp,
                status,
            });
        }
    }
    out.records.sort_by(|a, b| {
        (a.first_index, a.rule_id, &a.fingerprint).cmp(&(b.first_index, b.rule_id, &b.fingerprint))
    });
    out
}

/// Lifespans (in commits) per rule, split by whether the smell was fixed.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FixHistogram {
    /// Records with a `fixed_at` commit.
    pub fixed: BTreeMap<RuleId, Vec<usize>>,
    /// Records still present at the end of their series (censored).
    pub persistent: BTreeMap<RuleId, Vec<usize>>,
}

impl FixHistogram {
    pub fn is_empty(&self) -> bool {
        self.fixed.is_empty() && self.persistent.is_empty()
    }
}

pub fn commits_to_fix(records: &[PersistenceRecord]) -> FixHistogram {
    let mut h = FixHistogram::default();
    for r in records {
        let bucket = if r.fixed_at.is_some() { &mut h.fixed } else { &mut h.persistent };
        bucket.entry(r.rule_id).or_default().push(r.lifespan_commits);
    }
    for v in h.fixed.values_mut().chain(h.persistent.values_mut()) {
        v.sort_unstable();
    }
    h
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lex() -> &'static Lexicons {
        Lexicons::bundled()
    }

    #[test]
    fn classifies_messages() {
        let c = classify_security_fix("Fix security issue in sudoers template", lex());
        assert!(c.is_security_fix);
        assert!(c.keywords.iter().any(|k| k.eq_ignore_ascii_case("fix security")));
        assert!(classify_security_fix("CVE-2021-34527 mitigation", lex()).is_security_fix);
        assert!(!classify_security_fix("Refactor variable names", lex()).is_security_fix);
        let c = classify_security_fix("Harden ansible playbook", lex());
        assert!(c.is_security_fix);
        assert_eq!(c.scope, ["ansible", "playbook"]);
    }

    #[test]
    fn short_tokens_are_word_bounded() {
        assert!(!classify_security_fix("Discovered typo in README", lex()).is_security_fix);
        assert!(classify_security_fix("Escape input (XSS)", lex()).is_security_fix);
    }

    fn snap(i: usize, content: &str) -> Snapshot {
        Snapshot {
            commit: format!("c{i}"),
            timestamp: 1_000 + 100 * i as i64,
            content: content.to_string(),
        }
    }

    const CLEAN: &str = "- hosts: all\n  tasks:\n    - name: ok\n      debug:\n        msg: hello\n";
    const SMELLY: &str = "- hosts: all\n  tasks:\n    - name: run\n      command: \"apt-get {{ action }}\"\n";

    fn run(contents: &[&str]) -> Vec<PersistenceRecord> {
        let snaps = contents.iter().enumerate().map(|(i, c)| snap(i + 1, c)).collect();
        let s = SnapshotSeries::new("r", "site.yml", snaps).unwrap();
        track(&s, Some(ToolKind::Ansible), crate::advisory::bundled(), lex(), &RuleSet::all()).records
    }

    #[test]
    fn introduced_then_fixed() {
        let r = run(&[CLEAN, CLEAN, SMELLY, SMELLY, SMELLY, SMELLY, CLEAN, CLEAN]);
        assert_eq!(r.len(), 1);
        let r = &r[0];
        assert_eq!((r.first_index, r.last_index, r.fixed_index), (3, 6, Some(7)));
        assert_eq!(r.lifespan_commits, 4);
        assert_eq!(r.lifespan_seconds, 400);
        assert_eq!(r.status, Status::Fixed);
        assert_eq!(r.fixed_at.as_deref(), Some("c7"));
    }

    #[test]
    fn reintroduced_and_persistent() {
        let r = run(&[SMELLY, CLEAN, SMELLY]);
        assert_eq!(r.len(), 2);
        assert_eq!(r[0].status, Status::Reintroduced);
        assert_eq!(r[1].status, Status::Persistent);
        assert_eq!(r[1].lifespan_commits, 1);
    }

    #[test]
    fn unparseable_gap_is_bridged_once() {
        let broken = "- hosts: all\n  tasks: [\n";
        let r = run(&[SMELLY, broken, SMELLY]);
        assert_eq!(r.len(), 1);
        assert_eq!(r[0].lifespan_commits, 3);
        let r = run(&[SMELLY, broken, broken, SMELLY]);
        assert_eq!(r.len(), 2);
    }

    #[test]
    fn rejects_bad_series() {
        assert!(SnapshotSeries::new("r", "p", vec![]).is_err());
        let mut b = snap(1, CLEAN);
        b.timestamp = 0;
        assert!(SnapshotSeries::new("r", "p", vec![snap(1, CLEAN), b.clone()]).is_err());
        b.commit = "c9".into();
        assert!(SnapshotSeries::new("r", "p", vec![snap(1, CLEAN), b]).is_err());
    }

    #[test]
    fn histogram() {
        assert!(commits_to_fix(&[]).is_empty());
        let r = run(&[CLEAN, CLEAN, SMELLY, SMELLY, SMELLY, SMELLY, CLEAN, CLEAN]);
        let h = commits_to_fix(&r);
        assert_eq!(h.fixed.get(&RuleId::CommandInjection), Some(&vec![4]));
        assert!(h.persistent.is_empty());
        let h = commits_to_fix(&run(&[SMELLY, CLEAN, SMELLY]));
        assert_eq!(h.fixed[&RuleId::CommandInjection], [1]);
        assert_eq!(h.persistent[&RuleId::CommandInjection], [1]);
    }
}
