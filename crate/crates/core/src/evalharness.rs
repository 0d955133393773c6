//! Labeled-corpus evaluation: precision and recall per tool and rule.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::advisory::AdvisoryDb;
use crate::frontends::{decode_source, parse, ToolKind};
use crate::predicates::{Lexicons, PredicateContext};
use crate::rules::{evaluate_with, RuleId, RuleSet};

/// Allowed distance between an expected and a reported line.
pub const LINE_TOLERANCE: usize = 2;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("manifest line {line}: {message}")]
    Manifest { line: usize, message: String },
    #[error("corpus entry `{id}`: snippet `{path}` cannot be read: {source}")]
    MissingSnippet {
        id: String,
        path: String,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Expected {
    pub rule_id: RuleId,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub line: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusEntry {
    pub id: String,
    pub tool: ToolKind,
    /// Relative to the manifest's directory.
    pub snippet: String,
    #[serde(default)]
    pub expected: Vec<Expected>,
    #[serde(default)]
    pub provenance: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Corpus {
    pub root: PathBuf,
    pub entries: Vec<CorpusEntry>,
}

/// Read a JSON-lines manifest. Blank lines and `#` comments are skipped.
pub fn load_manifest(path: &Path) -> Result<Corpus, EvalError> {
    let text = std::fs::read_to_string(path).map_err(|e| EvalError::Io {
        path: path.display().to_string(),
        source: e,
    })?;
    let mut entries: Vec<CorpusEntry> = Vec::new();
    let mut ids = BTreeSet::new();
    for (i, l) in text.lines().enumerate() {
        let t = l.trim();
        if t.is_empty() || t.starts_with('#') {
            continue;
        }
        let e: CorpusEntry = serde_json::from_str(t).map_err(|e| EvalError::Manifest {
            line: i + 1,
            message: e.to_string(),
        })?;
        if !ids.insert(e.id.clone()) {
            return Err(EvalError::Manifest {
                line: i + 1,
                message: format!("duplicate entry id `{}`", e.id),
            });
        }
        entries.push(e);
    }
    Ok(Corpus {
        root: path.parent().map(Path::to_path_buf).unwrap_or_default(),
        entries,
    })
}

/// Counts for one (tool, rule) cell.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counts {
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

impl Counts {
    pub fn precision(&self) -> Option<f64> {
        ratio(self.tp, self.tp + self.fp)
    }

    pub fn recall(&self) -> Option<f64> {
        ratio(self.tp, self.tp + self.fn_)
    }

    fn add(&mut self, o: Counts) {
        self.tp += o.tp;
        self.fp += o.fp;
        self.fn_ += o.fn_;
    }
}

fn ratio(a: usize, b: usize) -> Option<f64> {
    (b > 0).then(|| a as f64 / b as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub tool: ToolKind,
    pub rule_id: RuleId,
    #[serde(flatten)]
    pub counts: Counts,
    pub precision: Option<f64>,
    pub recall: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RuleRow {
    pub rule_id: RuleId,
    #[serde(flatten)]
    pub counts: Counts,
    pub precision: Option<f64>,
    pub recall: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    /// A tool name, or `all`.
    pub scope: String,
    #[serde(flatten)]
    pub counts: Counts,
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    /// Mean of the defined per-rule precisions.
    pub mean_precision: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    /// Sorted by (tool, rule).
    pub cells: Vec<Cell>,
    /// Per rule across all tools, in rule order.
    pub rules: Vec<RuleRow>,
    /// Per tool, then `all`.
    pub packs: Vec<Summary>,
}

/// Maximum one-to-one matching (Kuhn's augmenting paths).
/// `adj[d]` lists the expectations detection `d` may satisfy.
pub fn max_matching(adj: &[Vec<usize>], n_expected: usize) -> usize {
    fn augment(d: usize, adj: &[Vec<usize>], seen: &mut [bool], owner: &mut [Option<usize>]) -> bool {
        for &e in &adj[d] {
            if seen[e] {
                continue;
            }
            seen[e] = true;
            if owner[e].is_none_or(|o| augment(o, adj, seen, owner)) {
                owner[e] = Some(d);
                return true;
            }
        }
        false
    }
    let mut owner = vec![None; n_expected];
    let mut size = 0;
    for d in 0..adj.len() {
        let mut seen = vec![false; n_expected];
        if augment(d, adj, &mut seen, &mut owner) {
            size += 1;
        }
    }
    size
}

/// Match detections (lines) to expectations for one rule in one file.
pub fn match_counts(detected: &[usize], expected: &[Option<usize>]) -> Counts {
    let lines: BTreeSet<usize> = detected.iter().copied().collect();
    let adj: Vec<Vec<usize>> = lines
        .iter()
        .map(|&d| {
            expected
                .iter()
                .enumerate()
                .filter(|(_, e)| e.is_none_or(|l| l.abs_diff(d) <= LINE_TOLERANCE))
                .map(|(i, _)| i)
                .collect()
        })
        .collect();
    let tp = max_matching(&adj, expected.len());
    Counts {
        tp,
        fp: lines.len() - tp,
        fn_: expected.len() - tp,
    }
}

/// Lint every entry and score it against its expectations.
pub fn evaluate_corpus(corpus: &Corpus, advisory: &AdvisoryDb, lexicons: &Lexicons, rules: &RuleSet) -> Result<EvalReport, EvalError> {
    let mut cells: BTreeMap<(ToolKind, RuleId), Counts> = BTreeMap::new();
    for entry in &corpus.entries {
        let path = corpus.root.join(&entry.snippet);
        let bytes = std::fs::read(&path).map_err(|e| EvalError::MissingSnippet {
            id: entry.id.clone(),
            path: path.display().to_string(),
            source: e,
        })?;
        let (src, _) = decode_source(&bytes);
        let file = parse(&entry.snippet, &src, entry.tool);
        let ctx = PredicateContext::new(&file, advisory, lexicons);
        let findings = evaluate_with(&file, &ctx, rules).findings;

        let mut detected: BTreeMap<RuleId, Vec<usize>> = BTreeMap::new();
        for f in &findings {
            detected.entry(f.rule_id).or_default().push(f.line());
        }
        let mut expected: BTreeMap<RuleId, Vec<Option<usize>>> = BTreeMap::new();
        for e in entry.expected.iter().filter(|e| rules.contains(e.rule_id)) {
            expected.entry(e.rule_id).or_default().push(e.line);
        }
        let keys: BTreeSet<RuleId> = detected.keys().chain(expected.keys()).copied().collect();
        for r in keys {
            let c = match_counts(
                detected.get(&r).map(Vec::as_slice).unwrap_or(&[]),
                expected.get(&r).map(Vec::as_slice).unwrap_or(&[]),
            );
            cells.entry((entry.tool, r)).or_default().add(c);
        }
    }
    Ok(build_report(&cells))
}

fn cell(tool: ToolKind, rule_id: RuleId, counts: Counts) -> Cell {
    Cell {
        tool,
        rule_id,
        counts,
        precision: counts.precision(),
        recall: counts.recall(),
    }
}

fn summary(scope: &str, cells: &[&Cell]) -> Summary {
    let mut counts = Counts::default();
    for c in cells {
        counts.add(c.counts);
    }
    let ps: Vec<f64> = cells.iter().filter_map(|c| c.precision).collect();
    Summary {
        scope: scope.to_string(),
        counts,
        precision: counts.precision(),
        recall: counts.recall(),
        mean_precision: (!ps.is_empty()).then(|| ps.iter().sum::<f64>() / ps.len() as f64),
    }
}

fn build_report(cells: &BTreeMap<(ToolKind, RuleId), Counts>) -> EvalReport {
    let cells: Vec<Cell> = cells.iter().map(|(&(t, r), &c)| cell(t, r, c)).collect();
    let mut by_rule: BTreeMap<RuleId, Counts> = BTreeMap::new();
    for c in &cells {
        by_rule.entry(c.rule_id).or_default().add(c.counts);
    }
    let rules = by_rule
        .into_iter()
        .map(|(rule_id, counts)| RuleRow {
            rule_id,
            counts,
            precision: counts.precision(),
            recall: counts.recall(),
        })
        .collect();
    let tools: BTreeSet<ToolKind> = cells.iter().map(|c| c.tool).collect();
    let mut packs: Vec<Summary> = tools
        .iter()
        .map(|&t| summary(t.as_str(), &cells.iter().filter(|c| c.tool == t).collect::<Vec<_>>()))
        .collect();
    if !cells.is_empty() {
        packs.push(summary("all", &cells.iter().collect::<Vec<_>>()));
    }
    EvalReport { cells, rules, packs }
}

impl EvalReport {
    pub fn pack(&self, scope: &str) -> Option<&Summary> {
        self.packs.iter().find(|p| p.scope == scope)
    }

    pub fn cell(&self, tool: ToolKind, rule: RuleId) -> Option<&Cell> {
        self.cells.iter().find(|c| c.tool == tool && c.rule_id == rule)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Text,
    Json,
}

fn fmt_ratio(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.2}")).unwrap_or_else(|| "--".to_string())
}

fn table(out: &mut String, title: &str, report: &EvalReport, tools: &[ToolKind], value: fn(&Cell) -> Option<f64>) {
    let w = 34;
    let _ = write!(out, "{title:<w$}");
    for t in tools {
        let _ = write!(out, " {:>10}", t.as_str());
    }
    out.push('\n');
    for r in RuleId::ALL {
        if !report.cells.iter().any(|c| c.rule_id == r) {
            continue;
        }
        let _ = write!(out, "{:<w$}", r.as_str());
        for &t in tools {
            let v = report.cell(t, r).and_then(value);
            let _ = write!(out, " {:>10}", fmt_ratio(v));
        }
        out.push('\n');
    }
}

/// Render as a rule-by-tool table or as JSON.
pub fn emit_report(report: &EvalReport, format: ReportFormat) -> String {
    match format {
        ReportFormat::Json => serde_json::to_string_pretty(report).expect("report serializes") + "\n",
        ReportFormat::Text => {
            let tools: Vec<ToolKind> = report.cells.iter().map(|c| c.tool).collect::<BTreeSet<_>>().into_iter().collect();
            let mut out = String::new();
            table(&mut out, "Precision", report, &tools, |c| c.precision);
            if report.cells.is_empty() {
                return out;
            }
            out.push('\n');
            table(&mut out, "Recall", report, &tools, |c| c.recall);
            out.push('\n');
            let _ = writeln!(out, "{:<12} {:>5} {:>5} {:>5} {:>10} {:>10}", "Pack", "TP", "FP", "FN", "precision", "recall");
            for p in &report.packs {
                let _ = writeln!(
                    out,
                    "{:<12} {:>5} {:>5} {:>5} {:>10} {:>10}",
                    p.scope,
                    p.counts.tp,
                    p.counts.fp,
                    p.counts.fn_,
                    fmt_ratio(p.precision),
                    fmt_ratio(p.recall)
                );
            }
            out
        }
    }
}
