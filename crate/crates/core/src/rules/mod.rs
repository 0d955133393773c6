//! The ten detection rules, composed from predicates.

mod cards;

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::frontends::{Diagnostic, ParsedFile};
use crate::predicates::{
    follows_nonstandard_convention, has_known_vulnerabilities, in_arithmetic_context,
    is_command_sink, is_config_file, is_dependency, is_exposed, is_file_path, is_outdated_version,
    is_sensitive_setting, is_untrusted_source, is_user_input, lacks_version_locking,
    named_resource, node_refs, unsanitized_inputs, Evidence, ExposureKind, NodeRef,
    PredicateContext, SinkKind,
};
use crate::span::Span;

pub use cards::{card, explain, RuleCard, UnknownRule};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RuleId {
    InsecureConfigurationManagement,
    InsecureDependencyManagement,
    InsecureInputHandling,
    OutdatedDependencies,
    PathTraversal,
    CommandInjection,
    CodeInjection,
    OutdatedSoftwareVersion,
    InadequateNamingConvention,
    SensitiveInformationExposure,
}

impl RuleId {
    pub const ALL: [RuleId; 10] = [
        RuleId::InsecureConfigurationManagement,
        RuleId::InsecureDependencyManagement,
        RuleId::InsecureInputHandling,
        RuleId::OutdatedDependencies,
        RuleId::PathTraversal,
        RuleId::CommandInjection,
        RuleId::CodeInjection,
        RuleId::OutdatedSoftwareVersion,
        RuleId::InadequateNamingConvention,
        RuleId::SensitiveInformationExposure,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            RuleId::InsecureConfigurationManagement => "insecure-configuration-management",
            RuleId::InsecureDependencyManagement => "insecure-dependency-management",
            RuleId::InsecureInputHandling => "insecure-input-handling",
            RuleId::OutdatedDependencies => "outdated-dependencies",
            RuleId::PathTraversal => "path-traversal",
            RuleId::CommandInjection => "command-injection",
            RuleId::CodeInjection => "code-injection",
            RuleId::OutdatedSoftwareVersion => "outdated-software-version",
            RuleId::InadequateNamingConvention => "inadequate-naming-convention",
            RuleId::SensitiveInformationExposure => "sensitive-information-exposure",
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            RuleId::InsecureConfigurationManagement => "Insecure Configuration Management",
            RuleId::InsecureDependencyManagement => "Insecure Dependency Management",
            RuleId::InsecureInputHandling => "Insecure Input Handling",
            RuleId::OutdatedDependencies => "Outdated Dependencies",
            RuleId::PathTraversal => "Path Traversal",
            RuleId::CommandInjection => "Command Injection",
            RuleId::CodeInjection => "Code Injection",
            RuleId::OutdatedSoftwareVersion => "Outdated Software Version",
            RuleId::InadequateNamingConvention => "Inadequate Naming Convention",
            RuleId::SensitiveInformationExposure => "Sensitive Information Exposure",
        }
    }

    pub fn cwe(self) -> &'static str {
        match self {
            RuleId::InsecureConfigurationManagement => "CWE-306",
            RuleId::InsecureDependencyManagement
            | RuleId::OutdatedDependencies
            | RuleId::OutdatedSoftwareVersion => "CWE-1104",
            RuleId::InsecureInputHandling => "CWE-20",
            RuleId::PathTraversal => "CWE-22",
            RuleId::CommandInjection => "CWE-77",
            RuleId::CodeInjection => "CWE-94",
            RuleId::InadequateNamingConvention => "CWE-710",
            RuleId::SensitiveInformationExposure => "CWE-256",
        }
    }

    pub fn severity(self) -> Severity {
        match self {
            RuleId::CommandInjection
            | RuleId::CodeInjection
            | RuleId::SensitiveInformationExposure
            | RuleId::InsecureConfigurationManagement
            | RuleId::PathTraversal
            | RuleId::OutdatedDependencies => Severity::High,
            RuleId::InsecureInputHandling
            | RuleId::InsecureDependencyManagement
            | RuleId::OutdatedSoftwareVersion => Severity::Medium,
            RuleId::InadequateNamingConvention => Severity::Low,
        }
    }
}

impl fmt::Display for RuleId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for RuleId {
    type Err = UnknownRule;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        RuleId::ALL
            .into_iter()
            .find(|r| r.as_str() == s)
            .ok_or_else(|| UnknownRule { id: s.to_string() })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Low,
    Medium,
    High,
}

impl Severity {
    pub fn as_str(self) -> &'static str {
        match self {
            Severity::Low => "low",
            Severity::Medium => "medium",
            Severity::High => "high",
        }
    }
}

impl FromStr for Severity {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "low" => Ok(Severity::Low),
            "medium" => Ok(Severity::Medium),
            "high" => Ok(Severity::High),
            _ => Err(format!("unknown severity `{s}` (expected low, medium or high)")),
        }
    }
}

/// One detected smell.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Finding {
    pub rule_id: RuleId,
    pub category: String,
    pub cwe: String,
    pub severity: Severity,
    pub path: String,
    pub span: Span,
    pub snippet: String,
    pub message: String,
    pub evidence: Vec<Evidence>,
    pub fingerprint: String,
}

impl Finding {
    pub fn line(&self) -> usize {
        self.span.start_line
    }
}

/// Collapse runs of whitespace to one space and trim.
pub fn normalize_snippet(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Stable identity of a finding: rule, normalized snippet and path.
pub fn fingerprint(rule: RuleId, snippet: &str, path: &str) -> String {
    let mut h = Sha256::new();
    h.update(rule.as_str().as_bytes());
    h.update([0]);
    h.update(normalize_snippet(snippet).as_bytes());
    h.update([0]);
    h.update(path.as_bytes());
    format!("{:x}", h.finalize())
}

/// A subset of rules to run.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RuleSet(BTreeSet<RuleId>);

impl RuleSet {
    pub fn all() -> Self {
        RuleSet(RuleId::ALL.into_iter().collect())
    }

    pub fn new(rules: impl IntoIterator<Item = RuleId>) -> Self {
        RuleSet(rules.into_iter().collect())
    }

    /// Comma-separated rule ids.
    pub fn parse(list: &str) -> Result<Self, UnknownRule> {
        list.split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(str::parse)
            .collect::<Result<BTreeSet<_>, _>>()
            .map(RuleSet)
    }

    pub fn contains(&self, r: RuleId) -> bool {
        self.0.contains(&r)
    }

    pub fn iter(&self) -> impl Iterator<Item = RuleId> + '_ {
        self.0.iter().copied()
    }
}

impl Default for RuleSet {
    fn default() -> Self {
        RuleSet::all()
    }
}

/// Findings plus diagnostics raised while evaluating predicates.
#[derive(Debug, Clone, Default)]
pub struct Evaluation {
    pub findings: Vec<Finding>,
    pub diagnostics: Vec<Diagnostic>,
}

/// A rule firing on one node, before it is turned into a finding.
#[derive(Debug, Clone)]
pub struct Hit {
    pub rule: RuleId,
    /// Primary evidence first.
    pub evidence: Vec<Evidence>,
    pub message: String,
}

fn quote(s: &str) -> String {
    let s = normalize_snippet(s);
    if s.chars().count() > 60 {
        format!("`{}...`", s.chars().take(57).collect::<String>())
    } else {
        format!("`{s}`")
    }
}

fn injection_hits(nr: &NodeRef<'_>, ctx: &PredicateContext<'_>, hits: &mut Vec<Hit>, diags: &mut Vec<Diagnostic>) {
    if !nr.node.is_scalar_like() {
        return;
    }
    let Some(input) = is_user_input(nr, ctx) else {
        return;
    };
    diags.extend(input.diagnostics);
    let open = unsanitized_inputs(nr, ctx);
    let Some(first) = open.first() else {
        return;
    };
    let sink = is_command_sink(nr, ctx);
    let path = is_file_path(nr, ctx);
    let ev = |i: &crate::frontends::Interpolation| ctx.evidence_at("is_unsanitized", i.span);
    match &sink {
        Some(s) if s.kind == SinkKind::Interpreter => {
            hits.push(Hit {
                rule: RuleId::CodeInjection,
                evidence: vec![ev(first), s.evidence.clone()],
                message: format!(
                    "unsanitized input {} is evaluated by an interpreter ({})",
                    quote(&first.variable),
                    quote(&s.evidence.text)
                ),
            });
            return;
        }
        Some(s) => {
            if let Some(word) = open.iter().find(|i| !in_arithmetic_context(i, nr, ctx)) {
                hits.push(Hit {
                    rule: RuleId::CommandInjection,
                    evidence: vec![ev(word), s.evidence.clone()],
                    message: format!(
                        "unsanitized input {} is spliced into a shell command ({})",
                        quote(&word.variable),
                        quote(&s.evidence.text)
                    ),
                });
                return;
            }
        }
        None if path => {
            hits.push(Hit {
                rule: RuleId::PathTraversal,
                evidence: vec![ev(first)],
                message: format!("file path is built from unsanitized input {}", quote(&first.variable)),
            });
            return;
        }
        None => {}
    }
    if sink.is_some() || path {
        let target = if sink.is_some() { "a command" } else { "a file path" };
        hits.push(Hit {
            rule: RuleId::InsecureInputHandling,
            evidence: vec![ev(first)],
            message: format!("input {} reaches {target} without validation", quote(&first.variable)),
        });
    }
}

fn dependency_hits(nr: &NodeRef<'_>, ctx: &PredicateContext<'_>, hits: &mut Vec<Hit>, diags: &mut Vec<Diagnostic>) {
    let Some(dep) = is_dependency(nr, ctx) else {
        return;
    };
    let Some(primary) = dep.primary_evidence().cloned() else {
        return;
    };
    let check = is_outdated_version(&dep, ctx);
    diags.extend(check.diagnostic);
    let version = dep.version.as_deref().map(|v| format!(" {v}")).unwrap_or_default();
    if let Some(rec) = &check.record {
        let vulns = has_known_vulnerabilities(&dep, ctx);
        if let Some(v) = vulns.first() {
            let id = v.advisory_id.as_deref().unwrap_or("a known-malicious release");
            hits.push(Hit {
                rule: RuleId::OutdatedDependencies,
                evidence: vec![primary],
                message: format!("{}{version} is affected by {id}", quote(&dep.name)),
            });
        } else {
            let why = if rec.eol {
                "has reached end of life".to_string()
            } else {
                format!("is older than {}", rec.safe_below.as_deref().unwrap_or("the supported release"))
            };
            hits.push(Hit {
                rule: RuleId::OutdatedSoftwareVersion,
                evidence: vec![primary],
                message: format!("{}{version} {why}", quote(&dep.name)),
            });
        }
        return;
    }
    let unlocked = lacks_version_locking(&dep);
    let untrusted = is_untrusted_source(&dep, ctx);
    if untrusted {
        let src = dep.source.clone().unwrap_or_default();
        hits.push(Hit {
            rule: RuleId::InsecureDependencyManagement,
            evidence: vec![primary],
            message: format!("{} is fetched from untrusted source {}", quote(&dep.name), quote(&src)),
        });
    } else if unlocked {
        let what = match dep.version.as_deref() {
            None => "has no version constraint".to_string(),
            Some(v) => format!("uses the floating version constraint {}", quote(v)),
        };
        hits.push(Hit {
            rule: RuleId::InsecureDependencyManagement,
            evidence: vec![primary],
            message: format!("{} {what}", quote(&dep.name)),
        });
    }
}

/// All rules that fire on one node, in rule order.
pub fn node_hits(nr: &NodeRef<'_>, ctx: &PredicateContext<'_>, diags: &mut Vec<Diagnostic>) -> Vec<Hit> {
    let mut hits = Vec::new();
    if nr.node.is_scalar_like() {
        if let Some(setting) = is_sensitive_setting(nr, ctx) {
            if let Some(cfg) = is_config_file(nr, ctx) {
                hits.push(Hit {
                    rule: RuleId::InsecureConfigurationManagement,
                    message: format!(
                        "insecure setting {} in configuration target {}",
                        quote(&setting.text),
                        quote(&cfg.text)
                    ),
                    evidence: vec![setting, cfg],
                });
            }
        }
    }
    dependency_hits(nr, ctx, &mut hits, diags);
    injection_hits(nr, ctx, &mut hits, diags);
    if let Some(res) = named_resource(nr, ctx) {
        if let Some(reason) = follows_nonstandard_convention(&res.name, ctx) {
            hits.push(Hit {
                rule: RuleId::InadequateNamingConvention,
                message: format!("{}: {}", quote(&res.name), reason.describe()),
                evidence: vec![res.evidence],
            });
        }
    }
    if let Some(x) = is_exposed(nr, ctx) {
        let how = match x.kind {
            ExposureKind::Literal => "is hardcoded as a literal value",
            ExposureKind::PlaintextFile => "is written to a plain-text file",
            ExposureKind::Logged => "is printed by a log statement",
        };
        hits.push(Hit {
            rule: RuleId::SensitiveInformationExposure,
            message: format!("sensitive value {} {how}", quote(&x.subject)),
            evidence: vec![x.evidence],
        });
    }
    hits
}

/// Location reported for a hit: the node when it fits on one line,
/// otherwise the innermost one-line node holding the primary evidence,
/// otherwise the trimmed source line of the evidence.
pub fn anchor_span(nr: &NodeRef<'_>, primary: &Evidence, file: &ParsedFile) -> Span {
    if nr.node.span.is_single_line() && nr.node.span.start < nr.node.span.end {
        return nr.node.span;
    }
    let mut best: Option<Span> = None;
    for n in nr.node.walk() {
        if n.span.is_single_line() && n.span.start < n.span.end && n.span.contains(&primary.span) {
            if best.is_none_or(|b| n.span.end - n.span.start < b.end - b.start) {
                best = Some(n.span);
            }
        }
    }
    best.unwrap_or_else(|| file.lines.trimmed_line_span(&file.source, primary.span.start))
}

/// Evaluate every enabled rule over every node.
pub fn evaluate_with(file: &ParsedFile, ctx: &PredicateContext<'_>, rules: &RuleSet) -> Evaluation {
    let mut out = Evaluation::default();
    for nr in node_refs(&file.root) {
        for hit in node_hits(&nr, ctx, &mut out.diagnostics) {
            if !rules.contains(hit.rule) {
                continue;
            }
            let span = anchor_span(&nr, &hit.evidence[0], file);
            let snippet = span.text(&file.source).to_string();
            out.findings.push(Finding {
                rule_id: hit.rule,
                category: hit.rule.name().to_string(),
                cwe: hit.rule.cwe().to_string(),
                severity: hit.rule.severity(),
                path: file.path.clone(),
                fingerprint: fingerprint(hit.rule, &snippet, &file.path),
                span,
                snippet,
                message: hit.message,
                evidence: hit.evidence,
            });
        }
    }
    sort_findings(&mut out.findings);
    out.diagnostics.sort();
    out.diagnostics.dedup();
    out
}

/// Evaluate all rules.
pub fn evaluate(file: &ParsedFile, ctx: &PredicateContext<'_>) -> Vec<Finding> {
    evaluate_with(file, ctx, &RuleSet::all()).findings
}

/// Order by (path, span start, rule id) and drop exact duplicates.
pub fn sort_findings(findings: &mut Vec<Finding>) {
    findings.sort_by(|a, b| {
        (a.path.as_str(), a.span.start, a.rule_id.as_str(), a.span.end)
            .cmp(&(b.path.as_str(), b.span.start, b.rule_id.as_str(), b.span.end))
    });
    findings.dedup_by(|a, b| a.path == b.path && a.rule_id == b.rule_id && a.span == b.span);
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frontends::ToolKind;
    use crate::predicates::testutil::*;

    fn run(tool: ToolKind, src: &str) -> Vec<(RuleId, usize)> {
        let f = file(tool, src);
        evaluate(&f, &ctx(&f)).iter().map(|x| (x.rule_id, x.line())).collect()
    }

    #[test]
    fn ids_match_rule_bound_taxonomy() {
        let tax: BTreeSet<&str> = crate::taxonomy::bundled().rule_bound().map(|c| c.id.as_str()).collect();
        let ours: BTreeSet<&str> = RuleId::ALL.iter().map(|r| r.as_str()).collect();
        assert_eq!(tax, ours);
        for r in RuleId::ALL {
            let c = crate::taxonomy::bundled().get(r.as_str()).unwrap();
            assert_eq!(c.name, r.name());
            assert_eq!(c.cwes[0], r.cwe());
        }
    }

    #[test]
    fn explain_cards() {
        assert_eq!(explain("path-traversal").unwrap().cwe, "CWE-22");
        assert_eq!(explain("code-injection").unwrap().cwe, "CWE-94");
        let e = explain("nonexistent").unwrap_err().to_string();
        assert!(e.contains("command-injection"));
    }

    #[test]
    fn injection_precedence() {
        assert_eq!(run(ToolKind::Ansible, "- command: \"apt-get {{ action }}\"\n"), [(RuleId::CommandInjection, 1)]);
        assert_eq!(
            run(ToolKind::Ansible, "- shell: \"echo $(( {{ n }} + 1 ))\"\n"),
            [(RuleId::InsecureInputHandling, 1)]
        );
        assert_eq!(run(ToolKind::Ansible, "- copy:\n    src: \"{{ p }}\"\n    dest: /srv/report.txt\n"), [(RuleId::PathTraversal, 2)]);
        assert!(run(ToolKind::Ansible, "- command: \"apt-get {{ action | quote }}\"\n").is_empty());
    }

    #[test]
    fn dependency_precedence() {
        let r = run(ToolKind::Ansible, "- apt:\n    name: openssl\n    version: \"1.0.1\"\n");
        assert_eq!(r, [(RuleId::OutdatedDependencies, 3)]);
        let r = run(ToolKind::Ansible, "- apt:\n    name: python2.7\n");
        assert_eq!(r, [(RuleId::OutdatedSoftwareVersion, 2)]);
        let r = run(ToolKind::Ansible, "- apt:\n    name: apache2\n");
        assert_eq!(r, [(RuleId::InsecureDependencyManagement, 2)]);
        assert!(run(ToolKind::Ansible, "- apt:\n    name: apache2=2.4.52\n").is_empty());
    }

    #[test]
    fn fingerprint_ignores_whitespace_only() {
        let a = fingerprint(RuleId::PathTraversal, "src:  \"{{ x }}\"", "a.yml");
        assert_eq!(a, fingerprint(RuleId::PathTraversal, "src: \"{{ x }}\"", "a.yml"));
        assert_ne!(a, fingerprint(RuleId::PathTraversal, "src: \"{{ y }}\"", "a.yml"));
        assert_ne!(a, fingerprint(RuleId::PathTraversal, "src: \"{{ x }}\"", "b.yml"));
        assert_eq!(a.len(), 64);
    }
}
