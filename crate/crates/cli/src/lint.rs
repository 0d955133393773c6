use std::io::Write;
use std::path::Path;

use anyhow::{bail, Result};
use rayon::prelude::*;
use serde::Serialize;
use walkdir::WalkDir;

use iacsmell_core::frontends::{decode_source, detect_tool, parse, Diagnostic, ToolKind};
use iacsmell_core::predicates::PredicateContext;
use iacsmell_core::rules::{evaluate_with, sort_findings, Finding, Severity};

use crate::{Config, Format, EXIT_ERROR, EXIT_FINDINGS, EXIT_OK};

pub const SCHEMA_VERSION: u32 = 1;

const SKIP_DIRS: &[&str] = &[".git", ".hg", ".svn", "target", "node_modules", ".terraform"];

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub struct FileDiagnostic {
    pub path: String,
    pub line: Option<usize>,
    pub message: String,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct LintReport {
    pub schema_version: u32,
    pub files: usize,
    pub findings: Vec<Finding>,
    pub diagnostics: Vec<FileDiagnostic>,
}

fn has_glob(s: &str) -> bool {
    s.contains(['*', '?', '['])
}

/// Expand inputs to a sorted, de-duplicated file list. Directory members are
/// kept when the tool can be detected from their name (or any file when a
/// tool override is given and the name has an extension).
pub fn collect_files(inputs: &[String], tool: Option<ToolKind>) -> Result<Vec<String>> {
    let mut files = Vec::new();
    for input in inputs {
        let p = Path::new(input);
        if p.is_file() {
            files.push(input.clone());
        } else if p.is_dir() {
            let walker = WalkDir::new(p).sort_by_file_name().into_iter().filter_entry(|e| {
                e.depth() == 0 || !(e.file_type().is_dir() && SKIP_DIRS.contains(&e.file_name().to_string_lossy().as_ref()))
            });
            for e in walker.filter_map(|e| e.ok()) {
                if !e.file_type().is_file() {
                    continue;
                }
                let path = e.path().to_string_lossy().into_owned();
                if candidate(&path, tool) {
                    files.push(path);
                }
            }
        } else if has_glob(input) {
            for m in glob::glob(input)?.filter_map(|m| m.ok()) {
                if m.is_file() {
                    files.push(m.to_string_lossy().into_owned());
                }
            }
        } else {
            bail!("no such file or directory: {input}");
        }
    }
    files.sort();
    files.dedup();
    Ok(files)
}

const KNOWN_EXT: &[&str] = &["yml", "yaml", "sls", "tf", "rb", "pp", "ts", "js", "py"];

pub(crate) fn candidate(path: &str, tool: Option<ToolKind>) -> bool {
    let p = Path::new(path);
    let name = p.file_name().and_then(|f| f.to_str()).unwrap_or("");
    if name == "Vagrantfile" || name == "Pulumi.yaml" {
        return true;
    }
    let ext = p.extension().and_then(|e| e.to_str()).unwrap_or("").to_ascii_lowercase();
    tool.is_some() || KNOWN_EXT.contains(&ext.as_str())
}

struct FileResult {
    findings: Vec<Finding>,
    diagnostics: Vec<FileDiagnostic>,
}

fn lint_one(path: &str, cfg: &Config) -> FileResult {
    let diag = |line: Option<usize>, message: String| FileDiagnostic {
        path: path.to_string(),
        line,
        message,
    };
    let bytes = match std::fs::read(path) {
        Ok(b) => b,
        Err(e) => {
            return FileResult {
                findings: Vec::new(),
                diagnostics: vec![diag(None, format!("cannot read file: {e}"))],
            }
        }
    };
    let (src, decode_diag) = decode_source(&bytes);
    let mut diagnostics: Vec<FileDiagnostic> = decode_diag.into_iter().map(|d| diag(d.line, d.message)).collect();
    let tool = match cfg.tool.map(Ok).unwrap_or_else(|| detect_tool(path, &src)) {
        Ok(t) => t,
        Err(e) => {
            diagnostics.push(diag(None, e.to_string()));
            return FileResult {
                findings: Vec::new(),
                diagnostics,
            };
        }
    };
    let file = parse(path, &src, tool);
    let ctx = PredicateContext::new(&file, &cfg.advisories, &cfg.lexicons);
    let eval = evaluate_with(&file, &ctx, &cfg.rules);
    let mut all: Vec<Diagnostic> = file.diagnostics.clone();
    all.extend(eval.diagnostics);
    diagnostics.extend(all.into_iter().map(|d| diag(d.line, d.message)));
    FileResult {
        findings: eval.findings,
        diagnostics,
    }
}

/// Lint files in parallel and merge into one deterministic report.
pub fn lint_files(files: &[String], cfg: &Config) -> Result<LintReport> {
    let results: Vec<FileResult> = cfg.pool()?.install(|| files.par_iter().map(|f| lint_one(f, cfg)).collect());
    let mut report = LintReport {
        schema_version: SCHEMA_VERSION,
        files: files.len(),
        ..LintReport::default()
    };
    for r in results {
        report.findings.extend(r.findings);
        report.diagnostics.extend(r.diagnostics);
    }
    sort_findings(&mut report.findings);
    report.diagnostics.sort();
    report.diagnostics.dedup();
    Ok(report)
}

fn paint(s: &str, severity: Severity, color: bool) -> String {
    if !color {
        return s.to_string();
    }
    let code = match severity {
        Severity::High => "31",
        Severity::Medium => "33",
        Severity::Low => "36",
    };
    format!("\x1b[{code}m{s}\x1b[0m")
}

pub fn render_text(report: &LintReport, color: bool) -> String {
    let mut s = String::new();
    for f in &report.findings {
        let tag = paint(&format!("[{}/{}]", f.rule_id, f.cwe), f.severity, color);
        s.push_str(&format!("{}:{}:{} {} {}\n", f.path, f.span.start_line, f.span.start_col, tag, f.message));
    }
    s
}

pub fn cmd_lint(cfg: &Config, inputs: &[String], fail_on: Severity, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32> {
    let files = match collect_files(inputs, cfg.tool) {
        Ok(f) => f,
        Err(e) => {
            writeln!(err, "error: {e:#}")?;
            return Ok(EXIT_ERROR);
        }
    };
    if files.is_empty() {
        writeln!(err, "error: no input files matched")?;
        return Ok(EXIT_ERROR);
    }
    let report = lint_files(&files, cfg)?;
    match cfg.format {
        Format::Text => {
            out.write_all(render_text(&report, cfg.color).as_bytes())?;
            for d in &report.diagnostics {
                match d.line {
                    Some(l) => writeln!(err, "{}:{}: warning: {}", d.path, l, d.message)?,
                    None => writeln!(err, "{}: warning: {}", d.path, d.message)?,
                }
            }
        }
        Format::Json => {
            serde_json::to_writer_pretty(&mut *out, &report)?;
            writeln!(out)?;
        }
    }
    let failing = report.findings.iter().any(|f| f.severity >= fail_on);
    Ok(if failing { EXIT_FINDINGS } else { EXIT_OK })
}
