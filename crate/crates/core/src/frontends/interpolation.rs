//! Template-interpolation markers per tool syntax. Scanning works on the raw
//! source text of a node so that spans point at the marker itself.

use std::sync::LazyLock;

use regex::Regex;
use serde::Serialize;

use super::{ConfigNode, Diagnostic, NodeKind, ParsedFile, ToolKind};
use crate::span::Span;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Interpolation {
    pub span: Span,
    /// Leading variable path, e.g. `action` for `{{ action | quote }}`.
    pub variable: String,
    /// Full marker text.
    pub text: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Interpolations {
    pub items: Vec<Interpolation>,
    pub diagnostics: Vec<Diagnostic>,
}

impl Interpolations {
    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn variables(&self) -> Vec<&str> {
        self.items.iter().map(|i| i.variable.as_str()).collect()
    }
}

/// Raw text segments (absolute offset, text) that hold the node's values.
pub(crate) fn value_segments<'a>(node: &'a ConfigNode, source: &'a str) -> Vec<(usize, &'a str)> {
    let mut out = Vec::new();
    for n in node.walk() {
        if !n.is_scalar_like() {
            continue;
        }
        let span = match n.kind {
            NodeKind::RawSpan => n.span,
            _ => match n.value_span {
                Some(vs) => vs,
                None => continue,
            },
        };
        if let Some(text) = source.get(span.start..span.end) {
            out.push((span.start, text));
        }
    }
    out
}

/// Every interpolation occurrence within the scalar text of `node`.
pub fn interpolation_spans(node: &ConfigNode, file: &ParsedFile) -> Interpolations {
    let mut out = Interpolations::default();
    for (base, text) in value_segments(node, &file.source) {
        let found = scan(node.origin, text);
        for (s, e, variable) in found.spans {
            out.items.push(Interpolation {
                span: file.lines.span(base + s, base + e),
                variable,
                text: text[s..e].to_string(),
            });
        }
        for off in found.unbalanced {
            let line = file.lines.position(base + off).0;
            out.diagnostics.push(Diagnostic::new(
                Some(line),
                "unbalanced interpolation delimiter",
            ));
        }
    }
    out.items.sort_by_key(|i| i.span.start);
    out.items.dedup_by_key(|i| i.span.start);
    out
}

#[derive(Debug, Default)]
pub(crate) struct Scan {
    pub spans: Vec<(usize, usize, String)>,
    pub unbalanced: Vec<usize>,
}

static IDENT_PATH: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"[A-Za-z_][A-Za-z0-9_]*(?:\.[A-Za-z_][A-Za-z0-9_]*)*").unwrap());
static TF_VAR: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"\bvar\.[A-Za-z_][A-Za-z0-9_-]*").unwrap());
static RUBY_ENV: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r#"\bENV\[\s*['"]?([A-Za-z0-9_]*)['"]?\s*\]?"#).unwrap());
static PUPPET_VAR: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"\$(?:::)?([a-z_][A-Za-z0-9_]*(?:::[A-Za-z0-9_]+)*)").unwrap());
static PULUMI_ENV: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r#"process\.env(?:\.([A-Za-z_][A-Za-z0-9_]*)|\[\s*['"]([^'"]+)['"]\s*\])"#).unwrap()
});
static PULUMI_CONFIG: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(
        r#"\b[cC]onfig\.(?:get|require)(?:Secret|Number|Boolean|Object|Int|Bool|_secret|_int|_bool)?\(\s*['"]([^'"]*)['"]\s*\)"#,
    )
    .unwrap()
});

const KEYWORDS: &[&str] = &[
    "not", "and", "or", "in", "is", "if", "else", "true", "false", "none", "True", "False", "None",
];

/// Leading variable path of an expression, skipping string literals,
/// function names and filter names.
pub(crate) fn leading_variable(expr: &str) -> String {
    let masked = mask_strings(expr);
    let mut fallback = None;
    for m in IDENT_PATH.find_iter(&masked) {
        let name = m.as_str();
        if KEYWORDS.contains(&name) {
            continue;
        }
        fallback.get_or_insert(name);
        let before = masked[..m.start()].trim_end();
        let after = masked[m.end()..].trim_start();
        if before.ends_with('|') || after.starts_with('(') {
            continue;
        }
        return name.to_string();
    }
    fallback.unwrap_or("").to_string()
}

/// Replace the contents of quoted strings with spaces (same byte length).
fn mask_strings(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    let mut quote: Option<char> = None;
    let mut escaped = false;
    for c in s.chars() {
        match quote {
            Some(q) => {
                if escaped {
                    escaped = false;
                } else if c == '\\' {
                    escaped = true;
                } else if c == q {
                    quote = None;
                    out.push(c);
                    continue;
                }
                for _ in 0..c.len_utf8() {
                    out.push(' ');
                }
            }
            None => {
                if c == '\'' || c == '"' {
                    quote = Some(c);
                }
                out.push(c);
            }
        }
    }
    out
}

fn scan_delimited(text: &str, open: &str, close: &str, out: &mut Scan) {
    let mut pos = 0;
    while let Some(rel) = text[pos..].find(open) {
        let p = pos + rel;
        let inner = p + open.len();
        let close_at = text[inner..].find(close).map(|c| inner + c);
        let next_open = text[inner..].find(open).map(|o| inner + o);
        match close_at {
            Some(c) if next_open.is_none_or(|o| c < o) => {
                let end = c + close.len();
                out.spans
                    .push((p, end, leading_variable(&text[inner..c])));
                pos = end;
            }
            _ => {
                out.unbalanced.push(p);
                pos = inner;
            }
        }
    }
}

/// `${ ... }` with nested braces.
fn scan_dollar_brace(text: &str, out: &mut Scan) {
    let bytes = text.as_bytes();
    let mut i = 0;
    while let Some(rel) = text[i..].find("${") {
        let p = i + rel;
        if p > 0 && bytes[p - 1] == b'$' {
            // `$${` is an escaped literal
            i = p + 2;
            continue;
        }
        let mut depth = 1;
        let mut j = p + 2;
        while j < bytes.len() && depth > 0 {
            match bytes[j] {
                b'{' => depth += 1,
                b'}' => depth -= 1,
                _ => {}
            }
            j += 1;
        }
        if depth == 0 {
            out.spans
                .push((p, j, leading_variable(&text[p + 2..j - 1])));
            i = j;
        } else {
            out.unbalanced.push(p);
            i = p + 2;
        }
    }
}

fn scan_hash_brace(text: &str, out: &mut Scan) {
    let bytes = text.as_bytes();
    let mut i = 0;
    while let Some(rel) = text[i..].find("#{") {
        let p = i + rel;
        let mut depth = 1;
        let mut j = p + 2;
        while j < bytes.len() && depth > 0 {
            match bytes[j] {
                b'{' => depth += 1,
                b'}' => depth -= 1,
                _ => {}
            }
            j += 1;
        }
        if depth == 0 {
            out.spans
                .push((p, j, leading_variable(&text[p + 2..j - 1])));
            i = j;
        } else {
            out.unbalanced.push(p);
            i = p + 2;
        }
    }
}

fn overlaps(spans: &[(usize, usize, String)], s: usize, e: usize) -> bool {
    spans.iter().any(|(a, b, _)| s < *b && *a < e)
}

fn is_single_quoted(text: &str) -> bool {
    let t = text.trim();
    t.len() >= 2 && t.starts_with('\'') && t.ends_with('\'')
}

/// Scan a raw value for the interpolation syntax of `tool`.
pub(crate) fn scan(tool: ToolKind, text: &str) -> Scan {
    let mut out = Scan::default();
    match tool {
        ToolKind::Ansible | ToolKind::Saltstack => scan_delimited(text, "{{", "}}", &mut out),
        ToolKind::Terraform => {
            scan_dollar_brace(text, &mut out);
            let masked = mask_strings(text);
            for m in TF_VAR.find_iter(&masked) {
                if !overlaps(&out.spans, m.start(), m.end()) {
                    out.spans
                        .push((m.start(), m.end(), m.as_str().to_string()));
                }
            }
        }
        ToolKind::Chef | ToolKind::Vagrant | ToolKind::Puppet => {
            let single = is_single_quoted(text);
            if !single {
                scan_hash_brace(text, &mut out);
            }
            for c in RUBY_ENV.captures_iter(text) {
                let m = c.get(0).unwrap();
                if !overlaps(&out.spans, m.start(), m.end()) {
                    out.spans
                        .push((m.start(), m.end(), format!("ENV.{}", &c[1])));
                }
            }
            if tool == ToolKind::Puppet && !single {
                scan_dollar_brace(text, &mut out);
                for c in PUPPET_VAR.captures_iter(text) {
                    let m = c.get(0).unwrap();
                    if !overlaps(&out.spans, m.start(), m.end()) {
                        out.spans.push((m.start(), m.end(), c[1].to_string()));
                    }
                }
            }
        }
        ToolKind::Pulumi => {
            for c in PULUMI_ENV.captures_iter(text) {
                let m = c.get(0).unwrap();
                let name = c.get(1).or(c.get(2)).map(|g| g.as_str()).unwrap_or("");
                out.spans.push((m.start(), m.end(), name.to_string()));
            }
            for c in PULUMI_CONFIG.captures_iter(text) {
                let m = c.get(0).unwrap();
                out.spans.push((m.start(), m.end(), c[1].to_string()));
            }
        }
    }
    out.spans.sort_by_key(|s| s.0);
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn vars(tool: ToolKind, text: &str) -> Vec<String> {
        scan(tool, text).spans.into_iter().map(|s| s.2).collect()
    }

    #[test]
    fn jinja_markers() {
        assert_eq!(vars(ToolKind::Ansible, "apt-get {{ action }}"), ["action"]);
        assert!(vars(ToolKind::Ansible, "apt-get upgrade").is_empty());
        assert_eq!(vars(ToolKind::Ansible, "{{ a }}-{{ b }}"), ["a", "b"]);
        assert_eq!(vars(ToolKind::Ansible, "{{ action | quote }}"), ["action"]);
        assert_eq!(
            vars(
                ToolKind::Ansible,
                "{{ lookup('pipe', 'python3 -c \"' + user_expression + '\"') }}"
            ),
            ["user_expression"]
        );
    }

    #[test]
    fn unbalanced_jinja() {
        let s = scan(ToolKind::Ansible, "{{ a {{ b }}");
        assert_eq!(s.spans.len(), 1);
        assert_eq!(s.unbalanced, [0]);
        let s = scan(ToolKind::Saltstack, "x {{ y");
        assert!(s.spans.is_empty());
        assert_eq!(s.unbalanced.len(), 1);
    }

    #[test]
    fn terraform_refs() {
        assert_eq!(
            vars(ToolKind::Terraform, "\"echo ${var.name} ${local.x}\""),
            ["var.name", "local.x"]
        );
        assert_eq!(vars(ToolKind::Terraform, "var.region"), ["var.region"]);
        assert!(vars(ToolKind::Terraform, "\"$${literal}\"").is_empty());
    }

    #[test]
    fn ruby_and_puppet_refs() {
        assert_eq!(vars(ToolKind::Chef, "\"rm -rf #{node['dir']}\""), ["node"]);
        assert_eq!(vars(ToolKind::Vagrant, "ENV['TOKEN']"), ["ENV.TOKEN"]);
        assert_eq!(vars(ToolKind::Puppet, "\"rm ${dir} $file\""), ["dir", "file"]);
        assert!(vars(ToolKind::Puppet, "'rm $file'").is_empty());
    }

    #[test]
    fn pulumi_lookups() {
        assert_eq!(vars(ToolKind::Pulumi, "process.env.TOKEN"), ["TOKEN"]);
        assert_eq!(
            vars(ToolKind::Pulumi, "config.requireSecret(\"dbPassword\")"),
            ["dbPassword"]
        );
    }
}
