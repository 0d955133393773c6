//! Sensitive names and the ways their values get exposed.

use std::sync::LazyLock;

use regex::Regex;
use serde::Serialize;

use crate::frontends::{interpolation_spans, NodeKind, ToolKind};

use super::config::inner_range;
use super::scope::{ansible_module, module_args, module_name, unit_of};
use super::{last_segment, Evidence, NodeRef, PredicateContext};

/// True when the key or variable name matches a sensitive-key pattern.
pub fn is_sensitive_data(name: &str, ctx: &PredicateContext<'_>) -> bool {
    ctx.lexicons.sensitive_keys.is_match(name)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExposureKind {
    /// A hardcoded literal value.
    Literal,
    /// An assignment written into a file body.
    PlaintextFile,
    /// A value printed by a debug or log construct.
    Logged,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Exposure {
    pub kind: ExposureKind,
    /// The key or variable name whose value is exposed.
    pub subject: String,
    pub evidence: Evidence,
}

/// Keys whose value becomes the body of a written file.
const CONTENT_KEYS: &[&str] = &["content", "contents", "body", "block", "text", "user_data", "inline_policy"];

/// Constructs that print their arguments.
const LOG_CONSTRUCTS: &[&str] = &["debug", "log", "puts", "print", "notify", "notice", "info", "warn", "warning"];

static ASSIGN_LINE: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"^[ \t]*([A-Za-z_][\w.-]*)[ \t]*[=:][ \t]*(\S.*?)[ \t]*$").unwrap());
static NOT_SECRET_VALUE: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"(?i)^(true|false|yes|no|on|off|null|none|~|-?\d{1,6})$").unwrap()
});

fn is_placeholder_or_ref(value: &str, ctx: &PredicateContext<'_>) -> bool {
    let lex = ctx.lexicons;
    let v = crate::frontends::unquote(value.trim());
    lex.placeholders.is_match(v) || lex.secret_refs.is_match(v)
}

/// The name a scalar's value belongs to: the key, or the variable name for
/// a terraform `default`.
fn subject_of(nr: &NodeRef<'_>) -> Option<String> {
    let key = nr.key()?;
    if nr.node.origin == ToolKind::Terraform && key == "default" {
        if let Some(label) = nr.parent().and_then(|p| p.key()).and_then(|k| k.strip_prefix("variable/")) {
            return Some(label.to_string());
        }
    }
    Some(key.trim_start_matches(['$', '@', ':']).to_string())
}

fn literal_exposure(nr: &NodeRef<'_>, ctx: &PredicateContext<'_>) -> Option<Exposure> {
    let n = nr.node;
    if n.kind != NodeKind::Scalar {
        return None;
    }
    let subject = subject_of(nr)?;
    let src = ctx.source();
    if n.tag.as_deref().is_some_and(|t| t.contains("vault")) {
        return None;
    }
    let (s, e) = inner_range(src, n)?;
    let raw = &src[s..e];
    let value = n.value().unwrap_or(raw).trim();
    if value.is_empty()
        || NOT_SECRET_VALUE.is_match(value)
        || is_placeholder_or_ref(value, ctx)
        || is_placeholder_or_ref(raw, ctx)
        || !interpolation_spans(n, ctx.file).is_empty()
        || value.contains("{{")
        || value.starts_with(['/', '~', '.'])
    {
        return None;
    }
    // Lexical values that are expressions rather than string literals.
    let full = n.value_span.map(|v| v.text(src)).unwrap_or(raw);
    if n.origin.parse_mode() == crate::frontends::ParseMode::Lexical && !looks_literal(full) {
        return None;
    }
    Some(Exposure {
        kind: ExposureKind::Literal,
        subject,
        evidence: ctx.evidence("is_exposed", s, e),
    })
}

/// A quoted string or bare word, as opposed to a call or variable reference.
fn looks_literal(raw: &str) -> bool {
    let t = raw.trim();
    let quoted = t.len() >= 2
        && ((t.starts_with('"') && t.ends_with('"')) || (t.starts_with('\'') && t.ends_with('\'')));
    quoted || t.starts_with("<<")
}

fn content_exposures(nr: &NodeRef<'_>, ctx: &PredicateContext<'_>) -> Vec<Exposure> {
    let n = nr.node;
    let mut out = Vec::new();
    if n.kind != NodeKind::Scalar || !n.key().is_some_and(|k| CONTENT_KEYS.contains(&last_segment(k).as_str())) {
        return out;
    }
    let src = ctx.source();
    let Some((s, e)) = inner_range(src, n) else {
        return out;
    };
    let mut off = s;
    for line in src[s..e].split_inclusive('\n') {
        let body = line.trim_end_matches(['\n', '\r']);
        if let Some(c) = ASSIGN_LINE.captures(body) {
            let k = c.get(1).unwrap();
            let v = c.get(2).unwrap();
            if !is_placeholder_or_ref(v.as_str(), ctx) {
                out.push(Exposure {
                    kind: ExposureKind::PlaintextFile,
                    subject: k.as_str().to_string(),
                    evidence: ctx.evidence("is_exposed", off + k.start(), off + v.end()),
                });
            }
        }
        off += line.len();
    }
    out
}

/// The logging construct enclosing the node, unless logging is suppressed.
fn in_logging_construct(nr: &NodeRef<'_>, ctx: &PredicateContext<'_>) -> bool {
    if ctx.tool() == ToolKind::Ansible {
        let Some(unit) = unit_of(nr, ToolKind::Ansible) else {
            return false;
        };
        let Some(module) = ansible_module(unit.node) else {
            return false;
        };
        let suppressed = unit
            .node
            .child("no_log")
            .and_then(|c| c.value())
            .is_some_and(|v| matches!(v.to_ascii_lowercase().as_str(), "true" | "yes"));
        let inside = std::ptr::eq(module, nr.node) || nr.ancestors.iter().any(|a| std::ptr::eq(*a, module));
        return inside && !suppressed && module.key().is_some_and(|k| module_name(k) == "debug");
    }
    let key_is_log = |k: &str| {
        let k = k.to_ascii_lowercase();
        LOG_CONSTRUCTS.contains(&k.as_str()) || LOG_CONSTRUCTS.contains(&last_segment(&k).as_str())
    };
    if nr.key().is_some_and(key_is_log) {
        return true;
    }
    nr.nearest_keyed_ancestor()
        .and_then(|a| {
            let suppressed = a.child("sensitive").and_then(|s| s.value()).is_some_and(|v| v == "true");
            a.key().map(|k| key_is_log(k) && !suppressed)
        })
        .unwrap_or(false)
}

fn logged_exposures(nr: &NodeRef<'_>, ctx: &PredicateContext<'_>) -> Vec<Exposure> {
    let n = nr.node;
    if !n.is_scalar_like() || !in_logging_construct(nr, ctx) {
        return Vec::new();
    }
    let mut out: Vec<Exposure> = interpolation_spans(n, ctx.file)
        .items
        .into_iter()
        .map(|i| Exposure {
            kind: ExposureKind::Logged,
            subject: i.variable.clone(),
            evidence: ctx.evidence_at("is_exposed", i.span),
        })
        .collect();
    // `debug: var=name` prints a variable by name.
    if ctx.tool() == ToolKind::Ansible {
        let args = if n.key() == Some("var") {
            inner_range(ctx.source(), n)
                .map(|(s, e)| vec![(n.value().unwrap_or("").to_string(), s, e)])
                .unwrap_or_default()
        } else {
            module_args(n, ctx.source())
                .into_iter()
                .filter(|a| a.key == "var")
                .map(|a| (a.value, a.start, a.end))
                .collect()
        };
        for (v, s, e) in args {
            out.push(Exposure {
                kind: ExposureKind::Logged,
                subject: v,
                evidence: ctx.evidence("is_exposed", s, e),
            });
        }
    }
    out
}

/// Every exposure of a value at this node, sensitive or not.
pub fn exposures(nr: &NodeRef<'_>, ctx: &PredicateContext<'_>) -> Vec<Exposure> {
    let mut out = Vec::new();
    out.extend(literal_exposure(nr, ctx));
    out.extend(content_exposures(nr, ctx));
    out.extend(logged_exposures(nr, ctx));
    out
}

/// The first exposure of a sensitive name at this node.
pub fn is_exposed(nr: &NodeRef<'_>, ctx: &PredicateContext<'_>) -> Option<Exposure> {
    exposures(nr, ctx)
        .into_iter()
        .find(|x| is_sensitive_data(&x.subject, ctx))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::predicates::testutil::*;

    #[test]
    fn sensitive_names() {
        let f = file(ToolKind::Ansible, "");
        let c = ctx(&f);
        assert!(is_sensitive_data("aws_secret_access_key", &c));
        assert!(is_sensitive_data("aws_access_key_id", &c));
        assert!(!is_sensitive_data("max_retries", &c));
    }

    #[test]
    fn plaintext_credentials_file() {
        let f = file(
            ToolKind::Ansible,
            "- copy:\n    content: |\n      [default]\n      aws_access_key_id = {{ aws_access_key_id }}\n      aws_secret_access_key = {{ aws_secret_access_key }}\n    dest: /etc/aws/credentials\n",
        );
        let c = ctx(&f);
        let x = is_exposed(&find(&f, "content"), &c).unwrap();
        assert_eq!(x.kind, ExposureKind::PlaintextFile);
        assert_eq!(x.evidence.text, "aws_access_key_id = {{ aws_access_key_id }}");
        assert_eq!(x.evidence.span.start_line, 4);
    }

    #[test]
    fn vault_and_lookups_are_not_exposed() {
        let f = file(ToolKind::Ansible, "password: !vault |\n  $ANSIBLE_VAULT;1.1;AES256\n  6162\n");
        assert!(is_exposed(&find(&f, "password"), &ctx(&f)).is_none());
        let f = file(ToolKind::Ansible, "password: \"{{ lookup('env','DB_PASS') }}\"\n");
        assert!(is_exposed(&find(&f, "password"), &ctx(&f)).is_none());
        let f = file(ToolKind::Ansible, "password: CHANGEME\n");
        assert!(is_exposed(&find(&f, "password"), &ctx(&f)).is_none());
    }

    #[test]
    fn literal_and_logged() {
        let f = file(ToolKind::Ansible, "db_password: hunter2\n");
        assert_eq!(is_exposed(&find(&f, "db_password"), &ctx(&f)).unwrap().kind, ExposureKind::Literal);
        let f = file(ToolKind::Ansible, "- debug:\n    msg: \"{{ api_token }}\"\n");
        assert_eq!(is_exposed(&find(&f, "msg"), &ctx(&f)).unwrap().kind, ExposureKind::Logged);
        let f = file(ToolKind::Ansible, "- debug:\n    msg: \"{{ api_token }}\"\n  no_log: true\n");
        assert!(is_exposed(&find(&f, "msg"), &ctx(&f)).is_none());
        let f = file(ToolKind::Terraform, "variable \"db_password\" {\n  default = \"s3cr3t\"\n}\n");
        assert_eq!(is_exposed(&find(&f, "default"), &ctx(&f)).unwrap().subject, "db_password");
    }

    #[test]
    fn lexical_literals_need_quotes() {
        let f = file(ToolKind::Puppet, "$db_password = 'Sup3rS3cret!'\n");
        let x = is_exposed(&find(&f, "$db_password"), &ctx(&f)).unwrap();
        assert_eq!(x.evidence.text, "Sup3rS3cret!");
        let f = file(ToolKind::Puppet, "$db_password = lookup('db_password')\n");
        assert!(is_exposed(&find(&f, "$db_password"), &ctx(&f)).is_none());
    }
}
