//! Interpolated input, command and interpreter sinks, sanitization and
//! path-valued nodes.

use std::sync::LazyLock;

use regex::Regex;
use serde::Serialize;

use crate::frontends::{interpolation_spans, ConfigNode, Diagnostic, Interpolation, NodeKind, ToolKind};

use super::config::key_range;
use super::scope::{ansible_module, module_args, module_name, sibling_tasks, unit_of};
use super::{last_segment, Evidence, NodeRef, PredicateContext};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UserInput {
    pub interpolations: Vec<Interpolation>,
    pub diagnostics: Vec<Diagnostic>,
}

impl UserInput {
    pub fn variables(&self) -> Vec<&str> {
        self.interpolations.iter().map(|i| i.variable.as_str()).collect()
    }
}

fn is_trusted(var: &str, ctx: &PredicateContext<'_>) -> bool {
    ctx.lexicons.trusted_refs.words().iter().any(|t| {
        var.eq_ignore_ascii_case(t)
            || (var.len() > t.len() && var[..t.len()].eq_ignore_ascii_case(t) && var.as_bytes()[t.len()] == b'.')
    })
}

/// Interpolated variables and environment/config lookups within the node,
/// excluding references that cannot carry outside input.
pub fn is_user_input(nr: &NodeRef<'_>, ctx: &PredicateContext<'_>) -> Option<UserInput> {
    let found = interpolation_spans(nr.node, ctx.file);
    let interpolations: Vec<Interpolation> = found
        .items
        .into_iter()
        .filter(|i| !is_trusted(&i.variable, ctx))
        .collect();
    (!interpolations.is_empty()).then_some(UserInput {
        interpolations,
        diagnostics: found.diagnostics,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SinkKind {
    OsCommand,
    Interpreter,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Sink {
    pub kind: SinkKind,
    pub evidence: Evidence,
}

/// Keys whose values describe rather than execute.
const DOC_KEYS: &[&str] = &["name", "msg", "description", "comment", "fail_msg", "success_msg", "that"];

fn is_sink_name(key: &str, ctx: &PredicateContext<'_>) -> bool {
    let sinks = &ctx.lexicons.command_sinks;
    sinks.contains(key) || sinks.contains(&last_segment(key)) || sinks.contains(module_name(key))
}

/// For ansible, a sink key only counts in module position.
fn at_module_position(nr: &NodeRef<'_>, node: &ConfigNode) -> bool {
    if nr.node.origin != ToolKind::Ansible {
        return true;
    }
    unit_of(nr, ToolKind::Ansible)
        .and_then(|u| ansible_module(u.node))
        .is_some_and(|m| std::ptr::eq(m, node))
}

/// Classify the node as an OS-command or interpreter sink. Interpreter
/// patterns in the value take precedence over the key.
pub fn is_command_sink(nr: &NodeRef<'_>, ctx: &PredicateContext<'_>) -> Option<Sink> {
    let n = nr.node;
    if !n.is_scalar_like() {
        return None;
    }
    let src = ctx.source();
    let key = n.key();
    if !key.is_some_and(|k| DOC_KEYS.contains(&k.to_ascii_lowercase().as_str()) && !is_arg_of_sink(nr, ctx)) {
        for (base, text) in crate::frontends::interpolation::value_segments(n, src) {
            if let Some((s, e)) = ctx.lexicons.code_sinks.find(text) {
                return Some(Sink {
                    kind: SinkKind::Interpreter,
                    evidence: ctx.evidence("is_command_sink", base + s, base + e),
                });
            }
        }
    }
    let key = key?;
    if is_sink_name(key, ctx) && at_module_position(nr, n) {
        let (s, e) = key_range(src, n)?;
        return Some(Sink {
            kind: SinkKind::OsCommand,
            evidence: ctx.evidence("is_command_sink", s, e),
        });
    }
    if is_arg_of_sink(nr, ctx) {
        let anc = nr.nearest_keyed_ancestor()?;
        let (s, e) = key_range(src, anc)?;
        return Some(Sink {
            kind: SinkKind::OsCommand,
            evidence: ctx.evidence("is_command_sink", s, e),
        });
    }
    None
}

/// The node is a command argument (`cmd`, `name`, `title`, ...) of a sink construct.
fn is_arg_of_sink(nr: &NodeRef<'_>, ctx: &PredicateContext<'_>) -> bool {
    let Some(key) = nr.key() else { return false };
    if !ctx.lexicons.command_arg_keys.contains(key) {
        return false;
    }
    let Some(anc) = nr.nearest_keyed_ancestor() else {
        return false;
    };
    let Some(anc_key) = anc.key() else { return false };
    if !is_sink_name(anc_key, ctx) {
        return false;
    }
    // A resource title is a label when the block names its command separately.
    if key == "title" && anc.child("command").is_some() {
        return false;
    }
    if ctx.tool() == ToolKind::Ansible {
        let mut parent = NodeRef::root(anc);
        parent.ancestors = nr.ancestors[..nr.ancestors.iter().position(|a| std::ptr::eq(*a, anc)).unwrap_or(0)].to_vec();
        return at_module_position(&parent, anc);
    }
    true
}

static TEMPLATE: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"\{\{.*?\}\}|\$\{[^}]*\}|#\{[^}]*\}|\$\{\{.*?\}\}").unwrap());
static CALL_BEFORE: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"([A-Za-z_][\w.:]*)\s*\(\s*$").unwrap());
static WHEN_TEST: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"\bis\s+(match|regex|search|number|integer|version)\b|\bin\s*\[|\|\s*(int|bool|float)\b|\bin\s+[a-z_]+\b")
        .unwrap()
});

/// The interpolation is wrapped in a sanitizing call (`shellescape(#{x})`).
fn wrapped_in_sanitizer(i: &Interpolation, ctx: &PredicateContext<'_>) -> bool {
    let src = ctx.source();
    let line_start = src[..i.span.start].rfind('\n').map(|p| p + 1).unwrap_or(0);
    let prefix = &src[line_start..i.span.start];
    CALL_BEFORE
        .captures(prefix)
        .is_some_and(|c| ctx.lexicons.sanitizers.is_match(&format!("{}(", &c[1])))
}

fn mentions(text: &str, var: &str) -> bool {
    let root = var.split(['.', '[']).next().unwrap_or(var);
    if root.is_empty() {
        return false;
    }
    Regex::new(&format!(r"(^|[^\w]){}($|[^\w])", regex::escape(root)))
        .map(|re| re.is_match(text))
        .unwrap_or(false)
}

/// A validation construct in scope names the variable.
fn validated(var: &str, nr: &NodeRef<'_>, ctx: &PredicateContext<'_>) -> bool {
    let src = ctx.source();
    match ctx.tool() {
        ToolKind::Ansible => {
            let Some(unit) = unit_of(nr, ToolKind::Ansible) else {
                return false;
            };
            if let Some(when) = unit.node.child("when") {
                let t = when.span.text(src);
                if mentions(t, var) && WHEN_TEST.is_match(t) {
                    return true;
                }
            }
            sibling_tasks(nr, unit).iter().any(|t| {
                ansible_module(t)
                    .and_then(|m| m.key())
                    .is_some_and(|k| module_name(k) == "assert")
                    && mentions(t.span.text(src), var)
            })
        }
        ToolKind::Puppet => {
            let needle = format!("${}", var.trim_start_matches('$'));
            ctx.file.root.walk().iter().any(|n| {
                n.key().is_some_and(|k| k.starts_with("validate_") || k == "assert_type")
                    && n.span.text(src).contains(&needle)
            })
        }
        ToolKind::Terraform => {
            let Some(name) = var.strip_prefix("var.") else {
                return false;
            };
            let name = name.split('.').next().unwrap_or(name);
            ctx.file.root.children.iter().any(|b| {
                b.key() == Some(&format!("variable/{name}"))
                    && b.children.iter().any(|c| c.key().is_some_and(|k| k.starts_with("validation")))
            })
        }
        _ => false,
    }
}

/// Interpolations in the node that no sanitizer or validation construct covers.
pub fn unsanitized_inputs(nr: &NodeRef<'_>, ctx: &PredicateContext<'_>) -> Vec<Interpolation> {
    let Some(input) = is_user_input(nr, ctx) else {
        return Vec::new();
    };
    input
        .interpolations
        .into_iter()
        .filter(|i| {
            !ctx.lexicons.sanitizers.is_match(&i.text)
                && !wrapped_in_sanitizer(i, ctx)
                && !validated(&i.variable, nr, ctx)
        })
        .collect()
}

pub fn is_unsanitized(nr: &NodeRef<'_>, ctx: &PredicateContext<'_>) -> bool {
    !unsanitized_inputs(nr, ctx).is_empty()
}

/// True when the interpolation sits inside shell arithmetic `$(( ))`, where
/// it cannot introduce new command words.
pub fn in_arithmetic_context(i: &Interpolation, nr: &NodeRef<'_>, ctx: &PredicateContext<'_>) -> bool {
    let src = ctx.source();
    let start = nr.node.span.start.min(i.span.start);
    let before = &src[start..i.span.start];
    let opens = before.matches("$((").count();
    let closes = before.matches("))").count();
    opens > closes
}

/// True when the node names a file: a path-like key, a path-shaped value,
/// or a free-form module argument under a path key that holds input.
pub fn is_file_path(nr: &NodeRef<'_>, ctx: &PredicateContext<'_>) -> bool {
    let n = nr.node;
    if n.kind != NodeKind::Scalar && n.kind != NodeKind::RawSpan {
        return false;
    }
    if n.key().is_some_and(|k| ctx.lexicons.path_keys.contains(&last_segment(k))) {
        return true;
    }
    let value = n.value().unwrap_or("").trim();
    let masked = TEMPLATE.replace_all(value, "X");
    if !masked.is_empty() && masked.contains('/') && !masked.contains("://") && !masked.chars().any(char::is_whitespace) {
        return true;
    }
    if ctx.tool() == ToolKind::Ansible && at_module_position(nr, n) && n.kind == NodeKind::Scalar {
        return module_args(n, ctx.source())
            .iter()
            .any(|a| ctx.lexicons.path_keys.contains(&a.key) && TEMPLATE.is_match(&a.value));
    }
    false
}
