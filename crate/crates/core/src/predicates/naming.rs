//! Author-chosen resource names and naming-convention checks.

use std::sync::LazyLock;

use regex::Regex;
use serde::Serialize;

use crate::frontends::{NodeKind, ToolKind};

use super::config::inner_range;
use super::scope::{ansible_module, module_args, module_name, unit_of};
use super::{Evidence, NodeRef, PredicateContext};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum NamingReason {
    Vague,
    TooShort,
    MixedStyle,
}

impl NamingReason {
    pub fn describe(self) -> &'static str {
        match self {
            NamingReason::Vague => "non-descriptive name",
            NamingReason::TooShort => "name shorter than 3 characters",
            NamingReason::MixedStyle => "name mixes camelCase and snake_case",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NamedResource {
    /// The checked name (basename without extension for paths).
    pub name: String,
    pub evidence: Evidence,
}

/// Reduce a name to the part an author chose: sigils dropped, and for a
/// path the basename without extension.
fn core_name(name: &str) -> &str {
    let n = name.trim().trim_start_matches(['$', '@', ':']);
    let n = n.trim_end_matches('/');
    let base = n.rsplit('/').next().unwrap_or(n);
    match base.rfind('.') {
        Some(i) if i > 0 && name.contains('/') => &base[..i],
        _ => base,
    }
}

/// The naming problem with `name`, if any.
pub fn follows_nonstandard_convention(name: &str, ctx: &PredicateContext<'_>) -> Option<NamingReason> {
    let n = core_name(name);
    if n.is_empty() {
        return None;
    }
    if ctx.lexicons.vague_names.contains(n) {
        return Some(NamingReason::Vague);
    }
    if n.chars().count() < 3 {
        return Some(NamingReason::TooShort);
    }
    let has_sep = n.contains(['_', '-']);
    let has_hump = n
        .as_bytes()
        .windows(2)
        .any(|w| w[0].is_ascii_lowercase() && w[1].is_ascii_uppercase());
    (has_sep && has_hump).then_some(NamingReason::MixedStyle)
}

static SIMPLE_IDENT: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"^[$@]{0,2}[A-Za-z_][A-Za-z0-9_]*$").unwrap());

/// Evidence for the core part of a name found at `start..end`.
fn name_evidence(ctx: &PredicateContext<'_>, start: usize, end: usize) -> Option<NamedResource> {
    let text = ctx.source().get(start..end)?;
    let core = core_name(text);
    if core.is_empty() {
        return None;
    }
    let off = text.rfind(core)?;
    Some(NamedResource {
        name: core.to_string(),
        evidence: ctx.evidence("follows_nonstandard_convention", start + off, start + off + core.len()),
    })
}

fn value_name(ctx: &PredicateContext<'_>, nr: &NodeRef<'_>) -> Option<NamedResource> {
    let n = nr.node;
    if n.kind != NodeKind::Scalar || n.value().is_none_or(|v| v.contains("{{") || v.contains("${") || v.contains("#{")) {
        return None;
    }
    let (s, e) = inner_range(ctx.source(), n)?;
    name_evidence(ctx, s, e)
}

/// Position of `word` inside the node's own text, as a whole token.
fn word_in_node(ctx: &PredicateContext<'_>, nr: &NodeRef<'_>, word: &str) -> Option<NamedResource> {
    let span = nr.node.span;
    let text = span.text(ctx.source());
    let re = Regex::new(&format!(r"(^|[^\w$@]){}($|[^\w])", regex::escape(word))).ok()?;
    let m = re.find(text)?;
    let lead = m.as_str().find(word)?;
    let s = span.start + m.start() + lead;
    name_evidence(ctx, s, s + word.len())
}

/// A node that introduces an author-chosen name, with the name's location.
pub fn named_resource(nr: &NodeRef<'_>, ctx: &PredicateContext<'_>) -> Option<NamedResource> {
    match ctx.tool() {
        ToolKind::Ansible => ansible_name(nr, ctx),
        ToolKind::Saltstack => {
            let depth = if ctx.file.root.kind == NodeKind::Sequence { 2 } else { 1 };
            let key = nr.key()?;
            if nr.ancestors.len() != depth || key.chars().any(char::is_whitespace) || key.contains("{{") {
                return None;
            }
            word_in_node(ctx, nr, key)
        }
        ToolKind::Terraform => {
            if nr.ancestors.len() != 1 || nr.node.kind != NodeKind::Mapping {
                return None;
            }
            let key = nr.key()?;
            let mut parts = key.split('/');
            let kind = parts.next()?;
            if !matches!(kind, "resource" | "data" | "module" | "variable" | "output") {
                return None;
            }
            let label = parts.last()?;
            let header = nr.node.span.text(ctx.source()).lines().next()?;
            let off = header.rfind(&format!("\"{label}\""))? + 1;
            let s = nr.node.span.start + off;
            name_evidence(ctx, s, s + label.len())
        }
        _ => lexical_name(nr, ctx),
    }
}

fn ansible_name(nr: &NodeRef<'_>, ctx: &PredicateContext<'_>) -> Option<NamedResource> {
    let n = nr.node;
    let key = n.key()?;
    let parent = nr.parent()?;
    // Variables defined under `vars:` or by `set_fact`.
    let parent_key = parent.key();
    if parent_key == Some("vars") || parent_key.is_some_and(|k| module_name(k) == "set_fact") {
        if key == "cacheable" {
            return None;
        }
        let (s, e) = super::config::key_range(ctx.source(), n)?;
        return name_evidence(ctx, s, e);
    }
    if key == "register" && unit_of(nr, ToolKind::Ansible).is_some_and(|u| std::ptr::eq(u.node, parent)) {
        return value_name(ctx, nr);
    }
    // Literal file names given to a module.
    let unit = unit_of(nr, ToolKind::Ansible)?;
    let module = ansible_module(unit.node)?;
    if matches!(key, "path" | "dest") && std::ptr::eq(module, parent) {
        return value_name(ctx, nr).filter(|_| n.value().is_some_and(|v| v.contains('/')));
    }
    if std::ptr::eq(module, n) && n.kind == NodeKind::Scalar {
        let arg = module_args(n, ctx.source())
            .into_iter()
            .find(|a| matches!(a.key.as_str(), "path" | "dest") && a.value.contains('/') && !a.value.contains("{{"))?;
        let (s, e) = super::config::trim_quotes(ctx.source(), arg.start, arg.end);
        return name_evidence(ctx, s, e);
    }
    None
}

const FILE_RESOURCES: &[&str] = &["file", "template", "cookbook_file", "directory", "remote_file"];

fn lexical_name(nr: &NodeRef<'_>, ctx: &PredicateContext<'_>) -> Option<NamedResource> {
    let n = nr.node;
    let key = n.key()?;
    let parent_key = nr.parent().and_then(|p| p.key());
    match key {
        "title" => {
            let pk = parent_key?;
            if FILE_RESOURCES.contains(&pk) {
                return value_name(ctx, nr).filter(|r| !r.name.is_empty());
            }
            if matches!(pk, "class" | "define" | "config.vm.define") || ctx.tool() == ToolKind::Pulumi {
                return value_name(ctx, nr);
            }
            None
        }
        "binding" if ctx.tool() == ToolKind::Pulumi => value_name(ctx, nr),
        _ if key.ends_with(".vm.hostname") => value_name(ctx, nr),
        _ if n.kind == NodeKind::Scalar && SIMPLE_IDENT.is_match(key) => {
            // Only assignments introduce names.
            let text = n.span.text(ctx.source());
            let pos = text.find(key)?;
            let after = text[pos + key.len()..].trim_start();
            let assign = after.starts_with('=') && !after.starts_with("==") && !after.starts_with("=>")
                || after.starts_with("||=");
            if assign {
                word_in_node(ctx, nr, key)
            } else {
                None
            }
        }
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::predicates::{node_refs, testutil::*};

    fn names(tool: ToolKind, src: &str) -> Vec<String> {
        let f = file(tool, src);
        let c = ctx(&f);
        node_refs(&f.root)
            .iter()
            .filter_map(|n| named_resource(n, &c))
            .map(|r| {
                assert_eq!(r.evidence.text, r.name);
                r.name
            })
            .collect()
    }

    #[test]
    fn convention_checks() {
        let f = file(ToolKind::Ansible, "");
        let c = ctx(&f);
        assert_eq!(follows_nonstandard_convention("/etc/doitnow.txt", &c), Some(NamingReason::Vague));
        assert_eq!(follows_nonstandard_convention("configure_ssh_daemon", &c), None);
        assert_eq!(follows_nonstandard_convention("xY_z", &c), Some(NamingReason::MixedStyle));
        assert_eq!(follows_nonstandard_convention("db", &c), Some(NamingReason::TooShort));
        assert_eq!(follows_nonstandard_convention("AWS_SECRET", &c), None);
        assert_eq!(follows_nonstandard_convention("webServer", &c), None);
    }

    #[test]
    fn ansible_names() {
        let n = names(
            ToolKind::Ansible,
            "- file:\n    path: /etc/doitnow.txt\n    state: touch\n  register: out\n- vars:\n    user_expression: x\n  set_fact:\n    result: y\n",
        );
        assert_eq!(n, ["doitnow", "out", "user_expression", "result"]);
    }

    #[test]
    fn other_tool_names() {
        assert_eq!(names(ToolKind::Terraform, "resource \"aws_instance\" \"foo\" {\n}\n"), ["foo"]);
        assert_eq!(names(ToolKind::Saltstack, "nginx:\n  pkg.installed: []\n"), ["nginx"]);
        assert_eq!(names(ToolKind::Puppet, "$tmp = 'x'\nfile { '/etc/app.conf':\n  ensure => file,\n}\n"), ["tmp", "app"]);
        assert_eq!(names(ToolKind::Chef, "x = 1\nconfig.vm.box = 'a'\n"), ["x"]);
    }
}
