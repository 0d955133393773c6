//! Per-tool notion of the enclosing unit (task, state, block, resource) and
//! helpers to read module arguments inside it.

use crate::frontends::{ConfigNode, NodeKind, ToolKind};

use super::{NodeRef, PredicateContext};

/// Sequence keys whose items are ansible tasks.
pub const TASK_LISTS: &[&str] = &[
    "tasks", "pre_tasks", "post_tasks", "handlers", "block", "rescue", "always",
];

/// Task-level keywords that are not modules.
const TASK_KEYWORDS: &[&str] = &[
    "name", "hosts", "vars", "vars_files", "when", "become", "become_user", "become_method",
    "register", "tags", "loop", "loop_control", "notify", "listen", "no_log", "ignore_errors",
    "changed_when", "failed_when", "args", "environment", "delegate_to", "run_once", "until",
    "retries", "delay", "block", "rescue", "always", "check_mode", "diff", "any_errors_fatal",
    "gather_facts", "roles", "tasks", "handlers", "pre_tasks", "post_tasks", "connection",
    "serial", "strategy", "timeout", "throttle", "debugger", "module_defaults", "collections",
    "remote_user", "local_action", "action", "async", "poll", "ignore_unreachable",
];

/// The enclosing unit and its position in the node path.
#[derive(Debug, Clone, Copy)]
pub struct Unit<'a> {
    pub node: &'a ConfigNode,
    pub depth: usize,
}

/// True when `m` (at `path[i]`) is an ansible task.
fn is_ansible_task(path: &[&ConfigNode], i: usize) -> bool {
    let m = path[i];
    if m.kind != NodeKind::Mapping || i == 0 {
        return false;
    }
    let parent = path[i - 1];
    if parent.kind != NodeKind::Sequence {
        return false;
    }
    let listed = match parent.key() {
        Some(k) => TASK_LISTS.contains(&k),
        None => i == 1 || (i == 2 && path[0].kind == NodeKind::Sequence),
    };
    listed && m.child("hosts").is_none() && m.child("import_playbook").is_none()
}

/// Roots of each document: the root mapping, or each mapping of a root sequence.
fn doc_depth(path: &[&ConfigNode]) -> usize {
    if path[0].kind == NodeKind::Sequence {
        1
    } else {
        0
    }
}

/// Innermost unit enclosing (or equal to) the node.
pub fn unit_of<'a>(nr: &NodeRef<'a>, tool: ToolKind) -> Option<Unit<'a>> {
    let path = nr.path();
    match tool {
        ToolKind::Ansible => {
            (0..path.len())
                .rev()
                .find(|&i| is_ansible_task(&path, i))
                .or_else(|| (0..path.len()).rev().find(|&i| is_play(path[i]) && i > 0))
                .map(|depth| Unit {
                    node: path[depth],
                    depth,
                })
        }
        ToolKind::Saltstack => {
            let d = doc_depth(&path) + 1;
            path.get(d).map(|n| Unit { node: n, depth: d })
        }
        ToolKind::Terraform if path[0].kind == NodeKind::Mapping && path.len() > 1 => {
            Some(Unit {
                node: path[1],
                depth: 1,
            })
        }
        _ => (1..path.len())
            .rev()
            .find(|&i| path[i].kind == NodeKind::Mapping)
            .map(|depth| Unit {
                node: path[depth],
                depth,
            }),
    }
}

pub fn is_play(m: &ConfigNode) -> bool {
    m.kind == NodeKind::Mapping && (m.child("hosts").is_some() || m.child("import_playbook").is_some())
}

/// Module name with any collection prefix removed (`ansible.builtin.copy` -> `copy`).
pub fn module_name(key: &str) -> &str {
    key.rsplit('.').next().unwrap_or(key)
}

/// The module entry of an ansible task.
pub fn ansible_module(task: &ConfigNode) -> Option<&ConfigNode> {
    task.children
        .iter()
        .find(|c| c.key().is_some_and(|k| !TASK_KEYWORDS.contains(&k) && !k.starts_with("with_")))
}

/// A module argument with the byte range of its value.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Arg<'a> {
    pub key: String,
    pub value: String,
    pub start: usize,
    pub end: usize,
    /// The node holding the argument (the module node for free-form args).
    pub node: &'a ConfigNode,
}

/// Arguments of a module node: mapping children, or `k=v` pairs of a
/// free-form scalar.
pub fn module_args<'a>(module: &'a ConfigNode, src: &str) -> Vec<Arg<'a>> {
    match module.kind {
        NodeKind::Mapping => module
            .children
            .iter()
            .filter(|c| c.kind == NodeKind::Scalar)
            .filter_map(|c| {
                let vs = c.value_span?;
                Some(Arg {
                    key: c.key()?.to_string(),
                    value: c.value().unwrap_or("").to_string(),
                    start: vs.start,
                    end: vs.end,
                    node: c,
                })
            })
            .collect(),
        NodeKind::Scalar => {
            let Some(vs) = module.value_span else {
                return Vec::new();
            };
            let raw = vs.text(src);
            let inner = crate::frontends::unquote(raw);
            let base = vs.start + (raw.len() - inner.len()) / 2;
            free_form(inner)
                .into_iter()
                .map(|(k, s, e)| {
                    let value = crate::frontends::unquote(&inner[s..e]).to_string();
                    Arg {
                        key: k,
                        value,
                        start: base + s,
                        end: base + e,
                        node: module,
                    }
                })
                .collect()
        }
        _ => Vec::new(),
    }
}

/// `key=value` tokens of a free-form argument string: (key, value start, value end).
fn free_form(text: &str) -> Vec<(String, usize, usize)> {
    let b = text.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < b.len() {
        while i < b.len() && b[i].is_ascii_whitespace() {
            i += 1;
        }
        let start = i;
        let mut quote = None;
        let mut brace = 0usize;
        while i < b.len() {
            let c = b[i];
            match quote {
                Some(q) if c == q => quote = None,
                Some(_) => {}
                None if c == b'"' || c == b'\'' => quote = Some(c),
                None if b[i..].starts_with(b"{{") => {
                    brace += 1;
                    i += 1;
                }
                None if b[i..].starts_with(b"}}") && brace > 0 => {
                    brace -= 1;
                    i += 1;
                }
                None if c.is_ascii_whitespace() && brace == 0 => break,
                None => {}
            }
            i += 1;
        }
        let tok = &text[start..i.min(b.len())];
        if let Some(eq) = tok.find('=') {
            let k = &tok[..eq];
            if !k.is_empty() && k.bytes().all(|c| c.is_ascii_alphanumeric() || c == b'_') {
                out.push((k.to_string(), start + eq + 1, start + tok.len()));
            }
        }
    }
    out
}

/// Keyed sibling tasks of the task at `unit` (the task list it belongs to).
pub fn sibling_tasks<'a>(nr: &NodeRef<'a>, unit: Unit<'a>) -> Vec<&'a ConfigNode> {
    let path = nr.path();
    match unit.depth.checked_sub(1).map(|d| path[d]) {
        Some(list) if list.kind == NodeKind::Sequence => list.children.iter().collect(),
        _ => Vec::new(),
    }
}

/// State function entries of a salt state (`pkg.installed`, `file.managed`).
pub fn salt_functions(state: &ConfigNode) -> impl Iterator<Item = &ConfigNode> {
    state
        .children
        .iter()
        .filter(|c| c.key().is_some_and(|k| k.contains('.')))
}

/// Salt state arguments: children of the mapping items in a function's list.
pub fn salt_args(function: &ConfigNode) -> Vec<&ConfigNode> {
    function
        .children
        .iter()
        .flat_map(|item| match item.kind {
            NodeKind::Mapping => item.children.iter().collect::<Vec<_>>(),
            _ => Vec::new(),
        })
        .collect()
}

/// Names of constructs the node participates in: the ansible module, salt
/// functions, or the lexical/terraform unit key.
pub fn construct_names(nr: &NodeRef<'_>, ctx: &PredicateContext<'_>) -> Vec<String> {
    let Some(unit) = unit_of(nr, ctx.tool()) else {
        return Vec::new();
    };
    match ctx.tool() {
        ToolKind::Ansible => ansible_module(unit.node)
            .and_then(|m| m.key())
            .map(|k| vec![module_name(k).to_string()])
            .unwrap_or_default(),
        ToolKind::Saltstack => salt_functions(unit.node)
            .filter_map(|f| f.key().map(str::to_string))
            .collect(),
        ToolKind::Terraform => unit
            .node
            .key()
            .map(|k| k.split('/').take(2).map(str::to_string).collect())
            .unwrap_or_default(),
        _ => unit.node.key().map(|k| vec![k.to_string()]).unwrap_or_default(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::predicates::testutil::*;

    #[test]
    fn ansible_units_and_modules() {
        let f = file(
            ToolKind::Ansible,
            "- hosts: all\n  tasks:\n    - name: t\n      apt: name=openssl=1.0.1 state=present\n    - block:\n        - shell: echo hi\n",
        );
        let apt = find(&f, "apt");
        let u = unit_of(&apt, ToolKind::Ansible).unwrap();
        assert_eq!(ansible_module(u.node).unwrap().key(), Some("apt"));
        let args = module_args(apt.node, &f.source);
        assert_eq!(args[0].key, "name");
        assert_eq!(args[0].value, "openssl=1.0.1");
        assert_eq!(&f.source[args[0].start..args[0].end], "openssl=1.0.1");
        let sh = find(&f, "shell");
        let u = unit_of(&sh, ToolKind::Ansible).unwrap();
        assert_eq!(ansible_module(u.node).unwrap().key(), Some("shell"));
    }

    #[test]
    fn free_form_keeps_templates_together() {
        let v = free_form("msg={{ a | b }} x='y z'");
        assert_eq!(v.len(), 2);
        assert_eq!(v[0].0, "msg");
        assert_eq!(v[1].0, "x");
    }

    #[test]
    fn salt_and_terraform_units() {
        let f = file(ToolKind::Saltstack, "nginx:\n  pkg.installed:\n    - version: 1.0\n");
        let v = find(&f, "version");
        assert_eq!(unit_of(&v, ToolKind::Saltstack).unwrap().node.key(), Some("nginx"));
        let f = file(ToolKind::Terraform, "module \"m\" {\n  source = \"x\"\n}\n");
        let s = find(&f, "source");
        assert_eq!(unit_of(&s, ToolKind::Terraform).unwrap().node.key(), Some("module/m"));
    }
}
