use crate::frontends::{ConfigNode, NodeKind, ToolKind};

use super::scope::{self, ansible_module, construct_names, is_play, module_args, unit_of};
use super::{last_segment, Evidence, NodeRef, PredicateContext};

/// Keys whose values name the file a construct manages, besides `path_keys`.
const TARGET_KEYS: &[&str] = &["title", "name", "filename"];

/// Byte range of a scalar's value without one layer of quotes.
pub(crate) fn inner_range(src: &str, node: &ConfigNode) -> Option<(usize, usize)> {
    let vs = match node.kind {
        NodeKind::RawSpan => node.span,
        _ => node.value_span?,
    };
    let raw = src.get(vs.start..vs.end)?;
    let inner = crate::frontends::unquote(raw);
    let off = if inner.len() == raw.len() { 0 } else { 1 };
    Some((vs.start + off, vs.start + off + inner.len()))
}

/// True when the node's unit manages a configuration target, with evidence
/// pointing at the path value or the construct key.
pub fn is_config_file(nr: &NodeRef<'_>, ctx: &PredicateContext<'_>) -> Option<Evidence> {
    let lex = ctx.lexicons;
    let src = ctx.source();
    let unit = unit_of(nr, ctx.tool());
    if ctx.tool() == ToolKind::Ansible && unit.is_some_and(|u| is_play(u.node)) {
        return None;
    }
    let scope_node = unit.map(|u| u.node).unwrap_or(nr.node);

    // A path value under a path-like key.
    for n in scope_node.walk() {
        if n.kind != NodeKind::Scalar {
            continue;
        }
        let Some(key) = n.key() else { continue };
        let k = last_segment(key);
        if ctx.tool() == ToolKind::Ansible
            && ansible_module(scope_node).is_some_and(|m| std::ptr::eq(m, n))
        {
            for arg in module_args(n, src) {
                if lex.path_keys.contains(&arg.key) && lex.config_paths.is_match(&arg.value) {
                    let (s, e) = trim_quotes(src, arg.start, arg.end);
                    return Some(ctx.evidence("is_config_file", s, e));
                }
            }
            continue;
        }
        if !(lex.path_keys.contains(&k) || TARGET_KEYS.contains(&k.as_str())) {
            continue;
        }
        if let Some((s, e)) = inner_range(src, n) {
            if lex.config_paths.is_match(&src[s..e]) {
                return Some(ctx.evidence("is_config_file", s, e));
            }
        }
    }

    // A configuration-editing construct.
    if construct_names(nr, ctx)
        .iter()
        .any(|c| lex.config_constructs.contains(c))
    {
        let key_node = match ctx.tool() {
            ToolKind::Ansible => ansible_module(scope_node),
            ToolKind::Saltstack => scope::salt_functions(scope_node)
                .find(|f| f.key().is_some_and(|k| lex.config_constructs.contains(k))),
            _ => Some(scope_node),
        }?;
        let (s, e) = key_range(src, key_node)?;
        return Some(ctx.evidence("is_config_file", s, e));
    }
    None
}

/// Narrow a quoted byte range to its contents.
pub(crate) fn trim_quotes(src: &str, s: usize, e: usize) -> (usize, usize) {
    let raw = &src[s..e];
    let inner = crate::frontends::unquote(raw);
    if inner.len() == raw.len() {
        (s, e)
    } else {
        (s + 1, e - 1)
    }
}

/// Byte range of a node's key token when its text starts with it.
pub(crate) fn key_range(src: &str, node: &ConfigNode) -> Option<(usize, usize)> {
    NodeRef::root(node).key_span(src)
}

/// True when a scalar within the node matches a dangerous setting. The
/// scalar is searched together with its key so `key: value` patterns apply.
pub fn is_sensitive_setting(nr: &NodeRef<'_>, ctx: &PredicateContext<'_>) -> Option<Evidence> {
    let src = ctx.source();
    for n in nr.node.walk() {
        if !n.is_scalar_like() {
            continue;
        }
        let (base, text) = (n.span.start, n.span.text(src));
        if let Some((s, e)) = ctx.lexicons.dangerous_settings.find(text) {
            return Some(ctx.evidence("is_sensitive_setting", base + s, base + e));
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::predicates::testutil::*;

    const SSH_ROOT_LOGIN: &str = "- name: ssh\n  lineinfile:\n    path: /etc/ssh/sshd_config\n    regexp: '^PermitRootLogin'\n    line: 'PermitRootLogin yes'\n";

    #[test]
    fn lineinfile_is_config() {
        let f = file(ToolKind::Ansible, SSH_ROOT_LOGIN);
        let c = ctx(&f);
        let line = find(&f, "line");
        let ev = is_config_file(&line, &c).unwrap();
        assert_eq!(ev.text, "/etc/ssh/sshd_config");
        let ev = is_sensitive_setting(&line, &c).unwrap();
        assert_eq!(ev.text, "PermitRootLogin yes");
    }

    #[test]
    fn hardened_value_is_not_sensitive() {
        let f = file(ToolKind::Ansible, &SSH_ROOT_LOGIN.replace("yes'", "no'"));
        assert!(is_sensitive_setting(&find(&f, "line"), &ctx(&f)).is_none());
    }

    #[test]
    fn sudoers_copy_is_config() {
        let f = file(
            ToolKind::Ansible,
            "- copy:\n    dest: /etc/sudoers.d/guest\n    content: |\n      guest ALL=(ALL) NOPASSWD:ALL\n",
        );
        let c = ctx(&f);
        let content = find(&f, "content");
        assert!(is_config_file(&content, &c).is_some());
        assert_eq!(is_sensitive_setting(&content, &c).unwrap().text, "NOPASSWD:ALL");
    }

    #[test]
    fn home_file_is_not_config() {
        let f = file(ToolKind::Ansible, "- copy:\n    dest: /home/user/notes.txt\n    content: hi\n");
        assert!(is_config_file(&find(&f, "content"), &ctx(&f)).is_none());
    }

    #[test]
    fn free_form_and_construct_evidence() {
        let f = file(ToolKind::Ansible, "- lineinfile: path=/etc/ssh/sshd_config line='PermitRootLogin yes'\n");
        let c = ctx(&f);
        let m = find(&f, "lineinfile");
        assert_eq!(is_config_file(&m, &c).unwrap().text, "/etc/ssh/sshd_config");
        let f = file(ToolKind::Ansible, "- blockinfile:\n    path: /srv/app/x\n    block: y\n");
        let c = ctx(&f);
        assert_eq!(is_config_file(&find(&f, "block"), &c).unwrap().text, "blockinfile");
    }

    #[test]
    fn lexical_tools() {
        let f = file(
            ToolKind::Puppet,
            "file { '/etc/ssh/sshd_config':\n  content => 'PermitRootLogin yes',\n}\n",
        );
        let c = ctx(&f);
        let content = find(&f, "content");
        assert_eq!(is_config_file(&content, &c).unwrap().text, "/etc/ssh/sshd_config");
        assert!(is_sensitive_setting(&content, &c).is_some());
    }
}
