//! Package and module declarations, version locking and advisory lookups.

use serde::Serialize;

use crate::advisory::{AdvisoryRecord, Ecosystem, Version};
use crate::frontends::{ConfigNode, Diagnostic, NodeKind, ToolKind};

use super::config::{inner_range, trim_quotes as trim};
use super::scope::{ansible_module, module_args, module_name, salt_args, unit_of};
use super::{Evidence, NodeRef, PredicateContext};

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DependencyRef {
    pub name: String,
    pub version: Option<String>,
    pub source: Option<String>,
    pub ecosystem: Ecosystem,
    /// Resolved through a lockfile outside the script (JS/Python imports).
    pub lockfile_managed: bool,
    /// Name evidence first, then version and source when present.
    pub evidence: Vec<Evidence>,
}

impl DependencyRef {
    fn new(name: &str, ecosystem: Ecosystem) -> Self {
        DependencyRef {
            name: name.trim().to_string(),
            version: None,
            source: None,
            ecosystem,
            lockfile_managed: false,
            evidence: Vec::new(),
        }
    }

    /// Evidence of the version when present, else of the name.
    pub fn primary_evidence(&self) -> Option<&Evidence> {
        self.evidence.get(1).filter(|_| self.version.is_some()).or(self.evidence.first())
    }
}

const ANSIBLE_PKG: &[(&str, Ecosystem)] = &[
    ("apt", Ecosystem::Apt),
    ("yum", Ecosystem::Yum),
    ("dnf", Ecosystem::Yum),
    ("pip", Ecosystem::Pip),
    ("gem", Ecosystem::Gem),
    ("package", Ecosystem::Generic),
    ("apk", Ecosystem::Generic),
    ("zypper", Ecosystem::Generic),
    ("homebrew", Ecosystem::Generic),
    ("npm", Ecosystem::Generic),
];

const REMOVED_STATES: &[&str] = &["absent", "removed", "purged", "purge"];

const CHEF_PKG: &[(&str, Ecosystem)] = &[
    ("package", Ecosystem::Generic),
    ("apt_package", Ecosystem::Apt),
    ("yum_package", Ecosystem::Yum),
    ("dnf_package", Ecosystem::Yum),
    ("gem_package", Ecosystem::Gem),
    ("chef_gem", Ecosystem::Gem),
    ("gem", Ecosystem::Gem),
    ("python_package", Ecosystem::Pip),
    ("pip_package", Ecosystem::Pip),
];

fn lookup(table: &[(&str, Ecosystem)], key: &str) -> Option<Ecosystem> {
    table.iter().find(|(k, _)| *k == key).map(|(_, e)| *e)
}

/// Split an inline pin such as `apache2=2.4`, `requests==2.0` or `x>=1`.
fn split_inline(name: &str, eco: Ecosystem) -> (String, Option<String>) {
    for op in ["==", ">=", "<=", "~=", "!=", ">", "<", "="] {
        if let Some(i) = name.find(op) {
            if i == 0 {
                continue;
            }
            let ver = &name[i..];
            let ver = if op == "=" || (op == "==" && eco == Ecosystem::Pip) {
                ver.trim_start_matches('=')
            } else {
                ver
            };
            return (name[..i].trim().to_string(), Some(ver.trim().to_string()));
        }
    }
    (name.to_string(), None)
}

fn scalar_evidence(ctx: &PredicateContext<'_>, n: &ConfigNode) -> Option<Evidence> {
    let (s, e) = inner_range(ctx.source(), n)?;
    Some(ctx.evidence("is_dependency", s, e))
}

/// Recognize a package or module declaration at this node.
pub fn is_dependency(nr: &NodeRef<'_>, ctx: &PredicateContext<'_>) -> Option<DependencyRef> {
    match ctx.tool() {
        ToolKind::Ansible => ansible_dep(nr, ctx),
        ToolKind::Saltstack => salt_dep(nr, ctx),
        ToolKind::Terraform => terraform_dep(nr, ctx),
        ToolKind::Chef => chef_dep(nr, ctx),
        ToolKind::Puppet => puppet_dep(nr, ctx),
        ToolKind::Vagrant => vagrant_dep(nr, ctx),
        ToolKind::Pulumi => pulumi_dep(nr, ctx),
    }
}

fn ansible_dep(nr: &NodeRef<'_>, ctx: &PredicateContext<'_>) -> Option<DependencyRef> {
    // A list item of a module's `name:` list.
    if nr.node.kind == NodeKind::Scalar && nr.node.key.is_none() {
        let list = nr.parent()?;
        let module = *nr.ancestors.iter().rev().nth(1)?;
        if list.key() != Some("name") && list.key() != Some("pkg") {
            return None;
        }
        return ansible_module_dep(module, ctx, Some(nr.node));
    }
    let unit = unit_of(nr, ToolKind::Ansible)?;
    let module = ansible_module(unit.node)?;
    if !std::ptr::eq(module, nr.node) {
        return None;
    }
    if module.kind == NodeKind::Mapping {
        let name = module.child("name").or(module.child("pkg"));
        if name.is_some_and(|n| n.kind == NodeKind::Sequence) {
            return None;
        }
    }
    ansible_module_dep(module, ctx, None)
}

fn ansible_module_dep(
    module: &ConfigNode,
    ctx: &PredicateContext<'_>,
    item: Option<&ConfigNode>,
) -> Option<DependencyRef> {
    let src = ctx.source();
    let eco = lookup(ANSIBLE_PKG, module_name(module.key()?))?;
    let args = module_args(module, src);
    let arg = |k: &str| args.iter().find(|a| a.key == k);
    let state = arg("state").map(|a| a.value.to_ascii_lowercase());
    if state.as_deref().is_some_and(|s| REMOVED_STATES.contains(&s)) {
        return None;
    }
    let (raw_name, name_ev) = match item {
        Some(it) => (it.value()?.to_string(), scalar_evidence(ctx, it)?),
        None => {
            let a = arg("name").or(arg("pkg")).or(arg("deb"))?;
            let (s, e) = trim(src, a.start, a.end);
            (a.value.clone(), ctx.evidence("is_dependency", s, e))
        }
    };
    if raw_name.contains("{{") {
        return None;
    }
    let mut dep;
    if raw_name.contains("://") || raw_name.starts_with("git+") {
        dep = DependencyRef::new(&raw_name, eco);
        dep.source = Some(raw_name.clone());
    } else {
        let (name, inline) = split_inline(&raw_name, eco);
        dep = DependencyRef::new(&name, eco);
        dep.version = inline;
    }
    dep.evidence.push(name_ev);
    if let Some(v) = arg("version") {
        dep.version = Some(v.value.clone());
        let (s, e) = trim(src, v.start, v.end);
        dep.evidence.push(ctx.evidence("is_dependency", s, e));
    } else if state.as_deref() == Some("latest") {
        dep.version = Some("latest".into());
    }
    if let Some(a) = arg("extra_args").filter(|a| a.value.contains("index-url")) {
        dep.source = a
            .value
            .split_whitespace()
            .skip_while(|t| !t.contains("index-url"))
            .find_map(|t| t.split_once('=').map(|(_, u)| u.to_string()))
            .or_else(|| a.value.split_whitespace().find(|t| t.contains("://")).map(str::to_string));
    }
    if let Some(a) = arg("deb").filter(|a| item.is_none() && a.value.contains("://")) {
        dep.source = Some(a.value.clone());
    }
    Some(dep)
}

fn salt_eco(func: &str) -> Option<Ecosystem> {
    match func {
        "pkg.installed" | "pkg.latest" => Some(Ecosystem::Generic),
        "pip.installed" => Some(Ecosystem::Pip),
        "gem.installed" => Some(Ecosystem::Gem),
        _ => None,
    }
}

fn salt_dep(nr: &NodeRef<'_>, ctx: &PredicateContext<'_>) -> Option<DependencyRef> {
    // Items of a `pkgs:` list: scalar names or `{name: version}` mappings.
    if nr.node.key.is_none() {
        if nr.parent()?.key() != Some("pkgs") {
            return None;
        }
        let func = nr.ancestors.iter().rev().find(|a| a.key().is_some_and(|k| salt_eco(k).is_some()))?;
        let eco = salt_eco(func.key()?)?;
        return match nr.node.kind {
            NodeKind::Scalar => {
                let mut d = DependencyRef::new(nr.node.value()?, eco);
                d.evidence.push(scalar_evidence(ctx, nr.node)?);
                Some(d)
            }
            NodeKind::Mapping => {
                let entry = nr.node.children.first()?;
                let mut d = DependencyRef::new(entry.key()?, eco);
                d.evidence.push(ctx.evidence_at("is_dependency", key_only(ctx, entry)?));
                if let Some(v) = entry.value().filter(|v| !v.is_empty()) {
                    d.version = Some(v.to_string());
                    d.evidence.push(scalar_evidence(ctx, entry)?);
                }
                Some(d)
            }
            _ => None,
        };
    }
    let func = nr.node.key()?;
    let eco = salt_eco(func)?;
    let state = *nr.ancestors.last()?;
    let args = salt_args(nr.node);
    let arg = |k: &str| args.iter().copied().find(|a| a.key() == Some(k));
    if arg("pkgs").is_some() {
        return None;
    }
    let (name, name_ev) = match arg("name") {
        Some(n) => (n.value()?.to_string(), scalar_evidence(ctx, n)?),
        None => (state.key()?.to_string(), ctx.evidence_at("is_dependency", key_only(ctx, state)?)),
    };
    let mut d = DependencyRef::new(&name, eco);
    d.evidence.push(name_ev);
    if let Some(v) = arg("version") {
        d.version = v.value().map(str::to_string);
        d.evidence.push(scalar_evidence(ctx, v)?);
    } else if func == "pkg.latest" {
        d.version = Some("latest".into());
    }
    if let Some(s) = arg("sources").or(arg("index_url")).and_then(|s| s.value()) {
        d.source = Some(s.to_string());
    }
    Some(d)
}

/// Span of a node's key token.
fn key_only(ctx: &PredicateContext<'_>, n: &ConfigNode) -> Option<crate::span::Span> {
    let (s, e) = super::config::key_range(ctx.source(), n)?;
    Some(ctx.file.lines.span(s, e))
}

fn terraform_dep(nr: &NodeRef<'_>, ctx: &PredicateContext<'_>) -> Option<DependencyRef> {
    let n = nr.node;
    let key = n.key()?;
    let depth = nr.ancestors.len();
    if n.kind == NodeKind::Mapping && depth == 1 {
        let mut parts = key.splitn(3, '/');
        let kind = parts.next()?;
        let label = parts.next()?;
        match kind {
            "module" => {
                let source = n.child("source")?;
                let sv = source.value()?;
                if sv.starts_with("./") || sv.starts_with("../") {
                    return None;
                }
                let mut d = DependencyRef::new(label, Ecosystem::Terraform);
                d.evidence.push(scalar_evidence(ctx, source)?);
                if let Some(v) = n.child("version") {
                    d.version = v.value().map(str::to_string);
                    d.evidence.push(scalar_evidence(ctx, v)?);
                }
                d.name = registry_name(sv).unwrap_or_else(|| label.to_string());
                if sv.contains("://") || sv.starts_with("git::") || sv.starts_with("git@") || is_hosted(sv) {
                    d.source = Some(sv.to_string());
                }
                Some(d)
            }
            "provider" => {
                let v = n.child("version")?;
                let mut d = DependencyRef::new(label, Ecosystem::Terraform);
                d.evidence.push(ctx.evidence_at("is_dependency", key_only(ctx, n)?));
                d.version = v.value().map(str::to_string);
                d.evidence.push(scalar_evidence(ctx, v)?);
                Some(d)
            }
            _ => None,
        }
    } else if depth >= 2
        && nr.ancestors.last().is_some_and(|p| p.key() == Some("required_providers"))
    {
        let mut d = DependencyRef::new(key, Ecosystem::Terraform);
        match n.kind {
            NodeKind::Scalar => {
                d.version = n.value().map(str::to_string);
                d.evidence.push(ctx.evidence_at("is_dependency", key_only(ctx, n)?));
                d.evidence.push(scalar_evidence(ctx, n)?);
            }
            NodeKind::Mapping => {
                d.evidence.push(ctx.evidence_at("is_dependency", key_only(ctx, n)?));
                if let Some(v) = n.child("version") {
                    d.version = v.value().map(str::to_string);
                    d.evidence.push(scalar_evidence(ctx, v)?);
                }
                if let Some(s) = n.child("source").and_then(|s| s.value()) {
                    if s.contains("://") || is_hosted(s) {
                        d.source = Some(s.to_string());
                    }
                }
            }
            _ => return None,
        }
        Some(d)
    } else {
        None
    }
}

/// `namespace/name/provider` registry shorthand.
fn registry_name(source: &str) -> Option<String> {
    let parts: Vec<&str> = source.split('/').collect();
    (parts.len() == 3 && !source.contains(':') && !parts[0].contains('.')).then(|| source.to_string())
}

/// A source whose first segment is a hostname (`host.tld/...`).
fn is_hosted(source: &str) -> bool {
    !source.contains("://")
        && source
            .split('/')
            .next()
            .is_some_and(|h| h.contains('.') && source.contains('/'))
}

fn chef_dep(nr: &NodeRef<'_>, ctx: &PredicateContext<'_>) -> Option<DependencyRef> {
    let n = nr.node;
    let eco = lookup(CHEF_PKG, n.key()?)?;
    match n.kind {
        NodeKind::Scalar => {
            let mut d = DependencyRef::new(n.value()?, eco);
            d.evidence.push(scalar_evidence(ctx, n)?);
            Some(d)
        }
        NodeKind::Mapping => {
            let title = n.child("title")?;
            if n.child("action").and_then(|a| a.value()).is_some_and(|a| {
                REMOVED_STATES.contains(&a.trim_start_matches(':')) || a.contains(":remove") || a.contains(":purge")
            }) {
                return None;
            }
            let mut d = DependencyRef::new(title.value()?, eco);
            d.evidence.push(scalar_evidence(ctx, title)?);
            if let Some(v) = n.child("version") {
                d.version = v.value().map(str::to_string);
                d.evidence.push(scalar_evidence(ctx, v)?);
            } else if n.child("action").and_then(|a| a.value()).is_some_and(|a| a.contains("upgrade")) {
                d.version = Some("latest".into());
            }
            d.source = n.child("source").and_then(|s| s.value()).map(str::to_string);
            Some(d)
        }
        _ => None,
    }
}

fn puppet_dep(nr: &NodeRef<'_>, ctx: &PredicateContext<'_>) -> Option<DependencyRef> {
    let n = nr.node;
    if n.key()? != "package" || n.kind != NodeKind::Mapping {
        return None;
    }
    let title = n.child("title")?;
    let eco = match n.child("provider").and_then(|p| p.value()) {
        Some("pip") | Some("pip3") => Ecosystem::Pip,
        Some("gem") => Ecosystem::Gem,
        Some("apt") => Ecosystem::Apt,
        Some("yum") | Some("dnf") => Ecosystem::Yum,
        _ => Ecosystem::Generic,
    };
    let mut d = DependencyRef::new(title.value()?, eco);
    d.evidence.push(scalar_evidence(ctx, title)?);
    if let Some(e) = n.child("ensure") {
        let v = e.value()?.trim();
        match v {
            "present" | "installed" => {}
            "latest" => d.version = Some("latest".into()),
            "absent" | "purged" => return None,
            _ => {
                d.version = Some(v.to_string());
                d.evidence.push(scalar_evidence(ctx, e)?);
            }
        }
    }
    d.source = n.child("source").and_then(|s| s.value()).map(str::to_string);
    Some(d)
}

fn vagrant_dep(nr: &NodeRef<'_>, ctx: &PredicateContext<'_>) -> Option<DependencyRef> {
    let n = nr.node;
    let key = n.key()?;
    if n.kind != NodeKind::Scalar || !(key.ends_with(".vm.box") || key == "vm.box") {
        return None;
    }
    let prefix = &key[..key.len() - "box".len()];
    let parent = nr.parent()?;
    let mut d = DependencyRef::new(n.value()?, Ecosystem::Box);
    d.evidence.push(scalar_evidence(ctx, n)?);
    if let Some(v) = parent.child(&format!("{prefix}box_version")) {
        d.version = v.value().map(str::to_string);
        d.evidence.push(scalar_evidence(ctx, v)?);
    }
    d.source = parent
        .child(&format!("{prefix}box_url"))
        .and_then(|u| u.value())
        .map(str::to_string);
    Some(d)
}

fn pulumi_dep(nr: &NodeRef<'_>, ctx: &PredicateContext<'_>) -> Option<DependencyRef> {
    let n = nr.node;
    if n.kind != NodeKind::RawSpan || !matches!(n.key()?, "import" | "require") {
        return None;
    }
    let text = n.span.text(ctx.source());
    let (s, e) = module_specifier(text)?;
    let spec = &text[s..e];
    if spec.starts_with('.') {
        return None;
    }
    let mut d = DependencyRef::new(spec, Ecosystem::Generic);
    d.lockfile_managed = true;
    d.evidence.push(ctx.evidence("is_dependency", n.span.start + s, n.span.start + e));
    Some(d)
}

/// Byte range of the module named by an import/require statement.
fn module_specifier(text: &str) -> Option<(usize, usize)> {
    // Quoted specifier (JS/TS).
    if let Some(q) = text.find(['"', '\'']) {
        let quote = text.as_bytes()[q] as char;
        let end = text[q + 1..].find(quote)? + q + 1;
        return Some((q + 1, end));
    }
    // Python `import x` / `from x import y`.
    let rest = text.strip_prefix("from ").or(text.strip_prefix("import "))?;
    let start = text.len() - rest.len();
    let len = rest.find(|c: char| c.is_whitespace() || c == ',').unwrap_or(rest.len());
    (len > 0).then_some((start, start + len))
}

const FLOATING: &[&str] = &["", "latest", "*", "present", "installed", "x"];

/// True when the declaration does not pin an exact version.
pub fn lacks_version_locking(dep: &DependencyRef) -> bool {
    if dep.lockfile_managed {
        return false;
    }
    let Some(v) = dep.version.as_deref().map(str::trim) else {
        return !dep.source.as_deref().is_some_and(has_pinned_ref);
    };
    if FLOATING.contains(&v.to_ascii_lowercase().as_str()) {
        return true;
    }
    let unbounded = ["~>", ">=", ">", "^", "~"]
        .iter()
        .any(|op| v.starts_with(op) || v.contains(&format!(",{op}")) || v.contains(&format!(", {op}")));
    let has_upper = v.contains('<');
    (unbounded && !has_upper) || v.contains('*') || v.ends_with(".x")
}

fn has_pinned_ref(source: &str) -> bool {
    source.contains("?ref=") || source.contains("&ref=") || source.contains(".git@") || source.contains("#")
}

fn is_git(source: &str) -> bool {
    source.starts_with("git::")
        || source.starts_with("git+")
        || source.starts_with("git@")
        || source.starts_with("git://")
        || source.contains(".git")
}

/// True for plaintext transport, unpinned git references, or hosts outside
/// the registry allowlist. An absent source means the default registry.
pub fn is_untrusted_source(dep: &DependencyRef, ctx: &PredicateContext<'_>) -> bool {
    let Some(src) = dep.source.as_deref() else {
        return false;
    };
    let s = src.trim();
    let bare = s
        .trim_start_matches("git::")
        .trim_start_matches("git+")
        .trim_start_matches("hg::");
    if bare.starts_with("http://") || bare.starts_with("ftp://") {
        return true;
    }
    if is_git(s) && !has_pinned_ref(s) {
        return true;
    }
    let host = if let Some((_, rest)) = bare.split_once("://") {
        rest.split(['/', ':', '?']).next().unwrap_or("")
    } else if let Some(rest) = bare.strip_prefix("git@") {
        rest.split(':').next().unwrap_or("")
    } else if is_hosted(bare) {
        bare.split('/').next().unwrap_or("")
    } else {
        return false;
    };
    let host = host.rsplit('@').next().unwrap_or(host).to_ascii_lowercase();
    !ctx.lexicons.trusted_registries.contains(&host)
}

/// Outcome of an outdated-version lookup.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct OutdatedCheck {
    pub record: Option<AdvisoryRecord>,
    pub diagnostic: Option<Diagnostic>,
}

fn candidates<'a>(dep: &DependencyRef, ctx: &PredicateContext<'a>) -> Vec<&'a AdvisoryRecord> {
    let version = usable_version(dep);
    let mut out = ctx.advisory.query(dep.ecosystem, &dep.name, version.as_deref());
    if dep.ecosystem != Ecosystem::Generic {
        for r in ctx.advisory.query(Ecosystem::Generic, &dep.name, version.as_deref()) {
            let dup = out.iter().any(|o| {
                o.advisory_id == r.advisory_id && (r.advisory_id.is_some() || o.eol == r.eol)
            });
            if !dup {
                out.push(r);
            }
        }
    }
    out
}

/// The version string when it names one exact release.
fn usable_version(dep: &DependencyRef) -> Option<String> {
    let v = dep.version.as_deref()?.trim();
    let v = v.trim_start_matches("==").trim_start_matches('=').trim();
    Version::parse(v).ok().map(|_| v.to_string())
}

/// An advisory record the declared version falls under, or an end-of-life
/// entry for the package.
pub fn is_outdated_version(dep: &DependencyRef, ctx: &PredicateContext<'_>) -> OutdatedCheck {
    let mut check = OutdatedCheck::default();
    if let Some(v) = dep.version.as_deref() {
        if usable_version(dep).is_none() && !FLOATING.contains(&v.to_ascii_lowercase().as_str()) {
            check.diagnostic = Some(Diagnostic::new(
                dep.evidence.first().map(|e| e.span.start_line),
                format!("version `{v}` of {} is not comparable; treated as unknown", dep.name),
            ));
        }
    }
    let recs = candidates(dep, ctx);
    check.record = recs
        .iter()
        .find(|r| r.is_vulnerability())
        .or(recs.first())
        .map(|r| (*r).clone());
    check
}

/// Vulnerability records covering the declared version. An unknown version
/// only matches records that affect every version.
pub fn has_known_vulnerabilities(dep: &DependencyRef, ctx: &PredicateContext<'_>) -> Vec<AdvisoryRecord> {
    candidates(dep, ctx)
        .into_iter()
        .filter(|r| r.is_vulnerability())
        .cloned()
        .collect()
}
