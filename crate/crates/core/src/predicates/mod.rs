//! Atomic predicates over [`ConfigNode`]s. Each is a pure function of a node
//! (with its ancestor chain) and a [`PredicateContext`].

mod config;
mod deps;
mod input;
mod lexicons;
mod naming;
pub mod scope;
mod secrets;

use serde::Serialize;

use crate::advisory::AdvisoryDb;
use crate::frontends::{ConfigNode, ParsedFile, ToolKind};
use crate::span::Span;

pub use config::{is_config_file, is_sensitive_setting};
pub use deps::{
    has_known_vulnerabilities, is_dependency, is_outdated_version, is_untrusted_source,
    lacks_version_locking, DependencyRef, OutdatedCheck,
};
pub use input::{
    in_arithmetic_context, is_command_sink, is_file_path, is_unsanitized, is_user_input,
    unsanitized_inputs, Sink, SinkKind, UserInput,
};
pub use lexicons::{LexiconError, Lexicons, PatternSet, WordSet};
pub use naming::{follows_nonstandard_convention, named_resource, NamedResource, NamingReason};
pub use secrets::{exposures, is_exposed, is_sensitive_data, Exposure, ExposureKind};

#[derive(Debug, Clone, Copy)]
pub struct PredicateContext<'a> {
    pub file: &'a ParsedFile,
    pub advisory: &'a AdvisoryDb,
    pub lexicons: &'a Lexicons,
}

impl<'a> PredicateContext<'a> {
    pub fn new(file: &'a ParsedFile, advisory: &'a AdvisoryDb, lexicons: &'a Lexicons) -> Self {
        PredicateContext {
            file,
            advisory,
            lexicons,
        }
    }

    pub fn tool(&self) -> ToolKind {
        self.file.tool
    }

    pub fn source(&self) -> &'a str {
        &self.file.source
    }

    /// Evidence for the byte range `start..end` of the source.
    pub fn evidence(&self, predicate: &'static str, start: usize, end: usize) -> Evidence {
        Evidence {
            predicate,
            span: self.file.lines.span(start, end),
            text: self.file.source.get(start..end).unwrap_or("").to_string(),
        }
    }

    pub fn evidence_at(&self, predicate: &'static str, span: Span) -> Evidence {
        self.evidence(predicate, span.start, span.end)
    }
}

/// A source range supporting a predicate result.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Evidence {
    pub predicate: &'static str,
    pub span: Span,
    pub text: String,
}

/// A node together with its ancestors, root first.
#[derive(Debug, Clone)]
pub struct NodeRef<'a> {
    pub node: &'a ConfigNode,
    pub ancestors: Vec<&'a ConfigNode>,
}

impl<'a> NodeRef<'a> {
    pub fn root(node: &'a ConfigNode) -> Self {
        NodeRef {
            node,
            ancestors: Vec::new(),
        }
    }

    pub fn key(&self) -> Option<&'a str> {
        self.node.key()
    }

    pub fn parent(&self) -> Option<&'a ConfigNode> {
        self.ancestors.last().copied()
    }

    /// Ancestors plus the node itself, root first.
    pub fn path(&self) -> Vec<&'a ConfigNode> {
        let mut p = self.ancestors.clone();
        p.push(self.node);
        p
    }

    /// Closest strict ancestor carrying a key.
    pub fn nearest_keyed_ancestor(&self) -> Option<&'a ConfigNode> {
        self.ancestors.iter().rev().find(|a| a.key.is_some()).copied()
    }

    pub fn child(&self, node: &'a ConfigNode) -> NodeRef<'a> {
        let mut ancestors = self.ancestors.clone();
        ancestors.push(self.node);
        NodeRef { node, ancestors }
    }

    /// Span of the key token, when the node text starts with its key.
    pub fn key_span(&self, src: &str) -> Option<(usize, usize)> {
        let key = self.node.key()?;
        let s = self.node.span.start;
        let text = src.get(s..self.node.span.end)?;
        let t = text.trim_start_matches(['"', '\'']);
        let off = text.len() - t.len();
        t.starts_with(key).then(|| (s + off, s + off + key.len()))
    }
}

/// Every node of the tree in pre-order, with ancestry.
pub fn node_refs(root: &ConfigNode) -> Vec<NodeRef<'_>> {
    let mut out = Vec::new();
    let mut stack = vec![NodeRef::root(root)];
    while let Some(nr) = stack.pop() {
        for c in nr.node.children.iter().rev() {
            stack.push(nr.child(c));
        }
        out.push(nr);
    }
    out
}

/// Last `.` or `/` separated segment of a key, lowercased.
pub(crate) fn last_segment(key: &str) -> String {
    key.rsplit(['.', '/'])
        .next()
        .unwrap_or(key)
        .to_ascii_lowercase()
}

#[cfg(test)]
pub(crate) mod testutil {
    use super::*;
    use crate::frontends::parse;

    pub fn file(tool: ToolKind, src: &str) -> ParsedFile {
        parse("t", src, tool)
    }

    pub fn ctx(f: &ParsedFile) -> PredicateContext<'_> {
        PredicateContext::new(f, crate::advisory::bundled(), Lexicons::bundled())
    }

    /// First node (pre-order) with the given key.
    pub fn find<'a>(f: &'a ParsedFile, key: &str) -> NodeRef<'a> {
        node_refs(&f.root)
            .into_iter()
            .find(|n| n.key() == Some(key))
            .unwrap_or_else(|| panic!("no node keyed {key}"))
    }
}
