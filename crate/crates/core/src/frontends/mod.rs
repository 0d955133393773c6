//! Script frontends: turn each supported IaC format into a common
//! configuration tree ([`ConfigNode`]) with byte-accurate spans.
//!
//! Ansible and SaltStack are read with a YAML subset parser and Terraform with
//! an HCL subset parser (structured mode). Chef, Puppet, Vagrant and Pulumi
//! go through a line-oriented lexical frontend that recognizes resource
//! blocks, attributes and statements without a full grammar. A structured
//! parse that fails falls back to the lexical frontend with a diagnostic.

mod detect;
mod hcl;
pub(crate) mod interpolation;
mod lexical;
mod yaml;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::span::{LineIndex, Span};

pub use detect::{detect_tool, UnknownTool};
pub use interpolation::{interpolation_spans, Interpolation, Interpolations};

/// The seven supported IaC ecosystems.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ToolKind {
    Ansible,
    Saltstack,
    Terraform,
    Chef,
    Puppet,
    Vagrant,
    Pulumi,
}

impl ToolKind {
    pub const ALL: [ToolKind; 7] = [
        ToolKind::Ansible,
        ToolKind::Saltstack,
        ToolKind::Terraform,
        ToolKind::Chef,
        ToolKind::Puppet,
        ToolKind::Vagrant,
        ToolKind::Pulumi,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ToolKind::Ansible => "ansible",
            ToolKind::Saltstack => "saltstack",
            ToolKind::Terraform => "terraform",
            ToolKind::Chef => "chef",
            ToolKind::Puppet => "puppet",
            ToolKind::Vagrant => "vagrant",
            ToolKind::Pulumi => "pulumi",
        }
    }

    /// The frontend strategy used for this tool.
    pub fn parse_mode(self) -> ParseMode {
        match self {
            ToolKind::Ansible | ToolKind::Saltstack | ToolKind::Terraform => ParseMode::Structured,
            _ => ParseMode::Lexical,
        }
    }
}

impl fmt::Display for ToolKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ToolKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "ansible" => Ok(ToolKind::Ansible),
            "saltstack" | "salt" => Ok(ToolKind::Saltstack),
            "terraform" => Ok(ToolKind::Terraform),
            "chef" => Ok(ToolKind::Chef),
            "puppet" => Ok(ToolKind::Puppet),
            "vagrant" => Ok(ToolKind::Vagrant),
            "pulumi" => Ok(ToolKind::Pulumi),
            other => Err(format!(
                "unknown tool `{other}` (expected one of: ansible, saltstack, terraform, chef, puppet, vagrant, pulumi)"
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NodeKind {
    Mapping,
    Sequence,
    Scalar,
    RawSpan,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ParseMode {
    Structured,
    Lexical,
}

/// One node of the tool-agnostic configuration tree.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigNode {
    pub kind: NodeKind,
    /// Present on every child of a mapping.
    pub key: Option<String>,
    /// Decoded scalar value, or the statement text of a raw span.
    pub value: Option<String>,
    pub children: Vec<ConfigNode>,
    /// Whole textual extent of the node, key included.
    pub span: Span,
    /// Extent of the raw value token (quotes and block indicators included).
    pub value_span: Option<Span>,
    /// YAML tag such as `!vault`, without the value.
    pub tag: Option<String>,
    pub origin: ToolKind,
}

impl ConfigNode {
    pub fn new(kind: NodeKind, span: Span, origin: ToolKind) -> Self {
        ConfigNode {
            kind,
            key: None,
            value: None,
            children: Vec::new(),
            span,
            value_span: None,
            tag: None,
            origin,
        }
    }

    pub fn is_scalar_like(&self) -> bool {
        matches!(self.kind, NodeKind::Scalar | NodeKind::RawSpan)
    }

    pub fn key(&self) -> Option<&str> {
        self.key.as_deref()
    }

    pub fn value(&self) -> Option<&str> {
        self.value.as_deref()
    }

    /// First direct child with the given key.
    pub fn child(&self, key: &str) -> Option<&ConfigNode> {
        self.children.iter().find(|c| c.key.as_deref() == Some(key))
    }

    /// Pre-order traversal including `self`.
    pub fn walk(&self) -> Vec<&ConfigNode> {
        let mut out = Vec::new();
        let mut stack = vec![self];
        while let Some(n) = stack.pop() {
            out.push(n);
            stack.extend(n.children.iter().rev());
        }
        out
    }

    /// Text the raw value occupies in `source`, falling back to the decoded value.
    pub fn raw_value<'a>(&'a self, source: &'a str) -> &'a str {
        match (self.kind, self.value_span) {
            (NodeKind::RawSpan, _) => self.span.text(source),
            (_, Some(vs)) => vs.text(source),
            _ => self.value.as_deref().unwrap_or(""),
        }
    }
}

/// A parse warning. Never fatal.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Diagnostic {
    pub line: Option<usize>,
    pub message: String,
}

impl Diagnostic {
    pub fn new(line: Option<usize>, message: impl Into<String>) -> Self {
        Diagnostic {
            line,
            message: message.into(),
        }
    }
}

/// A parsed script with its source text retained for span slicing.
#[derive(Debug, Clone)]
pub struct ParsedFile {
    pub path: String,
    pub tool: ToolKind,
    pub root: ConfigNode,
    pub parse_mode: ParseMode,
    pub diagnostics: Vec<Diagnostic>,
    pub source: String,
    pub lines: LineIndex,
}

impl ParsedFile {
    /// True when a structured tool had to fall back to the lexical frontend.
    pub fn degraded(&self) -> bool {
        self.parse_mode != self.tool.parse_mode()
    }
}

/// Structured-parse failure, reported as a diagnostic before falling back.
#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) struct SyntaxError {
    pub line: usize,
    pub message: String,
}

impl SyntaxError {
    pub(crate) fn new(line: usize, message: impl Into<String>) -> Self {
        SyntaxError {
            line,
            message: message.into(),
        }
    }
}

/// Decode raw bytes as UTF-8, replacing invalid sequences.
pub fn decode_source(bytes: &[u8]) -> (String, Option<Diagnostic>) {
    match std::str::from_utf8(bytes) {
        Ok(s) => (s.to_string(), None),
        Err(e) => {
            let line = bytes[..e.valid_up_to()].iter().filter(|b| **b == b'\n').count() + 1;
            (
                String::from_utf8_lossy(bytes).into_owned(),
                Some(Diagnostic::new(
                    Some(line),
                    "invalid UTF-8 replaced with U+FFFD",
                )),
            )
        }
    }
}

/// Parse `content` with the frontend for `tool`.
pub fn parse(path: &str, content: &str, tool: ToolKind) -> ParsedFile {
    let lines = LineIndex::new(content);
    let mut diagnostics = Vec::new();
    let structured = match tool {
        ToolKind::Ansible | ToolKind::Saltstack => Some(yaml::parse(content, &lines, tool)),
        ToolKind::Terraform => Some(hcl::parse(content, &lines, tool)),
        _ => None,
    };
    let (root, parse_mode) = match structured {
        Some(Ok((root, mut diags))) => {
            diagnostics.append(&mut diags);
            (root, ParseMode::Structured)
        }
        Some(Err(err)) => {
            diagnostics.push(Diagnostic::new(
                Some(err.line),
                format!(
                    "{} parse failed ({}); falling back to lexical mode",
                    tool, err.message
                ),
            ));
            (lexical::parse(content, &lines, tool), ParseMode::Lexical)
        }
        None => (lexical::parse(content, &lines, tool), ParseMode::Lexical),
    };
    ParsedFile {
        path: path.to_string(),
        tool,
        root,
        parse_mode,
        diagnostics,
        source: content.to_string(),
        lines,
    }
}

/// Strip one layer of matching quotes.
pub(crate) fn unquote(s: &str) -> &str {
    let b = s.as_bytes();
    if b.len() >= 2 && (b[0] == b'"' || b[0] == b'\'') && b[b.len() - 1] == b[0] {
        &s[1..s.len() - 1]
    } else {
        s
    }
}
