//! HCL subset: blocks with string labels, attributes, object literals,
//! strings with `${}` templates, heredocs and the three comment styles.
//! Expressions other than a lone string literal are kept as raw text.

use super::{ConfigNode, Diagnostic, NodeKind, SyntaxError, ToolKind};
use crate::span::LineIndex;

type PResult<T> = Result<T, SyntaxError>;

const MAX_DEPTH: usize = 200;

pub(super) fn parse(
    src: &str,
    idx: &LineIndex,
    tool: ToolKind,
) -> PResult<(ConfigNode, Vec<Diagnostic>)> {
    let mut p = Parser {
        src,
        bytes: src.as_bytes(),
        idx,
        pos: 0,
        tool,
        depth: 0,
    };
    let children = p.body(false)?;
    let (start, end) = match (children.first(), children.last()) {
        (Some(f), Some(l)) => (f.span.start, l.span.end),
        _ => (0, 0),
    };
    let mut root = ConfigNode::new(NodeKind::Mapping, idx.span(start, end), tool);
    root.children = children;
    Ok((root, Vec::new()))
}

struct Parser<'a> {
    src: &'a str,
    bytes: &'a [u8],
    idx: &'a LineIndex,
    pos: usize,
    tool: ToolKind,
    depth: usize,
}

fn is_ident_start(b: u8) -> bool {
    b.is_ascii_alphabetic() || b == b'_'
}

fn is_ident(b: u8) -> bool {
    b.is_ascii_alphanumeric() || matches!(b, b'_' | b'-')
}

impl<'a> Parser<'a> {
    fn err<T>(&self, at: usize, msg: impl Into<String>) -> PResult<T> {
        Err(SyntaxError::new(self.idx.position(at).0, msg))
    }

    fn peek(&self) -> Option<u8> {
        self.bytes.get(self.pos).copied()
    }

    fn starts_with(&self, s: &str) -> bool {
        self.bytes[self.pos..].starts_with(s.as_bytes())
    }

    /// Skip blanks and comments; newlines too when `newlines` is set.
    fn skip_trivia(&mut self, newlines: bool) -> PResult<()> {
        while let Some(b) = self.peek() {
            match b {
                b' ' | b'\t' | b'\r' => self.pos += 1,
                b'\n' if newlines => self.pos += 1,
                b'#' => self.skip_line_comment(),
                b'/' if self.starts_with("//") => self.skip_line_comment(),
                b'/' if self.starts_with("/*") => {
                    let start = self.pos;
                    match self.src[self.pos + 2..].find("*/") {
                        Some(i) => self.pos += i + 4,
                        None => return self.err(start, "unterminated block comment"),
                    }
                }
                _ => break,
            }
        }
        Ok(())
    }

    fn skip_line_comment(&mut self) {
        while let Some(b) = self.peek() {
            if b == b'\n' {
                break;
            }
            self.pos += 1;
        }
    }

    fn ident(&mut self) -> Option<(usize, &'a str)> {
        let start = self.pos;
        if !self.peek().is_some_and(is_ident_start) {
            return None;
        }
        while self.peek().is_some_and(|b| is_ident(b) || b == b'.') {
            self.pos += 1;
        }
        Some((start, &self.src[start..self.pos]))
    }

    fn body(&mut self, nested: bool) -> PResult<Vec<ConfigNode>> {
        let mut out = Vec::new();
        loop {
            self.skip_trivia(true)?;
            match self.peek() {
                None if nested => return self.err(self.src.len(), "unterminated block"),
                None => return Ok(out),
                Some(b'}') if nested => return Ok(out),
                _ => {}
            }
            let Some((start, name)) = self.ident() else {
                return self.err(self.pos, "expected attribute or block");
            };
            self.skip_trivia(false)?;
            if self.peek() == Some(b'=') && !self.starts_with("==") {
                self.pos += 1;
                let mut node = self.attribute_value()?;
                node.key = Some(name.to_string());
                node.span = self.idx.span(start, node.span.end);
                out.push(node);
                self.end_of_item()?;
                continue;
            }
            // block header: labels then `{`
            let mut key = name.to_string();
            let mut label_spans = Vec::new();
            loop {
                self.skip_trivia(false)?;
                match self.peek() {
                    Some(b'"') => {
                        let ls = self.pos;
                        let end = self.scan_string(ls)?;
                        self.pos = end;
                        let label = decode_string(&self.src[ls + 1..end - 1]);
                        key.push('/');
                        key.push_str(&label);
                        label_spans.push((ls, end, label));
                    }
                    Some(b) if is_ident_start(b) => {
                        let (ls, label) = self.ident().unwrap();
                        key.push('/');
                        key.push_str(label);
                        label_spans.push((ls, self.pos, label.to_string()));
                    }
                    Some(b'{') => break,
                    _ => return self.err(self.pos, format!("expected `{{` after `{name}`")),
                }
            }
            self.pos += 1;
            self.depth += 1;
            if self.depth > MAX_DEPTH {
                return self.err(start, "nesting too deep");
            }
            let children = self.body(true)?;
            self.depth -= 1;
            self.pos += 1; // `}`
            let mut node = ConfigNode::new(NodeKind::Mapping, self.idx.span(start, self.pos), self.tool);
            node.key = Some(key);
            node.children = children;
            out.push(node);
            self.end_of_item()?;
        }
    }

    fn end_of_item(&mut self) -> PResult<()> {
        self.skip_trivia(false)?;
        match self.peek() {
            None | Some(b'\n') | Some(b'}') => Ok(()),
            Some(b',') => {
                self.pos += 1;
                Ok(())
            }
            _ => self.err(self.pos, "expected newline after item"),
        }
    }

    /// Scan a quoted template string starting at `start`; returns end offset.
    fn scan_string(&self, start: usize) -> PResult<usize> {
        let mut i = start + 1;
        let mut tmpl = 0usize;
        while i < self.bytes.len() {
            match self.bytes[i] {
                b'\\' => i += 2,
                b'$' | b'%' if self.bytes.get(i + 1) == Some(&b'{') => {
                    tmpl += 1;
                    i += 2;
                }
                b'{' if tmpl > 0 => {
                    tmpl += 1;
                    i += 1;
                }
                b'}' if tmpl > 0 => {
                    tmpl -= 1;
                    i += 1;
                }
                b'"' if tmpl == 0 => return Ok(i + 1),
                b'"' => {
                    // nested string inside a template expression
                    i = self.scan_string(i)?;
                }
                b'\n' if tmpl == 0 => return self.err(start, "unterminated string"),
                _ => i += 1,
            }
        }
        self.err(start, "unterminated string")
    }

    /// Scan a heredoc starting at `<<`; returns (body range, end offset).
    fn scan_heredoc(&self, start: usize) -> PResult<((usize, usize), usize)> {
        let mut i = start + 2;
        if self.bytes.get(i) == Some(&b'-') {
            i += 1;
        }
        let tag_start = i;
        while i < self.bytes.len() && is_ident(self.bytes[i]) {
            i += 1;
        }
        let tag = &self.src[tag_start..i];
        if tag.is_empty() {
            return self.err(start, "heredoc without a delimiter");
        }
        let Some(nl) = self.src[i..].find('\n') else {
            return self.err(start, "unterminated heredoc");
        };
        let body_start = i + nl + 1;
        let mut line_start = body_start;
        while line_start <= self.src.len() {
            let line_end = self.src[line_start..]
                .find('\n')
                .map(|n| line_start + n)
                .unwrap_or(self.src.len());
            if self.src[line_start..line_end].trim() == tag {
                let content_end = self.src[line_start..line_end]
                    .find(tag)
                    .map(|o| line_start + o + tag.len())
                    .unwrap();
                return Ok(((body_start, line_start), content_end));
            }
            if line_end == self.src.len() {
                break;
            }
            line_start = line_end + 1;
        }
        self.err(start, "unterminated heredoc")
    }

    /// Raw expression extent: until newline/comment at bracket depth zero.
    fn scan_expr(&mut self) -> PResult<(usize, usize)> {
        let start = self.pos;
        let mut depth = 0usize;
        let mut end = start;
        while let Some(b) = self.peek() {
            match b {
                b'"' => {
                    self.pos = self.scan_string(self.pos)?;
                    end = self.pos;
                    continue;
                }
                b'<' if self.starts_with("<<") && self.bytes.get(self.pos + 2).is_some_and(|c| is_ident_start(*c) || *c == b'-') => {
                    let (_, e) = self.scan_heredoc(self.pos)?;
                    self.pos = e;
                    end = e;
                    continue;
                }
                b'(' | b'[' | b'{' => depth += 1,
                b')' | b']' | b'}' => {
                    if depth == 0 {
                        break;
                    }
                    depth -= 1;
                }
                b',' if depth == 0 => break,
                b'\n' if depth == 0 => break,
                b'#' => {
                    self.skip_line_comment();
                    continue;
                }
                b'/' if self.starts_with("//") => {
                    self.skip_line_comment();
                    continue;
                }
                b'/' if self.starts_with("/*") => {
                    self.skip_trivia(false)?;
                    continue;
                }
                b' ' | b'\t' | b'\r' | b'\n' => {
                    self.pos += 1;
                    continue;
                }
                _ => {}
            }
            self.pos += 1;
            end = self.pos;
        }
        if depth > 0 {
            return self.err(start, "unbalanced brackets in expression");
        }
        Ok((start, end))
    }

    fn attribute_value(&mut self) -> PResult<ConfigNode> {
        self.skip_trivia(false)?;
        let start = self.pos;
        if self.peek() == Some(b'{') {
            return self.object();
        }
        let (s, e) = self.scan_expr()?;
        if s == e {
            return self.err(start, "missing attribute value");
        }
        let raw = &self.src[s..e];
        let mut node = ConfigNode::new(NodeKind::Scalar, self.idx.span(s, e), self.tool);
        node.value_span = Some(node.span);
        node.value = Some(if raw.starts_with('"') && self.scan_string(s).ok() == Some(e) {
            decode_string(&raw[1..raw.len() - 1])
        } else if raw.starts_with("<<") {
            let ((bs, be), _) = self.scan_heredoc(s)?;
            let body = &self.src[bs..be];
            if raw.starts_with("<<-") {
                dedent(body)
            } else {
                body.to_string()
            }
        } else {
            raw.to_string()
        });
        Ok(node)
    }

    fn object(&mut self) -> PResult<ConfigNode> {
        let start = self.pos;
        self.pos += 1;
        self.depth += 1;
        if self.depth > MAX_DEPTH {
            return self.err(start, "nesting too deep");
        }
        let mut children = Vec::new();
        loop {
            self.skip_trivia(true)?;
            match self.peek() {
                None => return self.err(start, "unterminated object"),
                Some(b'}') => break,
                Some(b',') => {
                    self.pos += 1;
                    continue;
                }
                _ => {}
            }
            let ks = self.pos;
            let key = if self.peek() == Some(b'"') {
                let e = self.scan_string(ks)?;
                self.pos = e;
                decode_string(&self.src[ks + 1..e - 1])
            } else if let Some((_, k)) = self.ident() {
                k.to_string()
            } else {
                return self.err(ks, "expected object key");
            };
            self.skip_trivia(false)?;
            match self.peek() {
                Some(b'=') | Some(b':') => self.pos += 1,
                _ => return self.err(self.pos, "expected `=` in object"),
            }
            let mut value = self.attribute_value()?;
            value.key = Some(key);
            value.span = self.idx.span(ks, value.span.end);
            children.push(value);
        }
        self.depth -= 1;
        self.pos += 1;
        let mut node = ConfigNode::new(NodeKind::Mapping, self.idx.span(start, self.pos), self.tool);
        node.children = children;
        Ok(node)
    }
}

fn decode_string(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    let mut chars = s.chars();
    while let Some(c) = chars.next() {
        if c != '\\' {
            out.push(c);
            continue;
        }
        match chars.next() {
            Some('n') => out.push('\n'),
            Some('t') => out.push('\t'),
            Some('r') => out.push('\r'),
            Some('"') => out.push('"'),
            Some('\\') => out.push('\\'),
            Some(other) => {
                out.push('\\');
                out.push(other);
            }
            None => out.push('\\'),
        }
    }
    out
}

fn dedent(body: &str) -> String {
    let indent = body
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| l.len() - l.trim_start().len())
        .min()
        .unwrap_or(0);
    body.lines()
        .map(|l| l.get(indent..).unwrap_or(l.trim_start()))
        .collect::<Vec<_>>()
        .join("\n")
        + if body.ends_with('\n') { "\n" } else { "" }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(src: &str) -> ConfigNode {
        let idx = LineIndex::new(src);
        parse(src, &idx, ToolKind::Terraform).unwrap().0
    }

    #[test]
    fn resource_block() {
        let src = "resource \"x\" \"y\" { version = \"1.0\" }";
        let root = p(src);
        let r = root.child("resource/x/y").unwrap();
        assert_eq!(r.kind, NodeKind::Mapping);
        let v = r.child("version").unwrap();
        assert_eq!(v.value(), Some("1.0"));
        assert_eq!(v.span.text(src), "version = \"1.0\"");
        assert_eq!(r.span.text(src), src);
    }

    #[test]
    fn nested_blocks_and_expressions() {
        let src = r#"
# comment
provider "aws" {
  region = var.region // trailing
  tags = {
    Name = "web"
    Env  = "${var.env}-x"
  }
  list = [
    "a",
    "b",
  ]
}

resource "null_resource" "run" {
  provisioner "local-exec" {
    command = "echo ${var.msg}"
  }
}
"#;
        let root = p(src);
        let prov = root.child("provider/aws").unwrap();
        assert_eq!(prov.child("region").unwrap().value(), Some("var.region"));
        let tags = prov.child("tags").unwrap();
        assert_eq!(tags.kind, NodeKind::Mapping);
        assert_eq!(tags.child("Env").unwrap().value(), Some("${var.env}-x"));
        assert!(prov.child("list").unwrap().value().unwrap().contains("\"b\""));
        let run = root.child("resource/null_resource/run").unwrap();
        let le = run.child("provisioner/local-exec").unwrap();
        assert_eq!(le.child("command").unwrap().value(), Some("echo ${var.msg}"));
    }

    #[test]
    fn heredoc_value() {
        let src = "resource \"a\" \"b\" {\n  user_data = <<-EOT\n    echo hi\n    EOT\n}\n";
        let root = p(src);
        let v = root.children[0].child("user_data").unwrap();
        assert_eq!(v.value(), Some("echo hi\n"));
        assert!(v.span.text(src).ends_with("EOT"));
    }

    #[test]
    fn required_providers_object() {
        let src = "terraform {\n  required_providers {\n    aws = {\n      source = \"hashicorp/aws\"\n      version = \"~> 3.0\"\n    }\n  }\n}\n";
        let root = p(src);
        let rp = root.children[0].child("required_providers").unwrap();
        let aws = rp.child("aws").unwrap();
        assert_eq!(aws.child("version").unwrap().value(), Some("~> 3.0"));
    }

    #[test]
    fn errors_report_lines() {
        let src = "resource \"a\" {\n  x = \n";
        let idx = LineIndex::new(src);
        assert!(parse(src, &idx, ToolKind::Terraform).is_err());
        let src = "a = \"unterminated\n";
        let idx = LineIndex::new(src);
        assert_eq!(parse(src, &idx, ToolKind::Terraform).unwrap_err().line, 1);
    }
}
