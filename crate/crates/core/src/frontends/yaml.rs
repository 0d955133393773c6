//! Indentation-driven parser for the YAML subset used by Ansible playbooks
//! and Salt states: block mappings and sequences, plain/quoted scalars,
//! literal and folded block scalars, flow collections, tags, anchors and
//! aliases (expanded in place, `<<` merges spliced) and multi-document
//! streams. Jinja statement lines (`{% ... %}`, `{# ... #}`) are skipped.

use std::collections::HashMap;

use super::{ConfigNode, Diagnostic, NodeKind, SyntaxError, ToolKind};
use crate::span::{LineIndex, Span};

type PResult<T> = Result<T, SyntaxError>;

const MAX_DEPTH: usize = 200;

pub(super) fn parse(
    src: &str,
    idx: &LineIndex,
    tool: ToolKind,
) -> PResult<(ConfigNode, Vec<Diagnostic>)> {
    let mut lines = Vec::with_capacity(idx.line_count());
    for n in 1..=idx.line_count() {
        lines.push(idx.line_range(src, n));
    }

    // Split the stream on document markers.
    let mut docs: Vec<(usize, usize)> = Vec::new();
    let mut doc_start = 0;
    for (i, &(s, e)) in lines.iter().enumerate() {
        let text = &src[s..e];
        if is_doc_marker(text) {
            docs.push((doc_start, i));
            doc_start = i + 1;
        } else if text.starts_with('%') && docs.is_empty() && i == doc_start {
            // %YAML / %TAG directive
            doc_start = i + 1;
        }
    }
    docs.push((doc_start, lines.len()));

    let mut diags = Vec::new();
    let mut roots = Vec::new();
    for (first, last) in docs {
        let mut p = Parser {
            src,
            idx,
            lines: &lines[..last],
            line: first,
            col: 0,
            tool,
            anchors: HashMap::new(),
            diags: Vec::new(),
            depth: 0,
        };
        if p.peek().is_none() {
            continue;
        }
        let node = p.parse_block(0)?;
        if let Some(tok) = p.peek() {
            return Err(SyntaxError::new(
                tok.line + 1,
                "unexpected content after document root",
            ));
        }
        diags.append(&mut p.diags);
        if let Some(node) = node {
            roots.push(node);
        }
    }

    let root = match roots.len() {
        0 => ConfigNode::new(NodeKind::Mapping, idx.span(0, 0), tool),
        1 => roots.pop().unwrap(),
        _ => {
            let span = idx.span(roots[0].span.start, roots[roots.len() - 1].span.end);
            let mut seq = ConfigNode::new(NodeKind::Sequence, span, tool);
            seq.children = roots;
            seq
        }
    };
    Ok((root, diags))
}

fn is_doc_marker(line: &str) -> bool {
    for marker in ["---", "..."] {
        if let Some(rest) = line.strip_prefix(marker) {
            if rest.is_empty() || rest.starts_with(' ') || rest.starts_with('\t') {
                return true;
            }
        }
    }
    false
}

fn is_dash(text: &str) -> bool {
    text == "-" || text.starts_with("- ") || text.starts_with("-\t")
}

/// A significant (non-blank, non-comment) position in the document.
#[derive(Debug, Clone, Copy)]
struct Tok {
    line: usize,
    start: usize,
    end: usize,
    indent: usize,
}

struct Parser<'a> {
    src: &'a str,
    idx: &'a LineIndex,
    lines: &'a [(usize, usize)],
    line: usize,
    col: usize,
    tool: ToolKind,
    anchors: HashMap<String, ConfigNode>,
    diags: Vec<Diagnostic>,
    depth: usize,
}

impl<'a> Parser<'a> {
    fn span(&self, start: usize, end: usize) -> Span {
        self.idx.span(start, end)
    }

    fn node(&self, kind: NodeKind, start: usize, end: usize) -> ConfigNode {
        ConfigNode::new(kind, self.span(start, end), self.tool)
    }

    fn err<T>(&self, line: usize, msg: impl Into<String>) -> PResult<T> {
        Err(SyntaxError::new(line + 1, msg))
    }

    fn peek(&self) -> Option<Tok> {
        let mut line = self.line;
        let mut col = self.col;
        while line < self.lines.len() {
            let (s, e) = self.lines[line];
            let from = (s + col).min(e);
            let text = &self.src[from..e];
            let trimmed = text.trim_start_matches([' ', '\t']);
            if !(trimmed.is_empty()
                || trimmed.starts_with('#')
                || trimmed.starts_with("{%")
                || trimmed.starts_with("{#"))
            {
                let start = e - trimmed.len();
                return Some(Tok {
                    line,
                    start,
                    end: s + self.src[s..e].trim_end().len(),
                    indent: start - s,
                });
            }
            line += 1;
            col = 0;
        }
        None
    }

    fn seek(&mut self, offset: usize) {
        while self.line < self.lines.len() && self.lines[self.line].1 < offset {
            self.line += 1;
        }
        if self.line < self.lines.len() {
            self.col = offset.saturating_sub(self.lines[self.line].0);
        } else {
            self.col = 0;
        }
    }

    fn next_line(&mut self) {
        self.line += 1;
        self.col = 0;
    }

    /// Remaining text on the current line with leading blanks removed,
    /// returned with its absolute start offset. Comments are kept.
    fn rest(&self) -> (usize, &'a str) {
        if self.line >= self.lines.len() {
            return (self.src.len(), "");
        }
        let (s, e) = self.lines[self.line];
        let from = (s + self.col).min(e);
        let text = &self.src[from..e];
        let trimmed = text.trim_start_matches([' ', '\t']);
        (e - trimmed.len(), trimmed)
    }

    fn rest_is_empty(&self) -> bool {
        let (_, r) = self.rest();
        r.is_empty() || r.starts_with('#')
    }

    fn enter(&mut self, line: usize) -> PResult<()> {
        self.depth += 1;
        if self.depth > MAX_DEPTH {
            return self.err(line, "nesting too deep");
        }
        Ok(())
    }

    fn parse_block(&mut self, min_indent: usize) -> PResult<Option<ConfigNode>> {
        let Some(tok) = self.peek() else {
            return Ok(None);
        };
        if tok.indent < min_indent {
            return Ok(None);
        }
        self.enter(tok.line)?;
        let text = &self.src[tok.start..tok.end];
        let node = if is_dash(text) {
            self.parse_seq(tok.indent)?
        } else if split_key(text).is_some() {
            self.parse_map(tok.indent)?
        } else {
            self.seek(tok.start);
            self.parse_value(tok.indent as isize - 1, false)?
        };
        self.depth -= 1;
        Ok(Some(node))
    }

    fn parse_seq(&mut self, indent: usize) -> PResult<ConfigNode> {
        let mut items = Vec::new();
        let mut first = None;
        let mut last_end = 0;
        while let Some(tok) = self.peek() {
            if tok.indent != indent {
                if tok.indent > indent {
                    return self.err(tok.line, "unexpected indentation in sequence");
                }
                break;
            }
            if !is_dash(&self.src[tok.start..tok.end]) {
                break;
            }
            first.get_or_insert(tok.start);
            self.seek(tok.start + 1);
            let item = if self.rest_is_empty() {
                self.next_line();
                match self.parse_block(indent + 1)? {
                    Some(n) => n,
                    None => self.node(NodeKind::Scalar, tok.start + 1, tok.start + 1),
                }
            } else {
                let (_, r) = self.rest();
                if is_dash(r) || split_key(r).is_some() {
                    self.parse_block(indent + 1)?
                        .expect("inline item content is significant")
                } else {
                    self.parse_value(indent as isize, true)?
                }
            };
            last_end = last_end.max(item.span.end).max(tok.start + 1);
            items.push(item);
        }
        let mut seq = self.node(NodeKind::Sequence, first.unwrap_or(0), last_end);
        seq.children = items;
        Ok(seq)
    }

    fn parse_map(&mut self, indent: usize) -> PResult<ConfigNode> {
        let mut children: Vec<ConfigNode> = Vec::new();
        let mut first = None;
        let mut last_end = 0;
        while let Some(tok) = self.peek() {
            if tok.indent != indent {
                if tok.indent > indent {
                    return self.err(tok.line, "unexpected indentation in mapping");
                }
                break;
            }
            let text = &self.src[tok.start..tok.end];
            if is_dash(text) {
                break;
            }
            if text.starts_with("? ") || text == "?" {
                return self.err(tok.line, "complex mapping keys are not supported");
            }
            let Some(k) = split_key(text) else {
                return self.err(tok.line, "expected `key: value`");
            };
            first.get_or_insert(tok.start);
            let key_start = tok.start;
            let colon_end = tok.start + k.colon + 1;
            let key = decode_key(&text[..k.key_len]);
            self.seek(colon_end);
            let mut value = self.parse_value(indent as isize, false)?;
            let end = value.span.end.max(colon_end);
            last_end = last_end.max(end);
            if key == "<<" {
                match value.kind {
                    NodeKind::Mapping => {
                        children.append(&mut value.children);
                        continue;
                    }
                    NodeKind::Sequence => {
                        for mut m in value.children {
                            children.append(&mut m.children);
                        }
                        continue;
                    }
                    _ => {}
                }
            }
            if value.is_scalar_like() && value.value_span.is_none() {
                value.value_span = Some(value.span);
            }
            value.key = Some(key);
            value.span = self.span(key_start, end);
            children.push(value);
        }
        let mut map = self.node(NodeKind::Mapping, first.unwrap_or(0), last_end);
        map.children = children;
        Ok(map)
    }

    /// Parse the value that starts at the cursor (just after `key:` or `-`).
    /// `parent` is the indentation the value's continuation lines must exceed.
    fn parse_value(&mut self, parent: isize, in_seq_item: bool) -> PResult<ConfigNode> {
        let (tag, anchor) = self.parse_properties();
        let (start, rest) = self.rest();
        let line = self.line;
        let mut node = if rest.is_empty() || rest.starts_with('#') {
            let null_at = start;
            self.next_line();
            match self.peek() {
                Some(t) if t.indent as isize > parent => self
                    .parse_block((parent + 1) as usize)?
                    .expect("peeked token is significant"),
                Some(t)
                    if !in_seq_item
                        && t.indent as isize == parent
                        && is_dash(&self.src[t.start..t.end]) =>
                {
                    self.parse_seq(t.indent)?
                }
                _ => self.node(NodeKind::Scalar, null_at, null_at),
            }
        } else if let Some(name) = rest.strip_prefix('*') {
            let name: String = name
                .chars()
                .take_while(|c| !c.is_whitespace() && !matches!(c, ',' | ']' | '}'))
                .collect();
            let end = start + 1 + name.len();
            let node = match self.anchors.get(&name) {
                Some(n) => {
                    let mut n = n.clone();
                    let sp = self.span(start, end);
                    respan(&mut n, sp);
                    n
                }
                None => {
                    self.diags.push(Diagnostic::new(
                        Some(line + 1),
                        format!("unknown alias `*{name}`"),
                    ));
                    self.node(NodeKind::Scalar, start, end)
                }
            };
            self.seek(end);
            self.expect_line_end()?;
            node
        } else if rest.starts_with('|') || rest.starts_with('>') {
            self.parse_block_scalar(start, parent)?
        } else if rest.starts_with('"') || rest.starts_with('\'') {
            let (value, end) = self.scan_quoted(start)?;
            let mut n = self.node(NodeKind::Scalar, start, end);
            n.value = Some(value);
            n.value_span = Some(n.span);
            self.seek(end);
            self.expect_line_end()?;
            n
        } else if (rest.starts_with('[') || rest.starts_with('{')) && !rest.starts_with("{{") {
            let (n, end) = self.flow_node(start)?;
            self.seek(end);
            self.expect_line_end()?;
            n
        } else {
            self.parse_plain(start, parent)?
        };
        if let Some(tag) = tag {
            node.tag = Some(tag);
        }
        if let Some(anchor) = anchor {
            self.anchors.insert(anchor, node.clone());
        }
        Ok(node)
    }

    fn parse_properties(&mut self) -> (Option<String>, Option<String>) {
        let mut tag = None;
        let mut anchor = None;
        loop {
            let (start, rest) = self.rest();
            let prop = if rest.starts_with('!') || rest.starts_with('&') {
                rest.split(|c: char| c.is_whitespace()).next().unwrap_or("")
            } else {
                break;
            };
            if prop.starts_with('!') {
                tag = Some(prop.to_string());
            } else {
                anchor = Some(prop[1..].to_string());
            }
            self.seek(start + prop.len());
        }
        (tag, anchor)
    }

    fn expect_line_end(&mut self) -> PResult<()> {
        if self.rest_is_empty() {
            self.next_line();
            Ok(())
        } else {
            let line = self.line;
            self.err(line, "unexpected text after value")
        }
    }

    fn parse_plain(&mut self, start: usize, parent: isize) -> PResult<ConfigNode> {
        let (_, rest) = self.rest();
        let first = strip_comment(rest);
        let mut value = first.trim_end().to_string();
        let mut end = start + first.trim_end().len();
        self.next_line();
        // Continuation lines of a multi-line plain scalar.
        let mut pending_breaks = 0;
        while self.line < self.lines.len() {
            let (s, e) = self.lines[self.line];
            let text = &self.src[s..e];
            let trimmed = text.trim_start_matches([' ', '\t']);
            if trimmed.is_empty() {
                pending_breaks += 1;
                self.line += 1;
                continue;
            }
            let indent = (text.len() - trimmed.len()) as isize;
            if indent <= parent
                || trimmed.starts_with('#')
                || trimmed.starts_with("{%")
                || is_dash(trimmed) && indent == parent + 1
            {
                break;
            }
            let piece = strip_comment(trimmed).trim_end();
            if split_key(piece).is_some() {
                let line = self.line;
                return self.err(line, "mapping values are not allowed here");
            }
            if pending_breaks > 0 {
                value.push_str(&"\n".repeat(pending_breaks));
            } else {
                value.push(' ');
            }
            pending_breaks = 0;
            value.push_str(piece);
            end = e - trimmed.len() + piece.len();
            self.line += 1;
        }
        // Rewind over trailing blank lines so the next token is found.
        self.line -= pending_breaks;
        self.col = 0;
        let mut n = self.node(NodeKind::Scalar, start, end);
        n.value = Some(value);
        n.value_span = Some(n.span);
        Ok(n)
    }

    fn parse_block_scalar(&mut self, start: usize, parent: isize) -> PResult<ConfigNode> {
        let (_, header) = self.rest();
        let header = strip_comment(header).trim_end();
        let literal = header.starts_with('|');
        let mut chomp = 'c';
        let mut explicit = None;
        for ch in header[1..].chars() {
            match ch {
                '+' | '-' => chomp = ch,
                '1'..='9' => explicit = Some(ch as usize - '0' as usize),
                _ => {
                    let line = self.line;
                    return self.err(line, "invalid block scalar header");
                }
            }
        }
        let mut end = start + header.len();
        self.next_line();

        let base = parent.max(-1) + 1;
        let mut content_indent = explicit.map(|n| (parent.max(0) as usize) + n);
        let mut raw_lines: Vec<&str> = Vec::new();
        while self.line < self.lines.len() {
            let (s, e) = self.lines[self.line];
            let text = &self.src[s..e];
            let trimmed = text.trim_start_matches(' ');
            let indent = text.len() - trimmed.len();
            if trimmed.is_empty() {
                raw_lines.push("");
                self.line += 1;
                continue;
            }
            let ci = *content_indent.get_or_insert(indent);
            if (indent as isize) < base || indent < ci {
                break;
            }
            raw_lines.push(&text[ci..]);
            end = e;
            self.line += 1;
        }
        // Trailing blank lines belong to the scalar only for chomping.
        let mut trailing = 0;
        while raw_lines.last() == Some(&"") {
            raw_lines.pop();
            trailing += 1;
        }
        // Leave the cursor on the first unconsumed line.
        self.line -= trailing.min(self.line);
        while self.line < self.lines.len() {
            let (s, e) = self.lines[self.line];
            if self.src[s..e].trim().is_empty() && e <= end {
                self.line += 1;
            } else {
                break;
            }
        }
        self.col = 0;

        let mut value = if literal {
            raw_lines.join("\n")
        } else {
            fold(&raw_lines)
        };
        if !raw_lines.is_empty() {
            match chomp {
                '-' => {}
                '+' => value.push_str(&"\n".repeat(trailing + 1)),
                _ => value.push('\n'),
            }
        }
        let mut n = self.node(NodeKind::Scalar, start, end);
        n.value = Some(value);
        n.value_span = Some(n.span);
        Ok(n)
    }

    /// Scan a quoted scalar starting at `start`; returns decoded value and end offset.
    fn scan_quoted(&self, start: usize) -> PResult<(String, usize)> {
        let bytes = self.src.as_bytes();
        let quote = bytes[start];
        let mut out = String::new();
        let mut i = start + 1;
        let mut chars_since_break = String::new();
        let line_of = |off: usize| self.idx.position(off).0 - 1;
        loop {
            let Some(ch) = self.src[i..].chars().next() else {
                return self.err(line_of(start), "unterminated quoted scalar");
            };
            match ch {
                c if c as u32 == quote as u32 => {
                    if quote == b'\'' && bytes.get(i + 1) == Some(&b'\'') {
                        chars_since_break.push('\'');
                        i += 2;
                        continue;
                    }
                    out.push_str(&chars_since_break);
                    return Ok((out, i + 1));
                }
                '\\' if quote == b'"' => {
                    let next = self.src[i + 1..].chars().next();
                    let (decoded, used) = match next {
                        Some('n') => (Some('\n'), 2),
                        Some('t') => (Some('\t'), 2),
                        Some('r') => (Some('\r'), 2),
                        Some('0') => (Some('\0'), 2),
                        Some('"') => (Some('"'), 2),
                        Some('\\') => (Some('\\'), 2),
                        Some('/') => (Some('/'), 2),
                        Some(' ') => (Some(' '), 2),
                        Some('x') => (hex_escape(&self.src[i + 2..], 2), 4),
                        Some('u') => (hex_escape(&self.src[i + 2..], 4), 6),
                        Some('U') => (hex_escape(&self.src[i + 2..], 8), 10),
                        Some('\n') | Some('\r') => {
                            // escaped line break: join without space
                            let mut j = i + 1;
                            while j < bytes.len() && matches!(bytes[j], b'\r' | b'\n') {
                                j += 1;
                            }
                            while j < bytes.len() && matches!(bytes[j], b' ' | b'\t') {
                                j += 1;
                            }
                            out.push_str(&chars_since_break);
                            chars_since_break.clear();
                            i = j;
                            continue;
                        }
                        _ => (None, 1),
                    };
                    match decoded {
                        Some(c) => chars_since_break.push(c),
                        None => chars_since_break.push('\\'),
                    }
                    i += used;
                }
                '\n' | '\r' => {
                    // line folding
                    out.push_str(chars_since_break.trim_end_matches([' ', '\t']));
                    chars_since_break.clear();
                    let mut breaks = 0;
                    let mut j = i;
                    while j < bytes.len() && matches!(bytes[j], b'\r' | b'\n' | b' ' | b'\t') {
                        if bytes[j] == b'\n' {
                            breaks += 1;
                        }
                        j += 1;
                    }
                    if breaks > 1 {
                        out.push_str(&"\n".repeat(breaks - 1));
                    } else {
                        out.push(' ');
                    }
                    i = j;
                }
                c => {
                    chars_since_break.push(c);
                    i += c.len_utf8();
                }
            }
        }
    }

    fn skip_flow_ws(&self, mut i: usize) -> usize {
        let bytes = self.src.as_bytes();
        while i < bytes.len() {
            match bytes[i] {
                b' ' | b'\t' | b'\r' | b'\n' => i += 1,
                b'#' if i > 0 && matches!(bytes[i - 1], b' ' | b'\t' | b'\n') => {
                    while i < bytes.len() && bytes[i] != b'\n' {
                        i += 1;
                    }
                }
                _ => break,
            }
        }
        i
    }

    fn flow_node(&mut self, start: usize) -> PResult<(ConfigNode, usize)> {
        let line = self.idx.position(start).0 - 1;
        self.enter(line)?;
        let bytes = self.src.as_bytes();
        let result = match bytes.get(start) {
            Some(b'[') => {
                let mut items = Vec::new();
                let mut i = self.skip_flow_ws(start + 1);
                loop {
                    match bytes.get(i) {
                        None => return self.err(line, "unterminated flow sequence"),
                        Some(b']') => break,
                        _ => {}
                    }
                    let (item, next) = self.flow_node(i)?;
                    items.push(item);
                    i = self.skip_flow_ws(next);
                    match bytes.get(i) {
                        Some(b',') => i = self.skip_flow_ws(i + 1),
                        Some(b']') => break,
                        _ => return self.err(line, "expected `,` or `]` in flow sequence"),
                    }
                }
                let mut n = self.node(NodeKind::Sequence, start, i + 1);
                n.children = items;
                (n, i + 1)
            }
            Some(b'{') if bytes.get(start + 1) != Some(&b'{') => {
                let mut pairs = Vec::new();
                let mut i = self.skip_flow_ws(start + 1);
                loop {
                    match bytes.get(i) {
                        None => return self.err(line, "unterminated flow mapping"),
                        Some(b'}') => break,
                        _ => {}
                    }
                    let key_start = i;
                    let (key, after_key) = if matches!(bytes[i], b'"' | b'\'') {
                        self.scan_quoted(i)?
                    } else {
                        let mut j = i;
                        while j < bytes.len()
                            && !matches!(bytes[j], b',' | b'}' | b'\n')
                            && !(bytes[j] == b':'
                                && matches!(bytes.get(j + 1), Some(b' ' | b'\t' | b'\n' | b',' | b'}')))
                        {
                            j += 1;
                        }
                        (self.src[i..j].trim_end().to_string(), j)
                    };
                    let mut j = self.skip_flow_ws(after_key);
                    let mut value = if bytes.get(j) == Some(&b':') {
                        j = self.skip_flow_ws(j + 1);
                        if matches!(bytes.get(j), Some(b',' | b'}')) {
                            self.node(NodeKind::Scalar, j, j)
                        } else {
                            let (v, next) = self.flow_node(j)?;
                            j = next;
                            v
                        }
                    } else {
                        self.node(NodeKind::Scalar, j, j)
                    };
                    if value.is_scalar_like() && value.value_span.is_none() {
                        value.value_span = Some(value.span);
                    }
                    let end = value.span.end.max(after_key);
                    value.key = Some(key);
                    value.span = self.span(key_start, end);
                    pairs.push(value);
                    i = self.skip_flow_ws(j);
                    match bytes.get(i) {
                        Some(b',') => i = self.skip_flow_ws(i + 1),
                        Some(b'}') => break,
                        _ => return self.err(line, "expected `,` or `}` in flow mapping"),
                    }
                }
                let mut n = self.node(NodeKind::Mapping, start, i + 1);
                n.children = pairs;
                (n, i + 1)
            }
            Some(b'"') | Some(b'\'') => {
                let (value, end) = self.scan_quoted(start)?;
                let mut n = self.node(NodeKind::Scalar, start, end);
                n.value = Some(value);
                n.value_span = Some(n.span);
                (n, end)
            }
            _ => {
                // plain scalar in flow context; `{{ }}` stays intact
                let mut j = start;
                let mut jinja = 0usize;
                while j < bytes.len() {
                    if bytes[j..].starts_with(b"{{") {
                        jinja += 1;
                        j += 2;
                        continue;
                    }
                    if jinja > 0 && bytes[j..].starts_with(b"}}") {
                        jinja -= 1;
                        j += 2;
                        continue;
                    }
                    if jinja == 0
                        && (matches!(bytes[j], b',' | b']' | b'}' | b'\n')
                            || bytes[j] == b':'
                                && matches!(bytes.get(j + 1), Some(b' ' | b'\n')))
                    {
                        break;
                    }
                    j += 1;
                }
                let text = self.src[start..j].trim_end();
                let end = start + text.len();
                let mut n = self.node(NodeKind::Scalar, start, end);
                n.value = Some(text.to_string());
                n.value_span = Some(n.span);
                (n, end)
            }
        };
        self.depth -= 1;
        Ok(result)
    }
}

fn hex_escape(s: &str, len: usize) -> Option<char> {
    s.get(..len)
        .and_then(|h| u32::from_str_radix(h, 16).ok())
        .and_then(char::from_u32)
}

fn fold(lines: &[&str]) -> String {
    let mut out = String::new();
    let mut prev_blank = true;
    for (i, line) in lines.iter().enumerate() {
        if line.is_empty() {
            out.push('\n');
            prev_blank = true;
            continue;
        }
        let indented = line.starts_with(' ') || line.starts_with('\t');
        if i > 0 && !prev_blank {
            out.push(if indented { '\n' } else { ' ' });
        }
        out.push_str(line);
        prev_blank = false;
    }
    out
}

fn respan(node: &mut ConfigNode, span: Span) {
    node.span = span;
    if node.value_span.is_some() {
        node.value_span = Some(span);
    }
    for c in &mut node.children {
        respan(c, span);
    }
}

/// Strip a trailing ` # comment` from plain text.
fn strip_comment(text: &str) -> &str {
    if text.starts_with('#') {
        return "";
    }
    let bytes = text.as_bytes();
    let mut jinja = 0usize;
    let mut i = 0;
    while i < bytes.len() {
        if bytes[i..].starts_with(b"{{") {
            jinja += 1;
            i += 2;
            continue;
        }
        if jinja > 0 && bytes[i..].starts_with(b"}}") {
            jinja -= 1;
            i += 2;
            continue;
        }
        if jinja == 0 && bytes[i] == b'#' && matches!(bytes[i - 1], b' ' | b'\t') {
            return &text[..i];
        }
        i += 1;
    }
    text
}

struct KeySplit {
    key_len: usize,
    colon: usize,
}

/// Locate the `key:` separator on a line, if the line is a mapping entry.
fn split_key(text: &str) -> Option<KeySplit> {
    let bytes = text.as_bytes();
    if bytes.is_empty()
        || matches!(
            bytes[0],
            b'[' | b'|' | b'>' | b'*' | b'!' | b'&' | b'#' | b'%' | b'@' | b'`'
        )
        || bytes[0] == b'{' && !text.starts_with("{{")
        || is_dash(text)
    {
        return None;
    }
    let is_sep = |i: usize| {
        bytes[i] == b':' && matches!(bytes.get(i + 1), None | Some(b' ') | Some(b'\t'))
    };
    if matches!(bytes[0], b'"' | b'\'') {
        let q = bytes[0];
        let mut i = 1;
        while i < bytes.len() {
            if q == b'"' && bytes[i] == b'\\' {
                i += 2;
                continue;
            }
            if bytes[i] == q {
                if q == b'\'' && bytes.get(i + 1) == Some(&b'\'') {
                    i += 2;
                    continue;
                }
                break;
            }
            i += 1;
        }
        let key_len = (i + 1).min(bytes.len());
        let mut j = key_len;
        while j < bytes.len() && matches!(bytes[j], b' ' | b'\t') {
            j += 1;
        }
        return (j < bytes.len() && is_sep(j)).then_some(KeySplit { key_len, colon: j });
    }
    let mut jinja = 0usize;
    let mut i = 0;
    while i < bytes.len() {
        if bytes[i..].starts_with(b"{{") {
            jinja += 1;
            i += 2;
            continue;
        }
        if jinja > 0 && bytes[i..].starts_with(b"}}") {
            jinja -= 1;
            i += 2;
            continue;
        }
        if jinja == 0 {
            if bytes[i] == b'#' && i > 0 && matches!(bytes[i - 1], b' ' | b'\t') {
                return None;
            }
            if is_sep(i) {
                let key_len = text[..i].trim_end().len();
                return (key_len > 0).then_some(KeySplit { key_len, colon: i });
            }
        }
        i += 1;
    }
    None
}

fn decode_key(raw: &str) -> String {
    let raw = raw.trim();
    if raw.len() >= 2 && raw.starts_with('\'') && raw.ends_with('\'') {
        return raw[1..raw.len() - 1].replace("''", "'");
    }
    if raw.len() >= 2 && raw.starts_with('"') && raw.ends_with('"') {
        return raw[1..raw.len() - 1]
            .replace("\\\"", "\"")
            .replace("\\\\", "\\");
    }
    raw.to_string()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(src: &str) -> ConfigNode {
        let idx = LineIndex::new(src);
        parse(src, &idx, ToolKind::Ansible).unwrap().0
    }

    fn val<'a>(n: &'a ConfigNode, key: &str) -> &'a str {
        n.child(key).and_then(|c| c.value()).unwrap_or("<none>")
    }

    #[test]
    fn block_mapping_and_sequence() {
        let root = p("a: 1\nb:\n  - x\n  - y: 2\n    z: 3\nc: end\n");
        assert_eq!(root.kind, NodeKind::Mapping);
        assert_eq!(root.children.len(), 3);
        let b = root.child("b").unwrap();
        assert_eq!(b.kind, NodeKind::Sequence);
        assert_eq!(b.children[0].value(), Some("x"));
        assert_eq!(val(&b.children[1], "z"), "3");
        assert_eq!(val(&root, "c"), "end");
    }

    #[test]
    fn compact_sequence_under_key() {
        let root = p("tasks:\n- name: a\n- name: b\nafter: 1\n");
        let tasks = root.child("tasks").unwrap();
        assert_eq!(tasks.kind, NodeKind::Sequence);
        assert_eq!(tasks.children.len(), 2);
        assert_eq!(val(&root, "after"), "1");
    }

    #[test]
    fn quoted_and_comments() {
        let root = p("a: 'it''s' # c\nb: \"x\\ty\"\nc: plain # note\nd: a#b\n");
        assert_eq!(val(&root, "a"), "it's");
        assert_eq!(val(&root, "b"), "x\ty");
        assert_eq!(val(&root, "c"), "plain");
        assert_eq!(val(&root, "d"), "a#b");
    }

    #[test]
    fn literal_block_keeps_hash() {
        let src = "content: |\n  guest ALL=(ALL) NOPASSWD:ALL #Grant\n  second\nnext: 1\n";
        let root = p(src);
        assert_eq!(
            val(&root, "content"),
            "guest ALL=(ALL) NOPASSWD:ALL #Grant\nsecond\n"
        );
        assert_eq!(val(&root, "next"), "1");
        let c = root.child("content").unwrap();
        assert_eq!(c.span.start_line, 1);
        assert_eq!(c.span.end_line, 3);
    }

    #[test]
    fn folded_block_and_chomping() {
        let root = p("a: >-\n  one\n  two\n\n  three\nb: |+\n  x\n\nc: 1\n");
        assert_eq!(val(&root, "a"), "one two\nthree");
        assert_eq!(val(&root, "b"), "x\n\n");
    }

    #[test]
    fn flow_collections() {
        let root = p("pkgs: [a, 'b', c]\nopts: {x: 1, y: \"two\"}\n");
        let pkgs = root.child("pkgs").unwrap();
        assert_eq!(pkgs.kind, NodeKind::Sequence);
        assert_eq!(pkgs.children.len(), 3);
        assert_eq!(pkgs.children[1].value(), Some("b"));
        let opts = root.child("opts").unwrap();
        assert_eq!(val(opts, "y"), "two");
    }

    #[test]
    fn jinja_values_are_plain() {
        let root = p("msg: {{ greeting }} world\nsrc: \"{{ file_path }}\"\n");
        assert_eq!(val(&root, "msg"), "{{ greeting }} world");
        assert_eq!(val(&root, "src"), "{{ file_path }}");
    }

    #[test]
    fn anchors_aliases_and_merge() {
        let root = p("base: &b\n  x: 1\n  y: 2\nother:\n  <<: *b\n  z: 3\ncopy: *b\n");
        let other = root.child("other").unwrap();
        assert_eq!(val(other, "x"), "1");
        assert_eq!(val(other, "z"), "3");
        let copy = root.child("copy").unwrap();
        assert_eq!(val(copy, "y"), "2");
        assert!(root.span.contains(&copy.children[0].span));
    }

    #[test]
    fn tags_are_kept() {
        let root = p("password: !vault |\n  $ANSIBLE_VAULT;1.1;AES256\n  6638\n");
        let pw = root.child("password").unwrap();
        assert_eq!(pw.tag.as_deref(), Some("!vault"));
        assert!(pw.value().unwrap().starts_with("$ANSIBLE_VAULT"));
    }

    #[test]
    fn multi_document_stream() {
        let root = p("---\na: 1\n---\nb: 2\n");
        assert_eq!(root.kind, NodeKind::Sequence);
        assert_eq!(root.children.len(), 2);
        let single = p("---\n- a\n");
        assert_eq!(single.kind, NodeKind::Sequence);
    }

    #[test]
    fn plain_multiline_scalar() {
        let root = p("- a\n  b\n- c\n");
        assert_eq!(root.children[0].value(), Some("a b"));
        assert_eq!(root.children[1].value(), Some("c"));
    }

    #[test]
    fn jinja_statement_lines_skipped() {
        let root = p("{% set x = 1 %}\nstate:\n  pkg.installed:\n    - name: vim\n");
        assert_eq!(root.children.len(), 1);
    }

    #[test]
    fn bad_indentation_is_an_error() {
        let src = "a: 1\n   b: 2\n";
        let idx = LineIndex::new(src);
        let err = parse(src, &idx, ToolKind::Ansible).unwrap_err();
        assert_eq!(err.line, 2);
    }

    #[test]
    fn key_splitting() {
        assert!(split_key("url: http://x").is_some());
        assert!(split_key("http://x").is_none());
        assert!(split_key("- a: b").is_none());
        assert_eq!(split_key("\"a b\": c").unwrap().key_len, 5);
        assert!(split_key("{{ x }}: y").is_some());
        assert!(split_key("echo # a: b").is_none());
    }

    #[test]
    fn null_values() {
        let root = p("a:\nb: 1\n");
        let a = root.child("a").unwrap();
        assert_eq!(a.kind, NodeKind::Scalar);
        assert_eq!(a.value(), None);
    }
}
