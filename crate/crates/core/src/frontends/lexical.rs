//! Line-oriented frontend for Chef, Puppet, Vagrant and Pulumi sources.
//!
//! Lines are grouped into statements (multi-line strings, heredocs and open
//! parentheses continue a statement). Block openers (`... do`, `type { 'x':`,
//! `new T("x", {`, any line leaving a brace open) become mapping nodes keyed by
//! their head token with a `title` child; closers (`end`, `}`) end them.
//! Inside a block, recognizable statements become keyed scalars; anything
//! else is kept as a raw span keyed by its first token. Never fails.

use std::sync::LazyLock;

use regex::Regex;

use super::{ConfigNode, NodeKind, ToolKind};
use crate::span::LineIndex;

#[derive(Debug, Clone, Copy)]
struct Lang {
    ruby: bool,
    hash_comments: bool,
    slash_comments: bool,
}

impl Lang {
    fn for_tool(tool: ToolKind, src: &str) -> Lang {
        match tool {
            ToolKind::Chef | ToolKind::Vagrant => Lang {
                ruby: true,
                hash_comments: true,
                slash_comments: false,
            },
            ToolKind::Pulumi => Lang {
                ruby: false,
                hash_comments: looks_like_python(src),
                slash_comments: true,
            },
            _ => Lang {
                ruby: false,
                hash_comments: true,
                slash_comments: false,
            },
        }
    }
}

fn looks_like_python(src: &str) -> bool {
    src.lines().any(|l| {
        let t = l.trim_start();
        t.starts_with("import pulumi") || t.starts_with("from pulumi") || t.starts_with("def ")
    })
}

#[derive(Debug, Default, Clone)]
struct ScanState {
    quote: Option<u8>,
    block_comment: bool,
    heredoc: Option<String>,
    pending_heredoc: Option<String>,
}

#[derive(Debug, Default, Clone, Copy)]
struct LineScan {
    /// End of code before any comment, relative to the line.
    code_end: usize,
    paren: i32,
    brace: i32,
    /// Leading `}` characters.
    leading_close: i32,
}

static HEREDOC_RUBY: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r#"^<<[-~]?(['"]?)([A-Za-z_][A-Za-z0-9_]*)"#).unwrap());
static HEREDOC_PUPPET: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r#"^@\(\s*"?([A-Za-z_][A-Za-z0-9_]*)"?[^)]*\)"#).unwrap());

fn scan_line(line: &str, st: &mut ScanState, lang: Lang) -> LineScan {
    let b = line.as_bytes();
    let mut out = LineScan {
        code_end: b.len(),
        ..Default::default()
    };
    let mut i = 0;
    let mut seen_code = false;
    while i < b.len() {
        let c = b[i];
        if st.block_comment {
            if line[i..].starts_with("*/") {
                st.block_comment = false;
                i += 2;
            } else {
                i += 1;
            }
            continue;
        }
        if let Some(q) = st.quote {
            if c == b'\\' {
                i += 2;
                continue;
            }
            if c == q {
                st.quote = None;
            }
            i += 1;
            continue;
        }
        match c {
            b'"' | b'\'' | b'`' => st.quote = Some(c),
            b'#' if lang.hash_comments && !(lang.ruby && b.get(i + 1) == Some(&b'{')) => {
                if !lang.slash_comments || !seen_code {
                    out.code_end = i;
                    break;
                }
            }
            b'/' if lang.slash_comments && b.get(i + 1) == Some(&b'/') => {
                out.code_end = i;
                break;
            }
            b'/' if lang.slash_comments && b.get(i + 1) == Some(&b'*') => {
                st.block_comment = true;
                i += 2;
                continue;
            }
            b'<' if lang.ruby && line[i..].starts_with("<<") => {
                if let Some(m) = HEREDOC_RUBY.captures(&line[i..]) {
                    st.pending_heredoc = Some(m[2].to_string());
                    i += m.get(0).unwrap().end();
                    continue;
                }
            }
            b'@' if !lang.ruby && !lang.slash_comments => {
                if let Some(m) = HEREDOC_PUPPET.captures(&line[i..]) {
                    st.pending_heredoc = Some(m[1].to_string());
                    i += m.get(0).unwrap().end();
                    continue;
                }
            }
            b'(' | b'[' => out.paren += 1,
            b')' | b']' => out.paren -= 1,
            b'{' => out.brace += 1,
            b'}' => {
                if !seen_code || (out.leading_close > 0 && line[..i].trim().chars().all(|c| c == '}')) {
                    out.leading_close += 1;
                }
                out.brace -= 1;
            }
            _ => {}
        }
        if !c.is_ascii_whitespace() {
            seen_code = true;
        }
        i += 1;
    }
    // Ruby/JS strings may span lines; Puppet and Ruby single-quoted too.
    out
}

fn heredoc_ends(line: &str, tag: &str) -> bool {
    let t = line.trim();
    let t = t.trim_start_matches('|').trim_start_matches('-').trim();
    t == tag
}

#[derive(Debug, Clone, Copy)]
struct Stmt {
    start: usize,
    end: usize,
    paren: i32,
    brace: i32,
    leading_close: i32,
}

fn statements(src: &str, idx: &LineIndex, lang: Lang) -> Vec<Stmt> {
    let mut out = Vec::new();
    let mut st = ScanState::default();
    let n = idx.line_count();
    let mut cur: Option<Stmt> = None;
    for line_no in 1..=n {
        let (ls, le) = idx.line_range(src, line_no);
        let line = &src[ls..le];

        if let Some(tag) = st.heredoc.clone() {
            if let Some(c) = cur.as_mut() {
                c.end = ls + line.trim_end().len();
            }
            if heredoc_ends(line, &tag) {
                st.heredoc = None;
                if let Some(c) = cur.take() {
                    if c.paren > 0 {
                        cur = Some(c);
                    } else {
                        out.push(c);
                    }
                }
            }
            continue;
        }

        let in_string = st.quote.is_some();
        let in_comment = st.block_comment;
        let scan = scan_line(line, &mut st, lang);
        let code = &line[..scan.code_end];
        let trimmed = code.trim();
        let code_start = ls + (code.len() - code.trim_start().len());
        let code_end = ls + code.trim_end().len();

        match cur.as_mut() {
            Some(c) => {
                if !trimmed.is_empty() || in_string {
                    c.end = c.end.max(code_end);
                }
                c.paren += scan.paren;
                c.brace += scan.brace;
            }
            None => {
                if trimmed.is_empty() || (in_comment && st.block_comment) {
                    continue;
                }
                cur = Some(Stmt {
                    start: code_start,
                    end: code_end,
                    paren: scan.paren,
                    brace: scan.brace,
                    leading_close: scan.leading_close,
                });
            }
        }

        if let Some(tag) = st.pending_heredoc.take() {
            st.heredoc = Some(tag);
            continue;
        }
        let c = cur.expect("statement in progress");
        let text = &src[c.start..c.end];
        let opener = text.ends_with('{') || (lang.ruby && RUBY_DO.is_match(text));
        let continues = st.quote.is_some()
            || (c.paren > 0 && !opener)
            || (lang.ruby && (text.ends_with(',') || text.ends_with('\\')))
            || text.ends_with("&&")
            || text.ends_with("||")
            || (text.ends_with(" +") && !lang.ruby);
        if !continues || line_no == n {
            out.push(c);
            cur = None;
        }
    }
    if let Some(c) = cur {
        out.push(c);
    }
    out
}

static RUBY_DO: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?:^|[\s)])do(?:\s*\|[^|]*\|)?$").unwrap());
static RUBY_KEYWORD_OPEN: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"^(if|unless|case|while|until|begin|def|class|module|for)\b").unwrap()
});
static RUBY_END: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"^end\b[\s.)]*\S*$").unwrap());
static PUPPET_RESOURCE: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"(?s)^(@{0,2}[A-Za-z_][\w:]*)\s*\{\s*((?:'[^']*'|\x22[^\x22]*\x22|\$[\w:]+|\[[^\]]*\]))\s*:\s*(.*)$")
        .unwrap()
});
static PUPPET_CLASS: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"^(class|define|node)\s+([^\s({]+)").unwrap());
static PULUMI_NEW: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(
        r"(?s)^(?:export\s+)?(?:(?:const|let|var)\s+([A-Za-z_$][\w$]*)\s*=\s*)?(?:await\s+)?new\s+([\w.]+)\s*\(\s*(['\x22`])(.*?)['\x22`]\s*(.*)$",
    )
    .unwrap()
});
static ARROW_ATTR: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"(?s)^:?([\w$:.-]+|'[^']*'|\x22[^\x22]*\x22)\s*=>\s*(.*?)\s*[,;]?$").unwrap()
});
static IMPORT: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r#"^(?:import\b|from\s+\S+\s+import\b|(?:(?:const|let|var)\s+[^=]+=\s*)?require\s*\(?\s*['"])"#)
        .unwrap()
});
static ASSIGN: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(
        r"(?s)^(?:export\s+)?(?:(?:const|let|var)\s+)?([$@]{0,2}[A-Za-z_][\w.:]*(?:\[[^\]]*\])*)\s*(?:\|\|=|\+=|=)\s*(.*?)\s*;?$",
    )
    .unwrap()
});
static COLON_ATTR: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"(?s)^([A-Za-z_][\w-]*|'[^']*'|\x22[^\x22]*\x22)\s*:\s+(.*?)\s*,?$").unwrap()
});
static CALL: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"(?s)^([A-Za-z_][\w.:]*[?!]?)(?:\s*\(\s*(.*?)\s*\)\s*;?|\s+(.+?))$").unwrap()
});
static HEAD: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"^[^\s({\[,;]+").unwrap());

struct Open {
    node: ConfigNode,
    ruby_end: bool,
    braces: i32,
}

struct Builder<'a> {
    src: &'a str,
    idx: &'a LineIndex,
    tool: ToolKind,
    stack: Vec<Open>,
    root: Vec<ConfigNode>,
}

impl<'a> Builder<'a> {
    fn node(&self, kind: NodeKind, start: usize, end: usize) -> ConfigNode {
        ConfigNode::new(kind, self.idx.span(start, end), self.tool)
    }

    fn push_child(&mut self, child: ConfigNode) {
        match self.stack.last_mut() {
            Some(open) => open.node.children.push(child),
            None => self.root.push(child),
        }
    }

    fn close(&mut self, end: usize) {
        if let Some(mut open) = self.stack.pop() {
            let stop = end.max(open.node.span.end);
            open.node.span = self.idx.span(open.node.span.start, stop);
            self.push_child(open.node);
        }
    }

    fn close_ruby(&mut self, end: usize) {
        if let Some(pos) = self.stack.iter().rposition(|o| o.ruby_end) {
            while self.stack.len() > pos + 1 {
                let e = self.stack.last().unwrap().node.span.end;
                self.close(e);
            }
            self.close(end);
        }
    }

    fn close_braces(&mut self, mut count: i32, end: usize) {
        while count > 0 {
            let Some(pos) = self.stack.iter().rposition(|o| !o.ruby_end) else {
                return;
            };
            while self.stack.len() > pos + 1 {
                let e = self.stack.last().unwrap().node.span.end;
                self.close(e);
            }
            let top = self.stack.last_mut().unwrap();
            top.braces -= 1;
            count -= 1;
            if top.braces <= 0 {
                self.close(end);
            }
        }
    }

    fn open(&mut self, mut node: ConfigNode, ruby_end: bool, braces: i32) {
        node.kind = NodeKind::Mapping;
        self.stack.push(Open {
            node,
            ruby_end,
            braces,
        });
    }

    fn finish(mut self) -> Vec<ConfigNode> {
        while !self.stack.is_empty() {
            let e = self.stack.last().unwrap().node.span.end;
            let child_end = self
                .stack
                .last()
                .unwrap()
                .node
                .children
                .last()
                .map(|c| c.span.end)
                .unwrap_or(e);
            self.close(child_end.max(e));
        }
        self.root
    }

    fn statement(&mut self, s: Stmt, lang: Lang) {
        let text = &self.src[s.start..s.end];
        // Leading closers (`}`, `} else {`, `});`).
        let mut body_start = s.start;
        if s.leading_close > 0 {
            let lead = text.len()
                - text
                    .trim_start_matches(|c: char| c == '}' || c.is_whitespace())
                    .len();
            let close_at = s.start + text[..lead].trim_end().len();
            let rest = &self.src[close_at..s.end];
            let only_punct = rest
                .trim_start_matches([')', ']', ';', ',', ' ', '\t', '}'])
                .is_empty();
            let rest_trim = rest.trim_start_matches(|c: char| c == '}' || c.is_whitespace());
            self.close_braces(s.leading_close, if only_punct { s.end } else { close_at });
            body_start = s.end - rest_trim.len();
        }
        let text = &self.src[body_start..s.end];
        let trimmed_closer = text.trim_start_matches([')', ']', ';', ',', ' ', '\t', '}']);
        if trimmed_closer.is_empty() {
            return;
        }
        let net = s.brace + s.leading_close;

        if lang.ruby {
            if RUBY_END.is_match(text) {
                self.close_ruby(s.end);
                return;
            }
            if let Some(m) = RUBY_DO.find(text) {
                let head = text[..m.start()].trim_end();
                let node = self.call_node(body_start, body_start + head.len(), true);
                self.open(node, true, 0);
                return;
            }
            if RUBY_KEYWORD_OPEN.is_match(text) && !text.ends_with(" end") && !text.contains("; end") {
                let kw = RUBY_KEYWORD_OPEN.find(text).unwrap();
                let mut node = self.node(NodeKind::Mapping, body_start, s.end);
                node.key = Some(kw.as_str().to_string());
                let rest = text[kw.end()..].trim_start();
                if !rest.is_empty() {
                    let rs = s.end - rest.len();
                    node.children.push(self.scalar("title", rs, s.end));
                }
                self.open(node, true, 0);
                return;
            }
        }

        if net > 0 {
            let node = self.block_header(body_start, s.end, lang);
            if let Some(node) = node {
                self.open(node, false, net);
                return;
            }
        }

        // Single-line Puppet resource `type { 'title': attrs }`.
        if net == 0 && !lang.ruby && !lang.slash_comments {
            if let Some(mut node) = self.puppet_resource(body_start, s.end) {
                node.kind = NodeKind::Mapping;
                self.push_child(node);
                return;
            }
        }

        let node = self.plain_statement(body_start, s.end);
        self.push_child(node);
        if net < 0 {
            self.close_braces(-net, s.end);
        }
    }

    fn scalar(&self, key: &str, start: usize, end: usize) -> ConfigNode {
        let raw = &self.src[start..end];
        let mut n = self.node(NodeKind::Scalar, start, end);
        n.key = Some(key.to_string());
        n.value = Some(decode_literal(raw));
        n.value_span = Some(n.span);
        n
    }

    fn keyed_scalar(&self, key: &str, start: usize, vstart: usize, vend: usize) -> ConfigNode {
        let mut n = self.scalar(key, vstart, vend);
        n.span = self.idx.span(start, vend.max(start));
        n
    }

    fn block_header(&self, start: usize, end: usize, lang: Lang) -> Option<ConfigNode> {
        let text = &self.src[start..end];
        let header = text.trim_end().trim_end_matches('{').trim_end();
        if !lang.slash_comments {
            if let Some(node) = self.puppet_resource(start, end) {
                return Some(node);
            }
            if let Some(c) = PUPPET_CLASS.captures(header) {
                let mut node = self.node(NodeKind::Mapping, start, end);
                node.key = Some(c[1].to_string());
                let t = c.get(2).unwrap();
                node.children
                    .push(self.scalar("title", start + t.start(), start + t.end()));
                return Some(node);
            }
        }
        if let Some(node) = self.pulumi_new(start, end) {
            return Some(node);
        }
        let mut node = self.node(NodeKind::Mapping, start, end);
        if let Some(c) = ASSIGN.captures(header) {
            node.key = Some(c[1].to_string());
        } else {
            let head = HEAD.find(header).map(|m| m.as_str()).unwrap_or("");
            let key = unquote_key(head.trim_end_matches(':'));
            node.key = Some(if key.is_empty() { "block".to_string() } else { key });
            let rest = header[head.len()..].trim();
            if !rest.is_empty() {
                let rs = start + header.len() - rest.len();
                node.children.push(self.scalar("title", rs, rs + rest.len()));
            }
        }
        Some(node)
    }

    fn puppet_resource(&self, start: usize, end: usize) -> Option<ConfigNode> {
        let text = &self.src[start..end];
        let c = PUPPET_RESOURCE.captures(text)?;
        let mut node = self.node(NodeKind::Mapping, start, end);
        node.key = Some(c[1].to_string());
        let t = c.get(2).unwrap();
        node.children
            .push(self.scalar("title", start + t.start(), start + t.end()));
        let rest = c.get(3).unwrap();
        let rest_text = rest.as_str().trim_end().trim_end_matches('}').trim_end();
        let rs = start + rest.start();
        for (a, b) in split_top_level(rest_text, b",;") {
            let piece = &rest_text[a..b];
            let lead = piece.len() - piece.trim_start().len();
            let ps = rs + a + lead;
            let pe = rs + a + piece.trim_end().len();
            if ps < pe {
                node.children.push(self.plain_statement(ps, pe));
            }
        }
        Some(node)
    }

    fn pulumi_new(&self, start: usize, end: usize) -> Option<ConfigNode> {
        let text = &self.src[start..end];
        let c = PULUMI_NEW.captures(text)?;
        let mut node = self.node(NodeKind::Mapping, start, end);
        node.key = Some(c[2].to_string());
        let t = c.get(4).unwrap();
        // include the quotes in the title span
        node.children
            .push(self.scalar("title", start + t.start() - 1, start + t.end() + 1));
        if let Some(b) = c.get(1) {
            node.children
                .push(self.scalar("binding", start + b.start(), start + b.end()));
        }
        // inline object `{ k: v, ... }` on the same line
        let rest = c.get(5).unwrap();
        let r = rest.as_str();
        if let (Some(o), Some(cl)) = (r.find('{'), r.rfind('}')) {
            if o < cl {
                let inner = &r[o + 1..cl];
                let base = start + rest.start() + o + 1;
                for (a, b) in split_top_level(inner, b",") {
                    let piece = &inner[a..b];
                    let lead = piece.len() - piece.trim_start().len();
                    let ps = base + a + lead;
                    let pe = base + a + piece.trim_end().len();
                    if ps < pe {
                        node.children.push(self.plain_statement(ps, pe));
                    }
                }
            }
        }
        Some(node)
    }

    /// Ruby-style call `head arg, k: v`; the head part of a `do` block.
    fn call_node(&self, start: usize, end: usize, block: bool) -> ConfigNode {
        let text = &self.src[start..end];
        let Some(c) = CALL.captures(text) else {
            let mut node = self.node(NodeKind::Mapping, start, end);
            let head = HEAD.find(text).map(|m| m.as_str()).unwrap_or("block");
            node.key = Some(head.to_string());
            return node;
        };
        let head = c[1].to_string();
        let args = c.get(2).or(c.get(3)).unwrap();
        let a_text = args.as_str();
        let a_base = start + args.start();
        let parts: Vec<(usize, usize)> = split_top_level(a_text, b",")
            .into_iter()
            .map(|(a, b)| {
                let p = &a_text[a..b];
                let lead = p.len() - p.trim_start().len();
                (a_base + a + lead, a_base + a + p.trim_end().len())
            })
            .filter(|(a, b)| a < b)
            .collect();
        let kwarg = |s: usize, e: usize| -> Option<ConfigNode> {
            let p = &self.src[s..e];
            if let Some(k) = KWARG.captures(p) {
                let key = unquote_key(k[1].trim_start_matches(':'));
                let v = k.get(2).unwrap();
                return Some(self.keyed_scalar(&key, s, s + v.start(), s + v.end()));
            }
            None
        };
        if !block && parts.len() == 1 && kwarg(parts[0].0, parts[0].1).is_none() {
            let (s, e) = parts[0];
            return self.keyed_scalar(&head, start, s, e);
        }
        if !block && (parts.is_empty() || parts.iter().skip(1).all(|&(s, e)| kwarg(s, e).is_none()) && parts.len() > 1)
        {
            let (s, e) = (parts.first().map(|p| p.0).unwrap_or(end), parts.last().map(|p| p.1).unwrap_or(end));
            return self.keyed_scalar(&head, start, s, e);
        }
        let mut node = self.node(NodeKind::Mapping, start, end);
        node.key = Some(head);
        for (i, &(s, e)) in parts.iter().enumerate() {
            match kwarg(s, e) {
                Some(k) => node.children.push(k),
                None if i == 0 => node.children.push(self.scalar("title", s, e)),
                None => node.children.push(self.scalar("arg", s, e)),
            }
        }
        node
    }

    fn plain_statement(&self, start: usize, end: usize) -> ConfigNode {
        let text = &self.src[start..end];
        let text_trim = text.trim_end_matches([';', ',']).trim_end();
        let end = start + text_trim.len();
        let text = text_trim;

        if IMPORT.is_match(text) {
            let key = if text.contains("require") { "require" } else { "import" };
            let mut n = self.node(NodeKind::RawSpan, start, end);
            n.key = Some(key.to_string());
            n.value = Some(text.to_string());
            return n;
        }
        if let Some(node) = self.pulumi_new(start, end) {
            let mut node = node;
            node.kind = NodeKind::Mapping;
            return node;
        }
        if let Some(c) = ARROW_ATTR.captures(text) {
            let v = c.get(2).unwrap();
            if v.start() < v.end() {
                return self.keyed_scalar(
                    &unquote_key(&c[1]),
                    start,
                    start + v.start(),
                    start + v.end(),
                );
            }
        }
        if let Some(c) = ASSIGN.captures(text) {
            let v = c.get(2).unwrap();
            let eq_ok = !text[c.get(1).unwrap().end()..].trim_start().starts_with("==");
            if eq_ok && v.start() < v.end() {
                return self.keyed_scalar(&c[1], start, start + v.start(), start + v.end());
            }
        }
        if let Some(c) = COLON_ATTR.captures(text) {
            let v = c.get(2).unwrap();
            return self.keyed_scalar(&unquote_key(&c[1]), start, start + v.start(), start + v.end());
        }
        if CALL.is_match(text) {
            return self.call_node(start, end, false);
        }
        let mut n = self.node(NodeKind::RawSpan, start, end);
        let head = HEAD.find(text).map(|m| m.as_str()).unwrap_or("stmt");
        n.key = Some(head.to_string());
        n.value = Some(text.to_string());
        n
    }
}

static KWARG: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"(?s)^(:?[A-Za-z_][\w-]*|'[^']*'|\x22[^\x22]*\x22)\s*(?::\s|=>\s*|=\s*)(.+)$").unwrap()
});

/// Split on separator bytes outside quotes and brackets. Returns ranges.
fn split_top_level(text: &str, seps: &[u8]) -> Vec<(usize, usize)> {
    let b = text.as_bytes();
    let mut out = Vec::new();
    let mut depth = 0i32;
    let mut quote: Option<u8> = None;
    let mut start = 0;
    let mut i = 0;
    while i < b.len() {
        let c = b[i];
        if let Some(q) = quote {
            if c == b'\\' {
                i += 2;
                continue;
            }
            if c == q {
                quote = None;
            }
        } else if text[i..].starts_with("<<") && HEREDOC_RUBY.is_match(&text[i..]) {
            // heredoc bodies are never split
            out.push((start, b.len()));
            return out;
        } else {
            match c {
                b'"' | b'\'' | b'`' => quote = Some(c),
                b'(' | b'[' | b'{' => depth += 1,
                b')' | b']' | b'}' => depth -= 1,
                _ if depth == 0 && seps.contains(&c) => {
                    out.push((start, i));
                    start = i + 1;
                }
                _ => {}
            }
        }
        i += 1;
    }
    out.push((start, b.len().max(start)));
    out
}

fn unquote_key(k: &str) -> String {
    super::unquote(k.trim()).to_string()
}

/// Decode a literal: quoted strings, heredocs, or raw text.
pub(crate) fn decode_literal(raw: &str) -> String {
    let t = raw.trim();
    if let Some(m) = HEREDOC_RUBY.captures(t) {
        let tag = &m[2];
        let body_start = t.find('\n').map(|i| i + 1).unwrap_or(t.len());
        let body = &t[body_start..];
        let body_end = body
            .rfind('\n')
            .filter(|&i| body[i + 1..].trim() == tag)
            .map(|i| i + 1)
            .unwrap_or_else(|| if body.trim() == tag { 0 } else { body.len() });
        let body = &body[..body_end];
        return if t.starts_with("<<~") {
            dedent(body)
        } else {
            body.to_string()
        };
    }
    if let Some(m) = HEREDOC_PUPPET.captures(t) {
        let _ = m;
        let body_start = t.find('\n').map(|i| i + 1).unwrap_or(t.len());
        let body = &t[body_start..];
        let body_end = body.rfind('\n').unwrap_or(0);
        return dedent(&body[..body_end]);
    }
    let b = t.as_bytes();
    if b.len() >= 2 && matches!(b[0], b'"' | b'\'' | b'`') && b[b.len() - 1] == b[0] {
        let inner = &t[1..t.len() - 1];
        let q = b[0] as char;
        if !inner.contains(q) || inner.contains(&format!("\\{q}")) {
            let mut out = String::with_capacity(inner.len());
            let mut chars = inner.chars();
            while let Some(c) = chars.next() {
                if c == '\\' {
                    match chars.next() {
                        Some('n') if q != '\'' => out.push('\n'),
                        Some('t') if q != '\'' => out.push('\t'),
                        Some(o) if o == q || o == '\\' => out.push(o),
                        Some(o) => {
                            out.push('\\');
                            out.push(o);
                        }
                        None => out.push('\\'),
                    }
                } else {
                    out.push(c);
                }
            }
            return out;
        }
    }
    t.to_string()
}

fn dedent(body: &str) -> String {
    let indent = body
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| l.len() - l.trim_start().len())
        .min()
        .unwrap_or(0);
    let mut out: Vec<&str> = Vec::new();
    for l in body.lines() {
        out.push(l.get(indent..).unwrap_or(l.trim_start()));
    }
    let mut s = out.join("\n");
    if !s.is_empty() {
        s.push('\n');
    }
    s
}

pub(super) fn parse(src: &str, idx: &LineIndex, tool: ToolKind) -> ConfigNode {
    let lang = Lang::for_tool(tool, src);
    let mut b = Builder {
        src,
        idx,
        tool,
        stack: Vec::new(),
        root: Vec::new(),
    };
    for s in statements(src, idx, lang) {
        b.statement(s, lang);
    }
    let children = b.finish();
    let (start, end) = match (children.first(), children.last()) {
        (Some(f), Some(l)) => (f.span.start, l.span.end),
        _ => (0, 0),
    };
    let mut root = ConfigNode::new(NodeKind::Mapping, idx.span(start, end), tool);
    root.children = children;
    root
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(tool: ToolKind, src: &str) -> ConfigNode {
        let idx = LineIndex::new(src);
        parse(src, &idx, tool)
    }

    fn val<'a>(n: &'a ConfigNode, key: &str) -> &'a str {
        n.child(key).and_then(|c| c.value()).unwrap_or("<none>")
    }

    #[test]
    fn chef_resource_block() {
        let src = "# recipe\npackage 'openssl' do\n  version '1.0.1'\n  action :install\nend\n";
        let root = p(ToolKind::Chef, src);
        assert_eq!(root.children.len(), 1);
        let pkg = &root.children[0];
        assert_eq!(pkg.key(), Some("package"));
        assert_eq!(val(pkg, "title"), "openssl");
        assert_eq!(val(pkg, "version"), "1.0.1");
        assert_eq!(val(pkg, "action"), ":install");
        assert!(pkg.span.text(src).ends_with("end"));
    }

    #[test]
    fn chef_heredoc() {
        let src = "bash 'run' do\n  code <<-EOH\n    rm -rf #{node['dir']}\n  EOH\nend\n";
        let root = p(ToolKind::Chef, src);
        let bash = &root.children[0];
        let code = bash.child("code").unwrap();
        assert_eq!(code.value(), Some("    rm -rf #{node['dir']}\n"));
        assert!(code.span.text(src).starts_with("code <<-EOH"));
    }

    #[test]
    fn vagrant_nested_blocks() {
        let src = "Vagrant.configure(\"2\") do |config|\n  config.vm.box = \"ubuntu/trusty64\"\n  config.vm.provision \"shell\", inline: \"echo #{ENV['X']}\"\n  config.vm.provider \"virtualbox\" do |vb|\n    vb.memory = 1024\n  end\nend\n";
        let root = p(ToolKind::Vagrant, src);
        let cfg = &root.children[0];
        assert_eq!(cfg.key(), Some("Vagrant.configure"));
        assert_eq!(val(cfg, "config.vm.box"), "ubuntu/trusty64");
        let prov = cfg.child("config.vm.provision").unwrap();
        assert_eq!(prov.kind, NodeKind::Mapping);
        assert_eq!(val(prov, "title"), "shell");
        assert_eq!(val(prov, "inline"), "echo #{ENV['X']}");
        let vb = cfg.child("config.vm.provider").unwrap();
        assert_eq!(val(vb, "vb.memory"), "1024");
    }

    #[test]
    fn puppet_resources() {
        let src = "class web {\n  package { 'openssl':\n    ensure => '1.0.1',\n  }\n  service { 'nginx': ensure => running }\n  $pkg = 'x'\n}\n";
        let root = p(ToolKind::Puppet, src);
        let class = &root.children[0];
        assert_eq!(class.key(), Some("class"));
        assert_eq!(val(class, "title"), "web");
        let pkg = class.child("package").unwrap();
        assert_eq!(val(pkg, "title"), "openssl");
        assert_eq!(val(pkg, "ensure"), "1.0.1");
        let svc = class.child("service").unwrap();
        assert_eq!(val(svc, "ensure"), "running");
        assert_eq!(val(class, "$pkg"), "x");
    }

    #[test]
    fn pulumi_resources() {
        let src = "import * as aws from \"@pulumi/aws\";\n\nconst bucket = new aws.s3.Bucket(\"my-bucket\", {\n    acl: \"private\",\n    tags: { Env: \"dev\" },\n});\nconst token = process.env.TOKEN; // secret\n";
        let root = p(ToolKind::Pulumi, src);
        assert_eq!(root.children[0].key(), Some("import"));
        assert_eq!(root.children[0].kind, NodeKind::RawSpan);
        let b = &root.children[1];
        assert_eq!(b.key(), Some("aws.s3.Bucket"));
        assert_eq!(val(b, "title"), "my-bucket");
        assert_eq!(val(b, "binding"), "bucket");
        assert_eq!(val(b, "acl"), "private");
        assert!(b.span.text(src).ends_with("});"));
        assert_eq!(root.children[2].key(), Some("token"));
        assert_eq!(root.children[2].value(), Some("process.env.TOKEN"));
    }

    #[test]
    fn tolerates_garbage() {
        for src in ["}}}}", "end end", "do\n", "'unterminated\n", "<<-EOH\nno end", "{ { {"] {
            for tool in [ToolKind::Chef, ToolKind::Puppet, ToolKind::Pulumi] {
                let root = p(tool, src);
                for n in root.walk() {
                    assert!(root.span.contains(&n.span) || n.span == root.span);
                }
            }
        }
    }

    #[test]
    fn spans_nest() {
        let src = "if node['x']\n  package 'a'\nend\nfile '/etc/motd' do\n  content 'hi'\nend\n";
        let root = p(ToolKind::Chef, src);
        fn check(n: &ConfigNode) {
            for c in &n.children {
                assert!(n.span.contains(&c.span), "{:?} !< {:?}", c.span, n.span);
                check(c);
            }
        }
        check(&root);
        assert_eq!(root.children.len(), 2);
    }
}
