//! Parser for the HTML subset accepted in topic files.
//!
//! Block elements: `p`, `h1`-`h6`, `ul`, `ol`, `li`, `table` (with optional
//! `thead`/`tbody`), `tr`, `th`, `td`, `pre`, `img`. Inline elements `strong`,
//! `b`, `em`, `i`, `code`, `a`, `span` and `br` are read as plain text.
//! Anything else is rejected, and every tag must be closed explicitly.

use super::model::{Block, BlockKind, Table};
use super::CorpusError;

const VOID: &[&str] = &["img", "br"];
const INLINE: &[&str] = &["strong", "b", "em", "i", "code", "a", "span", "br"];
const BLOCK: &[&str] = &[
    "p", "h1", "h2", "h3", "h4", "h5", "h6", "ul", "ol", "li", "table", "thead", "tbody", "tr",
    "th", "td", "pre", "img",
];

#[derive(Debug)]
enum Node {
    Element(Element),
    Text(String),
}

#[derive(Debug)]
struct Element {
    name: String,
    attrs: Vec<(String, String)>,
    children: Vec<Node>,
    line: usize,
}

impl Element {
    fn attr(&self, key: &str) -> Option<&str> {
        self.attrs
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }
}

enum Token {
    Open {
        name: String,
        attrs: Vec<(String, String)>,
        self_closing: bool,
        line: usize,
    },
    Close {
        name: String,
        line: usize,
    },
    Text(String),
}

struct Lexer<'a> {
    src: &'a str,
    pos: usize,
    line: usize,
}

impl<'a> Lexer<'a> {
    fn new(src: &'a str) -> Self {
        Lexer { src, pos: 0, line: 1 }
    }

    fn advance(&mut self, n: usize) {
        self.line += self.src[self.pos..self.pos + n].matches('\n').count();
        self.pos += n;
    }

    fn next_token(&mut self) -> Result<Option<Token>, CorpusError> {
        let rest = &self.src[self.pos..];
        if rest.is_empty() {
            return Ok(None);
        }
        if rest.starts_with("<!--") {
            let Some(end) = rest.find("-->") else {
                return Err(malformed(self.line, "unterminated comment"));
            };
            self.advance(end + 3);
            return self.next_token();
        }
        if let Some(after) = rest.strip_prefix('<') {
            let line = self.line;
            let Some(end) = after.find('>') else {
                return Err(malformed(line, "unterminated tag"));
            };
            let inner = &after[..end];
            self.advance(end + 2);
            if let Some(name) = inner.strip_prefix('/') {
                return Ok(Some(Token::Close {
                    name: name.trim().to_ascii_lowercase(),
                    line,
                }));
            }
            let self_closing = inner.trim_end().ends_with('/');
            let inner = inner.trim_end().trim_end_matches('/');
            let (name, attrs) = parse_tag(inner, line)?;
            return Ok(Some(Token::Open {
                name,
                attrs,
                self_closing,
                line,
            }));
        }
        let end = rest.find('<').unwrap_or(rest.len());
        let text = decode_entities(&rest[..end]);
        self.advance(end);
        Ok(Some(Token::Text(text)))
    }
}

fn parse_tag(inner: &str, line: usize) -> Result<(String, Vec<(String, String)>), CorpusError> {
    let inner = inner.trim();
    let name_end = inner
        .find(|c: char| c.is_whitespace())
        .unwrap_or(inner.len());
    let name = inner[..name_end].to_ascii_lowercase();
    if name.is_empty() || !name.chars().all(|c| c.is_ascii_alphanumeric()) {
        return Err(malformed(line, format!("bad tag <{inner}>")));
    }
    let mut attrs = Vec::new();
    let mut rest = inner[name_end..].trim_start();
    while !rest.is_empty() {
        let key_end = rest
            .find(|c: char| c == '=' || c.is_whitespace())
            .unwrap_or(rest.len());
        let key = rest[..key_end].to_ascii_lowercase();
        rest = rest[key_end..].trim_start();
        let mut value = String::new();
        if let Some(after_eq) = rest.strip_prefix('=') {
            let after_eq = after_eq.trim_start();
            let quote = after_eq.chars().next();
            match quote {
                Some(q @ ('"' | '\'')) => {
                    let body = &after_eq[1..];
                    let Some(close) = body.find(q) else {
                        return Err(malformed(line, format!("unterminated attribute {key}")));
                    };
                    value = decode_entities(&body[..close]);
                    rest = body[close + 1..].trim_start();
                }
                _ => {
                    let end = after_eq
                        .find(|c: char| c.is_whitespace())
                        .unwrap_or(after_eq.len());
                    value = decode_entities(&after_eq[..end]);
                    rest = after_eq[end..].trim_start();
                }
            }
        }
        if !key.is_empty() {
            attrs.push((key, value));
        }
    }
    Ok((name, attrs))
}

pub(crate) fn decode_entities(text: &str) -> String {
    if !text.contains('&') {
        return text.to_string();
    }
    let mut out = String::with_capacity(text.len());
    let mut rest = text;
    while let Some(amp) = rest.find('&') {
        out.push_str(&rest[..amp]);
        let tail = &rest[amp..];
        let semi = tail
            .char_indices()
            .take_while(|(i, _)| *i < 12)
            .find(|(_, c)| *c == ';')
            .map(|(i, _)| i);
        let Some(semi) = semi else {
            out.push('&');
            rest = &tail[1..];
            continue;
        };
        let entity = &tail[1..semi];
        let decoded = match entity {
            "amp" => Some('&'),
            "lt" => Some('<'),
            "gt" => Some('>'),
            "quot" => Some('"'),
            "apos" | "#39" => Some('\''),
            "nbsp" => Some(' '),
            _ => entity
                .strip_prefix("#x")
                .or_else(|| entity.strip_prefix("#X"))
                .and_then(|h| u32::from_str_radix(h, 16).ok())
                .or_else(|| entity.strip_prefix('#').and_then(|d| d.parse().ok()))
                .and_then(char::from_u32),
        };
        match decoded {
            Some(c) => {
                out.push(c);
                rest = &tail[semi + 1..];
            }
            None => {
                out.push('&');
                rest = &tail[1..];
            }
        }
    }
    out.push_str(rest);
    out
}

fn malformed(line: usize, message: impl Into<String>) -> CorpusError {
    CorpusError::MalformedMarkup {
        line,
        message: message.into(),
    }
}

fn build_tree(src: &str) -> Result<Vec<Node>, CorpusError> {
    let mut lexer = Lexer::new(src);
    let mut stack: Vec<Element> = Vec::new();
    let mut roots: Vec<Node> = Vec::new();

    fn push(stack: &mut [Element], roots: &mut Vec<Node>, node: Node) {
        match stack.last_mut() {
            Some(parent) => parent.children.push(node),
            None => roots.push(node),
        }
    }

    while let Some(token) = lexer.next_token()? {
        match token {
            Token::Text(t) => push(&mut stack, &mut roots, Node::Text(t)),
            Token::Open {
                name,
                attrs,
                self_closing,
                line,
            } => {
                if !BLOCK.contains(&name.as_str()) && !INLINE.contains(&name.as_str()) {
                    return Err(CorpusError::UnsupportedElement {
                        line,
                        element: name,
                    });
                }
                let el = Element {
                    name,
                    attrs,
                    children: Vec::new(),
                    line,
                };
                if self_closing || VOID.contains(&el.name.as_str()) {
                    push(&mut stack, &mut roots, Node::Element(el));
                } else {
                    stack.push(el);
                }
            }
            Token::Close { name, line } => {
                if VOID.contains(&name.as_str()) {
                    continue;
                }
                match stack.pop() {
                    Some(el) if el.name == name => push(&mut stack, &mut roots, Node::Element(el)),
                    Some(el) => {
                        return Err(malformed(
                            line,
                            format!("</{name}> closes <{}> opened on line {}", el.name, el.line),
                        ))
                    }
                    None => return Err(malformed(line, format!("stray </{name}>"))),
                }
            }
        }
    }
    if let Some(open) = stack.last() {
        return Err(malformed(open.line, format!("<{}> is never closed", open.name)));
    }
    Ok(roots)
}

/// Concatenate the inline text under a node, with whitespace collapsed.
fn inline_text<'n>(nodes: impl IntoIterator<Item = &'n Node>) -> String {
    fn walk<'n>(nodes: impl IntoIterator<Item = &'n Node>, out: &mut String) {
        for n in nodes {
            match n {
                Node::Text(t) => out.push_str(t),
                Node::Element(e) if e.name == "br" => out.push(' '),
                Node::Element(e) if INLINE.contains(&e.name.as_str()) => walk(&e.children, out),
                Node::Element(_) => {}
            }
        }
    }
    let mut out = String::new();
    walk(nodes, &mut out);
    crate::text::normalize_whitespace(&out)
}

fn raw_text(nodes: &[Node]) -> String {
    let mut out = String::new();
    for n in nodes {
        match n {
            Node::Text(t) => out.push_str(t),
            Node::Element(e) => out.push_str(&raw_text(&e.children)),
        }
    }
    out
}

struct BlockBuilder {
    blocks: Vec<Block>,
}

impl BlockBuilder {
    fn push(&mut self, kind: BlockKind, depth: usize, line: usize) -> usize {
        self.blocks.push(Block {
            kind,
            nesting_depth: depth,
            line,
        });
        self.blocks.len() - 1
    }

    fn top_level(&mut self, nodes: &[Node]) -> Result<(), CorpusError> {
        let mut loose = String::new();
        let mut loose_line = 1;
        for node in nodes {
            match node {
                Node::Text(t) => {
                    if loose.trim().is_empty() {
                        loose_line = 1;
                    }
                    loose.push_str(t);
                }
                Node::Element(e) if INLINE.contains(&e.name.as_str()) => {
                    if loose.trim().is_empty() {
                        loose_line = e.line;
                    }
                    loose.push_str(&inline_text([node]));
                }
                Node::Element(e) => {
                    self.flush_loose(&mut loose, loose_line);
                    self.block_element(e, None)?;
                }
            }
        }
        self.flush_loose(&mut loose, loose_line);
        Ok(())
    }

    fn flush_loose(&mut self, loose: &mut String, line: usize) {
        let text = crate::text::normalize_whitespace(loose);
        if !text.is_empty() {
            self.push(BlockKind::Paragraph { text }, 0, line);
        }
        loose.clear();
    }

    fn block_element(&mut self, e: &Element, parent_list: Option<(usize, usize)>) -> Result<(), CorpusError> {
        match e.name.as_str() {
            "p" => {
                let text = inline_text(&e.children);
                if !text.is_empty() {
                    self.push(BlockKind::Paragraph { text }, 0, e.line);
                }
                for child in &e.children {
                    if let Node::Element(c) = child {
                        if c.name == "img" {
                            self.image(c);
                        } else if !INLINE.contains(&c.name.as_str()) {
                            return Err(malformed(c.line, format!("<{}> inside <p>", c.name)));
                        }
                    }
                }
            }
            h if h.len() == 2 && h.starts_with('h') => {
                let level = h[1..].parse::<u8>().unwrap_or(1);
                let text = inline_text(&e.children);
                self.push(BlockKind::Heading { level, text }, 0, e.line);
            }
            "ul" | "ol" => self.list(e, parent_list)?,
            "table" => self.table(e)?,
            "pre" => {
                let text = raw_text(&e.children);
                let text = text.trim_matches('\n').to_string();
                self.push(BlockKind::Code { text }, 0, e.line);
            }
            "img" => self.image(e),
            other => {
                return Err(malformed(e.line, format!("<{other}> is not allowed here")));
            }
        }
        Ok(())
    }

    fn image(&mut self, e: &Element) {
        let alt_text = crate::text::normalize_whitespace(e.attr("alt").unwrap_or(""));
        self.push(
            BlockKind::Image {
                alt_text,
                adjacent_explanation: None,
            },
            0,
            e.line,
        );
    }

    fn list(&mut self, e: &Element, parent: Option<(usize, usize)>) -> Result<(), CorpusError> {
        let depth = parent.map_or(1, |(_, d)| d + 1);
        let idx = self.push(
            BlockKind::List {
                ordered: e.name == "ol",
                items: Vec::new(),
                lead_in: parent.map(|(p, _)| p),
            },
            depth,
            e.line,
        );
        let mut items = Vec::new();
        let mut nested = Vec::new();
        for child in &e.children {
            match child {
                Node::Text(t) if t.trim().is_empty() => {}
                Node::Text(_) => return Err(malformed(e.line, "text directly inside a list")),
                Node::Element(li) if li.name == "li" => {
                    let mut text_nodes = Vec::new();
                    for n in &li.children {
                        match n {
                            Node::Element(sub) if sub.name == "ul" || sub.name == "ol" => nested.push(sub),
                            Node::Element(sub) if sub.name == "p" => text_nodes.extend(sub.children.iter()),
                            Node::Element(sub) if !INLINE.contains(&sub.name.as_str()) => {
                                return Err(malformed(sub.line, format!("<{}> inside <li>", sub.name)))
                            }
                            other => text_nodes.push(other),
                        }
                    }
                    let text = inline_text(text_nodes);
                    if text.is_empty() {
                        return Err(malformed(li.line, "empty list item"));
                    }
                    items.push(text);
                }
                Node::Element(other) => {
                    return Err(malformed(other.line, format!("<{}> directly inside a list", other.name)))
                }
            }
        }
        if items.is_empty() {
            return Err(malformed(e.line, "list without items"));
        }
        if let BlockKind::List { items: slot, .. } = &mut self.blocks[idx].kind {
            *slot = items;
        }
        for sub in nested {
            self.list(sub, Some((idx, depth)))?;
        }
        Ok(())
    }

    fn table(&mut self, e: &Element) -> Result<(), CorpusError> {
        let mut rows: Vec<(Vec<String>, bool)> = Vec::new();
        let mut has_spans = false;
        for child in &e.children {
            match child {
                Node::Text(t) if t.trim().is_empty() => {}
                Node::Element(section) if section.name == "thead" || section.name == "tbody" => {
                    for row in &section.children {
                        match row {
                            Node::Text(t) if t.trim().is_empty() => {}
                            Node::Element(tr) if tr.name == "tr" => rows.push(table_row(tr, &mut has_spans)?),
                            _ => return Err(malformed(section.line, format!("only <tr> allowed inside <{}>", section.name))),
                        }
                    }
                }
                Node::Element(tr) if tr.name == "tr" => rows.push(table_row(tr, &mut has_spans)?),
                _ => return Err(malformed(e.line, "unexpected content inside <table>")),
            }
        }
        if rows.is_empty() {
            return Err(malformed(e.line, "table without rows"));
        }
        let mut headers = Vec::new();
        if rows[0].1 && !rows[0].0.is_empty() {
            headers = rows.remove(0).0;
            if headers.iter().all(|h| h.is_empty()) {
                headers.clear();
            }
        }
        let rows: Vec<Vec<String>> = rows.into_iter().map(|(cells, _)| cells).collect();
        if !has_spans {
            let width = if headers.is_empty() { rows.first().map_or(0, Vec::len) } else { headers.len() };
            if let Some(bad) = rows.iter().position(|r| r.len() != width) {
                return Err(malformed(
                    e.line,
                    format!("table row {} has {} cells, expected {width}", bad + 1, rows[bad].len()),
                ));
            }
        }
        self.push(
            BlockKind::Table(Table {
                headers,
                rows,
                has_spans,
            }),
            0,
            e.line,
        );
        Ok(())
    }
}

/// Cells of one `<tr>`, and whether every cell was a `<th>`.
fn table_row(tr: &Element, has_spans: &mut bool) -> Result<(Vec<String>, bool), CorpusError> {
    let mut cells = Vec::new();
    let mut all_header = true;
    for c in &tr.children {
        match c {
            Node::Text(t) if t.trim().is_empty() => {}
            Node::Element(cell) if cell.name == "th" || cell.name == "td" => {
                all_header &= cell.name == "th";
                for span in ["rowspan", "colspan"] {
                    let n = cell.attr(span).and_then(|v| v.trim().parse::<u32>().ok()).unwrap_or(1);
                    if n > 1 {
                        *has_spans = true;
                    }
                }
                cells.push(inline_text(&cell.children));
            }
            _ => return Err(malformed(tr.line, "only <th>/<td> allowed inside <tr>")),
        }
    }
    Ok((cells, all_header))
}

/// Parse an HTML-subset body into blocks in document order.
pub fn parse_blocks(src: &str) -> Result<Vec<Block>, CorpusError> {
    let roots = build_tree(src)?;
    let mut builder = BlockBuilder { blocks: Vec::new() };
    builder.top_level(&roots)?;
    Ok(builder.blocks)
}
