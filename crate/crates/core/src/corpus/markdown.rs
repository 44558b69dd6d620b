//! Parser for the Markdown subset accepted in topic files.
//!
//! Supported: ATX headings, paragraphs, `-`/`*`/`+` and `1.` lists nested by
//! indentation, pipe tables, fenced code, and standalone `![alt](src)` image
//! lines. Block quotes, raw HTML, thematic breaks, and inline images are
//! rejected. Inline emphasis, code spans, and links are reduced to their text.

use std::sync::OnceLock;

use regex::Regex;

use super::model::{Block, BlockKind, Table};
use super::CorpusError;

fn list_item_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"^(\s*)([-*+]|\d+[.)])\s+(.*)$").unwrap())
}

fn image_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"^!\[([^\]]*)\]\(([^)]*)\)$").unwrap())
}

fn link_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"\[([^\]]*)\]\([^)]*\)").unwrap())
}

fn strip_inline(text: &str) -> String {
    let text = link_re().replace_all(text, "$1");
    let text = text.replace("**", "").replace("__", "").replace('`', "");
    crate::text::normalize_whitespace(&text)
}

fn split_row(line: &str) -> Vec<String> {
    let trimmed = line.trim();
    let inner = trimmed.strip_prefix('|').unwrap_or(trimmed);
    let inner = inner.strip_suffix('|').unwrap_or(inner);
    inner.split('|').map(strip_inline).collect()
}

fn is_separator_row(line: &str) -> bool {
    let cells = split_row(line);
    !cells.is_empty()
        && cells.iter().all(|c| {
            let c = c.trim();
            !c.is_empty() && c.trim_matches(':').chars().all(|ch| ch == '-') && c.contains('-')
        })
}

fn unsupported(line: usize, element: &str) -> CorpusError {
    CorpusError::UnsupportedElement {
        line,
        element: element.to_string(),
    }
}

fn malformed(line: usize, message: impl Into<String>) -> CorpusError {
    CorpusError::MalformedMarkup {
        line,
        message: message.into(),
    }
}

struct OpenList {
    indent: usize,
    block: usize,
}

/// Parse a Markdown-subset body into blocks in document order.
pub fn parse_blocks(src: &str) -> Result<Vec<Block>, CorpusError> {
    let lines: Vec<&str> = src.lines().collect();
    let mut blocks: Vec<Block> = Vec::new();
    let mut paragraph: Vec<&str> = Vec::new();
    let mut paragraph_line = 0;
    let mut lists: Vec<OpenList> = Vec::new();
    let mut i = 0;

    fn flush_paragraph(blocks: &mut Vec<Block>, paragraph: &mut Vec<&str>, line: usize) {
        if paragraph.is_empty() {
            return;
        }
        let text = strip_inline(&paragraph.join(" "));
        paragraph.clear();
        if !text.is_empty() {
            blocks.push(Block {
                kind: BlockKind::Paragraph { text },
                nesting_depth: 0,
                line,
            });
        }
    }

    while i < lines.len() {
        let raw = lines[i];
        let lineno = i + 1;
        let trimmed = raw.trim();

        if trimmed.is_empty() {
            flush_paragraph(&mut blocks, &mut paragraph, paragraph_line);
            // A blank line ends a list unless the next line continues it.
            let continues = lines
                .get(i + 1)
                .is_some_and(|next| list_item_re().is_match(next) && !lists.is_empty());
            if !continues {
                lists.clear();
            }
            i += 1;
            continue;
        }

        if trimmed.starts_with("```") {
            flush_paragraph(&mut blocks, &mut paragraph, paragraph_line);
            lists.clear();
            let mut body = Vec::new();
            let mut j = i + 1;
            while j < lines.len() && !lines[j].trim_start().starts_with("```") {
                body.push(lines[j]);
                j += 1;
            }
            if j == lines.len() {
                return Err(malformed(lineno, "unterminated code fence"));
            }
            blocks.push(Block {
                kind: BlockKind::Code { text: body.join("\n") },
                nesting_depth: 0,
                line: lineno,
            });
            i = j + 1;
            continue;
        }

        if trimmed.starts_with('>') {
            return Err(unsupported(lineno, "blockquote"));
        }
        if trimmed.starts_with('<') {
            return Err(unsupported(lineno, "raw html"));
        }
        if trimmed.len() >= 3 && (trimmed.chars().all(|c| c == '-') || trimmed.chars().all(|c| c == '*')) {
            return Err(unsupported(lineno, "thematic break"));
        }

        if let Some(rest) = trimmed.strip_prefix('#') {
            let hashes = 1 + rest.chars().take_while(|&c| c == '#').count();
            let after = &trimmed[hashes..];
            if hashes <= 6 && (after.is_empty() || after.starts_with(' ')) {
                flush_paragraph(&mut blocks, &mut paragraph, paragraph_line);
                lists.clear();
                let text = strip_inline(after.trim().trim_end_matches('#'));
                if text.is_empty() {
                    return Err(malformed(lineno, "empty heading"));
                }
                blocks.push(Block {
                    kind: BlockKind::Heading {
                        level: hashes as u8,
                        text,
                    },
                    nesting_depth: 0,
                    line: lineno,
                });
                i += 1;
                continue;
            }
        }

        if let Some(caps) = image_re().captures(trimmed) {
            flush_paragraph(&mut blocks, &mut paragraph, paragraph_line);
            lists.clear();
            blocks.push(Block {
                kind: BlockKind::Image {
                    alt_text: crate::text::normalize_whitespace(&caps[1]),
                    adjacent_explanation: None,
                },
                nesting_depth: 0,
                line: lineno,
            });
            i += 1;
            continue;
        }
        if trimmed.contains("![") {
            return Err(unsupported(lineno, "inline image"));
        }

        if trimmed.starts_with('|') {
            flush_paragraph(&mut blocks, &mut paragraph, paragraph_line);
            lists.clear();
            let mut j = i;
            let mut table_lines = Vec::new();
            while j < lines.len() && lines[j].trim().starts_with('|') {
                table_lines.push(lines[j]);
                j += 1;
            }
            blocks.push(Block {
                kind: BlockKind::Table(parse_table(&table_lines, lineno)?),
                nesting_depth: 0,
                line: lineno,
            });
            i = j;
            continue;
        }

        if let Some(caps) = list_item_re().captures(raw) {
            flush_paragraph(&mut blocks, &mut paragraph, paragraph_line);
            let indent = caps[1].chars().map(|c| if c == '\t' { 4 } else { 1 }).sum::<usize>();
            let ordered = caps[2].starts_with(|c: char| c.is_ascii_digit());
            let item = strip_inline(&caps[3]);
            if item.is_empty() {
                return Err(malformed(lineno, "empty list item"));
            }
            while lists.last().is_some_and(|l| l.indent > indent) {
                lists.pop();
            }
            let same_level = lists.last().is_some_and(|l| l.indent == indent);
            let same_kind = same_level
                && matches!(&blocks[lists.last().unwrap().block].kind, BlockKind::List { ordered: o, .. } if *o == ordered);
            if same_kind {
                let idx = lists.last().unwrap().block;
                if let BlockKind::List { items, .. } = &mut blocks[idx].kind {
                    items.push(item);
                }
            } else {
                if same_level {
                    lists.pop();
                }
                let parent = lists.last().map(|l| l.block);
                let depth = lists.len() + 1;
                blocks.push(Block {
                    kind: BlockKind::List {
                        ordered,
                        items: vec![item],
                        lead_in: parent,
                    },
                    nesting_depth: depth,
                    line: lineno,
                });
                lists.push(OpenList {
                    indent,
                    block: blocks.len() - 1,
                });
            }
            i += 1;
            continue;
        }

        if let Some(open) = lists.last() {
            // Indented continuation of the current list item.
            let indent = raw.len() - raw.trim_start().len();
            if indent > open.indent {
                let idx = open.block;
                if let BlockKind::List { items, .. } = &mut blocks[idx].kind {
                    if let Some(last) = items.last_mut() {
                        last.push(' ');
                        last.push_str(&strip_inline(trimmed));
                    }
                }
                i += 1;
                continue;
            }
            lists.clear();
        }

        if paragraph.is_empty() {
            paragraph_line = lineno;
        }
        paragraph.push(trimmed);
        i += 1;
    }
    flush_paragraph(&mut blocks, &mut paragraph, paragraph_line);
    Ok(blocks)
}

fn parse_table(lines: &[&str], first_line: usize) -> Result<Table, CorpusError> {
    let (headers, body): (Vec<String>, &[&str]) = if lines.len() >= 2 && is_separator_row(lines[1]) {
        let h = split_row(lines[0]);
        let h = if h.iter().all(|c| c.is_empty()) { Vec::new() } else { h };
        (h, &lines[2..])
    } else {
        (Vec::new(), lines)
    };
    let rows: Vec<Vec<String>> = body.iter().map(|l| split_row(l)).collect();
    if rows.is_empty() {
        return Err(malformed(first_line, "table without rows"));
    }
    let width = if headers.is_empty() { rows[0].len() } else { headers.len() };
    if let Some(bad) = rows.iter().position(|r| r.len() != width) {
        return Err(malformed(
            first_line + bad + if headers.is_empty() { 0 } else { 2 },
            format!("table row has {} cells, expected {width}", rows[bad].len()),
        ));
    }
    Ok(Table {
        headers,
        rows,
        has_spans: false,
    })
}
