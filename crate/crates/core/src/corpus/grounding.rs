//! Whole-topic grounding text, table flattening, and content hashing.

use sha2::{Digest, Sha256};

use super::model::{BlockKind, BlockSpan, ContentHash, FlattenedTable, GroundingText, Table, Topic};
use super::CorpusError;
use crate::text::normalize_whitespace;

/// Digest recorded alongside every loaded corpus.
pub const DIGEST_ALGORITHM: &str = "sha256";

fn column_keys(t: &Table) -> Vec<String> {
    if t.headers.is_empty() {
        let width = t.rows.first().map_or(0, Vec::len);
        (1..=width).map(|i| format!("col{i}")).collect()
    } else {
        t.headers.clone()
    }
}

/// Turn a table into labelled row lists and column lists.
///
/// Row view: `"header: cell"`. Column view: `"row key: cell"`, where the row
/// key is the row's first cell.
pub fn flatten_table(t: &Table) -> Result<FlattenedTable, CorpusError> {
    if t.has_spans {
        return Err(CorpusError::SpannedTable);
    }
    let keys = column_keys(t);
    let row_lists = t
        .rows
        .iter()
        .map(|row| {
            row.iter()
                .zip(&keys)
                .map(|(cell, key)| format!("{key}: {cell}"))
                .collect()
        })
        .collect();
    let column_lists = (0..keys.len())
        .map(|j| {
            t.rows
                .iter()
                .map(|row| format!("{}: {}", row[0], row[j]))
                .collect()
        })
        .collect();
    Ok(FlattenedTable {
        row_lists,
        column_lists,
    })
}

fn render_block(kind: &BlockKind) -> String {
    match kind {
        BlockKind::Paragraph { text } => text.clone(),
        BlockKind::Heading { level, text } => {
            format!("{} {}", "#".repeat(usize::from(*level)), text)
        }
        BlockKind::List { ordered, items, .. } => items
            .iter()
            .enumerate()
            .map(|(i, item)| {
                if *ordered {
                    format!("{}. {item}", i + 1)
                } else {
                    format!("- {item}")
                }
            })
            .collect::<Vec<_>>()
            .join("\n"),
        BlockKind::Table(t) => match flatten_table(t) {
            Ok(flat) => {
                let keys = column_keys(t);
                let mut lines: Vec<String> = flat.row_lists.iter().map(|r| r.join("; ")).collect();
                for (key, col) in keys.iter().zip(&flat.column_lists) {
                    lines.push(format!("{key} by row: {}", col.join("; ")));
                }
                lines.join("\n")
            }
            // Spanned tables cannot be flattened; keep their cells readable.
            Err(_) => std::iter::once(t.headers.join(" | "))
                .chain(t.rows.iter().map(|r| r.join(" | ")))
                .filter(|l| !l.is_empty())
                .collect::<Vec<_>>()
                .join("\n"),
        },
        BlockKind::Code { text } => text.clone(),
        BlockKind::Image { alt_text, .. } => format!("Image: {alt_text}"),
    }
}

/// Linearize a whole topic. Blocks are separated by a single newline and
/// each block's span is recorded.
pub fn extract_grounding_text(topic: &Topic) -> GroundingText {
    grounding_from_blocks(&topic.blocks)
}

pub(crate) fn grounding_from_blocks(blocks: &[super::model::Block]) -> GroundingText {
    let mut text = String::new();
    let mut spans = Vec::new();
    for (i, block) in blocks.iter().enumerate() {
        let rendered = render_block(&block.kind);
        if rendered.is_empty() {
            continue;
        }
        if !text.is_empty() {
            text.push('\n');
        }
        let start = text.len();
        text.push_str(&rendered);
        spans.push(BlockSpan {
            block: i,
            start,
            end: text.len(),
        });
    }
    GroundingText { text, spans }
}

pub fn hash_text(text: &str) -> ContentHash {
    let digest = Sha256::digest(normalize_whitespace(text).as_bytes());
    ContentHash::from_hex(hex::encode(digest))
}

/// Digest of the whitespace-normalized grounding text.
pub fn topic_hash(topic: &Topic) -> ContentHash {
    hash_text(&extract_grounding_text(topic).text)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::model::Block;
    use crate::corpus::{parse_topic, MarkupFormat};

    fn table(headers: &[&str], rows: &[&[&str]]) -> Table {
        Table {
            headers: headers.iter().map(|s| s.to_string()).collect(),
            rows: rows
                .iter()
                .map(|r| r.iter().map(|s| s.to_string()).collect())
                .collect(),
            has_spans: false,
        }
    }

    #[test]
    fn single_row_flatten() {
        let flat = flatten_table(&table(&["Name", "Port"], &[&["db", "5432"]])).unwrap();
        assert_eq!(flat.row_lists, vec![vec!["Name: db", "Port: 5432"]]);
        assert_eq!(flat.column_lists, vec![vec!["db: db"], vec!["db: 5432"]]);
    }

    #[test]
    fn three_by_two_keeps_all_cells() {
        let t = table(&["Name", "Port"], &[&["db", "5432"], &["web", "80"], &["cache", "6379"]]);
        let flat = flatten_table(&t).unwrap();
        assert_eq!(flat.row_lists.len(), 3);
        assert_eq!(flat.column_lists.len(), 2);
        let mut source: Vec<&str> = t.rows.iter().flatten().map(String::as_str).collect();
        source.sort();
        let mut from_rows: Vec<&str> = flat
            .row_lists
            .iter()
            .flatten()
            .map(|s| s.split_once(": ").unwrap().1)
            .collect();
        from_rows.sort();
        let mut from_cols: Vec<&str> = flat
            .column_lists
            .iter()
            .flatten()
            .map(|s| s.split_once(": ").unwrap().1)
            .collect();
        from_cols.sort();
        assert_eq!(source, from_rows);
        assert_eq!(source, from_cols);
    }

    #[test]
    fn headerless_tables_use_positional_keys() {
        let flat = flatten_table(&table(&[], &[&["db", "5432"]])).unwrap();
        assert_eq!(flat.row_lists, vec![vec!["col1: db", "col2: 5432"]]);
    }

    #[test]
    fn spanned_table_is_rejected() {
        let mut t = table(&["a"], &[&["b"]]);
        t.has_spans = true;
        assert!(matches!(flatten_table(&t), Err(CorpusError::SpannedTable)));
    }

    #[test]
    fn paragraph_is_verbatim() {
        let topic = parse_topic("<p>Only this.</p>", MarkupFormat::Html, "one").unwrap();
        let g = extract_grounding_text(&topic);
        assert_eq!(g.text, "Only this.");
        assert_eq!(g.spans, vec![BlockSpan { block: 0, start: 0, end: 10 }]);
    }

    #[test]
    fn table_and_image_render() {
        let topic = parse_topic(
            "<table><tr><th>Name</th><th>Port</th></tr><tr><td>db</td><td>5432</td></tr></table><img alt=\"architecture diagram\">",
            MarkupFormat::Html,
            "t",
        )
        .unwrap();
        let g = extract_grounding_text(&topic);
        assert!(g.text.contains("Name: db; Port: 5432"));
        assert!(g.text.contains("Port by row: db: 5432"));
        assert!(g.text.contains("Image: architecture diagram"));
    }

    #[test]
    fn whitespace_only_changes_keep_hash() {
        let a = parse_topic("<p>Credentials are  the user ID.</p>", MarkupFormat::Html, "c").unwrap();
        let b = parse_topic("<p>\n  Credentials are the\tuser ID.\n</p>", MarkupFormat::Html, "c").unwrap();
        assert_eq!(topic_hash(&a), topic_hash(&b));
        // Hand-normalized fixture hashed independently of the topic path.
        let expected = hex::encode(Sha256::digest(b"Credentials are the user ID."));
        assert_eq!(topic_hash(&a).as_str(), expected);
        let c = parse_topic("<p>Credentials are the user IDs.</p>", MarkupFormat::Html, "c").unwrap();
        assert_ne!(topic_hash(&a), topic_hash(&c));
    }

    #[test]
    fn spans_are_ordered_and_cover_text() {
        let blocks = vec![
            Block { kind: BlockKind::Heading { level: 2, text: "Setup".into() }, nesting_depth: 0, line: 1 },
            Block { kind: BlockKind::List { ordered: true, items: vec!["a".into(), "b".into()], lead_in: None }, nesting_depth: 1, line: 2 },
        ];
        let g = grounding_from_blocks(&blocks);
        assert_eq!(g.text, "## Setup\n1. a\n2. b");
        let covered: usize = g.spans.iter().map(|s| s.end - s.start).sum();
        assert_eq!(covered + g.spans.len() - 1, g.text.len());
    }
}
