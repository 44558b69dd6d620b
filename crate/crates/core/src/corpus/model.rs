use std::fmt;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

/// Hex-encoded SHA-256 digest of a topic's normalized grounding text.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ContentHash(String);

impl ContentHash {
    pub fn from_hex(hex: impl Into<String>) -> Self {
        ContentHash(hex.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for ContentHash {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// A parsed documentation topic: the unit we retrieve and ground on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Topic {
    pub id: String,
    pub title: String,
    pub language: String,
    pub blocks: Vec<Block>,
    pub source_path: String,
    pub last_updated: DateTime<Utc>,
    pub content_hash: ContentHash,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Block {
    pub kind: BlockKind,
    /// 0 for top-level prose; list blocks count their list level from 1.
    pub nesting_depth: usize,
    /// 1-based source line where the block starts.
    pub line: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BlockKind {
    Paragraph {
        text: String,
    },
    Heading {
        level: u8,
        text: String,
    },
    List {
        ordered: bool,
        items: Vec<String>,
        /// Index of the block that introduces this list: the preceding
        /// paragraph for top-level lists, the parent list for nested ones.
        lead_in: Option<usize>,
    },
    Table(Table),
    Code {
        text: String,
    },
    Image {
        alt_text: String,
        /// Index of an adjacent paragraph that talks about the graphic.
        adjacent_explanation: Option<usize>,
    },
}

impl BlockKind {
    pub fn name(&self) -> &'static str {
        match self {
            BlockKind::Paragraph { .. } => "paragraph",
            BlockKind::Heading { .. } => "heading",
            BlockKind::List { .. } => "list",
            BlockKind::Table(_) => "table",
            BlockKind::Code { .. } => "code",
            BlockKind::Image { .. } => "image",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Table {
    pub headers: Vec<String>,
    pub rows: Vec<Vec<String>>,
    pub has_spans: bool,
}

/// Row-wise and column-wise views of a table, each cell labelled with its
/// header or its row key.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FlattenedTable {
    pub row_lists: Vec<Vec<String>>,
    pub column_lists: Vec<Vec<String>>,
}

/// Linear grounding text for a topic plus the block each span came from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroundingText {
    pub text: String,
    pub spans: Vec<BlockSpan>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockSpan {
    pub block: usize,
    pub start: usize,
    pub end: usize,
}
