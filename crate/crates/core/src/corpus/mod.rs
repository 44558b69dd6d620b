//! Documentation topics: parsing, grounding text, hashing, and corpus loading.

mod grounding;
mod html;
mod markdown;
mod model;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use chrono::{DateTime, Utc};
use serde::Deserialize;
use thiserror::Error;

pub use grounding::{extract_grounding_text, flatten_table, hash_text, topic_hash, DIGEST_ALGORITHM};
pub use model::{
    Block, BlockKind, BlockSpan, ContentHash, FlattenedTable, GroundingText, Table, Topic,
};

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("malformed markup at line {line}: {message}")]
    MalformedMarkup { line: usize, message: String },
    #[error("unsupported element <{element}> at line {line}")]
    UnsupportedElement { line: usize, element: String },
    #[error("table has spanned cells and cannot be flattened")]
    SpannedTable,
    #[error("bad metadata header: {0}")]
    BadMetadata(String),
    #[error("duplicate topic id {id:?} in {first} and {second}")]
    DuplicateTopicId {
        id: String,
        first: String,
        second: String,
    },
    #[error("corpus contains no loadable topics")]
    EmptyCorpus,
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("bad corpus manifest: {0}")]
    Manifest(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MarkupFormat {
    Html,
    Markdown,
}

impl MarkupFormat {
    pub fn from_path(path: &Path) -> Option<Self> {
        match path.extension()?.to_str()?.to_ascii_lowercase().as_str() {
            "html" | "htm" => Some(MarkupFormat::Html),
            "md" | "markdown" => Some(MarkupFormat::Markdown),
            _ => None,
        }
    }
}

/// Markers that make an adjacent paragraph count as explaining a graphic.
const GRAPHIC_MARKERS: &[&str] = &[
    "diagram", "figure", "image", "graphic", "screenshot", "chart", "illustrat", "shows", "picture",
];

fn link_blocks(blocks: &mut [Block]) {
    for i in 0..blocks.len() {
        match &blocks[i].kind {
            BlockKind::List { lead_in: None, .. } if blocks[i].nesting_depth <= 1 => {
                let prev = i.checked_sub(1).filter(|&p| matches!(blocks[p].kind, BlockKind::Paragraph { .. }));
                if let BlockKind::List { lead_in, .. } = &mut blocks[i].kind {
                    *lead_in = prev;
                }
            }
            BlockKind::Image { .. } => {
                let explains = |j: usize| match &blocks[j].kind {
                    BlockKind::Paragraph { text } => {
                        let lower = text.to_lowercase();
                        GRAPHIC_MARKERS.iter().any(|m| lower.contains(m))
                    }
                    _ => false,
                };
                let found = i
                    .checked_sub(1)
                    .filter(|&j| explains(j))
                    .or_else(|| Some(i + 1).filter(|&j| j < blocks.len() && explains(j)));
                if let BlockKind::Image { adjacent_explanation, .. } = &mut blocks[i].kind {
                    *adjacent_explanation = found;
                }
            }
            _ => {}
        }
    }
}

/// Parse a markup body (no metadata header) into a topic.
///
/// The title defaults to the first heading, the language to `en`, and the
/// update time to the Unix epoch; [`parse_topic_file`] fills them from the
/// file header.
pub fn parse_topic(raw: &str, format: MarkupFormat, id: &str) -> Result<Topic, CorpusError> {
    let mut blocks = match format {
        MarkupFormat::Html => html::parse_blocks(raw)?,
        MarkupFormat::Markdown => markdown::parse_blocks(raw)?,
    };
    if blocks.is_empty() {
        return Err(CorpusError::MalformedMarkup {
            line: 1,
            message: "topic body is empty".into(),
        });
    }
    link_blocks(&mut blocks);
    let title = blocks
        .iter()
        .find_map(|b| match &b.kind {
            BlockKind::Heading { text, .. } => Some(text.clone()),
            _ => None,
        })
        .unwrap_or_else(|| id.to_string());
    let content_hash = hash_text(&grounding::grounding_from_blocks(&blocks).text);
    Ok(Topic {
        id: id.to_string(),
        title,
        language: "en".into(),
        blocks,
        source_path: String::new(),
        last_updated: DateTime::<Utc>::UNIX_EPOCH,
        content_hash,
    })
}

#[derive(Debug, Default)]
struct Header {
    id: Option<String>,
    title: Option<String>,
    lang: Option<String>,
    updated: Option<DateTime<Utc>>,
    format: Option<MarkupFormat>,
}

/// Split off the `---` metadata block. Returns the header, the body, and the
/// number of lines the header occupied.
fn split_header(contents: &str) -> Result<(Header, &str, usize), CorpusError> {
    let mut lines = contents.split_inclusive('\n');
    let first = lines.next().unwrap_or("");
    if first.trim() != "---" {
        return Err(CorpusError::BadMetadata("file must start with a --- metadata block".into()));
    }
    let mut header = Header::default();
    let mut consumed = first.len();
    let mut count = 1;
    for line in lines {
        consumed += line.len();
        count += 1;
        let trimmed = line.trim();
        if trimmed == "---" {
            return Ok((header, &contents[consumed..], count));
        }
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let Some((key, value)) = trimmed.split_once(':') else {
            return Err(CorpusError::BadMetadata(format!("line {count}: expected key: value")));
        };
        let value = value.trim().trim_matches('"').to_string();
        match key.trim() {
            "id" => header.id = Some(value),
            "title" => header.title = Some(value),
            "lang" => header.lang = Some(value),
            "updated" => {
                let ts = DateTime::parse_from_rfc3339(&value)
                    .map_err(|e| CorpusError::BadMetadata(format!("updated: {e}")))?;
                header.updated = Some(ts.with_timezone(&Utc));
            }
            "format" => {
                header.format = Some(match value.as_str() {
                    "html" => MarkupFormat::Html,
                    "markdown" | "md" => MarkupFormat::Markdown,
                    other => return Err(CorpusError::BadMetadata(format!("unknown format {other}"))),
                })
            }
            _ => {}
        }
    }
    Err(CorpusError::BadMetadata("metadata block is never closed".into()))
}

/// Parse a complete topic file: metadata header followed by a markup body.
pub fn parse_topic_file(contents: &str, path: &Path) -> Result<Topic, CorpusError> {
    let (header, body, header_lines) = split_header(contents)?;
    let format = header
        .format
        .or_else(|| MarkupFormat::from_path(path))
        .unwrap_or(MarkupFormat::Html);
    let id = header.id.clone().unwrap_or_else(|| {
        path.file_stem()
            .and_then(|s| s.to_str())
            .unwrap_or("topic")
            .to_string()
    });
    let mut topic = parse_topic(body, format, &id).map_err(|e| match e {
        CorpusError::MalformedMarkup { line, message } => CorpusError::MalformedMarkup {
            line: line + header_lines,
            message,
        },
        CorpusError::UnsupportedElement { line, element } => CorpusError::UnsupportedElement {
            line: line + header_lines,
            element,
        },
        other => other,
    })?;
    for block in &mut topic.blocks {
        block.line += header_lines;
    }
    if let Some(title) = header.title {
        topic.title = title;
    }
    if let Some(lang) = header.lang {
        topic.language = lang;
    }
    if let Some(updated) = header.updated {
        topic.last_updated = updated;
    }
    topic.source_path = path.display().to_string();
    Ok(topic)
}

/// A file that could not be turned into a topic.
#[derive(Debug)]
pub struct LoadFailure {
    pub path: PathBuf,
    pub error: CorpusError,
}

/// An immutable set of topics with an id index.
#[derive(Debug, Default)]
pub struct Corpus {
    topics: Vec<Topic>,
    by_id: BTreeMap<String, usize>,
    failures: Vec<LoadFailure>,
}

impl Corpus {
    pub fn from_topics(topics: Vec<Topic>) -> Result<Self, CorpusError> {
        let mut by_id = BTreeMap::new();
        for (i, t) in topics.iter().enumerate() {
            if let Some(prev) = by_id.insert(t.id.clone(), i) {
                return Err(CorpusError::DuplicateTopicId {
                    id: t.id.clone(),
                    first: topics[prev].source_path.clone(),
                    second: t.source_path.clone(),
                });
            }
        }
        Ok(Corpus {
            topics,
            by_id,
            failures: Vec::new(),
        })
    }

    pub fn get(&self, id: &str) -> Option<&Topic> {
        self.by_id.get(id).map(|&i| &self.topics[i])
    }

    pub fn topics(&self) -> &[Topic] {
        &self.topics
    }

    pub fn len(&self) -> usize {
        self.topics.len()
    }

    pub fn is_empty(&self) -> bool {
        self.topics.is_empty()
    }

    pub fn failures(&self) -> &[LoadFailure] {
        &self.failures
    }

    pub fn digest_algorithm(&self) -> &'static str {
        DIGEST_ALGORITHM
    }

    /// A copy of this corpus with one topic added or replaced.
    pub fn with_topic(&self, topic: Topic) -> Corpus {
        let mut topics: Vec<Topic> = self.topics.iter().filter(|t| t.id != topic.id).cloned().collect();
        topics.push(topic);
        Corpus::from_topics(topics).expect("ids stay unique")
    }

    /// A copy of this corpus without the given topic.
    pub fn without_topic(&self, id: &str) -> Corpus {
        let topics = self.topics.iter().filter(|t| t.id != id).cloned().collect();
        Corpus::from_topics(topics).expect("ids stay unique")
    }
}

#[derive(Deserialize)]
struct ManifestEntry {
    id: String,
    path: PathBuf,
}

/// Load every topic file under `root`.
///
/// A `corpus.json` manifest (`[{"id", "path"}]`) restricts loading to the
/// listed files; otherwise every `.html`, `.htm` and `.md` file is read.
/// Per-file parse failures are collected rather than returned.
pub fn load_corpus(root: &Path) -> Result<Corpus, CorpusError> {
    let io = |path: &Path, source| CorpusError::Io {
        path: path.display().to_string(),
        source,
    };
    let manifest_path = root.join("corpus.json");
    let mut files: Vec<(PathBuf, Option<String>)> = Vec::new();
    if manifest_path.is_file() {
        let raw = std::fs::read_to_string(&manifest_path).map_err(|e| io(&manifest_path, e))?;
        let entries: Vec<ManifestEntry> =
            serde_json::from_str(&raw).map_err(|e| CorpusError::Manifest(e.to_string()))?;
        files.extend(entries.into_iter().map(|e| (root.join(e.path), Some(e.id))));
    } else {
        if !root.is_dir() {
            return Err(io(root, std::io::Error::new(std::io::ErrorKind::NotFound, "not a directory")));
        }
        for entry in walkdir::WalkDir::new(root).sort_by_file_name() {
            let entry = entry.map_err(|e| io(root, e.into()))?;
            if entry.file_type().is_file() && MarkupFormat::from_path(entry.path()).is_some() {
                files.push((entry.into_path(), None));
            }
        }
    }

    let mut topics: Vec<Topic> = Vec::new();
    let mut failures = Vec::new();
    for (path, manifest_id) in files {
        let parsed = std::fs::read_to_string(&path)
            .map_err(|e| io(&path, e))
            .and_then(|raw| parse_topic_file(&raw, &path));
        match parsed {
            Ok(mut topic) => {
                if let Some(id) = manifest_id {
                    topic.id = id;
                }
                topics.push(topic);
            }
            Err(error) => {
                log::warn!("skipping {}: {error}", path.display());
                failures.push(LoadFailure { path, error });
            }
        }
    }
    if topics.is_empty() {
        return Err(CorpusError::EmptyCorpus);
    }
    let mut corpus = Corpus::from_topics(topics)?;
    corpus.failures = failures;
    Ok(corpus)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write(dir: &Path, name: &str, id: &str, body: &str) {
        let contents = format!(
            "---\nid: {id}\ntitle: {id} title\nlang: en\nupdated: 2024-03-01T00:00:00Z\n---\n{body}"
        );
        std::fs::write(dir.join(name), contents).unwrap();
    }

    #[test]
    fn empty_body_is_malformed() {
        assert!(matches!(
            parse_topic("   ", MarkupFormat::Html, "x"),
            Err(CorpusError::MalformedMarkup { .. })
        ));
    }

    #[test]
    fn two_by_two_table_matches_hand_parse() {
        let topic = parse_topic(
            "<table>\n<tr><th>Name</th><th>Port</th></tr>\n<tr><td>db</td><td>5432</td></tr>\n</table>",
            MarkupFormat::Html,
            "ports",
        )
        .unwrap();
        let expected = vec![Block {
            kind: BlockKind::Table(Table {
                headers: vec!["Name".into(), "Port".into()],
                rows: vec![vec!["db".into(), "5432".into()]],
                has_spans: false,
            }),
            nesting_depth: 0,
            line: 1,
        }];
        assert_eq!(topic.blocks, expected);
    }

    #[test]
    fn images_pick_up_adjacent_explanations() {
        let topic = parse_topic(
            "<p>The following diagram shows the request flow.</p><img alt=\"flow\"><p>Unrelated.</p><img alt=\"x\">",
            MarkupFormat::Html,
            "img",
        )
        .unwrap();
        assert!(matches!(topic.blocks[1].kind, BlockKind::Image { adjacent_explanation: Some(0), .. }));
        assert!(matches!(topic.blocks[3].kind, BlockKind::Image { adjacent_explanation: None, .. }));
    }

    #[test]
    fn loads_directory_and_reports_failures() {
        let dir = tempfile::tempdir().unwrap();
        write(dir.path(), "a.html", "a", "<p>Alpha.</p>");
        write(dir.path(), "b.md", "b", "Beta.\n");
        write(dir.path(), "c.html", "c", "<p>Gamma.</p>");
        write(dir.path(), "broken.html", "d", "<p>never closed");
        let corpus = load_corpus(dir.path()).unwrap();
        assert_eq!(corpus.len(), 3);
        assert_eq!(corpus.failures().len(), 1);
        let b = corpus.get("b").unwrap();
        assert_eq!(b.title, "b title");
        assert_eq!(b.last_updated.to_rfc3339(), "2024-03-01T00:00:00+00:00");
    }

    #[test]
    fn duplicate_ids_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        write(dir.path(), "one.html", "creds", "<p>One.</p>");
        write(dir.path(), "two.html", "creds", "<p>Two.</p>");
        assert!(matches!(load_corpus(dir.path()), Err(CorpusError::DuplicateTopicId { id, .. }) if id == "creds"));
    }

    #[test]
    fn empty_directory_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(load_corpus(dir.path()), Err(CorpusError::EmptyCorpus)));
    }

    #[test]
    fn error_lines_account_for_header() {
        let err = parse_topic_file(
            "---\nid: x\n---\n<p>ok</p>\n<video></video>",
            Path::new("x.html"),
        )
        .unwrap_err();
        assert!(matches!(err, CorpusError::UnsupportedElement { line: 5, .. }), "{err:?}");
    }
}
