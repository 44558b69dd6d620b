#![allow(dead_code)]

use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpListener;
use std::path::PathBuf;
use std::sync::{Arc, Mutex};
use std::thread;

use topicrag::corpus::{load_corpus, Corpus};

pub mod oracle;

pub fn fixture(rel: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(rel)
}

pub fn corpus(rel: &str) -> Corpus {
    load_corpus(&fixture(rel)).expect("fixture corpus loads")
}

/// One-route HTTP server answering every request with a fixed status and
/// body. Request bodies are recorded.
pub struct StubServer {
    pub url: String,
    pub bodies: Arc<Mutex<Vec<String>>>,
}

impl StubServer {
    pub fn start(status: u16, body: &str) -> Self {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let url = format!("http://{}", listener.local_addr().unwrap());
        let bodies = Arc::new(Mutex::new(Vec::new()));
        let seen = Arc::clone(&bodies);
        let reply = body.to_string();
        thread::spawn(move || {
            for stream in listener.incoming() {
                let Ok(mut stream) = stream else { continue };
                let mut reader = BufReader::new(stream.try_clone().unwrap());
                let mut len = 0usize;
                loop {
                    let mut line = String::new();
                    if reader.read_line(&mut line).unwrap_or(0) == 0 {
                        break;
                    }
                    let l = line.trim_end();
                    if l.is_empty() {
                        break;
                    }
                    if let Some((k, v)) = l.split_once(':') {
                        if k.eq_ignore_ascii_case("content-length") {
                            len = v.trim().parse().unwrap_or(0);
                        }
                    }
                }
                let mut buf = vec![0u8; len];
                let _ = reader.read_exact(&mut buf);
                seen.lock().unwrap().push(String::from_utf8_lossy(&buf).into_owned());
                let resp = format!(
                    "HTTP/1.1 {status} X\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{reply}",
                    reply.len()
                );
                let _ = stream.write_all(resp.as_bytes());
            }
        });
        StubServer { url, bodies }
    }
}

/// An answered evaluation record with the given verdicts.
pub fn record(
    id: &str,
    verdicts: topicrag::evalstore::Verdicts,
    created_at: chrono::DateTime<chrono::Utc>,
) -> topicrag::evalstore::EvalRecord {
    use topicrag::evalstore::{EvalRecord, EvalSeed};
    use topicrag::pipeline::{Link, Outcome};
    let mut r = EvalRecord::from_seed(EvalSeed {
        record_id: id.to_string(),
        question: format!("how do I do thing {id}?"),
        language: "en".into(),
        qclass: None,
        answer_html: Some("<p>answer</p>".into()),
        answer_text: format!("answer for {id}"),
        links: vec![Link {
            topic_id: "api-keys".into(),
            title: "API keys".into(),
            url: "/topics/api-keys".into(),
        }],
        outcome: Outcome::Answered,
        created_at,
    });
    r.verdicts = verdicts;
    r
}
