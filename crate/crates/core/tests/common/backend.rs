//! Test doubles for the model backend: the response fixture corpus, a
//! scripted text generator and a minimal HTTP server.

use std::fs;
use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpListener;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};
use std::thread;

use careloop::diagnosis::{TextGenerator, TransportError};

pub fn fixtures(kind: &str) -> Vec<(String, String)> {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures/responses")
        .join(kind);
    let mut files: Vec<PathBuf> = fs::read_dir(&dir).unwrap().map(|e| e.unwrap().path()).collect();
    files.sort();
    files
        .into_iter()
        .map(|p| {
            (
                p.file_name().unwrap().to_string_lossy().into_owned(),
                fs::read_to_string(&p).unwrap(),
            )
        })
        .collect()
}

/// Replies from a fixed script, recording how often it was called.
pub struct Scripted {
    replies: Mutex<Vec<Result<String, TransportError>>>,
    calls: Mutex<usize>,
}

impl Scripted {
    pub fn new(mut replies: Vec<Result<String, TransportError>>) -> Self {
        replies.reverse();
        Scripted {
            replies: Mutex::new(replies),
            calls: Mutex::new(0),
        }
    }

    pub fn calls(&self) -> usize {
        *self.calls.lock().unwrap()
    }
}

impl TextGenerator for Scripted {
    fn generate(&self, _prompt: &str) -> Result<String, TransportError> {
        *self.calls.lock().unwrap() += 1;
        self.replies
            .lock()
            .unwrap()
            .pop()
            .unwrap_or_else(|| Err(TransportError("script exhausted".into())))
    }
}

/// Minimal HTTP/1.1 server answering every request with `reply(body)`.
/// Returns the endpoint URL and the captured request bodies.
pub fn stub_server(reply: impl Fn(&str) -> (u16, String) + Send + 'static) -> (String, Arc<Mutex<Vec<String>>>) {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let url = format!("http://{}/api/generate", listener.local_addr().unwrap());
    let seen = Arc::new(Mutex::new(Vec::new()));
    let log = Arc::clone(&seen);
    thread::spawn(move || {
        for stream in listener.incoming() {
            let Ok(mut stream) = stream else { continue };
            let mut reader = BufReader::new(stream.try_clone().unwrap());
            let mut length = 0;
            loop {
                let mut line = String::new();
                if reader.read_line(&mut line).unwrap_or(0) == 0 {
                    break;
                }
                let line = line.trim_end();
                if line.is_empty() {
                    break;
                }
                if let Some((k, v)) = line.split_once(':') {
                    if k.eq_ignore_ascii_case("content-length") {
                        length = v.trim().parse().unwrap_or(0);
                    }
                }
            }
            let mut body = vec![0; length];
            if reader.read_exact(&mut body).is_err() {
                continue;
            }
            let body = String::from_utf8_lossy(&body).into_owned();
            let (status, payload) = reply(&body);
            log.lock().unwrap().push(body);
            let response = format!(
                "HTTP/1.1 {status} X\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{payload}",
                payload.len()
            );
            let _ = stream.write_all(response.as_bytes());
        }
    });
    (url, seen)
}

pub fn envelope(text: &str) -> String {
    serde_json::json!({ "model": "stub", "response": text, "done": true }).to_string()
}

pub fn resident_id(request_body: &str) -> usize {
    let req: serde_json::Value = serde_json::from_str(request_body).unwrap();
    let prompt = req["prompt"].as_str().unwrap();
    let line = prompt.lines().find(|l| l.starts_with("Resident id: ")).unwrap();
    line["Resident id: ".len()..].trim().parse().unwrap()
}
