#![allow(dead_code)]

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::sync::Arc;
use std::thread;

use absa_core::backends::{AscPrediction, FixtureRecord};
use absa_core::corpus::{sample_corpus, serialize_semeval_xml, Polarity, SAMPLE_TEXT};
use tempfile::TempDir;
use tiny_http::{Header, Response, Server};

pub struct Run {
    pub code: i32,
    pub stdout: String,
    pub stderr: String,
}

pub fn absa(args: &[&str]) -> Run {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let argv = std::iter::once("absa").chain(args.iter().copied());
    let code = absa_cli::main_with(argv, &mut out, &mut err);
    Run { code, stdout: String::from_utf8(out).unwrap(), stderr: String::from_utf8(err).unwrap() }
}

fn softmax_like(winner: Polarity, p: f64) -> BTreeMap<Polarity, f64> {
    let rest = (1.0 - p) / 2.0;
    Polarity::PREDICTABLE.iter().map(|&q| (q, if q == winner { p } else { rest })).collect()
}

/// Replay fixture standing in for the two checkpoints on the sample sentence.
pub fn sample_fixture() -> String {
    let records = [
        FixtureRecord::ate(SAMPLE_TEXT, &["price".to_string(), "restaurant".to_string()]),
        FixtureRecord::asc(
            SAMPLE_TEXT,
            "price",
            &AscPrediction { polarity: Polarity::Negative, scores: Some(softmax_like(Polarity::Negative, 0.96)) },
        ),
        FixtureRecord::asc(
            SAMPLE_TEXT,
            "restaurant",
            &AscPrediction { polarity: Polarity::Positive, scores: Some(softmax_like(Polarity::Positive, 0.98)) },
        ),
    ];
    records.iter().map(|r| serde_json::to_string(r).unwrap() + "\n").collect()
}

/// A scratch directory holding the sample corpus and its fixture.
pub struct Workspace {
    pub dir: TempDir,
}

impl Workspace {
    pub fn new() -> Workspace {
        let ws = Workspace { dir: tempfile::tempdir().unwrap() };
        ws.write("sample.xml", &serialize_semeval_xml(&sample_corpus()));
        ws.write("sample.fixtures.jsonl", sample_fixture().as_bytes());
        ws
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    pub fn arg(&self, name: &str) -> String {
        self.path(name).display().to_string()
    }

    pub fn write(&self, name: &str, bytes: &[u8]) -> PathBuf {
        let path = self.path(name);
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent).unwrap();
        }
        std::fs::write(&path, bytes).unwrap();
        path
    }

    pub fn read(&self, name: &str) -> Vec<u8> {
        std::fs::read(self.path(name)).unwrap()
    }

    pub fn read_string(&self, name: &str) -> String {
        String::from_utf8(self.read(name)).unwrap()
    }

    /// `absa run` on the sample corpus with replay fixtures.
    pub fn run_sample(&self, out: &str, parallelism: usize) -> Run {
        let p = parallelism.to_string();
        absa(&[
            "run",
            "--corpus",
            &self.arg("sample.xml"),
            "--ate",
            "replay",
            "--asc",
            "replay",
            "--fixtures",
            &self.arg("sample.fixtures.jsonl"),
            "--parallelism",
            &p,
            "--out",
            &self.arg(out),
        ])
    }
}

/// Inference service stand-in. `handler` maps (path, body) to (status, body).
pub struct MockService {
    server: Arc<Server>,
    accept: Option<thread::JoinHandle<()>>,
    pub url: String,
}

impl MockService {
    pub fn start(handler: impl Fn(&str, &serde_json::Value) -> (u16, String) + Send + Sync + 'static) -> MockService {
        let server = Arc::new(Server::http("127.0.0.1:0").unwrap());
        let url = format!("http://{}", server.server_addr().to_ip().unwrap());
        let handler = Arc::new(handler);
        let accept = {
            let server = server.clone();
            thread::spawn(move || {
                for mut request in server.incoming_requests() {
                    let handler = handler.clone();
                    thread::spawn(move || {
                        let mut body = String::new();
                        request.as_reader().read_to_string(&mut body).unwrap();
                        let body = serde_json::from_str(&body).unwrap_or(serde_json::Value::Null);
                        let (status, text) = handler(request.url(), &body);
                        let header = Header::from_bytes("Content-Type", "application/json").unwrap();
                        let _ =
                            request.respond(Response::from_string(text).with_status_code(status).with_header(header));
                    });
                }
            })
        };
        MockService { server, accept: Some(accept), url }
    }
}

impl Drop for MockService {
    fn drop(&mut self) {
        self.server.unblock();
        if let Some(handle) = self.accept.take() {
            let _ = handle.join();
        }
    }
}

/// Port with nothing listening on it.
pub fn dead_endpoint() -> String {
    let port = std::net::TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().port();
    format!("http://127.0.0.1:{port}")
}

/// Config file making remote retries fast.
pub fn fast_remote_config(ws: &Workspace) -> String {
    ws.write("fast.toml", b"[remote]\nmax_retries = 1\nbackoff_ms = 5\ntimeout_ms = 2000\n");
    ws.arg("fast.toml")
}
