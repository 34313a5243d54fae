//! Minimal HTTP ingestion service for the log store.
//!
//! One writer guards the store; each connection is handled on its own
//! thread. The surface is small enough that a hand-rolled HTTP/1.1 loop
//! (request line, headers, Content-Length body) beats pulling in an async
//! stack: `POST /logs` ingests a batch document, `GET /logs` queries.

use crate::instrument::Category;
use crate::logstore::{BatchDocument, LocationMode, LogRecord, QueryFilter, Store, StoreError};
use std::collections::BTreeSet;
use std::io::{BufRead, BufReader, Read, Write};
use std::net::{SocketAddr, TcpListener, TcpStream};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Mutex};
use std::thread::JoinHandle;

pub struct ServerHandle {
    pub addr: SocketAddr,
    stop: Arc<AtomicBool>,
    thread: Option<JoinHandle<()>>,
}

impl ServerHandle {
    pub fn stop(mut self) {
        self.shutdown();
    }

    fn shutdown(&mut self) {
        self.stop.store(true, Ordering::SeqCst);
        // Poke the listener so accept() returns.
        let _ = TcpStream::connect(self.addr);
        if let Some(t) = self.thread.take() {
            let _ = t.join();
        }
    }
}

impl Drop for ServerHandle {
    fn drop(&mut self) {
        if self.thread.is_some() {
            self.shutdown();
        }
    }
}

/// Serve the store on 127.0.0.1:`port` (0 picks an ephemeral port).
pub fn serve(store: Arc<Mutex<Store>>, port: u16) -> std::io::Result<ServerHandle> {
    let listener = TcpListener::bind(("127.0.0.1", port))?;
    let addr = listener.local_addr()?;
    let stop = Arc::new(AtomicBool::new(false));
    let stop_flag = stop.clone();
    let thread = std::thread::spawn(move || {
        for conn in listener.incoming() {
            if stop_flag.load(Ordering::SeqCst) {
                break;
            }
            let Ok(stream) = conn else { continue };
            let store = store.clone();
            std::thread::spawn(move || {
                let _ = handle_connection(stream, store);
            });
        }
    });
    Ok(ServerHandle { addr, stop, thread: Some(thread) })
}

fn handle_connection(stream: TcpStream, store: Arc<Mutex<Store>>) -> std::io::Result<()> {
    let mut reader = BufReader::new(stream.try_clone()?);
    let mut request_line = String::new();
    if reader.read_line(&mut request_line)? == 0 {
        return Ok(());
    }
    let mut parts = request_line.split_whitespace();
    let method = parts.next().unwrap_or("").to_string();
    let target = parts.next().unwrap_or("").to_string();

    let mut content_length = 0usize;
    loop {
        let mut line = String::new();
        if reader.read_line(&mut line)? == 0 {
            break;
        }
        let line = line.trim_end();
        if line.is_empty() {
            break;
        }
        if let Some((name, value)) = line.split_once(':') {
            if name.eq_ignore_ascii_case("content-length") {
                content_length = value.trim().parse().unwrap_or(0);
            }
        }
    }
    let mut body = vec![0u8; content_length];
    reader.read_exact(&mut body)?;

    let (path, query) = match target.split_once('?') {
        Some((p, q)) => (p, q),
        None => (target.as_str(), ""),
    };

    let (status, payload) = match (method.as_str(), path) {
        ("POST", "/logs") => post_logs(&body, &store),
        ("GET", "/logs") => get_logs(query, &store),
        _ => (404, "{\"error\":\"not found\"}".to_string()),
    };
    respond(stream, status, &payload)
}

fn post_logs(body: &[u8], store: &Arc<Mutex<Store>>) -> (u16, String) {
    let doc: BatchDocument = match serde_json::from_slice(body) {
        Ok(doc) => doc,
        Err(e) => return (400, format!("{{\"error\":{:?}}}", e.to_string())),
    };
    if doc.batch_id.is_empty() {
        return (400, "{\"error\":\"batch_id must be non-empty\"}".to_string());
    }
    let mut guard = store.lock().expect("store lock");
    match guard.ingest_batch(&doc) {
        Ok(accepted) => {
            (202, format!("{{\"batch_id\":{:?},\"accepted\":{}}}", doc.batch_id, accepted))
        }
        Err(StoreError::BatchConflict { batch_id }) => {
            (409, format!("{{\"error\":\"batch conflict\",\"batch_id\":{:?}}}", batch_id))
        }
        Err(StoreError::DuplicateSeq { app_id, seq }) => (
            400,
            format!("{{\"error\":\"duplicate seq\",\"app_id\":{:?},\"seq\":{}}}", app_id, seq),
        ),
        Err(e) => (500, format!("{{\"error\":{:?}}}", e.to_string())),
    }
}

fn get_logs(query: &str, store: &Arc<Mutex<Store>>) -> (u16, String) {
    let filter = match parse_query(query) {
        Ok(f) => f,
        Err(msg) => return (400, format!("{{\"error\":{:?}}}", msg)),
    };
    let records = store.lock().expect("store lock").query(&filter);
    (200, serde_json::to_string(&records).expect("records serialize"))
}

fn parse_query(query: &str) -> Result<QueryFilter, String> {
    let mut filter = QueryFilter::default();
    for pair in query.split('&').filter(|p| !p.is_empty()) {
        let (key, value) = pair.split_once('=').ok_or_else(|| format!("bad parameter {pair:?}"))?;
        let value = percent_decode(value);
        match key {
            "from" => filter.from = Some(value.parse().map_err(|_| "bad from".to_string())?),
            "to" => filter.to = Some(value.parse().map_err(|_| "bad to".to_string())?),
            "kind" => {
                let kind = Category::parse(&value).ok_or_else(|| format!("bad kind {value:?}"))?;
                filter.kinds.get_or_insert_with(BTreeSet::new).insert(kind);
            }
            "device" => {
                filter.devices.get_or_insert_with(BTreeSet::new).insert(value);
            }
            "app" => {
                filter.apps.get_or_insert_with(BTreeSet::new).insert(value);
            }
            "mode" => {
                filter.location_mode = Some(match value.as_str() {
                    "Office" => LocationMode::Office,
                    "Other" => LocationMode::Other,
                    other => return Err(format!("bad mode {other:?}")),
                })
            }
            other => return Err(format!("unknown parameter {other:?}")),
        }
    }
    Ok(filter)
}

fn percent_decode(s: &str) -> String {
    let bytes = s.as_bytes();
    let mut out = Vec::with_capacity(bytes.len());
    let mut i = 0;
    while i < bytes.len() {
        if bytes[i] == b'%' && i + 3 <= bytes.len() {
            let hex = std::str::from_utf8(&bytes[i + 1..i + 3]).unwrap_or("");
            if let Ok(b) = u8::from_str_radix(hex, 16) {
                out.push(b);
                i += 3;
                continue;
            }
        }
        if bytes[i] == b'+' {
            out.push(b' ');
        } else {
            out.push(bytes[i]);
        }
        i += 1;
    }
    String::from_utf8_lossy(&out).into_owned()
}

fn respond(mut stream: TcpStream, status: u16, body: &str) -> std::io::Result<()> {
    let reason = match status {
        200 => "OK",
        202 => "Accepted",
        400 => "Bad Request",
        404 => "Not Found",
        409 => "Conflict",
        _ => "Internal Server Error",
    };
    let response = format!(
        "HTTP/1.1 {} {}\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{}",
        status,
        reason,
        body.len(),
        body
    );
    stream.write_all(response.as_bytes())
}

/// Blocking single-request client used by the CLI and tests.
pub fn http_request(addr: SocketAddr, method: &str, target: &str, body: Option<&str>) -> std::io::Result<(u16, String)> {
    let mut stream = TcpStream::connect(addr)?;
    let body = body.unwrap_or("");
    let request = format!(
        "{} {} HTTP/1.1\r\nHost: {}\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{}",
        method,
        target,
        addr,
        body.len(),
        body
    );
    stream.write_all(request.as_bytes())?;
    let mut reader = BufReader::new(stream);
    let mut status_line = String::new();
    reader.read_line(&mut status_line)?;
    let status: u16 = status_line.split_whitespace().nth(1).and_then(|s| s.parse().ok()).unwrap_or(0);
    let mut content_length = 0usize;
    loop {
        let mut line = String::new();
        if reader.read_line(&mut line)? == 0 {
            break;
        }
        if line.trim_end().is_empty() {
            break;
        }
        if let Some((name, value)) = line.split_once(':') {
            if name.eq_ignore_ascii_case("content-length") {
                content_length = value.trim().parse().unwrap_or(0);
            }
        }
    }
    let mut body = vec![0u8; content_length];
    reader.read_exact(&mut body)?;
    Ok((status, String::from_utf8_lossy(&body).into_owned()))
}

/// POST a batch document to a running service.
pub fn post_batch(addr: SocketAddr, doc: &BatchDocument) -> std::io::Result<(u16, String)> {
    let body = serde_json::to_string(doc).expect("document serializes");
    http_request(addr, "POST", "/logs", Some(&body))
}

/// GET /logs with a raw query string, decoding the record array.
pub fn get_records(addr: SocketAddr, query: &str) -> std::io::Result<Vec<LogRecord>> {
    let target = if query.is_empty() { "/logs".to_string() } else { format!("/logs?{}", query) };
    let (status, body) = http_request(addr, "GET", &target, None)?;
    if status != 200 {
        return Err(std::io::Error::other(format!("status {status}: {body}")));
    }
    Ok(serde_json::from_str(&body).map_err(std::io::Error::other)?)
}
