//! Minimal chat-completions mock server for live-backend tests.
//!
//! Listens on an ephemeral localhost port, parses one HTTP/1.1 POST per
//! connection, and lets the test script the response from the request
//! body. Connections are handled on their own threads so concurrent
//! batches and slow (timeout-provoking) responses work.

use std::io::{BufRead, BufReader, Read, Write};
use std::net::{TcpListener, TcpStream};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Mutex};
use std::thread::JoinHandle;
use std::time::Duration;

pub struct MockResponse {
    pub status: u16,
    pub body: String,
    pub delay: Option<Duration>,
}

impl MockResponse {
    /// A well-formed chat completion whose message content is `content`.
    pub fn completion(content: &str) -> Self {
        let body = serde_json::json!({
            "choices": [{"index": 0, "message": {"role": "assistant", "content": content}}]
        });
        Self { status: 200, body: body.to_string(), delay: None }
    }

    pub fn with_delay(mut self, delay: Duration) -> Self {
        self.delay = Some(delay);
        self
    }
}

pub struct MockServer {
    address: String,
    shutdown: Arc<AtomicBool>,
    // Only some test binaries inspect headers.
    #[allow(dead_code)]
    headers_seen: Arc<Mutex<Vec<String>>>,
    handle: Option<JoinHandle<()>>,
}

impl MockServer {
    /// Start a server whose responses are computed from the raw request
    /// body by `script`.
    pub fn start<F>(script: F) -> Self
    where
        F: Fn(&str) -> MockResponse + Send + Sync + 'static,
    {
        let listener = TcpListener::bind("127.0.0.1:0").expect("bind ephemeral port");
        let address = format!("http://{}/v1/chat/completions", listener.local_addr().unwrap());
        let shutdown = Arc::new(AtomicBool::new(false));
        let headers_seen = Arc::new(Mutex::new(Vec::new()));
        let script = Arc::new(script);

        let accept_shutdown = Arc::clone(&shutdown);
        let accept_headers = Arc::clone(&headers_seen);
        let handle = std::thread::spawn(move || {
            for stream in listener.incoming() {
                if accept_shutdown.load(Ordering::SeqCst) {
                    break;
                }
                let Ok(stream) = stream else { continue };
                let script = Arc::clone(&script);
                let headers = Arc::clone(&accept_headers);
                std::thread::spawn(move || {
                    let _ = serve_one(stream, &*script, &headers);
                });
            }
        });

        Self { address, shutdown, headers_seen, handle: Some(handle) }
    }

    pub fn url(&self) -> &str {
        &self.address
    }

    /// One raw header block per request served so far.
    #[allow(dead_code)]
    pub fn headers_seen(&self) -> Vec<String> {
        self.headers_seen.lock().expect("headers lock").clone()
    }
}

impl Drop for MockServer {
    fn drop(&mut self) {
        self.shutdown.store(true, Ordering::SeqCst);
        // Unblock the accept loop.
        if let Some(authority) = self.address.strip_prefix("http://") {
            if let Some((host_port, _)) = authority.split_once('/') {
                let _ = TcpStream::connect(host_port);
            }
        }
        if let Some(handle) = self.handle.take() {
            let _ = handle.join();
        }
    }
}

fn serve_one<F>(
    stream: TcpStream,
    script: &F,
    headers_seen: &Mutex<Vec<String>>,
) -> std::io::Result<()>
where
    F: Fn(&str) -> MockResponse,
{
    stream.set_read_timeout(Some(Duration::from_secs(10)))?;
    let mut reader = BufReader::new(stream.try_clone()?);
    let mut line = String::new();
    reader.read_line(&mut line)?;

    let mut content_length = 0usize;
    let mut header_block = String::new();
    loop {
        let mut header = String::new();
        reader.read_line(&mut header)?;
        let header = header.trim_end();
        if header.is_empty() {
            break;
        }
        header_block.push_str(header);
        header_block.push('\n');
        if let Some(value) = header
            .to_ascii_lowercase()
            .strip_prefix("content-length:")
            .map(str::trim)
            .and_then(|v| v.parse::<usize>().ok())
        {
            content_length = value;
        }
    }
    headers_seen.lock().expect("headers lock").push(header_block);
    let mut body = vec![0u8; content_length];
    reader.read_exact(&mut body)?;
    let body = String::from_utf8_lossy(&body).into_owned();

    let response = script(&body);
    if let Some(delay) = response.delay {
        std::thread::sleep(delay);
    }
    let mut stream = stream;
    let payload = response.body.as_bytes();
    let head = format!(
        "HTTP/1.1 {} {}\r\ncontent-type: application/json\r\ncontent-length: {}\r\nconnection: close\r\n\r\n",
        response.status,
        if response.status == 200 { "OK" } else { "Error" },
        payload.len()
    );
    stream.write_all(head.as_bytes())?;
    stream.write_all(payload)?;
    stream.flush()
}
