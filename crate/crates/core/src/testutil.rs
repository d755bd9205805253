//! Minimal blocking HTTP/1.1 responder for backend unit tests. Accepts a
//! fixed number of requests, records their bodies, and replies with canned
//! responses. Closes each connection so clients never reuse sockets.

use std::io::{Read, Write};
use std::net::{TcpListener, TcpStream};
use std::thread::JoinHandle;
use std::time::{Duration, Instant};

pub struct MockHttpServer {
    port: u16,
    handle: JoinHandle<Vec<String>>,
}

impl MockHttpServer {
    /// Reply to `expected_requests` requests with the same status and body.
    pub fn respond_with(body: &str, status: u16, expected_requests: usize) -> Self {
        let responses = vec![(status, body.to_string()); expected_requests];
        Self::with_responses(responses)
    }

    /// Reply with 500 for the first `failures` requests, then 200 + body.
    pub fn fail_then_respond(failures: usize, body: &str) -> Self {
        let mut responses = vec![(500, "{\"error\":\"boom\"}".to_string()); failures];
        responses.push((200, body.to_string()));
        Self::with_responses(responses)
    }

    pub fn with_responses(responses: Vec<(u16, String)>) -> Self {
        let listener = TcpListener::bind("127.0.0.1:0").expect("bind mock server");
        listener.set_nonblocking(true).expect("nonblocking listener");
        let port = listener.local_addr().unwrap().port();
        let handle = std::thread::spawn(move || {
            let deadline = Instant::now() + Duration::from_secs(30);
            let mut bodies = Vec::new();
            for (status, body) in responses {
                let stream = loop {
                    match listener.accept() {
                        Ok((stream, _)) => break Some(stream),
                        Err(e) if e.kind() == std::io::ErrorKind::WouldBlock => {
                            if Instant::now() > deadline {
                                break None;
                            }
                            std::thread::sleep(Duration::from_millis(5));
                        }
                        Err(e) => panic!("mock server accept failed: {e}"),
                    }
                };
                let Some(mut stream) = stream else { break };
                stream.set_nonblocking(false).unwrap();
                bodies.push(read_request_body(&mut stream));
                let reason = if status == 200 { "OK" } else { "Error" };
                let response = format!(
                    "HTTP/1.1 {status} {reason}\r\nContent-Type: application/json\r\n\
                     Content-Length: {}\r\nConnection: close\r\n\r\n{body}",
                    body.len()
                );
                stream.write_all(response.as_bytes()).unwrap();
                stream.flush().unwrap();
            }
            bodies
        });
        MockHttpServer { port, handle }
    }

    pub fn url(&self) -> String {
        format!("http://127.0.0.1:{}/score", self.port)
    }

    /// Join the server thread and return the request bodies it saw.
    pub fn finish(self) -> Vec<String> {
        self.handle.join().expect("mock server thread")
    }
}

fn read_request_body(stream: &mut TcpStream) -> String {
    let mut buf = Vec::new();
    let mut chunk = [0u8; 1024];
    let header_end = loop {
        let n = stream.read(&mut chunk).expect("read request");
        if n == 0 {
            break buf.len();
        }
        buf.extend_from_slice(&chunk[..n]);
        if let Some(pos) = find_header_end(&buf) {
            break pos;
        }
    };
    let headers = String::from_utf8_lossy(&buf[..header_end]).to_string();
    let content_length = headers
        .lines()
        .find_map(|line| {
            let (name, value) = line.split_once(':')?;
            name.eq_ignore_ascii_case("content-length")
                .then(|| value.trim().parse::<usize>().ok())?
        })
        .unwrap_or(0);
    let body_start = header_end + 4;
    while buf.len() < body_start + content_length {
        let n = stream.read(&mut chunk).expect("read body");
        if n == 0 {
            break;
        }
        buf.extend_from_slice(&chunk[..n]);
    }
    String::from_utf8_lossy(&buf[body_start..body_start + content_length]).to_string()
}

fn find_header_end(buf: &[u8]) -> Option<usize> {
    buf.windows(4).position(|w| w == b"\r\n\r\n")
}
