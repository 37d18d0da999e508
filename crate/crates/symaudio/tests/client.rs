use std::collections::VecDeque;
use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpListener;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use serde_json::Value;
use symaudio::llm::{
    EndpointConfig, FinishReason, HttpChatClient, HttpReply, LlmClient, LlmError, LlmRequest, RateLimiter,
    Transport,
};

/// Replays canned replies and counts attempts.
struct Canned {
    replies: Mutex<VecDeque<Result<HttpReply, String>>>,
    attempts: AtomicUsize,
}

impl Canned {
    fn new(replies: Vec<Result<HttpReply, String>>) -> Self {
        Canned {
            replies: Mutex::new(replies.into()),
            attempts: AtomicUsize::new(0),
        }
    }
}

/// Lets a test keep a handle on the transport it hands to the client.
struct Shared<T>(Arc<T>);

impl Transport for Shared<Canned> {
    fn post_json(&self, _url: &str, _bearer: Option<&str>, _body: &Value) -> Result<HttpReply, String> {
        self.0.attempts.fetch_add(1, Ordering::SeqCst);
        self.0.replies.lock().unwrap().pop_front().expect("no canned reply left")
    }
}

fn status(code: u16) -> Result<HttpReply, String> {
    Ok(HttpReply {
        status: code,
        body: format!("{{\"error\":\"status {code}\"}}"),
    })
}

fn ok(text: &str) -> Result<HttpReply, String> {
    Ok(HttpReply {
        status: 200,
        body: serde_json::json!({
            "choices": [{"message": {"role": "assistant", "content": text}, "finish_reason": "stop"}],
            "usage": {"prompt_tokens": 12, "completion_tokens": 1}
        })
        .to_string(),
    })
}

fn endpoint() -> EndpointConfig {
    EndpointConfig {
        api_key: Some("test-key".into()),
        ..EndpointConfig::default()
    }
}

fn client(replies: Vec<Result<HttpReply, String>>) -> (HttpChatClient, Arc<Canned>, Arc<Mutex<Vec<Duration>>>) {
    let canned = Arc::new(Canned::new(replies));
    let slept = Arc::new(Mutex::new(Vec::new()));
    let record = slept.clone();
    let client = HttpChatClient::with_transport(&endpoint(), Box::new(Shared(canned.clone())))
        .with_sleeper(move |d| record.lock().unwrap().push(d));
    (client, canned, slept)
}

fn request() -> LlmRequest {
    LlmRequest::user("m", "Which option?", 8)
}

#[test]
fn rate_limits_are_retried_with_backoff() {
    let (client, canned, slept) = client(vec![status(429), status(429), ok("B")]);
    let reply = client.complete(&request()).unwrap();
    assert_eq!(reply.text, "B");
    assert_eq!(reply.finish_reason, FinishReason::Stop);
    assert_eq!((reply.prompt_tokens, reply.completion_tokens), (12, 1));
    assert_eq!(canned.attempts.load(Ordering::SeqCst), 3);
    assert_eq!(*slept.lock().unwrap(), [Duration::from_secs(1), Duration::from_secs(2)]);
}

#[test]
fn server_errors_exhaust_after_five_attempts() {
    let (client, canned, slept) = client((0..5).map(|_| status(503)).collect());
    match client.complete(&request()) {
        Err(LlmError::TransportFailure { attempts: 5, detail }) => assert!(detail.contains("503")),
        other => panic!("{other:?}"),
    }
    assert_eq!(canned.attempts.load(Ordering::SeqCst), 5);
    assert_eq!(
        *slept.lock().unwrap(),
        [1, 2, 4, 8].map(Duration::from_secs)
    );
}

#[test]
fn persistent_rate_limiting_is_reported() {
    let (client, _, _) = client((0..5).map(|_| status(429)).collect());
    assert_eq!(client.complete(&request()), Err(LlmError::RateLimitedExhausted { attempts: 5 }));
}

#[test]
fn connection_errors_are_retried() {
    let (client, canned, _) = client(vec![Err("connection refused".into()), ok("A")]);
    assert_eq!(client.complete(&request()).unwrap().text, "A");
    assert_eq!(canned.attempts.load(Ordering::SeqCst), 2);
}

#[test]
fn auth_failures_are_not_retried() {
    for code in [401, 403] {
        let (client, canned, slept) = client(vec![status(code)]);
        assert_eq!(client.complete(&request()), Err(LlmError::Unauthorized { status: code }));
        assert_eq!(canned.attempts.load(Ordering::SeqCst), 1);
        assert!(slept.lock().unwrap().is_empty());
    }
}

#[test]
fn malformed_bodies_are_reported() {
    let (client, _, _) = client(vec![Ok(HttpReply {
        status: 200,
        body: "{\"choices\":[]}".into(),
    })]);
    assert!(matches!(client.complete(&request()), Err(LlmError::MalformedResponse(_))));
}

/// Tracks how many requests are inside the transport at once.
#[derive(Default)]
struct Gauge {
    now: AtomicUsize,
    peak: AtomicUsize,
    total: AtomicUsize,
}

impl Transport for Shared<Gauge> {
    fn post_json(&self, _url: &str, _bearer: Option<&str>, _body: &Value) -> Result<HttpReply, String> {
        let gauge = &self.0;
        let inside = gauge.now.fetch_add(1, Ordering::SeqCst) + 1;
        gauge.peak.fetch_max(inside, Ordering::SeqCst);
        std::thread::sleep(Duration::from_millis(3));
        gauge.now.fetch_sub(1, Ordering::SeqCst);
        gauge.total.fetch_add(1, Ordering::SeqCst);
        ok("C")
    }
}

#[test]
fn concurrency_cap_holds_under_load() {
    let gauge = Arc::new(Gauge::default());
    let config = EndpointConfig {
        max_concurrent: 3,
        ..endpoint()
    };
    let client = HttpChatClient::with_transport(&config, Box::new(Shared(gauge.clone())));
    std::thread::scope(|s| {
        for _ in 0..100 {
            s.spawn(|| assert_eq!(client.complete(&request()).unwrap().text, "C"));
        }
    });
    assert_eq!(gauge.total.load(Ordering::SeqCst), 100);
    let peak = gauge.peak.load(Ordering::SeqCst);
    assert!((1..=3).contains(&peak), "peak in flight {peak}");
}

#[test]
fn rate_limiter_spaces_requests() {
    let limiter = RateLimiter::new(3, Duration::from_millis(150));
    let started = Instant::now();
    for _ in 0..6 {
        limiter.acquire();
    }
    assert!(started.elapsed() >= Duration::from_millis(150));
    assert!(started.elapsed() < Duration::from_secs(2));
}

#[test]
fn http_round_trip_sends_chat_completion_json() {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let port = listener.local_addr().unwrap().port();
    let server = std::thread::spawn(move || {
        let (stream, _) = listener.accept().unwrap();
        let mut reader = BufReader::new(stream.try_clone().unwrap());
        let mut head = Vec::new();
        let mut length = 0;
        loop {
            let mut line = String::new();
            reader.read_line(&mut line).unwrap();
            if line == "\r\n" || line.is_empty() {
                break;
            }
            if let Some(v) = line.to_ascii_lowercase().strip_prefix("content-length:") {
                length = v.trim().parse().unwrap();
            }
            head.push(line);
        }
        let mut body = vec![0; length];
        reader.read_exact(&mut body).unwrap();
        let reply = ok("D").unwrap().body;
        let mut stream = stream;
        write!(
            stream,
            "HTTP/1.1 200 OK\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{reply}",
            reply.len()
        )
        .unwrap();
        (head, String::from_utf8(body).unwrap())
    });

    let config = EndpointConfig {
        base_url: format!("http://127.0.0.1:{port}/v1/"),
        model_id: "local-model".into(),
        ..endpoint()
    };
    let reply = HttpChatClient::new(&config)
        .complete(&LlmRequest::user("local-model", "Pick one.", 16))
        .unwrap();
    assert_eq!(reply.text, "D");

    let (head, body) = server.join().unwrap();
    assert!(head[0].starts_with("POST /v1/chat/completions "), "{head:?}");
    assert!(head.iter().any(|h| h.to_ascii_lowercase().trim() == "authorization: bearer test-key"), "{head:?}");
    let body: Value = serde_json::from_str(&body).unwrap();
    assert_eq!(body["model"], "local-model");
    assert_eq!(body["temperature"], 0.0);
    assert_eq!(body["max_tokens"], 16);
    assert_eq!(body["messages"][0]["role"], "user");
    assert_eq!(body["messages"][0]["content"], "Pick one.");
}
