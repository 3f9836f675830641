//! Client for an out-of-process model server.
//!
//! Messages are newline-delimited JSON. Every request is
//! `{"session": .., "op": .., "payload": {..}}` and every response
//! `{"session": .., "ok": true, "payload": {..}}` or
//! `{"session": .., "ok": false, "error": {"code": .., "message": ..}}`.
//!
//! | op       | payload                                          | response payload                     |
//! |----------|--------------------------------------------------|--------------------------------------|
//! | `hello`  | `{}`                                             | `{"vocab_size": n, "end_id": id}`    |
//! | `encode` | `{"text": s}`                                    | `{"ids": [..]}`                      |
//! | `decode` | `{"ids": [..]}`                                  | `{"text": s}`                        |
//! | `step`   | `{"input_ids", "prefix_ids", "allowed_ids"?}`    | `{"chosen_id", "logprob"}` or `{"topk": [[id, logprob], ..]}` |
//!
//! With `allowed_ids` the server returns the restricted argmax (ties to the
//! lowest id); without it, the top-k list.

use std::io::{BufRead, BufReader, Write};
use std::net::TcpStream;
use std::process::{Child, Command, Stdio};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

use crate::token::{BackendError, Scorer, TokenId, TokenSet, Tokenizer};

/// Environment variable holding the default bridge address.
pub const BRIDGE_ENV: &str = "MARKABSA_BRIDGE";

#[derive(Debug, Error)]
pub enum BridgeError {
    #[error("bridge unreachable at {addr}: {reason}")]
    Unreachable { addr: String, reason: String },
    #[error("bridge error {code}: {message}")]
    Remote { code: String, message: String },
    #[error("malformed bridge message: {0}")]
    Malformed(String),
    #[error("bridge I/O: {0}")]
    Io(#[from] std::io::Error),
}

impl From<BridgeError> for BackendError {
    fn from(e: BridgeError) -> Self {
        BackendError::Failure(e.to_string())
    }
}

/// Server error codes.
pub mod codes {
    pub const BAD_SEQUENCE: &str = "BAD_SEQUENCE";
    pub const UNKNOWN_SESSION: &str = "UNKNOWN_SESSION";
    pub const OOM: &str = "OOM";
    pub const MODEL_LOAD_FAILED: &str = "MODEL_LOAD_FAILED";
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Request {
    pub session: String,
    pub op: String,
    pub payload: Value,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WireError {
    pub code: String,
    #[serde(default)]
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Response {
    pub session: String,
    pub ok: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub payload: Option<Value>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<WireError>,
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
pub struct Hello {
    pub vocab_size: usize,
    pub end_id: TokenId,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum StepReply {
    Chosen { chosen_id: TokenId, logprob: f64 },
    TopK { topk: Vec<(TokenId, f64)> },
}

/// Parses and checks one response line. A failed response becomes
/// [`BridgeError::Remote`].
pub fn parse_response(line: &str) -> Result<Response, BridgeError> {
    let resp: Response = serde_json::from_str(line).map_err(|e| BridgeError::Malformed(e.to_string()))?;
    if !resp.ok {
        let err = resp
            .error
            .ok_or_else(|| BridgeError::Malformed("failed response without error".into()))?;
        return Err(BridgeError::Remote {
            code: err.code,
            message: err.message,
        });
    }
    if resp.payload.is_none() {
        return Err(BridgeError::Malformed("response without payload".into()));
    }
    Ok(resp)
}

/// Highest log-probability entry; ties go to the lowest id.
pub fn best_of_topk(topk: &[(TokenId, f64)]) -> Option<TokenId> {
    topk.iter()
        .copied()
        .reduce(|best, cand| match cand.1.total_cmp(&best.1) {
            std::cmp::Ordering::Greater => cand,
            std::cmp::Ordering::Equal if cand.0 < best.0 => cand,
            _ => best,
        })
        .map(|(id, _)| id)
}

struct Connection {
    reader: Box<dyn BufRead + Send>,
    writer: Box<dyn Write + Send>,
    child: Option<Child>,
}

impl Connection {
    fn call(&mut self, req: &Request) -> Result<Value, BridgeError> {
        let mut line = serde_json::to_string(req).expect("request serializes");
        line.push('\n');
        self.writer.write_all(line.as_bytes())?;
        self.writer.flush()?;
        let mut reply = String::new();
        if self.reader.read_line(&mut reply)? == 0 {
            return Err(BridgeError::Malformed("connection closed".into()));
        }
        let resp = parse_response(reply.trim_end())?;
        if resp.session != req.session {
            return Err(BridgeError::Malformed(format!(
                "response for session {:?}, expected {:?}",
                resp.session, req.session
            )));
        }
        Ok(resp.payload.unwrap_or(Value::Null))
    }
}

impl Drop for Connection {
    fn drop(&mut self) {
        if let Some(child) = &mut self.child {
            let _ = child.kill();
            let _ = child.wait();
        }
    }
}

/// One bridge session, usable as both tokenizer and scorer.
pub struct BridgeClient {
    conn: Mutex<Connection>,
    session: String,
    hello: Hello,
}

impl BridgeClient {
    /// `tcp://host:port`, `host:port`, or `cmd:<program> <args..>` (spawned,
    /// speaking over its standard streams).
    pub fn connect(addr: &str, session: &str) -> Result<Self, BridgeError> {
        let unreachable = |reason: String| BridgeError::Unreachable {
            addr: addr.to_string(),
            reason,
        };
        if let Some(cmd) = addr.strip_prefix("cmd:") {
            let mut parts = cmd.split_whitespace();
            let program = parts.next().ok_or_else(|| unreachable("empty command".into()))?;
            let mut child = Command::new(program)
                .args(parts)
                .stdin(Stdio::piped())
                .stdout(Stdio::piped())
                .spawn()
                .map_err(|e| unreachable(e.to_string()))?;
            let stdin = child.stdin.take().expect("piped stdin");
            let stdout = child.stdout.take().expect("piped stdout");
            let conn = Connection {
                reader: Box::new(BufReader::new(stdout)),
                writer: Box::new(stdin),
                child: Some(child),
            };
            return Self::handshake(conn, session).map_err(|e| unreachable(e.to_string()));
        }
        let host = addr.strip_prefix("tcp://").unwrap_or(addr);
        let stream = TcpStream::connect(host).map_err(|e| unreachable(e.to_string()))?;
        stream.set_nodelay(true).map_err(|e| unreachable(e.to_string()))?;
        let reader = stream.try_clone().map_err(|e| unreachable(e.to_string()))?;
        let conn = Connection {
            reader: Box::new(BufReader::new(reader)),
            writer: Box::new(stream),
            child: None,
        };
        Self::handshake(conn, session).map_err(|e| unreachable(e.to_string()))
    }

    /// Runs the protocol over arbitrary streams.
    pub fn over<R, W>(reader: R, writer: W, session: &str) -> Result<Self, BridgeError>
    where
        R: BufRead + Send + 'static,
        W: Write + Send + 'static,
    {
        Self::handshake(
            Connection {
                reader: Box::new(reader),
                writer: Box::new(writer),
                child: None,
            },
            session,
        )
    }

    fn handshake(mut conn: Connection, session: &str) -> Result<Self, BridgeError> {
        let payload = conn.call(&Request {
            session: session.to_string(),
            op: "hello".into(),
            payload: json!({}),
        })?;
        let hello: Hello = serde_json::from_value(payload).map_err(|e| BridgeError::Malformed(e.to_string()))?;
        if hello.vocab_size == 0 || hello.end_id as usize >= hello.vocab_size {
            return Err(BridgeError::Malformed(format!("invalid hello {hello:?}")));
        }
        Ok(BridgeClient {
            conn: Mutex::new(conn),
            session: session.to_string(),
            hello,
        })
    }

    pub fn hello(&self) -> Hello {
        self.hello
    }

    fn call<T: for<'de> Deserialize<'de>>(&self, op: &str, payload: Value) -> Result<T, BridgeError> {
        let req = Request {
            session: self.session.clone(),
            op: op.to_string(),
            payload,
        };
        let value = self.conn.lock().expect("bridge lock").call(&req)?;
        serde_json::from_value(value).map_err(|e| BridgeError::Malformed(e.to_string()))
    }

    pub fn step(
        &self,
        input: &[TokenId],
        prefix: &[TokenId],
        allowed: Option<&TokenSet>,
    ) -> Result<StepReply, BridgeError> {
        let mut payload = json!({ "input_ids": input, "prefix_ids": prefix });
        if let Some(set) = allowed {
            payload["allowed_ids"] = json!(set.iter().collect::<Vec<_>>());
        }
        self.call("step", payload)
    }
}

impl Tokenizer for BridgeClient {
    fn vocab_size(&self) -> usize {
        self.hello.vocab_size
    }

    fn end_id(&self) -> TokenId {
        self.hello.end_id
    }

    fn encode(&self, text: &str) -> Result<Vec<TokenId>, BackendError> {
        #[derive(Deserialize)]
        struct Ids {
            ids: Vec<TokenId>,
        }
        Ok(self.call::<Ids>("encode", json!({ "text": text }))?.ids)
    }

    fn decode(&self, ids: &[TokenId]) -> Result<String, BackendError> {
        #[derive(Deserialize)]
        struct Text {
            text: String,
        }
        Ok(self.call::<Text>("decode", json!({ "ids": ids }))?.text)
    }
}

impl Scorer for &BridgeClient {
    fn next_scores(&mut self, _input: &[TokenId], _prefix: &[TokenId]) -> Result<Vec<i64>, BackendError> {
        Err(BackendError::Unsupported("full score vectors over the bridge"))
    }

    fn choose(
        &mut self,
        input: &[TokenId],
        prefix: &[TokenId],
        allowed: Option<&TokenSet>,
    ) -> Result<TokenId, BackendError> {
        match self.step(input, prefix, allowed)? {
            StepReply::Chosen { chosen_id, .. } => Ok(chosen_id),
            StepReply::TopK { topk } => {
                if allowed.is_some() {
                    return Err(BackendError::Failure("expected chosen_id for a restricted step".into()));
                }
                best_of_topk(&topk).ok_or(BackendError::EmptyMask)
            }
        }
    }
}

impl Scorer for BridgeClient {
    fn next_scores(&mut self, input: &[TokenId], prefix: &[TokenId]) -> Result<Vec<i64>, BackendError> {
        (&*self).next_scores(input, prefix)
    }

    fn choose(
        &mut self,
        input: &[TokenId],
        prefix: &[TokenId],
        allowed: Option<&TokenSet>,
    ) -> Result<TokenId, BackendError> {
        (&*self).choose(input, prefix, allowed)
    }
}
