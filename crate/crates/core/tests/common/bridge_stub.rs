//! In-test model server speaking the bridge protocol.

use std::io::{BufRead, BufReader, Write};
use std::net::TcpListener;
use std::sync::Arc;

use markabsa_core::scorers::WordTokenizer;
use markabsa_core::token::{TokenId, Tokenizer};
use serde_json::{json, Value};

pub type Model = Arc<dyn Fn(&[TokenId], &[TokenId]) -> Vec<f64> + Send + Sync>;

pub struct Stub {
    pub tok: WordTokenizer,
    pub model: Model,
    pub k: usize,
    /// Step call index (0-based) answered with an OOM error.
    pub oom_at: Option<usize>,
}

/// Restricted argmax written out longhand; ties go to the lowest id.
pub fn restricted_argmax(scores: &[f64], allowed: &[TokenId]) -> Option<TokenId> {
    let mut ids = allowed.to_vec();
    ids.sort_unstable();
    let mut best: Option<(TokenId, f64)> = None;
    for id in ids {
        let s = scores[id as usize];
        if best.is_none_or(|(_, b)| s > b) {
            best = Some((id, s));
        }
    }
    best.map(|(id, _)| id)
}

fn ids(v: &Value) -> Vec<TokenId> {
    v.as_array()
        .map(|a| a.iter().filter_map(|x| x.as_u64()).map(|x| x as TokenId).collect())
        .unwrap_or_default()
}

impl Stub {
    pub fn serve(&self, reader: impl BufRead, mut writer: impl Write) {
        let mut session: Option<String> = None;
        let mut steps = 0usize;
        for line in reader.lines() {
            let Ok(line) = line else { break };
            let req: Value = serde_json::from_str(&line).expect("client sends JSON");
            let sid = req["session"].as_str().unwrap_or_default().to_string();
            let op = req["op"].as_str().unwrap_or_default();
            let p = &req["payload"];
            let fail = |code: &str| json!({"session": sid, "ok": false, "error": {"code": code, "message": code}});
            let resp = if op == "hello" {
                session = Some(sid.clone());
                json!({"session": sid, "ok": true, "payload": {"vocab_size": self.tok.vocab_size(), "end_id": self.tok.end_id()}})
            } else if session.is_none() {
                fail("BAD_SEQUENCE")
            } else if session.as_deref() != Some(sid.as_str()) {
                fail("UNKNOWN_SESSION")
            } else {
                match op {
                    "encode" => {
                        let out = self.tok.encode(p["text"].as_str().unwrap_or_default()).unwrap();
                        json!({"session": sid, "ok": true, "payload": {"ids": out}})
                    }
                    "decode" => match self.tok.decode(&ids(&p["ids"])) {
                        Ok(text) => json!({"session": sid, "ok": true, "payload": {"text": text}}),
                        Err(_) => fail("BAD_SEQUENCE"),
                    },
                    "step" => {
                        steps += 1;
                        if self.oom_at == Some(steps - 1) {
                            fail("OOM")
                        } else {
                            let scores = (self.model)(&ids(&p["input_ids"]), &ids(&p["prefix_ids"]));
                            match p.get("allowed_ids") {
                                Some(allowed) => {
                                    let id = restricted_argmax(&scores, &ids(allowed)).unwrap();
                                    json!({"session": sid, "ok": true, "payload": {"chosen_id": id, "logprob": scores[id as usize]}})
                                }
                                None => {
                                    let mut order: Vec<TokenId> = (0..scores.len() as TokenId).collect();
                                    order.sort_by(|&a, &b| {
                                        scores[b as usize].total_cmp(&scores[a as usize]).then(a.cmp(&b))
                                    });
                                    let topk: Vec<(TokenId, f64)> = order
                                        .into_iter()
                                        .take(self.k)
                                        .map(|i| (i, scores[i as usize]))
                                        .collect();
                                    json!({"session": sid, "ok": true, "payload": {"topk": topk}})
                                }
                            }
                        }
                    }
                    _ => fail("BAD_SEQUENCE"),
                }
            };
            if writeln!(writer, "{resp}").and_then(|_| writer.flush()).is_err() {
                break;
            }
        }
    }
}

/// Serves every accepted connection on its own thread; returns the address.
pub fn spawn_tcp(stub: Stub) -> String {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap().to_string();
    let stub = Arc::new(stub);
    std::thread::spawn(move || {
        for stream in listener.incoming() {
            let Ok(stream) = stream else { break };
            stream.set_nodelay(true).unwrap();
            let stub = Arc::clone(&stub);
            std::thread::spawn(move || {
                let reader = BufReader::new(stream.try_clone().unwrap());
                stub.serve(reader, stream);
            });
        }
    });
    addr
}
