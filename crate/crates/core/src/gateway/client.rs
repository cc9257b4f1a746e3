//! Protocol client for an adapter process (stdio) or a TCP server.

use std::collections::HashMap;
use std::io::{BufReader, BufWriter, Read, Write};
use std::net::TcpStream;
use std::process::{Child, Command, Stdio};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Mutex;

use super::protocol::{self, Request, RequestBody, Response, ResponseBody, PROTOCOL_VERSION};
use super::{
    DistributionRequest, DistributionResponse, Gateway, GatewayError, ModelInfo, Result, TaggedWord,
};
use crate::model::{TokenId, TokenOffset};

pub const DEFAULT_MAX_IN_FLIGHT: usize = 16;

struct Connection {
    reader: BufReader<Box<dyn Read + Send>>,
    writer: BufWriter<Box<dyn Write + Send>>,
    child: Option<Child>,
}

impl Drop for Connection {
    fn drop(&mut self) {
        if let Some(mut child) = self.child.take() {
            let _ = child.kill();
            let _ = child.wait();
        }
    }
}

/// Gateway backed by the wire protocol.
///
/// Requests in a batch are pipelined, up to `max_in_flight` at a time, and
/// matched back to callers by request id, so the adapter may answer out of
/// order.
pub struct GatewayClient {
    conn: Mutex<Connection>,
    next_id: AtomicU64,
    max_in_flight: usize,
    info: ModelInfo,
}

impl std::fmt::Debug for GatewayClient {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("GatewayClient")
            .field("info", &self.info)
            .field("max_in_flight", &self.max_in_flight)
            .finish()
    }
}

impl GatewayClient {
    /// Spawns `command` (whitespace-separated program and arguments) and
    /// talks to it over stdin/stdout.
    pub fn spawn(command: &str) -> Result<Self> {
        let mut parts = command.split_whitespace();
        let program = parts
            .next()
            .ok_or_else(|| GatewayError::Transport("empty adapter command".into()))?;
        let mut child = Command::new(program)
            .args(parts)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()
            .map_err(|e| GatewayError::Transport(format!("cannot spawn `{command}`: {e}")))?;
        let stdin = child.stdin.take().expect("piped stdin");
        let stdout = child.stdout.take().expect("piped stdout");
        Self::from_parts(Box::new(stdout), Box::new(stdin), Some(child))
    }

    pub fn connect_tcp(addr: &str) -> Result<Self> {
        let stream = TcpStream::connect(addr)
            .map_err(|e| GatewayError::Transport(format!("cannot connect to {addr}: {e}")))?;
        stream.set_nodelay(true)?;
        let reader = stream.try_clone()?;
        Self::from_parts(Box::new(reader), Box::new(stream), None)
    }

    /// Wraps an already-established byte stream pair.
    pub fn from_streams(
        reader: Box<dyn Read + Send>,
        writer: Box<dyn Write + Send>,
    ) -> Result<Self> {
        Self::from_parts(reader, writer, None)
    }

    fn from_parts(
        reader: Box<dyn Read + Send>,
        writer: Box<dyn Write + Send>,
        child: Option<Child>,
    ) -> Result<Self> {
        let mut client = Self {
            conn: Mutex::new(Connection {
                reader: BufReader::new(reader),
                writer: BufWriter::new(writer),
                child,
            }),
            next_id: AtomicU64::new(1),
            max_in_flight: DEFAULT_MAX_IN_FLIGHT,
            info: ModelInfo {
                model_name: String::new(),
                vocab_size: 1,
                mask_token_id: 0,
                max_positions: 0,
            },
        };
        let info = client.handshake()?;
        info.validate()?;
        client.info = info;
        Ok(client)
    }

    pub fn with_max_in_flight(mut self, n: usize) -> Self {
        self.max_in_flight = n.max(1);
        self
    }

    pub fn info(&self) -> &ModelInfo {
        &self.info
    }

    fn roundtrip(&self, bodies: Vec<RequestBody>) -> Vec<Result<ResponseBody>> {
        let mut conn = match self.conn.lock() {
            Ok(c) => c,
            Err(_) => {
                return bodies
                    .iter()
                    .map(|_| Err(GatewayError::Transport("connection poisoned".into())))
                    .collect()
            }
        };
        let total = bodies.len();
        let mut out = Vec::with_capacity(total);
        let mut bodies = bodies.into_iter().peekable();
        while bodies.peek().is_some() {
            let chunk: Vec<RequestBody> = bodies.by_ref().take(self.max_in_flight).collect();
            match self.exchange(&mut conn, chunk.len(), chunk) {
                Ok(results) => out.extend(results),
                Err(e) => {
                    // connection state is unknown after an I/O failure; fail everything left
                    let remaining = total - out.len();
                    out.extend((0..remaining).map(|_| Err(replicate(&e))));
                    return out;
                }
            }
        }
        out
    }

    fn exchange(
        &self,
        conn: &mut Connection,
        n: usize,
        chunk: Vec<RequestBody>,
    ) -> Result<Vec<Result<ResponseBody>>> {
        let ids: Vec<String> = (0..n)
            .map(|_| self.next_id.fetch_add(1, Ordering::Relaxed).to_string())
            .collect();
        for (id, body) in ids.iter().zip(chunk) {
            protocol::write_message(&mut conn.writer, &Request::new(id.clone(), body))?;
        }
        conn.writer.flush()?;

        let mut by_id: HashMap<String, Response> = HashMap::with_capacity(n);
        while by_id.len() < n {
            let frame = protocol::read_frame(&mut conn.reader)?
                .ok_or_else(|| GatewayError::Transport("adapter closed the connection".into()))?;
            let resp: Response = serde_json::from_slice(&frame)
                .map_err(|e| GatewayError::Transport(format!("malformed response: {e}")))?;
            if resp.v != PROTOCOL_VERSION {
                return Err(GatewayError::VersionMismatch {
                    expected: PROTOCOL_VERSION,
                    got: resp.v,
                });
            }
            if !ids.contains(&resp.request_id) {
                return Err(GatewayError::Transport(format!(
                    "response for unknown request id {:?}",
                    resp.request_id
                )));
            }
            by_id.insert(resp.request_id.clone(), resp);
        }
        Ok(ids
            .iter()
            .map(|id| {
                let resp = by_id.remove(id).expect("all ids answered");
                match resp.body {
                    ResponseBody::Error { code, message } => {
                        Err(protocol::error_from_wire(&code, &message))
                    }
                    body => Ok(body),
                }
            })
            .collect())
    }

    fn single(&self, body: RequestBody) -> Result<ResponseBody> {
        self.roundtrip(vec![body])
            .pop()
            .unwrap_or_else(|| Err(GatewayError::Transport("no response".into())))
    }
}

fn replicate(e: &GatewayError) -> GatewayError {
    match e {
        GatewayError::VersionMismatch { expected, got } => GatewayError::VersionMismatch {
            expected: *expected,
            got: *got,
        },
        GatewayError::Transport(m) => GatewayError::Transport(m.clone()),
        other => GatewayError::Transport(other.to_string()),
    }
}

impl Gateway for GatewayClient {
    fn handshake(&self) -> Result<ModelInfo> {
        protocol::response_into_info(self.single(RequestBody::Handshake)?)
    }

    fn tokenize(&self, text: &str) -> Result<Vec<TokenOffset>> {
        if text.is_empty() {
            return Err(GatewayError::Encoding("empty text".into()));
        }
        protocol::response_into_tokens(self.single(RequestBody::Tokenize {
            text: text.to_string(),
        })?)
    }

    fn distributions(&self, req: &DistributionRequest) -> Result<DistributionResponse> {
        self.distributions_batch(std::slice::from_ref(req))
            .pop()
            .unwrap_or_else(|| Err(GatewayError::Transport("no response".into())))
    }

    fn distributions_batch(
        &self,
        reqs: &[DistributionRequest],
    ) -> Vec<Result<DistributionResponse>> {
        let mut results: Vec<Option<Result<DistributionResponse>>> = Vec::new();
        let mut bodies = Vec::new();
        let mut slots = Vec::new();
        for (i, req) in reqs.iter().enumerate() {
            match req.validate().and_then(|_| req.check_length(&self.info)) {
                Ok(()) => {
                    slots.push(i);
                    bodies.push(RequestBody::Distributions {
                        token_ids: req.token_ids.clone(),
                        masked_positions: req.masked_positions.clone(),
                    });
                    results.push(None);
                }
                Err(e) => results.push(Some(Err(e))),
            }
        }
        for (slot, resp) in slots.into_iter().zip(self.roundtrip(bodies)) {
            let req = &reqs[slot];
            results[slot] = Some(resp.and_then(|body| {
                let out = protocol::response_into_distributions(&req.request_id, body)?;
                check_positions(req, &out, self.info.vocab_size)?;
                Ok(out)
            }));
        }
        results
            .into_iter()
            .map(|r| r.expect("every request answered"))
            .collect()
    }

    fn decode(&self, token_ids: &[TokenId]) -> Result<Vec<String>> {
        protocol::response_into_words(self.single(RequestBody::Decode {
            token_ids: token_ids.to_vec(),
        })?)
    }

    fn pos_tag(&self, text: &str) -> Result<Vec<TaggedWord>> {
        protocol::response_into_tags(self.single(RequestBody::PosTag {
            text: text.to_string(),
        })?)
    }
}

fn check_positions(
    req: &DistributionRequest,
    resp: &DistributionResponse,
    vocab_size: usize,
) -> Result<()> {
    let mut expected = req.masked_positions.clone();
    expected.sort_unstable();
    let got: Vec<usize> = resp.per_position.keys().copied().collect();
    if got != expected {
        return Err(GatewayError::Transport(format!(
            "adapter returned positions {got:?}, requested {expected:?}"
        )));
    }
    if let Some((p, v)) = resp
        .per_position
        .iter()
        .find(|(_, v)| v.len() != vocab_size)
    {
        return Err(GatewayError::Transport(format!(
            "vector at position {p} has {} entries, vocab_size is {vocab_size}",
            v.len()
        )));
    }
    Ok(())
}
