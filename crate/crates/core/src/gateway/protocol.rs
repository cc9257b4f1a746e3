//! Wire protocol between the toolkit and a model adapter.
//!
//! Each message is a frame: a 4-byte big-endian length followed by that many
//! bytes of UTF-8 JSON. Every message carries `"v": 1`, a `"request_id"` and a
//! `"type"` of `handshake`, `tokenize`, `distributions`, `decode`, `pos_tag`
//! or (responses only) `error`.
//!
//! Requests:
//!
//! ```text
//! {"v":1,"request_id":"1","type":"handshake"}
//! {"v":1,"request_id":"2","type":"tokenize","text":"a b"}
//! {"v":1,"request_id":"3","type":"distributions","token_ids":[5,9],"masked_positions":[1]}
//! {"v":1,"request_id":"4","type":"decode","token_ids":[5,9]}
//! {"v":1,"request_id":"5","type":"pos_tag","text":"the bigger the better"}
//! ```
//!
//! Responses echo `request_id` and `type`:
//!
//! ```text
//! {"v":1,"request_id":"1","type":"handshake","model_name":"mock-s7","vocab_size":64,"mask_token_id":0,"max_positions":128}
//! {"v":1,"request_id":"2","type":"tokenize","tokens":[[17,0,1],[23,2,3]]}
//! {"v":1,"request_id":"3","type":"distributions","per_position":{"1":"<base64>"}}
//! {"v":1,"request_id":"4","type":"decode","words":["day","by"]}
//! {"v":1,"request_id":"5","type":"pos_tag","tags":[["the","DT"],["bigger","JJR"]]}
//! {"v":1,"request_id":"6","type":"error","code":"length_error","message":"..."}
//! ```
//!
//! `tokens` entries are `[token_id, byte_start, byte_end]`. Log-prob vectors are
//! base64 (standard alphabet, padded) of little-endian IEEE-754 `f32`s, one per
//! vocabulary item. Tags are Penn Treebank; `JJR` and `RBR` mark comparatives.
//! `pos_tag` returns one tag per whitespace-delimited word.
//!
//! Error codes: `version_mismatch`, `encoding_error`, `length_error`,
//! `tagger_unavailable`, `bad_request`, `internal`.

use std::collections::BTreeMap;
use std::io::{self, Read, Write};

use base64::engine::general_purpose::STANDARD;
use base64::Engine;
use serde::{Deserialize, Serialize};

use super::{
    DistributionRequest, DistributionResponse, Gateway, GatewayError, ModelInfo, TaggedWord,
};
use crate::model::{TokenId, TokenOffset};

pub const PROTOCOL_VERSION: u32 = 1;

/// Upper bound on a single frame; larger length prefixes are treated as corruption.
pub const MAX_FRAME_LEN: usize = 1 << 30;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum RequestBody {
    Handshake,
    Tokenize {
        text: String,
    },
    Distributions {
        token_ids: Vec<TokenId>,
        masked_positions: Vec<usize>,
    },
    Decode {
        token_ids: Vec<TokenId>,
    },
    PosTag {
        text: String,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ResponseBody {
    Handshake {
        model_name: String,
        vocab_size: usize,
        mask_token_id: TokenId,
        max_positions: usize,
    },
    Tokenize {
        tokens: Vec<(TokenId, usize, usize)>,
    },
    Distributions {
        #[serde(deserialize_with = "position_keys")]
        per_position: BTreeMap<usize, String>,
    },
    Decode {
        words: Vec<String>,
    },
    PosTag {
        tags: Vec<(String, String)>,
    },
    Error {
        code: String,
        message: String,
    },
}

// Internally tagged enums buffer their content, which loses serde_json's
// string-to-integer map key coercion; parse the keys by hand.
fn position_keys<'de, D: serde::Deserializer<'de>>(
    d: D,
) -> Result<BTreeMap<usize, String>, D::Error> {
    BTreeMap::<String, String>::deserialize(d)?
        .into_iter()
        .map(|(k, v)| {
            k.parse()
                .map(|p| (p, v))
                .map_err(|_| serde::de::Error::custom(format!("bad position key {k:?}")))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Envelope<B> {
    pub v: u32,
    pub request_id: String,
    #[serde(flatten)]
    pub body: B,
}

impl<B> Envelope<B> {
    pub fn new(request_id: impl Into<String>, body: B) -> Self {
        Self {
            v: PROTOCOL_VERSION,
            request_id: request_id.into(),
            body,
        }
    }
}

pub type Request = Envelope<RequestBody>;
pub type Response = Envelope<ResponseBody>;

pub fn encode_log_probs(values: &[f32]) -> String {
    let mut bytes = Vec::with_capacity(values.len() * 4);
    for v in values {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    STANDARD.encode(bytes)
}

pub fn decode_log_probs(encoded: &str) -> Result<Vec<f32>, GatewayError> {
    let bytes = STANDARD
        .decode(encoded)
        .map_err(|e| GatewayError::Transport(format!("bad base64 vector: {e}")))?;
    if bytes.len() % 4 != 0 {
        return Err(GatewayError::Transport(format!(
            "vector byte length {} is not a multiple of 4",
            bytes.len()
        )));
    }
    Ok(bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect())
}

pub fn write_frame<W: Write>(w: &mut W, payload: &[u8]) -> io::Result<()> {
    let len = u32::try_from(payload.len())
        .map_err(|_| io::Error::new(io::ErrorKind::InvalidInput, "frame too large"))?;
    w.write_all(&len.to_be_bytes())?;
    w.write_all(payload)
}

/// Reads one frame; `Ok(None)` on clean EOF before a length prefix.
pub fn read_frame<R: Read>(r: &mut R) -> io::Result<Option<Vec<u8>>> {
    let mut len = [0u8; 4];
    let mut filled = 0;
    while filled < 4 {
        let n = r.read(&mut len[filled..])?;
        if n == 0 {
            if filled == 0 {
                return Ok(None);
            }
            return Err(io::Error::new(
                io::ErrorKind::UnexpectedEof,
                "truncated frame header",
            ));
        }
        filled += n;
    }
    let len = u32::from_be_bytes(len) as usize;
    if len > MAX_FRAME_LEN {
        return Err(io::Error::new(
            io::ErrorKind::InvalidData,
            format!("frame length {len} exceeds limit"),
        ));
    }
    let mut buf = vec![0u8; len];
    r.read_exact(&mut buf)?;
    Ok(Some(buf))
}

pub fn write_message<W: Write, T: Serialize>(w: &mut W, msg: &T) -> io::Result<()> {
    let bytes = serde_json::to_vec(msg).map_err(io::Error::other)?;
    write_frame(w, &bytes)
}

pub fn error_code(err: &GatewayError) -> &'static str {
    match err {
        GatewayError::VersionMismatch { .. } => "version_mismatch",
        GatewayError::Encoding(_) => "encoding_error",
        GatewayError::Length { .. } => "length_error",
        GatewayError::TaggerUnavailable => "tagger_unavailable",
        GatewayError::BadRequest(_) => "bad_request",
        _ => "internal",
    }
}

/// Maps an error message received from an adapter back to a typed error.
pub fn error_from_wire(code: &str, message: &str) -> GatewayError {
    match code {
        "encoding_error" => GatewayError::Encoding(message.to_string()),
        "length_error" => {
            let (len, max) = parse_length_message(message).unwrap_or((0, 0));
            GatewayError::Length { len, max }
        }
        "tagger_unavailable" => GatewayError::TaggerUnavailable,
        "bad_request" => GatewayError::BadRequest(message.to_string()),
        "version_mismatch" => GatewayError::Transport(format!("version mismatch: {message}")),
        _ => GatewayError::Remote {
            code: code.to_string(),
            message: message.to_string(),
        },
    }
}

fn parse_length_message(message: &str) -> Option<(usize, usize)> {
    let nums: Vec<usize> = message
        .split(|c: char| !c.is_ascii_digit())
        .filter_map(|s| s.parse().ok())
        .collect();
    match nums.as_slice() {
        [len, max, ..] => Some((*len, *max)),
        _ => None,
    }
}

/// Answers one request against an in-process gateway.
pub fn handle_request<G: Gateway + ?Sized>(gw: &G, req: Request) -> Response {
    let id = req.request_id.clone();
    if req.v != PROTOCOL_VERSION {
        let err = GatewayError::VersionMismatch {
            expected: PROTOCOL_VERSION,
            got: req.v,
        };
        return error_response(id, &err);
    }
    let body = match req.body {
        RequestBody::Handshake => gw.handshake().map(|info| ResponseBody::Handshake {
            model_name: info.model_name,
            vocab_size: info.vocab_size,
            mask_token_id: info.mask_token_id,
            max_positions: info.max_positions,
        }),
        RequestBody::Tokenize { text } => gw.tokenize(&text).map(|tokens| ResponseBody::Tokenize {
            tokens: tokens.iter().map(|t| (t.id, t.start, t.end)).collect(),
        }),
        RequestBody::Distributions {
            token_ids,
            masked_positions,
        } => {
            let dreq = DistributionRequest::new(id.clone(), token_ids, masked_positions);
            gw.distributions(&dreq)
                .map(|resp| ResponseBody::Distributions {
                    per_position: resp
                        .per_position
                        .iter()
                        .map(|(&p, v)| (p, encode_log_probs(v)))
                        .collect(),
                })
        }
        RequestBody::Decode { token_ids } => gw
            .decode(&token_ids)
            .map(|words| ResponseBody::Decode { words }),
        RequestBody::PosTag { text } => gw.pos_tag(&text).map(|tags| ResponseBody::PosTag {
            tags: tags.into_iter().map(|t| (t.word, t.tag)).collect(),
        }),
    };
    match body {
        Ok(body) => Envelope::new(id, body),
        Err(err) => error_response(id, &err),
    }
}

fn error_response(id: String, err: &GatewayError) -> Response {
    Envelope::new(
        id,
        ResponseBody::Error {
            code: error_code(err).to_string(),
            message: err.to_string(),
        },
    )
}

/// Serves the protocol for `gw` until the reader reaches EOF.
///
/// Malformed frames produce an `error` response with an empty request id;
/// the loop only stops on EOF or an I/O failure.
pub fn serve<G, R, W>(gw: &G, mut reader: R, mut writer: W) -> io::Result<()>
where
    G: Gateway + ?Sized,
    R: Read,
    W: Write,
{
    while let Some(frame) = read_frame(&mut reader)? {
        let response = match serde_json::from_slice::<Request>(&frame) {
            Ok(req) => handle_request(gw, req),
            Err(e) => {
                let id = serde_json::from_slice::<serde_json::Value>(&frame)
                    .ok()
                    .and_then(|v| v.get("request_id")?.as_str().map(String::from))
                    .unwrap_or_default();
                error_response(id, &GatewayError::BadRequest(e.to_string()))
            }
        };
        write_message(&mut writer, &response)?;
        writer.flush()?;
    }
    Ok(())
}

pub(crate) fn response_into_info(body: ResponseBody) -> Result<ModelInfo, GatewayError> {
    match body {
        ResponseBody::Handshake {
            model_name,
            vocab_size,
            mask_token_id,
            max_positions,
        } => Ok(ModelInfo {
            model_name,
            vocab_size,
            mask_token_id,
            max_positions,
        }),
        other => Err(unexpected("handshake", &other)),
    }
}

pub(crate) fn response_into_tokens(body: ResponseBody) -> Result<Vec<TokenOffset>, GatewayError> {
    match body {
        ResponseBody::Tokenize { tokens } => Ok(tokens
            .into_iter()
            .map(|(id, s, e)| TokenOffset::new(id, s, e))
            .collect()),
        other => Err(unexpected("tokenize", &other)),
    }
}

pub(crate) fn response_into_distributions(
    request_id: &str,
    body: ResponseBody,
) -> Result<DistributionResponse, GatewayError> {
    match body {
        ResponseBody::Distributions { per_position } => {
            let mut out = BTreeMap::new();
            for (p, enc) in per_position {
                out.insert(p, decode_log_probs(&enc)?);
            }
            Ok(DistributionResponse {
                request_id: request_id.to_string(),
                per_position: out,
            })
        }
        other => Err(unexpected("distributions", &other)),
    }
}

pub(crate) fn response_into_words(body: ResponseBody) -> Result<Vec<String>, GatewayError> {
    match body {
        ResponseBody::Decode { words } => Ok(words),
        other => Err(unexpected("decode", &other)),
    }
}

pub(crate) fn response_into_tags(body: ResponseBody) -> Result<Vec<TaggedWord>, GatewayError> {
    match body {
        ResponseBody::PosTag { tags } => Ok(tags
            .into_iter()
            .map(|(word, tag)| TaggedWord { word, tag })
            .collect()),
        other => Err(unexpected("pos_tag", &other)),
    }
}

fn unexpected(expected: &str, got: &ResponseBody) -> GatewayError {
    if let ResponseBody::Error { code, message } = got {
        return error_from_wire(code, message);
    }
    GatewayError::Transport(format!("expected {expected} response, got {got:?}"))
}
