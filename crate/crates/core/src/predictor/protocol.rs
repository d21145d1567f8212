//! Newline-delimited JSON protocol for out-of-process predictors.
//!
//! ```text
//! → {"op":"hello","proto":1,"mode":"mlm"}
//! ← {"op":"hello_ok","proto":1}
//! → {"op":"predict_masked","id":1,"tokens":["the","[MASK]"],"positions":[1],"top_k":5}
//! ← {"op":"predictions","id":1,"at":{"1":[["cat",0.4],["dog",0.3]]}}
//! → {"op":"predict_next","id":2,"prefix":["the"],"context":["cat"],"top_k":5}
//! ← {"op":"predictions","id":2,"next":[["cat",0.5],["[EOS]",0.1]]}
//! ← {"op":"error","id":2,"message":"..."}
//! ```
//!
//! One request is in flight per connection. Token lists longer than
//! [`MAX_LEN`] are rejected.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use super::{CausalPredictor, MaskedPredictor, Mode};
use crate::tokenizer::{MAX_LEN, SPECIAL_SURFACES};

pub const PROTOCOL_VERSION: u32 = 1;

pub const MASK_MARKER: &str = SPECIAL_SURFACES[0];
pub const EOS_MARKER: &str = SPECIAL_SURFACES[3];

pub type Ranked = Vec<(String, f64)>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum Message {
    Hello {
        proto: u32,
        mode: Mode,
    },
    HelloOk {
        proto: u32,
    },
    PredictMasked {
        id: u64,
        tokens: Vec<String>,
        positions: Vec<usize>,
        top_k: usize,
    },
    PredictNext {
        id: u64,
        prefix: Vec<String>,
        context: Vec<String>,
        top_k: usize,
    },
    Predictions {
        id: u64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        at: Option<BTreeMap<String, Ranked>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        next: Option<Ranked>,
    },
    Error {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        id: Option<u64>,
        message: String,
    },
}

impl Message {
    pub fn to_line(&self) -> String {
        let mut s = serde_json::to_string(self).expect("messages serialize");
        s.push('\n');
        s
    }
}

/// A local predictor exposed over the protocol.
#[derive(Clone, Copy)]
pub enum Backend<'a> {
    Masked(&'a dyn MaskedPredictor),
    Causal(&'a dyn CausalPredictor),
}

impl Backend<'_> {
    fn mode(&self) -> Mode {
        match self {
            Backend::Masked(_) => Mode::Mlm,
            Backend::Causal(_) => Mode::Clm,
        }
    }
}

fn error(id: Option<u64>, message: impl Into<String>) -> Message {
    Message::Error {
        id,
        message: message.into(),
    }
}

/// Answers one request line. Exposed for in-process testing.
pub fn handle_line(line: &str, backend: Backend<'_>, greeted: &mut bool) -> Message {
    let msg: Message = match serde_json::from_str(line) {
        Ok(m) => m,
        Err(e) => return error(None, format!("malformed request: {e}")),
    };
    match msg {
        Message::Hello { proto, mode } => {
            if proto != PROTOCOL_VERSION {
                return error(
                    None,
                    format!(
                        "unsupported protocol version {proto}, server speaks {PROTOCOL_VERSION}"
                    ),
                );
            }
            if mode != backend.mode() {
                return error(
                    None,
                    format!(
                        "server is in {} mode, client asked for {mode}",
                        backend.mode()
                    ),
                );
            }
            *greeted = true;
            Message::HelloOk {
                proto: PROTOCOL_VERSION,
            }
        }
        _ if !*greeted => error(None, "handshake required before requests"),
        Message::PredictMasked {
            id,
            tokens,
            positions,
            top_k,
        } => {
            let Backend::Masked(model) = backend else {
                return error(Some(id), "predict_masked sent to a clm server");
            };
            if tokens.len() > MAX_LEN {
                return error(
                    Some(id),
                    format!(
                        "sequence of {} tokens exceeds the maximum of {MAX_LEN}",
                        tokens.len()
                    ),
                );
            }
            let slots: Vec<Option<&str>> = tokens
                .iter()
                .map(|t| {
                    if t == MASK_MARKER {
                        None
                    } else {
                        Some(t.as_str())
                    }
                })
                .collect();
            match model.predict_masked_many(&slots, &positions, top_k.max(1)) {
                Ok(dists) => {
                    let mut at = BTreeMap::new();
                    for d in dists {
                        let ranked = d
                            .entries()
                            .iter()
                            .map(|&(tok, p)| (model.surface(tok).unwrap_or_default(), p))
                            .collect();
                        at.insert(d.position().to_string(), ranked);
                    }
                    Message::Predictions {
                        id,
                        at: Some(at),
                        next: None,
                    }
                }
                Err(e) => error(Some(id), e.to_string()),
            }
        }
        Message::PredictNext {
            id,
            prefix,
            context,
            top_k,
        } => {
            let Backend::Causal(model) = backend else {
                return error(Some(id), "predict_next sent to an mlm server");
            };
            if prefix.len() + context.len() > MAX_LEN {
                return error(
                    Some(id),
                    format!(
                        "prefix and context of {} tokens exceed the maximum of {MAX_LEN}",
                        prefix.len() + context.len()
                    ),
                );
            }
            let prefix: Vec<&str> = prefix.iter().map(String::as_str).collect();
            let context: Vec<&str> = context.iter().map(String::as_str).collect();
            match model.predict_next(&prefix, &context, top_k.max(1)) {
                Ok(d) => Message::Predictions {
                    id,
                    at: None,
                    next: Some(
                        d.entries()
                            .iter()
                            .map(|&(tok, p)| (model.surface(tok).unwrap_or_default(), p))
                            .collect(),
                    ),
                },
                Err(e) => error(Some(id), e.to_string()),
            }
        }
        Message::HelloOk { .. } | Message::Predictions { .. } | Message::Error { .. } => {
            error(None, "unexpected message from client")
        }
    }
}

/// Serves one connection until the reader hits end of input.
pub fn serve<R: BufRead, W: Write>(
    reader: R,
    mut writer: W,
    backend: Backend<'_>,
) -> std::io::Result<()> {
    let mut greeted = false;
    for line in reader.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let reply = handle_line(&line, backend, &mut greeted);
        writer.write_all(reply.to_line().as_bytes())?;
        writer.flush()?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wire_shapes() {
        let hello = Message::Hello {
            proto: 1,
            mode: Mode::Mlm,
        };
        assert_eq!(
            serde_json::to_string(&hello).unwrap(),
            r#"{"op":"hello","proto":1,"mode":"mlm"}"#
        );
        let reply: Message =
            serde_json::from_str(r#"{"op":"predictions","id":3,"at":{"1":[["cat",0.5]]}}"#)
                .unwrap();
        assert_eq!(
            reply,
            Message::Predictions {
                id: 3,
                at: Some(BTreeMap::from([(
                    "1".to_string(),
                    vec![("cat".to_string(), 0.5)]
                )])),
                next: None
            }
        );
        let next: Message =
            serde_json::from_str(r#"{"op":"predictions","id":4,"next":[["a",0.1]]}"#).unwrap();
        assert!(matches!(next, Message::Predictions { next: Some(_), .. }));
        assert_eq!(
            Message::HelloOk { proto: 1 }.to_line(),
            "{\"op\":\"hello_ok\",\"proto\":1}\n"
        );
    }
}
