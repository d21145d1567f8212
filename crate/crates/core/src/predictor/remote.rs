//! Client side of the predictor protocol.
//!
//! Endpoints are `tcp://host:port` or `stdio:<program> [args...]`; the
//! latter spawns the program and talks over its stdin/stdout. Replies are
//! read on a background thread so every request can time out.
//! Tokens in replies are interned into a handle-local table seeded with the
//! caller's vocabulary, so ids stay stable for the life of the handle.

use std::collections::HashMap;
use std::fmt;
use std::io::{BufRead, BufReader, Write};
use std::net::TcpStream;
use std::process::{Child, Command, Stdio};
use std::str::FromStr;
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::sync::{Mutex, RwLock};
use std::time::Duration;

use super::protocol::{Message, Ranked, MASK_MARKER, PROTOCOL_VERSION};
use super::{check_masked, CausalPredictor, Distribution, MaskedPredictor, Mode, PredictError};
use crate::tokenizer::{TokenId, Vocab};

pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(30);

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Endpoint {
    Tcp(String),
    Stdio(Vec<String>),
}

impl FromStr for Endpoint {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if let Some(addr) = s.strip_prefix("tcp://") {
            if addr.is_empty() {
                return Err("empty tcp address".into());
            }
            return Ok(Endpoint::Tcp(addr.to_string()));
        }
        if let Some(cmd) = s.strip_prefix("stdio:") {
            let argv: Vec<String> = cmd.split_whitespace().map(str::to_string).collect();
            if argv.is_empty() {
                return Err("empty stdio command".into());
            }
            return Ok(Endpoint::Stdio(argv));
        }
        Err(format!("endpoint '{s}' must start with tcp:// or stdio:"))
    }
}

impl fmt::Display for Endpoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Endpoint::Tcp(a) => write!(f, "tcp://{a}"),
            Endpoint::Stdio(argv) => write!(f, "stdio:{}", argv.join(" ")),
        }
    }
}

struct Connection {
    writer: Box<dyn Write + Send>,
    lines: Receiver<std::io::Result<String>>,
    next_id: u64,
    child: Option<Child>,
}

impl Drop for Connection {
    fn drop(&mut self) {
        if let Some(child) = &mut self.child {
            let _ = child.kill();
            let _ = child.wait();
        }
    }
}

impl Connection {
    fn open(endpoint: &Endpoint) -> Result<Self, PredictError> {
        let (tx, rx) = mpsc::channel();
        let spawn_reader = |reader: Box<dyn std::io::Read + Send>| {
            std::thread::spawn(move || {
                for line in BufReader::new(reader).lines() {
                    if tx.send(line).is_err() {
                        break;
                    }
                }
            });
        };
        match endpoint {
            Endpoint::Tcp(addr) => {
                let stream = TcpStream::connect(addr)?;
                stream.set_nodelay(true)?;
                spawn_reader(Box::new(stream.try_clone()?));
                Ok(Connection {
                    writer: Box::new(stream),
                    lines: rx,
                    next_id: 1,
                    child: None,
                })
            }
            Endpoint::Stdio(argv) => {
                let mut child = Command::new(&argv[0])
                    .args(&argv[1..])
                    .stdin(Stdio::piped())
                    .stdout(Stdio::piped())
                    .stderr(Stdio::inherit())
                    .spawn()?;
                let stdout = child.stdout.take().expect("piped stdout");
                let stdin = child.stdin.take().expect("piped stdin");
                spawn_reader(Box::new(stdout));
                Ok(Connection {
                    writer: Box::new(stdin),
                    lines: rx,
                    next_id: 1,
                    child: Some(child),
                })
            }
        }
    }

    fn exchange(&mut self, msg: &Message, timeout: Duration) -> Result<Message, PredictError> {
        self.writer.write_all(msg.to_line().as_bytes())?;
        self.writer.flush()?;
        let line = match self.lines.recv_timeout(timeout) {
            Ok(line) => line?,
            Err(RecvTimeoutError::Timeout) => return Err(PredictError::Timeout(timeout)),
            Err(RecvTimeoutError::Disconnected) => {
                return Err(PredictError::Protocol("connection closed by server".into()))
            }
        };
        serde_json::from_str(&line)
            .map_err(|e| PredictError::Protocol(format!("malformed reply: {e}")))
    }
}

#[derive(Debug)]
struct Symbols {
    surfaces: Vec<String>,
    index: HashMap<String, TokenId>,
}

impl Symbols {
    fn from_vocab(vocab: &Vocab) -> Self {
        let surfaces: Vec<String> = (0..vocab.len() as TokenId)
            .map(|id| vocab.surface(id).expect("dense ids").to_string())
            .collect();
        let index = surfaces
            .iter()
            .enumerate()
            .map(|(i, s)| (s.clone(), i as TokenId))
            .collect();
        Symbols { surfaces, index }
    }
}

/// Predictor handle backed by a protocol server.
pub struct RemotePredictor {
    endpoint: Endpoint,
    mode: Mode,
    timeout: Duration,
    conn: Mutex<Connection>,
    symbols: RwLock<Symbols>,
}

impl fmt::Debug for RemotePredictor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("RemotePredictor")
            .field("endpoint", &self.endpoint)
            .field("mode", &self.mode)
            .finish()
    }
}

/// Connects and performs the handshake.
pub fn remote_predictor(endpoint: &Endpoint, mode: Mode) -> Result<RemotePredictor, PredictError> {
    RemotePredictor::connect(endpoint, mode, &Vocab::default(), DEFAULT_TIMEOUT)
}

impl RemotePredictor {
    pub fn connect(
        endpoint: &Endpoint,
        mode: Mode,
        vocab: &Vocab,
        timeout: Duration,
    ) -> Result<Self, PredictError> {
        let mut conn = Connection::open(endpoint)?;
        let reply = conn.exchange(
            &Message::Hello {
                proto: PROTOCOL_VERSION,
                mode,
            },
            timeout,
        )?;
        match reply {
            Message::HelloOk { proto } if proto == PROTOCOL_VERSION => {}
            Message::HelloOk { proto } => {
                return Err(PredictError::Version {
                    expected: PROTOCOL_VERSION,
                    got: proto,
                })
            }
            Message::Error { message, .. } => return Err(PredictError::Remote(message)),
            other => {
                return Err(PredictError::Protocol(format!(
                    "expected hello_ok, got {other:?}"
                )))
            }
        }
        Ok(RemotePredictor {
            endpoint: endpoint.clone(),
            mode,
            timeout,
            conn: Mutex::new(conn),
            symbols: RwLock::new(Symbols::from_vocab(vocab)),
        })
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    fn request(&self, build: impl FnOnce(u64) -> Message) -> Result<Message, PredictError> {
        let mut conn = self.conn.lock().expect("connection lock poisoned");
        let id = conn.next_id;
        conn.next_id += 1;
        let reply = conn.exchange(&build(id), self.timeout)?;
        match &reply {
            Message::Predictions { id: got, .. } if *got == id => Ok(reply),
            Message::Predictions { id: got, .. } => Err(PredictError::Protocol(format!(
                "reply id {got} does not match request id {id}"
            ))),
            Message::Error { message, .. } => Err(PredictError::Remote(message.clone())),
            other => Err(PredictError::Protocol(format!(
                "unexpected reply {other:?}"
            ))),
        }
    }

    fn intern(&self, ranked: Ranked, position: usize) -> Result<Distribution, PredictError> {
        let mut entries = Vec::with_capacity(ranked.len());
        {
            let mut symbols = self.symbols.write().expect("symbol lock poisoned");
            for (token, p) in ranked {
                let id = match symbols.index.get(&token) {
                    Some(&id) => id,
                    None => {
                        let id = symbols.surfaces.len() as TokenId;
                        symbols.surfaces.push(token.clone());
                        symbols.index.insert(token, id);
                        id
                    }
                };
                entries.push((id, p));
            }
        }
        Distribution::new(entries, position)
            .map_err(|e| PredictError::Protocol(format!("invalid distribution: {e}")))
    }

    fn require(&self, mode: Mode) -> Result<(), PredictError> {
        if self.mode != mode {
            return Err(PredictError::Protocol(format!(
                "handle was opened in {} mode",
                self.mode
            )));
        }
        Ok(())
    }

    fn surface_of(&self, id: TokenId) -> Option<String> {
        self.symbols
            .read()
            .expect("symbol lock poisoned")
            .surfaces
            .get(id as usize)
            .cloned()
    }
}

impl MaskedPredictor for RemotePredictor {
    fn predictor_id(&self) -> String {
        format!("remote:{}", self.endpoint)
    }

    fn surface(&self, id: TokenId) -> Option<String> {
        self.surface_of(id)
    }

    fn predict_masked(
        &self,
        slots: &[Option<&str>],
        position: usize,
        top_k: usize,
    ) -> Result<Distribution, PredictError> {
        let mut d = self.predict_masked_many(slots, &[position], top_k)?;
        Ok(d.remove(0))
    }

    fn predict_masked_many(
        &self,
        slots: &[Option<&str>],
        positions: &[usize],
        top_k: usize,
    ) -> Result<Vec<Distribution>, PredictError> {
        self.require(Mode::Mlm)?;
        for &p in positions {
            check_masked(slots, p)?;
        }
        let tokens: Vec<String> = slots
            .iter()
            .map(|s| s.unwrap_or(MASK_MARKER).to_string())
            .collect();
        let reply = self.request(|id| Message::PredictMasked {
            id,
            tokens,
            positions: positions.to_vec(),
            top_k,
        })?;
        let Message::Predictions {
            at: Some(mut at), ..
        } = reply
        else {
            return Err(PredictError::Protocol("reply lacks \"at\"".into()));
        };
        positions
            .iter()
            .map(|&p| {
                let ranked = at
                    .remove(&p.to_string())
                    .ok_or_else(|| PredictError::Protocol(format!("reply lacks position {p}")))?;
                self.intern(ranked, p)
            })
            .collect()
    }
}

impl CausalPredictor for RemotePredictor {
    fn predictor_id(&self) -> String {
        format!("remote:{}", self.endpoint)
    }

    fn surface(&self, id: TokenId) -> Option<String> {
        self.surface_of(id)
    }

    fn predict_next(
        &self,
        prefix: &[&str],
        context: &[&str],
        top_k: usize,
    ) -> Result<Distribution, PredictError> {
        self.require(Mode::Clm)?;
        let reply = self.request(|id| Message::PredictNext {
            id,
            prefix: prefix.iter().map(|s| s.to_string()).collect(),
            context: context.iter().map(|s| s.to_string()).collect(),
            top_k,
        })?;
        let Message::Predictions {
            next: Some(next), ..
        } = reply
        else {
            return Err(PredictError::Protocol("reply lacks \"next\"".into()));
        };
        self.intern(next, prefix.len())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn endpoint_grammar() {
        assert_eq!(
            "tcp://127.0.0.1:9".parse::<Endpoint>().unwrap(),
            Endpoint::Tcp("127.0.0.1:9".into())
        );
        assert_eq!(
            "stdio:python3 adapter.py --stub"
                .parse::<Endpoint>()
                .unwrap(),
            Endpoint::Stdio(vec!["python3".into(), "adapter.py".into(), "--stub".into()])
        );
        assert!("http://x".parse::<Endpoint>().is_err());
        assert!("stdio:".parse::<Endpoint>().is_err());
    }
}
