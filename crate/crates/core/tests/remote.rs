//! The remote predictor against stub servers.

mod support;

use std::io::{BufRead, BufReader, Write};
use std::net::TcpListener;
use std::time::Duration;

use infill_core::corruption::MaskedSequence;
use infill_core::decoder::{infill, DecodePolicy};
use infill_core::predictor::protocol::{serve, Backend};
use infill_core::predictor::{
    CausalPredictor, Distribution, Endpoint, MaskedPredictor, Mode, PredictError, RemotePredictor,
};
use infill_core::tokenizer::{tokenize, TokenId, Vocab};
use support::*;

const SHORT: Duration = Duration::from_millis(300);

/// Equal mass on every word it knows.
struct Uniform(Vec<String>);

impl MaskedPredictor for Uniform {
    fn predictor_id(&self) -> String {
        "uniform".into()
    }

    fn surface(&self, id: TokenId) -> Option<String> {
        self.0.get(id as usize).cloned()
    }

    fn predict_masked(
        &self,
        _: &[Option<&str>],
        position: usize,
        _: usize,
    ) -> Result<Distribution, PredictError> {
        let p = 1.0 / self.0.len() as f64;
        Ok(Distribution::new(
            (0..self.0.len() as TokenId).map(|i| (i, p)).collect(),
            position,
        )?)
    }
}

/// Serves `backend` on a fresh local port for one connection.
fn spawn_server(backend: impl FnOnce() -> Box<dyn MaskedPredictor> + Send + 'static) -> Endpoint {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap();
    std::thread::spawn(move || {
        let model = backend();
        let (stream, _) = listener.accept().unwrap();
        let reader = BufReader::new(stream.try_clone().unwrap());
        let _ = serve(reader, stream, Backend::Masked(model.as_ref()));
    });
    Endpoint::Tcp(addr.to_string())
}

/// Answers the handshake, then replies to each request with `reply(id)`,
/// or stays silent when it returns `None`.
fn spawn_raw(reply: fn(u64) -> Option<String>) -> Endpoint {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap();
    std::thread::spawn(move || {
        let (stream, _) = listener.accept().unwrap();
        let mut out = stream.try_clone().unwrap();
        for line in BufReader::new(stream).lines() {
            let line = line.unwrap();
            let v: serde_json::Value = serde_json::from_str(&line).unwrap();
            let text = if v["op"] == "hello" {
                Some(r#"{"op":"hello_ok","proto":1}"#.to_string())
            } else {
                reply(v["id"].as_u64().unwrap())
            };
            match text {
                Some(t) => writeln!(out, "{t}").unwrap(),
                None => std::thread::sleep(Duration::from_secs(2)),
            }
        }
    });
    Endpoint::Tcp(addr.to_string())
}

fn connect(endpoint: &Endpoint, mode: Mode) -> Result<RemotePredictor, PredictError> {
    RemotePredictor::connect(endpoint, mode, &Vocab::default(), SHORT)
}

#[test]
fn uniform_stub_gives_equal_entries() {
    let words: Vec<String> = ["red", "green", "blue", "grey"].map(String::from).to_vec();
    let w = words.clone();
    let endpoint = spawn_server(move || Box::new(Uniform(w)));
    let remote = connect(&endpoint, Mode::Mlm).unwrap();
    let d = remote.predict_masked(&[Some("a"), None], 1, 10).unwrap();
    assert_eq!(d.entries().len(), words.len());
    assert!(d.entries().iter().all(|e| (e.1 - 0.25).abs() < 1e-12));
    let got: Vec<String> = d
        .entries()
        .iter()
        .map(|e| MaskedPredictor::surface(&remote, e.0).unwrap())
        .collect();
    let mut sorted = got.clone();
    sorted.sort();
    let mut expected = words.clone();
    expected.sort();
    assert_eq!(sorted, expected);
    assert!(MaskedPredictor::predictor_id(&remote).starts_with("remote:tcp://127.0.0.1:"));
}

#[test]
fn unsorted_reply_is_reordered() {
    let endpoint = spawn_raw(|id| {
        Some(format!(
            r#"{{"op":"predictions","id":{id},"at":{{"0":[["low",0.1],["high",0.6],["mid",0.3]]}}}}"#
        ))
    });
    let remote = connect(&endpoint, Mode::Mlm).unwrap();
    let d = remote.predict_masked(&[None], 0, 3).unwrap();
    let order: Vec<String> = d
        .entries()
        .iter()
        .map(|e| MaskedPredictor::surface(&remote, e.0).unwrap())
        .collect();
    assert_eq!(order, ["high", "mid", "low"]);
}

#[test]
fn negative_probability_is_a_protocol_error() {
    let endpoint = spawn_raw(|id| {
        Some(format!(
            r#"{{"op":"predictions","id":{id},"next":[["a",0.7],["b",-0.2]]}}"#
        ))
    });
    let remote = connect(&endpoint, Mode::Clm).unwrap();
    let err = remote.predict_next(&[], &[], 2).unwrap_err();
    assert!(
        matches!(err, PredictError::Protocol(ref m) if m.contains("negative")),
        "{err}"
    );
}

#[test]
fn malformed_reply_is_a_protocol_error() {
    let endpoint = spawn_raw(|_| Some("not json".into()));
    let remote = connect(&endpoint, Mode::Clm).unwrap();
    assert!(matches!(
        remote.predict_next(&[], &[], 2),
        Err(PredictError::Protocol(_))
    ));
}

#[test]
fn silent_server_times_out() {
    let endpoint = spawn_raw(|_| None);
    let remote = connect(&endpoint, Mode::Mlm).unwrap();
    let err = remote.predict_masked(&[None], 0, 1).unwrap_err();
    assert!(matches!(err, PredictError::Timeout(_)), "{err}");
    // The decoder surfaces the failure instead of inventing a token.
    let seq = tokenize("the cat", None).unwrap();
    let masked = MaskedSequence::from_positions(&seq, &[1]).unwrap();
    let err = infill(&masked, &remote, &DecodePolicy::default()).unwrap_err();
    assert!(err.partial.steps.is_empty());
}

#[test]
fn overlong_request_is_refused_citing_the_limit() {
    let endpoint = spawn_server(|| Box::new(Uniform(vec!["x".into()])));
    let remote = connect(&endpoint, Mode::Mlm).unwrap();
    let slots: Vec<Option<&str>> = (0..600)
        .map(|i| if i == 3 { None } else { Some("w") })
        .collect();
    match remote.predict_masked(&slots, 3, 1) {
        Err(PredictError::Remote(m)) => assert!(m.contains("512"), "{m}"),
        other => panic!("expected a server error, got {other:?}"),
    }
}

#[test]
fn handshake_checks_version_and_mode() {
    // A server speaking a newer protocol, over a pipe.
    let script = r#"read line; echo '{"op":"hello_ok","proto":2}'"#;
    let endpoint = Endpoint::Stdio(vec!["sh".into(), "-c".into(), script.into()]);
    match connect(&endpoint, Mode::Mlm) {
        Err(PredictError::Version {
            expected: 1,
            got: 2,
        }) => {}
        Err(e) => panic!("wrong error {e}"),
        Ok(_) => panic!("mismatch accepted"),
    }

    let endpoint = spawn_server(|| Box::new(Uniform(vec!["x".into()])));
    assert!(matches!(
        connect(&endpoint, Mode::Clm),
        Err(PredictError::Remote(_))
    ));
}

#[test]
fn unreachable_endpoint_fails_cleanly() {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap();
    drop(listener);
    let endpoint = Endpoint::Tcp(addr.to_string());
    assert!(matches!(
        connect(&endpoint, Mode::Mlm),
        Err(PredictError::Io(_))
    ));
}

#[test]
fn remote_infill_matches_local_infill() {
    let target = ["the", "quick", "brown", "fox", "jumps"];
    let conf = [0.9, 0.5, 0.6, 0.7, 0.8];
    let endpoint = spawn_server(move || Box::new(ScriptedMasked::new(&target, &conf)));
    let remote = connect(&endpoint, Mode::Mlm).unwrap();
    let local = ScriptedMasked::new(&target, &conf);
    let seq = tokenize("the quick brown fox jumps", None).unwrap();
    let masked = MaskedSequence::from_positions(&seq, &[1, 2, 4]).unwrap();
    let a = infill(&masked, &remote, &DecodePolicy::default()).unwrap();
    let b = infill(&masked, &local, &DecodePolicy::default()).unwrap();
    assert_eq!(a.output, b.output);
    assert_eq!(a.steps, b.steps);
}
