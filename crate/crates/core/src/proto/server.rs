use std::io::{Read, Write};
use std::net::{Shutdown, TcpListener, TcpStream};
use std::sync::Mutex;
use std::time::Duration;

use log::{info, warn};
use rand::rngs::OsRng;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;

use super::frame::{decode_frame, decode_sealed, encode_frame, encode_reject, encode_sealed, read_frame, MessageType, Nonce};
use super::keys::ServerKeys;
use super::replay::{Freshness, ReplayCache};
use super::{ProtoError, RejectCode, Rejection};
use crate::enc_infer::{CipherTensor, EncError, Evaluator, LaneSet, QuantizedModel, Telemetry};
use crate::she::RelinKey;

/// Largest payload the server reads: 2 GiB.
pub const DEFAULT_MAX_FRAME: usize = 1 << 31;

const DRAIN_LIMIT: u64 = 1 << 16;
const DRAIN_TIMEOUT: Duration = Duration::from_millis(200);

/// The computation the server runs on an authenticated `c_img`.
pub trait Evaluate: Send + Sync {
    /// Called once at startup.
    fn check(&self, _lanes: &LaneSet) -> Result<(), EncError> {
        Ok(())
    }

    fn evaluate(
        &self,
        lanes: &LaneSet,
        rlk: &RelinKey,
        image: &CipherTensor,
    ) -> Result<(CipherTensor, Telemetry), EncError>;
}

impl Evaluate for QuantizedModel {
    fn check(&self, lanes: &LaneSet) -> Result<(), EncError> {
        self.check_headroom(lanes.capacity_bits())
    }

    fn evaluate(
        &self,
        lanes: &LaneSet,
        rlk: &RelinKey,
        image: &CipherTensor,
    ) -> Result<(CipherTensor, Telemetry), EncError> {
        Evaluator::new(self, lanes, rlk).infer(image)
    }
}

#[derive(Debug)]
pub struct Server<E> {
    keys: ServerKeys,
    lanes: LaneSet,
    evaluator: E,
    cache: ReplayCache,
    rng: Mutex<ChaCha20Rng>,
    max_frame: usize,
}

fn reject(code: RejectCode, detail: impl Into<String>) -> Rejection {
    Rejection::new(code, detail)
}

fn nonce_prefix(n: &Nonce) -> String {
    n[..4].iter().map(|b| format!("{b:02x}")).collect()
}

fn timings(t: &Telemetry) -> String {
    t.stages
        .iter()
        .map(|r| format!("{}={:.1}ms", r.stage.label().replace(' ', "_"), r.time.as_secs_f64() * 1e3))
        .collect::<Vec<_>>()
        .join(" ")
}

impl<E: Evaluate> Server<E> {
    pub fn new(keys: ServerKeys, evaluator: E) -> Result<Self, ProtoError> {
        let lanes = keys.lane_set()?;
        evaluator.check(&lanes)?;
        Ok(Self {
            keys,
            lanes,
            evaluator,
            cache: ReplayCache::default(),
            rng: Mutex::new(ChaCha20Rng::from_rng(OsRng).expect("OS randomness")),
            max_frame: DEFAULT_MAX_FRAME,
        })
    }

    pub fn with_cache(mut self, cache: ReplayCache) -> Self {
        self.cache = cache;
        self
    }

    /// Fixes the source of `r2`.
    pub fn with_seed(self, seed: u64) -> Self {
        *self.rng.lock().unwrap_or_else(|p| p.into_inner()) = ChaCha20Rng::seed_from_u64(seed);
        self
    }

    pub fn with_max_frame(mut self, max_frame: usize) -> Self {
        self.max_frame = max_frame;
        self
    }

    pub fn lanes(&self) -> &LaneSet {
        &self.lanes
    }

    pub fn cache(&self) -> &ReplayCache {
        &self.cache
    }

    /// Verifies m1 and answers with m2.
    pub fn handle(&self, m1: &[u8]) -> Result<Vec<u8>, Rejection> {
        self.process(m1).map(|(m2, _, _)| m2).map_err(|(_, r)| r)
    }

    fn process(&self, m1: &[u8]) -> Result<(Vec<u8>, Nonce, Telemetry), (Option<Nonce>, Rejection)> {
        let (kind, payload) = decode_frame(m1).map_err(|r| (None, r))?;
        if kind != MessageType::Request {
            return Err((None, reject(RejectCode::Format, "expected a request")));
        }
        let m = decode_sealed(payload).map_err(|r| (None, r))?;
        let r1 = Some(m.nonce);
        if !self.keys.mac.verify(&[&m.nonce, m.body], &m.tag) {
            return Err((r1, reject(RejectCode::Auth, "request tag does not verify")));
        }
        match self.cache.check_and_insert(&m.nonce) {
            Freshness::Fresh => {}
            Freshness::Replayed => return Err((r1, reject(RejectCode::Freshness, "r1 seen before"))),
            Freshness::Full => return Err((r1, reject(RejectCode::Freshness, "replay cache full"))),
        }
        let c_img = CipherTensor::from_bytes(m.body, &self.lanes)
            .map_err(|e| (r1, reject(RejectCode::Format, format!("c_img: {e}"))))?;
        let (out, telemetry) = self.evaluator.evaluate(&self.lanes, &self.keys.relin, &c_img).map_err(|e| {
            let code = match e {
                EncError::Shape(_) | EncError::Format(_) => RejectCode::Format,
                _ => RejectCode::Evaluation,
            };
            (r1, reject(code, e.to_string()))
        })?;
        let c_eval = out.to_bytes(&self.lanes);
        let mut r2 = Nonce::default();
        self.rng.lock().unwrap_or_else(|p| p.into_inner()).fill_bytes(&mut r2);
        let tag = self.keys.mac.tag(&[&r2, &c_eval, m.body]);
        let m2 = encode_sealed(&r2, &c_eval, &tag)
            .and_then(|p| encode_frame(MessageType::Response, &p))
            .map_err(|r| (r1, r))?;
        Ok((m2, m.nonce, telemetry))
    }

    /// m2 or a reject frame, with one log line per request.
    pub fn respond(&self, m1: &[u8]) -> Vec<u8> {
        match self.process(m1) {
            Ok((m2, r1, telemetry)) => {
                info!("request nonce={} outcome=ok {}", nonce_prefix(&r1), timings(&telemetry));
                m2
            }
            Err((r1, rejection)) => {
                let nonce = r1.as_ref().map_or_else(|| "-".to_string(), nonce_prefix);
                info!(
                    "request nonce={nonce} outcome=reject code={} detail={:?}",
                    rejection.code, rejection.detail
                );
                encode_reject(&rejection)
            }
        }
    }

    /// One exchange on `stream`; transport errors end only this connection.
    pub fn serve_connection(&self, mut stream: TcpStream) {
        let reply = match read_frame(&mut stream, self.max_frame) {
            Ok(frame) => self.respond(&frame),
            Err(ProtoError::Local(rejection)) => {
                info!("request nonce=- outcome=reject code={} detail={:?}", rejection.code, rejection.detail);
                encode_reject(&rejection)
            }
            Err(e) => {
                warn!("connection dropped: {e}");
                return;
            }
        };
        if let Err(e) = stream.write_all(&reply).and_then(|_| stream.shutdown(Shutdown::Write)) {
            warn!("reply not delivered: {e}");
            return;
        }
        // Closing with unread input resets the connection and can destroy the
        // reply in flight, so swallow a bounded tail first.
        if stream.set_read_timeout(Some(DRAIN_TIMEOUT)).is_ok() {
            let _ = std::io::copy(&mut (&stream).take(DRAIN_LIMIT), &mut std::io::sink());
        }
    }
}

/// Accepts connections, one thread each, until `max_connections` have been accepted (forever if `None`).
pub fn serve<E: Evaluate>(
    listener: &TcpListener,
    server: &Server<E>,
    max_connections: Option<usize>,
) -> std::io::Result<()> {
    std::thread::scope(|s| {
        let mut accepted = 0;
        for stream in listener.incoming() {
            match stream {
                Ok(stream) => {
                    s.spawn(move || server.serve_connection(stream));
                    accepted += 1;
                }
                Err(e) => warn!("accept failed: {e}"),
            }
            if max_connections.is_some_and(|m| accepted >= m) {
                break;
            }
        }
    });
    Ok(())
}
