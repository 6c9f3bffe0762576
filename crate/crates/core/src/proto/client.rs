use std::collections::VecDeque;
use std::io::Write;
use std::net::{Shutdown, TcpStream, ToSocketAddrs};
use std::sync::{Arc, Mutex};

use rand::{CryptoRng, RngCore};
use sha2::{Digest, Sha256};

use super::frame::{decode_frame, decode_reject, decode_sealed, encode_frame, encode_sealed, read_frame, MessageType, Nonce};
use super::keys::SessionKeys;
use super::replay::{Freshness, ReplayCache};
use super::{ProtoError, RejectCode, Rejection};
use crate::enc_infer::{decrypt_result, encrypt_image, CipherTensor, Decoded, LaneSet};
use crate::nn::Tensor;

/// Requests kept to tell a misbound response from a forged one.
const RECENT_REQUESTS: usize = 4;

/// What the client keeps between sending m1 and receiving m2.
#[derive(Debug, Clone)]
pub struct PendingRequest {
    pub r1: Nonce,
    pub c_img: Arc<[u8]>,
    /// SHA-256 of `c_img`.
    pub digest: [u8; 32],
}

#[derive(Debug)]
pub struct Client {
    keys: SessionKeys,
    lanes: LaneSet,
    input_scale: i32,
    seen: ReplayCache,
    recent: Mutex<VecDeque<Arc<[u8]>>>,
}

fn local(code: RejectCode, detail: impl Into<String>) -> ProtoError {
    ProtoError::Local(Rejection::new(code, detail))
}

impl Client {
    pub fn new(keys: SessionKeys, input_scale: i32) -> Result<Self, ProtoError> {
        let lanes = keys.lane_set()?;
        Ok(Self {
            keys,
            lanes,
            input_scale,
            seen: ReplayCache::default(),
            recent: Mutex::new(VecDeque::new()),
        })
    }

    pub fn keys(&self) -> &SessionKeys {
        &self.keys
    }

    pub fn lanes(&self) -> &LaneSet {
        &self.lanes
    }

    /// Encrypts `image` and builds m1.
    pub fn request<R: RngCore + CryptoRng>(
        &self,
        image: &Tensor,
        rng: &mut R,
    ) -> Result<(Vec<u8>, PendingRequest), ProtoError> {
        let mut r1 = Nonce::default();
        rng.fill_bytes(&mut r1);
        let ct = encrypt_image(&self.lanes, &self.keys.keys.public, image, self.input_scale, rng)?;
        let c_img: Arc<[u8]> = ct.to_bytes(&self.lanes).into();
        let tag = self.keys.mac.tag(&[&r1, &c_img]);
        let m1 = encode_frame(MessageType::Request, &encode_sealed(&r1, &c_img, &tag).map_err(ProtoError::Local)?)
            .map_err(ProtoError::Local)?;
        let mut recent = self.recent.lock().unwrap_or_else(|p| p.into_inner());
        recent.push_back(c_img.clone());
        if recent.len() > RECENT_REQUESTS {
            recent.pop_front();
        }
        let digest = Sha256::digest(&c_img).into();
        Ok((m1, PendingRequest { r1, c_img, digest }))
    }

    /// Verifies m2 against `pending`, then decrypts the logits.
    pub fn finish(&self, m2: &[u8], pending: &PendingRequest) -> Result<Decoded, ProtoError> {
        let (kind, payload) = decode_frame(m2).map_err(ProtoError::Local)?;
        match kind {
            MessageType::Response => {}
            MessageType::Reject => return Err(ProtoError::Remote(decode_reject(payload).map_err(ProtoError::Local)?)),
            MessageType::Request => return Err(local(RejectCode::Format, "expected a response, got a request")),
        }
        let m = decode_sealed(payload).map_err(ProtoError::Local)?;
        if !self.keys.mac.verify(&[&m.nonce, m.body, &pending.c_img], &m.tag) {
            return Err(self.diagnose(&m.nonce, m.body, &m.tag, pending));
        }
        if self.seen.check_and_insert(&m.nonce) != Freshness::Fresh {
            return Err(local(RejectCode::Freshness, "r2 seen before"));
        }
        let out = CipherTensor::from_bytes(m.body, &self.lanes)
            .map_err(|e| local(RejectCode::Format, format!("c_eval: {e}")))?;
        if out.shape() != [10] {
            return Err(local(RejectCode::Format, format!("c_eval has shape {:?}", out.shape())));
        }
        Ok(decrypt_result(&self.lanes, &self.keys.keys.secret, &out)?)
    }

    /// Names the failure of a tag that does not verify against our own `c_img`.
    fn diagnose(&self, r2: &Nonce, c_eval: &[u8], tag: &[u8; 32], pending: &PendingRequest) -> ProtoError {
        let recent = self.recent.lock().unwrap_or_else(|p| p.into_inner());
        let other = recent
            .iter()
            .filter(|c| !Arc::ptr_eq(c, &pending.c_img))
            .any(|c| self.keys.mac.verify(&[r2, c_eval, c], tag));
        match (other, self.seen.contains(r2)) {
            (true, true) => local(RejectCode::Freshness, "response replayed from an earlier exchange"),
            (true, false) => local(RejectCode::Binding, "response is bound to a different request"),
            _ => local(RejectCode::Auth, "response tag does not verify"),
        }
    }

    /// One full exchange with the server at `addr`.
    pub fn classify<R: RngCore + CryptoRng>(
        &self,
        addr: impl ToSocketAddrs,
        image: &Tensor,
        rng: &mut R,
        max_frame: usize,
    ) -> Result<Decoded, ProtoError> {
        let (m1, pending) = self.request(image, rng)?;
        let m2 = exchange(addr, &m1, max_frame)?;
        self.finish(&m2, &pending)
    }
}

/// Sends one frame and reads the reply.
pub fn exchange(addr: impl ToSocketAddrs, frame: &[u8], max_frame: usize) -> Result<Vec<u8>, ProtoError> {
    let mut stream = TcpStream::connect(addr)?;
    let sent = stream.write_all(frame).and_then(|_| stream.shutdown(Shutdown::Write));
    // A server that refuses the frame early may still have answered.
    match read_frame(&mut stream, max_frame) {
        Err(ProtoError::Io(_)) if sent.is_err() => Err(sent.unwrap_err().into()),
        reply => reply,
    }
}
