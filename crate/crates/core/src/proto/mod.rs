//! Authenticated classification protocol.
//!
//! Setup hands the client `K` and the full key set, and the server `K`, the
//! public key and the relinearization key. Each classification is one
//! exchange on its own connection:
//!
//! * m1 = `r1 | c_img | HMAC(K, r1 | c_img)`
//! * m2 = `r2 | c_eval | HMAC(K, r2 | c_eval | c_img)`
//!
//! The server checks the tag, then the freshness of `r1`. The client checks
//! the tag against its own `c_img`, which binds the answer to the question,
//! then the freshness of `r2`. Every failure is a typed [`Rejection`].

mod client;
mod frame;
mod keys;
mod replay;
mod server;

use thiserror::Error;

use crate::enc_infer::EncError;
use crate::she::SheError;

pub use client::{exchange, Client, PendingRequest};
pub use frame::{
    decode_frame, decode_reject, decode_sealed, encode_frame, encode_reject, encode_sealed, parse_header, read_frame,
    MessageType, Nonce, Sealed, Tag, FRAME_HEADER_LEN, FRAME_MAGIC, NONCE_LEN, PROTOCOL_VERSION, TAG_LEN,
};
pub use keys::{LaneSpec, MacKey, ServerKeys, SessionKeys};
pub use replay::{Freshness, ReplayCache, DEFAULT_CAPACITY, DEFAULT_TTL};
pub use server::{serve, Evaluate, Server, DEFAULT_MAX_FRAME};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u8)]
pub enum RejectCode {
    Auth = 1,
    Freshness = 2,
    Format = 3,
    Binding = 4,
    /// The request was authentic but evaluating it failed.
    Evaluation = 5,
}

impl RejectCode {
    pub fn from_u8(v: u8) -> Option<Self> {
        use RejectCode::*;
        [Auth, Freshness, Format, Binding, Evaluation].into_iter().find(|c| *c as u8 == v)
    }

    pub fn name(self) -> &'static str {
        match self {
            RejectCode::Auth => "auth",
            RejectCode::Freshness => "freshness",
            RejectCode::Format => "format",
            RejectCode::Binding => "binding",
            RejectCode::Evaluation => "evaluation",
        }
    }
}

impl std::fmt::Display for RejectCode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// The protocol's abort.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{code}: {detail}")]
pub struct Rejection {
    pub code: RejectCode,
    pub detail: String,
}

impl Rejection {
    pub fn new(code: RejectCode, detail: impl Into<String>) -> Self {
        Self {
            code,
            detail: detail.into(),
        }
    }
}

#[derive(Debug, Error)]
pub enum ProtoError {
    /// This side refused the peer's message.
    #[error("rejected ({0})")]
    Local(Rejection),
    /// The peer answered with a reject frame.
    #[error("peer rejected the request ({0})")]
    Remote(Rejection),
    #[error(transparent)]
    Enc(#[from] EncError),
    #[error(transparent)]
    She(#[from] SheError),
    #[error("key file: {0}")]
    KeyFile(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl ProtoError {
    pub fn rejection(&self) -> Option<&Rejection> {
        match self {
            ProtoError::Local(r) | ProtoError::Remote(r) => Some(r),
            _ => None,
        }
    }
}
