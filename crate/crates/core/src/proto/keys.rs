//! Setup material: the shared MAC key and the homomorphic keys.
//!
//! Key files are a tagged container:
//!
//! `magic "LITDKEYS" | version u8 | role u8 | params len u32 | params | lane bits u32 | lane count u32 | K (32) | pk len u32 | pk | rlk len u32 | rlk`
//!
//! followed, for the client role only, by `sk len u32 | sk`.

use std::path::Path;
use std::sync::Arc;

use hmac::{Hmac, Mac};
use rand::rngs::OsRng;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use sha2::Sha256;

use super::frame::{Tag, TAG_LEN};
use super::ProtoError;
use crate::enc_infer::LaneSet;
use crate::profile::Profile;
use crate::she::serial::{params_from_bytes, params_to_bytes};
use crate::she::{keygen_ring, EncryptionParams, KeySet, PublicKey, RelinKey, RingContext, SecretKey};

const KEY_MAGIC: &[u8; 8] = b"LITDKEYS";
const KEY_VERSION: u8 = 1;
const ROLE_CLIENT: u8 = 1;
const ROLE_SERVER: u8 = 2;

type HmacSha256 = Hmac<Sha256>;

/// The 32-byte shared key `K`.
#[derive(Clone, PartialEq, Eq)]
pub struct MacKey([u8; 32]);

impl std::fmt::Debug for MacKey {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str("MacKey(..)")
    }
}

impl MacKey {
    pub fn from_bytes(bytes: [u8; 32]) -> Self {
        Self(bytes)
    }

    pub fn generate<R: RngCore>(rng: &mut R) -> Self {
        let mut k = [0u8; 32];
        rng.fill_bytes(&mut k);
        Self(k)
    }

    pub fn as_bytes(&self) -> &[u8; 32] {
        &self.0
    }

    fn hmac(&self, parts: &[&[u8]]) -> HmacSha256 {
        let mut m = HmacSha256::new_from_slice(&self.0).expect("HMAC accepts any key length");
        for p in parts {
            m.update(p);
        }
        m
    }

    /// HMAC-SHA256 over the concatenation of `parts`.
    pub fn tag(&self, parts: &[&[u8]]) -> Tag {
        self.hmac(parts).finalize().into_bytes().into()
    }

    /// Constant-time check of `tag` against the concatenation of `parts`.
    pub fn verify(&self, parts: &[&[u8]], tag: &Tag) -> bool {
        self.hmac(parts).verify_slice(tag).is_ok()
    }
}

/// The plaintext lanes both parties encrypt and decrypt under.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LaneSpec {
    pub bits: u32,
    pub count: usize,
}

impl LaneSpec {
    pub fn for_profile(profile: Profile) -> Self {
        Self {
            bits: profile.lane_bits(),
            count: profile.max_lanes(),
        }
    }

    pub fn build(self, ring: Arc<RingContext>) -> Result<LaneSet, ProtoError> {
        Ok(LaneSet::with_bits(ring, self.bits, self.count)?)
    }
}

/// Everything the client holds after setup, including the secret key.
#[derive(Debug, Clone)]
pub struct SessionKeys {
    pub mac: MacKey,
    pub keys: KeySet,
    pub lanes: LaneSpec,
    params: EncryptionParams,
    ring: Arc<RingContext>,
}

/// The server's share: `K`, the public key and the relinearization key.
#[derive(Debug, Clone)]
pub struct ServerKeys {
    pub mac: MacKey,
    pub public: PublicKey,
    pub relin: RelinKey,
    pub lanes: LaneSpec,
    params: EncryptionParams,
    ring: Arc<RingContext>,
}

impl SessionKeys {
    /// Fresh keys for a profile; deterministic when `seed` is given.
    pub fn setup(profile: Profile, seed: Option<u64>) -> Result<Self, ProtoError> {
        Self::setup_params(&profile.params(), LaneSpec::for_profile(profile), seed)
    }

    /// Fresh keys on the ring of `params`; its plaintext modulus is ignored.
    pub fn setup_params(params: &EncryptionParams, lanes: LaneSpec, seed: Option<u64>) -> Result<Self, ProtoError> {
        let ring = Arc::new(RingContext::new(params)?);
        lanes.build(ring.clone())?;
        let keys = keygen_ring(&ring, seed);
        let mac = match seed {
            Some(s) => {
                let mut rng = ChaCha20Rng::seed_from_u64(s);
                rng.set_stream(1);
                MacKey::generate(&mut rng)
            }
            None => MacKey::generate(&mut OsRng),
        };
        Ok(Self {
            mac,
            keys,
            lanes,
            params: params.clone(),
            ring,
        })
    }

    pub fn ring(&self) -> &Arc<RingContext> {
        &self.ring
    }

    pub fn params(&self) -> &EncryptionParams {
        &self.params
    }

    pub fn lane_set(&self) -> Result<LaneSet, ProtoError> {
        self.lanes.build(self.ring.clone())
    }

    pub fn server_keys(&self) -> ServerKeys {
        ServerKeys {
            mac: self.mac.clone(),
            public: self.keys.public.clone(),
            relin: self.keys.relin.clone(),
            lanes: self.lanes,
            params: self.params.clone(),
            ring: self.ring.clone(),
        }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = write_common(ROLE_CLIENT, &self.params, self.lanes, &self.mac, &self.keys.public, &self.keys.relin);
        put_blob(&mut out, &self.keys.secret.to_bytes());
        out
    }

    pub fn from_bytes(buf: &[u8]) -> Result<Self, ProtoError> {
        let mut r = KeyReader::new(buf, ROLE_CLIENT)?;
        let (params, ring, lanes, mac) = r.common()?;
        let public = PublicKey::from_bytes(r.blob()?, &ring)?;
        let relin = RelinKey::from_bytes(r.blob()?, &ring)?;
        let secret = SecretKey::from_bytes(r.blob()?, &ring)?;
        r.end()?;
        Ok(Self {
            mac,
            keys: KeySet { public, secret, relin },
            lanes,
            params,
            ring,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), ProtoError> {
        Ok(std::fs::write(path, self.to_bytes())?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ProtoError> {
        Self::from_bytes(&std::fs::read(path)?)
    }
}

impl ServerKeys {
    pub fn ring(&self) -> &Arc<RingContext> {
        &self.ring
    }

    pub fn params(&self) -> &EncryptionParams {
        &self.params
    }

    pub fn lane_set(&self) -> Result<LaneSet, ProtoError> {
        self.lanes.build(self.ring.clone())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        write_common(ROLE_SERVER, &self.params, self.lanes, &self.mac, &self.public, &self.relin)
    }

    pub fn from_bytes(buf: &[u8]) -> Result<Self, ProtoError> {
        let mut r = KeyReader::new(buf, ROLE_SERVER)?;
        let (params, ring, lanes, mac) = r.common()?;
        let public = PublicKey::from_bytes(r.blob()?, &ring)?;
        let relin = RelinKey::from_bytes(r.blob()?, &ring)?;
        r.end()?;
        Ok(Self {
            mac,
            public,
            relin,
            lanes,
            params,
            ring,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), ProtoError> {
        Ok(std::fs::write(path, self.to_bytes())?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ProtoError> {
        Self::from_bytes(&std::fs::read(path)?)
    }
}

fn put_blob(out: &mut Vec<u8>, blob: &[u8]) {
    out.extend_from_slice(&(blob.len() as u32).to_le_bytes());
    out.extend_from_slice(blob);
}

fn write_common(
    role: u8,
    params: &EncryptionParams,
    lanes: LaneSpec,
    mac: &MacKey,
    public: &PublicKey,
    relin: &RelinKey,
) -> Vec<u8> {
    let mut out = KEY_MAGIC.to_vec();
    out.push(KEY_VERSION);
    out.push(role);
    put_blob(&mut out, &params_to_bytes(params));
    out.extend_from_slice(&lanes.bits.to_le_bytes());
    out.extend_from_slice(&(lanes.count as u32).to_le_bytes());
    out.extend_from_slice(mac.as_bytes());
    put_blob(&mut out, &public.to_bytes());
    put_blob(&mut out, &relin.to_bytes());
    out
}

struct KeyReader<'a> {
    buf: &'a [u8],
    pos: usize,
}

fn bad(msg: impl Into<String>) -> ProtoError {
    ProtoError::KeyFile(msg.into())
}

impl<'a> KeyReader<'a> {
    fn new(buf: &'a [u8], role: u8) -> Result<Self, ProtoError> {
        let mut r = Self { buf, pos: 0 };
        if r.take(8)? != KEY_MAGIC {
            return Err(bad("not a key file"));
        }
        let version = r.take(1)?[0];
        if version != KEY_VERSION {
            return Err(bad(format!("unsupported key file version {version}")));
        }
        let found = r.take(1)?[0];
        if found != role {
            let name = |r| if r == ROLE_CLIENT { "client" } else { "server" };
            return Err(bad(format!("expected a {} key file, found a {} one", name(role), name(found))));
        }
        Ok(r)
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8], ProtoError> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.buf.len()).ok_or_else(|| bad("truncated key file"))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn blob(&mut self) -> Result<&'a [u8], ProtoError> {
        let len = self.u32()? as usize;
        self.take(len)
    }

    fn u32(&mut self) -> Result<u32, ProtoError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn common(&mut self) -> Result<(EncryptionParams, Arc<RingContext>, LaneSpec, MacKey), ProtoError> {
        let params = params_from_bytes(self.blob()?)?;
        let ring = Arc::new(RingContext::new(&params)?);
        let lanes = LaneSpec {
            bits: self.u32()?,
            count: self.u32()? as usize,
        };
        lanes.build(ring.clone())?;
        let mac = MacKey::from_bytes(self.take(TAG_LEN)?.try_into().unwrap());
        Ok((params, ring, lanes, mac))
    }

    fn end(&self) -> Result<(), ProtoError> {
        if self.pos != self.buf.len() {
            return Err(bad(format!("{} trailing bytes", self.buf.len() - self.pos)));
        }
        Ok(())
    }
}
